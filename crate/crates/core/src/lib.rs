//! Exact computation of the perturbative invariant `Phi(hbar)` of a
//! Neumann-Zagier datum, together with the move calculus (elementary, quad,
//! 2-3 Pachner) and exact verifiers for the underlying `psi_hbar` identities
//! (Fourier, pentagon, inversion, q-difference).
//!
//! All series coefficients live in an exact number field; nothing is floated
//! except the optional numeric residual checks and the q-Pochhammer
//! asymptotics cross-check.

pub mod exactfield;
pub mod gauss;
pub mod identities;
pub mod moves;
pub mod nzdata;
pub mod phi;
pub mod polylog;
pub mod psi;
pub mod series;

pub use exactfield::{ExactMatrix, FieldElement, IntMatrix, NumberField};
pub use gauss::QuadraticForm;
pub use moves::MoveReport;
pub use nzdata::{GluingData, NZDatum, QuadChoice};
pub use phi::PhiResult;
pub use series::{HbarSeries, XPoly};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero in the coefficient field")]
    DivisionByZero,
    #[error("minimal polynomial must be monic with integer coefficients")]
    NotMonic,
    #[error("minimal polynomial is reducible over Q: factor {0}")]
    ReducibleMinpoly(String),
    #[error("number fields of degree > 8 are not supported (got {0})")]
    DegreeTooLarge(usize),
    #[error("supplied root is not a root of the minimal polynomial (|m(root)| = {0:.3e})")]
    BadEmbedding(f64),
    #[error("operands belong to different number fields")]
    FieldMismatch,
    #[error("matrix is singular (det = 0)")]
    SingularMatrix,
    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix must be square")]
    NotSquare,
    #[error("matrix must be symmetric: {0}")]
    NotSymmetric(String),
    #[error("series operands have different variable counts ({0} vs {1})")]
    VarMismatch(usize, usize),
    #[error("variable index {0} out of range for {1} variables")]
    VarOutOfRange(usize, usize),
    #[error("series exp requires the constant (hbar^0) term to vanish")]
    NonzeroConstantTerm,
    #[error("operation requires a series with constant term 1")]
    UnitConstantRequired,
    #[error("degenerate shape: z = {0} must avoid {{0, 1}}")]
    DegenerateShape(String),
    #[error("polylogarithm pole at z = 1")]
    PolylogPole,
    #[error("polylog index {0} not supported here")]
    PolylogIndex(i64),
    #[error("numeric polylog requires |z| < 1 (got |z| = {0})")]
    PolylogDomain(f64),
    #[error("datum validation failed: {0}")]
    InvalidDatum(String),
    #[error("matrix B is singular; run a quad search first")]
    SingularB,
    #[error("quadratic form Lambda is degenerate (det = 0); datum 1-loop value {0}")]
    DegenerateLambda(String),
    #[error("all 3^N quad choices are degenerate for this datum")]
    AllQuadsDegenerate,
    #[error("invalid permutation")]
    BadPermutation,
    #[error("row operation matrix must have determinant +-1 (got {0})")]
    NotUnimodular(String),
    #[error("flattening constraint A f + B f'' = nu violated")]
    FlatteningViolated,
    #[error("no integer flattening exists for this datum")]
    NoIntegerFlattening,
    #[error("datum is not in the image pattern of a 2-3 move: {0}")]
    NotPachnerImage(String),
    #[error("Pachner 2-3 move is degenerate: z0 = z_i + z_j - z_i z_j in {{0, 1}}")]
    DegeneratePachner,
    #[error("pentagon shapes degenerate: {0}")]
    DegeneratePentagon(String),
    #[error("domain violation in numeric check: {0}")]
    NumericDomain(String),
    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
