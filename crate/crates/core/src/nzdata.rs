//! Neumann-Zagier data: ingestion from gluing matrices, validation, quad
//! choices and flattening solving.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exactfield::{smith_solve, FieldElement, IntMatrix, NumberField};
use crate::{Error, Result};

/// z' = 1/(1-z)
pub fn shape_prime(z: &FieldElement) -> Result<FieldElement> {
    let one = FieldElement::one(z.field());
    one.sub(z).inv()
}

/// z'' = 1 - 1/z
pub fn shape_double_prime(z: &FieldElement) -> Result<FieldElement> {
    let one = FieldElement::one(z.field());
    Ok(one.sub(&z.inv()?))
}

/// The tuple (A, B, nu, z, f, f'') of integer matrices/vectors and shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct NZDatum {
    pub a: IntMatrix,
    pub b: IntMatrix,
    pub nu: Vec<i64>,
    pub z: Vec<FieldElement>,
    pub f: Vec<i64>,
    pub fpp: Vec<i64>,
}

impl NZDatum {
    pub fn new(
        a: IntMatrix,
        b: IntMatrix,
        nu: Vec<i64>,
        z: Vec<FieldElement>,
        f: Vec<i64>,
        fpp: Vec<i64>,
    ) -> Result<Self> {
        let d = NZDatum { a, b, nu, z, f, fpp };
        d.validate()?;
        Ok(d)
    }

    pub fn size(&self) -> usize {
        self.a.cols()
    }

    pub fn field(&self) -> &Arc<NumberField> {
        self.z[0].field()
    }

    /// Checks squareness, A B^t symmetry, rank N of (A|B), the flattening
    /// equation and nondegenerate shapes.
    pub fn validate(&self) -> Result<()> {
        let n = self.a.cols();
        if self.a.rows() != n || self.b.rows() != n || self.b.cols() != n {
            return Err(Error::InvalidDatum("A and B must be square of equal size".into()));
        }
        if self.nu.len() != n || self.z.len() != n || self.f.len() != n || self.fpp.len() != n {
            return Err(Error::InvalidDatum("vector lengths must match N".into()));
        }
        if n == 0 {
            return Err(Error::InvalidDatum("empty datum".into()));
        }
        let report = check_symplectic(&self.a, &self.b)?;
        if !report.ok() {
            return Err(Error::InvalidDatum(report.describe()));
        }
        let af = self.a.mul_vec(&self.f)?;
        let bf = self.b.mul_vec(&self.fpp)?;
        if af
            .iter()
            .zip(&bf)
            .zip(&self.nu)
            .any(|((x, y), nu)| x + y != *nu)
        {
            return Err(Error::FlatteningViolated);
        }
        let one = FieldElement::one(self.field());
        for z in &self.z {
            if z.is_zero() || *z == one {
                return Err(Error::DegenerateShape(z.to_string()));
            }
        }
        Ok(())
    }

    /// The standard two-tetrahedron figure-eight knot complement datum:
    /// A = [[2,2],[1,1]], B = [[1,1],[1,0]], nu = (2,1), z = (zeta6, zeta6),
    /// f = (0,1), f'' = (0,0).
    pub fn fig8() -> Self {
        let field = NumberField::zeta6();
        let z = FieldElement::generator(&field);
        NZDatum::new(
            IntMatrix::from_rows(&[vec![2, 2], vec![1, 1]]).unwrap(),
            IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap(),
            vec![2, 1],
            vec![z.clone(), z],
            vec![0, 1],
            vec![0, 0],
        )
        .expect("fig8 datum is valid")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let field = self.field();
        serde_json::json!({
            "field": {
                "minpoly": field.minpoly().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "root": [field.root().re, field.root().im],
            },
            "A": (0..self.a.rows()).map(|i| self.a.row(i).to_vec()).collect::<Vec<_>>(),
            "B": (0..self.b.rows()).map(|i| self.b.row(i).to_vec()).collect::<Vec<_>>(),
            "nu": self.nu,
            "z": self.z.iter().map(|e| e.to_strings()).collect::<Vec<_>>(),
            "f": self.f,
            "fpp": self.fpp,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let field = parse_field(v.get("field").ok_or_else(|| Error::Json("missing field".into()))?)?;
        let a = parse_int_matrix(v.get("A").ok_or_else(|| Error::Json("missing A".into()))?)?;
        let b = parse_int_matrix(v.get("B").ok_or_else(|| Error::Json("missing B".into()))?)?;
        let nu = parse_int_vec(v.get("nu").ok_or_else(|| Error::Json("missing nu".into()))?)?;
        let zv = v
            .get("z")
            .and_then(|z| z.as_array())
            .ok_or_else(|| Error::Json("missing z".into()))?;
        let mut z = Vec::with_capacity(zv.len());
        for e in zv {
            let parts: Vec<String> = e
                .as_array()
                .ok_or_else(|| Error::Json("z entries must be coefficient arrays".into()))?
                .iter()
                .map(|s| s.as_str().unwrap_or_default().to_string())
                .collect();
            z.push(FieldElement::from_strings(&field, &parts)?);
        }
        let f = parse_int_vec(v.get("f").ok_or_else(|| Error::Json("missing f".into()))?)?;
        let fpp = parse_int_vec(v.get("fpp").ok_or_else(|| Error::Json("missing fpp".into()))?)?;
        NZDatum::new(a, b, nu, z, f, fpp)
    }
}

pub fn parse_field(v: &serde_json::Value) -> Result<Arc<NumberField>> {
    let mp = v
        .get("minpoly")
        .and_then(|m| m.as_array())
        .ok_or_else(|| Error::Json("field.minpoly must be an array".into()))?;
    let mut coeffs = Vec::with_capacity(mp.len());
    for c in mp {
        let b = match c {
            serde_json::Value::Number(n) => num_bigint::BigInt::from(
                n.as_i64().ok_or_else(|| Error::Json("minpoly coefficients must be integers".into()))?,
            ),
            serde_json::Value::String(s) => s
                .parse()
                .map_err(|_| Error::Json(format!("bad integer '{}'", s)))?,
            _ => return Err(Error::Json("minpoly coefficients must be integers".into())),
        };
        coeffs.push(b);
    }
    let root = v
        .get("root")
        .and_then(|r| r.as_array())
        .ok_or_else(|| Error::Json("field.root must be [re, im]".into()))?;
    if root.len() != 2 {
        return Err(Error::Json("field.root must be [re, im]".into()));
    }
    let re = root[0].as_f64().unwrap_or(f64::NAN);
    let im = root[1].as_f64().unwrap_or(f64::NAN);
    NumberField::from_bigint(coeffs, Complex64::new(re, im))
}

fn parse_int_matrix(v: &serde_json::Value) -> Result<IntMatrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Json("matrix must be an array of rows".into()))?;
    let mut data = Vec::new();
    for r in rows {
        data.push(parse_int_vec(r)?);
    }
    IntMatrix::from_rows(&data)
}

fn parse_int_vec(v: &serde_json::Value) -> Result<Vec<i64>> {
    v.as_array()
        .ok_or_else(|| Error::Json("expected integer array".into()))?
        .iter()
        .map(|x| {
            x.as_i64()
                .ok_or_else(|| Error::Json("expected integer".into()))
        })
        .collect()
}

/// Gluing matrices of an ideal triangulation: N edge rows followed by one
/// chosen peripheral row per cusp, each (N+r) x N.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GluingData {
    pub g: Vec<Vec<i64>>,
    pub gp: Vec<Vec<i64>>,
    pub gpp: Vec<Vec<i64>>,
    /// row indices of the peripheral rows; the rest are edge rows
    pub peripheral_rows: Vec<usize>,
}

impl GluingData {
    pub fn n_tets(&self) -> usize {
        self.g.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn n_cusps(&self) -> usize {
        self.peripheral_rows.len()
    }

    /// Hard checks (shape, nonnegative edge rows) plus soft warnings
    /// (column sums of G+G'+G'' over edge rows should be 6).
    pub fn validate(&self) -> Result<Vec<String>> {
        let n = self.n_tets();
        let total = self.g.len();
        if self.gp.len() != total || self.gpp.len() != total {
            return Err(Error::InvalidDatum("G, G', G'' must have equal row counts".into()));
        }
        if total != n + self.n_cusps() {
            return Err(Error::InvalidDatum(format!(
                "expected {} + {} rows, got {}",
                n,
                self.n_cusps(),
                total
            )));
        }
        for rows in [&self.g, &self.gp, &self.gpp] {
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidDatum("ragged gluing rows".into()));
            }
        }
        for &p in &self.peripheral_rows {
            if p >= total {
                return Err(Error::InvalidDatum(format!("peripheral row {} out of range", p)));
            }
        }
        let mut warnings = Vec::new();
        for i in 0..total {
            if self.peripheral_rows.contains(&i) {
                continue;
            }
            for j in 0..n {
                if self.g[i][j] < 0 || self.gp[i][j] < 0 || self.gpp[i][j] < 0 {
                    return Err(Error::InvalidDatum(format!(
                        "edge row {} has a negative winding count",
                        i
                    )));
                }
            }
        }
        for j in 0..n {
            let mut s = 0;
            for i in 0..total {
                if self.peripheral_rows.contains(&i) {
                    continue;
                }
                s += self.g[i][j] + self.gp[i][j] + self.gpp[i][j];
            }
            if s != 6 {
                warnings.push(format!(
                    "column {} of G+G'+G'' sums to {} over edge rows (expected 6)",
                    j, s
                ));
            }
        }
        Ok(warnings)
    }
}

/// A reduced datum before shapes are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDatum {
    pub a: IntMatrix,
    pub b: IntMatrix,
    pub nu: Vec<i64>,
    pub flattening: Option<(Vec<i64>, Vec<i64>)>,
}

/// Removes the chosen edge rows, appends the peripheral rows, and forms
/// A = G - G', B = G'' - G', nu = (2,...,2,0,...,0) - G' 1. Optionally solves
/// the flattening equation A f + B f'' = nu over the integers.
pub fn reduce_gluing(
    gluing: &GluingData,
    removed_edges: &[usize],
    with_flattening: bool,
) -> Result<ReducedDatum> {
    gluing.validate()?;
    let n = gluing.n_tets();
    let r = gluing.n_cusps();
    if removed_edges.len() != r {
        return Err(Error::InvalidDatum(format!(
            "must remove exactly {} edge rows (one per cusp), got {}",
            r,
            removed_edges.len()
        )));
    }
    let total = gluing.g.len();
    let edge_rows: Vec<usize> = (0..total)
        .filter(|i| !gluing.peripheral_rows.contains(i))
        .collect();
    for &e in removed_edges {
        if !edge_rows.contains(&e) {
            return Err(Error::InvalidDatum(format!("row {} is not an edge row", e)));
        }
    }
    // kept edge rows in order, then peripheral rows in order
    let kept: Vec<(usize, i64)> = edge_rows
        .iter()
        .filter(|e| !removed_edges.contains(e))
        .map(|&i| (i, 2i64))
        .chain(gluing.peripheral_rows.iter().map(|&i| (i, 0i64)))
        .collect();
    if kept.len() != n {
        return Err(Error::InvalidDatum(format!(
            "reduction must leave {} rows, got {}",
            n,
            kept.len()
        )));
    }
    let mut a = IntMatrix::zeros(n, n);
    let mut b = IntMatrix::zeros(n, n);
    let mut nu = vec![0i64; n];
    for (out, &(i, rhs)) in kept.iter().enumerate() {
        let mut gp_sum = 0;
        for j in 0..n {
            a.set(out, j, gluing.g[i][j] - gluing.gp[i][j]);
            b.set(out, j, gluing.gpp[i][j] - gluing.gp[i][j]);
            gp_sum += gluing.gp[i][j];
        }
        nu[out] = rhs - gp_sum;
    }
    let report = check_symplectic(&a, &b)?;
    if report.rank < n {
        return Err(Error::InvalidDatum(format!(
            "this edge-removal choice gives rank {} < {}; pick different rows",
            report.rank, n
        )));
    }
    if !report.abt_symmetric {
        return Err(Error::InvalidDatum(
            "reduced A B^t is not symmetric; input is not a valid gluing export".into(),
        ));
    }
    let flattening = if with_flattening {
        let ab = a.hcat(&b)?;
        let sol = smith_solve(&ab, &nu).ok_or(Error::NoIntegerFlattening)?;
        let (f, fpp) = sol.split_at(n);
        Some((f.to_vec(), fpp.to_vec()))
    } else {
        None
    };
    Ok(ReducedDatum { a, b, nu, flattening })
}

/// Per-tetrahedron quad rotation: 0 keeps z, 1 rotates to z', 2 rotates to z''.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadChoice(pub Vec<u8>);

impl QuadChoice {
    pub fn identity(n: usize) -> Self {
        QuadChoice(vec![0; n])
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&q| q == 0)
    }
}

/// Column-wise quad rotation of a datum. Shapes rotate z -> z' -> z'', the
/// columns of (A|B) transform per block, nu drops the rotated column sums,
/// and the flattening is transported cyclically then repaired if needed.
pub fn apply_quad(nz: &NZDatum, q: &QuadChoice) -> Result<NZDatum> {
    let n = nz.size();
    if q.0.len() != n {
        return Err(Error::InvalidDatum(format!(
            "quad choice length {} != {}",
            q.0.len(),
            n
        )));
    }
    if q.0.iter().any(|&x| x > 2) {
        return Err(Error::InvalidDatum("quad entries must be 0, 1 or 2".into()));
    }
    let mut a = IntMatrix::zeros(n, n);
    let mut b = IntMatrix::zeros(n, n);
    let mut nu = nz.nu.clone();
    let mut z = Vec::with_capacity(n);
    let mut f = vec![0i64; n];
    let mut fpp = vec![0i64; n];
    for j in 0..n {
        match q.0[j] {
            0 => {
                for i in 0..n {
                    a.set(i, j, nz.a.at(i, j));
                    b.set(i, j, nz.b.at(i, j));
                }
                z.push(nz.z[j].clone());
                f[j] = nz.f[j];
                fpp[j] = nz.fpp[j];
            }
            1 => {
                // (a, b) -> (-b, a - b); z -> z'; (f, f'') -> (1 - f - f'', f)
                for i in 0..n {
                    a.set(i, j, -nz.b.at(i, j));
                    b.set(i, j, nz.a.at(i, j) - nz.b.at(i, j));
                    nu[i] -= nz.b.at(i, j);
                }
                z.push(shape_prime(&nz.z[j])?);
                f[j] = 1 - nz.f[j] - nz.fpp[j];
                fpp[j] = nz.f[j];
            }
            _ => {
                // (a, b) -> (-a + b, -a); z -> z''; (f, f'') -> (f'', 1 - f - f'')
                for i in 0..n {
                    a.set(i, j, -nz.a.at(i, j) + nz.b.at(i, j));
                    b.set(i, j, -nz.a.at(i, j));
                    nu[i] -= nz.a.at(i, j);
                }
                z.push(shape_double_prime(&nz.z[j])?);
                f[j] = nz.fpp[j];
                fpp[j] = 1 - nz.f[j] - nz.fpp[j];
            }
        }
    }
    // transported flattening is a candidate; repair via Smith solving when it
    // misses (the transport display is validated, never trusted)
    let af = a.mul_vec(&f)?;
    let bf = b.mul_vec(&fpp)?;
    let ok = af.iter().zip(&bf).zip(&nu).all(|((x, y), v)| x + y == *v);
    if !ok {
        let ab = a.hcat(&b)?;
        let sol = smith_solve(&ab, &nu).ok_or(Error::NoIntegerFlattening)?;
        let (fs, fps) = sol.split_at(n);
        f = fs.to_vec();
        fpp = fps.to_vec();
    }
    NZDatum::new(a, b, nu, z, f, fpp)
}

/// Determinants relevant to nondegeneracy: det B != 0 and det Lambda != 0.
fn quad_is_nondegenerate(nz: &NZDatum) -> bool {
    match nz.b.det_big() {
        Ok(d) if !num_traits::Zero::is_zero(&d) => {}
        _ => return false,
    }
    match crate::phi::lambda_matrix(nz) {
        Ok(_) => true,
        Err(_) => false,
    }
}

/// Searches for a quad choice with det B != 0 and det Lambda != 0:
/// exhaustive in lex order for N <= 12, seeded random greedy beyond. The
/// lexicographically smallest passing choice wins, so results are stable.
pub fn find_nondegenerate_quad(nz: &NZDatum) -> Result<QuadChoice> {
    let n = nz.size();
    if n <= 12 {
        let mut q = vec![0u8; n];
        loop {
            let choice = QuadChoice(q.clone());
            if let Ok(cand) = apply_quad(nz, &choice) {
                if quad_is_nondegenerate(&cand) {
                    return Ok(choice);
                }
            }
            // increment base-3 counter
            let mut i = n;
            loop {
                if i == 0 {
                    return Err(Error::AllQuadsDegenerate);
                }
                i -= 1;
                if q[i] < 2 {
                    q[i] += 1;
                    for x in q.iter_mut().skip(i + 1) {
                        *x = 0;
                    }
                    break;
                }
            }
        }
    }
    // randomized greedy for large N, deterministic seed
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10_000 {
        let q = QuadChoice((0..n).map(|_| rng.gen_range(0..3u8)).collect());
        if let Ok(cand) = apply_quad(nz, &q) {
            if quad_is_nondegenerate(&cand) {
                return Ok(q);
            }
        }
    }
    Err(Error::AllQuadsDegenerate)
}

/// Half-symplectic check report: A B^t symmetric and (A|B) of full rank.
#[derive(Debug, Clone)]
pub struct SymplecticReport {
    pub abt_symmetric: bool,
    pub rank: usize,
    pub size: usize,
    pub witness: Option<String>,
}

impl SymplecticReport {
    pub fn ok(&self) -> bool {
        self.abt_symmetric && self.rank == self.size
    }

    pub fn describe(&self) -> String {
        match &self.witness {
            Some(w) => w.clone(),
            None => "half-symplectic".into(),
        }
    }
}

pub fn check_symplectic(a: &IntMatrix, b: &IntMatrix) -> Result<SymplecticReport> {
    if a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows() {
        return Err(Error::ShapeMismatch("A and B must be square of equal size".into()));
    }
    let n = a.rows();
    let abt = a.mul(&b.transpose())?;
    let mut witness = None;
    let mut sym = true;
    'outer: for i in 0..n {
        for j in (i + 1)..n {
            if abt.at(i, j) != abt.at(j, i) {
                sym = false;
                witness = Some(format!(
                    "(A B^t)[{},{}] = {} but (A B^t)[{},{}] = {}",
                    i,
                    j,
                    abt.at(i, j),
                    j,
                    i,
                    abt.at(j, i)
                ));
                break 'outer;
            }
        }
    }
    let field = NumberField::rationals();
    let rank = a.hcat(b)?.to_exact(&field).rank();
    if sym && rank < n && witness.is_none() {
        witness = Some(format!("rank(A|B) = {} < {}", rank, n));
    }
    Ok(SymplecticReport { abt_symmetric: sym, rank, size: n, witness })
}

/// Numeric residuals of the exponentiated gluing equations
/// prod_j z_j^{A_ij} (z''_j)^{B_ij} = (-1)^{nu_i}, and optionally of the
/// logarithmic form with a user-supplied branch vector.
#[derive(Debug, Clone)]
pub struct GluingResidualReport {
    /// per-row |LHS - (-1)^nu| of the exponentiated equations
    pub exp_residuals: Vec<f64>,
    /// per-row |sum A log z + B log z'' - pi i nu - 2 pi i branch|
    pub log_residuals: Option<Vec<f64>>,
}

impl GluingResidualReport {
    pub fn max_exp_residual(&self) -> f64 {
        self.exp_residuals.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn check_gluing_numeric(
    nz: &NZDatum,
    _precision: f64,
    branch: Option<&[i64]>,
) -> Result<GluingResidualReport> {
    let n = nz.size();
    let zc: Vec<Complex64> = nz.z.iter().map(|z| z.embed()).collect();
    if zc.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericDomain("shape embedding unavailable".into()));
    }
    let zppc: Vec<Complex64> = nz
        .z
        .iter()
        .map(|z| shape_double_prime(z).map(|w| w.embed()))
        .collect::<Result<_>>()?;
    let mut exp_residuals = Vec::with_capacity(n);
    for i in 0..n {
        let mut prod = Complex64::new(1.0, 0.0);
        for j in 0..n {
            prod *= zc[j].powi(nz.a.at(i, j) as i32);
            prod *= zppc[j].powi(nz.b.at(i, j) as i32);
        }
        let sign = if nz.nu[i].rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        exp_residuals.push((prod - Complex64::new(sign, 0.0)).norm());
    }
    let log_residuals = branch.map(|br| {
        let pi = std::f64::consts::PI;
        (0..n)
            .map(|i| {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    s += zc[j].ln() * nz.a.at(i, j) as f64;
                    s += zppc[j].ln() * nz.b.at(i, j) as f64;
                }
                s -= Complex64::new(0.0, pi) * nz.nu[i] as f64;
                let b = br.get(i).copied().unwrap_or(0);
                s -= Complex64::new(0.0, 2.0 * pi) * b as f64;
                s.norm()
            })
            .collect()
    });
    Ok(GluingResidualReport { exp_residuals, log_residuals })
}

/// Column permutation + associated vector relabeling used by the reorder move
/// (kept here so nzdata owns all datum surgery).
pub fn permute_columns(nz: &NZDatum, perm: &[usize]) -> Result<NZDatum> {
    let n = nz.size();
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::BadPermutation);
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::BadPermutation);
        }
        seen[p] = true;
    }
    let mut a = IntMatrix::zeros(n, n);
    let mut b = IntMatrix::zeros(n, n);
    let mut z = Vec::with_capacity(n);
    let mut f = vec![0i64; n];
    let mut fpp = vec![0i64; n];
    for (newj, &oldj) in perm.iter().enumerate() {
        for i in 0..n {
            a.set(i, newj, nz.a.at(i, oldj));
            b.set(i, newj, nz.b.at(i, oldj));
        }
        z.push(nz.z[oldj].clone());
        f[newj] = nz.f[oldj];
        fpp[newj] = nz.fpp[oldj];
    }
    NZDatum::new(a, b, nz.nu.clone(), z, f, fpp)
}
