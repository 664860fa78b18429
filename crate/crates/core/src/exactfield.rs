//! Exact arithmetic over Q and small number fields, exact linear algebra,
//! and integer lattice solving via Smith normal form.
//!
//! A [`NumberField`] is Q[t]/(m(t)) for a monic integer polynomial m of
//! degree <= 8 together with a chosen complex root (the embedding).
//! [`FieldElement`]s are coefficient vectors reduced mod m; all arithmetic
//! is exact. Degree-1 fields model plain Q.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Absolute tolerance scale for checking that the chosen root actually
/// annihilates the minimal polynomial.
const ROOT_TOL: f64 = 1e-8;

/// A number field Q[t]/(m(t)) with a chosen complex embedding of t.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberField {
    /// Monic minimal polynomial, coefficients `minpoly[i]` of `t^i`,
    /// length `degree + 1`.
    minpoly: Vec<BigInt>,
    /// Complex approximation of the chosen root of `minpoly`.
    root: Complex64,
}

impl NumberField {
    /// The rationals, modelled as the degree-1 field Q[t]/(t).
    pub fn rationals() -> Arc<Self> {
        Arc::new(NumberField {
            minpoly: vec![BigInt::zero(), BigInt::one()],
            root: Complex64::new(0.0, 0.0),
        })
    }

    /// Q(zeta_6) with minimal polynomial t^2 - t + 1 and root e^{i pi/3}.
    pub fn zeta6() -> Arc<Self> {
        NumberField::new(&[1, -1, 1], Complex64::new(0.5, 0.75f64.sqrt())).unwrap()
    }

    /// Builds a field from integer minpoly coefficients (constant first,
    /// monic) and a complex root approximation.
    pub fn new(minpoly: &[i64], root: Complex64) -> Result<Arc<Self>> {
        let coeffs: Vec<BigInt> = minpoly.iter().map(|&c| BigInt::from(c)).collect();
        Self::from_bigint(coeffs, root)
    }

    pub fn from_bigint(minpoly: Vec<BigInt>, root: Complex64) -> Result<Arc<Self>> {
        if minpoly.len() < 2 || minpoly.last().map(|c| !c.is_one()).unwrap_or(true) {
            return Err(Error::NotMonic);
        }
        let d = minpoly.len() - 1;
        if d > 8 {
            return Err(Error::DegreeTooLarge(d));
        }
        if d > 1 {
            screen_irreducible(&minpoly)?;
        }
        // |m(root)| must vanish to embedding accuracy, scaled by the height.
        let height: f64 = minpoly
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::MAX).abs())
            .fold(1.0, f64::max);
        let scale = height * root.norm().max(1.0).powi(d as i32);
        let mut val = Complex64::new(0.0, 0.0);
        for c in minpoly.iter().rev() {
            val = val * root + Complex64::new(c.to_f64().unwrap_or(0.0), 0.0);
        }
        if val.norm() >= ROOT_TOL * scale {
            return Err(Error::BadEmbedding(val.norm()));
        }
        Ok(Arc::new(NumberField { minpoly, root }))
    }

    pub fn degree(&self) -> usize {
        self.minpoly.len() - 1
    }

    pub fn root(&self) -> Complex64 {
        self.root
    }

    pub fn minpoly(&self) -> &[BigInt] {
        &self.minpoly
    }

    pub fn is_rationals(&self) -> bool {
        self.degree() == 1
    }
}

/// Degree-1 rational-root screening plus a bounded search for monic integer
/// quadratic factors. Degrees above 3 are screened, not proven irreducible.
fn screen_irreducible(m: &[BigInt]) -> Result<()> {
    let d = m.len() - 1;
    // rational roots of a monic integer polynomial are integer divisors of m[0]
    if m[0].is_zero() {
        return Err(Error::ReducibleMinpoly("t".into()));
    }
    for cand in small_divisors(&m[0], 10_000) {
        for r in [cand.clone(), -cand] {
            let mut v = BigInt::zero();
            for c in m.iter().rev() {
                v = v * &r + c;
            }
            if v.is_zero() {
                return Err(Error::ReducibleMinpoly(format!("t - ({})", r)));
            }
        }
    }
    if d >= 4 {
        // try monic quadratic factors t^2 + a t + b with b | m[0]
        let bound = m.iter().map(|c| c.magnitude().bits()).max().unwrap_or(0) + d as u64;
        let abound = 1i64 << bound.min(12);
        for bmag in small_divisors(&m[0], 10_000) {
            for b in [bmag.clone(), -bmag] {
                for a in -abound..=abound {
                    if divides_quadratic(m, &BigInt::from(a), &b) {
                        return Err(Error::ReducibleMinpoly(format!("t^2 + ({})t + ({})", a, b)));
                    }
                }
            }
        }
    }
    Ok(())
}

fn small_divisors(n: &BigInt, cap: u64) -> Vec<BigInt> {
    let n = n.abs();
    let mut out = Vec::new();
    let mut k = BigInt::one();
    let cap = BigInt::from(cap);
    while &k * &k <= n && k <= cap {
        if (&n % &k).is_zero() {
            out.push(k.clone());
            out.push(&n / &k);
        }
        k += 1;
    }
    out
}

/// Exact division check of `m` by t^2 + a t + b via synthetic division.
fn divides_quadratic(m: &[BigInt], a: &BigInt, b: &BigInt) -> bool {
    let d = m.len() - 1;
    let mut rem: Vec<BigInt> = m.to_vec();
    for i in (2..=d).rev() {
        let q = rem[i].clone();
        if q.is_zero() {
            continue;
        }
        rem[i] = BigInt::zero();
        rem[i - 1] -= &q * a;
        rem[i - 2] -= &q * b;
    }
    rem[0].is_zero() && rem[1].is_zero()
}

/// An element of a [`NumberField`]: a polynomial of degree < d in the field
/// generator, with exact rational coefficients.
#[derive(Debug, Clone)]
pub struct FieldElement {
    field: Arc<NumberField>,
    /// length = field.degree()
    coeffs: Vec<BigRational>,
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.same_field(other) && self.coeffs == other.coeffs
    }
}
impl Eq for FieldElement {}

impl FieldElement {
    pub fn zero(field: &Arc<NumberField>) -> Self {
        FieldElement {
            field: field.clone(),
            coeffs: vec![BigRational::zero(); field.degree()],
        }
    }

    pub fn one(field: &Arc<NumberField>) -> Self {
        Self::from_rational(field, BigRational::one())
    }

    pub fn from_rational(field: &Arc<NumberField>, q: BigRational) -> Self {
        let mut coeffs = vec![BigRational::zero(); field.degree()];
        coeffs[0] = q;
        FieldElement { field: field.clone(), coeffs }
    }

    pub fn from_i64(field: &Arc<NumberField>, n: i64) -> Self {
        Self::from_rational(field, BigRational::from(BigInt::from(n)))
    }

    pub fn from_ratio(field: &Arc<NumberField>, p: i64, q: i64) -> Self {
        Self::from_rational(field, BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    /// The generator t of the field (for rationals this is 0).
    pub fn generator(field: &Arc<NumberField>) -> Self {
        let mut coeffs = vec![BigRational::zero(); field.degree()];
        if field.degree() > 1 {
            coeffs[1] = BigRational::one();
        }
        FieldElement { field: field.clone(), coeffs }
    }

    pub fn from_coeffs(field: &Arc<NumberField>, coeffs: Vec<BigRational>) -> Result<Self> {
        if coeffs.len() != field.degree() {
            return Err(Error::ShapeMismatch(format!(
                "element needs {} coefficients, got {}",
                field.degree(),
                coeffs.len()
            )));
        }
        Ok(FieldElement { field: field.clone(), coeffs })
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    fn same_field(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.field, &other.field) || self.field == other.field
    }

    fn check_field(&self, other: &Self) -> Result<()> {
        if self.same_field(other) {
            Ok(())
        } else {
            Err(Error::FieldMismatch)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    /// Returns the rational value when the element lies in Q.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert!(self.same_field(other));
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        FieldElement { field: self.field.clone(), coeffs }
    }

    pub fn add_assign_ref(&mut self, other: &Self) {
        debug_assert!(self.same_field(other));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert!(self.same_field(other));
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        FieldElement { field: self.field.clone(), coeffs }
    }

    pub fn neg(&self) -> Self {
        FieldElement {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert!(self.same_field(other));
        let d = self.field.degree();
        if d == 1 {
            return FieldElement {
                field: self.field.clone(),
                coeffs: vec![&self.coeffs[0] * &other.coeffs[0]],
            };
        }
        // polynomial product, degree <= 2d-2
        let mut prod = vec![BigRational::zero(); 2 * d - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                prod[i + j] += a * b;
            }
        }
        // reduce mod the monic minpoly
        let m = &self.field.minpoly;
        for i in (d..prod.len()).rev() {
            if prod[i].is_zero() {
                continue;
            }
            let q = prod[i].clone();
            prod[i] = BigRational::zero();
            for k in 0..d {
                if !m[k].is_zero() {
                    prod[i - d + k] -= &q * BigRational::from(m[k].clone());
                }
            }
        }
        prod.truncate(d);
        FieldElement { field: self.field.clone(), coeffs: prod }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        FieldElement {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm in Q[t].
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let d = self.field.degree();
        if d == 1 {
            return Ok(FieldElement {
                field: self.field.clone(),
                coeffs: vec![self.coeffs[0].recip()],
            });
        }
        // gcd(a, m) = 1 since m is irreducible and a != 0
        let m: Vec<BigRational> = self
            .field
            .minpoly
            .iter()
            .map(|c| BigRational::from(c.clone()))
            .collect();
        let (mut r0, mut r1) = (m, self.coeffs.clone());
        let one = vec![BigRational::one()];
        let (mut s0, mut s1) = (Vec::<BigRational>::new(), one);
        trim(&mut r0);
        trim(&mut r1);
        while !r1.is_empty() {
            let (q, r) = poly_divmod(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&q, &s1));
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        // r0 = gcd (degree 0); inverse = s0 / r0
        debug_assert_eq!(r0.len(), 1, "minpoly not coprime with element");
        let c = r0[0].recip();
        let mut coeffs: Vec<BigRational> = s0.iter().map(|x| x * &c).collect();
        coeffs.resize(d, BigRational::zero());
        Ok(FieldElement { field: self.field.clone(), coeffs })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_field(other)?;
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, n: i64) -> Result<Self> {
        let mut base = if n < 0 { self.inv()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one(&self.field);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        Ok(acc)
    }

    /// Complex embedding under the field's chosen root.
    pub fn embed(&self) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            v = v * self.field.root + Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0);
        }
        v
    }

    /// Coefficient strings "p/q" for JSON interchange.
    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }

    pub fn from_strings(field: &Arc<NumberField>, parts: &[String]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(field.degree());
        for p in parts {
            coeffs.push(
                BigRational::from_str(p)
                    .map_err(|e| Error::Json(format!("bad rational '{}': {}", p, e)))?,
            );
        }
        coeffs.resize(field.degree(), BigRational::zero());
        Self::from_coeffs(field, coeffs)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(q) = self.as_rational() {
            return write!(f, "{}", q);
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if first {
                if i == 0 {
                    write!(f, "{}", c)?;
                } else if c.is_one() {
                    write!(f, "a{}", pow_str(i))?;
                } else {
                    write!(f, "{}*a{}", c, pow_str(i))?;
                }
                first = false;
            } else if c.is_negative() {
                if i > 0 && (-c).is_one() {
                    write!(f, " - a{}", pow_str(i))?;
                } else {
                    write!(f, " - {}*a{}", -c, pow_str(i))?;
                }
            } else if i > 0 && c.is_one() {
                write!(f, " + a{}", pow_str(i))?;
            } else {
                write!(f, " + {}*a{}", c, pow_str(i))?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

fn pow_str(i: usize) -> String {
    if i <= 1 {
        String::new()
    } else {
        format!("^{}", i)
    }
}

fn trim(p: &mut Vec<BigRational>) {
    while p.last().map(|c| c.is_zero()).unwrap_or(false) {
        p.pop();
    }
}

fn poly_divmod(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    if r.len() < b.len() {
        return (vec![], r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    let lead = b[db].recip();
    for i in (db..r.len()).rev() {
        let c = &r[i] * &lead;
        if c.is_zero() {
            continue;
        }
        q[i - db] = c.clone();
        for k in 0..=db {
            let t = &c * &b[k];
            r[i - db + k] -= t;
        }
    }
    trim(&mut r);
    (q, r)
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = a.to_vec();
    out.resize(out.len().max(b.len()), BigRational::zero());
    for (i, y) in b.iter().enumerate() {
        out[i] -= y;
    }
    let mut v = out;
    trim(&mut v);
    v
}

/// Dense matrix over a number field.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMatrix {
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

impl ExactMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<FieldElement>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(ExactMatrix { rows, cols, data })
    }

    pub fn zeros(field: &Arc<NumberField>, rows: usize, cols: usize) -> Self {
        ExactMatrix {
            rows,
            cols,
            data: vec![FieldElement::zero(field); rows * cols],
        }
    }

    pub fn identity(field: &Arc<NumberField>, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = FieldElement::one(field);
        }
        m
    }

    pub fn from_fn(
        field: &Arc<NumberField>,
        rows: usize,
        cols: usize,
        f: impl Fn(usize, usize) -> FieldElement,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        let _ = field;
        ExactMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &FieldElement {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut FieldElement {
        &mut self.data[i * self.cols + j]
    }

    pub fn field(&self) -> &Arc<NumberField> {
        self.data[0].field()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.field(), self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let field = self.field().clone();
        let mut out = Self::zeros(&field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let t = a.mul(b);
                    *out.at_mut(i, j) = out.at(i, j).add(&t);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[FieldElement]) -> Result<Vec<FieldElement>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch("matrix-vector size".into()));
        }
        let field = self.field().clone();
        let mut out = vec![FieldElement::zero(&field); self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.at(i, j).is_zero() && !v[j].is_zero() {
                    out[i] = out[i].add(&self.at(i, j).mul(&v[j]));
                }
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.at(i, j) != self.at(j, i) {
                    return false;
                }
            }
        }
        true
    }

    /// Exact determinant by fraction-free (Bareiss) elimination, which keeps
    /// intermediate entries equal to minors of the input.
    pub fn det(&self) -> Result<FieldElement> {
        if self.rows != self.cols {
            return Err(Error::NotSquare);
        }
        let n = self.rows;
        let field = self.field().clone();
        if n == 0 {
            return Ok(FieldElement::one(&field));
        }
        let mut a = self.data.clone();
        let idx = |i: usize, j: usize| i * n + j;
        let mut prev = FieldElement::one(&field);
        let mut sign = false;
        for k in 0..n - 1 {
            if a[idx(k, k)].is_zero() {
                let swap = (k + 1..n).find(|&r| !a[idx(r, k)].is_zero());
                match swap {
                    Some(r) => {
                        for j in 0..n {
                            a.swap(idx(k, j), idx(r, j));
                        }
                        sign = !sign;
                    }
                    None => return Ok(FieldElement::zero(&field)),
                }
            }
            let pivot = a[idx(k, k)].clone();
            let prev_inv = prev.inv()?;
            for i in (k + 1)..n {
                for j in (k + 1)..n {
                    let t = pivot.mul(&a[idx(i, j)]).sub(&a[idx(i, k)].mul(&a[idx(k, j)]));
                    a[idx(i, j)] = t.mul(&prev_inv);
                }
                a[idx(i, k)] = FieldElement::zero(&field);
            }
            prev = pivot;
        }
        let d = a[idx(n - 1, n - 1)].clone();
        Ok(if sign { d.neg() } else { d })
    }

    /// Returns (inverse, det); a singular input is a dedicated error.
    pub fn inverse_det(&self) -> Result<(ExactMatrix, FieldElement)> {
        if self.rows != self.cols {
            return Err(Error::NotSquare);
        }
        let n = self.rows;
        let field = self.field().clone();
        let det = self.det()?;
        if det.is_zero() {
            return Err(Error::SingularMatrix);
        }
        // Gauss-Jordan on [A | I]
        let mut a = self.clone();
        let mut inv = Self::identity(&field, n);
        for c in 0..n {
            let p = (c..n).find(|&r| !a.at(r, c).is_zero()).expect("nonsingular");
            if p != c {
                for j in 0..n {
                    let tmp = a.at(c, j).clone();
                    *a.at_mut(c, j) = a.at(p, j).clone();
                    *a.at_mut(p, j) = tmp;
                    let tmp = inv.at(c, j).clone();
                    *inv.at_mut(c, j) = inv.at(p, j).clone();
                    *inv.at_mut(p, j) = tmp;
                }
            }
            let piv = a.at(c, c).inv()?;
            for j in 0..n {
                *a.at_mut(c, j) = a.at(c, j).mul(&piv);
                *inv.at_mut(c, j) = inv.at(c, j).mul(&piv);
            }
            for r in 0..n {
                if r != c && !a.at(r, c).is_zero() {
                    let f = a.at(r, c).clone();
                    for j in 0..n {
                        let t = a.at(c, j).mul(&f);
                        *a.at_mut(r, j) = a.at(r, j).sub(&t);
                        let t = inv.at(c, j).mul(&f);
                        *inv.at_mut(r, j) = inv.at(r, j).sub(&t);
                    }
                }
            }
        }
        Ok((inv, det))
    }

    /// Rank over the field by row echelon reduction.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0;
        for c in 0..cols {
            if rank == rows {
                break;
            }
            let p = (rank..rows).find(|&r| !a.at(r, c).is_zero());
            let p = match p {
                Some(p) => p,
                None => continue,
            };
            if p != rank {
                for j in 0..cols {
                    let tmp = a.at(rank, j).clone();
                    *a.at_mut(rank, j) = a.at(p, j).clone();
                    *a.at_mut(p, j) = tmp;
                }
            }
            let piv = a.at(rank, c).inv().expect("nonzero pivot");
            for r in (rank + 1)..rows {
                if !a.at(r, c).is_zero() {
                    let f = a.at(r, c).mul(&piv);
                    for j in c..cols {
                        let t = a.at(rank, j).mul(&f);
                        *a.at_mut(r, j) = a.at(r, j).sub(&t);
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Dense integer matrix (exact, machine integers at the interface).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(IntMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(IntMatrix { rows: r, cols: c, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.at(i, j));
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch("int matrix product".into()));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.set(i, j, out.at(i, j) + a * other.at(k, j));
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[i64]) -> Result<Vec<i64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch("int matrix-vector size".into()));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * v[j]).sum())
            .collect())
    }

    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch("hcat row counts".into()));
        }
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.at(i, j));
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.at(i, j));
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self.at(i, j) == self.at(j, i)))
    }

    /// Exact determinant over arbitrary-precision integers.
    pub fn det_big(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::NotSquare);
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        // Bareiss over BigInt
        let mut a: Vec<BigInt> = self.data.iter().map(|&x| BigInt::from(x)).collect();
        let idx = |i: usize, j: usize| i * n + j;
        let mut prev = BigInt::one();
        let mut sign = false;
        for k in 0..n - 1 {
            if a[idx(k, k)].is_zero() {
                match (k + 1..n).find(|&r| !a[idx(r, k)].is_zero()) {
                    Some(r) => {
                        for j in 0..n {
                            a.swap(idx(k, j), idx(r, j));
                        }
                        sign = !sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in (k + 1)..n {
                for j in (k + 1)..n {
                    let t = &a[idx(k, k)] * &a[idx(i, j)] - &a[idx(i, k)] * &a[idx(k, j)];
                    a[idx(i, j)] = t / &prev;
                }
                a[idx(i, k)] = BigInt::zero();
            }
            prev = a[idx(k, k)].clone();
        }
        let d = a[idx(n - 1, n - 1)].clone();
        Ok(if sign { -d } else { d })
    }

    /// Lifts into an [`ExactMatrix`] over the given field.
    pub fn to_exact(&self, field: &Arc<NumberField>) -> ExactMatrix {
        ExactMatrix::from_fn(field, self.rows, self.cols, |i, j| {
            FieldElement::from_i64(field, self.at(i, j))
        })
    }
}

/// One integer solution of `M x = b` when one exists over Z, via Smith
/// normal form (computed over arbitrary precision internally), else `None`.
pub fn smith_solve(m: &IntMatrix, b: &[i64]) -> Option<Vec<i64>> {
    assert_eq!(m.rows(), b.len(), "smith_solve: b length must match rows");
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<BigInt>> = (0..rows)
        .map(|i| (0..cols).map(|j| BigInt::from(m.at(i, j))).collect())
        .collect();
    // U tracks row ops applied to b; V tracks column ops applied to x.
    let mut ub: Vec<BigInt> = b.iter().map(|&x| BigInt::from(x)).collect();
    let mut v: Vec<Vec<BigInt>> = (0..cols)
        .map(|i| (0..cols).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();

    let mut t = 0;
    while t < rows.min(cols) {
        // find a pivot with minimal absolute value in the remaining block
        let mut piv: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !a[i][j].is_zero()
                    && piv
                        .map(|(pi, pj)| a[i][j].abs() < a[pi][pj].abs())
                        .unwrap_or(true)
                {
                    piv = Some((i, j));
                }
            }
        }
        let (pi, pj) = match piv {
            Some(p) => p,
            None => break,
        };
        a.swap(t, pi);
        ub.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        v.swap(t, pj);

        let mut clean = true;
        for i in (t + 1)..rows {
            if !a[i][t].is_zero() {
                let q = &a[i][t] / &a[t][t];
                for j in t..cols {
                    let s = &q * &a[t][j];
                    a[i][j] -= s;
                }
                let s = &q * &ub[t];
                ub[i] -= s;
                if !a[i][t].is_zero() {
                    clean = false;
                }
            }
        }
        for j in (t + 1)..cols {
            if !a[t][j].is_zero() {
                let q = &a[t][j] / &a[t][t];
                for i in 0..rows {
                    let s = &q * &a[i][t];
                    a[i][j] -= s;
                }
                for r in 0..cols {
                    let s = &q * &v[r][t];
                    v[r][j] -= s;
                }
                if !a[t][j].is_zero() {
                    clean = false;
                }
            }
        }
        if clean {
            t += 1;
        }
    }

    // system is now diagonal-ish: a[i][i] y_i = ub[i]
    let mut y = vec![BigInt::zero(); cols];
    for i in 0..rows {
        let d = if i < cols { a[i][i].clone() } else { BigInt::zero() };
        if d.is_zero() {
            if !ub[i].is_zero() {
                return None; // divisibility certificate fails
            }
        } else {
            if (&ub[i] % &d) != BigInt::zero() {
                return None;
            }
            y[i] = &ub[i] / &d;
        }
    }
    // x = V y
    let mut x = vec![BigInt::zero(); cols];
    for (i, xi) in x.iter_mut().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            *xi += &v[i][j] * yj;
        }
    }
    Some(
        x.into_iter()
            .map(|b| b.to_i64().expect("integer solution fits i64"))
            .collect(),
    )
}
