//! Polylogarithms at non-positive index, exactly, plus the shift ladder
//! Li_s(z e^u) and the numeric Li_1/Li_2 used by the asymptotic cross-check.
//!
//! For s = -n <= 0 the polylogarithm is the rational function
//! Li_{-n}(z) = P_n(z) / (1-z)^{n+1} with integer P_n generated by the
//! derivative recurrence Li_{s-1} = (z d/dz) Li_s.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::exactfield::FieldElement;
use crate::series::HbarSeries;
use crate::{Error, Result};

/// Cached ladder of non-positive polylog values at a fixed exact point.
#[derive(Debug, Clone)]
pub struct PolylogLadder {
    z: FieldElement,
    inv_one_minus_z: FieldElement,
    /// values[n] = Li_{-n}(z)
    values: Vec<FieldElement>,
    /// numerator polynomials P_n, integer coefficients, P_n[i] is the z^i coefficient
    polys: Vec<Vec<BigInt>>,
}

impl PolylogLadder {
    pub fn new(z: FieldElement) -> Result<Self> {
        let field = z.field().clone();
        let one = FieldElement::one(&field);
        let om = one.sub(&z);
        if om.is_zero() {
            return Err(Error::PolylogPole);
        }
        Ok(PolylogLadder {
            inv_one_minus_z: om.inv()?,
            z,
            values: Vec::new(),
            polys: vec![vec![BigInt::zero(), BigInt::one()]], // P_0 = z
        })
    }

    pub fn z(&self) -> &FieldElement {
        &self.z
    }

    /// Li_s(z) for s <= 0 (index passed as s).
    pub fn get(&mut self, s: i64) -> Result<FieldElement> {
        if s > 0 {
            return Err(Error::PolylogIndex(s));
        }
        let n = (-s) as usize;
        while self.polys.len() <= n {
            let p = self.polys.last().unwrap();
            self.polys.push(next_numerator(p, self.polys.len()));
        }
        while self.values.len() <= n {
            let k = self.values.len();
            let v = self.eval_at(k);
            self.values.push(v);
        }
        Ok(self.values[n].clone())
    }

    fn eval_at(&self, n: usize) -> FieldElement {
        let field = self.z.field().clone();
        let mut acc = FieldElement::zero(&field);
        let mut zp = FieldElement::one(&field);
        for c in &self.polys[n] {
            if !c.is_zero() {
                acc = acc.add(&zp.scale(&BigRational::from(c.clone())));
            }
            zp = zp.mul(&self.z);
        }
        let mut denom = FieldElement::one(&field);
        for _ in 0..=n {
            denom = denom.mul(&self.inv_one_minus_z);
        }
        acc.mul(&denom)
    }

    /// Numerator polynomial P_n (exposed for the recurrence-consistency test).
    pub fn numerator_poly(&mut self, n: usize) -> &[BigInt] {
        while self.polys.len() <= n {
            let p = self.polys.last().unwrap();
            self.polys.push(next_numerator(p, self.polys.len()));
        }
        &self.polys[n]
    }
}

/// P_{n+1} = z ((1-z) P_n' + (n+1) P_n)
fn next_numerator(p: &[BigInt], n_plus_1: usize) -> Vec<BigInt> {
    let dp: Vec<BigInt> = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * BigInt::from(i))
        .collect();
    let mut t = vec![BigInt::zero(); p.len() + 1];
    for (i, c) in dp.iter().enumerate() {
        t[i] += c; // P'
        t[i + 1] -= c; // -z P'
    }
    for (i, c) in p.iter().enumerate() {
        t[i] += c * BigInt::from(n_plus_1);
    }
    // multiply by z
    let mut out = vec![BigInt::zero()];
    out.extend(t);
    while out.last().map(|c| c.is_zero()).unwrap_or(false) {
        out.pop();
    }
    out
}

/// Li_s(z) for s <= 0 at an exact point.
pub fn polylog_nonpos(s: i64, z: &FieldElement) -> Result<FieldElement> {
    PolylogLadder::new(z.clone())?.get(s)
}

/// Expansion of Li_s(z e^u) = sum_{r >= 0} Li_{s-r}(z) u^r / r! truncated at
/// the cutoff of `u`; requires s <= 0 so the whole ladder stays rational in z.
pub fn polylog_shift(s: i64, z: &FieldElement, u: &HbarSeries, cutoff: u32) -> Result<HbarSeries> {
    if s > 0 {
        return Err(Error::PolylogIndex(s));
    }
    if u.min_order() == Some(0) {
        return Err(Error::NonzeroConstantTerm);
    }
    let field = z.field().clone();
    let mut ladder = PolylogLadder::new(z.clone())?;
    let k = cutoff.min(u.cutoff());
    let mut out = HbarSeries::constant(&field, u.nvars(), k, ladder.get(s)?);
    let mut upow = HbarSeries::one(&field, u.nvars(), k);
    let min_ord = u.min_order().unwrap_or(k + 1).max(1);
    let mut rfact = BigRational::one();
    let mut r: u64 = 0;
    while (r as u32) * min_ord <= k {
        r += 1;
        rfact *= BigRational::from_integer(r.into());
        upow = upow.mul(u)?;
        if upow.is_zero() {
            break;
        }
        let li = ladder.get(s - r as i64)?;
        let coef = li.scale(&rfact.recip());
        out = out.add(&upow.scale(&coef))?;
    }
    Ok(out)
}

/// Numeric Li_s for s in {1, 2} by direct summation; |z| < 1 required.
pub fn polylog_numeric(s: u32, z: Complex64, precision: f64) -> Result<Complex64> {
    if !(s == 1 || s == 2) {
        return Err(Error::PolylogIndex(s as i64));
    }
    let r = z.norm();
    if r >= 1.0 {
        return Err(Error::PolylogDomain(r));
    }
    if r == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut zp = Complex64::new(1.0, 0.0);
    let mut n: u64 = 0;
    loop {
        n += 1;
        zp *= z;
        let term = zp / (n as f64).powi(s as i32);
        acc += term;
        // geometric tail bound: |rest| <= |term| * r / (1 - r)
        if term.norm() * r / (1.0 - r) < precision || n > 10_000_000 {
            break;
        }
    }
    Ok(acc)
}

/// Convenience accessors mirroring the closed forms used across the crate.
pub fn li0(z: &FieldElement) -> Result<FieldElement> {
    polylog_nonpos(0, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactfield::NumberField;
    use crate::series::XPoly;

    #[test]
    fn li0_at_half_is_one() {
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 2);
        assert_eq!(polylog_nonpos(0, &z).unwrap(), FieldElement::one(&f));
    }

    #[test]
    fn li_minus1_at_zeta6_is_minus_one() {
        let f = NumberField::zeta6();
        let z = FieldElement::generator(&f);
        assert_eq!(polylog_nonpos(-1, &z).unwrap(), FieldElement::from_i64(&f, -1));
    }

    #[test]
    fn li_minus2_at_two() {
        let f = NumberField::rationals();
        let z = FieldElement::from_i64(&f, 2);
        assert_eq!(polylog_nonpos(-2, &z).unwrap(), FieldElement::from_i64(&f, -6));
    }

    #[test]
    fn pole_at_one() {
        let f = NumberField::rationals();
        let z = FieldElement::one(&f);
        assert!(matches!(polylog_nonpos(0, &z), Err(Error::PolylogPole)));
    }

    #[test]
    fn shift_with_zero_u_is_constant() {
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 3);
        let u = HbarSeries::zero(&f, 0, 6);
        let s = polylog_shift(-1, &z, &u, 6).unwrap();
        assert_eq!(s.coeff(0).constant_term(), polylog_nonpos(-1, &z).unwrap());
        assert!(s.orders().count() == 1);
    }

    #[test]
    fn shift_ladder_first_order() {
        // Li_0(z e^h) -> Li_0(z) + Li_{-1}(z) h at K=2
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 2, 7);
        let u = HbarSeries::hbar_term(&f, 0, 2, 2, FieldElement::one(&f));
        let s = polylog_shift(0, &z, &u, 2).unwrap();
        assert_eq!(s.coeff(0).constant_term(), polylog_nonpos(0, &z).unwrap());
        assert_eq!(s.coeff(2).constant_term(), polylog_nonpos(-1, &z).unwrap());
    }

    #[test]
    fn shift_matches_taylor_of_closed_form_at_half() {
        // Li_0(z e^h) at z = 1/2 is 1 + 2h + 3h^2 + ...
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 2);
        let u = HbarSeries::hbar_term(&f, 0, 4, 2, FieldElement::one(&f));
        let s = polylog_shift(0, &z, &u, 4).unwrap();
        assert_eq!(s.coeff(0).constant_term(), FieldElement::from_i64(&f, 1));
        assert_eq!(s.coeff(2).constant_term(), FieldElement::from_i64(&f, 2));
        assert_eq!(s.coeff(4).constant_term(), FieldElement::from_i64(&f, 3));
    }

    #[test]
    fn shift_composition() {
        // shifting by u then substituting x -> x reproduces the composed shift
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 3, 5);
        let k = 6;
        // u1 = h^{1/2} x
        let u1 = HbarSeries::from_xpoly(
            XPoly::monomial(&f, 1, 0, 1, FieldElement::one(&f)).unwrap(),
            1,
            k,
        );
        let shifted = polylog_shift(-1, &z, &u1, k).unwrap();
        // substitute x -> 2x; compare against shift with u = 2 h^{1/2} x
        let im = HbarSeries::from_xpoly(
            XPoly::monomial(&f, 1, 0, 1, FieldElement::from_i64(&f, 2)).unwrap(),
            0,
            k,
        );
        let lhs = shifted.substitute(&[im]).unwrap();
        let u2 = u1.scale(&FieldElement::from_i64(&f, 2));
        let rhs = polylog_shift(-1, &z, &u2, k).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn numeric_li1_matches_log() {
        let z = Complex64::new(0.3, 0.0);
        let got = polylog_numeric(1, z, 1e-14).unwrap();
        let want = -(Complex64::new(1.0, 0.0) - z).ln();
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn numeric_li2_at_half() {
        let got = polylog_numeric(2, Complex64::new(0.5, 0.0), 1e-14).unwrap();
        assert!((got.re - 0.5822405264650125).abs() < 1e-12);
        assert!(got.im.abs() < 1e-14);
    }

    #[test]
    fn numeric_li2_at_zero() {
        let got = polylog_numeric(2, Complex64::new(0.0, 0.0), 1e-14).unwrap();
        assert_eq!(got, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn recurrence_consistency_cleared_denominators() {
        // (1-z)^{n+2} Li_{-(n+1)}(z) == z ((1-z) P_n'(z) + (n+1) P_n(z))
        let f = NumberField::rationals();
        for zq in [(2i64, 7i64), (-3, 5), (5, 2), (-1, 1)] {
            let z = FieldElement::from_ratio(&f, zq.0, zq.1);
            let mut ladder = PolylogLadder::new(z.clone()).unwrap();
            for n in 0..=5usize {
                let pn: Vec<BigInt> = ladder.numerator_poly(n).to_vec();
                let lhs = {
                    let li = ladder.get(-(n as i64) - 1).unwrap();
                    let om = FieldElement::one(&f).sub(&z);
                    li.mul(&om.pow(n as i64 + 2).unwrap())
                };
                let rhs = {
                    let om = FieldElement::one(&f).sub(&z);
                    let eval = |p: &[BigInt]| {
                        let mut acc = FieldElement::zero(&f);
                        let mut zp = FieldElement::one(&f);
                        for c in p {
                            acc = acc.add(&zp.scale(&BigRational::from(c.clone())));
                            zp = zp.mul(&z);
                        }
                        acc
                    };
                    let dp: Vec<BigInt> = pn
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(i, c)| c * BigInt::from(i))
                        .collect();
                    let term = om.mul(&eval(&dp)).add(
                        &eval(&pn).scale(&BigRational::from_integer((n as i64 + 1).into())),
                    );
                    z.mul(&term)
                };
                assert_eq!(lhs, rhs, "n = {}", n);
            }
        }
    }
}
