//! The building-block series psi_hbar(x, z), its z-shifted variants and the
//! C_hbar factor.
//!
//! psi_hbar(x,z) = exp( - sum_{k,l >= 0, k + l/2 > 1}
//!                        B_k x^l hbar^{k + l/2 - 1} Li_{2-k-l}(z) / (l! k!) )
//! with the Bernoulli convention B_1 = -1/2. Every polylog index occurring
//! here is <= 0, so all coefficients are exact field elements.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::exactfield::FieldElement;
use crate::polylog::{polylog_shift, PolylogLadder};
use crate::series::{DegreeCap, HbarSeries, XPoly};
use crate::{Error, Result};

/// Bernoulli numbers B_0..B_n with B_1 = -1/2.
#[derive(Debug, Clone)]
pub struct BernoulliTable {
    values: Vec<BigRational>,
}

impl BernoulliTable {
    pub fn new(n: usize) -> Self {
        let mut values = Vec::with_capacity(n + 1);
        values.push(BigRational::one());
        for m in 1..=n {
            // B_m = -1/(m+1) sum_{k<m} C(m+1, k) B_k
            let mut s = BigRational::zero();
            let mut binom = BigInt::one(); // C(m+1, 0)
            for (k, bk) in values.iter().enumerate() {
                s += BigRational::from(binom.clone()) * bk;
                // C(m+1, k+1) = C(m+1, k) * (m+1-k) / (k+1)
                binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
            }
            values.push(-s / BigRational::from_integer((m as i64 + 1).into()));
        }
        BernoulliTable { values }
    }

    pub fn get(&self, k: usize) -> &BigRational {
        &self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_shape(z: &FieldElement) -> Result<()> {
    let one = FieldElement::one(z.field());
    if z.is_zero() || *z == one {
        return Err(Error::DegenerateShape(z.to_string()));
    }
    Ok(())
}

fn factorial(n: u64) -> BigRational {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    BigRational::from(acc)
}

/// The exponent of psi: -sum over k + l/2 > 1, as a series in one chosen
/// variable of an `nvars`-variable space.
fn psi_exponent(
    var: usize,
    nvars: usize,
    z: &FieldElement,
    cutoff: u32,
) -> Result<HbarSeries> {
    check_shape(z)?;
    let field = z.field().clone();
    let mut ladder = PolylogLadder::new(z.clone())?;
    let bern = BernoulliTable::new(cutoff as usize / 2 + 2);
    let mut out = HbarSeries::zero(&field, nvars, cutoff);
    // half-order j = 2k + l - 2 ranges over 1..=cutoff
    for k in 0..=(cutoff as usize + 2) / 2 {
        if bern.get(k).is_zero() {
            continue;
        }
        for l in 0..=(cutoff as usize + 2) {
            let twokl = 2 * k + l;
            if twokl < 3 {
                continue; // k + l/2 > 1
            }
            let j = (twokl - 2) as u32;
            if j > cutoff {
                continue;
            }
            let li = ladder.get(2 - (k as i64) - (l as i64))?;
            let c = -bern.get(k) / (factorial(l as u64) * factorial(k as u64));
            let coef = li.scale(&c);
            if coef.is_zero() {
                continue;
            }
            let mono = XPoly::monomial(&field, nvars, var, l as u16, coef)?;
            let term = HbarSeries::from_xpoly(mono, j, cutoff);
            out = out.add(&term)?;
        }
    }
    Ok(out)
}

/// psi_hbar(x_var, z) truncated at `cutoff` half-units, living in an
/// `nvars`-dimensional variable space.
pub fn psi_series(var: usize, nvars: usize, z: &FieldElement, cutoff: u32) -> Result<HbarSeries> {
    if var >= nvars {
        return Err(Error::VarOutOfRange(var, nvars));
    }
    psi_exponent(var, nvars, z, cutoff)?.exp_capped(DegreeCap::PsiWeight)
}

/// psi_hbar(0, z e^u) for a series u of positive half-order: only the
/// k >= 2, l = 0 exponent terms survive at x = 0, expanded through the
/// polylog shift ladder.
pub fn psi_shifted(z: &FieldElement, u: &HbarSeries, cutoff: u32) -> Result<HbarSeries> {
    check_shape(z)?;
    if u.min_order() == Some(0) {
        return Err(Error::NonzeroConstantTerm);
    }
    let field = z.field().clone();
    let k = cutoff.min(u.cutoff());
    let bern = BernoulliTable::new(k as usize / 2 + 2);
    let mut expo = HbarSeries::zero(&field, u.nvars(), k);
    for kk in 2..=(k as usize + 2) / 2 {
        if bern.get(kk).is_zero() {
            continue;
        }
        let j = 2 * (kk as u32 - 1); // hbar^{kk-1}
        if j > k {
            break;
        }
        let lis = polylog_shift(2 - kk as i64, z, u, k - j)?;
        let c = -bern.get(kk) / factorial(kk as u64);
        // multiply by hbar^{kk-1}: shift every order of lis up by j
        let mut term = HbarSeries::zero(&field, u.nvars(), k);
        for (&jj, p) in lis.orders() {
            term.set_coeff(jj + j, p.scale(&FieldElement::from_rational(&field, c.clone())));
        }
        expo = expo.add(&term)?;
    }
    expo.exp()
}

/// psi_hbar(x_var, z e^{eps hbar}): the full psi exponent with every ladder
/// value shifted by e^{eps hbar}. Used by the q-difference verifier and the
/// Gaussian shift lemma.
pub fn psi_series_shifted_shape(
    var: usize,
    nvars: usize,
    z: &FieldElement,
    eps: i64,
    cutoff: u32,
) -> Result<HbarSeries> {
    check_shape(z)?;
    if var >= nvars {
        return Err(Error::VarOutOfRange(var, nvars));
    }
    let field = z.field().clone();
    let mut ladder = PolylogLadder::new(z.clone())?;
    let bern = BernoulliTable::new(cutoff as usize / 2 + 2);
    let epsq = BigRational::from_integer(eps.into());
    let mut expo = HbarSeries::zero(&field, nvars, cutoff);
    for k in 0..=(cutoff as usize + 2) / 2 {
        if bern.get(k).is_zero() {
            continue;
        }
        for l in 0..=(cutoff as usize + 2) {
            let twokl = 2 * k + l;
            if twokl < 3 {
                continue;
            }
            let jbase = (twokl - 2) as u32;
            if jbase > cutoff {
                continue;
            }
            let base = -bern.get(k) / (factorial(l as u64) * factorial(k as u64));
            // Li_{2-k-l}(z e^{eps hbar}) = sum_r Li_{2-k-l-r}(z) (eps hbar)^r / r!
            let mut epspow = BigRational::one();
            for r in 0..=((cutoff - jbase) / 2) as usize {
                let j = jbase + 2 * r as u32;
                let li = ladder.get(2 - (k as i64) - (l as i64) - r as i64)?;
                let c = &base * &epspow / factorial(r as u64);
                let coef = li.scale(&c);
                epspow *= &epsq;
                if coef.is_zero() {
                    continue;
                }
                let mono = XPoly::monomial(&field, nvars, var, l as u16, coef)?;
                expo = expo.add(&HbarSeries::from_xpoly(mono, j, cutoff))?;
            }
        }
    }
    expo.exp_capped(DegreeCap::PsiWeight)
}

/// C_hbar(x_var, z) = exp( -sum_{l>=3} hbar^{l/2-1} Li_{2-l}(z) x^l / l!
///                         + (1/2) sum_{l>=1} hbar^{l/2} Li_{1-l}(z) x^l / l! ).
pub fn c_factor(var: usize, nvars: usize, z: &FieldElement, cutoff: u32) -> Result<HbarSeries> {
    check_shape(z)?;
    if var >= nvars {
        return Err(Error::VarOutOfRange(var, nvars));
    }
    let field = z.field().clone();
    let mut ladder = PolylogLadder::new(z.clone())?;
    let mut expo = HbarSeries::zero(&field, nvars, cutoff);
    for l in 3..=(cutoff as usize + 2) {
        let j = (l - 2) as u32;
        if j > cutoff {
            break;
        }
        let li = ladder.get(2 - l as i64)?;
        let c = li.scale(&(-factorial(l as u64).recip()));
        let mono = XPoly::monomial(&field, nvars, var, l as u16, c)?;
        expo = expo.add(&HbarSeries::from_xpoly(mono, j, cutoff))?;
    }
    let half = BigRational::new(1.into(), 2.into());
    for l in 1..=(cutoff as usize) {
        let j = l as u32;
        if j > cutoff {
            break;
        }
        let li = ladder.get(1 - l as i64)?;
        let c = li.scale(&(&half / factorial(l as u64)));
        let mono = XPoly::monomial(&field, nvars, var, l as u16, c)?;
        expo = expo.add(&HbarSeries::from_xpoly(mono, j, cutoff))?;
    }
    expo.exp()
}

/// Cache of single-variable psi series keyed by (z, cutoff). The Phi
/// integrand reuses psi per tetrahedron, so building each (z, K) once pays.
#[derive(Debug, Default)]
pub struct PsiCache {
    map: Mutex<HashMap<(String, u32), HbarSeries>>,
}

impl PsiCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// psi(x_var, z) in an `nvars`-variable space, via the cached 1-variable
    /// series.
    pub fn series(
        &self,
        var: usize,
        nvars: usize,
        z: &FieldElement,
        cutoff: u32,
    ) -> Result<HbarSeries> {
        let key = (format!("{}|{:?}", z, z.field().minpoly()), cutoff);
        let base = {
            let map = self.map.lock().expect("psi cache poisoned");
            match map.get(&key) {
                Some(s) => s.clone(),
                None => {
                    drop(map);
                    let s = psi_series(0, 1, z, cutoff)?;
                    self.map
                        .lock()
                        .expect("psi cache poisoned")
                        .insert(key, s.clone());
                    s
                }
            }
        };
        if nvars == 1 && var == 0 {
            return Ok(base);
        }
        base.embed(nvars, &[var])
    }
}

/// psi is 1 + O(hbar^{1/2}) and the denominators of rational-z coefficients
/// are built only from 1-z, z and small integers; exposed for tests.
pub fn psi_denominator_support(z_num: i64, z_den: i64, cutoff: u32) -> BigInt {
    // primes of den(z), num(1-z)=den-num, den(1-z)=den, and factorials
    let mut m = BigInt::from(z_den.abs().max(1)) * BigInt::from((z_den - z_num).abs().max(1));
    for p in 2..=(cutoff as i64 + 3) {
        m *= BigInt::from(p);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactfield::NumberField;
    use crate::polylog::polylog_nonpos;

    #[test]
    fn bernoulli_convention() {
        let b = BernoulliTable::new(8);
        assert_eq!(*b.get(1), BigRational::new((-1).into(), 2.into()));
        assert_eq!(*b.get(2), BigRational::new(1.into(), 6.into()));
        assert!(b.get(3).is_zero() && b.get(5).is_zero() && b.get(7).is_zero());
        assert_eq!(*b.get(8), BigRational::new((-1).into(), 30.into()));
    }

    #[test]
    fn psi_at_cutoff_zero_is_one() {
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 3);
        let p = psi_series(0, 1, &z, 0).unwrap();
        assert_eq!(p, HbarSeries::one(&f, 1, 0));
    }

    #[test]
    fn psi_half_order_coefficient() {
        // hbar^{1/2} coefficient is (z/(2(1-z))) x - (z/(6(1-z)^2)) x^3
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 2, 5);
        let p = psi_series(0, 1, &z, 1).unwrap();
        let c = p.coeff(1);
        let li0 = polylog_nonpos(0, &z).unwrap();
        let li1m = polylog_nonpos(-1, &z).unwrap();
        let half = BigRational::new(1.into(), 2.into());
        let sixth = BigRational::new(1.into(), 6.into());
        assert_eq!(c.coefficient(&[1]), li0.scale(&half));
        assert_eq!(c.coefficient(&[3]), li1m.scale(&sixth).neg());
    }

    #[test]
    fn psi_rejects_degenerate_shape() {
        let f = NumberField::rationals();
        assert!(psi_series(0, 1, &FieldElement::zero(&f), 4).is_err());
        assert!(psi_series(0, 1, &FieldElement::one(&f), 4).is_err());
    }

    #[test]
    fn psi_weight_and_parity() {
        let f = NumberField::zeta6();
        let z = FieldElement::generator(&f);
        let p = psi_series(0, 1, &z, 8).unwrap();
        assert!(p.respects_psi_weight());
        assert!(p.has_unit_constant());
    }

    #[test]
    fn psi_shifted_h_coefficient_at_half() {
        // the hbar coefficient of psi(0, z e^{x h^{1/2}}) at x^0 is
        // -B_2 Li_0(z)/2 = -1/12 at z = 1/2
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 2);
        let u = HbarSeries::from_xpoly(
            XPoly::monomial(&f, 1, 0, 1, FieldElement::one(&f)).unwrap(),
            1,
            2,
        );
        let p = psi_shifted(&z, &u, 2).unwrap();
        assert_eq!(p.coeff(2).coefficient(&[0]), FieldElement::from_ratio(&f, -1, 12));
    }

    #[test]
    fn psi_shifted_with_zero_u() {
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 3);
        let u = HbarSeries::zero(&f, 0, 6);
        let a = psi_shifted(&z, &u, 6).unwrap();
        // equals psi(x, z) at x = 0
        let b = psi_series(0, 1, &z, 6).unwrap().eval_zero(&[0]);
        for j in 0..=6 {
            assert_eq!(a.coeff(j).constant_term(), b.coeff(j).constant_term());
        }
    }

    #[test]
    fn c_factor_half_order() {
        // hbar^{1/2} coefficient: -Li_{-1}(z) x^3/6 + Li_0(z) x/2
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 3, 4);
        let c = c_factor(0, 1, &z, 1).unwrap();
        let got = c.coeff(1);
        let li0 = polylog_nonpos(0, &z).unwrap();
        let li1m = polylog_nonpos(-1, &z).unwrap();
        assert_eq!(got.coefficient(&[1]), li0.scale(&BigRational::new(1.into(), 2.into())));
        assert_eq!(
            got.coefficient(&[3]),
            li1m.scale(&BigRational::new(1.into(), 6.into())).neg()
        );
    }

    #[test]
    fn c_factor_at_cutoff_zero_is_one() {
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 2, 3);
        assert_eq!(c_factor(0, 1, &z, 0).unwrap(), HbarSeries::one(&f, 1, 0));
    }

    #[test]
    fn psid_instance_exact() {
        // psi(x, z) = psi(0, z e^{x h^{1/2}}) C(x, z) at z = 2/3, K = 5
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 2, 3);
        let k = 5;
        let u = HbarSeries::from_xpoly(
            XPoly::monomial(&f, 1, 0, 1, FieldElement::one(&f)).unwrap(),
            1,
            k,
        );
        let lhs = psi_series(0, 1, &z, k).unwrap();
        let rhs = psi_shifted(&z, &u, k)
            .unwrap()
            .mul(&c_factor(0, 1, &z, k).unwrap())
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn denominator_shape_for_rational_z() {
        use num_integer::Integer;
        let f = NumberField::rationals();
        let (p, q) = (1i64, 3i64);
        let z = FieldElement::from_ratio(&f, p, q);
        let k = 8;
        let psi = psi_series(0, 1, &z, k).unwrap();
        let support = psi_denominator_support(p, q, k);
        for (_, poly) in psi.orders() {
            for (_, c) in poly.terms() {
                let mut d = c.as_rational().unwrap().denom().clone();
                loop {
                    let g = d.gcd(&support);
                    if g.is_one() {
                        break;
                    }
                    d /= g;
                }
                assert!(d.is_one(), "denominator {} outside (1-z)-power * integer shape", c);
            }
        }
    }

    #[test]
    fn cache_embeds_into_larger_spaces() {
        let f = NumberField::zeta6();
        let z = FieldElement::generator(&f);
        let cache = PsiCache::new();
        let a = cache.series(1, 2, &z, 4).unwrap();
        let b = psi_series(1, 2, &z, 4).unwrap();
        assert_eq!(a, b);
    }
}
