//! Exact instance-wise verification of the psi_hbar identities (Fourier,
//! pentagon, inversion, q-difference, the x=0 split) and of the formal
//! Gaussian integration lemmas, plus the numeric q-Pochhammer asymptotics
//! cross-check.
//!
//! Identities are checked at specialized shape values: polynomial-identity
//! testing at several exact points, not a symbolic proof. Sample sets are
//! deterministic so failures reproduce.

use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::sync::Arc;

use crate::exactfield::{ExactMatrix, FieldElement, IntMatrix, NumberField};
use crate::gauss::{
    bracket, bracket_all, bracket_hdep, bracket_series_form, schur_reduce, QuadraticForm,
    ScalarSeriesMatrix,
};
use crate::polylog::{polylog_numeric, polylog_shift, PolylogLadder};
use crate::psi::{c_factor, psi_series, psi_series_shifted_shape, psi_shifted};
use crate::series::{HbarSeries, XPoly};
use crate::{Error, Result};

/// First discrepancy between two series, for failure reports.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstDiff {
    pub j: u32,
    pub monomial: Vec<u16>,
    pub lhs: String,
    pub rhs: String,
}

/// Outcome of one identity instance.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub identity: String,
    pub params: String,
    pub cutoff: u32,
    pub pass: bool,
    pub first_diff: Option<FirstDiff>,
}

impl VerifyReport {
    fn passed(identity: &str, params: String, cutoff: u32) -> Self {
        VerifyReport { identity: identity.into(), params, cutoff, pass: true, first_diff: None }
    }

    fn failed(identity: &str, params: String, cutoff: u32, diff: FirstDiff) -> Self {
        VerifyReport {
            identity: identity.into(),
            params,
            cutoff,
            pass: false,
            first_diff: Some(diff),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "identity": self.identity,
            "params": self.params,
            "K": self.cutoff,
            "status": if self.pass { "pass" } else { "fail" },
            "first_diff": self.first_diff.as_ref().map(|d| json!({
                "j": d.j,
                "monomial": d.monomial,
                "lhs": d.lhs,
                "rhs": d.rhs,
            })),
        })
    }
}

/// Lowest-order, then lexicographically-first differing monomial.
pub fn first_difference(lhs: &HbarSeries, rhs: &HbarSeries) -> Option<FirstDiff> {
    let cutoff = lhs.cutoff().min(rhs.cutoff());
    for j in 0..=cutoff {
        let a = lhs.coeff(j);
        let b = rhs.coeff(j);
        let mut keys: Vec<Vec<u16>> = a.terms().map(|(m, _)| m.0.to_vec()).collect();
        for (m, _) in b.terms() {
            let v = m.0.to_vec();
            if !keys.contains(&v) {
                keys.push(v);
            }
        }
        keys.sort();
        for k in keys {
            let ca = a.coefficient(&k);
            let cb = b.coefficient(&k);
            if ca != cb {
                return Some(FirstDiff {
                    j,
                    monomial: k,
                    lhs: ca.to_string(),
                    rhs: cb.to_string(),
                });
            }
        }
    }
    None
}

fn report(identity: &str, params: String, cutoff: u32, lhs: &HbarSeries, rhs: &HbarSeries) -> VerifyReport {
    match first_difference(lhs, rhs) {
        None => VerifyReport::passed(identity, params, cutoff),
        Some(d) => VerifyReport::failed(identity, params, cutoff, d),
    }
}

fn check_shape(z: &FieldElement) -> Result<()> {
    let one = FieldElement::one(z.field());
    if z.is_zero() || *z == one {
        return Err(Error::DegenerateShape(z.to_string()));
    }
    Ok(())
}

/// exp(c * x_var * hbar^{1/2}) in an n-variable space.
fn exp_linear(
    field: &Arc<NumberField>,
    nvars: usize,
    var: usize,
    c: FieldElement,
    cutoff: u32,
) -> Result<HbarSeries> {
    let mono = XPoly::monomial(field, nvars, var, 1, c)?;
    HbarSeries::from_xpoly(mono, 1, cutoff).exp()
}

/// x_var as a substitution image scaled by c (order-0 linear form).
fn linear_image(
    field: &Arc<NumberField>,
    nvars: usize,
    terms: &[(usize, FieldElement)],
    cutoff: u32,
) -> Result<HbarSeries> {
    let mut p = XPoly::zero(field, nvars);
    for (var, c) in terms {
        p = p.add(&XPoly::monomial(field, nvars, *var, 1, c.clone())?)?;
    }
    Ok(HbarSeries::from_xpoly(p, 0, cutoff))
}

/// psi(x, z) = e^{-hbar/24} < exp((y + xz/(1-z)) h^{1/2}/2)
///                             psi(y + xz/(1-z), 1/(1-z)) >_{y, 1 - 1/z}.
pub fn verify_fourier(z: &FieldElement, cutoff: u32) -> Result<VerifyReport> {
    check_shape(z)?;
    let field = z.field().clone();
    let one = FieldElement::one(&field);
    let w = z.mul(&one.sub(z).inv()?); // z/(1-z)
    let zp = one.sub(z).inv()?; // 1/(1-z)
    let lam = one.sub(&z.inv()?); // 1 - 1/z
    // vars: x = 0 (survives), y = 1 (integrated)
    let psi_y = psi_series(1, 2, &zp, cutoff)?;
    let img_x = linear_image(&field, 2, &[(0, one.clone())], cutoff)?;
    let img_y = linear_image(&field, 2, &[(1, one.clone()), (0, w.clone())], cutoff)?;
    let shifted = psi_y.substitute(&[img_x, img_y])?;
    let half = FieldElement::from_ratio(&field, 1, 2);
    let e1 = exp_linear(&field, 2, 1, half.clone(), cutoff)?;
    let e2 = exp_linear(&field, 2, 0, w.mul(&half), cutoff)?;
    let integrand = shifted.mul(&e1)?.mul(&e2)?;
    let form = QuadraticForm::scalar(lam)?;
    let br = bracket(&integrand, &form, &[1])?;
    let norm = HbarSeries::hbar_term(&field, 1, cutoff, 2, FieldElement::from_ratio(&field, -1, 24))
        .exp()?;
    let rhs = br.mul(&norm)?;
    let lhs = psi_series(0, 1, z, cutoff)?;
    Ok(report("fourier", format!("z = {}", z), cutoff, &lhs, &rhs))
}

/// psi(x, z) = e^{hbar/24} < exp(-x h^{1/2}/2)
///                            psi(y - x/(1-z), 1 - 1/z) >_{y, z - 1}.
pub fn verify_fourier_cor(z: &FieldElement, cutoff: u32) -> Result<VerifyReport> {
    check_shape(z)?;
    let field = z.field().clone();
    let one = FieldElement::one(&field);
    let zpp = one.sub(&z.inv()?);
    let c = one.sub(z).inv()?.neg(); // -1/(1-z)
    let lam = z.sub(&one);
    let psi_y = psi_series(1, 2, &zpp, cutoff)?;
    let img_x = linear_image(&field, 2, &[(0, one.clone())], cutoff)?;
    let img_y = linear_image(&field, 2, &[(1, one.clone()), (0, c)], cutoff)?;
    let shifted = psi_y.substitute(&[img_x, img_y])?;
    let e = exp_linear(&field, 2, 0, FieldElement::from_ratio(&field, -1, 2), cutoff)?;
    let integrand = shifted.mul(&e)?;
    let form = QuadraticForm::scalar(lam)?;
    let br = bracket(&integrand, &form, &[1])?;
    let norm = HbarSeries::hbar_term(&field, 1, cutoff, 2, FieldElement::from_ratio(&field, 1, 24))
        .exp()?;
    let rhs = br.mul(&norm)?;
    let lhs = psi_series(0, 1, z, cutoff)?;
    Ok(report("fourier-cor", format!("z = {}", z), cutoff, &lhs, &rhs))
}

/// The pentagon: psi(x, z1) psi(y, z2) = e^{-hbar/24}
///   < psi(-w-y+s, z1/z0) psi(w+x+y-s, z0) psi(-w-x+s, z2/z0) >_{w, delta}
/// with s = (x z2 + y z1)/z0, z0 = z1 + z2 - z1 z2 and
/// delta = z0^2 / (z1 z2 (1-z1)(1-z2)).
pub fn verify_pentagon(z1: &FieldElement, z2: &FieldElement, cutoff: u32) -> Result<VerifyReport> {
    check_shape(z1)?;
    check_shape(z2)?;
    let field = z1.field().clone();
    let one = FieldElement::one(&field);
    let z0 = z1.add(z2).sub(&z1.mul(z2));
    if z0.is_zero() || z0 == one {
        return Err(Error::DegeneratePentagon(format!("z0 = {}", z0)));
    }
    let z0inv = z0.inv()?;
    let za = z1.mul(&z0inv);
    let zc = z2.mul(&z0inv);
    check_shape(&za)?;
    check_shape(&zc)?;
    // delta via the Li_0 sum and via the closed form; they must agree
    let li0 = |w: &FieldElement| -> Result<FieldElement> {
        let om = one.sub(w);
        Ok(w.mul(&om.inv()?))
    };
    let delta = FieldElement::from_i64(&field, 2)
        .add(&li0(&za)?)
        .add(&li0(&z0)?)
        .add(&li0(&zc)?);
    let closed = z0.mul(&z0).mul(
        &z1.mul(z2)
            .mul(&one.sub(z1))
            .mul(&one.sub(z2))
            .inv()?,
    );
    if delta != closed {
        return Err(Error::DegeneratePentagon(format!(
            "delta mismatch: {} vs {}",
            delta, closed
        )));
    }
    if delta.is_zero() {
        return Err(Error::DegeneratePentagon("delta = 0".into()));
    }
    // vars: x = 0, y = 1 survive; w = 2 integrated
    let sx = z2.mul(&z0inv);
    let sy = z1.mul(&z0inv);
    let m1 = FieldElement::from_i64(&field, -1);
    let arg_a = linear_image(
        &field,
        3,
        &[(0, sx.clone()), (1, sy.sub(&one)), (2, m1.clone())],
        cutoff,
    )?;
    let arg_b = linear_image(
        &field,
        3,
        &[(0, one.sub(&sx)), (1, one.sub(&sy)), (2, one.clone())],
        cutoff,
    )?;
    let arg_c = linear_image(
        &field,
        3,
        &[(0, sx.sub(&one)), (1, sy.clone()), (2, m1)],
        cutoff,
    )?;
    let base_a = psi_series(0, 1, &za, cutoff)?;
    let base_b = psi_series(0, 1, &z0, cutoff)?;
    let base_c = psi_series(0, 1, &zc, cutoff)?;
    let fa = base_a.substitute(&[arg_a])?;
    let fb = base_b.substitute(&[arg_b])?;
    let fc = base_c.substitute(&[arg_c])?;
    let integrand = fa.mul(&fb)?.mul(&fc)?;
    let form = QuadraticForm::scalar(delta)?;
    let br = bracket(&integrand, &form, &[2])?;
    let norm = HbarSeries::hbar_term(&field, 2, cutoff, 2, FieldElement::from_ratio(&field, -1, 24))
        .exp()?;
    let rhs = br.mul(&norm)?;
    let lhs = psi_series(0, 2, z1, cutoff)?.mul(&psi_series(1, 2, z2, cutoff)?)?;
    Ok(report(
        "pentagon",
        format!("z1 = {}, z2 = {}", z1, z2),
        cutoff,
        &lhs,
        &rhs,
    ))
}

/// psi(x, z) (1 - z^{-1} e^{-x h^{1/2}})/(1 - z^{-1}) psi(-x, 1/z)
///   = exp(-x h^{1/2}/2 + hbar/12).
pub fn verify_inversion(z: &FieldElement, cutoff: u32) -> Result<VerifyReport> {
    check_shape(z)?;
    let field = z.field().clone();
    let one = FieldElement::one(&field);
    let zinv = z.inv()?;
    check_shape(&zinv)?;
    let psi_z = psi_series(0, 1, z, cutoff)?;
    let psi_inv = {
        let base = psi_series(0, 1, &zinv, cutoff)?;
        let img = linear_image(&field, 1, &[(0, FieldElement::from_i64(&field, -1))], cutoff)?;
        base.substitute(&[img])?
    };
    // (1 - z^{-1} e^{-x h^{1/2}}) / (1 - z^{-1})
    let mid = {
        let e = exp_linear(&field, 1, 0, FieldElement::from_i64(&field, -1), cutoff)?;
        let num = HbarSeries::one(&field, 1, cutoff).sub(&e.scale(&zinv))?;
        num.scale(&one.sub(&zinv).inv()?)
    };
    let lhs = psi_z.mul(&mid)?.mul(&psi_inv)?;
    let rhs = {
        let lin = XPoly::monomial(&field, 1, 0, 1, FieldElement::from_ratio(&field, -1, 2))?;
        let mut expo = HbarSeries::from_xpoly(lin, 1, cutoff);
        expo = expo.add(&HbarSeries::hbar_term(
            &field,
            1,
            cutoff,
            2,
            FieldElement::from_ratio(&field, 1, 12),
        ))?;
        expo.exp()?
    };
    Ok(report("inversion", format!("z = {}", z), cutoff, &lhs, &rhs))
}

/// The first-order q-difference equation of psi:
/// psi(x, e^h z) = (1 - z e^{x h^{1/2}}) psi(x, z) sqrt((1-e^h z)/(1-z))
///   * (1-z)^{-1} exp(remaining log-free exponent),
/// where the hbar^0 part Li_1(z) of the exponent has been replaced by the
/// exact factor (1-z)^{-1} = exp(Li_1(z)).
pub fn verify_qdiff(z: &FieldElement, cutoff: u32) -> Result<VerifyReport> {
    check_shape(z)?;
    let field = z.field().clone();
    let one = FieldElement::one(&field);
    let lhs = psi_series_shifted_shape(0, 1, z, 1, cutoff)?;

    let mut ladder = PolylogLadder::new(z.clone())?;
    // (1 - z e^{x h^{1/2}})
    let front = {
        let e = exp_linear(&field, 1, 0, one.clone(), cutoff)?;
        HbarSeries::one(&field, 1, cutoff).sub(&e.scale(z))?
    };
    // sqrt((1 - e^h z)/(1 - z)) = sqrt(1 - Li_0(z)(e^h - 1))
    let sqrt_factor = {
        let hb = HbarSeries::hbar_term(&field, 1, cutoff, 2, one.clone());
        let em1 = hb.exp()?.sub(&HbarSeries::one(&field, 1, cutoff))?;
        let li0 = ladder.get(0)?;
        HbarSeries::one(&field, 1, cutoff)
            .sub(&em1.scale(&li0))?
            .sqrt()?
    };
    // exponent: sum_{r>=2} Li_{2-r}(z) h^{r-1}/r!
    //         + x sum_{r>=1} Li_{1-r}(z) h^{r - 1/2}/r!
    //         + (x^2/2) sum_{r>=1} Li_{-r}(z) h^r/r!
    let mut expo = HbarSeries::zero(&field, 1, cutoff);
    let mut rfact = BigRational::from_integer(1.into());
    for r in 1..=(cutoff as i64 / 2 + 2) {
        rfact *= BigRational::from_integer(r.into());
        let inv_rf = rfact.recip();
        // x^0 terms start at r = 2
        if r >= 2 {
            let j = 2 * (r - 1) as u32;
            if j <= cutoff {
                let c = ladder.get(2 - r)?.scale(&inv_rf);
                expo = expo.add(&HbarSeries::hbar_term(&field, 1, cutoff, j, c))?;
            }
        }
        let j1 = (2 * r - 1) as u32;
        if j1 <= cutoff {
            let c = ladder.get(1 - r)?.scale(&inv_rf);
            let mono = XPoly::monomial(&field, 1, 0, 1, c)?;
            expo = expo.add(&HbarSeries::from_xpoly(mono, j1, cutoff))?;
        }
        let j2 = (2 * r) as u32;
        if j2 <= cutoff {
            let half = BigRational::new(1.into(), 2.into());
            let c = ladder.get(-r)?.scale(&(inv_rf * half));
            let mono = XPoly::monomial(&field, 1, 0, 2, c)?;
            expo = expo.add(&HbarSeries::from_xpoly(mono, j2, cutoff))?;
        }
    }
    let psi_z = psi_series(0, 1, z, cutoff)?;
    let rhs = front
        .mul(&psi_z)?
        .mul(&sqrt_factor)?
        .mul(&expo.exp()?)?
        .scale(&one.sub(z).inv()?);
    Ok(report("qdiff", format!("z = {}", z), cutoff, &lhs, &rhs))
}

/// psi(x, z) = psi(0, z e^{x h^{1/2}}) C(x, z).
pub fn verify_psid(z: &FieldElement, cutoff: u32) -> Result<VerifyReport> {
    check_shape(z)?;
    let field = z.field().clone();
    let u = HbarSeries::from_xpoly(
        XPoly::monomial(&field, 1, 0, 1, FieldElement::one(&field))?,
        1,
        cutoff,
    );
    let lhs = psi_series(0, 1, z, cutoff)?;
    let rhs = psi_shifted(z, &u, cutoff)?.mul(&c_factor(0, 1, z, cutoff)?)?;
    Ok(report("psid", format!("z = {}", z), cutoff, &lhs, &rhs))
}

fn random_symmetric_invertible(
    rng: &mut ChaCha8Rng,
    field: &Arc<NumberField>,
    n: usize,
) -> QuadraticForm {
    loop {
        let mut m = ExactMatrix::zeros(field, n, n);
        for i in 0..n {
            for j in i..n {
                let v = FieldElement::from_i64(field, rng.gen_range(-3..=3i64));
                *m.at_mut(i, j) = v.clone();
                *m.at_mut(j, i) = v;
            }
        }
        if let Ok(q) = QuadraticForm::new(m) {
            return q;
        }
    }
}

fn random_poly_series(
    rng: &mut ChaCha8Rng,
    field: &Arc<NumberField>,
    n: usize,
    cutoff: u32,
) -> HbarSeries {
    let mut s = HbarSeries::one(field, n, cutoff);
    for _ in 0..4 {
        let j = rng.gen_range(0..=cutoff.min(4));
        let mut p = XPoly::zero(field, n);
        let mut e = vec![0u16; n];
        for x in e.iter_mut() {
            *x = rng.gen_range(0..=3u16);
        }
        let c = FieldElement::from_ratio(field, rng.gen_range(-4..=4i64).max(1), rng.gen_range(1..=3i64));
        p.add_term(crate::series::Mono(e.into()), c);
        s = s.add(&HbarSeries::from_xpoly(p, j, cutoff)).unwrap();
    }
    s
}

/// Verifies the Gaussian integration lemmas (change of variables, affine
/// recentering, Fubini/Schur) and the z-shift lemma on seeded random
/// instances of size <= 3.
pub fn verify_gauss_lemmas(seed: u64, cutoff: u32) -> Result<Vec<VerifyReport>> {
    verify_gauss_lemmas_in(seed, cutoff, &NumberField::rationals())
}

pub fn verify_gauss_lemmas_in(
    seed: u64,
    cutoff: u32,
    field: &Arc<NumberField>,
) -> Result<Vec<VerifyReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let n = 2 + (seed as usize % 2); // 2 or 3 variables

    // (a) change of variables: <f(Px)>_{P^t Lam P} = <f(x)>_{Lam}
    {
        let form = random_symmetric_invertible(&mut rng, field, n);
        let f = random_poly_series(&mut rng, field, n, cutoff);
        let p = loop {
            let mut m = IntMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, rng.gen_range(-2..=2i64));
                }
            }
            if m.det_big().map(|d| !num_traits::Zero::is_zero(&d)).unwrap_or(false) {
                break m;
            }
        };
        let px = p.to_exact(field);
        let images: Vec<HbarSeries> = (0..n)
            .map(|i| {
                let terms: Vec<(usize, FieldElement)> = (0..n)
                    .map(|j| (j, px.at(i, j).clone()))
                    .filter(|(_, c)| !c.is_zero())
                    .collect();
                linear_image(field, n, &terms, cutoff)
            })
            .collect::<Result<_>>()?;
        let fpx = f.substitute(&images)?;
        let ptlp = QuadraticForm::new(px.transpose().mul(form.matrix())?.mul(&px)?)?;
        let lhs = bracket_all(&fpx, &ptlp)?;
        let rhs = bracket_all(&f, &form)?;
        out.push(report("gauss-a", format!("seed = {}, n = {}", seed, n), cutoff, &lhs, &rhs));
    }

    // (b) recentering: <exp(-G^t Lam x h^{1/2}) f(x + G h^{1/2})>_{Lam}
    //     = exp(G^t Lam G h/2) <f>_{Lam}
    {
        let form = random_symmetric_invertible(&mut rng, field, n);
        let f = random_poly_series(&mut rng, field, n, cutoff);
        let g: Vec<FieldElement> = (0..n)
            .map(|_| FieldElement::from_i64(field, rng.gen_range(-2..=2i64)))
            .collect();
        let lam_g = form.matrix().mul_vec(&g)?;
        let mut lin = XPoly::zero(field, n);
        for (i, c) in lam_g.iter().enumerate() {
            if !c.is_zero() {
                lin = lin.add(&XPoly::monomial(field, n, i, 1, c.neg())?)?;
            }
        }
        let weight = HbarSeries::from_xpoly(lin, 1, cutoff).exp()?;
        let images: Vec<HbarSeries> = (0..n)
            .map(|i| {
                let xi = linear_image(field, n, &[(i, FieldElement::one(field))], cutoff)?;
                xi.add(&HbarSeries::hbar_term(field, n, cutoff, 1, g[i].clone()))
            })
            .collect::<Result<_>>()?;
        let shifted = f.substitute(&images)?;
        let lhs = bracket_all(&weight.mul(&shifted)?, &form)?;
        let mut gtlg = FieldElement::zero(field);
        for (gi, li) in g.iter().zip(&lam_g) {
            gtlg = gtlg.add(&gi.mul(li));
        }
        let half = FieldElement::from_ratio(field, 1, 2);
        let factor = HbarSeries::hbar_term(field, 0, cutoff, 2, gtlg.mul(&half)).exp()?;
        let rhs = bracket_all(&f, &form)?.mul(&factor)?;
        out.push(report("gauss-b", format!("seed = {}, n = {}", seed, n), cutoff, &lhs, &rhs));
    }

    // (c) Fubini/Schur: full bracket of exp(F x' h^{1/2}) g(x'') equals the
    //     bracket of the Schur-reduced pair
    {
        let form = random_symmetric_invertible(&mut rng, field, n);
        let n1 = 1;
        let n2 = n - n1;
        // the A block must itself be invertible
        let a_ok = {
            let a = ExactMatrix::from_fn(field, n1, n1, |i, j| form.matrix().at(i, j).clone());
            a.inverse_det().is_ok()
        };
        if a_ok {
            let g = random_poly_series(&mut rng, field, n2, cutoff);
            let fvec: Vec<FieldElement> = (0..n1)
                .map(|_| FieldElement::from_i64(field, rng.gen_range(-2..=2i64)))
                .collect();
            let full = {
                let mut lin = XPoly::zero(field, n);
                for (i, c) in fvec.iter().enumerate() {
                    if !c.is_zero() {
                        lin = lin.add(&XPoly::monomial(field, n, i, 1, c.clone())?)?;
                    }
                }
                let e = HbarSeries::from_xpoly(lin, 1, cutoff).exp()?;
                let mapping: Vec<usize> = (n1..n).collect();
                e.mul(&g.embed(n, &mapping)?)?
            };
            let lhs = bracket_all(&full, &form)?;
            let (red, rform) = schur_reduce(&fvec, &g, &form, n1)?;
            let rhs = bracket_all(&red, &rform)?;
            out.push(report("gauss-c", format!("seed = {}, n = {}", seed, n), cutoff, &lhs, &rhs));
        } else {
            out.push(VerifyReport::passed(
                "gauss-c",
                format!("seed = {} skipped (singular A block)", seed),
                cutoff,
            ));
        }
    }

    // (ff2) z-shift: the bracket with the shifted series-valued form equals
    //       the sqrt-det-corrected bracket against the constant form
    {
        let nz = 1 + (seed as usize % 2); // 1 or 2 shifted variables
        let shapes: Vec<FieldElement> = (0..nz)
            .map(|_| {
                let p = rng.gen_range(2..=5i64);
                let q = rng.gen_range(2..=7i64) + p; // keeps z != 1
                FieldElement::from_ratio(field, p, q)
            })
            .collect();
        let eps: Vec<i64> = (0..nz).map(|i| if i == 0 { 1 } else { -1 }).collect();
        // Lambda(z) = diag(1/(1-z_j)) - Q, Q constant symmetric
        let mut q = ExactMatrix::zeros(field, nz, nz);
        for i in 0..nz {
            for j in i..nz {
                let v = FieldElement::from_i64(field, rng.gen_range(-2..=2i64));
                *q.at_mut(i, j) = v.clone();
                *q.at_mut(j, i) = v;
            }
        }
        let entries: Vec<HbarSeries> = (0..nz * nz)
            .map(|idx| {
                let (i, j) = (idx / nz, idx % nz);
                let qv = HbarSeries::constant(field, 0, cutoff, q.at(i, j).neg());
                if i == j {
                    // 1/(1 - z e^{eps h}) = 1 + Li_0(z e^{eps h})
                    let u = HbarSeries::hbar_term(
                        field,
                        0,
                        cutoff,
                        2,
                        FieldElement::from_i64(field, eps[i]),
                    );
                    let shifted = polylog_shift(0, &shapes[i], &u, cutoff)?;
                    HbarSeries::one(field, 0, cutoff).add(&shifted)?.add(&qv)
                } else {
                    Ok(qv)
                }
            })
            .collect::<Result<_>>()?;
        let lam_h = ScalarSeriesMatrix::new(nz, entries)?;
        let const_ok = {
            let lam0 = lam_h.constant_part();
            QuadraticForm::new(lam0).is_ok()
        };
        if const_ok {
            let f = random_poly_series(&mut rng, field, nz, cutoff);
            let vars: Vec<usize> = (0..nz).collect();
            let lhs = bracket_series_form(&f, &lam_h, &vars)?;
            let rhs = bracket_hdep(&f, &lam_h, &vars)?;
            out.push(report(
                "gauss-ff2",
                format!("seed = {}, n = {}, z = {:?}", seed, nz, shapes.iter().map(|z| z.to_string()).collect::<Vec<_>>()),
                cutoff,
                &lhs,
                &rhs,
            ));
        } else {
            out.push(VerifyReport::passed(
                "gauss-ff2",
                format!("seed = {} skipped (degenerate constant form)", seed),
                cutoff,
            ));
        }
    }
    Ok(out)
}

/// Error-vs-order table of the q-Pochhammer asymptotic expansion at a real
/// negative hbar.
#[derive(Debug, Clone)]
pub struct PochhammerReport {
    /// (half-order j, relative error of the expansion truncated at j)
    pub rows: Vec<(u32, f64)>,
    pub best_order: u32,
    pub best_error: f64,
    /// first order after which the error started growing, when observed
    pub turnaround: Option<u32>,
}

impl PochhammerReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "rows": self.rows.iter().map(|(j, e)| json!({"j": j, "rel_err": e})).collect::<Vec<_>>(),
            "best_order": self.best_order,
            "best_error": self.best_error,
            "turnaround": self.turnaround,
        })
    }
}

/// Compares (z e^{x h^{1/2}}; e^h)_inf^{-1} (direct product, the ground
/// truth) against (1-z)^{-1/2} exp(-Li_2(z)/h - Li_1(z) x/h^{1/2}
/// - Li_0(z) x^2/2) psi_h(x, z) truncated at each order.
///
/// Requires |z| < 1 and hbar < 0 real; x real keeps x h^{1/2} imaginary so
/// the product converges.
pub fn pochhammer_check(
    z: &FieldElement,
    x: f64,
    hbar: f64,
    cutoff: u32,
    precision: f64,
) -> Result<PochhammerReport> {
    if hbar >= 0.0 {
        return Err(Error::NumericDomain("hbar must be a negative real".into()));
    }
    let zc = z.embed();
    if zc.norm() >= 1.0 {
        return Err(Error::NumericDomain(format!("|z| = {} must be < 1", zc.norm())));
    }
    let sqrt_h = Complex64::new(0.0, (-hbar).sqrt()); // principal root, imaginary
    let arg = zc * (sqrt_h * x).exp();
    if arg.norm() >= 1.0 {
        return Err(Error::NumericDomain("|z e^{x h^{1/2}}| must be < 1".into()));
    }
    let q = (Complex64::new(hbar, 0.0)).exp();

    // ground truth by direct product
    let mut prod = Complex64::new(1.0, 0.0);
    let mut qk = Complex64::new(1.0, 0.0);
    for _ in 0..500_000 {
        let factor = Complex64::new(1.0, 0.0) - qk * arg;
        prod *= factor;
        qk *= q;
        if (qk * arg).norm() < precision * 1e-3 {
            break;
        }
    }
    let lhs = prod.inv();

    // asymptotic prefactor
    let li2 = polylog_numeric(2, zc, precision * 1e-3)?;
    let li1 = polylog_numeric(1, zc, precision * 1e-3)?;
    let li0 = zc / (Complex64::new(1.0, 0.0) - zc);
    let pref = (Complex64::new(1.0, 0.0) - zc).powf(-0.5)
        * (-li2 / hbar - li1 * x / sqrt_h - li0 * x * x / 2.0).exp();

    // exact psi evaluated numerically order by order
    let psi = if z.field().is_rationals() && x == 0.0 {
        psi_series(0, 1, z, cutoff)?.eval_zero(&[0])
    } else {
        psi_series(0, 1, z, cutoff)?
    };
    let xc = Complex64::new(x, 0.0);
    let mut partial = Complex64::new(0.0, 0.0);
    let mut rows = Vec::new();
    for j in 0..=cutoff {
        let p = psi.coeff(j);
        let mut val = Complex64::new(0.0, 0.0);
        for (m, c) in p.terms() {
            let e = m.0[0] as i32;
            val += c.embed() * xc.powi(e);
        }
        partial += val * sqrt_h.powi(j as i32);
        let approx = pref * partial;
        let rel = (approx / lhs - Complex64::new(1.0, 0.0)).norm();
        rows.push((j, rel));
    }
    let (best_order, best_error) = rows
        .iter()
        .cloned()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or((0, f64::NAN));
    // first even order where the error grows past its predecessor after the best
    let turnaround = rows
        .windows(2)
        .find(|w| w[0].0 >= best_order && w[1].1 > w[0].1 * 1.5)
        .map(|w| w[1].0);
    Ok(PochhammerReport { rows, best_order, best_error, turnaround })
}

/// Deterministic rational sample pools per identity (small height, away from
/// the identity-specific degeneracies), plus the standard Q(zeta6) sample.
pub fn rational_pool(identity: &str) -> Vec<(i64, i64)> {
    match identity {
        "fourier" => vec![(1, 3), (2, 5), (2, 1), (-1, 1), (3, 2), (1, 5), (5, 2), (-2, 1)],
        "fourier-cor" => vec![(2, 5), (1, 3), (3, 1), (-1, 1), (2, 3), (5, 2), (1, 4), (-3, 1)],
        "inversion" => vec![(2, 1), (1, 3), (-1, 1), (3, 2), (2, 5), (5, 1), (-1, 2), (4, 3)],
        "qdiff" => vec![(1, 4), (1, 3), (2, 1), (-2, 1), (3, 5), (5, 3), (-1, 2), (3, 1)],
        "psid" => vec![(2, 3), (1, 3), (2, 1), (-1, 1), (5, 2), (1, 5), (-2, 3), (7, 2)],
        _ => vec![(1, 3), (2, 5), (2, 1), (-1, 1), (3, 2)],
    }
}

pub fn pentagon_pool() -> Vec<((i64, i64), (i64, i64))> {
    vec![
        ((1, 3), (1, 5)),
        ((2, 1), (3, 1)),
        ((1, 3), (2, 5)),
        ((3, 2), (-1, 1)),
        ((2, 5), (2, 3)),
        ((-1, 1), (1, 2)),
        ((1, 2), (1, 3)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> FieldElement {
        FieldElement::from_ratio(&NumberField::rationals(), p, d)
    }

    #[test]
    fn fourier_rational() {
        let r = verify_fourier(&q(1, 3), 7).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn fourier_cutoff_zero() {
        let r = verify_fourier(&q(1, 3), 0).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn fourier_zeta6() {
        let f = NumberField::zeta6();
        let z = FieldElement::generator(&f);
        let r = verify_fourier(&z, 6).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn fourier_cor_rational() {
        let r = verify_fourier_cor(&q(2, 5), 6).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn pentagon_rational() {
        let r = verify_pentagon(&q(1, 3), &q(1, 5), 5).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn pentagon_integer_shapes() {
        // z1 = 2, z2 = 3: z0 = -1, delta = 1/12
        let r = verify_pentagon(&q(2, 1), &q(3, 1), 5).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn pentagon_degenerate_pair() {
        // z1 = z2 = 2 gives z0 = 0
        assert!(matches!(
            verify_pentagon(&q(2, 1), &q(2, 1), 4),
            Err(Error::DegeneratePentagon(_))
        ));
    }

    #[test]
    fn inversion_rational() {
        let r = verify_inversion(&q(2, 1), 8).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn inversion_x0_slice() {
        // psi(0, z) psi(0, 1/z) = e^{h/12} shows up as the x^0 slice
        let r = verify_inversion(&q(3, 2), 2).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn qdiff_rational() {
        let r = verify_qdiff(&q(1, 4), 6).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn qdiff_zeta6() {
        let f = NumberField::zeta6();
        let z = FieldElement::generator(&f);
        let r = verify_qdiff(&z, 4).unwrap();
        assert!(r.pass, "{:?}", r.first_diff);
    }

    #[test]
    fn psid_samples() {
        let r = verify_psid(&q(2, 3), 6).unwrap();
        assert!(r.pass);
        let f = NumberField::zeta6();
        let z = FieldElement::generator(&f);
        let r = verify_psid(&z, 5).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn gauss_lemmas_seed1() {
        let rs = verify_gauss_lemmas(1, 5).unwrap();
        for r in &rs {
            assert!(r.pass, "{} failed: {:?}", r.identity, r.first_diff);
        }
        assert_eq!(rs.len(), 4);
    }

    #[test]
    fn pochhammer_numeric() {
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 3);
        let rep = pochhammer_check(&z, 0.0, -0.05, 20, 1e-12).unwrap();
        assert!(rep.best_error < 1e-6, "best error {}", rep.best_error);
        assert!(rep.best_order <= 20);
        // errors decrease through the first few orders
        assert!(rep.rows[4].1 < rep.rows[0].1);
    }

    #[test]
    fn pochhammer_domain_checks() {
        let f = NumberField::rationals();
        let z = FieldElement::from_ratio(&f, 1, 3);
        assert!(pochhammer_check(&z, 0.0, 0.05, 4, 1e-10).is_err());
        let big = FieldElement::from_ratio(&f, 3, 2);
        assert!(pochhammer_check(&big, 0.0, -0.05, 4, 1e-10).is_err());
    }
}
