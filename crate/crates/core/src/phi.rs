//! Assembly of the integrand, the quadratic form Lambda, and the series
//! Phi(hbar) of a nondegenerate NZ datum, plus the 1-loop invariant.

use num_rational::BigRational;

use crate::exactfield::{ExactMatrix, FieldElement};
use crate::gauss::{bracket_all, QuadraticForm};
use crate::nzdata::NZDatum;
use crate::psi::PsiCache;
use crate::series::{DegreeCap, HbarSeries, XPoly};
use crate::{Error, Result};

/// Phi as a scalar series, together with the datum fingerprint and cutoff.
#[derive(Debug, Clone)]
pub struct PhiResult {
    pub series: HbarSeries,
    pub fingerprint: String,
    pub cutoff: u32,
}

fn diag_inv_one_minus_z(nz: &NZDatum) -> Result<Vec<FieldElement>> {
    let field = nz.field();
    let one = FieldElement::one(field);
    nz.z.iter()
        .map(|z| {
            let om = one.sub(z);
            om.inv().map_err(|_| Error::DegenerateShape(z.to_string()))
        })
        .collect()
}

/// Lambda = -B^{-1} A + diag(1/(1-z_j)); symmetric by the half-symplectic
/// property, asserted here so corrupted input fails loudly.
pub fn lambda_matrix(nz: &NZDatum) -> Result<QuadraticForm> {
    let field = nz.field().clone();
    let n = nz.size();
    let bx = nz.b.to_exact(&field);
    let (binv, bdet) = bx.inverse_det().map_err(|e| match e {
        Error::SingularMatrix => Error::SingularB,
        other => other,
    })?;
    debug_assert!(!bdet.is_zero());
    let binva = binv.mul(&nz.a.to_exact(&field))?;
    let diag = diag_inv_one_minus_z(nz)?;
    let mut lam = ExactMatrix::from_fn(&field, n, n, |i, j| binva.at(i, j).neg());
    for (i, d) in diag.iter().enumerate() {
        *lam.at_mut(i, i) = lam.at(i, i).add(d);
    }
    if !lam.is_symmetric() {
        return Err(Error::NotSymmetric(
            "Lambda = -B^{-1}A + diag(1/(1-z)) is not symmetric; A B^t is corrupted".into(),
        ));
    }
    QuadraticForm::new(lam).map_err(|e| match e {
        Error::SingularMatrix => {
            let ol = one_loop(nz).map(|v| v.to_string()).unwrap_or_else(|_| "?".into());
            Error::DegenerateLambda(ol)
        }
        other => other,
    })
}

/// The integrand exp( (h^{1/2}/2) x^t 1 - (h^{1/2}/2) x^t B^{-1} nu
///                    + (h/8) f^t B^{-1} A f ) prod_i psi(x_i, z_i).
pub fn integrand(nz: &NZDatum, cutoff: u32, cache: &PsiCache) -> Result<HbarSeries> {
    let field = nz.field().clone();
    let n = nz.size();
    let bx = nz.b.to_exact(&field);
    let (binv, _) = bx.inverse_det().map_err(|e| match e {
        Error::SingularMatrix => Error::SingularB,
        other => other,
    })?;
    let nu_f: Vec<FieldElement> = nz.nu.iter().map(|&v| FieldElement::from_i64(&field, v)).collect();
    let binv_nu = binv.mul_vec(&nu_f)?;
    let half = FieldElement::from_ratio(&field, 1, 2);

    // linear prefactor (h^{1/2}/2)(x^t 1 - x^t B^{-1} nu)
    let mut lin = XPoly::zero(&field, n);
    for i in 0..n {
        let c = FieldElement::one(&field).sub(&binv_nu[i]).mul(&half);
        if !c.is_zero() {
            lin = lin.add(&XPoly::monomial(&field, n, i, 1, c)?)?;
        }
    }
    let mut expo = HbarSeries::from_xpoly(lin, 1, cutoff);

    // scalar prefactor (h/8) f^t B^{-1} A f
    let binva = binv.mul(&nz.a.to_exact(&field))?;
    let f_f: Vec<FieldElement> = nz.f.iter().map(|&v| FieldElement::from_i64(&field, v)).collect();
    let qf = binva.mul_vec(&f_f)?;
    let mut s = FieldElement::zero(&field);
    for (fi, qi) in f_f.iter().zip(&qf) {
        s = s.add(&fi.mul(qi));
    }
    let eighth = FieldElement::from_rational(&field, BigRational::new(1.into(), 8.into()));
    expo = expo.add(&HbarSeries::hbar_term(&field, n, cutoff, 2, s.mul(&eighth)))?;

    let mut out = expo.exp_capped(DegreeCap::PsiWeight)?;
    for (i, z) in nz.z.iter().enumerate() {
        let psi = cache.series(i, n, z, cutoff)?;
        out = out.mul_capped(&psi, DegreeCap::PsiWeight)?;
    }
    Ok(out)
}

/// Phi(hbar) = < integrand >_{x, Lambda}: an integer-power series with
/// constant term 1 and coefficients in the input field.
pub fn phi_series(nz: &NZDatum, cutoff: u32, cache: &PsiCache) -> Result<PhiResult> {
    let form = lambda_matrix(nz)?;
    let f = integrand(nz, cutoff, cache)?;
    let series = bracket_all(&f, &form)?;
    for (&j, p) in series.orders() {
        if j % 2 == 1 && !p.is_zero() {
            return Err(Error::InvalidDatum(format!(
                "Phi acquired a half-odd coefficient at hbar^{}/2; integrand parity is broken",
                j
            )));
        }
    }
    if !series.has_unit_constant() {
        return Err(Error::InvalidDatum("Phi must start at 1".into()));
    }
    Ok(PhiResult {
        series,
        fingerprint: nz.to_json().to_string(),
        cutoff,
    })
}

/// The 1-loop quantity det(-A + B diag(1/(1-z_j))); when det B != 0 the
/// factorization det(B) det(Lambda) = one_loop is also checked.
pub fn one_loop(nz: &NZDatum) -> Result<FieldElement> {
    let field = nz.field().clone();
    let n = nz.size();
    let diag = diag_inv_one_minus_z(nz)?;
    let ax = nz.a.to_exact(&field);
    let bx = nz.b.to_exact(&field);
    let m = ExactMatrix::from_fn(&field, n, n, |i, j| {
        let mut v = ax.at(i, j).neg();
        if !bx.at(i, j).is_zero() {
            v = v.add(&bx.at(i, j).mul(&diag[j]));
        }
        v
    });
    let value = m.det()?;
    let bdet = bx.det()?;
    if !bdet.is_zero() {
        if let Ok(form) = lambda_matrix(nz) {
            let prod = bdet.mul(form.det());
            if prod != value {
                return Err(Error::InvalidDatum(format!(
                    "1-loop factorization failed: det(B) det(Lambda) = {} but det(-A + B diag) = {}",
                    prod, value
                )));
            }
        }
    }
    Ok(value)
}

/// Multiplies a scalar series by exp(c hbar); the explicit normalization hook
/// used by the CLI (nothing is normalized silently).
pub fn normalize_exp(series: &HbarSeries, c: &BigRational) -> Result<HbarSeries> {
    let field = series.field().clone();
    let e = HbarSeries::hbar_term(
        &field,
        series.nvars(),
        series.cutoff(),
        2,
        FieldElement::from_rational(&field, c.clone()),
    )
    .exp()?;
    series.mul(&e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactfield::{IntMatrix, NumberField};
    use crate::polylog::polylog_nonpos;

    #[test]
    fn lambda_fig8() {
        let nz = NZDatum::fig8();
        let form = lambda_matrix(&nz).unwrap();
        let f = nz.field().clone();
        let z = crate::exactfield::FieldElement::generator(&f);
        let zm1 = z.sub(&FieldElement::one(&f));
        assert_eq!(*form.matrix().at(0, 0), zm1);
        assert_eq!(*form.matrix().at(0, 1), FieldElement::from_i64(&f, -1));
        assert_eq!(*form.matrix().at(1, 1), zm1);
    }

    #[test]
    fn lambda_with_zero_a_is_diagonal() {
        let field = NumberField::rationals();
        let z = FieldElement::from_ratio(&field, 1, 3);
        let nz = NZDatum::new(
            IntMatrix::zeros(2, 2),
            IntMatrix::identity(2),
            vec![0, 0],
            vec![z.clone(), z.clone()],
            vec![0, 0],
            vec![0, 0],
        )
        .unwrap();
        let form = lambda_matrix(&nz).unwrap();
        let want = FieldElement::one(&field).sub(&z).inv().unwrap();
        assert_eq!(*form.matrix().at(0, 0), want);
        assert!(form.matrix().at(0, 1).is_zero());
    }

    #[test]
    fn integrand_fig8_half_order() {
        // with B^{-1} nu = (1,1) the linear prefactor cancels and the
        // hbar^{1/2} coefficient is psi's per variable
        let nz = NZDatum::fig8();
        let cache = PsiCache::new();
        let f = integrand(&nz, 1, &cache).unwrap();
        let field = nz.field().clone();
        let c = f.coeff(1);
        let li0 = polylog_nonpos(0, &nz.z[0]).unwrap();
        let li1m = polylog_nonpos(-1, &nz.z[0]).unwrap();
        let half = BigRational::new(1.into(), 2.into());
        let sixth = BigRational::new(1.into(), 6.into());
        assert_eq!(c.coefficient(&[1, 0]), li0.scale(&half));
        assert_eq!(c.coefficient(&[0, 1]), li0.scale(&half));
        assert_eq!(c.coefficient(&[3, 0]), li1m.scale(&sixth).neg());
        let _ = field;
    }

    #[test]
    fn phi_at_cutoff_zero_is_one() {
        let nz = NZDatum::fig8();
        let cache = PsiCache::new();
        let phi = phi_series(&nz, 0, &cache).unwrap();
        assert!(phi.series.has_unit_constant());
        assert_eq!(phi.series.orders().count(), 1);
    }

    #[test]
    fn phi_half_odd_coefficients_vanish() {
        let nz = NZDatum::fig8();
        let cache = PsiCache::new();
        let phi = phi_series(&nz, 8, &cache).unwrap();
        for (&j, p) in phi.series.orders() {
            assert!(j % 2 == 0 && !p.is_zero() || p.is_zero());
        }
    }

    #[test]
    fn one_loop_fig8() {
        // det(B) det(Lambda) = (-1)(-zeta - 1) = zeta + 1
        let nz = NZDatum::fig8();
        let field = nz.field().clone();
        let z = FieldElement::generator(&field);
        let got = one_loop(&nz).unwrap();
        assert_eq!(got, z.add(&FieldElement::one(&field)));
    }

    #[test]
    fn one_loop_diag_case() {
        // A = 0, B = I: product of 1/(1-z_j)
        let field = NumberField::rationals();
        let z1 = FieldElement::from_ratio(&field, 1, 3);
        let z2 = FieldElement::from_ratio(&field, 2, 5);
        let nz = NZDatum::new(
            IntMatrix::zeros(2, 2),
            IntMatrix::identity(2),
            vec![0, 0],
            vec![z1.clone(), z2.clone()],
            vec![0, 0],
            vec![0, 0],
        )
        .unwrap();
        let got = one_loop(&nz).unwrap();
        let want = FieldElement::one(&field)
            .sub(&z1)
            .inv()
            .unwrap()
            .mul(&FieldElement::one(&field).sub(&z2).inv().unwrap());
        assert_eq!(got, want);
    }
}
