//! Formal Gaussian integration: the bracket <f>_{x,Lambda} given by
//! exp((1/2) sum (Lambda^{-1})_{ij} d_i d_j) f |_{x=0}, its hbar-dependent
//! extension, and Schur-complement reduction of block forms.

use std::sync::Arc;

use num_rational::BigRational;

use crate::exactfield::{ExactMatrix, FieldElement, NumberField};
use crate::series::{HbarSeries, XPoly};
use crate::{Error, Result};

/// A symmetric invertible quadratic form with cached inverse.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    lam: ExactMatrix,
    laminv: ExactMatrix,
    det: FieldElement,
}

impl QuadraticForm {
    pub fn new(lam: ExactMatrix) -> Result<Self> {
        if lam.rows() != lam.cols() {
            return Err(Error::NotSquare);
        }
        if !lam.is_symmetric() {
            return Err(Error::NotSymmetric("quadratic form".into()));
        }
        let (laminv, det) = lam.inverse_det()?;
        Ok(QuadraticForm { lam, laminv, det })
    }

    pub fn scalar(lam: FieldElement) -> Result<Self> {
        Self::new(ExactMatrix::new(1, 1, vec![lam])?)
    }

    pub fn size(&self) -> usize {
        self.lam.rows()
    }

    pub fn matrix(&self) -> &ExactMatrix {
        &self.lam
    }

    pub fn inverse(&self) -> &ExactMatrix {
        &self.laminv
    }

    pub fn det(&self) -> &FieldElement {
        &self.det
    }
}

/// Memoized Wick moments: <x^e> = sum_b G_{a,b} (e_b - [a == b]) <x^{e - d_a - d_b}>
/// for the first a with e_a > 0, where G = Lambda^{-1}. Equals the sum over
/// perfect matchings weighted by G; odd total degree vanishes.
struct MomentTable<'a> {
    g: &'a ExactMatrix,
    field: Arc<NumberField>,
    memo: std::collections::HashMap<Box<[u16]>, FieldElement>,
}

impl<'a> MomentTable<'a> {
    fn new(g: &'a ExactMatrix) -> Self {
        MomentTable {
            field: g.field().clone(),
            g,
            memo: std::collections::HashMap::new(),
        }
    }

    fn moment(&mut self, e: &[u16]) -> FieldElement {
        let total: u32 = e.iter().map(|&x| x as u32).sum();
        if total == 0 {
            return FieldElement::one(&self.field);
        }
        if total % 2 == 1 {
            return FieldElement::zero(&self.field);
        }
        if let Some(v) = self.memo.get(e) {
            return v.clone();
        }
        let a = e.iter().position(|&x| x > 0).expect("nonzero degree");
        let mut acc = FieldElement::zero(&self.field);
        for b in 0..e.len() {
            let w = self.g.at(a, b);
            if w.is_zero() {
                continue;
            }
            let mut rem = e[b];
            if a == b {
                rem -= 1;
            }
            if rem == 0 {
                continue;
            }
            let mut e2: Vec<u16> = e.to_vec();
            e2[a] -= 1;
            e2[b] -= 1;
            let sub = self.moment(&e2);
            if sub.is_zero() {
                continue;
            }
            let mult = BigRational::from_integer((rem as i64).into());
            acc.add_assign_ref(&w.mul(&sub).scale(&mult));
        }
        self.memo.insert(e.to_vec().into(), acc.clone());
        acc
    }
}

/// <f>_{vars, Lambda}: integrates the listed variables (Lambda is
/// |vars| x |vars|, indexing them in order) and renumbers the survivors
/// canonically (ascending original index).
pub fn bracket(f: &HbarSeries, form: &QuadraticForm, vars: &[usize]) -> Result<HbarSeries> {
    if form.size() != vars.len() {
        return Err(Error::ShapeMismatch(format!(
            "form size {} vs {} integrated variables",
            form.size(),
            vars.len()
        )));
    }
    for &v in vars {
        if v >= f.nvars() {
            return Err(Error::VarOutOfRange(v, f.nvars()));
        }
    }
    let field = f.field().clone();
    let mut moments = MomentTable::new(form.inverse());
    // a full bracket of a parity-respecting integrand vanishes at odd orders
    let prune_odd = vars.len() == f.nvars() && f.respects_psi_weight();
    let mut out = HbarSeries::zero(&field, f.nvars(), f.cutoff());
    for (&j, p) in f.orders() {
        if prune_odd && j % 2 == 1 {
            continue;
        }
        let mut acc = XPoly::zero(&field, f.nvars());
        for (m, c) in p.terms() {
            // split into integrated exponents and the surviving monomial
            let beta: Vec<u16> = vars.iter().map(|&v| m.0[v]).collect();
            let mom = moments.moment(&beta);
            if mom.is_zero() {
                continue;
            }
            let mut alpha: Vec<u16> = m.0.to_vec();
            for &v in vars {
                alpha[v] = 0;
            }
            acc.add_term(crate::series::Mono(alpha.into()), c.mul(&mom));
        }
        out.set_coeff(j, acc);
    }
    renumber_survivors(&out, vars)
}

/// Integrates every variable; the result is a scalar series (zero variables).
pub fn bracket_all(f: &HbarSeries, form: &QuadraticForm) -> Result<HbarSeries> {
    let vars: Vec<usize> = (0..f.nvars()).collect();
    bracket(f, form, &vars)
}

fn renumber_survivors(f: &HbarSeries, dropped: &[usize]) -> Result<HbarSeries> {
    let keep: Vec<usize> = (0..f.nvars()).filter(|v| !dropped.contains(v)).collect();
    let mut mapping = vec![0usize; f.nvars()];
    for (new, &old) in keep.iter().enumerate() {
        mapping[old] = new;
    }
    // dropped variables only ever carry exponent zero at this point; map them
    // to slot 0 (or nothing when no survivors remain)
    let nvars_out = keep.len();
    if nvars_out == 0 {
        let field = f.field().clone();
        let mut out = HbarSeries::zero(&field, 0, f.cutoff());
        for (&j, p) in f.orders() {
            out.set_coeff(
                j,
                XPoly::constant(&field, 0, p.constant_term()),
            );
        }
        return Ok(out);
    }
    f.embed(nvars_out, &mapping)
}

/// Small square matrix of scalar (zero-variable) hbar-series.
#[derive(Debug, Clone)]
pub struct ScalarSeriesMatrix {
    n: usize,
    field: Arc<NumberField>,
    entries: Vec<HbarSeries>,
}

impl ScalarSeriesMatrix {
    pub fn new(n: usize, entries: Vec<HbarSeries>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::ShapeMismatch("series matrix entries".into()));
        }
        for e in &entries {
            if e.nvars() != 0 {
                return Err(Error::ShapeMismatch(
                    "series matrix entries must be scalar series".into(),
                ));
            }
        }
        let field = entries[0].field().clone();
        Ok(ScalarSeriesMatrix { n, field, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> &HbarSeries {
        &self.entries[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.at(i, j) == self.at(j, i)))
    }

    /// Constant (hbar^0) part as an exact matrix.
    pub fn constant_part(&self) -> ExactMatrix {
        ExactMatrix::from_fn(&self.field, self.n, self.n, |i, j| {
            self.at(i, j).coeff(0).constant_term()
        })
    }

    /// Determinant by cofactor expansion; fine for the small sizes in use.
    pub fn det(&self) -> Result<HbarSeries> {
        let cutoff = self.entries.iter().map(|e| e.cutoff()).min().unwrap_or(0);
        let cols: Vec<usize> = (0..self.n).collect();
        self.det_rec(0, &cols, cutoff)
    }

    fn det_rec(&self, row: usize, cols: &[usize], cutoff: u32) -> Result<HbarSeries> {
        if cols.is_empty() {
            return Ok(HbarSeries::one(&self.field, 0, cutoff));
        }
        let mut acc = HbarSeries::zero(&self.field, 0, cutoff);
        for (k, &c) in cols.iter().enumerate() {
            let e = self.at(row, c);
            if e.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols
                .iter()
                .copied()
                .filter(|&x| x != c)
                .collect();
            let sub = self.det_rec(row + 1, &rest, cutoff)?;
            let term = e.truncate(cutoff).mul(&sub)?;
            acc = if k % 2 == 0 { acc.add(&term)? } else { acc.sub(&term)? };
        }
        Ok(acc)
    }

    /// Inverse over the series ring; requires the constant part invertible.
    pub fn inverse(&self) -> Result<ScalarSeriesMatrix> {
        let cutoff = self.entries.iter().map(|e| e.cutoff()).min().unwrap_or(0);
        let (c0inv, _) = self.constant_part().inverse_det()?;
        // X = C0^{-1}; iterate Newton-free: A = C0 (I + E), A^{-1} = (I+E)^{-1} C0^{-1}
        // with E = C0^{-1} (A - C0) of positive order; geometric series terminates.
        let n = self.n;
        let zero = HbarSeries::zero(&self.field, 0, cutoff);
        // E = C0^{-1} A - I has positive order
        let mut e_clean: Vec<HbarSeries> = vec![zero.clone(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = HbarSeries::zero(&self.field, 0, cutoff);
                for k in 0..n {
                    let c = c0inv.at(i, k);
                    if c.is_zero() {
                        continue;
                    }
                    acc = acc.add(&self.at(k, j).truncate(cutoff).scale(c))?;
                }
                if i == j {
                    acc = acc.sub(&HbarSeries::one(&self.field, 0, cutoff))?;
                }
                e_clean[i * n + j] = acc;
            }
        }
        // (I + E)^{-1} = sum (-E)^m
        let mut inv: Vec<HbarSeries> = (0..n * n)
            .map(|idx| {
                if idx / n == idx % n {
                    HbarSeries::one(&self.field, 0, cutoff)
                } else {
                    zero.clone()
                }
            })
            .collect();
        let mut pw = inv.clone();
        loop {
            // pw = -E * pw
            let mut next = vec![zero.clone(); n * n];
            let mut nonzero = false;
            for i in 0..n {
                for j in 0..n {
                    let mut acc = HbarSeries::zero(&self.field, 0, cutoff);
                    for k in 0..n {
                        if e_clean[i * n + k].is_zero() || pw[k * n + j].is_zero() {
                            continue;
                        }
                        acc = acc.add(&e_clean[i * n + k].mul(&pw[k * n + j])?)?;
                    }
                    let acc = acc.neg();
                    if !acc.is_zero() {
                        nonzero = true;
                    }
                    next[i * n + j] = acc;
                }
            }
            if !nonzero {
                break;
            }
            for idx in 0..n * n {
                inv[idx] = inv[idx].add(&next[idx])?;
            }
            pw = next;
        }
        // inv = (I+E)^{-1}; answer = inv * C0^{-1}
        let mut out = vec![zero; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = HbarSeries::zero(&self.field, 0, cutoff);
                for k in 0..n {
                    let c = c0inv.at(k, j);
                    if c.is_zero() || inv[i * n + k].is_zero() {
                        continue;
                    }
                    acc = acc.add(&inv[i * n + k].scale(c))?;
                }
                out[i * n + j] = acc;
            }
        }
        ScalarSeriesMatrix::new(n, out)
    }
}

fn mul_by_scalar_series(f: &HbarSeries, s: &HbarSeries) -> Result<HbarSeries> {
    let emb = s.embed(f.nvars(), &[])?;
    f.mul(&emb)
}

/// Bracket against a series-valued inverse form; used by the hbar-dependent
/// bracket and the Gaussian shift lemma verifier.
fn bracket_with_series_inverse(
    f: &HbarSeries,
    ginv: &ScalarSeriesMatrix,
    vars: &[usize],
) -> Result<HbarSeries> {
    let field = f.field().clone();
    let half = FieldElement::from_ratio(&field, 1, 2);
    let apply_d = |t: &HbarSeries| -> Result<HbarSeries> {
        let mut out = HbarSeries::zero(&field, t.nvars(), t.cutoff());
        for (ia, &a) in vars.iter().enumerate() {
            for (ib, &b) in vars.iter().enumerate() {
                let w = ginv.at(ia, ib);
                if w.is_zero() {
                    continue;
                }
                let mut dd = HbarSeries::zero(&field, t.nvars(), t.cutoff());
                for (&j, p) in t.orders() {
                    dd.set_coeff(j, p.dd(a, b));
                }
                if dd.is_zero() {
                    continue;
                }
                out = out.add(&mul_by_scalar_series(&dd.scale(&half), w)?)?;
            }
        }
        Ok(out)
    };
    let mut acc = f.clone();
    let mut term = f.clone();
    let mut m: u64 = 0;
    loop {
        m += 1;
        term = apply_d(&term)?;
        if term.is_zero() {
            break;
        }
        term = term.scale_q(&BigRational::new(1.into(), m.into()));
        acc = acc.add(&term)?;
    }
    renumber_survivors(&acc.eval_zero(vars), vars)
}

/// The hbar-dependent bracket <<f>>_{x, Lambda_hbar} of the appendix
/// definition: sqrt(det L_h / det L_0) < exp(-x^t (L_h - L_0) x / 2) f >_{L_0}.
///
/// `lam_h` indexes the integrated variables `vars` in order; its constant
/// part must be invertible.
pub fn bracket_hdep(
    f: &HbarSeries,
    lam_h: &ScalarSeriesMatrix,
    vars: &[usize],
) -> Result<HbarSeries> {
    if lam_h.size() != vars.len() {
        return Err(Error::ShapeMismatch(format!(
            "form size {} vs {} integrated variables",
            lam_h.size(),
            vars.len()
        )));
    }
    if !lam_h.is_symmetric() {
        return Err(Error::NotSymmetric("hbar-dependent form".into()));
    }
    let field = f.field().clone();
    let lam0 = lam_h.constant_part();
    let form0 = QuadraticForm::new(lam0.clone())?;
    let cutoff = f.cutoff();

    // sqrt(det Lh / det L0)
    let det_h = lam_h.det()?;
    let det0 = form0.det();
    let ratio = det_h.scale(&det0.inv()?);
    let sqrt_factor = ratio.truncate(cutoff).sqrt()?;

    // exp(-1/2 x^t (Lh - L0) x), a series whose orders carry quadratic monomials
    let mut expo = HbarSeries::zero(&field, f.nvars(), cutoff);
    let mhalf = FieldElement::from_ratio(&field, -1, 2);
    for (ia, &a) in vars.iter().enumerate() {
        for (ib, &b) in vars.iter().enumerate() {
            let mut entry = lam_h.at(ia, ib).truncate(cutoff);
            entry = entry.sub(&HbarSeries::constant(
                &field,
                0,
                cutoff,
                lam0.at(ia, ib).clone(),
            ))?;
            if entry.is_zero() {
                continue;
            }
            for (&j, p) in entry.orders() {
                let c = p.constant_term().mul(&mhalf);
                let mut e = vec![0u16; f.nvars()];
                e[a] += 1;
                e[b] += 1;
                let mut mono = XPoly::zero(&field, f.nvars());
                mono.add_term(crate::series::Mono(e.into()), c);
                expo = expo.add(&HbarSeries::from_xpoly(mono, j, cutoff))?;
            }
        }
    }
    let weight = expo.exp()?;
    let inner = bracket(&f.mul(&weight)?, &form0, vars)?;
    mul_by_scalar_series(&inner, &sqrt_factor)
}

/// Evaluation of <f>_{x, Lambda(z)} |_{z -> shifted}: a plain bracket whose
/// inverse form is itself an hbar-series. Exposed for the shift-lemma
/// verifier.
pub fn bracket_series_form(
    f: &HbarSeries,
    lam_h: &ScalarSeriesMatrix,
    vars: &[usize],
) -> Result<HbarSeries> {
    if lam_h.size() != vars.len() {
        return Err(Error::ShapeMismatch("series form size".into()));
    }
    let ginv = lam_h.inverse()?;
    bracket_with_series_inverse(f, &ginv, vars)
}

/// Schur reduction of Lemma-style block integrals: for Lambda split as
/// [[A, B], [B^t, C]] with the first block of size `n1` carrying only the
/// linear exponential exp(F x' hbar^{1/2}), returns the reduced integrand
/// exp(F A^{-1} F^t hbar / 2) exp(-F A^{-1} B x'' hbar^{1/2}) g(x'') and the
/// reduced form C - B^t A^{-1} B, so that bracketing the pair over x''
/// equals the original full bracket.
pub fn schur_reduce(
    linear: &[FieldElement],
    g: &HbarSeries,
    form: &QuadraticForm,
    n1: usize,
) -> Result<(HbarSeries, QuadraticForm)> {
    let n = form.size();
    if n1 > n || linear.len() != n1 {
        return Err(Error::ShapeMismatch("block split".into()));
    }
    let n2 = n - n1;
    if g.nvars() != n2 {
        return Err(Error::VarMismatch(g.nvars(), n2));
    }
    let field = form.matrix().field().clone();
    let lam = form.matrix();
    let a = ExactMatrix::from_fn(&field, n1, n1, |i, j| lam.at(i, j).clone());
    let b = ExactMatrix::from_fn(&field, n1, n2, |i, j| lam.at(i, n1 + j).clone());
    let c = ExactMatrix::from_fn(&field, n2, n2, |i, j| lam.at(n1 + i, n1 + j).clone());
    let (ainv, _) = a.inverse_det()?;

    // F A^{-1} F^t
    let fa = {
        let mut out = vec![FieldElement::zero(&field); n1];
        for (j, o) in out.iter_mut().enumerate() {
            for (i, fi) in linear.iter().enumerate() {
                *o = o.add(&fi.mul(ainv.at(i, j)));
            }
        }
        out
    };
    let mut faft = FieldElement::zero(&field);
    for (i, fi) in linear.iter().enumerate() {
        faft = faft.add(&fa[i].mul(fi));
    }
    let half = FieldElement::from_ratio(&field, 1, 2);
    let gauss_factor =
        HbarSeries::hbar_term(&field, n2, g.cutoff(), 2, faft.mul(&half)).exp()?;

    // -F A^{-1} B as a row over x''
    let mut cross = HbarSeries::zero(&field, n2, g.cutoff());
    for j in 0..n2 {
        let mut coef = FieldElement::zero(&field);
        for i in 0..n1 {
            coef = coef.add(&fa[i].mul(b.at(i, j)));
        }
        let coef = coef.neg();
        if !coef.is_zero() {
            let mono = XPoly::monomial(&field, n2, j, 1, coef)?;
            cross = cross.add(&HbarSeries::from_xpoly(mono, 1, g.cutoff()))?;
        }
    }
    let cross_factor = cross.exp()?;

    let reduced = g.mul(&gauss_factor)?.mul(&cross_factor)?;
    let schur = {
        let btainvb = b.transpose().mul(&ainv)?.mul(&b)?;
        let mut m = c.clone();
        for i in 0..n2 {
            for j in 0..n2 {
                *m.at_mut(i, j) = m.at(i, j).sub(btainvb.at(i, j));
            }
        }
        m
    };
    Ok((reduced, QuadraticForm::new(schur)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactfield::{IntMatrix, NumberField};

    fn scalar_form(field: &Arc<NumberField>, p: i64, q: i64) -> QuadraticForm {
        QuadraticForm::new(
            ExactMatrix::new(1, 1, vec![FieldElement::from_ratio(field, p, q)]).unwrap(),
        )
        .unwrap()
    }

    fn xpow(field: &Arc<NumberField>, n: u16, k: u32) -> HbarSeries {
        HbarSeries::from_xpoly(
            XPoly::monomial(field, 1, 0, n, FieldElement::one(field)).unwrap(),
            0,
            k,
        )
    }

    #[test]
    fn one_variable_moments() {
        let f = NumberField::rationals();
        let lam = scalar_form(&f, 5, 3);
        let inv = FieldElement::from_ratio(&f, 3, 5);
        // <x^2> = 1/lam, <x^4> = 3/lam^2, <x^3> = 0, <1> = 1
        let b2 = bracket_all(&xpow(&f, 2, 4), &lam).unwrap();
        assert_eq!(b2.coeff(0).constant_term(), inv);
        let b4 = bracket_all(&xpow(&f, 4, 4), &lam).unwrap();
        assert_eq!(
            b4.coeff(0).constant_term(),
            inv.mul(&inv).scale(&BigRational::from_integer(3.into()))
        );
        let b3 = bracket_all(&xpow(&f, 3, 4), &lam).unwrap();
        assert!(b3.is_zero());
        let b0 = bracket_all(&HbarSeries::one(&f, 1, 4), &lam).unwrap();
        assert_eq!(b0.coeff(0).constant_term(), FieldElement::one(&f));
    }

    #[test]
    fn cross_moment_is_inverse_entry() {
        let f = NumberField::rationals();
        let lam = QuadraticForm::new(
            IntMatrix::from_rows(&[vec![3, 1], vec![1, 2]]).unwrap().to_exact(&f),
        )
        .unwrap();
        let p = XPoly::monomial(&f, 2, 0, 1, FieldElement::one(&f))
            .unwrap()
            .mul(&XPoly::monomial(&f, 2, 1, 1, FieldElement::one(&f)).unwrap())
            .unwrap();
        let got = bracket_all(&HbarSeries::from_xpoly(p, 0, 2), &lam).unwrap();
        assert_eq!(got.coeff(0).constant_term(), *lam.inverse().at(0, 1));
    }

    #[test]
    fn wick_oracle_small() {
        // brute-force perfect matchings vs the operator bracket, N <= 3
        let f = NumberField::rationals();
        let lam = QuadraticForm::new(
            IntMatrix::from_rows(&[vec![2, 1, 0], vec![1, 3, 1], vec![0, 1, 2]])
                .unwrap()
                .to_exact(&f),
        )
        .unwrap();
        let g = lam.inverse();
        let wick = |expts: &[u16]| -> FieldElement {
            let mut slots = Vec::new();
            for (v, &e) in expts.iter().enumerate() {
                for _ in 0..e {
                    slots.push(v);
                }
            }
            fn pairings(
                slots: &mut Vec<usize>,
                g: &ExactMatrix,
                field: &Arc<NumberField>,
            ) -> FieldElement {
                if slots.is_empty() {
                    return FieldElement::one(field);
                }
                let a = slots.remove(0);
                let mut acc = FieldElement::zero(field);
                for idx in 0..slots.len() {
                    let b = slots.remove(idx);
                    let sub = pairings(slots, g, field);
                    acc = acc.add(&g.at(a, b).mul(&sub));
                    slots.insert(idx, b);
                }
                slots.insert(0, a);
                acc
            }
            if slots.len() % 2 == 1 {
                return FieldElement::zero(&f);
            }
            pairings(&mut slots, g, &f)
        };
        for expts in [[2u16, 0, 0], [1, 1, 0], [2, 1, 1], [3, 1, 0], [2, 2, 2], [4, 1, 1]] {
            let p = {
                let mut mono = XPoly::zero(&f, 3);
                mono.add_term(crate::series::Mono(expts.to_vec().into()), FieldElement::one(&f));
                mono
            };
            let got = bracket_all(&HbarSeries::from_xpoly(p, 0, 0), &lam).unwrap();
            assert_eq!(got.coeff(0).constant_term(), wick(&expts), "expts {:?}", expts);
        }
    }

    #[test]
    fn partial_bracket_keeps_survivors() {
        // <x y>_{y, lam} = x <y> = 0 ; <x y^2> = x / lam
        let f = NumberField::rationals();
        let lam = scalar_form(&f, 7, 2);
        let p = XPoly::monomial(&f, 2, 0, 1, FieldElement::one(&f))
            .unwrap()
            .mul(&XPoly::monomial(&f, 2, 1, 2, FieldElement::one(&f)).unwrap())
            .unwrap();
        let got = bracket(&HbarSeries::from_xpoly(p, 0, 2), &lam, &[1]).unwrap();
        assert_eq!(got.nvars(), 1);
        assert_eq!(
            got.coeff(0).coefficient(&[1]),
            FieldElement::from_ratio(&f, 2, 7)
        );
    }

    #[test]
    fn linearity() {
        let f = NumberField::rationals();
        let lam = scalar_form(&f, 3, 1);
        let a = xpow(&f, 2, 4);
        let b = xpow(&f, 4, 4);
        let lin = a
            .scale(&FieldElement::from_i64(&f, 5))
            .add(&b.scale(&FieldElement::from_i64(&f, -2)))
            .unwrap();
        let lhs = bracket_all(&lin, &lam).unwrap();
        let rhs = bracket_all(&a, &lam)
            .unwrap()
            .scale(&FieldElement::from_i64(&f, 5))
            .add(&bracket_all(&b, &lam).unwrap().scale(&FieldElement::from_i64(&f, -2)))
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn hdep_constant_form_reduces_to_bracket() {
        let f = NumberField::rationals();
        let lam = scalar_form(&f, 4, 1);
        let lam_h = ScalarSeriesMatrix::new(
            1,
            vec![HbarSeries::constant(&f, 0, 6, FieldElement::from_i64(&f, 4))],
        )
        .unwrap();
        let g = xpow(&f, 2, 6);
        let a = bracket_hdep(&g, &lam_h, &[0]).unwrap();
        let b = bracket_all(&g, &lam).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hdep_scalar_example() {
        // Lambda_h = lam (1 + h), f = x^2: expansion starts (1/lam)(1 - h + ...)
        let f = NumberField::rationals();
        let lamval = FieldElement::from_i64(&f, 2);
        let mut ser = HbarSeries::constant(&f, 0, 4, lamval.clone());
        ser.set_coeff(2, XPoly::constant(&f, 0, lamval.clone()));
        let lam_h = ScalarSeriesMatrix::new(1, vec![ser]).unwrap();
        let got = bracket_hdep(&xpow(&f, 2, 4), &lam_h, &[0]).unwrap();
        // hand expansion: sqrt(1+h) <exp(-lam h x^2/2) x^2>_{lam}
        //  = (1 + h/2 - h^2/8)(1/lam - (3/2) h / lam + (15/8) h^2 / lam)
        let inv = lamval.inv().unwrap();
        assert_eq!(got.coeff(0).constant_term(), inv);
        assert_eq!(got.coeff(2).constant_term(), inv.neg());
        assert!(got.coeff(1).is_zero());
    }

    #[test]
    fn schur_decoupled_blocks() {
        // B = 0: reduced form is C and only exp(F A^{-1} F^t h/2) appears
        let f = NumberField::rationals();
        let lam = QuadraticForm::new(
            IntMatrix::from_rows(&[vec![2, 0], vec![0, 5]]).unwrap().to_exact(&f),
        )
        .unwrap();
        let g = xpow(&f, 2, 4);
        let (red, rform) = schur_reduce(
            &[FieldElement::from_i64(&f, 3)],
            &g,
            &lam,
            1,
        )
        .unwrap();
        assert_eq!(*rform.matrix().at(0, 0), FieldElement::from_i64(&f, 5));
        // exp(9/(2*2) h) * x^2
        let expect = g
            .mul(
                &HbarSeries::hbar_term(&f, 1, 4, 2, FieldElement::from_ratio(&f, 9, 4))
                    .exp()
                    .unwrap(),
            )
            .unwrap();
        assert_eq!(red, expect);
    }

    #[test]
    fn schur_matches_full_bracket() {
        // <exp(F x' h^{1/2}) g(x'')>_{x, Lam} == bracket of the reduced pair
        let f = NumberField::rationals();
        let lam = QuadraticForm::new(
            IntMatrix::from_rows(&[vec![3, 1, 1], vec![1, 4, 0], vec![1, 0, 2]])
                .unwrap()
                .to_exact(&f),
        )
        .unwrap();
        let k = 5;
        let fvec = vec![FieldElement::from_i64(&f, 2)];
        // g(x'') in 2 variables
        let g = {
            let a = XPoly::monomial(&f, 2, 0, 2, FieldElement::one(&f)).unwrap();
            let b = XPoly::monomial(&f, 2, 1, 1, FieldElement::from_i64(&f, 3)).unwrap();
            HbarSeries::from_xpoly(a, 0, k)
                .add(&HbarSeries::from_xpoly(b, 1, k))
                .unwrap()
        };
        // full integrand exp(F x0 h^{1/2}) g(x1, x2) in 3 variables
        let full = {
            let lin = XPoly::monomial(&f, 3, 0, 1, FieldElement::from_i64(&f, 2)).unwrap();
            let e = HbarSeries::from_xpoly(lin, 1, k).exp().unwrap();
            e.mul(&g.embed(3, &[1, 2]).unwrap()).unwrap()
        };
        let lhs = bracket_all(&full, &lam).unwrap();
        let (red, rform) = schur_reduce(&fvec, &g, &lam, 1).unwrap();
        let rhs = bracket_all(&red, &rform).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn schur_form_for_fig8_lambda() {
        // Schur complement of [[z-1,-1],[-1,z-1]] over Q(zeta6) is 2z-1
        let f = NumberField::zeta6();
        let z = FieldElement::generator(&f);
        let zm1 = z.sub(&FieldElement::one(&f));
        let lam = QuadraticForm::new(
            ExactMatrix::new(
                2,
                2,
                vec![
                    zm1.clone(),
                    FieldElement::from_i64(&f, -1),
                    FieldElement::from_i64(&f, -1),
                    zm1,
                ],
            )
            .unwrap(),
        )
        .unwrap();
        let g = HbarSeries::one(&f, 1, 2);
        let (_, rform) = schur_reduce(&[FieldElement::zero(&f)], &g, &lam, 1).unwrap();
        let want = z.add(&z).sub(&FieldElement::one(&f));
        assert_eq!(*rform.matrix().at(0, 0), want);
    }

    #[test]
    fn half_odd_vanishing() {
        // full bracket of a parity-respecting integrand has no odd orders
        let f = NumberField::rationals();
        let lam = scalar_form(&f, 2, 1);
        let z = FieldElement::from_ratio(&f, 1, 3);
        let psi = crate::psi::psi_series(0, 1, &z, 9).unwrap();
        let b = bracket_all(&psi, &lam).unwrap();
        for (&j, p) in b.orders() {
            assert!(j % 2 == 0 || p.is_zero());
        }
    }

    #[test]
    fn series_matrix_inverse_roundtrip() {
        let f = NumberField::rationals();
        let k = 6;
        let one = HbarSeries::one(&f, 0, k);
        let h = HbarSeries::hbar_term(&f, 0, k, 2, FieldElement::one(&f));
        let two = HbarSeries::constant(&f, 0, k, FieldElement::from_i64(&f, 2));
        let m = ScalarSeriesMatrix::new(
            2,
            vec![
                two.add(&h).unwrap(),
                h.clone(),
                h.clone(),
                one.clone(),
            ],
        )
        .unwrap();
        let inv = m.inverse().unwrap();
        // m * inv should be the identity
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = HbarSeries::zero(&f, 0, k);
                for l in 0..2 {
                    acc = acc.add(&m.at(i, l).mul(inv.at(l, j)).unwrap()).unwrap();
                }
                if i == j {
                    assert_eq!(acc, one);
                } else {
                    assert!(acc.is_zero());
                }
            }
        }
    }
}
