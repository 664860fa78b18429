//! Truncated power series in hbar^{1/2} with sparse multivariate polynomial
//! coefficients over a number field.
//!
//! Exponents of hbar are stored as integers counting half-units: the key `j`
//! stands for hbar^{j/2}. Monomials are kept in a BTreeMap under graded-lex
//! order, which makes rendering and serialization byte-stable.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use serde_json::json;

use crate::exactfield::{FieldElement, NumberField};
use crate::{Error, Result};

/// Exponent vector under graded-lex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mono(pub Box<[u16]>);

impl Mono {
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    fn mul(&self, other: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial in the formal Gaussian variables.
#[derive(Debug, Clone, PartialEq)]
pub struct XPoly {
    nvars: usize,
    field: Arc<NumberField>,
    terms: BTreeMap<Mono, FieldElement>,
}

impl XPoly {
    pub fn zero(field: &Arc<NumberField>, nvars: usize) -> Self {
        XPoly { nvars, field: field.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(field: &Arc<NumberField>, nvars: usize, c: FieldElement) -> Self {
        let mut p = Self::zero(field, nvars);
        if !c.is_zero() {
            p.terms.insert(Mono(vec![0; nvars].into()), c);
        }
        p
    }

    /// The monomial c * x_var^e.
    pub fn monomial(
        field: &Arc<NumberField>,
        nvars: usize,
        var: usize,
        e: u16,
        c: FieldElement,
    ) -> Result<Self> {
        if var >= nvars {
            return Err(Error::VarOutOfRange(var, nvars));
        }
        let mut p = Self::zero(field, nvars);
        if !c.is_zero() {
            let mut m = vec![0u16; nvars];
            m[var] = e;
            p.terms.insert(Mono(m.into()), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &FieldElement)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn coefficient(&self, expts: &[u16]) -> FieldElement {
        self.terms
            .get(&Mono(expts.to_vec().into()))
            .cloned()
            .unwrap_or_else(|| FieldElement::zero(&self.field))
    }

    /// Constant coefficient (all exponents zero).
    pub fn constant_term(&self) -> FieldElement {
        self.coefficient(&vec![0; self.nvars])
    }

    pub fn add_term(&mut self, m: Mono, c: FieldElement) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                e.get_mut().add_assign_ref(&c);
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nvars != other.nvars {
            return Err(Error::VarMismatch(self.nvars, other.nvars));
        }
        let mut out = self.clone();
        out.add_assign_ref(other);
        Ok(out)
    }

    /// In-place merge; the workhorse behind series accumulation.
    pub fn add_assign_ref(&mut self, other: &Self) {
        debug_assert_eq!(self.nvars, other.nvars);
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn neg(&self) -> Self {
        XPoly {
            nvars: self.nvars,
            field: self.field.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect(),
        }
    }

    pub fn scale(&self, c: &FieldElement) -> Self {
        if c.is_zero() {
            return Self::zero(&self.field, self.nvars);
        }
        XPoly {
            nvars: self.nvars,
            field: self.field.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.clone(), v.mul(c)))
                .filter(|(_, v)| !v.is_zero())
                .collect(),
        }
    }

    /// Product, optionally discarding monomials of degree above `cap`.
    pub fn mul_capped(&self, other: &Self, cap: Option<u32>) -> Result<Self> {
        if self.nvars != other.nvars {
            return Err(Error::VarMismatch(self.nvars, other.nvars));
        }
        let mut out = Self::zero(&self.field, self.nvars);
        self.mul_acc(other, cap, &mut out);
        Ok(out)
    }

    /// out += self * other, with the optional degree cap.
    fn mul_acc(&self, other: &Self, cap: Option<u32>, out: &mut Self) {
        for (ma, ca) in &self.terms {
            let da = ma.degree();
            for (mb, cb) in &other.terms {
                if let Some(cap) = cap {
                    if da + mb.degree() > cap {
                        continue;
                    }
                }
                out.add_term(ma.mul(mb), ca.mul(cb));
            }
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.mul_capped(other, None)
    }

    /// Second partial derivative d^2/(dx_a dx_b) as used by the Gaussian
    /// contraction operator.
    pub fn dd(&self, a: usize, b: usize) -> Self {
        let mut out = Self::zero(&self.field, self.nvars);
        for (m, c) in &self.terms {
            let ea = m.0[a];
            if ea == 0 {
                continue;
            }
            let mut e2: Vec<u16> = m.0.to_vec();
            e2[a] -= 1;
            let eb = e2[b];
            if eb == 0 {
                continue;
            }
            e2[b] -= 1;
            let mult = BigRational::from_integer((ea as i64 * eb as i64).into());
            out.add_term(Mono(e2.into()), c.scale(&mult));
        }
        out
    }

    /// Keeps only monomials whose exponents vanish on `vars`.
    pub fn restrict_to_zero(&self, vars: &[usize]) -> Self {
        let mut out = Self::zero(&self.field, self.nvars);
        for (m, c) in &self.terms {
            if vars.iter().all(|&v| m.0[v] == 0) {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    /// Re-maps variables into a new space: old var i becomes `mapping[i]`.
    pub fn embed(&self, nvars_out: usize, mapping: &[usize]) -> Result<Self> {
        if mapping.len() != self.nvars || mapping.iter().any(|&v| v >= nvars_out) {
            return Err(Error::ShapeMismatch("bad variable mapping".into()));
        }
        let mut out = Self::zero(&self.field, nvars_out);
        for (m, c) in &self.terms {
            let mut e = vec![0u16; nvars_out];
            for (i, &ei) in m.0.iter().enumerate() {
                e[mapping[i]] += ei;
            }
            out.add_term(Mono(e.into()), c.clone());
        }
        Ok(out)
    }
}

/// Degree policy for series multiplication.
///
/// `PsiWeight` prunes any monomial of x-degree above 3j at half-order j;
/// every series assembled from psi factors and the integrand prefactors
/// satisfies that bound, so the pruning is lossless there and keeps
/// high-order runs tight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeCap {
    #[default]
    None,
    PsiWeight,
}

impl DegreeCap {
    fn cap(self, j: u32) -> Option<u32> {
        match self {
            DegreeCap::None => None,
            DegreeCap::PsiWeight => Some(3 * j),
        }
    }
}

/// Truncated series in hbar^{1/2}: coefficient of hbar^{j/2} for 0 <= j <= K.
#[derive(Debug, Clone, PartialEq)]
pub struct HbarSeries {
    cutoff: u32,
    nvars: usize,
    field: Arc<NumberField>,
    coeffs: BTreeMap<u32, XPoly>,
}

impl HbarSeries {
    pub fn zero(field: &Arc<NumberField>, nvars: usize, cutoff: u32) -> Self {
        HbarSeries { cutoff, nvars, field: field.clone(), coeffs: BTreeMap::new() }
    }

    pub fn one(field: &Arc<NumberField>, nvars: usize, cutoff: u32) -> Self {
        let mut s = Self::zero(field, nvars, cutoff);
        s.set_coeff(0, XPoly::constant(field, nvars, FieldElement::one(field)));
        s
    }

    pub fn constant(field: &Arc<NumberField>, nvars: usize, cutoff: u32, c: FieldElement) -> Self {
        let mut s = Self::zero(field, nvars, cutoff);
        s.set_coeff(0, XPoly::constant(field, nvars, c));
        s
    }

    /// The series c * hbar^{j/2}.
    pub fn hbar_term(
        field: &Arc<NumberField>,
        nvars: usize,
        cutoff: u32,
        j: u32,
        c: FieldElement,
    ) -> Self {
        let mut s = Self::zero(field, nvars, cutoff);
        if j <= cutoff {
            s.set_coeff(j, XPoly::constant(field, nvars, c));
        }
        s
    }

    /// The series p * hbar^{j/2}.
    pub fn from_xpoly(p: XPoly, j: u32, cutoff: u32) -> Self {
        let mut s = Self::zero(p.field(), p.nvars(), cutoff);
        if j <= cutoff {
            s.set_coeff(j, p);
        }
        s
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn coeff(&self, j: u32) -> XPoly {
        self.coeffs
            .get(&j)
            .cloned()
            .unwrap_or_else(|| XPoly::zero(&self.field, self.nvars))
    }

    pub fn coeff_ref(&self, j: u32) -> Option<&XPoly> {
        self.coeffs.get(&j)
    }

    pub fn orders(&self) -> impl Iterator<Item = (&u32, &XPoly)> {
        self.coeffs.iter()
    }

    pub fn set_coeff(&mut self, j: u32, p: XPoly) {
        if j > self.cutoff || p.is_zero() {
            self.coeffs.remove(&j);
        } else {
            self.coeffs.insert(j, p);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn min_order(&self) -> Option<u32> {
        self.coeffs.keys().next().copied()
    }

    /// True when the hbar^0 coefficient is the constant polynomial 1 and is
    /// the only obstruction to inversion/log/sqrt.
    pub fn has_unit_constant(&self) -> bool {
        match self.coeffs.get(&0) {
            Some(p) => {
                p.num_terms() == 1 && {
                    let c = p.constant_term();
                    c.is_one()
                }
            }
            None => false,
        }
    }

    pub fn truncate(&self, cutoff: u32) -> Self {
        let mut out = Self::zero(&self.field, self.nvars, cutoff);
        for (&j, p) in &self.coeffs {
            if j <= cutoff {
                out.coeffs.insert(j, p.clone());
            }
        }
        out
    }

    fn check_compat(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VarMismatch(self.nvars, other.nvars));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compat(other)?;
        let cutoff = self.cutoff.min(other.cutoff);
        let mut out = self.truncate(cutoff);
        out.add_assign_ref(other);
        Ok(out)
    }

    /// In-place accumulation (respecting this series' own cutoff).
    pub fn add_assign_ref(&mut self, other: &Self) {
        debug_assert_eq!(self.nvars, other.nvars);
        for (&j, p) in &other.coeffs {
            if j > self.cutoff {
                continue;
            }
            match self.coeffs.entry(j) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    if !p.is_zero() {
                        e.insert(p.clone());
                    }
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    e.get_mut().add_assign_ref(p);
                    if e.get().is_zero() {
                        e.remove();
                    }
                }
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        HbarSeries {
            cutoff: self.cutoff,
            nvars: self.nvars,
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|(&j, p)| (j, p.neg())).collect(),
        }
    }

    pub fn scale(&self, c: &FieldElement) -> Self {
        let mut out = Self::zero(&self.field, self.nvars, self.cutoff);
        for (&j, p) in &self.coeffs {
            out.set_coeff(j, p.scale(c));
        }
        out
    }

    pub fn scale_q(&self, q: &BigRational) -> Self {
        self.scale(&FieldElement::from_rational(&self.field, q.clone()))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.mul_capped(other, DegreeCap::None)
    }

    pub fn mul_capped(&self, other: &Self, cap: DegreeCap) -> Result<Self> {
        self.check_compat(other)?;
        let cutoff = self.cutoff.min(other.cutoff);
        let mut out = Self::zero(&self.field, self.nvars, cutoff);
        for (&j1, p1) in &self.coeffs {
            if j1 > cutoff {
                continue;
            }
            for (&j2, p2) in &other.coeffs {
                let j = j1 + j2;
                if j > cutoff {
                    break;
                }
                let acc = out
                    .coeffs
                    .entry(j)
                    .or_insert_with(|| XPoly::zero(&self.field, self.nvars));
                p1.mul_acc(p2, cap.cap(j), acc);
            }
        }
        out.coeffs.retain(|_, p| !p.is_zero());
        Ok(out)
    }

    /// exp of a series with no hbar^0 term.
    pub fn exp(&self) -> Result<Self> {
        self.exp_capped(DegreeCap::None)
    }

    pub fn exp_capped(&self, cap: DegreeCap) -> Result<Self> {
        if self.coeffs.contains_key(&0) {
            return Err(Error::NonzeroConstantTerm);
        }
        let mut acc = Self::one(&self.field, self.nvars, self.cutoff);
        let mut term = acc.clone();
        let mut m: u64 = 0;
        loop {
            m += 1;
            term = term.mul_capped(self, cap)?;
            term = term.scale_q(&BigRational::new(1.into(), m.into()));
            if term.is_zero() {
                break;
            }
            acc.add_assign_ref(&term);
        }
        Ok(acc)
    }

    /// log of a series with constant term 1 (Mercator series).
    pub fn log(&self) -> Result<Self> {
        if !self.has_unit_constant() {
            return Err(Error::UnitConstantRequired);
        }
        let mut u = self.clone();
        u.coeffs.remove(&0);
        let mut acc = Self::zero(&self.field, self.nvars, self.cutoff);
        let mut pw = Self::one(&self.field, self.nvars, self.cutoff);
        let mut m: u64 = 0;
        loop {
            m += 1;
            pw = pw.mul(&u)?;
            if pw.is_zero() {
                break;
            }
            let sign = if m % 2 == 1 { 1 } else { -1 };
            acc.add_assign_ref(&pw.scale_q(&BigRational::new(sign.into(), m.into())));
        }
        Ok(acc)
    }

    /// sqrt of a series with constant term 1, via exp(log(s)/2).
    pub fn sqrt(&self) -> Result<Self> {
        let half = BigRational::new(1.into(), 2.into());
        self.log()?.scale_q(&half).exp()
    }

    /// Inverse of a series with constant term 1 (geometric series).
    pub fn inv_unit(&self) -> Result<Self> {
        if !self.has_unit_constant() {
            return Err(Error::UnitConstantRequired);
        }
        let mut u = self.clone();
        u.coeffs.remove(&0);
        let mut acc = Self::one(&self.field, self.nvars, self.cutoff);
        let mut pw = Self::one(&self.field, self.nvars, self.cutoff);
        let mut m: u64 = 0;
        loop {
            m += 1;
            pw = pw.mul(&u)?;
            if pw.is_zero() {
                break;
            }
            let sign = if m % 2 == 1 { -1 } else { 1 };
            acc.add_assign_ref(&pw.scale_q(&BigRational::from_integer(sign.into())));
        }
        Ok(acc)
    }

    /// Substitutes x_i -> images[i]; images live in a common target space and
    /// may carry explicit hbar^{1/2} factors. Re-truncates to the minimum of
    /// all cutoffs.
    pub fn substitute(&self, images: &[HbarSeries]) -> Result<Self> {
        if images.len() != self.nvars {
            return Err(Error::ShapeMismatch(format!(
                "{} images for {} variables",
                images.len(),
                self.nvars
            )));
        }
        let nvars_out = images.first().map(|s| s.nvars).unwrap_or(0);
        let mut cutoff = self.cutoff;
        for im in images {
            if im.nvars != nvars_out {
                return Err(Error::VarMismatch(im.nvars, nvars_out));
            }
            cutoff = cutoff.min(im.cutoff);
        }
        // power cache per variable
        let mut powers: Vec<Vec<HbarSeries>> = images
            .iter()
            .map(|im| vec![Self::one(&im.field, nvars_out, cutoff), im.truncate(cutoff)])
            .collect();
        let mut out = Self::zero(&self.field, nvars_out, cutoff);
        for (&j, p) in &self.coeffs {
            if j > cutoff {
                continue;
            }
            for (m, c) in p.terms() {
                let mut term = Self::hbar_term(&self.field, nvars_out, cutoff, j, c.clone());
                for (i, &e) in m.0.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    while powers[i].len() <= e as usize {
                        let next = powers[i].last().unwrap().mul(&powers[i][1])?;
                        powers[i].push(next);
                    }
                    term = term.mul(&powers[i][e as usize])?;
                }
                out.add_assign_ref(&term);
            }
        }
        Ok(out)
    }

    /// Re-maps the x-variables into a larger space.
    pub fn embed(&self, nvars_out: usize, mapping: &[usize]) -> Result<Self> {
        let mut out = Self::zero(&self.field, nvars_out, self.cutoff);
        for (&j, p) in &self.coeffs {
            out.set_coeff(j, p.embed(nvars_out, mapping)?);
        }
        Ok(out)
    }

    /// Sets every listed variable to zero.
    pub fn eval_zero(&self, vars: &[usize]) -> Self {
        let mut out = Self::zero(&self.field, self.nvars, self.cutoff);
        for (&j, p) in &self.coeffs {
            out.set_coeff(j, p.restrict_to_zero(vars));
        }
        out
    }

    /// Checks the psi-weight contract: every monomial x^a at half-order j
    /// has |a| <= 3j and |a| == j (mod 2).
    pub fn respects_psi_weight(&self) -> bool {
        self.coeffs.iter().all(|(&j, p)| {
            p.terms()
                .all(|(m, _)| m.degree() <= 3 * j && (m.degree() % 2) == (j % 2))
        })
    }

    /// Canonical JSON rendering: [{"j": j, "monomials": [{"exp": [...], "coeff": "..."}]}].
    pub fn to_json(&self) -> serde_json::Value {
        let orders: Vec<serde_json::Value> = self
            .coeffs
            .iter()
            .map(|(&j, p)| {
                let monomials: Vec<serde_json::Value> = p
                    .terms()
                    .map(|(m, c)| {
                        json!({
                            "exp": m.0.iter().map(|&e| e as u64).collect::<Vec<_>>(),
                            "coeff": c.to_string(),
                        })
                    })
                    .collect();
                json!({ "j": j, "monomials": monomials })
            })
            .collect();
        serde_json::Value::Array(orders)
    }
}

impl fmt::Display for HbarSeries {
    /// Renders "c * x1^a x2^b * h^(j/2)" terms in canonical order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&j, p) in &self.coeffs {
            for (m, c) in p.terms() {
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                let cs = c.to_string();
                if cs.contains(' ') {
                    write!(f, "({})", cs)?;
                } else {
                    write!(f, "{}", cs)?;
                }
                for (i, &e) in m.0.iter().enumerate() {
                    if e == 1 {
                        write!(f, " * x{}", i + 1)?;
                    } else if e > 1 {
                        write!(f, " * x{}^{}", i + 1, e)?;
                    }
                }
                if j == 2 {
                    write!(f, " * h")?;
                } else if j % 2 == 0 && j > 0 {
                    write!(f, " * h^{}", j / 2)?;
                } else if j > 0 {
                    write!(f, " * h^({}/2)", j)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactfield::NumberField;

    fn x_half(field: &Arc<NumberField>, k: u32) -> HbarSeries {
        // hbar^{1/2} x
        let p = XPoly::monomial(field, 1, 0, 1, FieldElement::one(field)).unwrap();
        HbarSeries::from_xpoly(p, 1, k)
    }

    #[test]
    fn product_truncates() {
        let f = NumberField::rationals();
        let one = HbarSeries::one(&f, 1, 2);
        let a = one.add(&x_half(&f, 2)).unwrap();
        let b = one.sub(&x_half(&f, 2)).unwrap();
        let prod = a.mul(&b).unwrap();
        // 1 - hbar x^2
        let mut want = HbarSeries::one(&f, 1, 2);
        let x2 = XPoly::monomial(&f, 1, 0, 2, FieldElement::from_i64(&f, -1)).unwrap();
        want.set_coeff(2, x2);
        assert_eq!(prod, want);
    }

    #[test]
    fn cube_of_half_order_term_vanishes_at_k2() {
        let f = NumberField::rationals();
        let x = x_half(&f, 2);
        let p = x.mul(&x).unwrap().mul(&x).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn add_zero_is_identity() {
        let f = NumberField::rationals();
        let a = x_half(&f, 4);
        let z = HbarSeries::zero(&f, 1, 4);
        assert_eq!(a.add(&z).unwrap(), a);
    }

    #[test]
    fn exp_of_c_hbar() {
        // exp(c hbar) at K=4 -> 1 + c hbar + c^2 hbar^2 / 2
        let f = NumberField::rationals();
        let c = FieldElement::from_ratio(&f, 3, 7);
        let s = HbarSeries::hbar_term(&f, 0, 4, 2, c.clone());
        let e = s.exp().unwrap();
        assert_eq!(e.coeff(0).constant_term(), FieldElement::one(&f));
        assert_eq!(e.coeff(2).constant_term(), c);
        let half_c2 = c.mul(&c).scale(&BigRational::new(1.into(), 2.into()));
        assert_eq!(e.coeff(4).constant_term(), half_c2);
        assert!(e.coeff(1).is_zero() && e.coeff(3).is_zero());
    }

    #[test]
    fn exp_inverse_pair() {
        let f = NumberField::rationals();
        let a = x_half(&f, 6).scale(&FieldElement::from_ratio(&f, 2, 3));
        let prod = a.exp().unwrap().mul(&a.neg().exp().unwrap()).unwrap();
        assert_eq!(prod, HbarSeries::one(&f, 1, 6));
    }

    #[test]
    fn exp_rejects_constant_term() {
        let f = NumberField::rationals();
        let s = HbarSeries::one(&f, 1, 4);
        assert!(matches!(s.exp(), Err(Error::NonzeroConstantTerm)));
    }

    #[test]
    fn sqrt_of_one_plus_two_hbar() {
        // sqrt(1 + 2 hbar) at K=4 -> 1 + hbar - hbar^2/2
        let f = NumberField::rationals();
        let mut s = HbarSeries::one(&f, 0, 4);
        s.set_coeff(2, XPoly::constant(&f, 0, FieldElement::from_i64(&f, 2)));
        let r = s.sqrt().unwrap();
        assert_eq!(r.coeff(2).constant_term(), FieldElement::one(&f));
        assert_eq!(r.coeff(4).constant_term(), FieldElement::from_ratio(&f, -1, 2));
        assert_eq!(r.mul(&r).unwrap(), s);
    }

    #[test]
    fn log_exp_roundtrip() {
        let f = NumberField::rationals();
        let a = x_half(&f, 8);
        assert_eq!(a.exp().unwrap().log().unwrap(), a);
    }

    #[test]
    fn substitution_is_linear_on_x() {
        // (hbar^{1/2} x) under x -> x + y gives hbar^{1/2}(x + y)
        let f = NumberField::rationals();
        let s = x_half(&f, 4);
        let im_x = {
            let px = XPoly::monomial(&f, 2, 0, 1, FieldElement::one(&f)).unwrap();
            let py = XPoly::monomial(&f, 2, 1, 1, FieldElement::one(&f)).unwrap();
            HbarSeries::from_xpoly(px.add(&py).unwrap(), 0, 4)
        };
        let got = s.substitute(&[im_x]).unwrap();
        let wx = XPoly::monomial(&f, 2, 0, 1, FieldElement::one(&f)).unwrap();
        let wy = XPoly::monomial(&f, 2, 1, 1, FieldElement::one(&f)).unwrap();
        let want = HbarSeries::from_xpoly(wx.add(&wy).unwrap(), 1, 4);
        assert_eq!(got, want);
    }

    #[test]
    fn truncation_coherence() {
        let f = NumberField::rationals();
        let one = HbarSeries::one(&f, 1, 8);
        let a = one.add(&x_half(&f, 8)).unwrap();
        let b = a.mul(&a).unwrap().exp_capped(DegreeCap::None);
        // exp needs no constant term; use log-free check: multiply twice more
        let b = b.unwrap_or_else(|_| a.clone());
        let full = b.mul(&a).unwrap();
        assert_eq!(full.truncate(4), b.truncate(4).mul(&a.truncate(4)).unwrap());
    }

    #[test]
    fn display_is_canonical() {
        let f = NumberField::rationals();
        let one = HbarSeries::one(&f, 2, 4);
        let px = XPoly::monomial(&f, 2, 0, 1, FieldElement::from_i64(&f, 3)).unwrap();
        let s = one.add(&HbarSeries::from_xpoly(px, 1, 4)).unwrap();
        assert_eq!(s.to_string(), "1 + 3 * x1 * h^(1/2)");
    }
}
