//! Elementary, quad and Pachner moves on NZ data, and the Phi-invariance
//! comparator that classifies the ratio of two Phi series.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::exactfield::{smith_solve, FieldElement, IntMatrix, NumberField};
use crate::nzdata::{apply_quad, find_nondegenerate_quad, permute_columns, NZDatum, QuadChoice};
use crate::phi::phi_series;
use crate::psi::PsiCache;
use crate::{Error, Result};

/// Outcome of comparing Phi before/after a move.
#[derive(Debug, Clone, PartialEq)]
pub enum MoveReport {
    /// the two series agree coefficient-wise at the cutoff
    ExactEqual,
    /// log(Phi2/Phi1) = c hbar exactly, with 24c an integer
    ExpFactor { c: BigRational },
    /// first differing half-power with both coefficients rendered
    Mismatch { j: u32, lhs: String, rhs: String },
}

impl MoveReport {
    pub fn is_invariant(&self) -> bool {
        !matches!(self, MoveReport::Mismatch { .. })
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            MoveReport::ExactEqual => json!({ "status": "exact-equal" }),
            MoveReport::ExpFactor { c } => json!({ "status": "exp-factor", "c": c.to_string() }),
            MoveReport::Mismatch { j, lhs, rhs } => json!({
                "status": "mismatch",
                "first_diff": { "j": j, "lhs": lhs, "rhs": rhs },
            }),
        }
    }
}

/// Tetrahedron reordering: columns of A, B and the entries of z, f, f''
/// permuted together. Phi is unchanged exactly.
pub fn reorder_move(nz: &NZDatum, perm: &[usize]) -> Result<NZDatum> {
    permute_columns(nz, perm)
}

/// Row operation by P in GL_N(Z): (PA, PB, P nu, z, f, f''). Phi is unchanged
/// exactly since the integrand and Lambda only see B^{-1}A and B^{-1}nu.
pub fn rowop_move(nz: &NZDatum, p: &IntMatrix) -> Result<NZDatum> {
    let n = nz.size();
    if p.rows() != n || p.cols() != n {
        return Err(Error::ShapeMismatch("P must be N x N".into()));
    }
    let det = p.det_big()?;
    if det.abs() != BigInt::one() {
        return Err(Error::NotUnimodular(det.to_string()));
    }
    let a = p.mul(&nz.a)?;
    let b = p.mul(&nz.b)?;
    let nu = p.mul_vec(&nz.nu)?;
    NZDatum::new(a, b, nu, nz.z.clone(), nz.f.clone(), nz.fpp.clone())
}

/// Replaces the flattening; the comparator must report an exp-factor with
/// c in (1/8)Z.
pub fn change_flattening(nz: &NZDatum, f: Vec<i64>, fpp: Vec<i64>) -> Result<NZDatum> {
    let af = nz.a.mul_vec(&f)?;
    let bf = nz.b.mul_vec(&fpp)?;
    if af.iter().zip(&bf).zip(&nz.nu).any(|((x, y), v)| x + y != *v) {
        return Err(Error::FlatteningViolated);
    }
    NZDatum::new(nz.a.clone(), nz.b.clone(), nz.nu.clone(), nz.z.clone(), f, fpp)
}

/// 2-3 Pachner move on columns (i, j): reorders them to the front, then
/// builds the (N+1)-column datum with
///   A~ = [[-1, 0], [a1+a2-b1-b2, a1-b2 | a2-b1 | a*]],
///   B~ = [[-1, 1, 1, 0], [0, b1 | b2 | b*]],
///   nu~ = (1, nu), z~ = (z0, z_i/z0, z_j/z0, z*), z0 = z_i + z_j - z_i z_j.
/// The flattening is transported as f~ = (0, f_i, f_j, f*) with f~'' solved
/// over the integers.
pub fn pachner_23(nz: &NZDatum, i: usize, j: usize) -> Result<NZDatum> {
    let n = nz.size();
    if i >= n || j >= n || i == j {
        return Err(Error::BadPermutation);
    }
    // bring columns (i, j) to the front, preserving the rest in order
    let mut perm = vec![i, j];
    perm.extend((0..n).filter(|&c| c != i && c != j));
    let nz = permute_columns(nz, &perm)?;

    let field = nz.field().clone();
    let one = FieldElement::one(&field);
    let z1 = &nz.z[0];
    let z2 = &nz.z[1];
    let z0 = z1.add(z2).sub(&z1.mul(z2));
    if z0.is_zero() || z0 == one {
        return Err(Error::DegeneratePachner);
    }
    let z0inv = z0.inv()?;
    let mut z = vec![z0.clone(), z1.mul(&z0inv), z2.mul(&z0inv)];
    z.extend(nz.z[2..].iter().cloned());
    // the new shapes must stay away from {0, 1}
    for w in &z {
        if w.is_zero() || *w == one {
            return Err(Error::DegeneratePachner);
        }
    }

    let m = n + 1;
    let mut a = IntMatrix::zeros(m, m);
    let mut b = IntMatrix::zeros(m, m);
    a.set(0, 0, -1);
    b.set(0, 0, -1);
    b.set(0, 1, 1);
    b.set(0, 2, 1);
    for r in 0..n {
        let (a1, a2) = (nz.a.at(r, 0), nz.a.at(r, 1));
        let (b1, b2) = (nz.b.at(r, 0), nz.b.at(r, 1));
        a.set(r + 1, 0, a1 + a2 - b1 - b2);
        a.set(r + 1, 1, a1 - b2);
        a.set(r + 1, 2, a2 - b1);
        b.set(r + 1, 1, b1);
        b.set(r + 1, 2, b2);
        for c in 2..n {
            a.set(r + 1, c + 1, nz.a.at(r, c));
            b.set(r + 1, c + 1, nz.b.at(r, c));
        }
    }
    let mut nu = vec![1i64];
    nu.extend(nz.nu.iter().copied());

    let mut f = vec![0i64, nz.f[0], nz.f[1]];
    f.extend(nz.f[2..].iter().copied());
    // solve B~ f'' = nu~ - A~ f over Z; fall back to a full repair
    let af = a.mul_vec(&f)?;
    let rhs: Vec<i64> = nu.iter().zip(&af).map(|(v, x)| v - x).collect();
    let fpp = match smith_solve(&b, &rhs) {
        Some(s) => s,
        None => {
            let ab = a.hcat(&b)?;
            let sol = smith_solve(&ab, &nu).ok_or(Error::NoIntegerFlattening)?;
            let (fs, fps) = sol.split_at(m);
            f = fs.to_vec();
            fps.to_vec()
        }
    };
    NZDatum::new(a, b, nu, z, f, fpp)
}

/// Inverse of [`pachner_23`]. The distinguished column plays z0; the datum
/// must match the 2-3 image pattern after moving that column first and
/// locating the added-edge row (the unique row with a nonzero first B entry).
pub fn pachner_32(nz: &NZDatum, distinguished: usize) -> Result<NZDatum> {
    let m = nz.size();
    if m < 3 {
        return Err(Error::NotPachnerImage("need at least 3 tetrahedra".into()));
    }
    if distinguished >= m {
        return Err(Error::BadPermutation);
    }
    // distinguished column first; the two merged tetrahedra must sit right
    // after it (callers reorder beforehand when they do not)
    let mut perm = vec![distinguished];
    perm.extend((0..m).filter(|&c| c != distinguished));
    let nz = permute_columns(&nz.clone(), &perm)?;

    // locate the added-edge row: B column 0 vanishes except in one row
    let rows_with_b0: Vec<usize> = (0..m).filter(|&r| nz.b.at(r, 0) != 0).collect();
    if rows_with_b0.len() != 1 {
        return Err(Error::NotPachnerImage(format!(
            "column 0 of B has {} nonzero rows, expected exactly 1",
            rows_with_b0.len()
        )));
    }
    let r0 = rows_with_b0[0];
    if nz.b.at(r0, 0) != -1 || nz.a.at(r0, 0) != -1 || nz.nu[r0] != 1 {
        return Err(Error::NotPachnerImage(
            "added-edge row must read A = -1, B = -1 with nu = 1".into(),
        ));
    }
    if nz.b.at(r0, 1) != 1 || nz.b.at(r0, 2) != 1 {
        return Err(Error::NotPachnerImage(
            "added-edge row must pair the two new columns with B entries (1, 1)".into(),
        ));
    }
    for c in 1..m {
        if nz.a.at(r0, c) != 0 {
            return Err(Error::NotPachnerImage("added-edge row of A must vanish beyond column 0".into()));
        }
        if c >= 3 && nz.b.at(r0, c) != 0 {
            return Err(Error::NotPachnerImage("added-edge row of B must vanish beyond column 2".into()));
        }
    }

    // shapes: z1 = z0 z~1, z2 = z0 z~2; z0 must satisfy the pentagon relation
    let field = nz.field().clone();
    let one = FieldElement::one(&field);
    let z0 = &nz.z[0];
    let z1 = z0.mul(&nz.z[1]);
    let z2 = z0.mul(&nz.z[2]);
    let back = z1.add(&z2).sub(&z1.mul(&z2));
    if back != *z0 {
        return Err(Error::NotPachnerImage(
            "shapes do not satisfy z0 = z1 + z2 - z1 z2".into(),
        ));
    }
    if z1.is_zero() || z1 == one || z2.is_zero() || z2 == one {
        return Err(Error::DegeneratePachner);
    }

    let n = m - 1;
    let mut a = IntMatrix::zeros(n, n);
    let mut b = IntMatrix::zeros(n, n);
    let mut nu = Vec::with_capacity(n);
    let mut out_r = 0;
    for r in 0..m {
        if r == r0 {
            continue;
        }
        let b1 = nz.b.at(r, 1);
        let b2 = nz.b.at(r, 2);
        let a1 = nz.a.at(r, 1) + b2;
        let a2 = nz.a.at(r, 2) + b1;
        // the first A~ column must equal a1 + a2 - b1 - b2
        if nz.a.at(r, 0) != a1 + a2 - b1 - b2 {
            return Err(Error::NotPachnerImage(format!(
                "row {}: A column 0 does not match a1 + a2 - b1 - b2",
                r
            )));
        }
        a.set(out_r, 0, a1);
        a.set(out_r, 1, a2);
        b.set(out_r, 0, b1);
        b.set(out_r, 1, b2);
        for c in 3..m {
            a.set(out_r, c - 1, nz.a.at(r, c));
            b.set(out_r, c - 1, nz.b.at(r, c));
        }
        nu.push(nz.nu[r]);
        out_r += 1;
    }
    let mut z = vec![z1, z2];
    z.extend(nz.z[3..].iter().cloned());

    // flattening: f = (f~0 + f~1, f~0 + f~2, f~*), f'' solved over Z
    let mut f = vec![nz.f[0] + nz.f[1], nz.f[0] + nz.f[2]];
    f.extend(nz.f[3..].iter().copied());
    let af = a.mul_vec(&f)?;
    let rhs: Vec<i64> = nu.iter().zip(&af).map(|(v, x)| v - x).collect();
    let fpp = match smith_solve(&b, &rhs) {
        Some(s) => s,
        None => {
            let ab = a.hcat(&b)?;
            let sol = smith_solve(&ab, &nu).ok_or(Error::NoIntegerFlattening)?;
            let (fs, fps) = sol.split_at(n);
            f = fs.to_vec();
            fps.to_vec()
        }
    };
    NZDatum::new(a, b, nu, z, f, fpp)
}

/// Computes both Phi series (after independent nondegenerate quad searches),
/// takes log(Phi2/Phi1) and classifies the discrepancy.
pub fn compare_phi(nz1: &NZDatum, nz2: &NZDatum, cutoff: u32) -> Result<MoveReport> {
    let cache = PsiCache::new();
    compare_phi_cached(nz1, nz2, cutoff, &cache)
}

pub fn compare_phi_cached(
    nz1: &NZDatum,
    nz2: &NZDatum,
    cutoff: u32,
    cache: &PsiCache,
) -> Result<MoveReport> {
    let phi = |nz: &NZDatum| -> Result<crate::phi::PhiResult> {
        let q = find_nondegenerate_quad(nz)?;
        let fixed = if q.is_identity() { nz.clone() } else { apply_quad(nz, &q)? };
        phi_series(&fixed, cutoff, cache)
    };
    let p1 = phi(nz1)?;
    let p2 = phi(nz2)?;
    classify_ratio(&p1.series, &p2.series)
}

/// log(Phi2/Phi1): zero means exact equality; c hbar with 24c in Z is the
/// allowed move defect; anything else is a mismatch at its lowest order.
pub fn classify_ratio(
    phi1: &crate::series::HbarSeries,
    phi2: &crate::series::HbarSeries,
) -> Result<MoveReport> {
    let ratio = phi2.mul(&phi1.inv_unit()?)?;
    let log = ratio.log()?;
    if log.is_zero() {
        return Ok(MoveReport::ExactEqual);
    }
    let offenders: Vec<u32> = log
        .orders()
        .filter(|(_, p)| !p.is_zero())
        .map(|(&j, _)| j)
        .collect();
    if offenders == vec![2] {
        let c = log.coeff(2).constant_term();
        if let Some(q) = c.as_rational() {
            let scaled = q * BigRational::from_integer(24.into());
            if scaled.denom().is_one() {
                return Ok(MoveReport::ExpFactor { c: q.clone() });
            }
        }
    }
    let j = offenders[0];
    Ok(MoveReport::Mismatch {
        j,
        lhs: phi1.coeff(j).constant_term().to_string(),
        rhs: phi2.coeff(j).constant_term().to_string(),
    })
}

/// Deterministic synthetic half-symplectic datum generator.
///
/// Starts from (A, B) = (S, I) with S symmetric and `nullity` chosen columns
/// of S zeroed, then rotates those columns into the (2) quad class, giving a
/// B of the requested nullity while keeping (A|B) half-symplectic. Shapes are
/// drawn from a small-height rational pool, resampled until Lambda is
/// nondegenerate for some quad.
pub fn synthetic_datum(seed: u64, n: usize, nullity: usize) -> Result<NZDatum> {
    assert!(nullity <= n, "nullity cannot exceed N");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = NumberField::rationals();
    let pool: &[(i64, i64)] = &[
        (2, 1),
        (3, 1),
        (1, 2),
        (-1, 1),
        (1, 3),
        (2, 3),
        (-2, 1),
        (3, 2),
        (5, 1),
        (1, 5),
        (-1, 2),
        (-3, 1),
        (4, 1),
        (1, 4),
        (3, 4),
        (5, 2),
    ];
    for _attempt in 0..64 {
        // symmetric S with the first `nullity` random columns zeroed
        let mut s = IntMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-2..=2i64);
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        let mut cols: Vec<usize> = (0..n).collect();
        for i in (1..cols.len()).rev() {
            let j = rng.gen_range(0..=i);
            cols.swap(i, j);
        }
        let zeroed: Vec<usize> = cols.into_iter().take(nullity).collect();
        for &c in &zeroed {
            for i in 0..n {
                s.set(i, c, 0);
                s.set(c, i, 0);
            }
        }
        let z: Vec<FieldElement> = (0..n)
            .map(|_| {
                let (p, q) = pool[rng.gen_range(0..pool.len())];
                FieldElement::from_ratio(&field, p, q)
            })
            .collect();
        let nu: Vec<i64> = (0..n).map(|_| rng.gen_range(-2..=2i64)).collect();
        // (A, B) = (S, I) always half-symplectic; flattening f = 0, f'' = nu
        let base = match NZDatum::new(
            s,
            IntMatrix::identity(n),
            nu.clone(),
            z,
            vec![0; n],
            nu,
        ) {
            Ok(d) => d,
            Err(_) => continue,
        };
        // rotate the zeroed columns into the (2) class: their B columns vanish
        let mut q = vec![0u8; n];
        for &c in &zeroed {
            q[c] = 2;
        }
        let rotated = match apply_quad(&base, &QuadChoice(q)) {
            Ok(d) => d,
            Err(_) => continue,
        };
        // keep only instances that a quad search can make nondegenerate
        if find_nondegenerate_quad(&rotated).is_ok() {
            let got_nullity = {
                let rank = rotated
                    .b
                    .to_exact(&field)
                    .rank();
                n - rank
            };
            if got_nullity == nullity {
                return Ok(rotated);
            }
        }
    }
    Err(Error::InvalidDatum(format!(
        "no synthetic datum for seed {} n {} nullity {}",
        seed, n, nullity
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nzdata::{check_symplectic, NZDatum};

    #[test]
    fn reorder_identity() {
        let nz = NZDatum::fig8();
        assert_eq!(reorder_move(&nz, &[0, 1]).unwrap(), nz);
    }

    #[test]
    fn rowop_rejects_non_unimodular() {
        let nz = NZDatum::fig8();
        let p = IntMatrix::from_rows(&[vec![2, 0], vec![0, 1]]).unwrap();
        assert!(matches!(rowop_move(&nz, &p), Err(Error::NotUnimodular(_))));
    }

    #[test]
    fn rowop_identity_is_identity() {
        let nz = NZDatum::fig8();
        assert_eq!(rowop_move(&nz, &IntMatrix::identity(2)).unwrap(), nz);
    }

    #[test]
    fn change_flattening_validates() {
        let nz = NZDatum::fig8();
        assert!(matches!(
            change_flattening(&nz, vec![1, 1], vec![0, 0]),
            Err(Error::FlatteningViolated)
        ));
        let same = change_flattening(&nz, nz.f.clone(), nz.fpp.clone()).unwrap();
        assert_eq!(same, nz);
    }

    #[test]
    fn pachner_23_fig8_shapes_and_matrices() {
        let nz = NZDatum::fig8();
        let out = pachner_23(&nz, 0, 1).unwrap();
        let field = out.field().clone();
        let zeta = FieldElement::generator(&field);
        let one = FieldElement::one(&field);
        let z0 = zeta.add(&one);
        assert_eq!(out.z[0], z0);
        let w = zeta.mul(&z0.inv().unwrap());
        assert_eq!(out.z[1], w);
        assert_eq!(out.z[2], w);
        assert_eq!(out.nu, vec![1, 2, 1]);
        assert_eq!(
            out.b,
            IntMatrix::from_rows(&[vec![-1, 1, 1], vec![0, 1, 1], vec![0, 1, 0]]).unwrap()
        );
        assert_eq!(
            out.a,
            IntMatrix::from_rows(&[vec![-1, 0, 0], vec![2, 1, 1], vec![1, 1, 0]]).unwrap()
        );
    }

    #[test]
    fn pachner_23_degenerate_shapes() {
        let field = NumberField::rationals();
        let two = FieldElement::from_i64(&field, 2);
        let nz = NZDatum::new(
            IntMatrix::from_rows(&[vec![2, 2], vec![1, 1]]).unwrap(),
            IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap(),
            vec![2, 1],
            vec![two.clone(), two],
            vec![0, 1],
            vec![0, 0],
        )
        .unwrap();
        // z0 = 2 + 2 - 4 = 0
        assert!(matches!(pachner_23(&nz, 0, 1), Err(Error::DegeneratePachner)));
    }

    #[test]
    fn pachner_roundtrip_recovers_fig8() {
        let nz = NZDatum::fig8();
        let up = pachner_23(&nz, 0, 1).unwrap();
        let down = pachner_32(&up, 0).unwrap();
        assert_eq!(down.a, nz.a);
        assert_eq!(down.b, nz.b);
        assert_eq!(down.nu, nz.nu);
        assert_eq!(down.z, nz.z);
    }

    #[test]
    fn pachner_32_rejects_non_image() {
        let nz = NZDatum::fig8();
        let up = pachner_23(&nz, 0, 1).unwrap();
        // distinguishing a wrong column must fail the pattern match
        assert!(pachner_32(&up, 1).is_err());
    }

    #[test]
    fn pachner_23_output_half_symplectic() {
        for seed in 0..10u64 {
            let nz = synthetic_datum(seed, 3, 0).unwrap();
            if let Ok(up) = pachner_23(&nz, 0, 1) {
                let rep = check_symplectic(&up.a, &up.b).unwrap();
                assert!(rep.ok(), "seed {}", seed);
            }
        }
    }

    #[test]
    fn synthetic_nullities() {
        for (seed, n, t) in [(1u64, 3usize, 0usize), (2, 3, 1), (3, 3, 2), (4, 2, 1), (5, 4, 2)] {
            let nz = synthetic_datum(seed, n, t).unwrap();
            let field = NumberField::rationals();
            let rank = nz.b.to_exact(&field).rank();
            assert_eq!(n - rank, t, "seed {} n {} nullity {}", seed, n, t);
            assert!(check_symplectic(&nz.a, &nz.b).unwrap().ok());
        }
    }

    #[test]
    fn compare_self_is_exact_equal() {
        let nz = NZDatum::fig8();
        let rep = compare_phi(&nz, &nz, 6).unwrap();
        assert_eq!(rep, MoveReport::ExactEqual);
    }
}
