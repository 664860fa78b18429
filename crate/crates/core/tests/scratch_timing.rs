use std::time::Instant;

use nzphi::nzdata::NZDatum;
use nzphi::phi::phi_series;
use nzphi::psi::PsiCache;

#[test]
#[ignore]
fn fig8_k20_timing() {
    let nz = NZDatum::fig8();
    let cache = PsiCache::new();
    let t = Instant::now();
    let phi = phi_series(&nz, 20, &cache).unwrap();
    println!("fig8 K=20 took {:?}", t.elapsed());
    for (&j, p) in phi.series.orders() {
        println!("j = {}: {}", j, p.constant_term());
    }
}

#[test]
#[ignore]
fn pentagon_k10_timing() {
    use nzphi::exactfield::{FieldElement, NumberField};
    let f = NumberField::rationals();
    let t = Instant::now();
    let r = nzphi::identities::verify_pentagon(
        &FieldElement::from_ratio(&f, 1, 3),
        &FieldElement::from_ratio(&f, 1, 5),
        10,
    )
    .unwrap();
    println!("pentagon K=10 took {:?}, pass = {}", t.elapsed(), r.pass);
    assert!(r.pass);
}

#[test]
#[ignore]
fn synthetic_pachner_k10_timing() {
    use nzphi::moves::{compare_phi, pachner_23, synthetic_datum};
    let t = Instant::now();
    let nz = synthetic_datum(7, 4, 1).unwrap();
    let up = pachner_23(&nz, 0, 1).unwrap();
    let rep = compare_phi(&nz, &up, 10).unwrap();
    println!("synthetic N=4 pachner compare K=10 took {:?}: {:?}", t.elapsed(), rep);
    assert!(rep.is_invariant());
}

#[test]
#[ignore]
fn fourier_k14_timing() {
    use nzphi::exactfield::{FieldElement, NumberField};
    let f = NumberField::rationals();
    let t = Instant::now();
    let r = nzphi::identities::verify_fourier(&FieldElement::from_ratio(&f, 1, 3), 14).unwrap();
    println!("fourier K=14 took {:?}, pass = {}", t.elapsed(), r.pass);
    assert!(r.pass);
}

#[test]
#[ignore]
fn phi_split_timing() {
    use nzphi::gauss::bracket_all;
    use nzphi::moves::{pachner_23, synthetic_datum};
    use nzphi::phi::{integrand, lambda_matrix};
    let nz = synthetic_datum(7, 4, 1).unwrap();
    let up = pachner_23(&nz, 0, 1).unwrap();
    let q = nzphi::nzdata::find_nondegenerate_quad(&up).unwrap();
    let fixed = nzphi::nzdata::apply_quad(&up, &q).unwrap();
    let cache = PsiCache::new();
    let t = Instant::now();
    let f = integrand(&fixed, 10, &cache).unwrap();
    println!("N=5 integrand: {:?}", t.elapsed());
    let nterms: usize = f.orders().map(|(_, p)| p.num_terms()).sum();
    println!("integrand terms: {}", nterms);
    let form = lambda_matrix(&fixed).unwrap();
    let t = Instant::now();
    let b = bracket_all(&f, &form).unwrap();
    println!("N=5 bracket: {:?}", t.elapsed());
    let _ = b;
}
