use aqedc_core::excitation::*;
use aqedc_core::linalg::{
    self, cyclic_shift, dense_matrix_element, devectorize, identity, phase, vectorize, CMat, C64,
};
use aqedc_core::mps::{self, apply_adjoint_map, transfer_matrix, MpsTensor};
use aqedc_core::rng;
use proptest::prelude::*;
use rand::seq::index::sample;

fn dense_element(fam: &ExcitationFamily, p: f64, pp: f64, f: &CMat, support: &[usize]) -> C64 {
    let ket = excitation_state(fam, p).unwrap();
    let bra = excitation_state(fam, pp).unwrap();
    dense_matrix_element(&bra, &ket, f, support, fam.n, fam.a.phys_dim).unwrap() / (ket.norm() * bra.norm())
}

#[test]
fn double_sum_matches_dense_on_random_supports() {
    let mut worst: f64 = 0.0;
    for seed in 0..12u64 {
        let n = 5 + (seed as usize % 4);
        let d_bond = 1 + (seed as usize % 3);
        let fam = ExcitationFamily::random(2, d_bond, n, &[1, 2, n - 1], seed).unwrap();
        let mut g = rng::stream(seed, 7);
        let width = 1 + (seed as usize % 3);
        let support: Vec<usize> = sample(&mut g, n, width).into_iter().collect();
        let f = rng::complex_gaussian_matrix(&mut g, 1 << width, 1 << width);
        for (&p, &pp) in [(fam.momenta[0], fam.momenta[0]), (fam.momenta[1], fam.momenta[2])]
            .iter()
            .map(|(a, b)| (a, b))
        {
            let exact = excitation_matrix_element(&fam, p, pp, &f, &support).unwrap();
            let dense = dense_element(&fam, p, pp, &f, &support);
            worst = worst.max((exact - dense).norm() / dense.norm().max(1.0));
        }
    }
    assert!(worst < 1e-10, "worst deviation {worst}");
}

#[test]
fn embedded_route_matches_double_sum() {
    let n = 9;
    let fam = ExcitationFamily::random(3, 2, n, &[2, 5], 31).unwrap();
    let mut g = rng::stream(31, 2);
    let f = rng::complex_gaussian_matrix(&mut g, 9, 9);
    for (p, pp) in [(fam.momenta[0], fam.momenta[0]), (fam.momenta[0], fam.momenta[1])] {
        let a = excitation_matrix_element(&fam, p, pp, &f, &[7, 1]).unwrap();
        let b = excitation_matrix_element_embedded(&fam, p, pp, &f, &[7, 1]).unwrap();
        assert!((a - b).norm() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn states_are_shift_eigenvectors() {
    let n = 7;
    let fam = ExcitationFamily::random(2, 2, n, &[1, 3], 5).unwrap();
    for &p in &fam.momenta {
        let psi = excitation_state(&fam, p).unwrap();
        let shifted = cyclic_shift(&psi, n, 2).unwrap();
        assert!((shifted - &psi * phase(p)).norm() < 1e-11 * psi.norm());
    }
}

#[test]
fn distinct_momenta_are_orthogonal() {
    let n = 8;
    let fam = ExcitationFamily::random(2, 2, n, &[1, 2, 6], 8).unwrap();
    let s: Vec<_> = fam
        .momenta
        .iter()
        .map(|&p| excitation_state(&fam, p).unwrap())
        .collect();
    for i in 0..3 {
        for j in 0..i {
            assert!(s[i].dotc(&s[j]).norm() < 1e-11 * s[i].norm() * s[j].norm());
        }
    }
}

#[test]
fn norm_approaches_n_c_p() {
    let fam = ExcitationFamily::random(2, 2, 10, &[3], 12).unwrap();
    let p = fam.momenta[0];
    let dense = excitation_state(&fam, p).unwrap().norm();
    let lambda2 = fam.lambda2().unwrap();
    let dev = norm_law_deviation(&fam, p, dense).unwrap();
    assert!(dev < 10.0 * 10.0 * lambda2.powi(5), "deviation {dev}, λ₂ = {lambda2}");
    let from_sum = norm_squared(&fam, p).unwrap().sqrt();
    assert!((from_sum - dense).abs() < 1e-11 * dense);
}

#[test]
fn open_position_states_are_orthogonal_with_weight_c() {
    let fam = ExcitationFamily::random(2, 2, 8, &[1, 3], 40).unwrap();
    let l = 6;
    let (p, pp) = (fam.momenta[0], fam.momenta[1]);
    let c = c_constant(&fam, p, pp).unwrap();
    for j in 0..l {
        let ket = open_position_state(&fam, l, j, p).unwrap();
        for jp in 0..l {
            let bra = open_position_state(&fam, l, jp, pp).unwrap();
            let v = bra.dotc(&ket);
            let expect = if j == jp { c } else { C64::new(0.0, 0.0) };
            assert!((v - expect).norm() < 1e-11, "j = {j}, j' = {jp}: {v} vs {expect}");
        }
    }
}

#[test]
fn solving_with_the_forward_transfer_leaves_a_residual() {
    let a = mps::canonicalize(&mps::random_injective_mps(2, 3, 77).unwrap()).unwrap();
    let fp = mps::fixed_points(&a).unwrap();
    let mut g = rng::stream(77, 1);
    let b = MpsTensor::new((0..2).map(|_| rng::complex_gaussian_matrix(&mut g, 3, 3)).collect()).unwrap();
    let p = momentum(1, 6);
    let fixed = gauge_fix(&a, &b, p).unwrap();
    let (r1, r2) = gauge_residuals_of(&a, &fixed, &fp.left);
    assert!(r1.max(r2) < 1e-10, "{r1} {r2}");

    let source = apply_adjoint_map(&b, &a, &fp.left);
    let e = transfer_matrix(&a, &a).unwrap();
    let m = identity(9) - e * phase(-p);
    let y = m.lu().solve(&(-vectorize(&source))).unwrap();
    let x = fp.left.clone().try_inverse().unwrap() * devectorize(&y, 3, 3).unwrap();
    let forward = MpsTensor::new(
        a.matrices
            .iter()
            .zip(&b.matrices)
            .map(|(am, bm)| bm + am * &x - &x * am * phase(-p))
            .collect(),
    )
    .unwrap();
    let (f1, _) = gauge_residuals_of(&a, &forward, &fp.left);
    assert!(f1 > 1e-3, "forward solve residual {f1}");
}

#[test]
fn family_manifest_round_trips() {
    let fam = ExcitationFamily::random(2, 2, 6, &[1, 2], 3).unwrap();
    let m = FamilyManifest::from_family(&fam);
    let back: FamilyManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(back.n, 6);
    assert_eq!(back.momenta, fam.momenta);
    assert!(back.gauge_residuals.iter().all(|r| r[0] < 1e-10 && r[1] < 1e-10));
    let rebuilt = back.into_family().unwrap();
    for (x, y) in rebuilt.b_of_p.iter().zip(&fam.b_of_p) {
        assert!((linalg::frobenius(&(&x.matrices[0] - &y.matrices[0]))) < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gauge_residuals_vanish(seed in 0u64..1000, k in 1usize..6) {
        let fam = ExcitationFamily::random(2, 2, 6, &[k], seed).unwrap();
        prop_assert!(fam.max_gauge_residual() < 1e-9);
        let c = c_constant(&fam, fam.momenta[0], fam.momenta[0]).unwrap();
        prop_assert!((c.re - 1.0).abs() < 1e-12 && c.im.abs() < 1e-12);
    }
}
