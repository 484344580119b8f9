use aqedc_core::aqedc::*;
use aqedc_core::excitation::{momentum, ExcitationFamily};
use aqedc_core::linalg::{apply_local, c64, dense_matrix_element, op_norm, reduced_density, trace, CMat, CVec};
use aqedc_core::magnon::Representation;
use aqedc_core::mps::{self, dense_state, StateHandle};
use aqedc_core::noise::{exhaustive_pauli_channel, pauli_terms, sample_pauli_channel, SupportMode};
use aqedc_core::rng;
use aqedc_core::Error;
use proptest::prelude::*;

fn basis_state(n: usize, bits: usize) -> CVec {
    let mut v = CVec::zeros(1 << n);
    v[bits] = c64(1.0, 0.0);
    v
}

fn dense_magnon(n: usize, ss: &[usize]) -> Vec<CVec> {
    CodeBasis::from_magnon(n, ss, Representation::Dense)
        .unwrap()
        .dense_states()
        .unwrap()
}

fn dense_elem(a: &CVec, f: &CMat, support: &[usize], b: &CVec, n: usize) -> aqedc_core::linalg::C64 {
    dense_matrix_element(a, b, f, support, n, 2).unwrap()
}

#[test]
fn eps_approx_matches_term_by_term_oracle() {
    let n = 10;
    let states = dense_magnon(n, &[0, 2]);
    let ch = exhaustive_pauli_channel(n, 1, SupportMode::Arbitrary, false).unwrap();
    let mut sums = [[0.0f64; 2]; 2];
    for t in &ch.terms {
        let r = &t.kraus * c64(t.weight.sqrt(), 0.0);
        let m00 = dense_elem(&states[0], &r, &t.support, &states[0], n);
        for a in 0..2 {
            for b in 0..2 {
                let mut v = dense_elem(&states[a], &r, &t.support, &states[b], n);
                if a == b {
                    v -= m00;
                }
                sums[a][b] += v.norm_sqr();
            }
        }
    }
    let oracle = sums.iter().flatten().copied().fold(0.0, f64::max);
    for rep in [Representation::Dense, Representation::Transfer] {
        let basis = CodeBasis::from_magnon(n, &[0, 2], rep).unwrap();
        let eps = eps_approx(&basis, &ch).unwrap();
        assert!((eps - oracle).abs() < 1e-12, "{rep:?}: {eps} vs {oracle}");
    }
}

#[test]
fn kl_gamma_matches_dense_enumeration() {
    let n = 10;
    let states = dense_magnon(n, &[0, 2]);
    let mut oracle: f64 = 0.0;
    for (f, support) in pauli_terms(n, 1, SupportMode::Arbitrary) {
        let m00 = dense_elem(&states[0], &f, &support, &states[0], n);
        for a in 0..2 {
            for b in 0..2 {
                let mut v = dense_elem(&states[a], &f, &support, &states[b], n);
                if a == b {
                    v -= m00;
                }
                oracle = oracle.max(v.norm());
            }
        }
    }
    for rep in [Representation::Dense, Representation::Transfer] {
        let basis = CodeBasis::from_magnon(n, &[0, 2], rep).unwrap();
        let g = kl_gamma(&basis, 1, OperatorSource::EnumeratedPaulis).unwrap();
        assert!((g - oracle).abs() < 1e-12);
        // σ_z separates the magnetizations by 4/n on average
        assert!((g - 4.0 / n as f64).abs() < 1e-12);
    }
}

#[test]
fn classical_code_gamma() {
    let n = 4;
    let basis = CodeBasis::new(
        n,
        2,
        vec![
            StateHandle::Dense(basis_state(n, 0)),
            StateHandle::Dense(basis_state(n, 15)),
        ],
        Provenance::Custom,
    )
    .unwrap();
    for (f, support) in pauli_terms(n, 1, SupportMode::Arbitrary) {
        let m = basis.elements(&f, &support).unwrap();
        assert!(m[(0, 1)].norm() < 1e-15 && m[(1, 0)].norm() < 1e-15);
    }
    // ⟨0|Z|0⟩ − ⟨1|Z|1⟩ = 2 for a unit-norm Pauli
    let g = kl_gamma(&basis, 1, OperatorSource::EnumeratedPaulis).unwrap();
    assert!((g - 2.0).abs() < 1e-15);
}

#[test]
fn gamma_is_monotone_in_locality() {
    let basis = CodeBasis::from_magnon(8, &[0, 2], Representation::Dense).unwrap();
    let g1 = kl_gamma(&basis, 1, OperatorSource::EnumeratedPaulis).unwrap();
    let g2 = kl_gamma(&basis, 2, OperatorSource::EnumeratedPaulis).unwrap();
    assert!(g2 >= g1);
    let s1 = kl_gamma(&basis, 2, OperatorSource::Sampled { count: 40, seed: 5 }).unwrap();
    let s2 = kl_gamma(&basis, 2, OperatorSource::Sampled { count: 40, seed: 5 }).unwrap();
    assert_eq!(s1, s2);
    assert!(s1 > 0.0);
    assert!(kl_gamma(&basis, 1, OperatorSource::Sampled { count: 0, seed: 5 }).is_err());
}

#[test]
fn sampled_operators_have_unit_norm() {
    for (f, support) in source_operators(12, 3, OperatorSource::Sampled { count: 25, seed: 9 }).unwrap() {
        assert!((op_norm(&f) - 1.0).abs() < 1e-12);
        assert_eq!(support.len(), 3);
        assert!(support.windows(2).all(|w| w[0] < w[1]));
    }
    assert!(source_operators(200, 3, OperatorSource::EnumeratedPaulis).is_err());
}

#[test]
fn certify_arithmetic() {
    let out = certify(2, 0.01, 0.1, 2, 10, 1, "enumerated-paulis").unwrap();
    let cert = out.certificate().unwrap();
    assert!((cert.epsilon - 0.032).abs() < 1e-15);
    assert!((cert.k - 1.0).abs() < 1e-15);
    let rej = certify(2, 0.1, 0.3, 2, 10, 1, "sampled").unwrap();
    assert!(matches!(rej, CertifyOutcome::Rejected(ref r) if (r.threshold - 0.32).abs() < 1e-15));
    assert!(matches!(certify(2, 0.01, 0.0, 2, 10, 1, "x"), Err(Error::Invalid(_))));
    assert!(matches!(certify(2, 0.01, 1.5, 2, 10, 1, "x"), Err(Error::Invalid(_))));
    let text = serde_json::to_string(&out).unwrap();
    let back: CertifyOutcome = serde_json::from_str(&text).unwrap();
    assert_eq!(back, out);
}

#[test]
fn refuter_trivial_cases() {
    let n = 4;
    let rec = necessary_check(&basis_state(n, 0), &basis_state(n, 15), &[0, 1], n, 2).unwrap();
    assert_eq!(rec.zeta, 0.0);
    assert_eq!((rec.excluded_epsilon_bound, rec.excluded_delta_bound), (1.0, 1.0));
    assert!(rec.refutes());

    let s = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let plus = (basis_state(n, 0) + basis_state(n, 15)) * s;
    let minus = (basis_state(n, 0) - basis_state(n, 15)) * s;
    let rec = necessary_check(&plus, &minus, &[1, 2], n, 2).unwrap();
    assert_eq!((rec.rank1, rec.rank2), (2, 2));
    assert!((rec.trace_overlap - 0.5).abs() < 1e-14);
    assert!(!rec.refutes());

    assert!(matches!(
        necessary_check(&plus, &plus, &[0], n, 2),
        Err(Error::NonOrthonormal(_))
    ));
    let json = serde_json::to_string(&rec).unwrap();
    assert_eq!(serde_json::from_str::<RefutationRecord>(&json).unwrap(), rec);
}

fn random_unitary(dim: usize, seed: u64) -> CMat {
    let mut g = rng::stream(seed, 0);
    let m = rng::complex_gaussian_matrix(&mut g, dim, dim);
    m.qr().q()
}

#[test]
fn zeta_symmetric_and_blind_to_outside_unitaries() {
    let n = 8;
    let states = dense_magnon(n, &[1, 3]);
    let region = [2, 3, 5];
    let a = necessary_check(&states[0], &states[1], &region, n, 2).unwrap();
    let b = necessary_check(&states[1], &states[0], &region, n, 2).unwrap();
    assert!((a.zeta - b.zeta).abs() < 1e-10);
    let u = random_unitary(4, 3);
    let x = apply_local(&states[0], &u, &[0, 7], n, 2).unwrap();
    let y = apply_local(&states[1], &u, &[0, 7], n, 2).unwrap();
    let c = necessary_check(&x, &y, &region, n, 2).unwrap();
    assert!((a.zeta - c.zeta).abs() < 1e-10);
    assert_eq!((a.rank1, a.rank2), (c.rank1, c.rank2));
}

fn dense_boundary_pair(seed: u64, d: usize, n: usize) -> (mps::MpsTensor, CMat, CMat, CVec, CVec) {
    let (a, x, y) = random_boundary_instance(2, d, seed).unwrap();
    let a = mps::normalize_spectral_radius(&a).unwrap();
    let (xo, yo) = orthogonalize_boundaries(&a, &x, &y, n).unwrap();
    let px = dense_state(&a, &xo, n).unwrap();
    let py = dense_state(&a, &yo, n).unwrap();
    (a, xo, yo, px, py)
}

#[test]
fn boundary_orthogonalization_in_state_space() {
    for seed in 0..4 {
        let (_, _, _, px, py) = dense_boundary_pair(seed, 2, 10);
        assert!((px.norm() - 1.0).abs() < 1e-10);
        assert!((py.norm() - 1.0).abs() < 1e-10);
        assert!(px.dotc(&py).norm() < 1e-10);
    }
}

#[test]
fn transfer_route_matches_dense_partial_trace() {
    let n = 12;
    for (seed, d) in [(1u64, 2usize), (2, 2), (3, 3), (4, 3)] {
        let (a, xo, yo, px, py) = dense_boundary_pair(seed, d, n);
        let mut previous = f64::INFINITY;
        for delta in 1..=4 {
            let region = boundary_region(n, delta);
            let dense = necessary_check(&px, &py, &region, n, 2).unwrap();
            let fast = necessary_check_transfer(&a, &xo, &yo, n, delta).unwrap();
            assert!(
                (dense.trace_overlap - fast.trace_overlap).abs() < 1e-10,
                "seed {seed} Δ {delta}"
            );
            assert_eq!(
                (dense.rank1, dense.rank2),
                (fast.rank1, fast.rank2),
                "seed {seed} Δ {delta}"
            );
            assert!((dense.zeta - fast.zeta).abs() < 1e-9);
            assert!(fast.trace_overlap < previous, "seed {seed}: overlaps must decrease");
            previous = fast.trace_overlap;

            // X = Y control: purity of the boundary marginal
            let sites: Vec<usize> = {
                let mut s = region.clone();
                s.sort_unstable();
                s
            };
            let rho = reduced_density(&px, &vec![2; n], &sites).unwrap();
            let purity = trace(&(&rho * &rho)).re;
            let region_op = BoundaryRegion::new(&a, n, delta).unwrap();
            assert!((region_op.trace_overlap(&xo, &xo) - purity).abs() < 1e-10);
            assert!(purity <= 1.0 + 1e-12);
            assert!((region_op.trace(&xo) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn boundary_pair_refuted_at_n12() {
    let n = 12;
    // seed 2 has λ₂ ≈ 0.11, enough decay for two sites per edge
    let (_, _, _, px, py) = dense_boundary_pair(2, 2, n);
    let rec = necessary_check(&px, &py, &boundary_region(n, 2), n, 2).unwrap();
    assert!(rec.zeta < 0.1, "ζ = {}", rec.zeta);
    assert!(rec.refutes());
    assert!(rec.excludes(0.5, 0.5));
    let rec1 = necessary_check(&px, &py, &boundary_region(n, 1), n, 2).unwrap();
    assert!(rec1.zeta > rec.zeta);
}

#[test]
fn nogo_decay_within_bound() {
    let n_grid = [64, 128, 256];
    let deltas: Vec<usize> = (1..=8).collect();
    for seed in 0..3 {
        let (a, x, y) = random_boundary_instance(2, 2, seed).unwrap();
        let res = nogo_experiment(&a, &x, &y, &n_grid, &deltas).unwrap();
        for f in &res.fits {
            let fit = f.fit.as_ref().expect("enough points above the floor");
            assert!(
                f.within_bound,
                "seed {seed} n {}: slope {} bound {}",
                f.n, fit.slope, f.bound
            );
        }
        let norms: Vec<f64> = res
            .rows
            .iter()
            .map(|r| r.boundary_norm_x.max(r.boundary_norm_y))
            .collect();
        let (lo, hi) = norms
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi / lo < 1.5, "boundary norms drift: {lo} .. {hi}");
    }
}

#[test]
fn nogo_rejects_non_injective() {
    let a = mps::MpsTensor::new(vec![
        CMat::identity(2, 2),
        aqedc_core::linalg::from_rows(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)]),
    ])
    .unwrap();
    let x = CMat::identity(2, 2);
    let y = aqedc_core::linalg::from_rows(2, 2, &[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
    assert!(matches!(
        nogo_experiment(&a, &x, &y, &[12], &[1]),
        Err(Error::NotPrimitive(_))
    ));
}

#[test]
fn excitation_code_elements_match_dense() {
    let n = 8;
    let fam = ExcitationFamily::random(2, 2, n, &[1, 3], 11).unwrap();
    let momenta = [momentum(1, n), momentum(3, n)];
    let basis = CodeBasis::from_excitation(&fam, &momenta).unwrap();
    let dense: Vec<CVec> = basis.dense_states().unwrap();
    let dbasis = CodeBasis::new(
        n,
        2,
        dense.into_iter().map(StateHandle::Dense).collect(),
        Provenance::Excitation,
    )
    .unwrap();
    for (f, support) in source_operators(n, 2, OperatorSource::Sampled { count: 12, seed: 4 }).unwrap() {
        let a = basis.elements(&f, &support).unwrap();
        let b = dbasis.elements(&f, &support).unwrap();
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn rejects_non_orthonormal_basis() {
    let n = 3;
    let v = basis_state(n, 1);
    let w = (basis_state(n, 1) + basis_state(n, 2)) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let r = CodeBasis::new(
        n,
        2,
        vec![StateHandle::Dense(v), StateHandle::Dense(w)],
        Provenance::Custom,
    );
    assert!(matches!(r, Err(Error::NonOrthonormal(_))));
}

#[test]
fn certificate_never_conflicts_with_refutation() {
    let n = 10;
    let basis = CodeBasis::from_magnon(n, &[0, 2], Representation::Dense).unwrap();
    let states = basis.dense_states().unwrap();
    let g = kl_gamma(&basis, 1, OperatorSource::EnumeratedPaulis).unwrap();
    for delta in [0.2, 0.5, 1.0] {
        if let Some(cert) = certify(2, g, delta, 2, n, 1, "enumerated-paulis")
            .unwrap()
            .certificate()
        {
            for site in 0..n {
                let rec = necessary_check(&states[0], &states[1], &[site], n, 2).unwrap();
                assert!(!conflicts(cert, &rec));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eps_approx_bounds(seed in 0u64..1000, terms in 1usize..12) {
        let n = 6;
        let basis = CodeBasis::from_magnon(n, &[0, 1], Representation::Dense).unwrap();
        let ch = sample_pauli_channel(n, 2, terms, seed, SupportMode::Arbitrary).unwrap();
        let eps = eps_approx(&basis, &ch).unwrap();
        let max_r = ch.terms.iter().map(|t| t.weight.sqrt() * op_norm(&t.kraus)).fold(0.0, f64::max);
        prop_assert!(eps >= 0.0);
        prop_assert!(eps <= ch.terms.len() as f64 * (2.0 * max_r).powi(2) + 1e-12);
    }
}
