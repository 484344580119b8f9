//! The six experiments. Each fills a table in grid order and reports
//! invariant violations separately from hard errors.

use anyhow::{bail, Result};
use serde_json::{json, Value};

use aqedc_core::aqedc::{
    self, certify, conflicts, eps_approx, kl_gamma, necessary_check, necessary_check_transfer, nogo_experiment,
    orthogonalize_boundaries, random_boundary_instance, CertifyOutcome, CodeBasis, OperatorSource, EXHAUSTIVE_LIMIT,
};
use aqedc_core::excitation::{self, momentum, ExcitationFamily, FamilyManifest};
use aqedc_core::magnon::{self, diagonal_difference_experiment, magnon_scaling_experiment, Representation};
use aqedc_core::mps;
use aqedc_core::noise::{
    detection_round, exhaustive_pauli_channel, haar_code_state, monte_carlo_detect, sample_pauli_channel, SupportMode,
};
use aqedc_core::par::*;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::Table;

/// Everything an experiment produces besides wall time.
pub struct ExperimentOutput {
    pub table: Table,
    pub summary: Value,
    pub tolerances: Value,
    pub grid: Value,
    pub seeds: Vec<u64>,
    pub violations: Vec<String>,
    /// Extra files `(name, contents)` written next to the CSV.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl ExperimentOutput {
    fn new(table: Table, cfg: &ExperimentConfig, seed: u64) -> Self {
        Self {
            table,
            summary: Value::Null,
            tolerances: json!({}),
            grid: json!({ "n_grid": cfg.n_grid }),
            seeds: vec![seed],
            violations: Vec::new(),
            artifacts: Vec::new(),
        }
    }
}

pub fn dispatch(experiment: Experiment, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match experiment {
        Experiment::Spectrum => spectrum(cfg),
        Experiment::MagnonScan => magnon_scan(cfg),
        Experiment::ExcitationScan => excitation_scan(cfg),
        Experiment::Nogo => nogo(cfg),
        Experiment::Certify => certify_run(cfg),
        Experiment::NoiseSim => noise_sim(cfg),
    }
}

fn collect<T>(results: Vec<aqedc_core::Result<T>>) -> Result<Vec<T>> {
    Ok(results.into_iter().collect::<aqedc_core::Result<Vec<T>>>()?)
}

fn pretty(v: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn spectrum(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seed()?;
    let hash = cfg.hash();
    let mut jobs = Vec::new();
    for &n in &cfg.n_grid {
        for &r in &cfg.r {
            for &s in &cfg.s {
                jobs.push((n, r, s));
            }
        }
    }
    let results = collect(
        jobs.clone()
            .into_par_iter()
            .map(|(n, r, s)| magnon::magnon_transfer(r, s, n))
            .collect(),
    )?;
    let mut table = Table::new(&["n", "r", "s", "index", "re", "im", "seed"]);
    let mut summary = Vec::new();
    let mut violations = Vec::new();
    for t in &results {
        for (i, z) in t.spectrum().iter().enumerate() {
            table.push(
                vec![
                    t.n.into(),
                    t.r.into(),
                    t.s.into(),
                    i.into(),
                    z.re.into(),
                    z.im.into(),
                    seed.into(),
                ],
                &hash,
            );
        }
        let unit = (t.r + 1) * (t.s + 1);
        let expected = (2 * unit, unit, unit);
        let found = t.multiplicities(cfg.cluster_tol);
        let bound = t.r.min(t.s) + 2;
        let block = t.jordan.largest_block();
        if found != expected {
            violations.push(format!(
                "n={} r={} s={}: multiplicities {found:?}, expected {expected:?}",
                t.n, t.r, t.s
            ));
        }
        if block > bound {
            violations.push(format!(
                "n={} r={} s={}: Jordan block {block} exceeds {bound}",
                t.n, t.r, t.s
            ));
        }
        for w in &t.jordan.warnings {
            violations.push(format!("n={} r={} s={}: {w}", t.n, t.r, t.s));
        }
        summary.push(json!({
            "n": t.n, "r": t.r, "s": t.s,
            "multiplicities": [found.0, found.1, found.2],
            "expected": [expected.0, expected.1, expected.2],
            "largest_block": block,
            "block_bound": bound,
            "clusters": t.jordan.clusters,
        }));
    }
    let mut out = ExperimentOutput::new(table, cfg, seed);
    out.summary = json!({ "transfers": summary });
    out.tolerances = json!({ "cluster_tol": cfg.cluster_tol, "rank_tol": aqedc_core::linalg::DEFAULT_RANK_TOL });
    out.grid = json!({ "n_grid": cfg.n_grid, "r": cfg.r, "s": cfg.s });
    out.violations = violations;
    Ok(out)
}

fn magnon_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seed()?;
    let hash = cfg.hash();
    let mut table = Table::new(&["n", "r", "s", "d", "seed", "abs_value", "fit_group"]);
    let mut fits = Vec::new();
    for &r in &cfg.r {
        for &s in &cfg.s {
            let res = if r == s {
                diagonal_difference_experiment(s, cfg.d, &cfg.n_grid, seed)?
            } else {
                magnon_scaling_experiment(r, s, cfg.d, &cfg.n_grid, seed)?
            };
            for p in &res.points {
                table.push(
                    vec![
                        p.n.into(),
                        r.into(),
                        s.into(),
                        cfg.d.into(),
                        seed.into(),
                        p.max_abs.into(),
                        res.group.label().into(),
                    ],
                    &hash,
                );
            }
            fits.push(json!({
                "r": r, "s": s, "d": cfg.d, "group": res.group.label(),
                "all_zero": res.all_zero(),
                "fit": res.fit,
            }));
        }
    }
    let mut out = ExperimentOutput::new(table, cfg, seed);
    out.summary = json!({ "fits": fits, "samples_per_n": magnon::SCALING_SAMPLES });
    out.tolerances = json!({ "zero_floor": magnon::ZERO_FLOOR });
    out.grid = json!({ "n_grid": cfg.n_grid, "r": cfg.r, "s": cfg.s, "d": cfg.d });
    Ok(out)
}

fn excitation_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seed()?;
    let hash = cfg.hash();
    let per_n = collect(
        cfg.n_grid
            .clone()
            .into_par_iter()
            .map(
                |n| -> aqedc_core::Result<(ExcitationFamily, Vec<(usize, f64, f64, f64, &'static str)>)> {
                    let fam = ExcitationFamily::random(cfg.phys_dim, cfg.bond_dim, n, &cfg.momenta, seed)?;
                    let mut rows = Vec::new();
                    for &k in &cfg.momenta {
                        let p = momentum(k, n);
                        let (norm, method) = if n <= 12 {
                            (excitation::excitation_state(&fam, p)?.norm(), "dense")
                        } else {
                            (excitation::norm_squared(&fam, p)?.sqrt(), "double-sum")
                        };
                        let c = excitation::c_constant(&fam, p, p)?.re;
                        rows.push((k, p, norm, (n as f64 * c).sqrt(), method));
                    }
                    Ok((fam, rows))
                },
            )
            .collect(),
    )?;
    let mut table = Table::new(&[
        "n",
        "k",
        "p",
        "norm",
        "predicted",
        "deviation",
        "bound",
        "lambda2",
        "gauge_residual",
        "norm_method",
        "seed",
    ]);
    let mut violations = Vec::new();
    let mut families = Vec::new();
    for (fam, rows) in &per_n {
        let n = fam.n;
        let lambda2 = fam.lambda2()?;
        let bound = 10.0 * n as f64 * lambda2.powf(n as f64 / 6.0);
        for (i, &(k, p, norm, predicted, method)) in rows.iter().enumerate() {
            let deviation = (norm - predicted).abs() / predicted;
            let (r1, r2) = fam.gauge_residuals[i];
            let residual = r1.max(r2);
            if residual >= 1e-9 {
                violations.push(format!("n={n} k={k}: gauge residual {residual:.3e}"));
            }
            if deviation > bound {
                violations.push(format!("n={n} k={k}: norm deviation {deviation:.3e} above {bound:.3e}"));
            }
            table.push(
                vec![
                    n.into(),
                    k.into(),
                    p.into(),
                    norm.into(),
                    predicted.into(),
                    deviation.into(),
                    bound.into(),
                    lambda2.into(),
                    residual.into(),
                    method.into(),
                    seed.into(),
                ],
                &hash,
            );
        }
        families.push(FamilyManifest::from_family(fam));
    }
    let mut out = ExperimentOutput::new(table, cfg, seed);
    out.summary = json!({ "families": per_n.len() });
    out.tolerances = json!({ "gauge_residual": 1e-9, "pinv_threshold": excitation::PINV_THRESHOLD });
    out.grid =
        json!({ "n_grid": cfg.n_grid, "momenta": cfg.momenta, "phys_dim": cfg.phys_dim, "bond_dim": cfg.bond_dim });
    out.violations = violations;
    out.artifacts.push(("families.json".into(), pretty(&families)?));
    Ok(out)
}

fn nogo(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seed()?;
    let hash = cfg.hash();
    let mut table = Table::new(&[
        "instance",
        "bond_dim",
        "n",
        "delta",
        "lambda2",
        "trace_overlap",
        "zeta",
        "rank_x",
        "rank_y",
        "boundary_norm_x",
        "boundary_norm_y",
        "seed",
    ]);
    let mut fits = Vec::new();
    let mut refutations = Vec::new();
    let mut violations = Vec::new();
    let seeds: Vec<u64> = (0..cfg.instances as u64).map(|i| seed + i).collect();
    for (i, &s) in seeds.iter().enumerate() {
        let (a, x, y) = random_boundary_instance(cfg.phys_dim, cfg.bond_dim, s)?;
        let res = nogo_experiment(&a, &x, &y, &cfg.n_grid, &cfg.delta_grid)?;
        for r in &res.rows {
            table.push(
                vec![
                    i.into(),
                    cfg.bond_dim.into(),
                    r.n.into(),
                    r.delta.into(),
                    res.lambda2.into(),
                    r.trace_overlap.into(),
                    r.zeta.into(),
                    r.rank_x.into(),
                    r.rank_y.into(),
                    r.boundary_norm_x.into(),
                    r.boundary_norm_y.into(),
                    s.into(),
                ],
                &hash,
            );
        }
        for f in &res.fits {
            if f.fit.is_some() && !f.within_bound {
                violations.push(format!(
                    "instance {i} n={}: slope {:.4} above ½log λ₂ + 0.1 = {:.4}",
                    f.n,
                    f.fit.as_ref().map(|v| v.slope).unwrap_or(f64::NAN),
                    f.bound
                ));
            }
        }
        let normalized = mps::normalize_spectral_radius(&a)?;
        for &n in &cfg.n_grid {
            let star = res
                .rows
                .iter()
                .filter(|r| r.n == n && 2 * r.delta < n)
                .find(|r| r.zeta < 0.1)
                .map(|r| r.delta);
            if let Some(delta) = star {
                let (xo, yo) = orthogonalize_boundaries(&normalized, &x, &y, n)?;
                let rec = necessary_check_transfer(&normalized, &xo, &yo, n, delta)?;
                refutations.push(json!({ "instance": i, "seed": s, "n": n, "delta": delta, "record": rec }));
            }
        }
        fits.push(json!({ "instance": i, "seed": s, "lambda2": res.lambda2, "fits": res.fits }));
    }
    let mut out = ExperimentOutput::new(table, cfg, seed);
    out.summary = json!({ "fits": fits, "refutations": refutations.len() });
    out.tolerances = json!({
        "rank_tol": aqedc::ZETA_RANK_TOL,
        "fit_floor": aqedc::NOGO_FLOOR,
        "slope_margin": 0.1,
        "refutation_zeta": 0.1,
    });
    out.grid = json!({ "n_grid": cfg.n_grid, "delta_grid": cfg.delta_grid, "bond_dim": cfg.bond_dim, "instances": cfg.instances });
    out.seeds = seeds;
    out.violations = violations;
    out.artifacts.push(("refutations.json".into(), pretty(&refutations)?));
    Ok(out)
}

fn source_for(cfg: &ExperimentConfig, n: usize, seed: u64) -> OperatorSource {
    let binom = (0..cfg.d).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let feasible = n as f64 * 3f64.powi(cfg.d as i32) * binom <= EXHAUSTIVE_LIMIT;
    match cfg.source.as_deref() {
        Some("sampled") => OperatorSource::Sampled {
            count: cfg.samples,
            seed,
        },
        Some(_) => OperatorSource::EnumeratedPaulis,
        None if feasible => OperatorSource::EnumeratedPaulis,
        None => OperatorSource::Sampled {
            count: cfg.samples,
            seed,
        },
    }
}

fn representation(n: usize) -> Representation {
    if n <= 12 {
        Representation::Dense
    } else {
        Representation::Transfer
    }
}

fn certify_run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seed()?;
    let hash = cfg.hash();
    let k = cfg.code.len();
    let mut table = Table::new(&[
        "n",
        "code_dim",
        "d",
        "gamma",
        "delta",
        "threshold",
        "epsilon",
        "certified",
        "method",
        "seed",
    ]);
    let mut records = Vec::new();
    let mut violations = Vec::new();
    for &n in &cfg.n_grid {
        if cfg.d > n {
            bail!("d = {} exceeds n = {n}", cfg.d);
        }
        let basis = CodeBasis::from_magnon(n, &cfg.code, representation(n))?;
        let source = source_for(cfg, n, seed);
        let gamma = kl_gamma(&basis, cfg.d, source)?;
        let dense = if n <= 12 { Some(basis.dense_states()?) } else { None };
        for &delta in &cfg.deltas {
            let outcome = certify(k, gamma, delta, 2, n, cfg.d, source.method_label())?;
            let (threshold, epsilon, certified) = match &outcome {
                CertifyOutcome::Certificate(c) => (c.gamma.powi(2) * (k as f64).powi(5), c.epsilon, 1usize),
                CertifyOutcome::Rejected(r) => (r.threshold, f64::NAN, 0),
            };
            table.push(
                vec![
                    n.into(),
                    k.into(),
                    cfg.d.into(),
                    gamma.into(),
                    delta.into(),
                    threshold.into(),
                    epsilon.into(),
                    certified.into(),
                    source.method_label().into(),
                    seed.into(),
                ],
                &hash,
            );
            if let (Some(cert), Some(states)) = (outcome.certificate(), &dense) {
                for start in 0..n {
                    let region: Vec<usize> = (0..cfg.d).map(|j| (start + j) % n).collect();
                    for a in 0..k {
                        for b in a + 1..k {
                            let rec = necessary_check(&states[a], &states[b], &region, n, 2)?;
                            if conflicts(cert, &rec) {
                                violations.push(format!(
                                    "n={n} δ={delta}: refutation on {region:?} excludes the certificate"
                                ));
                            }
                        }
                    }
                }
            }
            records.push(json!({ "code": cfg.code, "source": source, "outcome": outcome }));
        }
    }
    let mut out = ExperimentOutput::new(table, cfg, seed);
    let certified = records
        .iter()
        .filter(|r| r["outcome"]["outcome"] == "certificate")
        .count();
    out.summary = json!({ "certificates": certified, "rejections": records.len() - certified });
    out.tolerances = json!({ "gram_tol": aqedc::GRAM_TOL, "rank_tol": aqedc::ZETA_RANK_TOL });
    out.grid = json!({ "n_grid": cfg.n_grid, "code": cfg.code, "d": cfg.d, "deltas": cfg.deltas });
    out.violations = violations;
    out.artifacts.push(("certificates.json".into(), pretty(&records)?));
    Ok(out)
}

fn noise_sim(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seed()?;
    let hash = cfg.hash();
    let k = cfg.code.len();
    let mode = if cfg.support_mode == "connected" {
        SupportMode::Connected
    } else {
        SupportMode::Arbitrary
    };
    let mut table = Table::new(&[
        "n",
        "input",
        "acceptance",
        "acceptance_mc",
        "acceptance_stderr",
        "fidelity",
        "fidelity_mc",
        "fidelity_stderr",
        "trials",
        "eps_approx",
        "gamma",
        "seed",
    ]);
    let mut violations = Vec::new();
    let mut summary = Vec::new();
    let mut artifacts = Vec::new();
    for &n in &cfg.n_grid {
        let basis = CodeBasis::from_magnon(n, &cfg.code, representation(n))?;
        let channel = if cfg.channel == "sampled" {
            sample_pauli_channel(n, cfg.d, cfg.num_terms, seed, mode)?
        } else {
            exhaustive_pauli_channel(n, cfg.d, mode, cfg.include_identity)?
        };
        let eps = eps_approx(&basis, &channel)?;
        let source = source_for(cfg, n, seed);
        let gamma = kl_gamma(&basis, cfg.d.max(1), source)?;
        let certs: Vec<_> = cfg
            .deltas
            .iter()
            .map(|&delta| certify(k, gamma, delta, 2, n, cfg.d, source.method_label()))
            .collect::<aqedc_core::Result<Vec<_>>>()?;
        let mut outliers = 0usize;
        for i in 0..cfg.inputs {
            let input_seed = seed.wrapping_add(i as u64);
            let c = haar_code_state(k, input_seed);
            let exact = detection_round(&basis, &channel, &c)?;
            let mc = monte_carlo_detect(&basis, &channel, &c, cfg.trials, input_seed)?;
            let fid = exact.post_fidelity.unwrap_or(f64::NAN);
            let fid_mc = mc.post_fidelity.unwrap_or(f64::NAN);
            if (mc.acceptance_rate - exact.acceptance_rate).abs() > 3.0 * mc.acceptance_stderr + 1e-12
                || (fid.is_finite() && fid_mc.is_finite() && (fid_mc - fid).abs() > 3.0 * mc.fidelity_stderr + 1e-12)
            {
                outliers += 1;
            }
            for cert in certs.iter().filter_map(CertifyOutcome::certificate) {
                if exact.acceptance_rate >= cert.delta && fid < 1.0 - cert.epsilon {
                    violations.push(format!(
                        "n={n} input {i}: fidelity {fid:.6} below 1 − ε = {:.6} at acceptance {:.6} ≥ δ = {}",
                        1.0 - cert.epsilon,
                        exact.acceptance_rate,
                        cert.delta
                    ));
                }
            }
            table.push(
                vec![
                    n.into(),
                    i.into(),
                    exact.acceptance_rate.into(),
                    mc.acceptance_rate.into(),
                    mc.acceptance_stderr.into(),
                    fid.into(),
                    fid_mc.into(),
                    mc.fidelity_stderr.into(),
                    cfg.trials.into(),
                    eps.into(),
                    gamma.into(),
                    input_seed.into(),
                ],
                &hash,
            );
        }
        summary.push(json!({
            "n": n,
            "terms": channel.terms.len(),
            "eps_approx": eps,
            "gamma": gamma,
            "certificates": certs,
            "monte_carlo_outside_3_sigma": outliers,
        }));
        let mut text = channel.to_json()?;
        text.push('\n');
        artifacts.push((format!("channel_n{n}.json"), text.into_bytes()));
    }
    let mut out = ExperimentOutput::new(table, cfg, seed);
    out.summary = json!({ "per_n": summary });
    out.tolerances = json!({ "branch_floor": aqedc_core::noise::BRANCH_FLOOR, "acceptance_guard": aqedc_core::noise::ACCEPTANCE_GUARD, "mc_sigma": 3.0 });
    out.grid = json!({ "n_grid": cfg.n_grid, "code": cfg.code, "d": cfg.d, "deltas": cfg.deltas, "channel": cfg.channel, "support_mode": cfg.support_mode });
    out.seeds = (0..cfg.inputs as u64).map(|i| seed.wrapping_add(i)).collect();
    out.violations = violations;
    out.artifacts = artifacts;
    Ok(out)
}
