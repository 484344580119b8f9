//! Approximate error detection: Knill–Laflamme deviations, the sufficient
//! certificate, the rank-weighted overlap refuter and the boundary no-go
//! experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{embedded_handle, ExcitationFamily};
use crate::fit::{fit_log_linear, FitResult};
use crate::linalg::{self, apply_local, c64, hermitian_eigen, identity, numerical_rank, op_norm, CMat, CVec, C64};
use crate::magnon::{magnon_state, Representation};
use crate::mps::{
    self, is_injective, normalize_support, seam, transfer_matrix, MixedChain, MpsHandle, MpsTensor, PowerCache,
    StateHandle, DEFAULT_GAP_TOL,
};
use crate::noise::{pauli_terms, NoiseChannel, SupportMode};
use crate::par::*;
use crate::rng;

/// Gram-matrix tolerance for code bases.
pub const GRAM_TOL: f64 = 1e-9;
/// Relative singular-value cutoff for ranks in ζ.
pub const ZETA_RANK_TOL: f64 = 1e-10;
/// Largest exhaustive Pauli source, counted as `n·3^d·C(n,d)`.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Excitation,
    Magnon,
    BoundaryMps,
    Custom,
}

struct PairChain {
    chain: MixedChain,
    seam: CMat,
    scale: f64,
}

/// Orthonormal code states `{ψ_α}` on `n` sites of dimension `p`.
pub struct CodeBasis {
    pub n: usize,
    pub p: usize,
    pub states: Vec<StateHandle>,
    pub provenance: Provenance,
    /// `chains[α·K + β]` for transfer-form bases.
    chains: Vec<PairChain>,
}

impl std::fmt::Debug for CodeBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CodeBasis")
            .field("n", &self.n)
            .field("p", &self.p)
            .field("k", &self.states.len())
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl CodeBasis {
    /// Checks that all states share one form and that the Gram matrix is `I_K`.
    pub fn new(n: usize, p: usize, states: Vec<StateHandle>, provenance: Provenance) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Invalid("code basis needs at least one state".into()));
        }
        let dense = matches!(states[0], StateHandle::Dense(_));
        if states.iter().any(|s| matches!(s, StateHandle::Dense(_)) != dense) {
            return Err(Error::Invalid(
                "code states must be all dense or all in transfer form".into(),
            ));
        }
        let mut chains = Vec::new();
        if !dense {
            let handles: Vec<&MpsHandle> = states
                .iter()
                .map(|s| match s {
                    StateHandle::Transfer(h) => h,
                    StateHandle::Dense(_) => unreachable!(),
                })
                .collect();
            for bra in &handles {
                for ket in &handles {
                    if bra.tensor.phys_dim != p {
                        return Err(Error::Dimension(format!(
                            "state has physical dimension {}",
                            bra.tensor.phys_dim
                        )));
                    }
                    chains.push(PairChain {
                        chain: MixedChain::new(&bra.tensor, &ket.tensor, n)?,
                        seam: seam(&bra.boundary, &ket.boundary),
                        scale: bra.scale * ket.scale,
                    });
                }
            }
        } else {
            let len = (p as u128).pow(n as u32);
            for s in &states {
                if let StateHandle::Dense(v) = s {
                    if v.len() as u128 != len {
                        return Err(Error::Dimension(format!("state of length {} on {n} sites", v.len())));
                    }
                }
            }
        }
        let basis = Self {
            n,
            p,
            states,
            provenance,
            chains,
        };
        let gram = basis.gram()?;
        let dev = (&gram - identity(basis.k())).norm();
        if dev > GRAM_TOL {
            return Err(Error::NonOrthonormal(format!(
                "Gram matrix deviates from identity by {dev:.3e}"
            )));
        }
        Ok(basis)
    }

    pub fn from_magnon(n: usize, magnetizations: &[usize], representation: Representation) -> Result<Self> {
        let states = magnetizations
            .iter()
            .map(|&s| magnon_state(n, s, representation))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, 2, states, Provenance::Magnon)
    }

    /// Excitation states `φ_p` of a family, in transfer form.
    pub fn from_excitation(fam: &ExcitationFamily, momenta: &[f64]) -> Result<Self> {
        let states = momenta
            .iter()
            .map(|&p| embedded_handle(fam, p).map(StateHandle::Transfer))
            .collect::<Result<Vec<_>>>()?;
        Self::new(fam.n, fam.a.phys_dim, states, Provenance::Excitation)
    }

    /// Number of code states `K`.
    pub fn k(&self) -> usize {
        self.states.len()
    }

    pub fn is_dense(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn gram(&self) -> Result<CMat> {
        self.elements(&identity(1), &[])
    }

    /// `[⟨ψ_α|F_A|ψ_β⟩]_{αβ}`.
    pub fn elements(&self, f: &CMat, support: &[usize]) -> Result<CMat> {
        let k = self.k();
        if self.is_dense() {
            let support = normalize_support(support, self.n)?;
            let dense: Vec<&CVec> = self
                .states
                .iter()
                .map(|s| match s {
                    StateHandle::Dense(v) => v,
                    StateHandle::Transfer(_) => unreachable!(),
                })
                .collect();
            let images = dense
                .iter()
                .map(|v| {
                    if support.is_empty() {
                        Ok(*v * f[(0, 0)])
                    } else {
                        apply_local(v, f, &support, self.n, self.p)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(CMat::from_fn(k, k, |a, b| dense[a].dotc(&images[b])));
        }
        let mut out = CMat::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let pc = &self.chains[a * k + b];
                out[(a, b)] = pc.chain.element(f, support, &pc.seam)? * pc.scale;
            }
        }
        Ok(out)
    }

    /// Dense code states, materialized if necessary.
    pub fn dense_states(&self) -> Result<Vec<CVec>> {
        self.states.iter().map(|s| s.to_dense(self.n)).collect()
    }
}

/// `max_{α,β} |M_{αβ} − δ_{αβ} M_{00}|` for a matrix of code elements.
pub fn kl_deviation(m: &CMat) -> f64 {
    let k = m.nrows();
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            let v = if a == b { m[(a, b)] - m[(0, 0)] } else { m[(a, b)] };
            worst = worst.max(v.norm());
        }
    }
    worst
}

/// `ε_approx = max_{α,β} Σ_j |⟨ψ_α|R_j|ψ_β⟩ − δ_{αβ}⟨ψ_0|R_j|ψ_0⟩|²`, `R_j = √(p_j) F_j`.
pub fn eps_approx(basis: &CodeBasis, channel: &NoiseChannel) -> Result<f64> {
    channel.validate()?;
    let excess = channel.completeness_max_eigenvalue()?;
    if excess > 1.0 + 1e-8 {
        return Err(Error::Invalid(format!("Σ p_j F_j†F_j has norm {excess} > 1")));
    }
    let k = basis.k();
    let blocks = (&channel.terms)
        .into_par_iter()
        .map(|t| {
            basis
                .elements(&t.kraus, &t.support)
                .map(|m| m * c64(t.weight.sqrt(), 0.0))
        })
        .collect::<Vec<Result<CMat>>>();
    let mut sums = CMat::zeros(k, k).map(|_| 0.0f64);
    for m in blocks {
        let m = m?;
        for a in 0..k {
            for b in 0..k {
                let v = if a == b { m[(a, b)] - m[(0, 0)] } else { m[(a, b)] };
                sums[(a, b)] += v.norm_sqr();
            }
        }
    }
    Ok(sums.iter().copied().fold(0.0, f64::max))
}

/// Where the operators in `γ` come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorSource {
    /// Every Pauli string of weight `1..=d` on every admissible support.
    EnumeratedPaulis,
    /// Seeded Gaussian operators of unit operator norm on uniform `d`-subsets.
    Sampled { count: usize, seed: u64 },
}

impl OperatorSource {
    pub fn method_label(&self) -> &'static str {
        match self {
            Self::EnumeratedPaulis => "enumerated-paulis",
            Self::Sampled { .. } => "sampled",
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Operators `(F, support)` of a source.
pub fn source_operators(n: usize, d: usize, source: OperatorSource) -> Result<Vec<(CMat, Vec<usize>)>> {
    if d == 0 || d > n {
        return Err(Error::Invalid(format!("locality d = {d} must lie in 1..={n}")));
    }
    match source {
        OperatorSource::EnumeratedPaulis => {
            let count = n as f64 * 3f64.powi(d as i32) * binomial(n, d);
            if count > EXHAUSTIVE_LIMIT {
                return Err(Error::Invalid(format!(
                    "exhaustive source has size {count:.0} > {EXHAUSTIVE_LIMIT:.0}; use a sampled source"
                )));
            }
            Ok(pauli_terms(n, d, SupportMode::Arbitrary))
        }
        OperatorSource::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::Invalid("sampled source is empty".into()));
            }
            let dim = 2usize.pow(d as u32);
            Ok((0..count)
                .map(|k| {
                    let mut g = rng::stream(seed, k as u64);
                    let mut support: Vec<usize> = rand::seq::index::sample(&mut g, n, d).into_iter().collect();
                    support.sort_unstable();
                    let m = rng::complex_gaussian_matrix(&mut g, dim, dim);
                    let norm = op_norm(&m);
                    (m / c64(norm, 0.0), support)
                })
                .collect())
        }
    }
}

/// `γ = max_F max_{α,β} |⟨ψ_α|F|ψ_β⟩ − δ_{αβ}⟨ψ_0|F|ψ_0⟩|` over unit-norm `F` from `source`.
pub fn kl_gamma(basis: &CodeBasis, d: usize, source: OperatorSource) -> Result<f64> {
    if basis.p != 2 {
        return Err(Error::Dimension("operator sources are qubit operators".into()));
    }
    let ops = source_operators(basis.n, d, source)?;
    let values = (&ops)
        .into_par_iter()
        .map(|(f, support)| basis.elements(f, support).map(|m| kl_deviation(&m)))
        .collect::<Vec<Result<f64>>>();
    let mut gamma: f64 = 0.0;
    for v in values {
        gamma = gamma.max(v?);
    }
    Ok(gamma)
}

/// An `(ε, δ)[[n, k, d]]` certificate from `δ > K⁵γ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeCertificate {
    pub n: usize,
    /// `log_p K`.
    pub k: f64,
    pub code_dim: usize,
    pub p: usize,
    pub d: usize,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub method: String,
}

/// `δ ≤ K⁵γ²`: the sufficient condition gives nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub n: usize,
    pub code_dim: usize,
    pub d: usize,
    pub gamma: f64,
    pub delta: f64,
    /// `K⁵γ²`; any certified `δ` must exceed it.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum CertifyOutcome {
    Certificate(CodeCertificate),
    Rejected(Rejection),
}

impl CertifyOutcome {
    pub fn certificate(&self) -> Option<&CodeCertificate> {
        match self {
            Self::Certificate(c) => Some(c),
            Self::Rejected(_) => None,
        }
    }
}

/// `ε = K⁵γ²/δ` when `δ > K⁵γ²`.
pub fn certify(
    code_dim: usize,
    gamma: f64,
    delta: f64,
    p: usize,
    n: usize,
    d: usize,
    method: &str,
) -> Result<CertifyOutcome> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Invalid(format!("δ = {delta} outside (0, 1]")));
    }
    if gamma < 0.0 || !gamma.is_finite() || code_dim == 0 || p < 2 {
        return Err(Error::Invalid("γ must be finite and nonnegative, K ≥ 1, p ≥ 2".into()));
    }
    let threshold = (code_dim as f64).powi(5) * gamma * gamma;
    if delta <= threshold {
        return Ok(CertifyOutcome::Rejected(Rejection {
            n,
            code_dim,
            d,
            gamma,
            delta,
            threshold,
        }));
    }
    Ok(CertifyOutcome::Certificate(CodeCertificate {
        n,
        k: (code_dim as f64).ln() / (p as f64).ln(),
        code_dim,
        p,
        d,
        gamma,
        delta,
        epsilon: threshold / delta,
        method: method.to_string(),
    }))
}

/// Outcome of the rank-weighted overlap test on one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefutationRecord {
    pub region: Vec<usize>,
    pub rank1: usize,
    pub rank2: usize,
    pub trace_overlap: f64,
    /// `max(rank)²·tr(ρ₁ρ₂)`.
    pub zeta: f64,
    /// The code is not `(ε, δ)` for `ε < 1 − 10ζ` together with `δ < (1 − ζ)²`.
    pub excluded_epsilon_bound: f64,
    pub excluded_delta_bound: f64,
}

impl RefutationRecord {
    fn from_parts(region: Vec<usize>, rank1: usize, rank2: usize, trace_overlap: f64) -> Self {
        let zeta = (rank1.max(rank2) as f64).powi(2) * trace_overlap;
        Self {
            region,
            rank1,
            rank2,
            trace_overlap,
            zeta,
            excluded_epsilon_bound: 1.0 - 10.0 * zeta,
            excluded_delta_bound: (1.0 - zeta).powi(2),
        }
    }

    /// Whether the excluded region is non-empty.
    pub fn refutes(&self) -> bool {
        self.excluded_epsilon_bound > 0.0
    }

    /// Whether `(ε, δ)` lies in the excluded region.
    pub fn excludes(&self, epsilon: f64, delta: f64) -> bool {
        epsilon < self.excluded_epsilon_bound && delta < self.excluded_delta_bound
    }
}

/// ζ for two orthonormal dense states on a site region.
pub fn necessary_check(psi1: &CVec, psi2: &CVec, region: &[usize], n: usize, p: usize) -> Result<RefutationRecord> {
    for (name, v) in [("first", psi1), ("second", psi2)] {
        if (v.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::NonOrthonormal(format!("{name} state has norm {}", v.norm())));
        }
    }
    let overlap = psi1.dotc(psi2).norm();
    if overlap > 1e-8 {
        return Err(Error::NonOrthonormal(format!("states overlap by {overlap:.3e}")));
    }
    let mut region = normalize_support(region, n)?;
    region.sort_unstable();
    let dims = vec![p; n];
    let r1 = linalg::reduced_density(psi1, &dims, &region)?;
    let r2 = linalg::reduced_density(psi2, &dims, &region)?;
    let tr = linalg::trace(&(&r1 * &r2)).re.max(0.0);
    Ok(RefutationRecord::from_parts(
        region,
        numerical_rank(&r1, ZETA_RANK_TOL),
        numerical_rank(&r2, ZETA_RANK_TOL),
        tr,
    ))
}

/// Gram–Schmidt of `|Ψ(A,X)⟩, |Ψ(A,Y)⟩` in state space, both normalized.
/// The states are linear in the boundary, so the result is again a boundary pair.
pub fn orthogonalize_boundaries(a: &MpsTensor, x: &CMat, y: &CMat, n: usize) -> Result<(CMat, CMat)> {
    let chain = MixedChain::new(a, a, n)?;
    let en = chain.power(n);
    let inner = |u: &CMat, v: &CMat| linalg::trace(&(&en * seam(u, v)));
    let nx = inner(x, x).re;
    if nx <= 0.0 {
        return Err(Error::Invalid("X gives the zero state".into()));
    }
    let x = x / c64(nx.sqrt(), 0.0);
    let y = y - &x * inner(&x, y);
    let ny = inner(&y, &y).re;
    if ny <= 1e-24 {
        return Err(Error::Invalid("Y is parallel to X in state space".into()));
    }
    Ok((x, y / c64(ny.sqrt(), 0.0)))
}

/// Reduced states of boundary-varied MPS on the region `{n−Δ, …, n−1} ∪ {0, …, Δ−1}`,
/// evaluated through transfer matrices.
///
/// With `G[(b,c),(b',c')] = (E^{n−2Δ})[b'D+b, c'D+c]` and
/// `C_XY[(b,c),(b',c')] = T[c'D+c, b'D+b]`, `T = E^Δ(conj(Y)⊗X)E^Δ`:
/// `tr(ρ_Xρ_Y) = Σ (G conj(C_XY) G) ∘ C_XY` and the nonzero spectrum of `ρ_X`
/// is that of `G^{1/2} C_XXᵀ G^{1/2}`.
pub struct BoundaryRegion {
    d: usize,
    g: CMat,
    g_sqrt: CMat,
    e_delta: CMat,
}

impl BoundaryRegion {
    pub fn new(a: &MpsTensor, n: usize, delta: usize) -> Result<Self> {
        if 2 * delta > n || delta == 0 {
            return Err(Error::Invalid(format!("Δ = {delta} needs 1 ≤ 2Δ ≤ n = {n}")));
        }
        let e = transfer_matrix(a, a)?;
        let cache = PowerCache::new(&e, n);
        let d = a.bond_dim;
        let em = cache.pow(n - 2 * delta);
        let g = CMat::from_fn(d * d, d * d, |u, v| {
            let (b, c) = (u / d, u % d);
            let (bp, cp) = (v / d, v % d);
            em[(bp * d + b, cp * d + c)]
        });
        let g = (&g + g.adjoint()) * c64(0.5, 0.0);
        let g_sqrt = linalg::psd_sqrt(&g);
        Ok(Self {
            d,
            g,
            g_sqrt,
            e_delta: cache.pow(delta),
        })
    }

    fn c_matrix(&self, x: &CMat, y: &CMat) -> CMat {
        let d = self.d;
        let t = &self.e_delta * seam(y, x) * &self.e_delta;
        CMat::from_fn(d * d, d * d, |u, v| {
            let (b, c) = (u / d, u % d);
            let (bp, cp) = (v / d, v % d);
            t[(cp * d + c, bp * d + b)]
        })
    }

    /// `tr(ρ_X ρ_Y)`.
    pub fn trace_overlap(&self, x: &CMat, y: &CMat) -> f64 {
        let c = self.c_matrix(x, y);
        let inner = &self.g * c.map(|v| v.conj()) * &self.g;
        inner.zip_map(&c, |a, b| a * b).iter().sum::<C64>().re
    }

    /// Nonzero spectrum carrier of `ρ_X`, Hermitian PSD of size `D²`.
    pub fn spectrum_carrier(&self, x: &CMat) -> CMat {
        let c = self.c_matrix(x, x);
        let m = &self.g_sqrt * c.transpose() * &self.g_sqrt;
        (&m + m.adjoint()) * c64(0.5, 0.0)
    }

    pub fn rank(&self, x: &CMat) -> usize {
        let (vals, _) = hermitian_eigen(&self.spectrum_carrier(x));
        let top = vals.iter().copied().fold(0.0, f64::max);
        vals.iter().filter(|&&v| v > ZETA_RANK_TOL * top).count()
    }

    pub fn trace(&self, x: &CMat) -> f64 {
        linalg::trace(&self.spectrum_carrier(x)).re
    }
}

/// Sites of the boundary-straddling region, last `Δ` then first `Δ`.
pub fn boundary_region(n: usize, delta: usize) -> Vec<usize> {
    (n - delta..n).chain(0..delta).collect()
}

/// ζ on the boundary region through the transfer route.
pub fn necessary_check_transfer(a: &MpsTensor, x: &CMat, y: &CMat, n: usize, delta: usize) -> Result<RefutationRecord> {
    let region = BoundaryRegion::new(a, n, delta)?;
    let tr = region.trace_overlap(x, y).max(0.0);
    let mut sites = boundary_region(n, delta);
    sites.sort_unstable();
    Ok(RefutationRecord::from_parts(sites, region.rank(x), region.rank(y), tr))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NogoRow {
    pub n: usize,
    pub delta: usize,
    pub trace_overlap: f64,
    pub zeta: f64,
    pub rank_x: usize,
    pub rank_y: usize,
    pub boundary_norm_x: f64,
    pub boundary_norm_y: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NogoFit {
    pub n: usize,
    /// Semi-log fit of `tr(ρ_Xρ_Y)` against `Δ`; `None` with fewer than 3 usable points.
    pub fit: Option<FitResult>,
    /// `½ log λ₂ + 0.1`.
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NogoResult {
    pub lambda2: f64,
    pub rows: Vec<NogoRow>,
    pub fits: Vec<NogoFit>,
}

/// Values at or below this are excluded from the decay fit as round-off.
pub const NOGO_FLOOR: f64 = 1e-12;

/// Decay of `tr(ρ_Xρ_Y)` with `Δ` on each ring size, for orthonormalized boundaries.
pub fn nogo_experiment(
    a: &MpsTensor,
    x: &CMat,
    y: &CMat,
    n_grid: &[usize],
    delta_grid: &[usize],
) -> Result<NogoResult> {
    if n_grid.is_empty() || delta_grid.is_empty() {
        return Err(Error::Invalid("no-go grids must be non-empty".into()));
    }
    let report = is_injective(a, DEFAULT_GAP_TOL);
    if !report.injective {
        return Err(Error::NotPrimitive(format!(
            "transfer gap {:.3e}, minimal fixed-point eigenvalue {:.3e}",
            (report.rho - report.lambda2) / report.rho,
            report.min_fixed_eigenvalue
        )));
    }
    let a = mps::normalize_spectral_radius(a)?;
    let lambda2 = report.lambda2 / report.rho;
    let per_n = n_grid
        .to_vec()
        .into_par_iter()
        .map(|n| -> Result<Vec<NogoRow>> {
            let (xo, yo) = orthogonalize_boundaries(&a, x, y, n)?;
            let mut rows = Vec::with_capacity(delta_grid.len());
            for &delta in delta_grid {
                let rec = necessary_check_transfer(&a, &xo, &yo, n, delta)?;
                rows.push(NogoRow {
                    n,
                    delta,
                    trace_overlap: rec.trace_overlap,
                    zeta: rec.zeta,
                    rank_x: rec.rank1,
                    rank_y: rec.rank2,
                    boundary_norm_x: xo.norm(),
                    boundary_norm_y: yo.norm(),
                });
            }
            Ok(rows)
        })
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for r in per_n {
        rows.extend(r?);
    }
    let bound = 0.5 * lambda2.ln() + 0.1;
    let fits = n_grid
        .iter()
        .map(|&n| {
            let pts: Vec<&NogoRow> = rows
                .iter()
                .filter(|r| r.n == n && r.trace_overlap > NOGO_FLOOR)
                .collect();
            let fit = if pts.len() >= 3 {
                let xs: Vec<f64> = pts.iter().map(|r| r.delta as f64).collect();
                let ys: Vec<f64> = pts.iter().map(|r| r.trace_overlap).collect();
                Some(fit_log_linear(&xs, &ys)?)
            } else {
                None
            };
            let within_bound = fit.as_ref().is_some_and(|f| f.slope <= bound);
            Ok(NogoFit {
                n,
                fit,
                bound,
                within_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NogoResult { lambda2, rows, fits })
}

/// Random injective tensor with a Gaussian boundary pair, the standard no-go input.
pub fn random_boundary_instance(p: usize, d: usize, seed: u64) -> Result<(MpsTensor, CMat, CMat)> {
    let a = mps::random_injective_mps(p, d, seed)?;
    let mut g = rng::stream(seed, 2);
    let x = rng::complex_gaussian_matrix(&mut g, d, d);
    let y = rng::complex_gaussian_matrix(&mut g, d, d);
    Ok((a, x, y))
}

/// Whether a certificate and a refutation contradict each other.
pub fn conflicts(cert: &CodeCertificate, refutation: &RefutationRecord) -> bool {
    refutation.region.len() <= cert.d && refutation.excludes(cert.epsilon, cert.delta)
}
