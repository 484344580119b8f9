//! Heisenberg-XXX magnon code.
//!
//! Basis convention: `|1⟩` is spin up, `σ₋ = |0⟩⟨1|` flips a spin down, and
//! `S₃ = ½Σ(|1⟩⟨1| − |0⟩⟨0|)`. The one-magnon state is
//! `|Ψ⟩ = Σ_j ω^j σ₋_j|1…1⟩` (0-based `j`) and its descendants are
//! `|Ψ_s⟩ = S₋^s|Ψ⟩`.
//!
//! **ω = e^{2πi/n} depends on n.** Every tensor here is rebuilt per ring
//! length; reusing the tensors of one `n` on another ring gives a different,
//! non-translation-invariant state.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_exponent, FitResult};
use crate::linalg::{
    self, apply_local, c64, identity, jordan_profile_seeded, kron, kron_all, matrix_unit, op_norm, pauli_string, CMat,
    CVec, JordanProfile, C64, DEFAULT_CLUSTER_REL_TOL, DEFAULT_RANK_TOL, DENSE_CAP, ONE, ZERO,
};
use crate::mps::{self, seam, MixedChain, MpoTensor, MpsHandle, MpsTensor, StateHandle};
use crate::par::*;
use crate::rng;

/// Largest ring for which [`xxx_hamiltonian`] builds the dense matrix.
pub const HAMILTONIAN_MAX_SITES: usize = 12;

/// Number of seeded random operators in the scaling experiments.
pub const SCALING_SAMPLES: usize = 64;

/// Values below this are treated as exact zeros in scaling fits.
pub const ZERO_FLOOR: f64 = 1e-12;

pub fn omega(n: usize) -> C64 {
    linalg::phase(2.0 * PI / n as f64)
}

pub fn sigma_minus() -> CMat {
    matrix_unit(2, 0, 1)
}

pub fn sigma_plus() -> CMat {
    matrix_unit(2, 1, 0)
}

/// Local `S₃` term `½(|1⟩⟨1| − |0⟩⟨0|)`.
pub fn s3_local() -> CMat {
    CMat::from_diagonal(&CVec::from_vec(vec![c64(-0.5, 0.0), c64(0.5, 0.0)]))
}

fn check_sites(n: usize) -> Result<()> {
    if n > 20 || n < 2 {
        return Err(Error::DenseCap {
            requested: 1u128 << n.min(127),
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

/// Sum of the single-site operator `op` over all sites.
pub fn apply_total(psi: &CVec, op: &CMat, n: usize) -> Result<CVec> {
    let mut out = CVec::zeros(psi.len());
    for k in 0..n {
        out += apply_local(psi, op, &[k], n, 2)?;
    }
    Ok(out)
}

/// Matrix-free `H ψ` with `H = (n/4)I − ½Σ_m F_{m,m+1}`, `F` the flip operator.
pub fn apply_xxx_hamiltonian(psi: &CVec, n: usize) -> Result<CVec> {
    check_sites(n)?;
    let dim = 1usize << n;
    if psi.len() != dim {
        return Err(Error::Dimension(format!(
            "state has length {}, expected {dim}",
            psi.len()
        )));
    }
    let mut out = psi * c64(n as f64 / 4.0, 0.0);
    for m in 0..n {
        let (a, b) = (n - 1 - m, n - 1 - (m + 1) % n);
        for idx in 0..dim {
            let (ba, bb) = ((idx >> a) & 1, (idx >> b) & 1);
            let swapped = if ba == bb { idx } else { idx ^ (1 << a) ^ (1 << b) };
            out[swapped] -= psi[idx] * 0.5;
        }
    }
    Ok(out)
}

/// Dense `H = −¼Σ_m(σˣσˣ + σʸσʸ + σᶻσᶻ)_{m,m+1}` on a periodic ring.
pub fn xxx_hamiltonian(n: usize) -> Result<CMat> {
    if n > HAMILTONIAN_MAX_SITES || n < 2 {
        return Err(Error::DenseCap {
            requested: 1u128 << (2 * n.min(63)),
            cap: 1 << (2 * HAMILTONIAN_MAX_SITES),
        });
    }
    let dim = 1usize << n;
    let mut h = CMat::zeros(dim, dim);
    for idx in 0..dim {
        h[(idx, idx)] += c64(n as f64 / 4.0, 0.0);
        for m in 0..n {
            let (a, b) = (n - 1 - m, n - 1 - (m + 1) % n);
            let (ba, bb) = ((idx >> a) & 1, (idx >> b) & 1);
            let swapped = if ba == bb { idx } else { idx ^ (1 << a) ^ (1 << b) };
            h[(swapped, idx)] -= c64(0.5, 0.0);
        }
    }
    Ok(h)
}

/// Magnon tensors `A₀ = |1⟩⟨0|`, `A₁ = diag(1, ω)` and boundary `X = |0⟩⟨1|`.
pub fn magnon_mps(n: usize) -> (MpsTensor, CMat) {
    let a0 = matrix_unit(2, 1, 0);
    let a1 = CMat::from_diagonal(&CVec::from_vec(vec![ONE, omega(n)]));
    (MpsTensor::new(vec![a0, a1]).expect("2x2 tensors"), matrix_unit(2, 0, 1))
}

/// Bond-2 MPO for `S₋`: `O_{0,0} = O_{1,1} = I`, `O_{0,1} = |1⟩⟨0|`, boundary `|0⟩⟨1|`.
pub fn lowering_mpo() -> (MpoTensor, CMat) {
    let mats = vec![identity(2), matrix_unit(2, 1, 0), CMat::zeros(2, 2), identity(2)];
    (MpoTensor::new(2, mats).expect("2x2 blocks"), matrix_unit(2, 0, 1))
}

/// Spin-`s/2` raising ladder `J₊` in the basis `|a⟩ = |s/2, a − s/2⟩`:
/// `J₊[a+1, a] = √((a+1)(s−a))`.
pub fn ladder(s: usize) -> CMat {
    let mut j = CMat::zeros(s + 1, s + 1);
    for a in 0..s {
        j[(a + 1, a)] = c64((((a + 1) * (s - a)) as f64).sqrt(), 0.0);
    }
    j
}

/// Bond-`(s+1)` MPO for `S₋^s`: `Õ_{0,0} = Õ_{1,1} = I`, `Õ_{0,1} = J₊`,
/// `Õ_{1,0} = 0`, boundary `|0⟩⟨s|`.
pub fn compressed_mpo(s: usize) -> (MpoTensor, CMat) {
    let i = identity(s + 1);
    let mats = vec![i.clone(), ladder(s), CMat::zeros(s + 1, s + 1), i];
    (
        MpoTensor::new(2, mats).expect("square blocks"),
        matrix_unit(s + 1, 0, s),
    )
}

fn check_magnetization(n: usize, s: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Invalid(format!("magnon ring needs n ≥ 3, got {n}")));
    }
    if s + 2 > n {
        return Err(Error::Invalid(format!("magnetization s = {s} outside 0..={}", n - 2)));
    }
    Ok(())
}

/// Descendant tensor `Õ_s ⋄ A` with boundary `X̃_s ⊗ X` (MPO bond leading).
pub fn descendant_mps(n: usize, s: usize) -> (MpsTensor, CMat) {
    let (a, x) = magnon_mps(n);
    let (o, y) = compressed_mpo(s);
    (o.apply(&a).expect("matching physical dimension"), kron(&y, &x))
}

/// `‖Ψ_s‖² = n (n−2)! s! / (n−2−s)!`.
pub fn exact_norm_squared(n: usize, s: usize) -> Result<f64> {
    check_magnetization(n, s)?;
    let mut v = n as f64;
    for k in 0..s {
        v *= ((k + 1) * (n - 2 - k)) as f64;
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Dense,
    Transfer,
}

/// Normalized `|ψ_s⟩` on `n` sites.
pub fn magnon_state(n: usize, s: usize, representation: Representation) -> Result<StateHandle> {
    let norm = exact_norm_squared(n, s)?.sqrt();
    let (t, x) = descendant_mps(n, s);
    let handle = MpsHandle {
        tensor: t,
        boundary: x,
        scale: 1.0 / norm,
    };
    Ok(match representation {
        Representation::Dense => StateHandle::Dense(handle.dense(n)?),
        Representation::Transfer => StateHandle::Transfer(handle),
    })
}

/// A set of normalized descendants on one ring.
#[derive(Clone, Debug)]
pub struct MagnonBasis {
    pub n: usize,
    pub magnetizations: Vec<usize>,
    pub representation: Representation,
    pub states: Vec<StateHandle>,
}

impl MagnonBasis {
    pub fn new(n: usize, magnetizations: &[usize], representation: Representation) -> Result<Self> {
        let states = magnetizations
            .iter()
            .map(|&s| magnon_state(n, s, representation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            magnetizations: magnetizations.to_vec(),
            representation,
            states,
        })
    }
}

/// `E_{r,s}` with spectrum data.
#[derive(Clone, Debug)]
pub struct MagnonTransfer {
    pub r: usize,
    pub s: usize,
    pub n: usize,
    /// Ordered as `C² ⊗ C² ⊗ C^{r+1} ⊗ C^{s+1}` (bra bond, ket bond, bra MPO, ket MPO).
    pub matrix: CMat,
    pub jordan: JordanProfile,
}

impl MagnonTransfer {
    /// Diagonal of the (lower-triangular) matrix, i.e. its eigenvalues.
    pub fn spectrum(&self) -> Vec<C64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// Multiplicities of `(1, ω, ω̄)` within `tol`.
    pub fn multiplicities(&self, tol: f64) -> (usize, usize, usize) {
        let w = omega(self.n);
        let count = |z: C64| self.spectrum().iter().filter(|&&v| (v - z).norm() <= tol).count();
        (count(ONE), count(w), count(w.conj()))
    }
}

/// `E_{r,s} = Ā₀⊗A₀⊗I⊗I + Ā₁⊗A₁⊗I⊗I + Ā₀⊗A₁⊗I⊗J₊ + Ā₁⊗A₀⊗J₊⊗I + Ā₁⊗A₁⊗J₊⊗J₊`.
pub fn magnon_transfer_matrix(r: usize, s: usize, n: usize) -> CMat {
    let (a, _) = magnon_mps(n);
    let bar = |k: usize| a.matrices[k].map(|v| v.conj());
    let (ir, is) = (identity(r + 1), identity(s + 1));
    let (jr, js) = (ladder(r), ladder(s));
    let a0 = &a.matrices[0];
    let a1 = &a.matrices[1];
    kron_all([&bar(0), a0, &ir, &is])
        + kron_all([&bar(1), a1, &ir, &is])
        + kron_all([&bar(0), a1, &ir, &js])
        + kron_all([&bar(1), a0, &jr, &is])
        + kron_all([&bar(1), a1, &jr, &js])
}

/// `E_{r,s}` with its Jordan profile, seeded with `{1, ω, ω̄}`.
pub fn magnon_transfer(r: usize, s: usize, n: usize) -> Result<MagnonTransfer> {
    if n < 3 {
        return Err(Error::Invalid(format!("magnon ring needs n ≥ 3, got {n}")));
    }
    let matrix = magnon_transfer_matrix(r, s, n);
    let dim = matrix.nrows();
    for i in 0..dim {
        for j in i + 1..dim {
            if matrix[(i, j)] != ZERO {
                return Err(Error::Invalid(format!(
                    "E_{{{r},{s}}} has a nonzero entry above the diagonal at ({i}, {j})"
                )));
            }
        }
    }
    let w = omega(n);
    let tol = DEFAULT_CLUSTER_REL_TOL * linalg::inf_norm(&matrix);
    let jordan = jordan_profile_seeded(&matrix, &[ONE, w, w.conj()], tol, DEFAULT_RANK_TOL);
    Ok(MagnonTransfer {
        r,
        s,
        n,
        matrix,
        jordan,
    })
}

/// Chain `⟨Ψ_r|·|Ψ_s⟩` with the boundary seam and the normalization `1/(‖Ψ_r‖‖Ψ_s‖)`.
pub struct MagnonChain {
    pub chain: MixedChain,
    pub seam: CMat,
    pub scale: f64,
}

impl MagnonChain {
    pub fn new(n: usize, r: usize, s: usize) -> Result<Self> {
        let scale = 1.0 / (exact_norm_squared(n, r)? * exact_norm_squared(n, s)?).sqrt();
        let (tr, xr) = descendant_mps(n, r);
        let (ts, xs) = descendant_mps(n, s);
        Ok(Self {
            chain: MixedChain::new(&tr, &ts, n)?,
            seam: seam(&xr, &xs),
            scale,
        })
    }

    pub fn element(&self, f: &CMat, support: &[usize]) -> Result<C64> {
        Ok(self.chain.element(f, support, &self.seam)? * self.scale)
    }
}

/// `⟨ψ_r|F_A ⊗ I|ψ_s⟩`; gaps between support sites become powers of the transfer operator.
pub fn magnon_matrix_element(n: usize, r: usize, s: usize, f: &CMat, support: &[usize]) -> Result<C64> {
    MagnonChain::new(n, r, s)?.element(f, support)
}

/// `⟨ψ₀|F_A|ψ₀⟩` after moving the support to the prefix `0..d`.
///
/// On the one-magnon sector the permutation sending `a_t ↦ t` acts as the
/// diagonal phase `⊗_t Z^{t − a_t}` (`Z = diag(1, ω)`) on the prefix, so the
/// element is `⟨ψ₀|D† F' D|ψ₀⟩` with `F'` the factor-sorted `F`.
pub fn prefix_reduced_element(n: usize, f: &CMat, support: &[usize]) -> Result<C64> {
    let support = mps::normalize_support(support, n)?;
    let d = support.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by_key(|&k| support[k]);
    let sorted: Vec<usize> = order.iter().map(|&k| support[k]).collect();
    // F with its factors permuted into increasing site order.
    let dim = 1usize << d;
    let f_sorted = CMat::from_fn(dim, dim, |i, j| {
        f[(inverse_bits(i, &order, d), inverse_bits(j, &order, d))]
    });
    let w = omega(n);
    let phases: Vec<CMat> = sorted
        .iter()
        .enumerate()
        .map(|(t, &a)| {
            let e = t as i64 - a as i64;
            CMat::from_diagonal(&CVec::from_vec(vec![ONE, w.powi(e as i32)]))
        })
        .collect();
    let dmat = kron_all(&phases);
    let reduced = dmat.adjoint() * f_sorted * dmat;
    let prefix: Vec<usize> = (0..d).collect();
    magnon_matrix_element(n, 0, 0, &reduced, &prefix)
}

/// Index in `F`'s own factor order for a sorted-order index.
fn inverse_bits(idx: usize, order: &[usize], d: usize) -> usize {
    let mut out = 0;
    for (t, &k) in order.iter().enumerate() {
        let bit = (idx >> (d - 1 - t)) & 1;
        out |= bit << (d - 1 - k);
    }
    out
}

/// `SCALING_SAMPLES` seeded Gaussian operators of unit operator norm on `d` sites,
/// followed by all `4^d` Pauli strings when `d ≤ 2`.
pub fn sample_operators(d: usize, seed: u64) -> Vec<CMat> {
    let dim = 1usize << d;
    let mut ops: Vec<CMat> = (0..SCALING_SAMPLES)
        .map(|k| {
            let mut g = rng::stream(seed, k as u64);
            let m = rng::complex_gaussian_matrix(&mut g, dim, dim);
            let norm = op_norm(&m);
            m / c64(norm, 0.0)
        })
        .collect();
    if d <= 2 {
        ops.extend((0..4usize.pow(d as u32)).map(|i| pauli_string(i, d)));
    }
    ops
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitGroup {
    /// `max_F |⟨ψ_r|F|ψ_s⟩|`.
    OffDiagonal,
    /// `max_F max_{r<s≤s₀} |⟨ψ_s|F|ψ_s⟩ − ⟨ψ_r|F|ψ_r⟩|`.
    DiagonalDifference,
}

impl FitGroup {
    pub fn label(self) -> &'static str {
        match self {
            Self::OffDiagonal => "off_diagonal",
            Self::DiagonalDifference => "diagonal_difference",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub max_abs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingResult {
    pub group: FitGroup,
    pub r: usize,
    pub s: usize,
    pub d: usize,
    pub seed: u64,
    pub points: Vec<ScalingPoint>,
    /// `None` when every value is below [`ZERO_FLOOR`].
    pub fit: Option<FitResult>,
}

impl ScalingResult {
    pub fn all_zero(&self) -> bool {
        self.points.iter().all(|p| p.max_abs < ZERO_FLOOR)
    }
}

fn check_grid(n_grid: &[usize], min_n: usize) -> Result<()> {
    let mut sorted = n_grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 4 || sorted.len() != n_grid.len() {
        return Err(Error::Invalid(format!(
            "scaling grid needs at least 4 distinct sizes, got {n_grid:?}"
        )));
    }
    if sorted[0] < min_n {
        return Err(Error::Invalid(format!(
            "grid value {} is below the minimum {min_n}",
            sorted[0]
        )));
    }
    Ok(())
}

fn finish(
    group: FitGroup,
    r: usize,
    s: usize,
    d: usize,
    seed: u64,
    points: Vec<ScalingPoint>,
) -> Result<ScalingResult> {
    let mut result = ScalingResult {
        group,
        r,
        s,
        d,
        seed,
        points,
        fit: None,
    };
    if !result.all_zero() {
        let x: Vec<f64> = result.points.iter().map(|p| p.n as f64).collect();
        let y: Vec<f64> = result.points.iter().map(|p| p.max_abs).collect();
        result.fit = Some(fit_exponent(&x, &y)?);
    }
    Ok(result)
}

/// Worst sampled `|⟨ψ_r|F|ψ_s⟩|` over `F` on the prefix `0..d`, per `n`, and
/// its log–log slope.
pub fn magnon_scaling_experiment(r: usize, s: usize, d: usize, n_grid: &[usize], seed: u64) -> Result<ScalingResult> {
    check_grid(n_grid, r.max(s) + 2)?;
    let ops = sample_operators(d, seed);
    let support: Vec<usize> = (0..d).collect();
    let points = n_grid
        .to_vec()
        .into_par_iter()
        .map(|n| {
            let chain = MagnonChain::new(n, r, s)?;
            let mut max_abs: f64 = 0.0;
            for f in &ops {
                max_abs = max_abs.max(chain.element(f, &support)?.norm());
            }
            Ok(ScalingPoint { n, max_abs })
        })
        .collect::<Vec<Result<ScalingPoint>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    finish(FitGroup::OffDiagonal, r, s, d, seed, points)
}

/// Worst sampled `|⟨ψ_s|F|ψ_s⟩ − ⟨ψ_r|F|ψ_r⟩|` over `r < s ≤ s₀` and `F`, per `n`.
pub fn diagonal_difference_experiment(s0: usize, d: usize, n_grid: &[usize], seed: u64) -> Result<ScalingResult> {
    check_grid(n_grid, s0 + 2)?;
    let ops = sample_operators(d, seed);
    let support: Vec<usize> = (0..d).collect();
    let points = n_grid
        .to_vec()
        .into_par_iter()
        .map(|n| {
            let chains = (0..=s0)
                .map(|s| MagnonChain::new(n, s, s))
                .collect::<Result<Vec<_>>>()?;
            let mut max_abs: f64 = 0.0;
            for f in &ops {
                let diag = chains
                    .iter()
                    .map(|c| c.element(f, &support))
                    .collect::<Result<Vec<_>>>()?;
                for s in 0..=s0 {
                    for r in 0..s {
                        max_abs = max_abs.max((diag[s] - diag[r]).norm());
                    }
                }
            }
            Ok(ScalingPoint { n, max_abs })
        })
        .collect::<Vec<Result<ScalingPoint>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    finish(FitGroup::DiagonalDifference, 0, s0, d, seed, points)
}

/// `‖Ψ_s^{n−d}‖² / ‖Ψ_s^n‖²`, the weight of `|1⟩^{⊗d}` on the first `d` sites
/// of `ψ_s`. `Ψ_s^k` uses the tensors of the `n`-site ring on `k` sites.
pub fn reduced_overlap_check(n: usize, s: usize, d: usize) -> Result<f64> {
    let full = exact_norm_squared(n, s)?;
    if d > n {
        return Err(Error::Invalid(format!("d = {d} exceeds n = {n}")));
    }
    if d == 0 {
        return Ok(1.0);
    }
    let k = n - d;
    if k == 0 {
        return Ok(0.0);
    }
    let (t, x) = descendant_mps(n, s);
    let part = mps::overlap_transfer(&t, &x, &t, &x, k)?.re;
    Ok(part / full)
}

/// Same weight from the dense reduced density matrix.
pub fn reduced_overlap_dense(n: usize, s: usize, d: usize) -> Result<f64> {
    let psi = magnon_state(n, s, Representation::Dense)?.to_dense(n)?;
    if d == 0 {
        return Ok(psi.norm_squared());
    }
    let keep: Vec<usize> = (0..d).collect();
    let rho = linalg::reduced_density(&psi, &vec![2; n], &keep)?;
    let all_up = (1usize << d) - 1;
    Ok(rho[(all_up, all_up)].re)
}

/// Smallest `C` with `value ≥ 1 − C·ds/n` over the grid.
pub fn fit_overlap_constant(n_grid: &[usize], s: usize, d: usize) -> Result<f64> {
    if s == 0 || d == 0 {
        return Err(Error::Invalid("the bound needs s ≥ 1 and d ≥ 1".into()));
    }
    let mut c: f64 = 0.0;
    for &n in n_grid {
        let v = reduced_overlap_check(n, s, d)?;
        c = c.max((1.0 - v) * n as f64 / (d * s) as f64);
    }
    Ok(c)
}
