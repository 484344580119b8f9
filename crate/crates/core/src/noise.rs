//! Convex-combination d-local noise and projector detection.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aqedc::CodeBasis;
use crate::error::{Error, Result};
use crate::linalg::{apply_local, c64, hermitian_eigen, identity, kron_all, op_norm, pauli, CMat, CVec, C64};
use crate::par::*;
use crate::rng;

/// Branches lighter than this are dropped from ensembles.
pub const BRANCH_FLOOR: f64 = 1e-14;
/// Acceptance below this leaves the fidelity undefined.
pub const ACCEPTANCE_GUARD: f64 = 1e-14;
/// Exact completeness check up to this many sites in the union of supports.
const COMPLETENESS_EXACT_SITES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportMode {
    /// Windows of consecutive sites on the ring.
    Connected,
    /// Any site subset.
    Arbitrary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausTerm {
    pub weight: f64,
    /// Acts on `support` in the listed order, first site most significant.
    pub kraus: CMat,
    pub support: Vec<usize>,
}

/// `𝒩(ρ) = Σ_j p_j F_j ρ F_j†` on `n` qudits of dimension `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseChannel {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub terms: Vec<KrausTerm>,
}

impl NoiseChannel {
    pub fn new(n: usize, d: usize, p: usize, terms: Vec<KrausTerm>) -> Result<Self> {
        let ch = Self { n, d, p, terms };
        ch.validate()?;
        Ok(ch)
    }

    pub fn identity(n: usize, p: usize) -> Self {
        Self {
            n,
            d: 0,
            p,
            terms: vec![KrausTerm {
                weight: 1.0,
                kraus: identity(1),
                support: vec![],
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Invalid("channel has no terms".into()));
        }
        let total: f64 = self.terms.iter().map(|t| t.weight).sum();
        if self.terms.iter().any(|t| !(t.weight >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!(
                "weights must be nonnegative and sum to 1, got {total}"
            )));
        }
        for t in &self.terms {
            if t.support.len() > self.d {
                return Err(Error::Invalid(format!(
                    "support {:?} exceeds locality {}",
                    t.support, self.d
                )));
            }
            let mut s = t.support.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != t.support.len() || s.last().is_some_and(|&v| v >= self.n) {
                return Err(Error::Dimension(format!(
                    "invalid support {:?} for {} sites",
                    t.support, self.n
                )));
            }
            let dim = self.p.pow(t.support.len() as u32);
            if t.kraus.nrows() != dim || t.kraus.ncols() != dim {
                return Err(Error::Dimension(format!(
                    "Kraus block is {}x{}, support needs {dim}",
                    t.kraus.nrows(),
                    t.kraus.ncols()
                )));
            }
            let norm = op_norm(&t.kraus);
            if norm > 1.0 + 1e-10 {
                return Err(Error::Invalid(format!("Kraus operator norm {norm} exceeds 1")));
            }
        }
        Ok(())
    }

    /// Largest eigenvalue of `Σ p_j F_j†F_j`.
    ///
    /// Exact on the union of supports when it has at most ten sites, otherwise
    /// the upper bound `Σ p_j ‖F_j‖²`.
    pub fn completeness_max_eigenvalue(&self) -> Result<f64> {
        let mut union: Vec<usize> = self.terms.iter().flat_map(|t| t.support.iter().copied()).collect();
        union.sort_unstable();
        union.dedup();
        if union.len() > COMPLETENESS_EXACT_SITES {
            return Ok(self.terms.iter().map(|t| t.weight * op_norm(&t.kraus).powi(2)).sum());
        }
        let m = union.len();
        let dim = self.p.pow(m as u32);
        let mut total = CMat::zeros(dim, dim);
        for t in &self.terms {
            let local: Vec<usize> = t.support.iter().map(|s| union.binary_search(s).unwrap()).collect();
            let ff = t.kraus.adjoint() * &t.kraus;
            let full = embed(&ff, &local, m, self.p)?;
            total += full * c64(t.weight, 0.0);
        }
        let (vals, _) = hermitian_eigen(&((&total + total.adjoint()) * c64(0.5, 0.0)));
        Ok(vals.last().copied().unwrap_or(0.0))
    }

    pub fn to_record(&self) -> ChannelRecord {
        ChannelRecord {
            n: self.n,
            d: self.d,
            p: self.p,
            terms: self
                .terms
                .iter()
                .map(|t| TermRecord {
                    weight: t.weight,
                    support: t.support.clone(),
                    dim: t.kraus.nrows(),
                    kraus: encode_matrix(&t.kraus),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &ChannelRecord) -> Result<Self> {
        let terms = rec
            .terms
            .iter()
            .map(|t| {
                Ok(KrausTerm {
                    weight: t.weight,
                    kraus: decode_matrix(&t.kraus, t.dim)?,
                    support: t.support.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rec.n, rec.d, rec.p, terms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(text)?)
    }
}

/// `op` on `local` sites of an `m`-site register, identity elsewhere.
fn embed(op: &CMat, local: &[usize], m: usize, p: usize) -> Result<CMat> {
    let dim = p.pow(m as u32);
    let mut out = CMat::zeros(dim, dim);
    for col in 0..dim {
        let mut e = CVec::zeros(dim);
        e[col] = c64(1.0, 0.0);
        let img = if local.is_empty() {
            e * op[(0, 0)]
        } else {
            apply_local(&e, op, local, m, p)?
        };
        out.set_column(col, &img);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub weight: f64,
    pub support: Vec<usize>,
    pub dim: usize,
    /// Row-major `(re, im)` little-endian `f64` pairs, base64.
    pub kraus: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub terms: Vec<TermRecord>,
}

fn encode_matrix(m: &CMat) -> String {
    let mut bytes = Vec::with_capacity(16 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            bytes.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            bytes.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    B64.encode(bytes)
}

fn decode_matrix(text: &str, dim: usize) -> Result<CMat> {
    let bytes = B64.decode(text).map_err(|e| Error::Format(e.to_string()))?;
    if bytes.len() != 16 * dim * dim {
        return Err(Error::Format(format!("{} bytes for a {dim}x{dim} block", bytes.len())));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    Ok(CMat::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        c64(f(k), f(k + 1))
    }))
}

/// Tensor product of Paulis `codes[i] ∈ {0,1,2,3}`.
fn pauli_product(codes: &[usize]) -> CMat {
    let mats: Vec<CMat> = codes.iter().map(|&c| pauli(c)).collect();
    kron_all(&mats)
}

/// All Pauli strings of weight `1..=d`, each on its exact support.
///
/// `Connected` keeps strings whose support fits in a window of `d` consecutive
/// ring sites; `Arbitrary` keeps all of them.
pub fn pauli_terms(n: usize, d: usize, mode: SupportMode) -> Vec<(CMat, Vec<usize>)> {
    let mut out = Vec::new();
    for w in 1..=d.min(n) {
        for support in subsets(n, w) {
            if mode == SupportMode::Connected && !fits_window(&support, n, d) {
                continue;
            }
            let count = 3usize.pow(w as u32);
            for code in 0..count {
                let codes: Vec<usize> = (0..w)
                    .map(|i| 1 + (code / 3usize.pow((w - 1 - i) as u32)) % 3)
                    .collect();
                out.push((pauli_product(&codes), support.clone()));
            }
        }
    }
    out
}

fn subsets(n: usize, w: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..w).collect();
    if w == 0 || w > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = w;
        while i > 0 && cur[i - 1] == n - w + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..w {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn fits_window(support: &[usize], n: usize, d: usize) -> bool {
    (0..n).any(|start| support.iter().all(|&s| (s + n - start) % n < d))
}

/// Uniform mixture of the given Pauli strings, optionally with the identity.
pub fn uniform_channel(
    n: usize,
    d: usize,
    ops: Vec<(CMat, Vec<usize>)>,
    include_identity: bool,
) -> Result<NoiseChannel> {
    let mut terms: Vec<KrausTerm> = ops
        .into_iter()
        .map(|(kraus, support)| KrausTerm {
            weight: 0.0,
            kraus,
            support,
        })
        .collect();
    if include_identity {
        terms.insert(
            0,
            KrausTerm {
                weight: 0.0,
                kraus: identity(1),
                support: vec![],
            },
        );
    }
    let w = 1.0 / terms.len() as f64;
    for t in &mut terms {
        t.weight = w;
    }
    NoiseChannel::new(n, d, 2, terms)
}

/// Every weight-`1..=d` Pauli string of the mode, uniformly weighted.
pub fn exhaustive_pauli_channel(n: usize, d: usize, mode: SupportMode, include_identity: bool) -> Result<NoiseChannel> {
    if d > n {
        return Err(Error::Invalid(format!("locality {d} exceeds {n} sites")));
    }
    if d == 0 {
        return Ok(NoiseChannel::identity(n, 2));
    }
    uniform_channel(n, d, pauli_terms(n, d, mode), include_identity)
}

/// `num_terms` seeded Pauli strings of weight at most `d`, uniform weights.
///
/// Each term draws a size-`d` support (a ring window or a uniform subset) and
/// an independent Pauli factor per site, identities included.
pub fn sample_pauli_channel(
    n: usize,
    d: usize,
    num_terms: usize,
    seed: u64,
    mode: SupportMode,
) -> Result<NoiseChannel> {
    if d > n {
        return Err(Error::Invalid(format!("locality {d} exceeds {n} sites")));
    }
    if num_terms == 0 {
        return Err(Error::Invalid("num_terms must be at least 1".into()));
    }
    if d == 0 {
        return Ok(NoiseChannel::identity(n, 2));
    }
    let w = 1.0 / num_terms as f64;
    let terms = (0..num_terms)
        .map(|k| {
            let mut g = rng::stream(seed, k as u64);
            let mut support: Vec<usize> = match mode {
                SupportMode::Connected => {
                    let start = g.random_range(0..n);
                    (0..d).map(|i| (start + i) % n).collect()
                }
                SupportMode::Arbitrary => rand::seq::index::sample(&mut g, n, d).into_iter().collect(),
            };
            support.sort_unstable();
            let codes: Vec<usize> = (0..d).map(|_| g.random_range(0..4)).collect();
            KrausTerm {
                weight: w,
                kraus: pauli_product(&codes),
                support,
            }
        })
        .collect();
    NoiseChannel::new(n, d, 2, terms)
}

/// `{(p_j‖F_jψ‖², F_jψ/‖F_jψ‖)}`, dropping branches below [`BRANCH_FLOOR`].
pub fn apply_channel(channel: &NoiseChannel, psi: &CVec) -> Result<Vec<(f64, CVec)>> {
    let mut out = Vec::with_capacity(channel.terms.len());
    for t in &channel.terms {
        let img = if t.support.is_empty() {
            psi * t.kraus[(0, 0)]
        } else {
            apply_local(psi, &t.kraus, &t.support, channel.n, channel.p)?
        };
        let norm2 = img.norm_squared();
        let mass = t.weight * norm2;
        if mass < BRANCH_FLOOR {
            continue;
        }
        out.push((mass, img / c64(norm2.sqrt(), 0.0)));
    }
    Ok(out)
}

/// Acceptance and post-measurement fidelity, with standard errors for sampled runs.
///
/// Acceptance is conditioned on the realized branch mass `Σ p_j‖F_jψ‖²`, which
/// is below one only for non-trace-preserving channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    /// Zero for the analytic evaluation.
    pub trials: usize,
    pub acceptance_rate: f64,
    pub acceptance_stderr: f64,
    /// `None` when acceptance is below [`ACCEPTANCE_GUARD`] or nothing was accepted.
    pub post_fidelity: Option<f64>,
    pub fidelity_stderr: f64,
    pub mass: f64,
}

/// Per-branch quantities in the code space.
#[derive(Clone, Debug)]
pub struct Branch {
    /// `p_j‖F_jψ‖²`.
    pub mass: f64,
    /// `‖PF_jψ‖² / ‖F_jψ‖²`.
    pub accept: f64,
    /// `|⟨ψ|F_jψ⟩|² / ‖PF_jψ‖²`, fidelity after acceptance.
    pub fidelity: f64,
}

/// Branch statistics from code-space blocks `⟨ψ_α|F_j|ψ_β⟩` and `⟨ψ_α|F_j†F_j|ψ_β⟩`,
/// valid for dense and transfer bases alike.
pub fn branches(basis: &CodeBasis, channel: &NoiseChannel, coeffs: &CVec) -> Result<Vec<Branch>> {
    check_coeffs(basis, coeffs)?;
    channel.validate()?;
    if channel.n != basis.n || channel.p != basis.p {
        return Err(Error::Dimension("channel and code act on different registers".into()));
    }
    let per = (&channel.terms)
        .into_par_iter()
        .map(|t| -> Result<Branch> {
            let m = basis.elements(&t.kraus, &t.support)?;
            let nn = basis.elements(&(t.kraus.adjoint() * &t.kraus), &t.support)?;
            let norm2 = coeffs.dotc(&(&nn * coeffs)).re.max(0.0);
            let proj = &m * coeffs;
            let pnorm2 = proj.norm_squared();
            let overlap = coeffs.dotc(&proj).norm_sqr();
            let accept = if norm2 > 0.0 { (pnorm2 / norm2).min(1.0) } else { 0.0 };
            let fidelity = if pnorm2 > 0.0 { (overlap / pnorm2).min(1.0) } else { 0.0 };
            Ok(Branch {
                mass: t.weight * norm2,
                accept,
                fidelity,
            })
        })
        .collect::<Vec<_>>();
    per.into_iter()
        .filter(|b| !matches!(b, Ok(b) if b.mass < BRANCH_FLOOR))
        .collect()
}

fn check_coeffs(basis: &CodeBasis, coeffs: &CVec) -> Result<()> {
    if coeffs.len() != basis.k() {
        return Err(Error::Dimension(format!(
            "{} coefficients for a code of dimension {}",
            coeffs.len(),
            basis.k()
        )));
    }
    if (coeffs.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid(format!("input state has norm {}", coeffs.norm())));
    }
    Ok(())
}

/// Exact `tr(P𝒩(ψ))` and `⟨ψ|ρ_{𝒩,P}|ψ⟩` for `ψ = Σ_α c_α ψ_α`.
pub fn detection_round(basis: &CodeBasis, channel: &NoiseChannel, coeffs: &CVec) -> Result<DetectionStats> {
    let bs = branches(basis, channel, coeffs)?;
    let mass: f64 = bs.iter().map(|b| b.mass).sum();
    let accepted: f64 = bs.iter().map(|b| b.mass * b.accept).sum();
    let faithful: f64 = bs.iter().map(|b| b.mass * b.accept * b.fidelity).sum();
    let acceptance = if mass > 0.0 { accepted / mass } else { 0.0 };
    Ok(DetectionStats {
        trials: 0,
        acceptance_rate: acceptance,
        acceptance_stderr: 0.0,
        post_fidelity: (acceptance >= ACCEPTANCE_GUARD).then(|| faithful / accepted),
        fidelity_stderr: 0.0,
        mass,
    })
}

/// Sample a branch by mass, measure `{P, I−P}`, record the fidelity on acceptance.
pub fn monte_carlo_detect(
    basis: &CodeBasis,
    channel: &NoiseChannel,
    coeffs: &CVec,
    trials: usize,
    seed: u64,
) -> Result<DetectionStats> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    let bs = branches(basis, channel, coeffs)?;
    let mass: f64 = bs.iter().map(|b| b.mass).sum();
    if bs.is_empty() {
        return Err(Error::Invalid("every branch has zero mass".into()));
    }
    let mut cumulative = Vec::with_capacity(bs.len());
    let mut acc = 0.0;
    for b in &bs {
        acc += b.mass / mass;
        cumulative.push(acc);
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(seed, t as u64);
            let u: f64 = g.random();
            let j = cumulative.partition_point(|&c| c < u).min(bs.len() - 1);
            let v: f64 = g.random();
            (v < bs[j].accept).then_some(bs[j].fidelity)
        })
        .collect::<Vec<Option<f64>>>();
    let mut hits = 0usize;
    let (mut s1, mut s2) = (0.0, 0.0);
    for f in outcomes.into_iter().flatten() {
        hits += 1;
        s1 += f;
        s2 += f * f;
    }
    let tf = trials as f64;
    let a = hits as f64 / tf;
    let (fid, fid_err) = if hits > 0 {
        let h = hits as f64;
        let mean = s1 / h;
        let var = if hits > 1 {
            ((s2 - h * mean * mean) / (h - 1.0)).max(0.0)
        } else {
            0.0
        };
        (Some(mean), (var / h).sqrt())
    } else {
        (None, 0.0)
    };
    Ok(DetectionStats {
        trials,
        acceptance_rate: a,
        acceptance_stderr: (a * (1.0 - a) / tf).sqrt(),
        post_fidelity: fid,
        fidelity_stderr: fid_err,
        mass,
    })
}

/// Seeded Haar-random coefficient vector on a `k`-dimensional code.
///
/// Draws from the last sub-stream of `seed`, away from the per-trial streams.
pub fn haar_code_state(k: usize, seed: u64) -> CVec {
    let mut g = rng::stream(seed, u64::MAX);
    let v = CVec::from_fn(k, |_, _| rng::complex_normal(&mut g));
    let norm = v.norm();
    v / c64(norm, 0.0)
}

/// Dense `Σ_α c_α ψ_α`.
pub fn code_state(basis: &CodeBasis, coeffs: &CVec) -> Result<CVec> {
    check_coeffs(basis, coeffs)?;
    let states = basis.dense_states()?;
    let mut out = CVec::zeros(states[0].len());
    for (c, s) in coeffs.iter().zip(&states) {
        out.axpy(*c, s, C64::new(1.0, 0.0));
    }
    Ok(out)
}

/// Group Pauli terms by support, for reporting.
pub fn supports_histogram(channel: &NoiseChannel) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for t in &channel.terms {
        *h.entry(t.support.len()).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn exhaustive_counts() {
        let ch = exhaustive_pauli_channel(4, 1, SupportMode::Arbitrary, false).unwrap();
        assert_eq!(ch.terms.len(), 12);
        let ch = exhaustive_pauli_channel(4, 1, SupportMode::Arbitrary, true).unwrap();
        assert_eq!(ch.terms.len(), 13);
        assert!((ch.terms[0].weight - 1.0 / 13.0).abs() < 1e-15);
        assert_eq!(pauli_terms(5, 2, SupportMode::Arbitrary).len(), 15 + 10 * 9);
        assert_eq!(pauli_terms(5, 2, SupportMode::Connected).len(), 15 + 5 * 9);
        assert!(exhaustive_pauli_channel(3, 4, SupportMode::Arbitrary, false).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_pauli_channel(8, 2, 20, 7, SupportMode::Arbitrary).unwrap();
        let b = sample_pauli_channel(8, 2, 20, 7, SupportMode::Arbitrary).unwrap();
        assert_eq!(a, b);
        let c = sample_pauli_channel(8, 3, 20, 7, SupportMode::Connected).unwrap();
        assert!(c.terms.iter().all(|t| fits_window(&t.support, 8, 3)));
        let id = sample_pauli_channel(8, 0, 5, 1, SupportMode::Connected).unwrap();
        assert_eq!(id.terms.len(), 1);
        assert!(sample_pauli_channel(3, 4, 5, 1, SupportMode::Connected).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ch = sample_pauli_channel(6, 2, 9, 3, SupportMode::Arbitrary).unwrap();
        let back = NoiseChannel::from_json(&ch.to_json().unwrap()).unwrap();
        assert_eq!(ch, back);
    }

    #[test]
    fn completeness() {
        let ch = exhaustive_pauli_channel(4, 2, SupportMode::Arbitrary, false).unwrap();
        assert!((ch.completeness_max_eigenvalue().unwrap() - 1.0).abs() < 1e-12);
        let g = 0.3f64;
        let damp = NoiseChannel::new(
            2,
            1,
            2,
            vec![
                KrausTerm {
                    weight: 0.5,
                    kraus: linalg::from_rows(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), ((1.0 - g).sqrt(), 0.0)]),
                    support: vec![0],
                },
                KrausTerm {
                    weight: 0.5,
                    kraus: linalg::from_rows(2, 2, &[(0.0, 0.0), (g.sqrt(), 0.0), (0.0, 0.0), (0.0, 0.0)]),
                    support: vec![0],
                },
            ],
        )
        .unwrap();
        assert!((damp.completeness_max_eigenvalue().unwrap() - 0.5).abs() < 1e-12);
    }
}
