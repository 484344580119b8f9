//! Excitation-ansatz states `|Φ_p(B;A)⟩ = Σ_j e^{ipj} |Φ_{j,p}⟩` on a ring of
//! `n` sites, where `Φ_{j,p}` carries `B(p)` on site `j` and `A` elsewhere,
//! with trace closure. Sites and `j` are 0-based.
//!
//! Matrix elements are evaluated two ways: the exact `(j, j')` double sum
//! with transfer insertions, and a bond-`2D` MPS whose upper-triangular
//! blocks generate the same superposition.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c64, devectorize, identity, kron, phase, trace, vectorize, CMat, CVec, C64, DENSE_CAP, ZERO,
};
use crate::mps::{
    self, apply_adjoint_map, canonicalize_with_gauge, dense_state, dense_state_sites, fixed_points, transfer_matrix,
    MpsHandle, MpsTensor, Window,
};
use crate::par::*;
use crate::rng;
use crate::serial::TensorRecord;

/// Smallest singular value below which the gauge solve switches to a pseudo-inverse.
pub const PINV_THRESHOLD: f64 = 1e-10;

/// An injective canonical tensor with gauge-fixed excitation tensors `B(p)`.
#[derive(Clone, Debug)]
pub struct ExcitationFamily {
    pub a: MpsTensor,
    /// Left fixed point ℓ (Λ in canonical form).
    pub left: CMat,
    /// Right fixed point r (the identity in canonical form).
    pub right: CMat,
    pub n: usize,
    pub momenta: Vec<f64>,
    /// `b_of_p[k]` belongs to `momenta[k]`.
    pub b_of_p: Vec<MpsTensor>,
    /// `(‖⟨⟨ℓ|E_B̃‖, ‖⟨⟨ℓ|E_{conj B̃}‖)` per stored momentum.
    pub gauge_residuals: Vec<(f64, f64)>,
}

/// Serializable record of a family: `n`, momenta, gauge residuals and tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub n: usize,
    pub momenta: Vec<f64>,
    pub gauge_residuals: Vec<[f64; 2]>,
    pub a: TensorRecord,
    pub b: Vec<TensorRecord>,
}

impl FamilyManifest {
    pub fn from_family(fam: &ExcitationFamily) -> Self {
        Self {
            n: fam.n,
            momenta: fam.momenta.clone(),
            gauge_residuals: fam.gauge_residuals.iter().map(|&(x, y)| [x, y]).collect(),
            a: TensorRecord::from_mps(&fam.a),
            b: fam.b_of_p.iter().map(TensorRecord::from_mps).collect(),
        }
    }

    /// Rebuilds the family as stored, without re-fixing the gauge.
    pub fn into_family(self) -> Result<ExcitationFamily> {
        let a = self.a.into_mps()?;
        let b_of_p = self
            .b
            .into_iter()
            .map(TensorRecord::into_mps)
            .collect::<Result<Vec<_>>>()?;
        if b_of_p.len() != self.momenta.len() {
            return Err(Error::Format("one B tensor per momentum expected".into()));
        }
        let fp = fixed_points(&a)?;
        let gauge_residuals = b_of_p.iter().map(|b| gauge_residuals_of(&a, b, &fp.left)).collect();
        Ok(ExcitationFamily {
            a,
            left: fp.left,
            right: fp.right,
            n: self.n,
            momenta: self.momenta,
            b_of_p,
            gauge_residuals,
        })
    }
}

/// Momentum `2πk/n`.
pub fn momentum(k: usize, n: usize) -> f64 {
    2.0 * PI * (k % n) as f64 / n as f64
}

/// Integer `k` with `p = 2πk/n`, if `p` is quantized.
pub fn quantized_index(p: f64, n: usize) -> Result<usize> {
    let k = p * n as f64 / (2.0 * PI);
    let kr = k.round();
    if (k - kr).abs() > 1e-9 {
        return Err(Error::Unquantized { p, n });
    }
    Ok((kr as i64).rem_euclid(n as i64) as usize)
}

impl ExcitationFamily {
    /// Gauge-fixes and normalizes (`c_p = 1`) the supplied `(p, B)` pairs.
    pub fn new(a: &MpsTensor, n: usize, entries: &[(f64, MpsTensor)]) -> Result<Self> {
        let canonical = canonicalize_with_gauge(a)?;
        let a = canonical.tensor;
        let fp = fixed_points(&a)?;
        let mut momenta = Vec::with_capacity(entries.len());
        let mut b_of_p = Vec::with_capacity(entries.len());
        let mut gauge_residuals = Vec::with_capacity(entries.len());
        for (p, b) in entries {
            let k = quantized_index(*p, n)?;
            if k == 0 {
                return Err(Error::ZeroMomentum);
            }
            if momenta.contains(p) {
                return Err(Error::Invalid(format!("momentum {p} repeated")));
            }
            let b = b.gauge(&canonical.gauge, &canonical.gauge_inv);
            let fixed = gauge_fix_with(&a, &fp.left, &b, *p)?;
            let c = c_form(&fixed, &fixed, &fp.left, &fp.right);
            if c.re <= 0.0 {
                return Err(Error::Invalid(format!("c_p = {c} is not positive")));
            }
            let fixed = fixed.scale(c64(1.0 / c.re.sqrt(), 0.0));
            gauge_residuals.push(gauge_residuals_of(&a, &fixed, &fp.left));
            momenta.push(*p);
            b_of_p.push(fixed);
        }
        Ok(Self {
            a,
            left: fp.left,
            right: fp.right,
            n,
            momenta,
            b_of_p,
            gauge_residuals,
        })
    }

    /// Random injective `A` (`p` physical, bond `d`) with one momentum-independent
    /// Gaussian `B` gauge-fixed at each `2πk/n`.
    pub fn random(p: usize, d: usize, n: usize, ks: &[usize], seed: u64) -> Result<Self> {
        let a = mps::random_injective_mps(p, d, seed)?;
        let mut g = rng::stream(seed, 1);
        let b = MpsTensor::new((0..p).map(|_| rng::complex_gaussian_matrix(&mut g, d, d)).collect())?;
        let entries: Vec<(f64, MpsTensor)> = ks.iter().map(|&k| (momentum(k, n), b.clone())).collect();
        Self::new(&a, n, &entries)
    }

    pub fn index_of(&self, p: f64) -> Result<usize> {
        let k = quantized_index(p, self.n)?;
        self.momenta
            .iter()
            .position(|&q| quantized_index(q, self.n).ok() == Some(k))
            .ok_or_else(|| Error::Invalid(format!("momentum {p} is not in the family")))
    }

    pub fn b(&self, p: f64) -> Result<&MpsTensor> {
        Ok(&self.b_of_p[self.index_of(p)?])
    }

    pub fn max_gauge_residual(&self) -> f64 {
        self.gauge_residuals.iter().map(|&(x, y)| x.max(y)).fold(0.0, f64::max)
    }

    /// Second-largest transfer eigenvalue modulus of `A`.
    pub fn lambda2(&self) -> Result<f64> {
        Ok(mps::transfer_op(&self.a, None)?.lambda2)
    }
}

/// Additive gauge fix `B̃ = B + AX − e^{−ip}XA` with
/// `X = −ℓ⁻¹(I − e^{−ip}ℰ†)⁻¹(Σ A†ℓB)` and `ℰ†(Y) = Σ A†YA`, which makes
/// `Σ A†ℓB̃ = 0`.
pub fn gauge_fix(a: &MpsTensor, b: &MpsTensor, p: f64) -> Result<MpsTensor> {
    let fp = fixed_points(a)?;
    gauge_fix_with(a, &fp.left, b, p)
}

fn gauge_fix_with(a: &MpsTensor, left: &CMat, b: &MpsTensor, p: f64) -> Result<MpsTensor> {
    if phase(p).re > 1.0 - 1e-14 {
        return Err(Error::ZeroMomentum);
    }
    if a.phys_dim != b.phys_dim || a.bond_dim != b.bond_dim {
        return Err(Error::Dimension("A and B must share their dimensions".into()));
    }
    let d = a.bond_dim;
    let source = apply_adjoint_map(b, a, left);
    let e_adj = transfer_matrix(a, a)?.adjoint();
    let shifted = identity(d * d) - e_adj * phase(-p);
    let rhs = -vectorize(&source);
    let y = solve_or_pinv(&shifted, &rhs)?;
    let y = devectorize(&y, d, d)?;
    let l_inv = left
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPrimitive("left fixed point is singular".into()))?;
    let x = l_inv * y;
    let e = phase(-p);
    Ok(MpsTensor::new(
        a.matrices
            .iter()
            .zip(&b.matrices)
            .map(|(am, bm)| bm + am * &x - &x * am * e)
            .collect(),
    )?)
}

fn solve_or_pinv(m: &CMat, rhs: &CVec) -> Result<CVec> {
    let s = linalg::singular_values(m);
    let smin = s.last().copied().unwrap_or(0.0);
    if smin < PINV_THRESHOLD {
        let svd = m.clone().svd(true, true);
        return svd
            .solve(rhs, PINV_THRESHOLD)
            .map_err(|e| Error::Invalid(format!("pseudo-inverse solve failed: {e}")));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Invalid("singular gauge system".into()))
}

/// `(‖⟨⟨ℓ|E_B‖₂, ‖⟨⟨ℓ|E_{conj B}‖₂)` with `E_B = Σ conj(A)⊗B`, `E_{conj B} = Σ conj(B)⊗A`.
pub fn gauge_residuals_of(a: &MpsTensor, b: &MpsTensor, left: &CMat) -> (f64, f64) {
    let l = vectorize(left).adjoint();
    let e_b = transfer_matrix(a, b).expect("matching dimensions");
    let e_bbar = transfer_matrix(b, a).expect("matching dimensions");
    ((&l * e_b).norm(), (&l * e_bbar).norm())
}

/// `⟨⟨ℓ|E_{conj(B')B}|r⟩⟩ = Σ_j tr(B'_j† ℓ B_j r)`.
fn c_form(b_bra: &MpsTensor, b_ket: &MpsTensor, left: &CMat, right: &CMat) -> C64 {
    b_bra
        .matrices
        .iter()
        .zip(&b_ket.matrices)
        .map(|(bp, b)| trace(&(bp.adjoint() * left * b * right)))
        .sum()
}

/// `c_{pp'} = ⟨⟨ℓ|E_{conj(B(p'))B(p)}|r⟩⟩`.
pub fn c_constant(fam: &ExcitationFamily, p: f64, p_prime: f64) -> Result<C64> {
    Ok(c_form(fam.b(p_prime)?, fam.b(p)?, &fam.left, &fam.right))
}

/// Table of `c_{pp'}` over the family's momenta; `values[(i, j)] = c_{p_i p_j}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CConstants {
    pub momenta: Vec<f64>,
    pub values: Vec<Vec<C64>>,
}

pub fn c_table(fam: &ExcitationFamily) -> CConstants {
    let values = fam
        .b_of_p
        .iter()
        .map(|b| {
            fam.b_of_p
                .iter()
                .map(|bp| c_form(bp, b, &fam.left, &fam.right))
                .collect()
        })
        .collect();
    CConstants {
        momenta: fam.momenta.clone(),
        values,
    }
}

fn site_tensors<'a>(a: &'a MpsTensor, b: &'a MpsTensor, j: usize, n: usize) -> Vec<&'a MpsTensor> {
    (0..n).map(|k| if k == j { b } else { a }).collect()
}

/// Dense `|Φ_{j,p}⟩`: `B(p)` on site `j`, `A` elsewhere, trace closure.
pub fn position_state(fam: &ExcitationFamily, j: usize, p: f64) -> Result<CVec> {
    position_state_with(&fam.a, fam.b(p)?, j, fam.n)
}

/// Dense `|Φ_j⟩` for explicit tensors.
pub fn position_state_with(a: &MpsTensor, b: &MpsTensor, j: usize, n: usize) -> Result<CVec> {
    if j >= n {
        return Err(Error::Invalid(format!("site {j} out of range for n = {n}")));
    }
    dense_state_sites(&site_tensors(a, b, j, n), &identity(a.bond_dim))
}

/// Open-boundary position state on `C^D ⊗ (C^p)^L ⊗ C^D` with amplitudes
/// `(√ℓ M_{i₁}⋯M_{i_L} √r)_{αβ}`, `M = B(p)` at site `j` and `A` elsewhere.
/// Index order is `α`, then the sites, then `β`.
pub fn open_position_state(fam: &ExcitationFamily, l: usize, j: usize, p: f64) -> Result<CVec> {
    let a = &fam.a;
    let b = fam.b(p)?;
    let (pd, d) = (a.phys_dim, a.bond_dim);
    let configs = (pd as u128).pow(l as u32);
    if configs * (d * d) as u128 > DENSE_CAP as u128 || j >= l {
        return Err(Error::DenseCap {
            requested: configs * (d * d) as u128,
            cap: DENSE_CAP,
        });
    }
    let sl = linalg::psd_sqrt(&fam.left);
    let sr = linalg::psd_sqrt(&fam.right);
    let configs = configs as usize;
    let mut out = CVec::zeros(d * configs * d);
    for c in 0..configs {
        let mut m = sl.clone();
        for k in 0..l {
            let i = (c / pd.pow((l - 1 - k) as u32)) % pd;
            m = m * if k == j { &b.matrices[i] } else { &a.matrices[i] };
        }
        let m = m * &sr;
        for alpha in 0..d {
            for beta in 0..d {
                out[(alpha * configs + c) * d + beta] = m[(alpha, beta)];
            }
        }
    }
    Ok(out)
}

/// Dense `|Φ_p⟩ = Σ_j e^{ipj}|Φ_{j,p}⟩` summed from position states.
pub fn excitation_state_from_positions(fam: &ExcitationFamily, p: f64) -> Result<CVec> {
    let n = fam.n;
    let mut acc = CVec::zeros(fam.a.phys_dim.pow(n as u32));
    for j in 0..n {
        acc += position_state(fam, j, p)? * phase(p * j as f64);
    }
    Ok(acc)
}

/// Dense `|Φ_p⟩` from the bond-`2D` embedding.
pub fn excitation_state(fam: &ExcitationFamily, p: f64) -> Result<CVec> {
    quantized_index(p, fam.n)?;
    let (t, x) = embedded_mps(&fam.a, fam.b(p)?, p);
    dense_state(&t, &x, fam.n)
}

/// Bond-`2D` MPS `M_i = [[e^{ip}A_i, B_i], [0, A_i]]` with boundary
/// `|1⟩⟨0| ⊗ I_D`; its state is `Σ_j e^{ipj}|Φ_j⟩`.
pub fn embedded_mps(a: &MpsTensor, b: &MpsTensor, p: f64) -> (MpsTensor, CMat) {
    let d = a.bond_dim;
    let e = phase(p);
    let mats = a
        .matrices
        .iter()
        .zip(&b.matrices)
        .map(|(am, bm)| {
            let mut m = CMat::zeros(2 * d, 2 * d);
            m.view_mut((0, 0), (d, d)).copy_from(&(am * e));
            m.view_mut((0, d), (d, d)).copy_from(bm);
            m.view_mut((d, d), (d, d)).copy_from(am);
            m
        })
        .collect();
    let x = kron(&linalg::matrix_unit(2, 1, 0), &identity(d));
    (MpsTensor::new(mats).expect("consistent blocks"), x)
}

/// What sits at one site of a `(j, j')` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Plain,
    Ket,
    Bra,
    Both,
}

/// Transfer data for the double sum `Σ_{j,j'} e^{i(pj − p'j')}⟨Φ_{j',p'}|F|Φ_{j,p}⟩`.
struct DoubleSum<'a> {
    p: usize,
    n: usize,
    a: &'a MpsTensor,
    b_ket: &'a MpsTensor,
    b_bra: &'a MpsTensor,
    /// `powers[k] = E^k`, `k ≤ n`.
    powers: Vec<CMat>,
    e_ket: CMat,
    e_bra: CMat,
    e_both: CMat,
}

impl<'a> DoubleSum<'a> {
    fn new(a: &'a MpsTensor, b_ket: &'a MpsTensor, b_bra: &'a MpsTensor, n: usize) -> Result<Self> {
        let e = transfer_matrix(a, a)?;
        let mut powers = Vec::with_capacity(n + 1);
        powers.push(identity(e.nrows()));
        for k in 1..=n {
            let next = &powers[k - 1] * &e;
            powers.push(next);
        }
        Ok(Self {
            p: a.phys_dim,
            n,
            a,
            b_ket,
            b_bra,
            powers,
            e_ket: transfer_matrix(a, b_ket)?,
            e_bra: transfer_matrix(b_bra, a)?,
            e_both: transfer_matrix(b_bra, b_ket)?,
        })
    }

    fn closed(&self, slot: Slot) -> &CMat {
        match slot {
            Slot::Plain => &self.powers[1],
            Slot::Ket => &self.e_ket,
            Slot::Bra => &self.e_bra,
            Slot::Both => &self.e_both,
        }
    }

    fn tensors(&self, slot: Slot) -> (&MpsTensor, &MpsTensor) {
        match slot {
            Slot::Plain => (self.a, self.a),
            Slot::Ket => (self.a, self.b_ket),
            Slot::Bra => (self.b_bra, self.a),
            Slot::Both => (self.b_bra, self.b_ket),
        }
    }

    /// Window `[0, width)` contracted with `F` on the support positions.
    fn window(
        &self,
        f: &CMat,
        support: &[usize],
        factor: &[usize],
        width: usize,
        slot_at: impl Fn(usize) -> Slot,
    ) -> CMat {
        let p = self.p;
        let d = support.len();
        let dim = self.powers[0].nrows();
        let mut blocks: Vec<CMat> = vec![identity(dim)];
        let mut open = 0;
        for pos in 0..width {
            let slot = slot_at(pos);
            if open < d && support[open] == pos {
                let (bra, ket) = self.tensors(slot);
                let locals: Vec<CMat> = (0..p * p)
                    .map(|mk| kron(&bra.matrices[mk / p].map(|v| v.conj()), &ket.matrices[mk % p]))
                    .collect();
                let width_t = p.pow(open as u32);
                let next_width = width_t * p;
                let mut next = vec![CMat::zeros(0, 0); next_width * next_width];
                for i in 0..width_t {
                    for j in 0..width_t {
                        let block = &blocks[i * width_t + j];
                        for m in 0..p {
                            for k in 0..p {
                                next[(i * p + m) * next_width + (j * p + k)] = block * &locals[m * p + k];
                            }
                        }
                    }
                }
                blocks = next;
                open += 1;
            } else {
                let closed = self.closed(slot);
                for b in blocks.iter_mut() {
                    *b = &*b * closed;
                }
            }
        }
        let width_f = p.pow(d as u32);
        let reorder = |mut idx: usize| {
            let mut out = 0;
            for t in (0..d).rev() {
                out += (idx % p) * p.pow((d - 1 - factor[t]) as u32);
                idx /= p;
            }
            out
        };
        let mut e_f = CMat::zeros(dim, dim);
        for i in 0..width_f {
            let fi = reorder(i);
            for j in 0..width_f {
                let w = f[(fi, reorder(j))];
                if w != ZERO {
                    e_f += &blocks[i * width_f + j] * w;
                }
            }
        }
        e_f
    }

    /// Product over positions `[from, n)` with insertions, as a matrix.
    fn tail(&self, from: usize, j: usize, j_bra: usize) -> CMat {
        let mut marks: Vec<(usize, Slot)> = Vec::with_capacity(2);
        if j == j_bra {
            if j >= from {
                marks.push((j, Slot::Both));
            }
        } else {
            if j >= from {
                marks.push((j, Slot::Ket));
            }
            if j_bra >= from {
                marks.push((j_bra, Slot::Bra));
            }
        }
        marks.sort_by_key(|m| m.0);
        let mut acc: Option<CMat> = None;
        let mut cursor = from;
        for (pos, slot) in marks {
            let piece = &self.powers[pos - cursor] * self.closed(slot);
            acc = Some(match acc {
                None => piece,
                Some(m) => m * piece,
            });
            cursor = pos + 1;
        }
        let rest = &self.powers[self.n - cursor];
        match acc {
            None => rest.clone(),
            Some(m) => m * rest,
        }
    }

    /// `Σ_{j,j'} e^{i(p j − p' j')} ⟨Φ_{j'}|F|Φ_j⟩` for a support already rotated
    /// to start at position 0 (walk order `support`, factor map `factor`).
    fn sum(&self, f: &CMat, support: &[usize], factor: &[usize], p_ket: f64, p_bra: f64) -> C64 {
        let n = self.n;
        let width = support.last().map_or(0, |&s| s + 1);
        let plain = self.window(f, support, factor, width, |_| Slot::Plain);
        // Row j: Σ_{j'} e^{-ip'j'} term(j, j'), reduced in j' order.
        let rows: Vec<C64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut row = ZERO;
                for jb in 0..n {
                    let value = if j >= width && jb >= width {
                        trace(&(&plain * self.tail(width, j, jb)))
                    } else {
                        let slot_at = |pos: usize| match (pos == j, pos == jb) {
                            (true, true) => Slot::Both,
                            (true, false) => Slot::Ket,
                            (false, true) => Slot::Bra,
                            (false, false) => Slot::Plain,
                        };
                        let win = self.window(f, support, factor, width, slot_at);
                        trace(&(win * self.tail(width, j, jb)))
                    };
                    row += value * phase(-p_bra * jb as f64);
                }
                row * phase(p_ket * j as f64)
            })
            .collect();
        rows.iter().sum()
    }
}

/// Un-normalized `⟨Φ_{p'}|F|Φ_p⟩` from the exact double sum.
pub fn raw_matrix_element(fam: &ExcitationFamily, p: f64, p_prime: f64, f: &CMat, support: &[usize]) -> Result<C64> {
    let n = fam.n;
    let b_ket = fam.b(p)?;
    let b_bra = fam.b(p_prime)?;
    let support = mps::normalize_support(support, n)?;
    let d = support.len();
    let pd = fam.a.phys_dim;
    if f.nrows() != pd.pow(d as u32) || !f.is_square() {
        return Err(Error::Dimension(format!(
            "operator does not act on {d} sites of dimension {pd}"
        )));
    }
    let ds = DoubleSum::new(&fam.a, b_ket, b_bra, n)?;
    if d == 0 {
        return Ok(f[(0, 0)] * ds.sum(&identity(1), &[], &[], p, p_prime));
    }
    // Rotate so the window starts at position 0; the momentum phases pick up
    // e^{i(p − p')·shift}.
    let window = Window::new(&support, n);
    let shift = window.sites[0];
    let rotated: Vec<usize> = window.sites.iter().map(|&s| (s + n - shift) % n).collect();
    let value = ds.sum(f, &rotated, &window.factor, p, p_prime);
    Ok(value * phase((p - p_prime) * shift as f64))
}

/// `‖Φ_p‖²` from the double sum with `F = I`.
pub fn norm_squared(fam: &ExcitationFamily, p: f64) -> Result<f64> {
    Ok(raw_matrix_element(fam, p, p, &identity(1), &[])?.re)
}

/// Normalized `⟨φ_{p'}|F|φ_p⟩` by the exact double sum.
pub fn excitation_matrix_element(
    fam: &ExcitationFamily,
    p: f64,
    p_prime: f64,
    f: &CMat,
    support: &[usize],
) -> Result<C64> {
    let raw = raw_matrix_element(fam, p, p_prime, f, support)?;
    let norm = (norm_squared(fam, p)? * norm_squared(fam, p_prime)?).sqrt();
    Ok(raw / norm)
}

/// Normalized `⟨φ_{p'}|F|φ_p⟩` through the bond-`2D` embedding.
pub fn excitation_matrix_element_embedded(
    fam: &ExcitationFamily,
    p: f64,
    p_prime: f64,
    f: &CMat,
    support: &[usize],
) -> Result<C64> {
    let (tk, xk) = embedded_mps(&fam.a, fam.b(p)?, p);
    let (tb, xb) = embedded_mps(&fam.a, fam.b(p_prime)?, p_prime);
    let n = fam.n;
    let raw = mps::matrix_element_transfer(&tb, &xb, &tk, &xk, f, support, n)?;
    let nk = mps::overlap_transfer(&tk, &xk, &tk, &xk, n)?.re;
    let nb = mps::overlap_transfer(&tb, &xb, &tb, &xb, n)?.re;
    Ok(raw / (nk * nb).sqrt())
}

/// Normalized transfer handle of `|φ_p⟩` through the bond-`2D` embedding.
pub fn embedded_handle(fam: &ExcitationFamily, p: f64) -> Result<MpsHandle> {
    let (t, x) = embedded_mps(&fam.a, fam.b(p)?, p);
    MpsHandle::normalized(t, x, fam.n)
}

/// Relative deviation `|‖Φ_p‖ − √(n c_p)| / √(n c_p)`.
pub fn norm_law_deviation(fam: &ExcitationFamily, p: f64, dense_norm: f64) -> Result<f64> {
    let c = c_constant(fam, p, p)?.re;
    let expect = (fam.n as f64 * c).sqrt();
    Ok((dense_norm - expect).abs() / expect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    #[test]
    fn quantization() {
        assert_eq!(quantized_index(momentum(3, 8), 8).unwrap(), 3);
        assert!(quantized_index(0.1, 8).is_err());
    }

    #[test]
    fn zero_momentum_is_rejected() {
        let a = mps::canonicalize(&mps::random_injective_mps(2, 2, 1).unwrap()).unwrap();
        assert!(matches!(gauge_fix(&a, &a, 0.0), Err(Error::ZeroMomentum)));
        assert!(matches!(
            ExcitationFamily::random(2, 2, 6, &[0], 1),
            Err(Error::ZeroMomentum)
        ));
    }

    #[test]
    fn gauge_fix_kills_left_projections() {
        let fam = ExcitationFamily::random(2, 3, 8, &[1, 2, 5], 4).unwrap();
        assert!(fam.max_gauge_residual() < 1e-10, "{:?}", fam.gauge_residuals);
        for &p in &fam.momenta {
            assert!((c_constant(&fam, p, p).unwrap() - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn c_table_is_hermitian() {
        let fam = ExcitationFamily::random(2, 2, 8, &[1, 3], 9).unwrap();
        let t = c_table(&fam);
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.values[i][j] - t.values[j][i].conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn embedded_state_equals_position_sum() {
        let fam = ExcitationFamily::random(2, 2, 6, &[1, 4], 2).unwrap();
        for &p in &fam.momenta {
            let a = excitation_state(&fam, p).unwrap();
            let b = excitation_state_from_positions(&fam, p).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }
}
