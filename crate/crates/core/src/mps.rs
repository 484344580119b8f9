//! Site-independent MPS and MPO tensors, transfer operators, canonical form,
//! dense reconstruction and transfer-contraction matrix elements.
//!
//! States are `|Ψ(A,X)⟩ = Σ tr(A_{i₁}⋯A_{iₙ}X)|i₁…iₙ⟩` with site 0 as the most
//! significant digit. Mixed transfer operators are `Σ_m conj(A_m)⊗B_m` with the
//! bra tensor first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c64, eigenvalues_by_modulus, hermitian_eigen, identity, kron, psd_sqrt, trace, CMat, CVec, JordanProfile,
    C64, DENSE_CAP, ONE, ZERO,
};
use crate::par::*;
use crate::rng;

/// Site tensor `{A_i}` of an MPS: `phys_dim` matrices of size `bond_dim × bond_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsTensor {
    pub phys_dim: usize,
    pub bond_dim: usize,
    pub matrices: Vec<CMat>,
}

impl MpsTensor {
    pub fn new(matrices: Vec<CMat>) -> Result<Self> {
        let phys_dim = matrices.len();
        if phys_dim == 0 {
            return Err(Error::Dimension("an MPS tensor needs at least one matrix".into()));
        }
        let bond_dim = matrices[0].nrows();
        if matrices.iter().any(|m| m.nrows() != bond_dim || m.ncols() != bond_dim) {
            return Err(Error::Dimension("MPS matrices must share one square shape".into()));
        }
        Ok(Self {
            phys_dim,
            bond_dim,
            matrices,
        })
    }

    /// `P⁻¹ A_i P` for every `i`.
    pub fn gauge(&self, p: &CMat, p_inv: &CMat) -> Self {
        self.map(|m| p_inv * m * p)
    }

    pub fn scale(&self, factor: C64) -> Self {
        self.map(|m| m * factor)
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self {
            phys_dim: self.phys_dim,
            bond_dim: self.bond_dim,
            matrices: self.matrices.iter().map(f).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|m| CMat::zeros(m.nrows(), m.ncols()))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            phys_dim: self.phys_dim,
            bond_dim: self.bond_dim,
            matrices: self.matrices.iter().zip(&other.matrices).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.matrices.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }
}

/// Site tensor of an MPO. `matrices[i * p + j]` is the bond matrix `O_{i,j}`,
/// so `⟨α|O_{i,j}|β⟩ = ⟨i|O^{α,β}|j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct MpoTensor {
    pub phys_dim: usize,
    pub bond_dim: usize,
    pub matrices: Vec<CMat>,
}

impl MpoTensor {
    pub fn new(phys_dim: usize, matrices: Vec<CMat>) -> Result<Self> {
        if matrices.len() != phys_dim * phys_dim || phys_dim == 0 {
            return Err(Error::Dimension(format!(
                "an MPO with physical dimension {phys_dim} needs {} matrices",
                phys_dim * phys_dim
            )));
        }
        let bond_dim = matrices[0].nrows();
        if matrices.iter().any(|m| m.nrows() != bond_dim || m.ncols() != bond_dim) {
            return Err(Error::Dimension("MPO matrices must share one square shape".into()));
        }
        Ok(Self {
            phys_dim,
            bond_dim,
            matrices,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> &CMat {
        &self.matrices[i * self.phys_dim + j]
    }

    /// `(O⋄A)_i = Σ_j O_{i,j} ⊗ A_j`; the MPO bond is the leading factor.
    pub fn apply(&self, a: &MpsTensor) -> Result<MpsTensor> {
        if a.phys_dim != self.phys_dim {
            return Err(Error::Dimension("MPO and MPS physical dimensions differ".into()));
        }
        let p = self.phys_dim;
        let mats = (0..p)
            .map(|i| {
                (0..p).map(|j| kron(self.get(i, j), &a.matrices[j])).fold(
                    CMat::zeros(self.bond_dim * a.bond_dim, self.bond_dim * a.bond_dim),
                    |acc, m| acc + m,
                )
            })
            .collect();
        MpsTensor::new(mats)
    }

    /// Dense operator `⟨i|O|j⟩ = tr(O_{i₁j₁}⋯O_{iₙjₙ} Y)` on `n` sites.
    pub fn dense(&self, y: &CMat, n: usize) -> Result<CMat> {
        let p = self.phys_dim;
        let dim = checked_dim(p, n)?;
        if dim * dim > DENSE_CAP * 4 {
            return Err(Error::DenseCap {
                requested: (dim * dim) as u128,
                cap: DENSE_CAP * 4,
            });
        }
        let digits = |mut x: usize| {
            let mut d = vec![0; n];
            for k in (0..n).rev() {
                d[k] = x % p;
                x /= p;
            }
            d
        };
        let rows: Vec<Vec<C64>> = (0..dim)
            .into_par_iter()
            .map(|i| {
                let di = digits(i);
                (0..dim)
                    .map(|j| {
                        let dj = digits(j);
                        let mut m = identity(self.bond_dim);
                        for k in 0..n {
                            m = &m * self.get(di[k], dj[k]);
                        }
                        trace(&(m * y))
                    })
                    .collect()
            })
            .collect();
        Ok(CMat::from_fn(dim, dim, |i, j| rows[i][j]))
    }
}

fn checked_dim(p: usize, n: usize) -> Result<usize> {
    let dim = (p as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > DENSE_CAP as u128 {
        return Err(Error::DenseCap {
            requested: dim,
            cap: DENSE_CAP,
        });
    }
    Ok(dim as usize)
}

/// `Σ_m conj(A_m) ⊗ B_m`.
pub fn transfer_matrix(a: &MpsTensor, b: &MpsTensor) -> Result<CMat> {
    generalized_transfer(a, b, &identity(a.phys_dim))
}

/// `E_Z = Σ_{m,n} ⟨m|Z|n⟩ conj(A_m) ⊗ B_n`.
pub fn generalized_transfer(a: &MpsTensor, b: &MpsTensor, z: &CMat) -> Result<CMat> {
    let p = a.phys_dim;
    if b.phys_dim != p || z.nrows() != p || z.ncols() != p {
        return Err(Error::Dimension(format!(
            "physical dimensions {} and {} with a {}x{} operator",
            a.phys_dim,
            b.phys_dim,
            z.nrows(),
            z.ncols()
        )));
    }
    let dim = a.bond_dim * b.bond_dim;
    let mut e = CMat::zeros(dim, dim);
    for m in 0..p {
        let abar = a.matrices[m].map(|v| v.conj());
        for n in 0..p {
            let w = z[(m, n)];
            if w != ZERO {
                e += kron(&abar, &b.matrices[n]) * w;
            }
        }
    }
    Ok(e)
}

fn local_transfers(a: &MpsTensor, b: &MpsTensor) -> Vec<CMat> {
    let p = a.phys_dim;
    let mut out = Vec::with_capacity(p * p);
    for m in 0..p {
        let abar = a.matrices[m].map(|v| v.conj());
        for n in 0..p {
            out.push(kron(&abar, &b.matrices[n]));
        }
    }
    out
}

fn support_arity(f: &CMat, p: usize) -> Result<usize> {
    if !f.is_square() {
        return Err(Error::Dimension("operator must be square".into()));
    }
    let mut d = 0;
    let mut dim = 1;
    while dim < f.nrows() {
        dim *= p;
        d += 1;
    }
    if dim != f.nrows() {
        return Err(Error::Dimension(format!(
            "operator dimension {} is not a power of {p}",
            f.nrows()
        )));
    }
    Ok(d)
}

/// `E_F` by direct d-site contraction:
/// `Σ_{i,j} F_{ij} conj(A_{i₁}⋯A_{i_d}) ⊗ (B_{j₁}⋯B_{j_d})`.
pub fn operator_transfer(a: &MpsTensor, b: &MpsTensor, f: &CMat) -> Result<CMat> {
    let p = a.phys_dim;
    if b.phys_dim != p {
        return Err(Error::Dimension("physical dimensions differ".into()));
    }
    let d = support_arity(f, p)?;
    if d == 0 {
        return Err(Error::Invalid("operator acts on zero sites".into()));
    }
    let strings = |t: &MpsTensor| -> Vec<CMat> {
        (0..f.nrows())
            .map(|mut idx| {
                let mut digits = vec![0; d];
                for k in (0..d).rev() {
                    digits[k] = idx % p;
                    idx /= p;
                }
                digits.iter().fold(identity(t.bond_dim), |acc, &i| acc * &t.matrices[i])
            })
            .collect()
    };
    let bra: Vec<CMat> = strings(a).into_iter().map(|m| m.map(|v| v.conj())).collect();
    let ket = strings(b);
    let dim = a.bond_dim * b.bond_dim;
    let mut e = CMat::zeros(dim, dim);
    for i in 0..f.nrows() {
        for j in 0..f.ncols() {
            let w = f[(i, j)];
            if w != ZERO {
                e += kron(&bra[i], &ket[j]) * w;
            }
        }
    }
    Ok(e)
}

/// Clock-and-shift operators `X^a Z^b` on `C^p`, indexed `a * p + b`.
pub fn weyl_basis(p: usize) -> Vec<CMat> {
    let w = linalg::phase(2.0 * std::f64::consts::PI / p as f64);
    let shift = CMat::from_fn(p, p, |i, j| if i == (j + 1) % p { ONE } else { ZERO });
    let clock = CMat::from_fn(p, p, |i, j| if i == j { w.powu(i as u32) } else { ZERO });
    let mut out = Vec::with_capacity(p * p);
    for a in 0..p {
        for b in 0..p {
            out.push(linalg::matrix_power(&shift, a) * linalg::matrix_power(&clock, b));
        }
    }
    out
}

/// `E_F` by expanding `F` over products of clock-and-shift operators and
/// multiplying the single-site generalized transfer matrices.
pub fn operator_transfer_product_basis(a: &MpsTensor, b: &MpsTensor, f: &CMat) -> Result<CMat> {
    let p = a.phys_dim;
    if b.phys_dim != p {
        return Err(Error::Dimension("physical dimensions differ".into()));
    }
    let d = support_arity(f, p)?;
    if d == 0 {
        return Err(Error::Invalid("operator acts on zero sites".into()));
    }
    let basis = weyl_basis(p);
    let singles: Vec<CMat> = basis
        .iter()
        .map(|z| generalized_transfer(a, b, z))
        .collect::<Result<_>>()?;
    let terms = basis.len().pow(d as u32);
    let norm = (p as f64).powi(d as i32);
    let dim = a.bond_dim * b.bond_dim;
    let mut e = CMat::zeros(dim, dim);
    for idx in 0..terms {
        let mut digits = vec![0; d];
        let mut rest = idx;
        for k in (0..d).rev() {
            digits[k] = rest % basis.len();
            rest /= basis.len();
        }
        let op = linalg::kron_all(digits.iter().map(|&k| &basis[k]));
        let coeff = linalg::hs_inner(&op, f) / norm;
        if coeff.norm() < 1e-300 {
            continue;
        }
        let product = digits.iter().fold(identity(dim), |acc, &k| acc * &singles[k]);
        e += product * coeff;
    }
    Ok(e)
}

/// Transfer operator with its fixed points and spectral data.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    pub matrix: CMat,
    /// Spectral radius ρ(E).
    pub rho: f64,
    /// Second-largest eigenvalue modulus.
    pub lambda2: f64,
    /// Left fixed point ℓ (`Σ A†ℓA = ℓ`), normalized to unit trace. Populated
    /// for `b = a` with ρ ≈ 1.
    pub left_fixed: Option<CMat>,
    /// Right fixed point r (`Σ A r A† = r`), normalized so `tr(ℓ r) = 1`.
    pub right_fixed: Option<CMat>,
    pub jordan: Option<JordanProfile>,
}

/// Largest transfer dimension for which the full spectrum is computed.
const SPECTRUM_DIM_CAP: usize = 1024;
const JORDAN_DIM_CAP: usize = 256;

pub fn transfer_op(a: &MpsTensor, b: Option<&MpsTensor>) -> Result<TransferOperator> {
    let b_ref = b.unwrap_or(a);
    let matrix = transfer_matrix(a, b_ref)?;
    let same = b.is_none() || b == Some(a);
    let (rho, lambda2) = leading_moduli(a, b_ref, &matrix);
    let (left_fixed, right_fixed) = if same && (rho - 1.0).abs() < 1e-8 {
        let fp = fixed_points(a)?;
        (Some(fp.left), Some(fp.right))
    } else {
        (None, None)
    };
    let jordan = (matrix.nrows() <= JORDAN_DIM_CAP).then(|| linalg::jordan_profile_default(&matrix));
    Ok(TransferOperator {
        matrix,
        rho,
        lambda2,
        left_fixed,
        right_fixed,
        jordan,
    })
}

fn leading_moduli(a: &MpsTensor, b: &MpsTensor, matrix: &CMat) -> (f64, f64) {
    if matrix.nrows() <= SPECTRUM_DIM_CAP {
        let ev = eigenvalues_by_modulus(matrix);
        let rho = ev.first().map_or(0.0, |z| z.norm());
        let lambda2 = ev.get(1).map_or(0.0, |z| z.norm());
        (rho, lambda2)
    } else {
        // Only reached for b = a in practice; power iteration on the map.
        let rho = dominant_right(a, b, 1e-12, 10_000).0.norm();
        (rho, deflated_lambda2(matrix, rho))
    }
}

fn deflated_lambda2(matrix: &CMat, rho: f64) -> f64 {
    // Power iteration on E restricted away from the dominant direction.
    let n = matrix.nrows();
    let mut v = CVec::from_fn(n, |i, _| {
        c64(((i * 7919) % 13) as f64 - 6.0, ((i * 104729) % 7) as f64 - 3.0)
    });
    let dominant = dominant_vector(matrix);
    let mut est = 0.0;
    for _ in 0..2000 {
        let proj = dominant.dotc(&v);
        v -= &dominant * proj;
        let w = matrix * &v;
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        est = w.norm() / nv;
        v = w / c64(est.max(f64::MIN_POSITIVE), 0.0);
    }
    est.min(rho)
}

fn dominant_vector(matrix: &CMat) -> CVec {
    let n = matrix.nrows();
    let mut v = CVec::from_element(n, c64(1.0 / (n as f64).sqrt(), 0.0));
    for _ in 0..2000 {
        let w = matrix * &v;
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        v = w / c64(nw, 0.0);
    }
    v
}

/// `ℰ(Y) = Σ B_m Y A_m†`, the map represented by `Σ conj(A)⊗B`.
pub fn apply_map(a: &MpsTensor, b: &MpsTensor, y: &CMat) -> CMat {
    a.matrices
        .iter()
        .zip(&b.matrices)
        .fold(CMat::zeros(b.bond_dim, a.bond_dim), |acc, (am, bm)| {
            acc + bm * y * am.adjoint()
        })
}

/// `ℰ†(Y) = Σ B_m† Y A_m`.
pub fn apply_adjoint_map(a: &MpsTensor, b: &MpsTensor, y: &CMat) -> CMat {
    a.matrices
        .iter()
        .zip(&b.matrices)
        .fold(CMat::zeros(b.bond_dim, a.bond_dim), |acc, (am, bm)| {
            acc + bm.adjoint() * y * am
        })
}

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 10_000;

/// Power iteration with Rayleigh quotient on `ℰ`; returns (eigenvalue, vector, converged).
fn dominant_right(a: &MpsTensor, b: &MpsTensor, tol: f64, max_iter: usize) -> (C64, CMat, bool) {
    power_iterate(|y| apply_map(a, b, y), identity(b.bond_dim), tol, max_iter)
}

fn power_iterate(op: impl Fn(&CMat) -> CMat, start: CMat, tol: f64, max_iter: usize) -> (C64, CMat, bool) {
    let mut y = &start / c64(start.norm(), 0.0);
    let mut lambda = ZERO;
    for _ in 0..max_iter {
        let z = op(&y);
        lambda = linalg::hs_inner(&y, &z);
        let residual = (&z - &y * lambda).norm();
        let nz = z.norm();
        if nz == 0.0 {
            return (ZERO, y, false);
        }
        if residual <= tol * lambda.norm().max(f64::MIN_POSITIVE) {
            return (lambda, y, true);
        }
        y = z / c64(nz, 0.0);
    }
    (lambda, y, false)
}

/// Null vector of `E - ρI` through the SVD, reshaped to a `D×D` matrix.
fn null_fixed_point(matrix: &CMat, rho: f64, d: usize) -> CMat {
    let shifted = matrix - identity(matrix.nrows()) * c64(rho, 0.0);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let v: CVec = v_t.row(idx).adjoint();
    CMat::from_column_slice(d, d, v.as_slice())
}

fn hermitian_positive(m: CMat) -> CMat {
    let tr = trace(&m);
    let phased = if tr.norm() > 0.0 {
        m * (tr.conj() / tr.norm())
    } else {
        m
    };
    (&phased + phased.adjoint()) * c64(0.5, 0.0)
}

#[derive(Clone, Debug)]
pub struct FixedPoints {
    pub left: CMat,
    pub right: CMat,
    /// Eigenvalue found by the iteration (≈ ρ(E)).
    pub eigenvalue: f64,
}

/// Left and right fixed points of `ℰ`, with `tr ℓ = 1` and `tr(ℓ r) = 1`.
pub fn fixed_points(a: &MpsTensor) -> Result<FixedPoints> {
    let d = a.bond_dim;
    let (lr, r, ok_r) = dominant_right(a, a, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER);
    let (ll, l, ok_l) = power_iterate(
        |y| apply_adjoint_map(a, a, y),
        identity(d),
        FIXED_POINT_TOL,
        FIXED_POINT_MAX_ITER,
    );
    let rho = lr.norm().max(ll.norm());
    let matrix = if ok_r && ok_l {
        None
    } else {
        Some(transfer_matrix(a, a)?)
    };
    let r = if ok_r {
        r
    } else {
        null_fixed_point(matrix.as_ref().unwrap(), rho, d)
    };
    let l = if ok_l {
        l
    } else {
        null_fixed_point(&matrix.as_ref().unwrap().adjoint(), rho, d)
    };
    let l = hermitian_positive(l);
    let r = hermitian_positive(r);
    let l = &l / trace(&l);
    let overlap = trace(&(&l * &r));
    if overlap.norm() < 1e-300 {
        return Err(Error::NotPrimitive("fixed points are orthogonal".into()));
    }
    let r = r / overlap;
    Ok(FixedPoints {
        left: l,
        right: r,
        eigenvalue: rho,
    })
}

/// Spectral radius of `E(A)`.
pub fn spectral_radius(a: &MpsTensor) -> f64 {
    let dim = a.bond_dim * a.bond_dim;
    if dim <= SPECTRUM_DIM_CAP {
        let e = transfer_matrix(a, a).expect("same tensor");
        eigenvalues_by_modulus(&e).first().map_or(0.0, |z| z.norm())
    } else {
        dominant_right(a, a, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER).0.norm()
    }
}

/// Divides every `A_i` by `√ρ(E)`.
pub fn normalize_spectral_radius(a: &MpsTensor) -> Result<MpsTensor> {
    let rho = spectral_radius(a);
    if rho <= 0.0 {
        return Err(Error::NotPrimitive("transfer operator is nilpotent".into()));
    }
    Ok(a.scale(c64(1.0 / rho.sqrt(), 0.0)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub injective: bool,
    pub rho: f64,
    pub lambda2: f64,
    /// Smallest eigenvalue of the right fixed point scaled to unit operator norm.
    pub min_fixed_eigenvalue: f64,
}

pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// Primitivity test: unique dominant eigenvalue of `E` (relative gap above
/// `gap_tol`) and a positive definite right fixed point.
pub fn is_injective(a: &MpsTensor, gap_tol: f64) -> InjectivityReport {
    let e = transfer_matrix(a, a).expect("same tensor");
    let (rho, lambda2) = leading_moduli(a, a, &e);
    let mut report = InjectivityReport {
        injective: false,
        rho,
        lambda2,
        min_fixed_eigenvalue: 0.0,
    };
    if rho <= 0.0 || (rho - lambda2) / rho <= gap_tol {
        return report;
    }
    let normalized = a.scale(c64(1.0 / rho.sqrt(), 0.0));
    let Ok(fp) = fixed_points(&normalized) else {
        return report;
    };
    let (vals, _) = hermitian_eigen(&fp.right);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = vals.first().copied().unwrap_or(0.0) / top.max(f64::MIN_POSITIVE);
    report.min_fixed_eigenvalue = min;
    report.injective = min > gap_tol;
    report
}

/// Canonical tensor together with the gauge that produced it.
#[derive(Clone, Debug)]
pub struct Canonical {
    pub tensor: MpsTensor,
    /// `Ã_i = G⁻¹ A_i G` with `A` the spectral-radius-normalized input.
    pub gauge: CMat,
    pub gauge_inv: CMat,
    /// Diagonal of Λ in decreasing order, summing to one.
    pub lambda: Vec<f64>,
}

/// Brings an injective tensor to canonical form (`E|I⟩⟩ = |I⟩⟩`,
/// `⟨⟨Λ|E = ⟨⟨Λ|` with Λ positive diagonal of unit trace).
pub fn canonicalize(a: &MpsTensor) -> Result<MpsTensor> {
    canonicalize_with_gauge(a).map(|c| c.tensor)
}

pub fn canonicalize_with_gauge(a: &MpsTensor) -> Result<Canonical> {
    let report = is_injective(a, DEFAULT_GAP_TOL);
    if !report.injective {
        return Err(Error::NotPrimitive(format!(
            "ρ = {:.3e}, λ₂ = {:.3e}, min fixed-point eigenvalue {:.3e}",
            report.rho, report.lambda2, report.min_fixed_eigenvalue
        )));
    }
    let a = a.scale(c64(1.0 / report.rho.sqrt(), 0.0));
    let fp = fixed_points(&a)?;
    let p = psd_sqrt(&fp.right);
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPrimitive("singular right fixed point".into()))?;
    let unit_right = a.gauge(&p, &p_inv);
    let fp2 = fixed_points(&unit_right)?;
    let (vals, vecs) = hermitian_eigen(&fp2.left);
    // Decreasing order for Λ.
    let d = vals.len();
    let u = CMat::from_fn(d, d, |r, c| vecs[(r, d - 1 - c)]);
    let mut lambda: Vec<f64> = vals.iter().rev().copied().collect();
    let total: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|v| *v /= total);
    let tensor = unit_right.gauge(&u, &u.adjoint());
    Ok(Canonical {
        tensor,
        gauge: &p * &u,
        gauge_inv: u.adjoint() * p_inv,
        lambda,
    })
}

/// Residuals `‖ℰ(I) − I‖` and `‖ℰ†(Λ) − Λ‖` of a canonical tensor.
pub fn canonical_residuals(a: &MpsTensor, lambda: &[f64]) -> (f64, f64) {
    let d = a.bond_dim;
    let id = identity(d);
    let l = CMat::from_diagonal(&CVec::from_iterator(d, lambda.iter().map(|&v| c64(v, 0.0))));
    (
        (apply_map(a, a, &id) - id).norm(),
        (apply_adjoint_map(a, a, &l) - l).norm(),
    )
}

/// Dense amplitudes `tr(A_{i₁}⋯A_{iₙ}X)` in lexicographic order.
pub fn dense_state(a: &MpsTensor, x: &CMat, n: usize) -> Result<CVec> {
    if n == 0 {
        if x.nrows() != a.bond_dim || x.ncols() != a.bond_dim {
            return Err(Error::Dimension("boundary must match the bond dimension".into()));
        }
        return Ok(CVec::from_element(1, trace(x)));
    }
    dense_state_sites(&vec![a; n], x)
}

/// Dense amplitudes `tr(A⁽⁰⁾_{i₀}⋯A⁽ⁿ⁻¹⁾_{iₙ₋₁}X)` with one tensor per site.
pub fn dense_state_sites(sites: &[&MpsTensor], x: &CMat) -> Result<CVec> {
    let n = sites.len();
    let first = sites
        .first()
        .ok_or_else(|| Error::Invalid("need at least one site".into()))?;
    let (p, d) = (first.phys_dim, first.bond_dim);
    if sites.iter().any(|t| t.phys_dim != p || t.bond_dim != d) {
        return Err(Error::Dimension("site tensors must share their dimensions".into()));
    }
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Dimension("boundary must match the bond dimension".into()));
    }
    let total = checked_dim(p, n)?;
    // Split the leading digits into independent chunks.
    let mut top = 0;
    while top < n && p.pow(top as u32) < 256 {
        top += 1;
    }
    let chunk_len = p.pow((n - top) as u32);
    let chunks: Vec<Vec<C64>> = (0..p.pow(top as u32))
        .into_par_iter()
        .map(|c| {
            let mut digits = vec![0; top];
            let mut rest = c;
            for k in (0..top).rev() {
                digits[k] = rest % p;
                rest /= p;
            }
            let prefix = digits
                .iter()
                .enumerate()
                .fold(identity(d), |acc, (k, &i)| acc * &sites[k].matrices[i]);
            let mut out = Vec::with_capacity(chunk_len);
            fill_amplitudes(&sites[top..], x, &prefix, &mut out);
            out
        })
        .collect();
    let mut amps = Vec::with_capacity(total);
    for ch in chunks {
        amps.extend(ch);
    }
    Ok(CVec::from_vec(amps))
}

fn fill_amplitudes(rest: &[&MpsTensor], x: &CMat, prefix: &CMat, out: &mut Vec<C64>) {
    match rest.split_first() {
        None => out.push(trace(&(prefix * x))),
        Some((t, tail)) => {
            for m in &t.matrices {
                fill_amplitudes(tail, x, &(prefix * m), out);
            }
        }
    }
}

/// Binary powers `T^{2^k}` for fast evaluation of `T^m`, `m ≤ max_exp`.
#[derive(Clone, Debug)]
pub struct PowerCache {
    squares: Vec<CMat>,
    dim: usize,
}

impl PowerCache {
    pub fn new(t: &CMat, max_exp: usize) -> Self {
        let mut squares = vec![t.clone()];
        while (1usize << squares.len()) <= max_exp {
            let last = squares.last().unwrap();
            squares.push(last * last);
        }
        Self {
            squares,
            dim: t.nrows(),
        }
    }

    pub fn base(&self) -> &CMat {
        &self.squares[0]
    }

    pub fn pow(&self, m: usize) -> CMat {
        let mut result: Option<CMat> = None;
        let mut bit = 0;
        let mut rest = m;
        while rest > 0 {
            if rest & 1 == 1 {
                let sq = self.square(bit);
                result = Some(match result {
                    None => sq,
                    Some(r) => r * sq,
                });
            }
            rest >>= 1;
            bit += 1;
        }
        result.unwrap_or_else(|| identity(self.dim))
    }

    fn square(&self, bit: usize) -> CMat {
        match self.squares.get(bit) {
            Some(s) => s.clone(),
            None => {
                let mut s = self.squares.last().unwrap().clone();
                for _ in self.squares.len() - 1..bit {
                    s = &s * &s;
                }
                s
            }
        }
    }
}

/// Normalizes a support to sites mod `n`, checking for repeats.
pub fn normalize_support(support: &[usize], n: usize) -> Result<Vec<usize>> {
    let sites: Vec<usize> = support.iter().map(|&s| s % n).collect();
    let mut sorted = sites.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != sites.len() {
        return Err(Error::Dimension(format!("support {support:?} repeats a site mod {n}")));
    }
    Ok(sites)
}

/// Walk order for a support on the ring: sites in cyclic order starting just
/// after the largest gap, so the contraction window is as short as possible.
#[derive(Clone, Debug)]
pub(crate) struct Window {
    /// Sites in walk order.
    pub sites: Vec<usize>,
    /// For each walk position, the operator factor acting there.
    pub factor: Vec<usize>,
    /// Whether the seam between site n−1 and site 0 lies inside the window.
    pub wraps: bool,
}

impl Window {
    pub fn new(support: &[usize], n: usize) -> Self {
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by_key(|&k| support[k]);
        let sorted: Vec<usize> = order.iter().map(|&k| support[k]).collect();
        let d = sorted.len();
        // gap after sorted[k] going forward around the ring
        let gap = |k: usize| {
            if k + 1 < d {
                sorted[k + 1] - sorted[k] - 1
            } else {
                n - 1 - sorted[d - 1] + sorted[0]
            }
        };
        let mut best = d - 1;
        for k in 0..d - 1 {
            if gap(k) > gap(best) {
                best = k;
            }
        }
        let start = (best + 1) % d;
        let sites = (0..d).map(|t| sorted[(start + t) % d]).collect();
        let factor = (0..d).map(|t| order[(start + t) % d]).collect();
        Self {
            sites,
            factor,
            wraps: start != 0,
        }
    }
}

/// Mixed chain `⟨Ψ(A, ·)| · |Ψ(B, ·)⟩` on `n` sites with cached transfer powers.
#[derive(Clone, Debug)]
pub struct MixedChain {
    pub bra: MpsTensor,
    pub ket: MpsTensor,
    pub n: usize,
    locals: Vec<CMat>,
    powers: PowerCache,
}

impl MixedChain {
    pub fn new(bra: &MpsTensor, ket: &MpsTensor, n: usize) -> Result<Self> {
        if bra.phys_dim != ket.phys_dim {
            return Err(Error::Dimension("physical dimensions differ".into()));
        }
        if n == 0 {
            return Err(Error::Invalid("chain needs at least one site".into()));
        }
        let t = transfer_matrix(bra, ket)?;
        Ok(Self {
            bra: bra.clone(),
            ket: ket.clone(),
            n,
            locals: local_transfers(bra, ket),
            powers: PowerCache::new(&t, n),
        })
    }

    pub fn transfer(&self) -> &CMat {
        self.powers.base()
    }

    pub fn power(&self, m: usize) -> CMat {
        self.powers.pow(m)
    }

    /// `tr(∏ T_k · seam)` with `F` on `support` (`F`'s k-th tensor factor acts
    /// on `support[k]`) and `seam = conj(X₁) ⊗ X₂` between sites n−1 and 0.
    pub fn element(&self, f: &CMat, support: &[usize], seam: &CMat) -> Result<C64> {
        let p = self.bra.phys_dim;
        let n = self.n;
        let support = normalize_support(support, n)?;
        let d = support.len();
        if f.nrows() != p.pow(d as u32) || f.ncols() != f.nrows() {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, support of {d} sites needs {}",
                f.nrows(),
                f.ncols(),
                p.pow(d as u32)
            )));
        }
        let dim = self.transfer().nrows();
        if seam.nrows() != dim || seam.ncols() != dim {
            return Err(Error::Dimension(
                "seam operator does not match the transfer dimension".into(),
            ));
        }
        if d == 0 {
            return Ok(f[(0, 0)] * trace(&(self.power(n) * seam)));
        }
        let window = Window::new(&support, n);
        let e_f = self.window_operator(f, &window, seam);
        let first = window.sites[0];
        let last = window.sites[d - 1];
        let value = if window.wraps {
            trace(&(e_f * self.power(first - last - 1)))
        } else {
            trace(&(e_f * self.power(n - 1 - last) * seam * self.power(first)))
        };
        Ok(value)
    }

    /// Contracted window from the first to the last support site in walk order.
    fn window_operator(&self, f: &CMat, window: &Window, seam: &CMat) -> CMat {
        let p = self.bra.phys_dim;
        let n = self.n;
        let d = window.sites.len();
        // blocks[i * p^t + j] holds the open-index product for bra digits i, ket digits j.
        let mut blocks: Vec<CMat> = vec![identity(self.transfer().nrows())];
        for t in 0..d {
            if t > 0 {
                let (prev, cur) = (window.sites[t - 1], window.sites[t]);
                let connector = if cur > prev {
                    self.power(cur - prev - 1)
                } else {
                    self.power(n - 1 - prev) * seam * self.power(cur)
                };
                blocks = blocks.into_par_iter().map(|b| b * &connector).collect();
            }
            let width = p.pow(t as u32);
            let next_width = width * p;
            let mut next = vec![CMat::zeros(0, 0); next_width * next_width];
            for i in 0..width {
                for j in 0..width {
                    let block = &blocks[i * width + j];
                    for m in 0..p {
                        for k in 0..p {
                            next[(i * p + m) * next_width + (j * p + k)] = block * &self.locals[m * p + k];
                        }
                    }
                }
            }
            blocks = next;
        }
        let width = p.pow(d as u32);
        // Map walk-order digits to the operator's own factor order.
        let reorder = |mut idx: usize| {
            let mut out = 0;
            for t in (0..d).rev() {
                out += (idx % p) * p.pow((d - 1 - window.factor[t]) as u32);
                idx /= p;
            }
            out
        };
        let dim = self.transfer().nrows();
        let mut e_f = CMat::zeros(dim, dim);
        for i in 0..width {
            let fi = reorder(i);
            for j in 0..width {
                let w = f[(fi, reorder(j))];
                if w != ZERO {
                    e_f += &blocks[i * width + j] * w;
                }
            }
        }
        e_f
    }
}

/// `⟨Ψ(A₁,X₁,n)| F_support ⊗ I |Ψ(A₂,X₂,n)⟩` by transfer contraction.
pub fn matrix_element_transfer(
    a1: &MpsTensor,
    x1: &CMat,
    a2: &MpsTensor,
    x2: &CMat,
    f: &CMat,
    support: &[usize],
    n: usize,
) -> Result<C64> {
    if x1.nrows() != a1.bond_dim || x2.nrows() != a2.bond_dim {
        return Err(Error::Dimension("boundaries must match the bond dimensions".into()));
    }
    let chain = MixedChain::new(a1, a2, n)?;
    chain.element(f, support, &seam(x1, x2))
}

/// `conj(X₁) ⊗ X₂`.
pub fn seam(x1: &CMat, x2: &CMat) -> CMat {
    kron(&x1.map(|v| v.conj()), x2)
}

/// `⟨Ψ(A₁,X₁)|Ψ(A₂,X₂)⟩ = tr(E^n (conj(X₁)⊗X₂))`.
pub fn overlap_transfer(a1: &MpsTensor, x1: &CMat, a2: &MpsTensor, x2: &CMat, n: usize) -> Result<C64> {
    let chain = MixedChain::new(a1, a2, n)?;
    Ok(trace(&(chain.power(n) * seam(x1, x2))))
}

/// The state `scale · |Ψ(A, X)⟩` on a ring, kept in transfer form.
#[derive(Clone, Debug)]
pub struct MpsHandle {
    pub tensor: MpsTensor,
    pub boundary: CMat,
    pub scale: f64,
}

impl MpsHandle {
    /// Handle rescaled to unit norm on `n` sites.
    pub fn normalized(tensor: MpsTensor, boundary: CMat, n: usize) -> Result<Self> {
        let norm2 = overlap_transfer(&tensor, &boundary, &tensor, &boundary, n)?.re;
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::Invalid(format!("state has squared norm {norm2}")));
        }
        Ok(Self {
            tensor,
            boundary,
            scale: 1.0 / norm2.sqrt(),
        })
    }

    pub fn dense(&self, n: usize) -> Result<CVec> {
        Ok(dense_state(&self.tensor, &self.boundary, n)? * c64(self.scale, 0.0))
    }

    /// `⟨self|F|ket⟩` on `n` sites.
    pub fn element(&self, ket: &MpsHandle, f: &CMat, support: &[usize], n: usize) -> Result<C64> {
        let raw = matrix_element_transfer(&self.tensor, &self.boundary, &ket.tensor, &ket.boundary, f, support, n)?;
        Ok(raw * (self.scale * ket.scale))
    }
}

/// A state either as a dense vector or in transfer form.
#[derive(Clone, Debug)]
pub enum StateHandle {
    Dense(CVec),
    Transfer(MpsHandle),
}

impl StateHandle {
    pub fn to_dense(&self, n: usize) -> Result<CVec> {
        match self {
            Self::Dense(v) => Ok(v.clone()),
            Self::Transfer(h) => h.dense(n),
        }
    }
}

/// Gap tolerance used when sampling random injective tensors; stricter than
/// the default so fixtures stay well conditioned.
pub const RANDOM_GAP_TOL: f64 = 1e-3;

/// Gaussian tensor, spectral-radius-normalized, resampled until injective.
pub fn random_injective_mps(p: usize, d: usize, seed: u64) -> Result<MpsTensor> {
    if p < 2 || d < 1 {
        return Err(Error::Invalid(format!("need p ≥ 2 and D ≥ 1, got p = {p}, D = {d}")));
    }
    let mut g = rng::stream(seed, 0);
    for _ in 0..100 {
        let mats = (0..p).map(|_| rng::complex_gaussian_matrix(&mut g, d, d)).collect();
        let a = MpsTensor::new(mats)?;
        let Ok(a) = normalize_spectral_radius(&a) else { continue };
        if is_injective(&a, RANDOM_GAP_TOL).injective {
            return Ok(a);
        }
    }
    Err(Error::NotPrimitive(format!(
        "100 consecutive rejections for p = {p}, D = {d}, seed = {seed}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matrix_unit, vectorize};

    fn omega(n: usize) -> C64 {
        linalg::phase(2.0 * std::f64::consts::PI / n as f64)
    }

    fn magnon(n: usize) -> (MpsTensor, CMat) {
        let w = omega(n);
        let a0 = matrix_unit(2, 1, 0);
        let a1 = CMat::from_diagonal(&CVec::from_vec(vec![ONE, w]));
        (MpsTensor::new(vec![a0, a1]).unwrap(), matrix_unit(2, 0, 1))
    }

    #[test]
    fn magnon_transfer_matches_listed_form() {
        let n = 7;
        let w = omega(n);
        let (a, _) = magnon(n);
        let e = transfer_matrix(&a, &a).unwrap();
        let mut expect = CMat::zeros(4, 4);
        expect[(0, 0)] = ONE;
        expect[(1, 1)] = w;
        expect[(2, 2)] = w.conj();
        expect[(3, 3)] = ONE;
        expect[(3, 0)] = ONE;
        assert!((e - expect).norm() < 1e-15);
        let sm = matrix_unit(2, 0, 1);
        let es = generalized_transfer(&a, &a, &sm).unwrap();
        let mut expect = CMat::zeros(4, 4);
        expect[(2, 0)] = ONE;
        expect[(3, 1)] = w;
        assert!((es - expect).norm() < 1e-15);
    }

    #[test]
    fn trivial_transfer() {
        let a = MpsTensor::new(vec![identity(3)]).unwrap();
        assert_eq!(transfer_matrix(&a, &a).unwrap(), identity(9));
        let t = transfer_op(&a, None).unwrap();
        assert!((t.rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_magnon_examples() {
        let n = 3;
        let w = omega(n);
        let (a, x) = magnon(n);
        let psi = dense_state(&a, &x, n).unwrap();
        let mut expect = CVec::zeros(8);
        expect[0b011] = w.conj() * w;
        expect[0b101] = w.conj() * w * w;
        expect[0b110] = w.conj() * w * w * w;
        assert!((psi - expect).norm() < 1e-14);
        let (a, x) = magnon(4);
        assert!((dense_state(&a, &x, 4).unwrap().norm_squared() - 4.0).abs() < 1e-12);
        let one = MpsTensor::new(vec![identity(1)]).unwrap();
        let v = dense_state(&one, &identity(1), 5).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0] - ONE).norm() < 1e-15);
    }

    #[test]
    fn dense_cap_enforced() {
        let (a, x) = magnon(21);
        assert!(matches!(dense_state(&a, &x, 21), Err(Error::DenseCap { .. })));
    }

    #[test]
    fn injectivity_examples() {
        let (a, _) = magnon(6);
        assert!(!is_injective(&a, DEFAULT_GAP_TOL).injective);
        let h = identity(2) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let b = MpsTensor::new(vec![h.clone(), h]).unwrap();
        assert!(!is_injective(&b, DEFAULT_GAP_TOL).injective);
        let scalar = random_injective_mps(2, 1, 3).unwrap();
        assert!(is_injective(&scalar, DEFAULT_GAP_TOL).injective);
    }

    #[test]
    fn random_tensor_is_deterministic() {
        let a = random_injective_mps(2, 3, 1).unwrap();
        let b = random_injective_mps(2, 3, 1).unwrap();
        assert_eq!(a, b);
        assert!(is_injective(&a, DEFAULT_GAP_TOL).injective);
        assert!((spectral_radius(&a) - 1.0).abs() < 1e-10);
        assert!(random_injective_mps(1, 3, 1).is_err());
    }

    #[test]
    fn fixed_points_of_random_tensor() {
        let a = random_injective_mps(2, 3, 1).unwrap();
        let t = transfer_op(&a, None).unwrap();
        let l = vectorize(t.left_fixed.as_ref().unwrap());
        let r = vectorize(t.right_fixed.as_ref().unwrap());
        assert!((l.adjoint() * &t.matrix - l.adjoint()).norm() < 1e-10);
        assert!((&t.matrix * &r - &r).norm() < 1e-10);
        assert!(t.lambda2 < t.rho);
    }

    #[test]
    fn canonical_form_examples() {
        let a = random_injective_mps(2, 3, 7).unwrap();
        let c = canonicalize_with_gauge(&a).unwrap();
        let fp = fixed_points(&c.tensor).unwrap();
        assert!((&fp.right / fp.right[(0, 0)] - identity(3)).norm() < 1e-9);
        let (rr, rl) = canonical_residuals(&c.tensor, &c.lambda);
        assert!(rr < 1e-10 && rl < 1e-10, "{rr} {rl}");
        assert!((c.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Idempotence up to a diagonal unitary.
        let c2 = canonicalize_with_gauge(&c.tensor).unwrap();
        let (rr, rl) = canonical_residuals(&c2.tensor, &c2.lambda);
        assert!(rr < 1e-10 && rl < 1e-10);
        for (x, y) in c.lambda.iter().zip(&c2.lambda) {
            assert!((x - y).abs() < 1e-10);
        }
        let g = &c2.gauge;
        let off: f64 = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| g[(i, j)].norm())
            .sum();
        assert!(off < 1e-8, "gauge not diagonal: {g}");
    }

    #[test]
    fn canonicalize_rejects_magnon() {
        let (a, _) = magnon(5);
        assert!(matches!(canonicalize(&a), Err(Error::NotPrimitive(_))));
    }

    #[test]
    fn operator_transfer_routes_agree() {
        let a = random_injective_mps(2, 2, 11).unwrap();
        let b = random_injective_mps(2, 3, 12).unwrap();
        let mut g = rng::stream(5, 0);
        let f = rng::complex_gaussian_matrix(&mut g, 4, 4);
        let direct = operator_transfer(&a, &b, &f).unwrap();
        let basis = operator_transfer_product_basis(&a, &b, &f).unwrap();
        assert!((&direct - &basis).norm() < 1e-12 * direct.norm().max(1.0));
        let e = transfer_matrix(&a, &b).unwrap();
        let id = operator_transfer(&a, &b, &identity(8)).unwrap();
        assert!((id - &e * &e * &e).norm() < 1e-12);
        assert!(operator_transfer(&a, &b, &identity(1)).is_err());
    }

    #[test]
    fn power_cache_matches_direct_powers() {
        let a = random_injective_mps(2, 2, 2).unwrap();
        let e = transfer_matrix(&a, &a).unwrap();
        let cache = PowerCache::new(&e, 40);
        for m in [0, 1, 5, 17, 40, 77] {
            assert!((cache.pow(m) - linalg::matrix_power(&e, m)).norm() < 1e-12);
        }
    }

    #[test]
    fn window_starts_after_largest_gap() {
        let w = Window::new(&[1, 8], 10);
        assert_eq!(w.sites, vec![8, 1]);
        assert!(w.wraps);
        assert_eq!(w.factor, vec![1, 0]);
        let w = Window::new(&[5, 2, 3], 10);
        assert_eq!(w.sites, vec![2, 3, 5]);
        assert_eq!(w.factor, vec![1, 2, 0]);
        assert!(!w.wraps);
    }
}
