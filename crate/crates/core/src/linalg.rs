//! Dense complex linear algebra: Kronecker products, partial traces,
//! vectorization, spectra and numerical Jordan structure.
//!
//! Vectorization is column-major, `|X⟩⟩ = Σ X[a,b] |b⟩⊗|a⟩`, so that
//! `(conj(A)⊗A)|X⟩⟩ = |A X A†⟩⟩` with the standard Kronecker block order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Largest state vector the dense routines will build.
pub const DENSE_CAP: usize = 1 << 20;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{iθ}`
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Builds a matrix from row-major real/imaginary pairs.
pub fn from_rows(rows: usize, cols: usize, entries: &[(f64, f64)]) -> CMat {
    assert_eq!(entries.len(), rows * cols, "entry count");
    CMat::from_fn(rows, cols, |i, j| {
        let (re, im) = entries[i * cols + j];
        c64(re, im)
    })
}

/// Rank-one `|i⟩⟨j|` of size `dim`.
pub fn matrix_unit(dim: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(i, j)] = ONE;
    m
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMat>) -> CMat {
    factors.into_iter().fold(identity(1), |acc, f| kron(&acc, f))
}

pub fn vectorize(x: &CMat) -> CVec {
    CVec::from_column_slice(x.as_slice())
}

pub fn devectorize(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be a {rows}x{cols} matrix",
            v.len()
        )));
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

/// Hilbert–Schmidt inner product `tr(X†Y)`.
pub fn hs_inner(x: &CMat, y: &CMat) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.norm()
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > rel_tol * smax).count(),
        _ => 0,
    }
}

pub fn inf_norm(m: &CMat) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `m^k` by repeated squaring.
pub fn matrix_power(m: &CMat, mut k: usize) -> CMat {
    assert!(m.is_square(), "matrix_power needs a square matrix");
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Operator and Frobenius norms of `m^k` for each requested `k`.
pub fn matrix_power_norms(m: &CMat, powers: &[usize]) -> Vec<(f64, f64)> {
    powers
        .iter()
        .map(|&k| {
            let p = matrix_power(m, k);
            (op_norm(&p), frobenius(&p))
        })
        .collect()
}

fn is_lower_triangular(m: &CMat) -> bool {
    (0..m.ncols()).all(|j| (0..j).all(|i| m[(i, j)] == ZERO))
}

fn is_upper_triangular(m: &CMat) -> bool {
    (0..m.ncols()).all(|j| (j + 1..m.nrows()).all(|i| m[(i, j)] == ZERO))
}

/// Eigenvalues of a square matrix.
///
/// Exactly triangular inputs return their diagonal; everything else goes
/// through a complex Schur decomposition.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    if m.nrows() == 0 {
        return Vec::new();
    }
    if is_lower_triangular(m) || is_upper_triangular(m) {
        return m.diagonal().iter().copied().collect();
    }
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    t.diagonal().iter().copied().collect()
}

/// Eigenvalues sorted by decreasing modulus.
pub fn eigenvalues_by_modulus(m: &CMat) -> Vec<C64> {
    let mut ev = eigenvalues(m);
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    ev
}

/// Eigen-decomposition of a Hermitian matrix: ascending real eigenvalues and
/// the matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| c64(f(v), 0.0))));
    &vecs * d * vecs.adjoint()
}

/// Square root of a positive semidefinite matrix; tiny negative eigenvalues are clipped.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_fn(m, |v| v.max(0.0).sqrt())
}

/// Reduced operator on the `keep` sites of `rho`, acting on sites with
/// dimensions `local_dims` (site 0 is the most significant digit).
pub fn partial_trace(rho: &CMat, local_dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let total: usize = local_dims.iter().product();
    if !rho.is_square() || rho.nrows() != total {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, local dimensions give {total}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let keep = normalized_sites(keep, local_dims.len())?;
    let traced: Vec<usize> = (0..local_dims.len()).filter(|s| !keep.contains(s)).collect();
    let keep_dim: usize = keep.iter().map(|&s| local_dims[s]).product();
    let env_dim: usize = traced.iter().map(|&s| local_dims[s]).product();
    let index = SiteIndexer::new(local_dims, &keep, &traced);
    let mut out = CMat::zeros(keep_dim, keep_dim);
    for a in 0..keep_dim {
        for b in 0..keep_dim {
            let mut acc = ZERO;
            for e in 0..env_dim {
                acc += rho[(index.join(a, e), index.join(b, e))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Reduced density matrix of the pure state `psi` on the `keep` sites,
/// without forming `|ψ⟩⟨ψ|`.
pub fn reduced_density(psi: &CVec, local_dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let total: usize = local_dims.iter().product();
    if psi.len() != total {
        return Err(Error::Dimension(format!(
            "state has {} amplitudes, local dimensions give {total}",
            psi.len()
        )));
    }
    let keep = normalized_sites(keep, local_dims.len())?;
    let traced: Vec<usize> = (0..local_dims.len()).filter(|s| !keep.contains(s)).collect();
    let keep_dim: usize = keep.iter().map(|&s| local_dims[s]).product();
    let env_dim: usize = traced.iter().map(|&s| local_dims[s]).product();
    let index = SiteIndexer::new(local_dims, &keep, &traced);
    // Column e of `m` holds the kept-site amplitudes for environment configuration e.
    let m = CMat::from_fn(keep_dim, env_dim, |a, e| psi[index.join(a, e)]);
    Ok(&m * m.adjoint())
}

fn normalized_sites(sites: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut v = sites.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.len() != sites.len() || v.last().is_some_and(|&s| s >= n) {
        return Err(Error::Dimension(format!("invalid site set {sites:?} for {n} sites")));
    }
    Ok(v)
}

/// Maps (kept index, environment index) pairs to a full lexicographic index.
struct SiteIndexer {
    keep_strides: Vec<(usize, usize)>,
    env_strides: Vec<(usize, usize)>,
}

impl SiteIndexer {
    fn new(local_dims: &[usize], keep: &[usize], traced: &[usize]) -> Self {
        let n = local_dims.len();
        let mut stride = vec![1usize; n];
        for s in (0..n.saturating_sub(1)).rev() {
            stride[s] = stride[s + 1] * local_dims[s + 1];
        }
        let pick = |sites: &[usize]| sites.iter().map(|&s| (local_dims[s], stride[s])).collect();
        Self {
            keep_strides: pick(keep),
            env_strides: pick(traced),
        }
    }

    fn join(&self, a: usize, e: usize) -> usize {
        spread(a, &self.keep_strides) + spread(e, &self.env_strides)
    }
}

fn spread(mut idx: usize, strides: &[(usize, usize)]) -> usize {
    let mut out = 0;
    for &(dim, stride) in strides.iter().rev() {
        out += (idx % dim) * stride;
        idx /= dim;
    }
    out
}

/// Pauli matrix `σ_k` for `k ∈ {0, 1, 2, 3}` = `{I, X, Y, Z}`, with `Z|0⟩ = |0⟩`.
pub fn pauli(k: usize) -> CMat {
    match k {
        0 => identity(2),
        1 => from_rows(2, 2, &[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]),
        2 => from_rows(2, 2, &[(0.0, 0.0), (0.0, -1.0), (0.0, 1.0), (0.0, 0.0)]),
        3 => from_rows(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)]),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Pauli string with base-4 digits of `index` (most significant first) on `d` sites.
pub fn pauli_string(index: usize, d: usize) -> CMat {
    let factors: Vec<CMat> = (0..d)
        .map(|t| pauli((index / 4usize.pow((d - 1 - t) as u32)) % 4))
        .collect();
    kron_all(&factors)
}

/// Cyclic shift on `n` sites of dimension `p`:
/// `(Sψ)(i₀, …, i_{n−1}) = ψ(i_{n−1}, i₀, …, i_{n−2})`.
pub fn cyclic_shift(psi: &CVec, n: usize, p: usize) -> Result<CVec> {
    let len = p.pow(n as u32);
    if psi.len() != len {
        return Err(Error::Dimension(format!(
            "state has length {}, expected {len}",
            psi.len()
        )));
    }
    let top = len / p;
    Ok(CVec::from_fn(len, |idx, _| psi[(idx % p) * top + idx / p]))
}

/// Applies the operator `op` (acting on `support` in the listed order) to a
/// state of `n` sites of dimension `p`.
pub fn apply_local(psi: &CVec, op: &CMat, support: &[usize], n: usize, p: usize) -> Result<CVec> {
    let d = support.len();
    let local = p.pow(d as u32);
    if op.nrows() != local || op.ncols() != local {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, support of {d} sites needs {local}",
            op.nrows(),
            op.ncols()
        )));
    }
    if psi.len() != p.pow(n as u32) {
        return Err(Error::Dimension(format!("state length {} is not {p}^{n}", psi.len())));
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != d || sorted.last().is_some_and(|&s| s >= n) {
        return Err(Error::Dimension(format!("invalid support {support:?} for {n} sites")));
    }
    let stride = |s: usize| p.pow((n - 1 - s) as u32);
    let op_strides: Vec<(usize, usize)> = support.iter().map(|&s| (p, stride(s))).collect();
    let env_sites: Vec<usize> = (0..n).filter(|s| !support.contains(s)).collect();
    let env_strides: Vec<(usize, usize)> = env_sites.iter().map(|&s| (p, stride(s))).collect();
    let env_dim = p.pow((n - d) as u32);
    let offsets: Vec<usize> = (0..local).map(|a| spread(a, &op_strides)).collect();
    let mut out = CVec::zeros(psi.len());
    let mut block = CVec::zeros(local);
    for e in 0..env_dim {
        let base = spread(e, &env_strides);
        for (a, off) in offsets.iter().enumerate() {
            block[a] = psi[base + off];
        }
        let image = op * &block;
        for (a, off) in offsets.iter().enumerate() {
            out[base + off] = image[a];
        }
    }
    Ok(out)
}

/// Dense `⟨ψ₁| F_support ⊗ I |ψ₂⟩`.
pub fn dense_matrix_element(psi1: &CVec, psi2: &CVec, op: &CMat, support: &[usize], n: usize, p: usize) -> Result<C64> {
    let image = apply_local(psi2, op, support, n, p)?;
    Ok(psi1.dotc(&image))
}

/// Eigenvalue cluster with its Jordan block partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JordanCluster {
    pub eigenvalue: C64,
    /// Block sizes in decreasing order.
    pub block_sizes: Vec<usize>,
}

impl JordanCluster {
    pub fn multiplicity(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn largest_block(&self) -> usize {
        self.block_sizes.first().copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct JordanProfile {
    pub clusters: Vec<JordanCluster>,
    /// Diagnostics such as near-merging clusters or rank chains that did not
    /// reach the algebraic multiplicity.
    pub warnings: Vec<String>,
}

impl JordanProfile {
    /// Size of the largest Jordan block over all clusters (h*).
    pub fn largest_block(&self) -> usize {
        self.clusters
            .iter()
            .map(JordanCluster::largest_block)
            .max()
            .unwrap_or(0)
    }

    pub fn dimension(&self) -> usize {
        self.clusters.iter().map(JordanCluster::multiplicity).sum()
    }

    /// The cluster whose eigenvalue lies within `tol` of `lambda`.
    pub fn cluster_near(&self, lambda: C64, tol: f64) -> Option<&JordanCluster> {
        self.clusters.iter().find(|c| (c.eigenvalue - lambda).norm() <= tol)
    }

    /// Largest block among clusters of maximal modulus.
    pub fn largest_peripheral_block(&self, tol: f64) -> usize {
        let rho = self.clusters.iter().map(|c| c.eigenvalue.norm()).fold(0.0, f64::max);
        self.clusters
            .iter()
            .filter(|c| c.eigenvalue.norm() >= rho - tol)
            .map(JordanCluster::largest_block)
            .max()
            .unwrap_or(0)
    }
}

pub const DEFAULT_CLUSTER_REL_TOL: f64 = 1e-7;
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Jordan profile with the default tolerances (`1e-7·‖M‖∞`, `1e-9`).
pub fn jordan_profile_default(m: &CMat) -> JordanProfile {
    let tol = DEFAULT_CLUSTER_REL_TOL * inf_norm(m).max(f64::MIN_POSITIVE);
    jordan_profile(m, tol, DEFAULT_RANK_TOL)
}

/// Jordan profile from blind single-linkage clustering of the eigenvalues.
pub fn jordan_profile(m: &CMat, cluster_tol: f64, rank_tol: f64) -> JordanProfile {
    let ev = eigenvalues(m);
    let groups = single_linkage(&ev, cluster_tol);
    let reps: Vec<(C64, usize)> = groups
        .iter()
        .map(|g| (g.iter().map(|&i| ev[i]).sum::<C64>() / g.len() as f64, g.len()))
        .collect();
    profile_from_clusters(m, &reps, cluster_tol, rank_tol, Vec::new())
}

/// Jordan profile with eigenvalues assigned to known cluster seeds.
///
/// Each eigenvalue joins the nearest seed within `cluster_tol`; eigenvalues
/// matching no seed are reported in the warnings and clustered blindly.
pub fn jordan_profile_seeded(m: &CMat, seeds: &[C64], cluster_tol: f64, rank_tol: f64) -> JordanProfile {
    let ev = eigenvalues(m);
    let mut counts = vec![0usize; seeds.len()];
    let mut strays = Vec::new();
    for &z in &ev {
        let nearest = seeds
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (z - s).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((i, dist)) if dist <= cluster_tol => counts[i] += 1,
            _ => strays.push(z),
        }
    }
    let mut warnings = Vec::new();
    let mut reps: Vec<(C64, usize)> = seeds
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| (s, c))
        .collect();
    if !strays.is_empty() {
        warnings.push(format!("{} eigenvalues matched no seed", strays.len()));
        for g in single_linkage(&strays, cluster_tol) {
            let mean = g.iter().map(|&i| strays[i]).sum::<C64>() / g.len() as f64;
            reps.push((mean, g.len()));
        }
    }
    profile_from_clusters(m, &reps, cluster_tol, rank_tol, warnings)
}

fn single_linkage(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Nullities `n₁ ≥ n₂ ≥ …` of the orthogonal staircase reduction of `n`, so
/// that `dim ker nᵏ = n₁ + ⋯ + n_k`.
///
/// Each step compresses the current matrix onto the orthogonal complement of
/// its kernel. Ranks are measured on these compressions rather than on
/// powers, whose small singular values sink below any relative threshold for
/// strongly non-normal matrices.
fn staircase_nullities(n: &CMat, rank_tol: f64, max_steps: usize) -> Vec<usize> {
    let scale = singular_values(n).first().copied().unwrap_or(0.0);
    if scale == 0.0 {
        return if n.nrows() == 0 { Vec::new() } else { vec![n.nrows()] };
    }
    let mut out = Vec::new();
    let mut cur = n.clone();
    for _ in 0..max_steps {
        let d = cur.nrows();
        if d == 0 {
            break;
        }
        let svd = cur.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let rank = svd.singular_values.iter().filter(|&&x| x > rank_tol * scale).count();
        if rank == d {
            break;
        }
        out.push(d - rank);
        let keep: Vec<usize> = (0..d).filter(|&i| svd.singular_values[i] > rank_tol * scale).collect();
        let w = CMat::from_fn(d, keep.len(), |i, j| v_t[(keep[j], i)].conj());
        cur = w.adjoint() * cur * w;
    }
    out
}

fn profile_from_clusters(
    m: &CMat,
    reps: &[(C64, usize)],
    cluster_tol: f64,
    rank_tol: f64,
    mut warnings: Vec<String>,
) -> JordanProfile {
    let dim = m.nrows();
    for (i, a) in reps.iter().enumerate() {
        for b in &reps[i + 1..] {
            if (a.0 - b.0).norm() <= 10.0 * cluster_tol {
                warnings.push(format!(
                    "clusters at {} and {} lie within 10x the clustering tolerance",
                    a.0, b.0
                ));
            }
        }
    }
    let mut clusters = Vec::with_capacity(reps.len());
    for &(lambda, mult) in reps {
        let shifted = m - identity(dim) * lambda;
        // at_least[k-1] = number of blocks of size ≥ k
        let at_least = staircase_nullities(&shifted, rank_tol, mult + 1);
        if at_least.iter().sum::<usize>() != mult {
            warnings.push(format!(
                "nullity chain at {lambda} sums to {} instead of {mult}",
                at_least.iter().sum::<usize>()
            ));
        }
        let mut sizes = Vec::new();
        for k in (1..=at_least.len()).rev() {
            let exact = at_least[k - 1].saturating_sub(at_least.get(k).copied().unwrap_or(0));
            sizes.extend(std::iter::repeat_n(k, exact));
        }
        if sizes.iter().sum::<usize>() != mult {
            warnings.push(format!(
                "block sizes at {lambda} sum to {} but multiplicity is {mult}",
                sizes.iter().sum::<usize>()
            ));
        }
        clusters.push(JordanCluster {
            eigenvalue: lambda,
            block_sizes: sizes,
        });
    }
    JordanProfile { clusters, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega(n: usize) -> C64 {
        phase(2.0 * std::f64::consts::PI / n as f64)
    }

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        let w = omega(5);
        let a = CMat::from_diagonal(&CVec::from_vec(vec![ONE, w.conj()]));
        let b = CMat::from_diagonal(&CVec::from_vec(vec![ONE, w]));
        let expect = CMat::from_diagonal(&CVec::from_vec(vec![ONE, w, w.conj(), ONE]));
        assert!(close(&kron(&a, &b), &expect, 1e-15));
        let sp = matrix_unit(2, 1, 0);
        assert_eq!(kron(&sp, &sp), matrix_unit(4, 3, 0));
    }

    #[test]
    fn partial_trace_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = CVec::from_vec(vec![c64(s, 0.0), ZERO, ZERO, c64(s, 0.0)]);
        let rho = &bell * bell.adjoint();
        let r = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!(close(&r, &(identity(2) * c64(0.5, 0.0)), 1e-15));
        let rb = CMat::from_fn(2, 2, |i, j| c64(0.3 + i as f64 * 0.1, j as f64 * 0.05));
        let rb = &rb * rb.adjoint();
        let prod = kron(&matrix_unit(2, 0, 0), &rb);
        let r = partial_trace(&prod, &[2, 2], &[0]).unwrap();
        assert!(close(&r, &(matrix_unit(2, 0, 0) * trace(&rb)), 1e-15));
        assert!(reduced_density(&bell, &[2, 2], &[1]).is_ok());
        assert!(partial_trace(&rho, &[2, 3], &[0]).is_err());
    }

    #[test]
    fn vectorization_matches_hilbert_schmidt() {
        assert!((vectorize(&identity(3)).norm_squared() - 3.0).abs() < 1e-15);
        let sp = matrix_unit(2, 1, 0);
        assert!((vectorize(&sp).dotc(&vectorize(&sp)) - ONE).norm() < 1e-15);
        let x = CMat::from_fn(2, 3, |i, j| c64(i as f64, j as f64 + 1.0));
        assert_eq!(devectorize(&vectorize(&x), 2, 3).unwrap(), x);
        assert!(devectorize(&vectorize(&x), 4, 2).is_err());
    }

    #[test]
    fn transfer_action_under_vectorization() {
        let a = CMat::from_fn(2, 2, |i, j| c64(1.0 + i as f64, 0.5 * j as f64 - 0.2));
        let x = CMat::from_fn(2, 2, |i, j| c64(i as f64 - j as f64, 0.3));
        let lhs = kron(&a.map(|z| z.conj()), &a) * vectorize(&x);
        let rhs = vectorize(&(&a * &x * a.adjoint()));
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn jordan_trivial_cases() {
        let p = jordan_profile_default(&identity(2));
        assert_eq!(p.clusters.len(), 1);
        assert_eq!(p.clusters[0].block_sizes, vec![1, 1]);
        let nil = matrix_unit(2, 0, 1);
        let p = jordan_profile(&nil, 1e-7, 1e-9);
        assert_eq!(p.clusters[0].block_sizes, vec![2]);
        assert!(p.clusters[0].eigenvalue.norm() < 1e-12);
    }

    #[test]
    fn matrix_power_norm_examples() {
        let r = matrix_power_norms(&identity(3), &[0, 1, 7]);
        for (op, fro) in r {
            assert!((op - 1.0).abs() < 1e-14 && (fro - 3f64.sqrt()).abs() < 1e-14);
        }
        let r = matrix_power_norms(&matrix_unit(2, 0, 1), &[2]);
        assert_eq!(r[0], (0.0, 0.0));
        let h = 3usize;
        let lam = 0.9;
        let j = CMat::from_fn(h, h, |i, k| {
            if i == k {
                c64(lam, 0.0)
            } else if k == i + 1 {
                ONE
            } else {
                ZERO
            }
        });
        let m = 50usize;
        let (_, fro) = matrix_power_norms(&j, &[m])[0];
        let bound = 3.0 * (h as f64).powf(1.5) * (m as f64).powi(h as i32 - 1) * lam.powi((m - h + 1) as i32);
        assert!(fro <= bound, "{fro} > {bound}");
    }

    #[test]
    fn apply_local_matches_kron() {
        let n = 3;
        let psi = CVec::from_fn(8, |i, _| c64(i as f64 + 1.0, 0.5 - i as f64));
        let op = CMat::from_fn(2, 2, |i, j| c64(i as f64 + 2.0 * j as f64, 1.0));
        let full = kron_all([&identity(2), &op, &identity(2)]);
        let out = apply_local(&psi, &op, &[1], n, 2).unwrap();
        assert!((out - &full * &psi).norm() < 1e-13);
        let op2 = CMat::from_fn(4, 4, |i, j| c64((i * 4 + j) as f64, (i as f64) - 1.0));
        let swap = CMat::from_fn(4, 4, |i, j| {
            let (a, b) = (i / 2, i % 2);
            if j == b * 2 + a {
                ONE
            } else {
                ZERO
            }
        });
        // op2 on (2,0) equals swapped op2 on (0,2).
        let lhs = apply_local(&psi, &op2, &[2, 0], n, 2).unwrap();
        let rhs = apply_local(&psi, &(&swap * &op2 * &swap), &[0, 2], n, 2).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn triangular_eigenvalues_are_exact() {
        let w = omega(16);
        let m = from_rows(2, 2, &[(1.0, 0.0), (0.0, 0.0), (3.0, 0.0), (w.re, w.im)]);
        assert_eq!(eigenvalues(&m), vec![ONE, w]);
    }
}
