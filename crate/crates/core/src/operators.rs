//! Dense Hermitian operator algebra: tensor embedding, Hamiltonian assembly,
//! Gibbs states, partial traces, expectations, variances and connected
//! correlators. Eigendecompositions go through faer; the public API speaks
//! nalgebra matrices.

use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{LatticeModel, SiteId};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("operator is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("support sites {0:?} are not contained in the lattice")]
    SupportOutsideLattice(Vec<SiteId>),
    #[error("edge {edge} is not contained in the target support")]
    EdgeOutsideSupport { edge: usize },
    #[error("eigendecomposition failed")]
    EigenFailed,
    #[error("density matrix eigenvalue {0:.3e} below PSD tolerance")]
    NegativeEigenvalue(f64),
    #[error("density matrix trace {0} too far from 1")]
    BadTrace(f64),
    #[error("exponent guard: |beta| * spectral span = {0:.3e} too large")]
    ExponentGuard(f64),
}

/// Pauli matrices and the qubit identity.
pub mod pauli {
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn sx() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn sy() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn sz() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    pub fn id2() -> DMatrix<Complex64> {
        DMatrix::identity(2, 2)
    }
}

/// Max-entry residual of M - M†.
pub fn hermiticity_residual(m: &DMatrix<Complex64>) -> f64 {
    let mut res = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            res = res.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    res
}

/// Largest singular value of a Hermitian matrix (max |eigenvalue|).
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    let (vals, _) = eigh(m).expect("spectral_norm: eigendecomposition failed");
    vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

fn to_faer_c(m: &DMatrix<Complex64>) -> Mat<faer::c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer_c(m: &Mat<faer::c64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Matrix product through faer (fast even on large dense operands).
pub fn matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.nrows());
    from_faer_c(&(to_faer_c(a) * to_faer_c(b)))
}

/// a† b through faer.
pub fn adjoint_mul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.nrows(), b.nrows());
    let fa = to_faer_c(a);
    let fb = to_faer_c(b);
    from_faer_c(&(fa.adjoint() * &fb))
}

/// Hermitian eigendecomposition, eigenvalues ascending. Returns the
/// eigenvalues and the unitary of eigenvectors (columns). Matrices whose
/// imaginary part vanishes take a real symmetric fast path.
pub fn eigh(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>), OperatorError> {
    let (vals, vecs) = eigh_faer(m)?;
    Ok((vals, from_faer_c(&vecs)))
}

pub(crate) fn eigh_faer(
    m: &DMatrix<Complex64>,
) -> Result<(Vec<f64>, Mat<faer::c64>), OperatorError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(OperatorError::DimensionMismatch { expected: n, got: m.ncols() });
    }
    let max_im = m.iter().fold(0.0f64, |a, v| a.max(v.im.abs()));
    let (mut vals, vecs): (Vec<f64>, Mat<faer::c64>) = if max_im < 1e-14 {
        let fm = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|_| OperatorError::EigenFailed)?;
        let s = evd.S();
        let u = evd.U();
        let vals = (0..n).map(|i| s[i]).collect();
        let vecs = Mat::from_fn(n, n, |i, j| faer::c64::new(u[(i, j)], 0.0));
        (vals, vecs)
    } else {
        let fm = to_faer_c(m);
        let evd = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|_| OperatorError::EigenFailed)?;
        let s = evd.S();
        let u = evd.U();
        let vals = (0..n).map(|i| s[i].re).collect::<Vec<f64>>();
        let vecs = Mat::from_fn(n, n, |i, j| u[(i, j)]);
        (vals, vecs)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    let sorted_vecs = Mat::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    vals = sorted_vals;
    Ok((vals, sorted_vecs))
}

/// Index bookkeeping for one tensor factor split: the `support` factors
/// against everything else, under the model's global site ordering
/// (site 0 is the most significant factor).
#[derive(Debug, Clone)]
pub struct SupportMap {
    sub_dim: usize,
    env_dim: usize,
    sub_offsets: Vec<usize>,
    env_offsets: Vec<usize>,
}

impl SupportMap {
    /// `support` must be sorted and within `0..dims.len()`.
    pub fn new(dims: &[usize], support: &[usize]) -> Self {
        let n = dims.len();
        let mut stride = vec![1usize; n];
        for s in (0..n.saturating_sub(1)).rev() {
            stride[s] = stride[s + 1] * dims[s + 1];
        }
        let total: usize = dims.iter().product();
        let offsets_for = |sites: &[usize]| -> (usize, Vec<usize>) {
            let sub_dims: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
            let dim: usize = sub_dims.iter().product();
            let mut offs = vec![0usize; dim];
            for (idx, off) in offs.iter_mut().enumerate() {
                let mut rem = idx;
                let mut acc = 0usize;
                for (k, &s) in sites.iter().enumerate() {
                    let rest: usize = sub_dims[k + 1..].iter().product();
                    let digit = rem / rest;
                    rem %= rest;
                    acc += digit * stride[s];
                }
                *off = acc;
            }
            (dim, offs)
        };
        let (sub_dim, sub_offsets) = offsets_for(support);
        let env_sites: Vec<usize> = (0..n).filter(|s| !support.contains(s)).collect();
        let (env_dim, env_offsets) = offsets_for(&env_sites);
        debug_assert_eq!(sub_dim * env_dim, total);
        SupportMap { sub_dim, env_dim, sub_offsets, env_offsets }
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    /// y += (O ⊗ 𝕀_env) x, with O given on the support factor.
    pub fn apply_into(&self, op: &DMatrix<Complex64>, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(op.nrows(), self.sub_dim);
        debug_assert_eq!(x.len(), self.sub_dim * self.env_dim);
        for &eo in &self.env_offsets {
            for (i, &so_i) in self.sub_offsets.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &so_j) in self.sub_offsets.iter().enumerate() {
                    acc += op[(i, j)] * x[so_j + eo];
                }
                y[so_i + eo] += acc;
            }
        }
    }

    /// target += O ⊗ 𝕀_env as a dense matrix on the full space.
    pub fn add_embedded(&self, op: &DMatrix<Complex64>, target: &mut DMatrix<Complex64>) {
        debug_assert_eq!(op.nrows(), self.sub_dim);
        for &eo in &self.env_offsets {
            for (i, &so_i) in self.sub_offsets.iter().enumerate() {
                for (j, &so_j) in self.sub_offsets.iter().enumerate() {
                    target[(so_i + eo, so_j + eo)] += op[(i, j)];
                }
            }
        }
    }

    /// Reshape a full-space vector into a (support × environment) matrix.
    pub fn reshape(&self, v: &[Complex64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.sub_dim, self.env_dim, |i, j| {
            v[self.sub_offsets[i] + self.env_offsets[j]]
        })
    }

    /// Trace out the environment factor of a full-space matrix.
    pub fn partial_trace(&self, full: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::<Complex64>::zeros(self.sub_dim, self.sub_dim);
        for &eo in &self.env_offsets {
            for (i, &so_i) in self.sub_offsets.iter().enumerate() {
                for (j, &so_j) in self.sub_offsets.iter().enumerate() {
                    out[(i, j)] += full[(so_i + eo, so_j + eo)];
                }
            }
        }
        out
    }
}

/// An operator on a subset of sites, embedded in an ambient lattice by acting
/// as the identity elsewhere.
#[derive(Debug, Clone)]
pub struct EmbeddedOperator {
    support: Vec<SiteId>,
    matrix: DMatrix<Complex64>,
    ambient_dims: Vec<usize>,
    map: SupportMap,
}

impl EmbeddedOperator {
    pub fn new(
        ambient_dims: Vec<usize>,
        support: impl IntoIterator<Item = SiteId>,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self, OperatorError> {
        let mut support: Vec<SiteId> = support.into_iter().collect();
        support.sort_unstable();
        support.dedup();
        if let Some(&s) = support.iter().find(|&&s| s >= ambient_dims.len()) {
            return Err(OperatorError::SupportOutsideLattice(vec![s]));
        }
        let d: usize = support.iter().map(|&s| ambient_dims[s]).product();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(OperatorError::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        let map = SupportMap::new(&ambient_dims, &support);
        Ok(EmbeddedOperator { support, matrix, ambient_dims, map })
    }

    pub fn support(&self) -> &[SiteId] {
        &self.support
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn ambient_dims(&self) -> &[usize] {
        &self.ambient_dims
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dims.iter().product()
    }

    pub fn support_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn map(&self) -> &SupportMap {
        &self.map
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermiticity_residual(&self.matrix) < tol
    }

    /// (O ⊗ 𝕀) x on the full ambient space.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.map.apply_into(&self.matrix, x, &mut y);
        y
    }

    /// Dense matrix on the full ambient space.
    pub fn to_full(&self) -> DMatrix<Complex64> {
        let d = self.ambient_dim();
        let mut full = DMatrix::zeros(d, d);
        self.map.add_embedded(&self.matrix, &mut full);
        full
    }
}

/// Σ_{X∈𝓖} Ĥ_X embedded on the union of the edge supports. The empty edge
/// set gives the zero operator on an empty support.
pub fn assemble(model: &LatticeModel, edges: &[usize]) -> EmbeddedOperator {
    let mut support: Vec<SiteId> = Vec::new();
    for &e in edges {
        for &s in model.edges()[e].sites() {
            if !support.contains(&s) {
                support.push(s);
            }
        }
    }
    support.sort_unstable();
    assemble_on(model, edges, &support).expect("union support always contains every edge")
}

/// Σ_{X∈𝓖} Ĥ_X embedded on a caller-chosen support that must contain every
/// edge of 𝓖.
pub fn assemble_on(
    model: &LatticeModel,
    edges: &[usize],
    support: &[SiteId],
) -> Result<EmbeddedOperator, OperatorError> {
    let sub_dims: Vec<usize> = support.iter().map(|&s| model.dims()[s]).collect();
    let d: usize = sub_dims.iter().product();
    let mut matrix = DMatrix::<Complex64>::zeros(d, d);
    for &e in edges {
        let positions: Vec<usize> = model.edges()[e]
            .sites()
            .iter()
            .map(|s| {
                support
                    .iter()
                    .position(|t| t == s)
                    .ok_or(OperatorError::EdgeOutsideSupport { edge: e })
            })
            .collect::<Result<_, _>>()?;
        let map = SupportMap::new(&sub_dims, &positions);
        map.add_embedded(model.term(e), &mut matrix);
    }
    EmbeddedOperator::new(model.dims().to_vec(), support.iter().copied(), matrix)
}

/// The full Hamiltonian as a dense matrix on the whole lattice.
pub fn full_hamiltonian(model: &LatticeModel) -> DMatrix<Complex64> {
    let d = model.total_dim();
    let mut h = DMatrix::<Complex64>::zeros(d, d);
    for e in 0..model.n_edges() {
        let map = SupportMap::new(model.dims(), model.edges()[e].sites());
        map.add_embedded(model.term(e), &mut h);
    }
    h
}

/// Eigendecomposition of a density operator or thermal state.
#[derive(Debug, Clone)]
pub struct SpectralState {
    /// Eigenvalues, nonincreasing. Probabilities for density operators.
    pub values: Vec<f64>,
    /// Matching eigenvectors as columns of a unitary.
    pub vectors: DMatrix<Complex64>,
    pub beta: f64,
    pub trace_normalized: bool,
    /// Energies of the underlying Hamiltonian, when the state is a Gibbs
    /// state (aligned with `values`).
    pub energies: Option<Vec<f64>>,
}

impl SpectralState {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Reconstruct the dense operator Σ_i p_i |i⟩⟨i|.
    pub fn density(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let scaled = DMatrix::from_fn(n, n, |i, j| self.vectors[(i, j)] * self.values[j]);
        let adj = self.vectors.adjoint();
        matmul(&scaled, &adj)
    }

    pub fn column(&self, i: usize) -> &[Complex64] {
        let n = self.vectors.nrows();
        &self.vectors.as_slice()[i * n..(i + 1) * n]
    }

    /// Diagonalize a density matrix. Eigenvalues in [-1e-12, 0) are clamped
    /// to zero and the state renormalized; anything more negative is an
    /// error.
    pub fn from_density(rho: &DMatrix<Complex64>, beta: f64) -> Result<Self, OperatorError> {
        let res = hermiticity_residual(rho);
        if res >= 1e-10 {
            return Err(OperatorError::NotHermitian(res));
        }
        let (vals, vecs) = eigh(rho)?;
        let trace: f64 = vals.iter().sum();
        if (trace - 1.0).abs() > 1e-8 {
            return Err(OperatorError::BadTrace(trace));
        }
        let mut clamped: Vec<f64> = Vec::with_capacity(vals.len());
        for &v in &vals {
            if v < -1e-12 {
                return Err(OperatorError::NegativeEigenvalue(v));
            }
            clamped.push(v.max(0.0));
        }
        let norm: f64 = clamped.iter().sum();
        for v in &mut clamped {
            *v /= norm;
        }
        // descending
        let n = clamped.len();
        let values: Vec<f64> = clamped.iter().rev().copied().collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| vecs[(i, n - 1 - j)]);
        Ok(SpectralState { values, vectors, beta, trace_normalized: true, energies: None })
    }
}

/// Largest admissible |β|·(spectral span) in the exponent.
pub const EXP_GUARD: f64 = 700.0;

/// Gibbs state e^{-βH}/Tr e^{-βH} of a Hermitian operator, via
/// eigendecomposition with the spectrum shifted by the ground energy.
pub fn gibbs(h: &EmbeddedOperator, beta: f64) -> Result<SpectralState, OperatorError> {
    if !h.is_hermitian(1e-10) {
        return Err(OperatorError::NotHermitian(hermiticity_residual(h.matrix())));
    }
    gibbs_of_matrix(h.matrix(), beta)
}

pub fn gibbs_of_matrix(h: &DMatrix<Complex64>, beta: f64) -> Result<SpectralState, OperatorError> {
    let (energies, vecs) = eigh(h)?;
    let span = energies.last().unwrap_or(&0.0) - energies.first().unwrap_or(&0.0);
    if beta.abs() * span > EXP_GUARD {
        return Err(OperatorError::ExponentGuard(beta.abs() * span));
    }
    let reference = if beta >= 0.0 {
        *energies.first().unwrap_or(&0.0)
    } else {
        *energies.last().unwrap_or(&0.0)
    };
    let weights: Vec<f64> = energies.iter().map(|&e| (-beta * (e - reference)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    // order by probability, nonincreasing
    let n = probs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| probs[i]).collect();
    let sorted_energies: Vec<f64> = order.iter().map(|&i| energies[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok(SpectralState {
        values,
        vectors,
        beta,
        trace_normalized: true,
        energies: Some(sorted_energies),
    })
}

/// Tr_env ρ, keeping the factor over `keep` (sorted site indices into `dims`).
pub fn partial_trace(
    rho: &DMatrix<Complex64>,
    dims: &[usize],
    keep: &[SiteId],
) -> Result<DMatrix<Complex64>, OperatorError> {
    if let Some(&s) = keep.iter().find(|&&s| s >= dims.len()) {
        return Err(OperatorError::SupportOutsideLattice(vec![s]));
    }
    let total: usize = dims.iter().product();
    if rho.nrows() != total || rho.ncols() != total {
        return Err(OperatorError::DimensionMismatch { expected: total, got: rho.nrows() });
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    Ok(SupportMap::new(dims, &keep).partial_trace(rho))
}

fn check_compatible(op: &EmbeddedOperator, state: &SpectralState) -> Result<(), OperatorError> {
    let d = op.ambient_dim();
    if state.dim() != d {
        return Err(OperatorError::DimensionMismatch { expected: d, got: state.dim() });
    }
    Ok(())
}

/// ⟨O⟩ under the state; the imaginary residual must stay below 1e-10.
pub fn expectation(op: &EmbeddedOperator, state: &SpectralState) -> Result<f64, OperatorError> {
    check_compatible(op, state)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &p) in state.values.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = state.column(i);
        let ov = op.apply(v);
        let mut dot = Complex64::new(0.0, 0.0);
        for (a, b) in v.iter().zip(ov.iter()) {
            dot += a.conj() * b;
        }
        acc += dot * p;
    }
    if acc.im.abs() > 1e-10 * acc.norm().max(1.0) {
        return Err(OperatorError::NotHermitian(acc.im.abs()));
    }
    Ok(acc.re)
}

/// Var O = ⟨O²⟩ - ⟨O⟩², clamped to zero against roundoff.
pub fn variance(op: &EmbeddedOperator, state: &SpectralState) -> Result<f64, OperatorError> {
    check_compatible(op, state)?;
    let mut mean = 0.0f64;
    let mut second = 0.0f64;
    for (i, &p) in state.values.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = state.column(i);
        let ov = op.apply(v);
        let mut dot = Complex64::new(0.0, 0.0);
        let mut norm2 = 0.0f64;
        for (a, b) in v.iter().zip(ov.iter()) {
            dot += a.conj() * b;
            norm2 += b.norm_sqr();
        }
        mean += p * dot.re;
        second += p * norm2;
    }
    Ok((second - mean * mean).max(0.0))
}

/// ⟨O_X O_Y⟩ - ⟨O_X⟩⟨O_Y⟩ under a global state (real part).
pub fn connected_correlator(
    ox: &EmbeddedOperator,
    oy: &EmbeddedOperator,
    state: &SpectralState,
) -> Result<f64, OperatorError> {
    check_compatible(ox, state)?;
    check_compatible(oy, state)?;
    let mut joint = Complex64::new(0.0, 0.0);
    let mut mean_x = 0.0f64;
    let mut mean_y = 0.0f64;
    for (i, &p) in state.values.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = state.column(i);
        let xv = ox.apply(v);
        let yv = oy.apply(v);
        let mut dxy = Complex64::new(0.0, 0.0);
        let mut dx = Complex64::new(0.0, 0.0);
        let mut dy = Complex64::new(0.0, 0.0);
        for k in 0..v.len() {
            dxy += xv[k].conj() * yv[k];
            dx += v[k].conj() * xv[k];
            dy += v[k].conj() * yv[k];
        }
        joint += dxy * p;
        mean_x += p * dx.re;
        mean_y += p * dy.re;
    }
    Ok(joint.re - mean_x * mean_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_chain;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Naive nested-loop partial trace oracle over qubit bit patterns.
    fn partial_trace_oracle(
        rho: &DMatrix<Complex64>,
        n_qubits: usize,
        keep: &[usize],
    ) -> DMatrix<Complex64> {
        let dk = 1usize << keep.len();
        let env: Vec<usize> = (0..n_qubits).filter(|s| !keep.contains(s)).collect();
        let de = 1usize << env.len();
        let compose = |ks: usize, es: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &site) in keep.iter().enumerate() {
                let bit = (ks >> (keep.len() - 1 - pos)) & 1;
                idx |= bit << (n_qubits - 1 - site);
            }
            for (pos, &site) in env.iter().enumerate() {
                let bit = (es >> (env.len() - 1 - pos)) & 1;
                idx |= bit << (n_qubits - 1 - site);
            }
            idx
        };
        let mut out = DMatrix::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                for e in 0..de {
                    out[(i, j)] += rho[(compose(i, e), compose(j, e))];
                }
            }
        }
        out
    }

    fn random_density(n: usize, seed: u64) -> DMatrix<Complex64> {
        // deterministic pseudo-random Hermitian PSD with unit trace
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = DMatrix::from_fn(n, n, |_, _| c(next(), next()));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        m / c(tr, 0.0)
    }

    #[test]
    fn eigh_reconstructs() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, -0.7), c(0.0, 0.7), c(-0.5, 0.0)],
        );
        let (vals, vecs) = eigh(&m).unwrap();
        let d = DMatrix::from_fn(2, 2, |i, j| if i == j { c(vals[i], 0.0) } else { c(0.0, 0.0) });
        let rec = &vecs * d * vecs.adjoint();
        assert!((rec - m).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn assemble_empty_is_zero() {
        let m = build_chain(3, 0.0, false).unwrap();
        let z = assemble(&m, &[]);
        assert_eq!(z.support(), &[] as &[usize]);
        assert!(z.matrix().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn assemble_overlapping_edges_matches_tensor_arithmetic() {
        let m = build_chain(3, 0.0, false).unwrap();
        let op = assemble(&m, &[0, 1]);
        assert_eq!(op.support(), &[0, 1, 2]);
        let sx = pauli::sx();
        let id = pauli::id2();
        let direct = sx.kronecker(&sx).kronecker(&id) + id.kronecker(&sx).kronecker(&sx);
        assert!((op.matrix() - direct).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn full_hamiltonian_matches_assemble() {
        let m = build_chain(4, 0.3, false).unwrap();
        let h1 = full_hamiltonian(&m);
        let h2 = assemble(&m, &m.all_edge_indices());
        assert!((h1 - h2.to_full()).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn two_spin_ising_spectrum() {
        let m = build_chain(2, 0.0, false).unwrap();
        let h = full_hamiltonian(&m);
        let (vals, _) = eigh(&h).unwrap();
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (v, e) in vals.iter().zip(expect.iter()) {
            assert_relative_eq!(v, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn gibbs_beta_zero_is_maximally_mixed() {
        let m = build_chain(3, 0.5, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let st = gibbs(&h, 0.0).unwrap();
        for &p in &st.values {
            assert_relative_eq!(p, 1.0 / 8.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gibbs_single_spin_closed_form() {
        let beta = 0.8;
        let h = EmbeddedOperator::new(vec![2], [0], pauli::sz()).unwrap();
        let st = gibbs(&h, beta).unwrap();
        let z = 2.0 * beta.cosh();
        // nonincreasing: e^{β}/z then e^{-β}/z
        assert_relative_eq!(st.values[0], beta.exp() / z, epsilon = 1e-12);
        assert_relative_eq!(st.values[1], (-beta).exp() / z, epsilon = 1e-12);
    }

    #[test]
    fn gibbs_trace_one_random_hermitian() {
        let g = random_density(16, 7) * c(32.0, 0.0);
        let g = (&g + g.adjoint()) * c(0.5, 0.0);
        let h = EmbeddedOperator::new(vec![16], [0], g).unwrap();
        let st = gibbs(&h, 0.7).unwrap();
        assert_relative_eq!(st.values.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gibbs_shift_invariance() {
        let m = build_chain(3, 0.4, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let shifted = EmbeddedOperator::new(
            vec![2; 3],
            [0, 1, 2],
            h.matrix() + DMatrix::<Complex64>::identity(8, 8) * c(3.7, 0.0),
        )
        .unwrap();
        let a = gibbs(&h, 0.6).unwrap().density();
        let b = gibbs(&shifted, 0.6).unwrap().density();
        assert!((a - b).iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn partial_trace_product_state() {
        let ra = random_density(2, 3);
        let rb = random_density(4, 4);
        let rho = ra.kronecker(&rb);
        let out = partial_trace(&rho, &[2, 4], &[0]).unwrap();
        assert!((out - ra).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn partial_trace_bell_state() {
        let mut psi = DVector::<Complex64>::zeros(4);
        psi[0] = c(1.0 / 2f64.sqrt(), 0.0);
        psi[3] = c(1.0 / 2f64.sqrt(), 0.0);
        let rho = &psi * psi.adjoint();
        let out = partial_trace(&rho, &[2, 2], &[1]).unwrap();
        let half = DMatrix::<Complex64>::identity(2, 2) * c(0.5, 0.0);
        assert!((out - half).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn partial_trace_matches_oracle_three_qubits() {
        let rho = random_density(8, 11);
        for keep in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2]] {
            let a = partial_trace(&rho, &[2, 2, 2], &keep).unwrap();
            let b = partial_trace_oracle(&rho, 3, &keep);
            assert!(
                (a - b).iter().all(|v| v.norm() < 1e-12),
                "oracle mismatch for keep={keep:?}"
            );
        }
    }

    #[test]
    fn partial_trace_composition() {
        let rho = random_density(16, 5);
        let dims = [2usize, 2, 2, 2];
        let ab = partial_trace(&rho, &dims, &[0, 1]).unwrap();
        let a_via = partial_trace(&ab, &[2, 2], &[0]).unwrap();
        let a_direct = partial_trace(&rho, &dims, &[0]).unwrap();
        assert!((a_via - a_direct).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn partial_trace_keep_outside_errors() {
        let rho = random_density(4, 9);
        assert!(partial_trace(&rho, &[2, 2], &[5]).is_err());
    }

    #[test]
    fn expectation_identity() {
        let m = build_chain(2, 0.0, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let st = gibbs(&h, 0.4).unwrap();
        let id = EmbeddedOperator::new(vec![2, 2], [], DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(expectation(&id, &st).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(variance(&id, &st).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_spin_gibbs_variance() {
        let beta = 0.9;
        let h = EmbeddedOperator::new(vec![2], [0], pauli::sz()).unwrap();
        let st = gibbs(&h, beta).unwrap();
        let sz = EmbeddedOperator::new(vec![2], [0], pauli::sz()).unwrap();
        let var = variance(&sz, &st).unwrap();
        assert_relative_eq!(var, 1.0 - beta.tanh().powi(2), epsilon = 1e-12);
        let st0 = gibbs(&h, 0.0).unwrap();
        assert_relative_eq!(variance(&sz, &st0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn correlator_factorizes_at_beta_zero() {
        let m = build_chain(4, 0.3, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let st = gibbs(&h, 0.0).unwrap();
        let o1 = EmbeddedOperator::new(vec![2; 4], [0], pauli::sz()).unwrap();
        let o2 = EmbeddedOperator::new(vec![2; 4], [3], pauli::sz()).unwrap();
        assert!(connected_correlator(&o1, &o2, &st).unwrap().abs() < 1e-12);
    }

    #[test]
    fn self_correlation_is_variance() {
        let m = build_chain(3, 0.2, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let st = gibbs(&h, 0.5).unwrap();
        let o = EmbeddedOperator::new(vec![2; 3], [1], pauli::sx()).unwrap();
        let cc = connected_correlator(&o, &o, &st).unwrap();
        let var = variance(&o, &st).unwrap();
        assert_relative_eq!(cc, var, epsilon = 1e-10);
        assert!(cc >= 0.0);
    }

    #[test]
    fn correlator_with_identity_vanishes() {
        let m = build_chain(3, 0.7, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let st = gibbs(&h, 0.3).unwrap();
        let o = EmbeddedOperator::new(vec![2; 3], [0], pauli::sx()).unwrap();
        let id = EmbeddedOperator::new(vec![2; 3], [], DMatrix::identity(1, 1)).unwrap();
        assert!(connected_correlator(&o, &id, &st).unwrap().abs() < 1e-12);
    }

    #[test]
    fn six_site_chain_correlator_matches_full_diagonalization() {
        // σᶻ_1 vs σᶻ_4 on a 6-site Ising chain at βJ = 0.1, against a dense
        // route through the explicit global density matrix.
        let m = build_chain(6, 0.0, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let st = gibbs(&h, 0.1).unwrap();
        let o1 = EmbeddedOperator::new(vec![2; 6], [1], pauli::sz()).unwrap();
        let o4 = EmbeddedOperator::new(vec![2; 6], [4], pauli::sz()).unwrap();
        let fast = connected_correlator(&o1, &o4, &st).unwrap();
        let rho = st.density();
        let f1 = o1.to_full();
        let f4 = o4.to_full();
        let joint = (&rho * &f1 * &f4).trace().re;
        let e1 = (&rho * &f1).trace().re;
        let e4 = (&rho * &f4).trace().re;
        assert_relative_eq!(fast, joint - e1 * e4, epsilon = 1e-10);
    }

    #[test]
    fn classical_ising_matches_boltzmann_sum() {
        // h = 0: H diagonal in the σˣ basis; expectations must match the
        // direct Boltzmann sum over spin configurations.
        let n = 6;
        let beta = 0.37;
        let m = build_chain(n, 0.0, false).unwrap();
        let h = assemble(&m, &m.all_edge_indices());
        let st = gibbs(&h, beta).unwrap();
        // direct sum in the x basis: energy of configuration s = Σ s_i s_{i+1}
        let mut z = 0.0;
        let mut mean_e = 0.0;
        let mut mean_e2 = 0.0;
        for conf in 0..(1usize << n) {
            let spin = |i: usize| if (conf >> i) & 1 == 0 { 1.0 } else { -1.0 };
            let e: f64 = (0..n - 1).map(|i| spin(i) * spin(i + 1)).sum();
            let w = (-beta * e).exp();
            z += w;
            mean_e += w * e;
            mean_e2 += w * e * e;
        }
        mean_e /= z;
        mean_e2 /= z;
        let hop = assemble(&m, &m.all_edge_indices());
        let got_mean = expectation(&hop, &st).unwrap();
        let got_var = variance(&hop, &st).unwrap();
        assert_relative_eq!(got_mean, mean_e, epsilon = 1e-10, max_relative = 1e-10);
        assert_relative_eq!(got_var, mean_e2 - mean_e * mean_e, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn exponent_guard_trips() {
        let h = EmbeddedOperator::new(vec![2], [0], pauli::sz() * c(1e4, 0.0)).unwrap();
        assert!(matches!(gibbs(&h, 100.0), Err(OperatorError::ExponentGuard(_))));
    }

    #[test]
    fn non_hermitian_rejected_by_gibbs() {
        let mut m = pauli::sx();
        m[(0, 1)] = c(2.0, 1.0);
        let h = EmbeddedOperator::new(vec![2], [0], m).unwrap();
        assert!(matches!(gibbs(&h, 0.1), Err(OperatorError::NotHermitian(_))));
    }

    #[test]
    fn from_density_clamps_tiny_negatives() {
        let mut rho = DMatrix::<Complex64>::zeros(2, 2);
        rho[(0, 0)] = c(1.0 + 0.5e-12, 0.0);
        rho[(1, 1)] = c(-0.5e-12, 0.0);
        let st = SpectralState::from_density(&rho, 1.0).unwrap();
        assert!(st.values.iter().all(|&p| p >= 0.0));
        assert_relative_eq!(st.values.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let mut bad = DMatrix::<Complex64>::zeros(2, 2);
        bad[(0, 0)] = c(1.0 + 1e-6, 0.0);
        bad[(1, 1)] = c(-1e-6, 0.0);
        assert!(SpectralState::from_density(&bad, 1.0).is_err());
    }
}
