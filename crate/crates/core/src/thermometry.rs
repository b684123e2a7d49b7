//! Local quantum thermal susceptibility: the Bures-norm formula, the analytic
//! derivative of the reduced thermal state, its layer decomposition, and
//! independent finite-difference oracles.
//!
//! A [`ThermalContext`] holds the eigendecomposition of the full Hamiltonian
//! at one β; everything derived from it (dense Gibbs operator, its β
//! derivative, per-edge means and covariances) is computed once and cached,
//! so sweeping many subsystems at a fixed temperature stays cheap.

use std::cell::OnceCell;

use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{LatticeError, LatticeModel, SiteId, Subsystem};
use crate::operators::{
    assemble_on, eigh_faer, full_hamiltonian, gibbs_of_matrix, matmul, OperatorError,
    SpectralState, SupportMap, EXP_GUARD,
};

/// Pairs with p_i + p_j below this are outside the support of ρ and are
/// skipped in the Bures sum.
pub const EPS_RANK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("subsystem has no interior edges")]
    EmptyInterior,
    #[error("state too rank-deficient for the fidelity oracle (min eigenvalue {0:.3e})")]
    RankDeficient(f64),
}

/// The proof-motivated split of dρ/dβ into a local part, a boundary-layer
/// part, and one term per far edge.
#[derive(Debug, Clone)]
pub struct DerivativeDecomposition {
    pub a_term: DMatrix<Complex64>,
    pub c_term: DMatrix<Complex64>,
    pub b_terms: Vec<(usize, DMatrix<Complex64>)>,
    pub r: usize,
}

impl DerivativeDecomposition {
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut sum = self.a_term.clone() + &self.c_term;
        for (_, b) in &self.b_terms {
            sum += b;
        }
        sum
    }
}

/// Full-lattice thermal state at one (model, β) point.
pub struct ThermalContext<'a> {
    model: &'a LatticeModel,
    beta: f64,
    probs: Vec<f64>,
    energies: Vec<f64>,
    vectors: Mat<faer::c64>,
    mean_energy: f64,
    edge_maps: Vec<SupportMap>,
    omega: OnceCell<DMatrix<Complex64>>,
    eta: OnceCell<DMatrix<Complex64>>,
    edge_stats: OnceCell<(Vec<f64>, DMatrix<f64>)>,
}

impl<'a> ThermalContext<'a> {
    pub fn new(model: &'a LatticeModel, beta: f64) -> Result<Self, ThermalError> {
        let h = full_hamiltonian(model);
        let (energies, vectors) = eigh_faer(&h)?;
        drop(h);
        let span = energies.last().unwrap() - energies.first().unwrap();
        if beta.abs() * span > EXP_GUARD {
            return Err(OperatorError::ExponentGuard(beta.abs() * span).into());
        }
        let reference = if beta >= 0.0 { energies[0] } else { *energies.last().unwrap() };
        let weights: Vec<f64> = energies.iter().map(|&e| (-beta * (e - reference)).exp()).collect();
        let z: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let mean_energy: f64 = probs.iter().zip(&energies).map(|(p, e)| p * e).sum();
        let edge_maps = (0..model.n_edges())
            .map(|e| SupportMap::new(model.dims(), model.edges()[e].sites()))
            .collect();
        Ok(ThermalContext {
            model,
            beta,
            probs,
            energies,
            vectors,
            mean_energy,
            edge_maps,
            omega: OnceCell::new(),
            eta: OnceCell::new(),
            edge_stats: OnceCell::new(),
        })
    }

    pub fn model(&self) -> &LatticeModel {
        self.model
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean_energy(&self) -> f64 {
        self.mean_energy
    }

    pub fn total_dim(&self) -> usize {
        self.probs.len()
    }

    fn column(&self, i: usize) -> Vec<Complex64> {
        (0..self.total_dim()).map(|k| self.vectors[(k, i)]).collect()
    }

    /// V diag(w) V† as a dense nalgebra matrix.
    fn weighted_gram(&self, w: &[f64]) -> DMatrix<Complex64> {
        let n = self.total_dim();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * w[j]);
        let prod = scaled * self.vectors.adjoint();
        DMatrix::from_fn(n, n, |i, j| prod[(i, j)])
    }

    /// The dense global Gibbs operator ω(β).
    pub fn omega(&self) -> &DMatrix<Complex64> {
        self.omega.get_or_init(|| self.weighted_gram(&self.probs))
    }

    /// The dense derivative dω/dβ = (⟨Ĥ⟩ - Ĥ) ω, exact in the eigenbasis.
    pub fn omega_derivative(&self) -> &DMatrix<Complex64> {
        self.eta.get_or_init(|| {
            let w: Vec<f64> = self
                .probs
                .iter()
                .zip(&self.energies)
                .map(|(p, e)| (self.mean_energy - e) * p)
                .collect();
            self.weighted_gram(&w)
        })
    }

    /// Per-edge thermal means ⟨Ĥ_e⟩ and covariances
    /// Re⟨Ĥ_e Ĥ_f⟩ - ⟨Ĥ_e⟩⟨Ĥ_f⟩, computed from reduced states on the
    /// (small) pairwise union supports.
    fn edge_stats(&self) -> &(Vec<f64>, DMatrix<f64>) {
        self.edge_stats.get_or_init(|| {
            let ne = self.model.n_edges();
            let omega = self.omega();
            let mut mean = vec![0.0f64; ne];
            for e in 0..ne {
                let rho = self.edge_maps[e].partial_trace(omega);
                mean[e] = matmul(&rho, self.model.term(e)).trace().re;
            }
            let mut cov = DMatrix::<f64>::zeros(ne, ne);
            for e in 0..ne {
                for f in e..ne {
                    let mut union: Vec<SiteId> = self.model.edges()[e].sites().to_vec();
                    for &s in self.model.edges()[f].sites() {
                        if !union.contains(&s) {
                            union.push(s);
                        }
                    }
                    union.sort_unstable();
                    let rho_u = SupportMap::new(self.model.dims(), &union).partial_trace(omega);
                    let he = assemble_on(self.model, &[e], &union).expect("edge within union");
                    let hf = assemble_on(self.model, &[f], &union).expect("edge within union");
                    let prod = matmul(he.matrix(), hf.matrix());
                    let second = matmul(&rho_u, &prod).trace().re;
                    let c = second - mean[e] * mean[f];
                    cov[(e, f)] = c;
                    cov[(f, e)] = c;
                }
            }
            (mean, cov)
        })
    }

    /// ⟨Ĥ_𝓖⟩ under the global Gibbs state.
    pub fn mean_edges(&self, edges: &[usize]) -> f64 {
        let (mean, _) = self.edge_stats();
        edges.iter().map(|&e| mean[e]).sum()
    }

    /// Var_β Ĥ_𝓖 under the global Gibbs state.
    pub fn variance_edges(&self, edges: &[usize]) -> f64 {
        let (_, cov) = self.edge_stats();
        let mut var = 0.0;
        for &e in edges {
            for &f in edges {
                var += cov[(e, f)];
            }
        }
        var.max(0.0)
    }

    /// ρ(β) on the given sites: Tr_B ω(β).
    pub fn reduced_state(&self, sites: &[SiteId]) -> DMatrix<Complex64> {
        let mut keep = sites.to_vec();
        keep.sort_unstable();
        keep.dedup();
        SupportMap::new(self.model.dims(), &keep).partial_trace(self.omega())
    }

    /// dρ/dβ on the given sites: Tr_B dω/dβ.
    pub fn drho_dbeta(&self, sites: &[SiteId]) -> DMatrix<Complex64> {
        let mut keep = sites.to_vec();
        keep.sort_unstable();
        keep.dedup();
        SupportMap::new(self.model.dims(), &keep).partial_trace(self.omega_derivative())
    }

    /// Tr_B[{⟨Ĥ_𝓖⟩ - Ĥ_𝓖, ω}]/2 restricted to the sites `a`, evaluated in
    /// the eigenbasis (no dense full-space product needed).
    pub fn shifted_layer_term(&self, edges: &[usize], a: &[SiteId]) -> DMatrix<Complex64> {
        let mut keep = a.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let map = SupportMap::new(self.model.dims(), &keep);
        let c = self.mean_edges(edges);
        let d_a = map.sub_dim();
        // Tr_B[H_G ω] = Σ_i p_i reshape(H_G v_i) reshape(v_i)†
        let mut acc = DMatrix::<Complex64>::zeros(d_a, d_a);
        let total = self.total_dim();
        for i in 0..total {
            let p = self.probs[i];
            if p < 1e-300 {
                continue;
            }
            let v = self.column(i);
            let mut hv = vec![Complex64::new(0.0, 0.0); total];
            for &e in edges {
                self.edge_maps[e].apply_into(self.model.term(e), &v, &mut hv);
            }
            let mv = map.reshape(&v);
            let mh = map.reshape(&hv);
            acc += mh * mv.adjoint() * Complex64::new(p, 0.0);
        }
        let rho_a = self.reduced_state(&keep);
        let g = rho_a * Complex64::new(c, 0.0) - acc;
        let herm = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
        herm
    }

    /// Split dρ/dβ into Â(β) + Ĉ_R(β) + Σ_X B̂_X(β).
    pub fn decompose(&self, sub: &Subsystem, r: usize) -> Result<DerivativeDecomposition, ThermalError> {
        assert!(r >= 1, "layer width must be >= 1");
        let a = sub.sites();
        let rho_a = self.reduced_state(a);
        let h_a = assemble_on(self.model, sub.interior(), a)?;
        let c = self.mean_edges(sub.interior());
        let shifted = DMatrix::<Complex64>::identity(rho_a.nrows(), rho_a.ncols())
            * Complex64::new(c, 0.0)
            - h_a.matrix();
        let half = Complex64::new(0.5, 0.0);
        let a_term = (&shifted * &rho_a + &rho_a * &shifted) * half;
        let c_term = self.shifted_layer_term(&sub.shell(r), a);
        let b_terms = sub
            .far(r)
            .into_iter()
            .map(|x| (x, self.shifted_layer_term(&[x], a)))
            .collect();
        Ok(DerivativeDecomposition { a_term, c_term, b_terms, r })
    }

    /// F(β) = ‖dρ/dβ‖²_ρ for the subsystem on `sites`.
    pub fn local_qfi(&self, sites: &[SiteId]) -> Result<f64, ThermalError> {
        let rho = self.reduced_state(sites);
        let drho = self.drho_dbeta(sites);
        let st = SpectralState::from_density(&rho, self.beta)?;
        Ok(bures_norm_sq(&drho, &st))
    }

    /// √Var_β Ĥ_A for the subsystem (the canonical-identity side).
    pub fn sqrt_var_local(&self, sub: &Subsystem) -> f64 {
        self.variance_edges(sub.interior()).sqrt()
    }
}

/// Squared Bures norm ‖O‖²_ρ = Σ_{ij} 2|⟨i|O|j⟩|²/(p_i+p_j), restricted to
/// the support of ρ.
pub fn bures_norm_sq(o: &DMatrix<Complex64>, rho: &SpectralState) -> f64 {
    assert_eq!(o.nrows(), rho.dim(), "operator and state dimension mismatch");
    let v = &rho.vectors;
    let tilde = matmul(&v.adjoint(), &matmul(o, v));
    let n = rho.dim();
    let mut sum = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let denom = rho.values[i] + rho.values[j];
            if denom < EPS_RANK {
                continue;
            }
            sum += 2.0 * tilde[(i, j)].norm_sqr() / denom;
        }
    }
    sum
}

/// dρ/dβ of the reduced state on `a`, via the analytic eigenbasis route.
pub fn drho_dbeta(
    model: &LatticeModel,
    a: &[SiteId],
    beta: f64,
) -> Result<DMatrix<Complex64>, ThermalError> {
    Ok(ThermalContext::new(model, beta)?.drho_dbeta(a))
}

/// Local quantum thermal susceptibility F(β) of the subsystem on `a`.
pub fn local_qfi(model: &LatticeModel, a: &[SiteId], beta: f64) -> Result<f64, ThermalError> {
    ThermalContext::new(model, beta)?.local_qfi(a)
}

/// Variance of Ĥ_A under the canonical state e^{-βĤ_A}/Z_A: the baseline
/// when interactions across the boundary are ignored.
pub fn canonical_qfi(model: &LatticeModel, a: &[SiteId], beta: f64) -> Result<f64, ThermalError> {
    let sub = Subsystem::new(model, a.iter().copied())?;
    if sub.interior().is_empty() {
        return Err(ThermalError::EmptyInterior);
    }
    let h_a = assemble_on(model, sub.interior(), sub.sites())?;
    let st = gibbs_of_matrix(h_a.matrix(), beta)?;
    let energies = st.energies.as_ref().expect("gibbs state carries energies");
    let mean: f64 = st.values.iter().zip(energies).map(|(p, e)| p * e).sum();
    let second: f64 = st.values.iter().zip(energies).map(|(p, e)| p * e * e).sum();
    Ok((second - mean * mean).max(0.0))
}

/// Uhlmann fidelity 𝔉(ρ, σ) = (Tr √(√ρ σ √ρ))², squared-trace convention.
pub fn fidelity(
    rho: &DMatrix<Complex64>,
    sigma: &DMatrix<Complex64>,
) -> Result<f64, ThermalError> {
    let (vals, vecs) = crate::operators::eigh(rho)?;
    if let Some(&min) = vals.first() {
        if min < -1e-10 {
            return Err(ThermalError::RankDeficient(min));
        }
    }
    let n = rho.nrows();
    let sqrt_diag =
        DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(vals[i].max(0.0).sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) });
    let sqrt_rho = matmul(&matmul(&vecs, &sqrt_diag), &vecs.adjoint());
    let inner = matmul(&matmul(&sqrt_rho, sigma), &sqrt_rho);
    let herm = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    let (ivals, _) = crate::operators::eigh(&herm)?;
    let tr: f64 = ivals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok(tr * tr)
}

/// Independent cross-check of F(β): central finite difference of the Uhlmann
/// fidelity, 8(1 - √𝔉(ρ(β-δ), ρ(β+δ)))/(2δ)².
pub fn qfi_fd_oracle(
    model: &LatticeModel,
    a: &[SiteId],
    beta: f64,
    delta: f64,
) -> Result<f64, ThermalError> {
    assert!(delta > 0.0, "finite-difference step must be positive");
    let rho_minus = ThermalContext::new(model, beta - delta)?.reduced_state(a);
    let rho_plus = ThermalContext::new(model, beta + delta)?.reduced_state(a);
    let f = fidelity(&rho_minus, &rho_plus)?;
    Ok(8.0 * (1.0 - f.sqrt()) / (2.0 * delta).powi(2))
}

/// The quantum Cramér-Rao floor 1/F on the mean-square error of any unbiased
/// estimator of β; an uninformative state (F = 0) yields +∞.
pub fn cramer_rao_precision(f: f64) -> f64 {
    if f > 0.0 {
        1.0 / f
    } else {
        f64::INFINITY
    }
}
