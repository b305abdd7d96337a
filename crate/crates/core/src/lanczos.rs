//! Smallest eigenpair of a symmetric operator.
//!
//! Lanczos with full reorthogonalization and explicit restarts from the
//! current best Ritz vector. Small problems go through a dense
//! eigendecomposition instead, which is both faster and exact.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Operators up to this dimension are materialized and decomposed densely.
pub const DENSE_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy)]
pub struct LanczosParams {
    /// Krylov basis size per cycle.
    pub basis_size: usize,
    pub max_restarts: usize,
    /// Stop once the Ritz residual falls below `tol · max(1, |θ|)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosParams {
    fn default() -> Self {
        LanczosParams { basis_size: 80, max_restarts: 40, tol: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Unit-norm eigenvector estimate.
    pub vector: DVector<f64>,
    /// `‖Av − θv‖`; zero for dense solves.
    pub residual: f64,
    pub converged: bool,
}

/// Smallest eigenpair of a dense symmetric matrix.
pub fn min_eigenpair_dense(a: &DMatrix<f64>) -> EigenPair {
    let eig = SymmetricEigen::new(a.clone());
    let idx = eig.eigenvalues.imin();
    EigenPair {
        value: eig.eigenvalues[idx],
        vector: eig.eigenvectors.column(idx).into_owned(),
        residual: 0.0,
        converged: true,
    }
}

fn orthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>]) {
    // Two passes of classical Gram-Schmidt keep the basis orthogonal to
    // working precision.
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(w);
            w.axpy(-c, q, 1.0);
        }
    }
}

/// Smallest eigenpair of the symmetric operator `apply` on `ℝ^dim`.
pub fn min_eigenpair<F>(dim: usize, mut apply: F, params: &LanczosParams) -> EigenPair
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    assert!(dim > 0, "operator dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut start = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    start /= start.norm();

    let m_max = params.basis_size.clamp(2, dim);
    let mut best: Option<EigenPair> = None;

    for _ in 0..=params.max_restarts {
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m_max);
        let mut alphas = Vec::with_capacity(m_max);
        let mut betas: Vec<f64> = Vec::with_capacity(m_max);
        let mut q = start.clone();
        let mut invariant = false;
        for j in 0..m_max {
            let mut w = apply(&q);
            let a = q.dot(&w);
            alphas.push(a);
            basis.push(q.clone());
            orthogonalize(&mut w, &basis);
            let b = w.norm();
            if j + 1 == m_max {
                betas.push(b);
                break;
            }
            if b <= 1e-12 * a.abs().max(1.0) {
                invariant = true;
                betas.push(0.0);
                break;
            }
            betas.push(b);
            q = w / b;
        }

        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let idx = eig.eigenvalues.imin();
        let theta = eig.eigenvalues[idx];
        let s = eig.eigenvectors.column(idx);
        let mut v = DVector::zeros(dim);
        for (i, qi) in basis.iter().enumerate() {
            v.axpy(s[i], qi, 1.0);
        }
        let nrm = v.norm();
        v /= nrm;
        let residual = (apply(&v) - &v * theta).norm();
        let converged = invariant || residual <= params.tol * theta.abs().max(1.0);
        let pair = EigenPair { value: theta, vector: v.clone(), residual, converged };
        let improves = best.as_ref().map_or(true, |b| theta < b.value);
        if improves {
            best = Some(pair);
        }
        if converged || m == dim {
            let mut out = best.unwrap();
            out.converged = true;
            return out;
        }
        start = best.as_ref().unwrap().vector.clone();
    }
    best.expect("at least one Lanczos cycle runs")
}

/// Dispatches to the dense solver for small `dim`, Lanczos otherwise.
/// `dense` is only invoked on the small path.
pub fn min_eigenpair_auto<F, D>(dim: usize, apply: F, dense: D, params: &LanczosParams) -> EigenPair
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    D: FnOnce() -> DMatrix<f64>,
{
    if dim <= DENSE_LIMIT {
        min_eigenpair_dense(&dense())
    } else {
        min_eigenpair(dim, apply, params)
    }
}
