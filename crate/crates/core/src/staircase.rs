//! Riemannian staircase: optimize at rank `r`, test for global optimality of
//! the underlying semidefinite relaxation, otherwise lift to `r + 1` and
//! escape the saddle along a direction of negative curvature.
//!
//! The optimality test works at the zero-padded lift `[R, 0]`, which is
//! always a rank-deficient critical point when `R` is critical. Its Hessian
//! restricted to moves of the new column is `C = 2M − Λ`, where `Λ` holds
//! the normal-space multipliers of `R`. If `C ⪰ 0` the lift is a
//! rank-deficient second-order critical point, and `RRᵀ` solves the
//! relaxation. In every case `Λ/2 + min(0, λ_min(C)/2)·I` is dual feasible,
//! which yields a lower bound on the relaxation valid at any point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{min_eigenpair_auto, LanczosParams};
use crate::manifold::{random_point, retract, LocalCurvature, ManifoldShape, ProductStiefelPoint, TangentVector};
use crate::sparse::SymmetricCsr;
use crate::tnt::{tnt_minimize, SolverParams, StopReason};

/// Initial escape step relative to `‖R‖_F`.
const ESCAPE_SCALE: f64 = 1e-2;
const ESCAPE_HALVINGS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStep {
    pub rank: usize,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
    /// Smallest eigenvalue of the new-column Hessian `2M − Λ`.
    pub min_eigenvalue: f64,
    pub singular_value_ratio: f64,
    pub stop: StopReason,
}

#[derive(Debug, Clone)]
pub struct StaircaseResult {
    pub point: ProductStiefelPoint,
    pub objective: f64,
    pub rank_history: Vec<RankStep>,
    /// The zero-padded lift of the returned point is a rank-deficient
    /// second-order critical point to within `eig_tol`.
    pub certified: bool,
    pub min_singular_value_ratio: f64,
    pub min_eigenvalue: f64,
    /// Certified lower bound on the relaxation optimum (no offset).
    pub lower_bound: f64,
}

#[derive(Debug, Clone)]
pub struct RankDeficiency {
    pub is_deficient: bool,
    /// `σ_min / σ_max` of `R`; 1 for a single column.
    pub ratio: f64,
    /// Right singular vector of `σ_min` when deficient.
    pub null_direction: Option<DVector<f64>>,
}

/// Column-rank test on `R` through its singular values.
pub fn check_rank_deficiency(point: &ProductStiefelPoint, eig_tol: f64) -> RankDeficiency {
    let r = point.matrix();
    let svd = r.clone().svd(false, true);
    let s = &svd.singular_values;
    // A wide factor has at least r − rows zero singular values.
    let ratio = if r.ncols() > r.nrows() {
        0.0
    } else {
        let smax = s.max();
        if smax > 0.0 {
            s.min() / smax
        } else {
            0.0
        }
    };
    let is_deficient = ratio < eig_tol;
    let null_direction = if is_deficient {
        let v_t = svd.v_t.expect("requested");
        if r.ncols() > r.nrows() {
            // Complete the row space: any vector orthogonal to all rows.
            let full = DMatrix::<f64>::identity(r.ncols(), r.ncols()) - v_t.transpose() * &v_t;
            let col = (0..r.ncols()).max_by(|&a, &b| full.column(a).norm().total_cmp(&full.column(b).norm())).unwrap();
            let v = full.column(col).into_owned();
            Some(&v / v.norm())
        } else {
            Some(v_t.row(s.imin()).transpose())
        }
    } else {
        None
    };
    RankDeficiency { is_deficient, ratio, null_direction }
}

/// Smallest eigenpair of the new-column Hessian at `point`.
fn new_column_min_eig(m: &SymmetricCsr, curv: &LocalCurvature, seed: u64) -> (f64, DVector<f64>) {
    let dim = m.dim();
    let params = LanczosParams { seed, ..Default::default() };
    let pair = min_eigenpair_auto(dim, |w| curv.new_column_hessian(m, w), || curv.new_column_hessian_dense(m), &params);
    // Lanczos approximates from above; the residual bounds the distance to
    // the nearest eigenvalue.
    (pair.value - pair.residual, pair.vector)
}

/// Lower bound on `min trace(MZ)` over the relaxation's feasible set from
/// the multipliers of any manifold point.
pub fn dual_lower_bound(objective: f64, min_eigenvalue: f64, shape: &ManifoldShape) -> f64 {
    objective + shape.trace_of_gram() * (min_eigenvalue / 2.0).min(0.0)
}

/// Moves from the zero-padded lift along `[0, v]` until the objective drops.
fn escape(m: &SymmetricCsr, point: &ProductStiefelPoint, dir: &DVector<f64>, f: f64) -> Result<Option<ProductStiefelPoint>> {
    let r = point.rank();
    let lifted = point.lift(r + 1)?;
    let mut d = DMatrix::zeros(lifted.shape().nrows(), r + 1);
    d.column_mut(r).copy_from(dir);
    let mut t = ESCAPE_SCALE * point.matrix().norm();
    for _ in 0..ESCAPE_HALVINGS {
        let candidate = retract(&lifted, &TangentVector(&d * t))?;
        let f_new = m.trace_quadratic(candidate.matrix());
        if f_new < f {
            return Ok(Some(candidate));
        }
        t /= 2.0;
    }
    Ok(None)
}

/// Runs the staircase from `initial_rank` (or the warm start's rank when
/// larger) until certification or `params.max_staircase_steps` lifts.
pub fn staircase_solve(
    m: &SymmetricCsr,
    base_shape: &ManifoldShape,
    initial_rank: usize,
    params: &SolverParams,
    warm_start: Option<&ProductStiefelPoint>,
    seed: u64,
) -> Result<StaircaseResult> {
    params.validate()?;
    let shape = base_shape.with_rank(initial_rank)?;
    if m.dim() != shape.nrows() {
        return Err(Error::invalid(format!("cost matrix dimension {} does not match {} rows", m.dim(), shape.nrows())));
    }
    let mut x = match warm_start {
        Some(w) => {
            let ws = w.shape();
            if ws.n_sphere_rows != shape.n_sphere_rows || ws.bottom_block_rows != shape.bottom_block_rows {
                return Err(Error::InvalidShape("warm start has the wrong block structure".into()));
            }
            if w.rank() < initial_rank {
                w.lift(initial_rank)?
            } else {
                w.clone()
            }
        }
        None => random_point(&shape, seed)?,
    };

    let mut history = Vec::new();
    let mut best_bound = f64::NEG_INFINITY;
    loop {
        let out = tnt_minimize(m, x, params)?;
        let (lambda_min, dir) = new_column_min_eig(m, &out.curvature, seed.wrapping_add(history.len() as u64));
        let deficiency = check_rank_deficiency(&out.point, params.eig_tol);
        best_bound = best_bound.max(dual_lower_bound(out.objective, lambda_min, out.point.shape()));
        history.push(RankStep {
            rank: out.point.rank(),
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            objective: out.objective,
            min_eigenvalue: lambda_min,
            singular_value_ratio: deficiency.ratio,
            stop: out.stop,
        });
        log::debug!(
            "staircase rank={} iterations={} objective={:.12e} grad_norm={:.3e} min_eig={:.3e} sv_ratio={:.3e}",
            out.point.rank(),
            out.iterations,
            out.objective,
            out.grad_norm,
            lambda_min,
            deficiency.ratio
        );

        let certified = lambda_min >= -params.eig_tol;
        // A factor with as many columns as rows already spans every feasible
        // Gram matrix, so lifting further cannot help.
        let exhausted = history.len() > params.max_staircase_steps || out.point.rank() >= out.point.shape().nrows();
        let next = if certified || exhausted { None } else { escape(m, &out.point, &dir, out.objective)? };
        match next {
            Some(p) => x = p,
            None => {
                return Ok(StaircaseResult {
                    objective: out.objective,
                    rank_history: history,
                    certified,
                    min_singular_value_ratio: deficiency.ratio,
                    min_eigenvalue: lambda_min,
                    lower_bound: best_bound,
                    point: out.point,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_column_is_deficient() {
        let shape = ManifoldShape::new(3, 0, 2).unwrap();
        let r = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        let p = ProductStiefelPoint::from_matrix(shape, r, 1e-12).unwrap();
        let d = check_rank_deficiency(&p, 1e-2);
        assert!(d.is_deficient);
        assert_eq!(d.ratio, 0.0);
        let v = d.null_direction.unwrap();
        assert!((v[1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_is_full_rank() {
        let shape = ManifoldShape::new(4, 0, 1).unwrap();
        let p = random_point(&shape, 3).unwrap();
        let d = check_rank_deficiency(&p, 1e-2);
        assert!(!d.is_deficient);
        assert_eq!(d.ratio, 1.0);
        assert!(d.null_direction.is_none());
    }

    #[test]
    fn ring_certifies_with_valid_bound() {
        let n = 9;
        let mut trip = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            trip.push((i, j, 1.0));
            trip.push((j, i, 1.0));
        }
        let m = SymmetricCsr::from_triplets(n, &trip).unwrap();
        let shape = ManifoldShape::new(n, 0, 2).unwrap();
        let res = staircase_solve(&m, &shape, 2, &SolverParams::dars(), None, 4).unwrap();
        assert!(res.certified);
        // Odd ring: the relaxation optimum is 2n·cos(π·(n−1)/n).
        let opt = 2.0 * n as f64 * (std::f64::consts::PI * (n - 1) as f64 / n as f64).cos();
        assert!(res.lower_bound <= opt + 1e-9);
        assert!(res.objective >= opt - 1e-9);
        assert!(res.objective - opt < 1e-3, "{} vs {opt}", res.objective);
        assert!((m.trace_quadratic(res.point.matrix()) - res.objective).abs() <= 1e-9 * opt.abs());
    }
}
