//! Dual ascent over the ±1 relaxation. Every primal step minimizes
//! `trace(L_λ Y)` over unit-diagonal PSD `Y` with a warm-started staircase,
//! then the multipliers move along the constraint residuals.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_pm, PmEncoding};
use crate::error::{Error, Result};
use crate::manifold::{ManifoldShape, ProductStiefelPoint};
use crate::metrics::PhaseTimings;
use crate::mrf::{Labeling, MrfInstance};
use crate::staircase::{staircase_solve, RankStep};
use crate::tnt::SolverParams;

/// Initial staircase rank of the primal steps.
pub const INITIAL_RANK: usize = 2;
/// Divergence: the residual stays above this multiple of its running
/// minimum for `DIVERGENCE_WINDOW` consecutive iterations.
const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualParams {
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop once the largest absolute residual falls below this.
    pub dual_grad_tol: f64,
}

impl Default for DualParams {
    fn default() -> Self {
        DualParams { step_size: 0.005, max_iterations: 1000, dual_grad_tol: 0.5 }
    }
}

impl DualParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("dual step size must be positive"));
        }
        if !(self.dual_grad_tol > 0.0) {
            return Err(Error::invalid("dual gradient tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("dual iteration cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    /// Infinity norm of the dual gradient per iteration.
    pub grad_norm_history: Vec<f64>,
    /// Certified lower bound `d(λ)` per iteration, without the offset.
    pub dual_values: Vec<f64>,
    pub step_size: f64,
    pub max_iterations: usize,
    pub dual_grad_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DarsResult {
    pub labeling: Labeling,
    /// Best certified dual value plus the offset.
    pub f_relaxed: f64,
    /// `trace(L RRᵀ)` plus offset at the last primal point.
    pub f_objective: f64,
    pub f_rounded: f64,
    pub subopt_bound: f64,
    /// The last primal step was certified.
    pub certified: bool,
    pub dual_converged: bool,
    pub diverged: bool,
    pub dual_iterations: usize,
    pub constraint_residual_max: f64,
    pub offset: f64,
    pub rank_history: Vec<RankStep>,
    pub state: DualState,
    #[serde(skip)]
    pub factor: Option<DMatrix<f64>>,
    pub timings: PhaseTimings,
}

/// `trace(Uᵢ RRᵀ) − (2 − K)` for every node, from block rows of `R`.
pub fn dual_gradient(enc: &PmEncoding, point: &ProductStiefelPoint) -> Vec<f64> {
    (0..enc.num_nodes()).map(|i| enc.constraint_value_factor(i, point.matrix()) - enc.rhs()).collect()
}

/// Leading singular direction of `R` scaled by its singular value, sign
/// fixed so the homogenizing entry is nonnegative, then per-block argmax.
pub fn dars_round(point: &ProductStiefelPoint, num_nodes: usize, num_labels: usize) -> Labeling {
    let r = point.matrix();
    let svd = r.clone().svd(true, false);
    let idx = svd.singular_values.imax();
    let u = svd.u.expect("requested");
    let mut v: DVector<f64> = u.column(idx) * svd.singular_values[idx];
    if v[num_nodes * num_labels] < 0.0 {
        v.neg_mut();
    }
    let labels = (0..num_nodes)
        .map(|i| {
            let block = &v.as_slice()[i * num_labels..(i + 1) * num_labels];
            let mut best = 0;
            for l in 1..num_labels {
                if block[l] > block[best] {
                    best = l;
                }
            }
            best
        })
        .collect();
    Labeling(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// The run converged and its final primal step was certified.
    pub is_certificate: bool,
    /// `f_rounded − f_relaxed`.
    pub gap: f64,
    /// With an optimum supplied: `f_rounded − f_opt ≤ gap`. Otherwise
    /// whether the gap is nonnegative.
    pub bound_valid: bool,
}

pub fn dars_certificate(result: &DarsResult, f_opt: Option<f64>) -> Certificate {
    let gap = result.f_rounded - result.f_relaxed;
    let slack = 1e-9 * result.f_rounded.abs().max(1.0);
    let bound_valid = match f_opt {
        Some(f) => result.f_rounded - f <= gap + slack,
        None => gap >= -slack,
    };
    Certificate { is_certificate: result.dual_converged && result.certified, gap, bound_valid }
}

pub fn dars_solve(mrf: &MrfInstance, params: &SolverParams, dual: &DualParams, seed: u64) -> Result<DarsResult> {
    dual.validate()?;
    let start = Instant::now();
    let (n, k) = (mrf.num_nodes(), mrf.num_labels());
    let enc = encode_pm(mrf);
    let encode_seconds = start.elapsed().as_secs_f64();

    let t_solve = Instant::now();
    let shape = ManifoldShape::new(enc.dim(), 0, INITIAL_RANK)?;
    let mut state = DualState {
        lambda: vec![0.0; n],
        grad_norm_history: Vec::new(),
        dual_values: Vec::new(),
        step_size: dual.step_size,
        max_iterations: dual.max_iterations,
        dual_grad_tol: dual.dual_grad_tol,
    };
    let mut warm: Option<ProductStiefelPoint> = None;
    let mut converged = false;
    let mut diverged = false;
    let mut min_residual = f64::INFINITY;
    let mut above = 0;
    let mut last = None;

    for it in 0..dual.max_iterations {
        let l_lambda = enc.lagrangian(&state.lambda);
        let sc = staircase_solve(&l_lambda, &shape, INITIAL_RANK, params, warm.as_ref(), seed)?;
        let lambda_sum: f64 = state.lambda.iter().sum();
        state.dual_values.push(sc.lower_bound - enc.rhs() * lambda_sum);
        let grad = dual_gradient(&enc, &sc.point);
        let residual = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        state.grad_norm_history.push(residual);
        log::debug!(
            "dual iter={} grad_inf={:.4e} primal_objective={:.10e} rank={} certified={}",
            it + 1,
            residual,
            sc.objective,
            sc.point.rank(),
            sc.certified
        );

        if residual < dual.dual_grad_tol {
            converged = true;
        } else {
            min_residual = min_residual.min(residual);
            if residual > DIVERGENCE_FACTOR * min_residual {
                above += 1;
            } else {
                above = 0;
            }
            if above >= DIVERGENCE_WINDOW {
                diverged = true;
                log::warn!("dual ascent diverging after {} iterations", it + 1);
            }
        }
        if !converged && !diverged && it + 1 < dual.max_iterations {
            for (l, g) in state.lambda.iter_mut().zip(&grad) {
                *l += dual.step_size * g;
            }
        }
        warm = Some(sc.point.clone());
        last = Some((sc, residual));
        if converged || diverged {
            break;
        }
    }
    let (sc, residual) = last.expect("at least one dual iteration runs");
    let solve_seconds = t_solve.elapsed().as_secs_f64();

    let t_round = Instant::now();
    let labeling = dars_round(&sc.point, n, k);
    let f_rounded = mrf.energy(&labeling)?;
    let round_seconds = t_round.elapsed().as_secs_f64();

    let best_dual = state.dual_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f_relaxed = best_dual + enc.offset();
    let f_objective = enc.matrix().trace_quadratic(sc.point.matrix()) + enc.offset();
    Ok(DarsResult {
        labeling,
        f_relaxed,
        f_objective,
        f_rounded,
        subopt_bound: f_rounded - f_relaxed,
        certified: sc.certified,
        dual_converged: converged,
        diverged,
        dual_iterations: state.grad_norm_history.len(),
        constraint_residual_max: residual,
        offset: enc.offset(),
        rank_history: sc.rank_history,
        state,
        factor: Some(sc.point.into_matrix()),
        timings: PhaseTimings {
            encode_seconds,
            solve_seconds,
            round_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::labeling_to_pm;
    use crate::mrf::UnaryTerm;

    fn rank_one_point(y: &DVector<f64>, r: usize) -> ProductStiefelPoint {
        let mut m = DMatrix::zeros(y.len(), r);
        m.column_mut(0).copy_from(y);
        ProductStiefelPoint::from_matrix(ManifoldShape::new(y.len(), 0, r).unwrap(), m, 1e-12).unwrap()
    }

    #[test]
    fn default_parameters() {
        let d = DualParams::default();
        assert_eq!((d.step_size, d.max_iterations, d.dual_grad_tol), (0.005, 1000, 0.5));
    }

    #[test]
    fn gradient_cases() {
        let m = MrfInstance::new(3, 4, vec![], vec![]).unwrap();
        let enc = encode_pm(&m);
        let y = labeling_to_pm(&Labeling(vec![1, 3, 0]), 3, 4).unwrap().0;
        assert!(dual_gradient(&enc, &rank_one_point(&y, 2)).iter().all(|&g| g == 0.0));
        // Every row equal to e₁ except the last row e₂: Y has no coupling
        // to the homogenizing row.
        let mut r = DMatrix::zeros(13, 2);
        r.column_mut(0).fill(1.0);
        r[(12, 0)] = 0.0;
        r[(12, 1)] = 1.0;
        let p = ProductStiefelPoint::from_matrix(ManifoldShape::new(13, 0, 2).unwrap(), r, 1e-12).unwrap();
        assert_eq!(dual_gradient(&enc, &p), vec![2.0; 3]);
    }

    #[test]
    fn round_rank_one_and_sign_flip() {
        let x = Labeling(vec![2, 0, 1]);
        let y = labeling_to_pm(&x, 3, 3).unwrap().0;
        let p = rank_one_point(&y, 3);
        assert_eq!(dars_round(&p, 3, 3), x);
        let neg = ProductStiefelPoint::from_matrix(*p.shape(), -p.matrix(), 1e-12).unwrap();
        assert_eq!(dars_round(&neg, 3, 3), x);
    }

    #[test]
    fn single_node_converges() {
        let m = MrfInstance::new(1, 3, vec![UnaryTerm { node: 0, label: 1, weight: 1.0 }], vec![]).unwrap();
        let r = dars_solve(&m, &SolverParams::dars(), &DualParams::default(), 0).unwrap();
        assert!(r.dual_converged);
        assert!(r.constraint_residual_max < 0.5);
        assert_eq!(r.labeling.0, vec![1]);
        assert!(r.f_relaxed <= 1e-9);
        let cert = dars_certificate(&r, Some(0.0));
        assert!(cert.bound_valid);
    }
}
