//! Riemannian trust-region minimization of `trace(M R Rᵀ)` with a truncated
//! conjugate-gradient (Steihaug-Toint) inner solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{project_tangent, retract, LocalCurvature, ProductStiefelPoint, TangentVector};
use crate::sparse::SymmetricCsr;

/// Minimum gain ratio for a step to be accepted.
const ACCEPT_RATIO: f64 = 0.1;
/// Gain ratio below which the radius shrinks.
const SHRINK_RATIO: f64 = 0.25;
/// Exponent of the superlinear forcing term in the inner residual test.
const FORCING_EXPONENT: f64 = 1.0;
/// Radius below which the outer loop gives up.
const MIN_RADIUS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub grad_norm_tol: f64,
    pub eig_tol: f64,
    pub rel_func_decrease_tol: f64,
    pub max_tnt_iterations: usize,
    pub initial_tr_radius: f64,
    pub tr_decrease_factor: f64,
    pub tr_increase_factor: f64,
    pub max_cg_iterations: usize,
    /// Cap on the inner residual reduction; also the gain ratio above which
    /// a boundary step grows the radius.
    pub cg_success_eta: f64,
    pub max_staircase_steps: usize,
}

impl SolverParams {
    /// Defaults used by the {0,1} matrix relaxation.
    pub fn fuses() -> Self {
        SolverParams {
            grad_norm_tol: 1e-2,
            eig_tol: 1e-2,
            rel_func_decrease_tol: 1e-5,
            max_tnt_iterations: 500,
            initial_tr_radius: 1.0,
            tr_decrease_factor: 0.25,
            tr_increase_factor: 2.5,
            max_cg_iterations: 2000,
            cg_success_eta: 0.9,
            max_staircase_steps: 10,
        }
    }

    /// Defaults used by the primal steps of dual ascent.
    pub fn dars() -> Self {
        SolverParams { grad_norm_tol: 1e-3, ..Self::fuses() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_norm_tol", self.grad_norm_tol),
            ("eig_tol", self.eig_tol),
            ("rel_func_decrease_tol", self.rel_func_decrease_tol),
            ("initial_tr_radius", self.initial_tr_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite")));
            }
        }
        if !(self.tr_decrease_factor > 0.0 && self.tr_decrease_factor < 1.0) {
            return Err(Error::invalid("tr_decrease_factor must lie in (0, 1)"));
        }
        if !(self.tr_increase_factor > 1.0 && self.tr_increase_factor.is_finite()) {
            return Err(Error::invalid("tr_increase_factor must exceed 1"));
        }
        if !(self.cg_success_eta > 0.0 && self.cg_success_eta < 1.0) {
            return Err(Error::invalid("cg_success_eta must lie in (0, 1)"));
        }
        if self.max_tnt_iterations == 0 || self.max_cg_iterations == 0 {
            return Err(Error::invalid("iteration caps must be positive"));
        }
        Ok(())
    }
}

impl Default for SolverParams {
    fn default() -> Self {
        Self::fuses()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientNorm,
    RelativeDecrease,
    IterationLimit,
    RadiusCollapse,
}

#[derive(Debug, Clone)]
pub struct TntOutcome {
    pub point: ProductStiefelPoint,
    pub objective: f64,
    pub grad_norm: f64,
    /// Outer iterations performed, accepted or not.
    pub iterations: usize,
    pub accepted_steps: usize,
    pub stop: StopReason,
    /// Cached curvature at the returned point.
    pub curvature: LocalCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CgExit {
    NegativeCurvature,
    Boundary,
    Residual,
    IterationLimit,
}

struct CgStep {
    eta: TangentVector,
    h_eta: TangentVector,
    exit: CgExit,
}

/// Steihaug-Toint truncated CG on the trust-region subproblem.
fn truncated_cg(
    m: &SymmetricCsr,
    point: &ProductStiefelPoint,
    curv: &LocalCurvature,
    grad: &TangentVector,
    radius: f64,
    params: &SolverParams,
) -> CgStep {
    let shape = point.shape();
    let mut eta = TangentVector::zeros(shape);
    let mut h_eta = TangentVector::zeros(shape);
    let mut r = grad.clone();
    let mut rr = r.inner(&r);
    let r0 = rr.sqrt();
    let target = r0 * r0.powf(FORCING_EXPONENT).min(params.cg_success_eta);
    let mut delta = r.scaled(-1.0);
    // ‖η‖², ⟨η, δ⟩, ‖δ‖² tracked incrementally.
    let (mut e_e, mut e_d, mut d_d) = (0.0, 0.0, rr);
    let radius2 = radius * radius;

    for _ in 0..params.max_cg_iterations {
        let h_delta = curv.hessian_vec(m, point, &delta);
        let d_h_d = delta.inner(&h_delta);
        let alpha = rr / d_h_d;
        let e_e_next = e_e + 2.0 * alpha * e_d + alpha * alpha * d_d;
        if d_h_d <= 0.0 || !alpha.is_finite() || e_e_next >= radius2 {
            let tau = (-e_d + (e_d * e_d + d_d * (radius2 - e_e)).max(0.0).sqrt()) / d_d;
            eta.0 += &delta.0 * tau;
            h_eta.0 += &h_delta.0 * tau;
            let exit = if d_h_d <= 0.0 { CgExit::NegativeCurvature } else { CgExit::Boundary };
            return CgStep { eta, h_eta, exit };
        }
        e_e = e_e_next;
        eta.0 += &delta.0 * alpha;
        h_eta.0 += &h_delta.0 * alpha;
        r.0 += &h_delta.0 * alpha;
        r = project_tangent(point, &r.0);
        let rr_next = r.inner(&r);
        if rr_next.sqrt() <= target {
            return CgStep { eta, h_eta, exit: CgExit::Residual };
        }
        let beta = rr_next / rr;
        rr = rr_next;
        delta.0 *= beta;
        delta.0 -= &r.0;
        e_d = beta * (e_d + alpha * d_d);
        d_d = rr + beta * beta * d_d;
    }
    CgStep { eta, h_eta, exit: CgExit::IterationLimit }
}

fn numerical_failure(what: &str, last: &ProductStiefelPoint) -> Error {
    Error::NumericalFailure {
        message: format!("non-finite {what} encountered"),
        last_point: Some(Box::new(last.matrix().clone())),
    }
}

/// Minimizes `trace(M R Rᵀ)` over the manifold containing `initial`.
pub fn tnt_minimize(m: &SymmetricCsr, initial: ProductStiefelPoint, params: &SolverParams) -> Result<TntOutcome> {
    params.validate()?;
    let mut x = initial;
    let mut f = m.trace_quadratic(x.matrix());
    if !f.is_finite() {
        return Err(numerical_failure("objective", &x));
    }
    let mut curv = LocalCurvature::new(m, &x)?;
    let mut grad = curv.gradient(&x);
    let mut grad_norm = grad.norm();
    let mut radius = params.initial_tr_radius;
    let mut accepted = 0;
    let mut stop = StopReason::IterationLimit;
    let mut iterations = 0;

    while iterations < params.max_tnt_iterations {
        if grad_norm < params.grad_norm_tol {
            stop = StopReason::GradientNorm;
            break;
        }
        iterations += 1;
        let step = truncated_cg(m, &x, &curv, &grad, radius, params);
        let candidate = retract(&x, &step.eta)?;
        let f_new = m.trace_quadratic(candidate.matrix());
        if !f_new.is_finite() {
            return Err(numerical_failure("objective", &x));
        }
        let model_decrease = -(grad.inner(&step.eta) + 0.5 * step.h_eta.inner(&step.eta));
        // Guards the ratio against cancellation once decreases reach
        // rounding level.
        let reg = f.abs().max(1.0) * f64::EPSILON * 1e3;
        let rho = (f - f_new + reg) / (model_decrease + reg);

        if rho < SHRINK_RATIO || !rho.is_finite() {
            radius *= params.tr_decrease_factor;
        } else if rho > params.cg_success_eta
            && matches!(step.exit, CgExit::Boundary | CgExit::NegativeCurvature)
        {
            radius *= params.tr_increase_factor;
        }

        let accept = rho > ACCEPT_RATIO && f_new <= f;
        log::debug!(
            "tnt iter={} f={:.12e} grad_norm={:.3e} radius={:.3e} rho={:.3} accepted={} rank={}",
            iterations,
            f_new,
            grad_norm,
            radius,
            rho,
            accept,
            x.rank()
        );
        if accept {
            let rel = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
            x = candidate;
            f = f_new;
            curv = LocalCurvature::new(m, &x)?;
            grad = curv.gradient(&x);
            grad_norm = grad.norm();
            accepted += 1;
            if !grad_norm.is_finite() {
                return Err(numerical_failure("gradient", &x));
            }
            if grad_norm < params.grad_norm_tol {
                stop = StopReason::GradientNorm;
                break;
            }
            if rel < params.rel_func_decrease_tol {
                stop = StopReason::RelativeDecrease;
                break;
            }
        } else if radius < MIN_RADIUS {
            stop = StopReason::RadiusCollapse;
            break;
        }
    }
    Ok(TntOutcome { point: x, objective: f, grad_norm, iterations, accepted_steps: accepted, stop, curvature: curv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{random_point, ManifoldShape};

    #[test]
    fn default_parameters() {
        let f = SolverParams::fuses();
        assert_eq!(f.grad_norm_tol, 1e-2);
        assert_eq!(SolverParams::dars().grad_norm_tol, 1e-3);
        assert_eq!((f.eig_tol, f.rel_func_decrease_tol), (1e-2, 1e-5));
        assert_eq!((f.max_tnt_iterations, f.max_cg_iterations), (500, 2000));
        assert_eq!((f.initial_tr_radius, f.tr_decrease_factor, f.tr_increase_factor), (1.0, 0.25, 2.5));
        assert_eq!(f.cg_success_eta, 0.9);
        assert!(f.validate().is_ok());
        assert!(SolverParams { tr_increase_factor: 0.5, ..f }.validate().is_err());
        assert!(SolverParams { cg_success_eta: 1.0, ..f }.validate().is_err());
    }

    #[test]
    fn zero_cost_returns_initial_point() {
        let shape = ManifoldShape::new(4, 2, 3).unwrap();
        let p = random_point(&shape, 5).unwrap();
        let out = tnt_minimize(&SymmetricCsr::zeros(6), p.clone(), &SolverParams::default()).unwrap();
        assert_eq!(out.point, p);
        assert_eq!(out.accepted_steps, 0);
        assert_eq!(out.grad_norm, 0.0);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn diagonal_cost_rank_one() {
        // With r = 1 every feasible point has objective equal to the trace.
        let diag = [-1.0, -2.5, -0.3, -4.0];
        let m = SymmetricCsr::from_triplets(4, &diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect::<Vec<_>>())
            .unwrap();
        let shape = ManifoldShape::new(4, 0, 1).unwrap();
        let out = tnt_minimize(&m, random_point(&shape, 1).unwrap(), &SolverParams::default()).unwrap();
        assert!(out.grad_norm < 1e-2);
        assert!((out.objective - diag.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn accepted_steps_decrease_objective() {
        // Laplacian-like cost of a ring: antiferromagnetic coupling.
        let n = 12;
        let mut trip = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            trip.push((i, j, 1.0));
            trip.push((j, i, 1.0));
        }
        let m = SymmetricCsr::from_triplets(n, &trip).unwrap();
        let shape = ManifoldShape::new(n, 0, 3).unwrap();
        let x0 = random_point(&shape, 2).unwrap();
        let f0 = m.trace_quadratic(x0.matrix());
        let params = SolverParams { grad_norm_tol: 1e-8, rel_func_decrease_tol: 1e-14, ..Default::default() };
        let out = tnt_minimize(&m, x0, &params).unwrap();
        assert!(out.objective <= f0);
        // Even ring: the optimum alternates signs, objective −2n.
        assert!((out.objective + 2.0 * n as f64).abs() < 1e-6, "{}", out.objective);
        assert!(out.point.constraint_violation() < 1e-12);
    }
}
