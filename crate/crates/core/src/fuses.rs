//! The one-hot matrix relaxation: encode, run the staircase over
//! `St(1,r)ᴺ × St(K,r)`, round each row of `R_top·R_bᵀ` to its argmax.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_zo, zo_to_labeling, ZoAssignmentMatrix};
use crate::error::Result;
use crate::manifold::{random_point, retract, ManifoldShape, ProductStiefelPoint, TangentVector};
use crate::metrics::PhaseTimings;
use crate::mrf::{Labeling, MrfInstance};
use crate::staircase::{staircase_solve, RankStep};
use crate::tnt::SolverParams;

/// Size of the random tangent kick applied to a warm start, so the solver
/// does not begin exactly at a vertex where the gradient may vanish.
const WARM_START_KICK: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    #[default]
    Random,
    /// Lift of the unary-argmax labeling.
    UnaryWarmStart,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusesResult {
    pub labeling: Labeling,
    /// Certified lower bound on the relaxation optimum, in energy units.
    pub f_relaxed: f64,
    /// Relaxed objective at the returned factor, in energy units.
    pub f_objective: f64,
    /// Energy of the rounded labeling.
    pub f_rounded: f64,
    pub subopt_bound: f64,
    pub certified: bool,
    pub offset: f64,
    pub rank_history: Vec<RankStep>,
    pub min_singular_value_ratio: f64,
    pub min_eigenvalue: f64,
    #[serde(skip)]
    pub factor: Option<DMatrix<f64>>,
    pub timings: PhaseTimings,
}

/// Initial staircase rank for `K` labels.
pub fn initial_rank(num_labels: usize) -> usize {
    num_labels + 1
}

/// Manifold shape of the one-hot relaxation at rank `K + 1`.
pub fn fuses_shape(num_nodes: usize, num_labels: usize) -> ManifoldShape {
    ManifoldShape { n_sphere_rows: num_nodes, bottom_block_rows: num_labels, rank: initial_rank(num_labels) }
}

fn warm_start(mrf: &MrfInstance, seed: u64) -> Result<ProductStiefelPoint> {
    let (n, k) = (mrf.num_nodes(), mrf.num_labels());
    let shape = fuses_shape(n, k);
    let x = mrf.unary_argmax_labeling();
    let mut r = DMatrix::zeros(n + k, shape.rank);
    for (i, &l) in x.as_slice().iter().enumerate() {
        r[(i, l)] = 1.0;
    }
    for l in 0..k {
        r[(n + l, l)] = 1.0;
    }
    let p = ProductStiefelPoint::from_matrix(shape, r, 1e-12)?;
    let noise = random_point(&shape, seed)?;
    let kick = crate::manifold::project_tangent(&p, noise.matrix());
    let scale = WARM_START_KICK / kick.norm().max(f64::MIN_POSITIVE);
    retract(&p, &TangentVector(&kick.0 * scale))
}

/// Row-wise argmax of `R_top·R_bᵀ`; ties go to the lowest label.
pub fn fuses_round(point: &ProductStiefelPoint, num_nodes: usize, num_labels: usize) -> ZoAssignmentMatrix {
    let r = point.matrix();
    let scores = r.rows(0, num_nodes) * r.rows(num_nodes, num_labels).transpose();
    let mut x = DMatrix::zeros(num_nodes, num_labels);
    for i in 0..num_nodes {
        let mut best = 0;
        for l in 1..num_labels {
            if scores[(i, l)] > scores[(i, best)] {
                best = l;
            }
        }
        x[(i, best)] = 1.0;
    }
    ZoAssignmentMatrix(x)
}

pub fn fuses_solve(mrf: &MrfInstance, params: &SolverParams, init: Initialization, seed: u64) -> Result<FusesResult> {
    let start = Instant::now();
    let (n, k) = (mrf.num_nodes(), mrf.num_labels());
    let enc = encode_zo(mrf);
    let encode_seconds = start.elapsed().as_secs_f64();

    let t_solve = Instant::now();
    let shape = fuses_shape(n, k);
    let warm = match init {
        Initialization::Random => None,
        Initialization::UnaryWarmStart => Some(warm_start(mrf, seed)?),
    };
    let sc = staircase_solve(enc.matrix(), &shape, shape.rank, params, warm.as_ref(), seed)?;
    let solve_seconds = t_solve.elapsed().as_secs_f64();

    let t_round = Instant::now();
    let x = fuses_round(&sc.point, n, k);
    let labeling = zo_to_labeling(&x).expect("rounding yields one-hot rows");
    let f_rounded = mrf.energy(&labeling)?;
    let round_seconds = t_round.elapsed().as_secs_f64();

    let f_relaxed = sc.lower_bound + enc.offset();
    Ok(FusesResult {
        labeling,
        f_relaxed,
        f_objective: sc.objective + enc.offset(),
        f_rounded,
        subopt_bound: f_rounded - f_relaxed,
        certified: sc.certified,
        offset: enc.offset(),
        rank_history: sc.rank_history,
        min_singular_value_ratio: sc.min_singular_value_ratio,
        min_eigenvalue: sc.min_eigenvalue,
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
    use crate::encoding::labeling_to_zo;
    use crate::mrf::UnaryTerm;

    #[test]
    fn initial_rank_is_k_plus_one() {
        assert_eq!(initial_rank(3), 4);
        assert_eq!(fuses_shape(10, 19).rank, 20);
    }

    #[test]
    fn round_recovers_exact_lift() {
        let (n, k) = (4, 3);
        let x = labeling_to_zo(&Labeling(vec![2, 0, 1, 2]), n, k).unwrap();
        let mut r = DMatrix::zeros(n + k, k + 1);
        r.view_mut((0, 0), (n + k, k)).copy_from(&x.lifted());
        let p = ProductStiefelPoint::from_matrix(fuses_shape(n, k), r, 1e-12).unwrap();
        assert_eq!(fuses_round(&p, n, k), x);
    }

    #[test]
    fn round_breaks_ties_low() {
        let (n, k) = (1, 2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = DMatrix::from_row_slice(3, 3, &[s, s, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let p = ProductStiefelPoint::from_matrix(fuses_shape(n, k), r, 1e-12).unwrap();
        assert_eq!(fuses_round(&p, n, k).0.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn separable_instance() {
        let unary = (0..6).map(|node| UnaryTerm { node, label: (node * 2) % 3, weight: 0.5 + node as f64 }).collect();
        let m = MrfInstance::new(6, 3, unary, vec![]).unwrap();
        for init in [Initialization::Random, Initialization::UnaryWarmStart] {
            let r = fuses_solve(&m, &SolverParams::fuses(), init, 3).unwrap();
            assert!(r.certified);
            assert_eq!(r.labeling.0, vec![0, 2, 1, 0, 2, 1]);
            assert_eq!(r.f_rounded, 0.0);
            assert!(r.f_relaxed <= 1e-9 && r.f_relaxed >= -0.5, "{}", r.f_relaxed);
        }
    }
}
