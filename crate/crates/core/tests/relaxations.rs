mod common;

use common::{all_labelings, random_instance};
use mrfsdp::baselines::brute_force;
use mrfsdp::dars::{dars_certificate, dars_solve, dual_gradient, DualParams};
use mrfsdp::encoding::encode_pm;
use mrfsdp::fuses::{fuses_solve, Initialization};
use mrfsdp::generate::{generate_grid_instance, GridSpec};
use mrfsdp::manifold::{random_point, ManifoldShape};
use mrfsdp::staircase::staircase_solve;
use mrfsdp::tnt::SolverParams;
use mrfsdp::{MrfInstance, UnaryTerm};

fn grid(side: usize, k: usize, seed: u64) -> MrfInstance {
    generate_grid_instance(&GridSpec { rows: side, cols: side, num_labels: k, seed, ..GridSpec::default() })
        .unwrap()
        .mrf
}

/// Values of both relaxations on default 3×3 two-label grids, from an
/// interior-point solver run offline (`tools/sdp_oracle.py`) at 1e-10
/// tolerances. Columns: seed, one-hot relaxation, ±1 relaxation.
const SDP_ORACLE: [(u64, f64, f64); 3] = [
    (1, 0.9123481465427528, 1.6541753093490321),
    (2, 0.6220865540411733, 1.0728982898707604),
    (5, 1.4042039381407179, 2.5422102411585823),
];

#[test]
fn one_hot_relaxation_matches_interior_point_value() {
    for (seed, zo, _) in SDP_ORACLE {
        let r = fuses_solve(&grid(3, 2, seed), &SolverParams::fuses(), Initialization::Random, seed).unwrap();
        assert!(r.certified);
        assert!(r.f_relaxed <= zo + 1e-9, "seed {seed}: bound {} above optimum {zo}", r.f_relaxed);
        assert!((r.f_objective - zo).abs() <= 1e-3 * zo, "seed {seed}: {} vs {zo}", r.f_objective);
    }
}

#[test]
fn dual_ascent_matches_interior_point_value() {
    // The default residual tolerance of 0.5 stops short of the optimum;
    // a converged run needs a tighter one.
    let dual = DualParams { dual_grad_tol: 0.01, max_iterations: 50_000, ..DualParams::default() };
    for (seed, _, pm) in SDP_ORACLE {
        let r = dars_solve(&grid(3, 2, seed), &SolverParams::dars(), &dual, seed).unwrap();
        assert!(r.dual_converged, "seed {seed}");
        assert!(r.f_relaxed <= pm + 1e-9, "seed {seed}");
        let rel = (pm - r.f_relaxed) / pm;
        assert!(rel < 5e-3, "seed {seed}: {} vs {pm} ({:.3}%)", r.f_relaxed, 100.0 * rel);
    }
}

#[test]
fn fuses_bound_brackets_optimum_on_random_instances() {
    // Signed weights, irregular graphs.
    for seed in 0..40 {
        let (n, k) = (3 + (seed as usize % 3), 2 + (seed as usize % 2));
        let m = random_instance(seed, n, k);
        let exact = brute_force(&m, 1_000_000).unwrap();
        for init in [Initialization::Random, Initialization::UnaryWarmStart] {
            let r = fuses_solve(&m, &SolverParams::fuses(), init, seed).unwrap();
            let slack = 1e-9 * exact.f_opt.abs().max(1.0);
            assert!(r.f_relaxed <= exact.f_opt + slack, "seed {seed}: {} > {}", r.f_relaxed, exact.f_opt);
            assert!(r.f_rounded >= exact.f_opt - slack);
            assert!((m.energy(&r.labeling).unwrap() - r.f_rounded).abs() < 1e-12);
            if r.certified {
                assert!(r.f_rounded - exact.f_opt <= r.subopt_bound + slack);
            }
        }
    }
}

#[test]
fn relaxation_lower_bound_is_exhaustively_valid() {
    // The bound must sit below the energy of every labeling, not just the
    // minimizer found by enumeration.
    for seed in 100..130 {
        let m = random_instance(seed, 4, 3);
        let fuses = fuses_solve(&m, &SolverParams::fuses(), Initialization::Random, seed).unwrap();
        let dars = dars_solve(&m, &SolverParams::dars(), &DualParams::default(), seed).unwrap();
        for x in all_labelings(4, 3) {
            let e = m.energy(&x).unwrap();
            assert!(fuses.f_relaxed <= e + 1e-9, "seed {seed}");
            assert!(dars.f_relaxed <= e + 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn dars_weak_duality_and_rounding() {
    for seed in 0..12 {
        let k = 2 + (seed % 2) as usize;
        let m = grid(3, k, seed);
        let exact = brute_force(&m, 1_000_000).unwrap();
        let r = dars_solve(&m, &SolverParams::dars(), &DualParams::default(), seed).unwrap();
        for (t, d) in r.state.dual_values.iter().enumerate() {
            assert!(*d <= exact.f_opt - r.offset + 1e-9, "seed {seed} iterate {t}");
        }
        assert_eq!(r.state.dual_values.len(), r.dual_iterations);
        assert!(r.f_rounded >= exact.f_opt - 1e-12);
        let cert = dars_certificate(&r, Some(exact.f_opt));
        assert!(cert.bound_valid);
        assert_eq!(cert.gap, r.f_rounded - r.f_relaxed);
        if cert.is_certificate {
            assert!(r.constraint_residual_max < 0.5);
            assert!(r.f_relaxed <= r.f_rounded + 1e-9, "seed {seed}: {} > {}", r.f_relaxed, r.f_rounded);
        }
    }
}

#[test]
fn dars_single_node_residual() {
    for k in 2..6 {
        let m = MrfInstance::new(1, k, vec![UnaryTerm { node: 0, label: k - 1, weight: 0.7 }], vec![]).unwrap();
        let r = dars_solve(&m, &SolverParams::dars(), &DualParams::default(), 3).unwrap();
        assert!(r.dual_converged);
        assert!(r.constraint_residual_max < 0.5);
        assert_eq!(r.labeling.0, vec![k - 1]);
    }
}

#[test]
fn dual_gradient_matches_dense_trace() {
    let m = random_instance(9, 4, 3);
    let enc = encode_pm(&m);
    let p = random_point(&ManifoldShape::new(enc.dim(), 0, 3).unwrap(), 2).unwrap();
    let y = p.matrix() * p.matrix().transpose();
    let last = enc.dim() - 1;
    for (i, g) in dual_gradient(&enc, &p).into_iter().enumerate() {
        // Uᵢ has the block indicator in its last row; trace(UᵢY) sums Y[last, b].
        let dense: f64 = (i * 3..i * 3 + 3).map(|b| y[(last, b)]).sum();
        assert!((g - (dense - (2.0 - 3.0))).abs() < 1e-12);
    }
}

#[test]
fn warm_start_never_worse_than_cold() {
    let m = grid(3, 3, 4);
    let enc = encode_pm(&m);
    let lambda: Vec<f64> = (0..9).map(|i| 0.05 * (i as f64 - 4.0)).collect();
    let l = enc.lagrangian(&lambda);
    let shape = ManifoldShape::new(enc.dim(), 0, 2).unwrap();
    let params = SolverParams::dars();
    let cold = staircase_solve(&l, &shape, 2, &params, None, 1).unwrap();
    let nearby = enc.lagrangian(&lambda.iter().map(|v| v * 0.9).collect::<Vec<_>>());
    let prev = staircase_solve(&nearby, &shape, 2, &params, None, 2).unwrap();
    let warm = staircase_solve(&l, &shape, 2, &params, Some(&prev.point), 1).unwrap();
    assert!(cold.certified && warm.certified);
    let tol = 1e-3 * cold.objective.abs().max(1.0);
    assert!(warm.objective <= cold.objective + tol, "{} vs {}", warm.objective, cold.objective);
}

#[test]
fn separable_instances_are_tight() {
    let unary = (0..8).map(|node| UnaryTerm { node, label: node % 4, weight: 1.0 + node as f64 }).collect();
    let m = MrfInstance::new(8, 4, unary, vec![]).unwrap();
    let f = fuses_solve(&m, &SolverParams::fuses(), Initialization::Random, 0).unwrap();
    assert!(f.certified);
    assert_eq!(f.f_rounded, 0.0);
    assert_eq!(f.rank_history.len(), 1);
    let d = dars_solve(&m, &SolverParams::dars(), &DualParams::default(), 0).unwrap();
    assert_eq!(d.f_rounded, 0.0);
    assert!(d.f_relaxed <= 1e-9);
}
