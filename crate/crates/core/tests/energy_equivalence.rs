mod common;

use common::{all_labelings, energy_oracle, random_instance};
use mrfsdp::encoding::{encode_pm, encode_zo, labeling_to_pm, labeling_to_zo, zo_objective};
use mrfsdp::generate::{generate_grid_instance, GridSpec};
use mrfsdp::{MrfInstance, UnaryTerm};

/// Largest deviation of either encoding from the direct energy over all
/// labelings of `m`.
fn max_encoding_error(m: &MrfInstance) -> f64 {
    let (n, k) = (m.num_nodes(), m.num_labels());
    let pm = encode_pm(m);
    let zo = encode_zo(m);
    let mut worst: f64 = 0.0;
    for x in all_labelings(n, k) {
        let e = energy_oracle(m, &x);
        assert!((m.energy(&x).unwrap() - e).abs() < 1e-12);
        let y = labeling_to_pm(&x, n, k).unwrap().0;
        let pm_val = pm.matrix().mul_vec(&y).dot(&y) + pm.offset();
        let zo_val = zo_objective(&zo, &labeling_to_zo(&x, n, k).unwrap().lifted()).unwrap() + zo.offset();
        worst = worst.max((pm_val - e).abs()).max((zo_val - e).abs());
        let yy = &y * y.transpose();
        for i in 0..n {
            assert_eq!(pm.constraint_value(i, &yy), pm.rhs());
        }
    }
    worst
}

#[test]
fn random_small_instances_are_reproduced_exactly() {
    for seed in 0..50 {
        let n = 1 + (seed as usize % 5);
        let k = 2 + (seed as usize / 5) % 3;
        let m = random_instance(seed, n, k);
        let err = max_encoding_error(&m);
        assert!(err < 1e-10, "seed {seed}: error {err}");
    }
}

#[test]
fn four_node_three_label_grid() {
    let g = generate_grid_instance(&GridSpec { rows: 2, cols: 2, num_labels: 3, seed: 11, ..Default::default() }).unwrap();
    assert!(max_encoding_error(&g.mrf) < 1e-12);
    let m = common::random_instance(99, 4, 3);
    assert!(max_encoding_error(&m) < 1e-12);
}

#[test]
fn unary_only_and_empty_instances() {
    let m = MrfInstance::new(3, 4, vec![UnaryTerm { node: 2, label: 3, weight: 2.5 }], vec![]).unwrap();
    assert!(max_encoding_error(&m) < 1e-14);
    let empty = MrfInstance::new(2, 2, vec![], vec![]).unwrap();
    assert_eq!(max_encoding_error(&empty), 0.0);
}

#[test]
fn pm_sparsity_audit() {
    for seed in 0..10 {
        let m = random_instance(seed, 5, 4);
        let enc = encode_pm(&m);
        let k = m.num_labels();
        assert!(enc.matrix().nnz() <= 2 * k * k * m.binary_terms().len() + 2 * m.unary_terms().len());
        let last = enc.last_index();
        for (i, j, _) in enc.triplets() {
            let unary_pos = (i == last) != (j == last);
            let edge_pos = m.binary_terms().iter().any(|t| {
                let (bi, bj) = (i / k, j / k);
                (bi, bj) == (t.i, t.j) || (bi, bj) == (t.j, t.i)
            });
            assert!(unary_pos || edge_pos, "unexpected nonzero at ({i}, {j})");
        }
    }
}
