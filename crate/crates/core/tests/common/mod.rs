#![allow(dead_code)]

use mrfsdp::manifold::{project_tangent, ProductStiefelPoint, TangentVector};
use mrfsdp::sparse::SymmetricCsr;
use mrfsdp::{BinaryTerm, Labeling, MrfInstance, UnaryTerm};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random symmetric matrix in sparse storage.
pub fn random_symmetric(n: usize, seed: u64) -> SymmetricCsr {
    let mut r = rng(seed);
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = StandardNormal.sample(&mut r);
            trip.push((i, j, v));
            if i != j {
                trip.push((j, i, v));
            }
        }
    }
    SymmetricCsr::from_triplets(n, &trip).unwrap()
}

pub fn random_tangent(p: &ProductStiefelPoint, seed: u64) -> TangentVector {
    let mut r = rng(seed);
    let g = DMatrix::from_fn(p.matrix().nrows(), p.rank(), |_, _| StandardNormal.sample(&mut r));
    let v = project_tangent(p, &g);
    let n = v.norm();
    v.scaled(1.0 / n)
}

/// Arbitrary instance with random unaries and a random edge subset.
pub fn random_instance(seed: u64, n: usize, k: usize) -> MrfInstance {
    let mut r = rng(seed);
    let mut unary = Vec::new();
    for node in 0..n {
        let mut labels: Vec<usize> = (0..k).collect();
        labels.shuffle(&mut r);
        let count = r.random_range(0..=k.min(2));
        for &label in &labels[..count] {
            unary.push(UnaryTerm { node, label, weight: r.random_range(-1.0..2.0) });
        }
    }
    let mut binary = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(0.5) {
                binary.push(BinaryTerm { i, j, weight: r.random_range(-1.0..2.0) });
            }
        }
    }
    MrfInstance::new(n, k, unary, binary).unwrap()
}

/// Every labeling of `n` nodes with `k` labels, lexicographic.
pub fn all_labelings(n: usize, k: usize) -> Vec<Labeling> {
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut x = vec![0; n];
            for slot in x.iter_mut().rev() {
                *slot = code % k;
                code /= k;
            }
            Labeling(x)
        })
        .collect()
}

/// Independent energy evaluation: direct double loop over the terms.
pub fn energy_oracle(m: &MrfInstance, x: &Labeling) -> f64 {
    let mut e = 0.0;
    for t in m.unary_terms() {
        if x.0[t.node] != t.label {
            e += t.weight;
        }
    }
    for t in m.binary_terms() {
        if x.0[t.i] != x.0[t.j] {
            e += t.weight;
        }
    }
    e
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Exact minimum of a two-label instance with nonnegative pairwise weights
/// by s-t minimum cut (Edmonds-Karp on a dense capacity matrix).
pub fn binary_mincut_optimum(m: &MrfInstance) -> (Labeling, f64) {
    assert_eq!(m.num_labels(), 2);
    let n = m.num_nodes();
    let (s, t) = (n, n + 1);
    let mut cap = vec![vec![0.0f64; n + 2]; n + 2];
    let mut constant = 0.0;
    // Cost of label 0 / label 1 per node, made nonnegative.
    let mut c0 = vec![0.0; n];
    let mut c1 = vec![0.0; n];
    for u in m.unary_terms() {
        if u.label == 0 {
            c1[u.node] += u.weight;
        } else {
            c0[u.node] += u.weight;
        }
    }
    for i in 0..n {
        let base = c0[i].min(c1[i]);
        constant += base;
        // Node on the sink side takes label 1: cut s→i costs c1.
        cap[s][i] += c1[i] - base;
        cap[i][t] += c0[i] - base;
    }
    for b in m.binary_terms() {
        assert!(b.weight >= 0.0, "min-cut oracle needs attractive weights");
        cap[b.i][b.j] += b.weight;
        cap[b.j][b.i] += b.weight;
    }
    let mut flow = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n + 2];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n + 2 {
                if prev[v] == usize::MAX && cap[u][v] > 1e-15 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            break;
        }
        let mut aug = f64::INFINITY;
        let mut v = t;
        while v != s {
            aug = aug.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            cap[prev[v]][v] -= aug;
            cap[v][prev[v]] += aug;
            v = prev[v];
        }
        flow += aug;
    }
    // Source side of the residual graph keeps label 0.
    let mut reach = vec![false; n + 2];
    reach[s] = true;
    let mut stack = vec![s];
    while let Some(u) = stack.pop() {
        for v in 0..n + 2 {
            if !reach[v] && cap[u][v] > 1e-15 {
                reach[v] = true;
                stack.push(v);
            }
        }
    }
    let x = Labeling((0..n).map(|i| if reach[i] { 0 } else { 1 }).collect());
    let e = m.energy(&x).unwrap();
    assert!((e - (flow + constant)).abs() < 1e-8 * e.abs().max(1.0), "cut {} vs energy {e}", flow + constant);
    (x, e)
}
