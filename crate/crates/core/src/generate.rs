//! Synthetic 4-connected grid instances.
//!
//! A smooth ground-truth labeling is grown from random seed nodes by
//! randomized region growing; each node then receives a noisy unary
//! observation, optionally followed by weaker runner-up labels, and each
//! grid edge a Potts weight drawn from a [`BinaryWeightModel`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrf::{binary_weight_from_features, BinaryTerm, Labeling, MrfInstance, UnaryTerm};

/// How grid-edge weights are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BinaryWeightModel {
    Constant { weight: f64 },
    Uniform { low: f64, high: f64 },
    /// Contrast-sensitive weights from synthetic per-node colors: every
    /// ground-truth label owns a random RGB color, nodes receive that color
    /// plus Gaussian noise, and edges get `λ1 + λ2·exp(−β‖cᵢ − cⱼ‖²)`.
    Contrast { lambda1: f64, lambda2: f64, beta: f64, color_noise: f64 },
}

impl Default for BinaryWeightModel {
    fn default() -> Self {
        BinaryWeightModel::Contrast { lambda1: 0.2, lambda2: 0.6, beta: 1e-3, color_noise: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub num_labels: usize,
    /// Probability that a node's measured label is wrong.
    pub unary_noise: f64,
    pub unary_weight_range: (f64, f64),
    pub binary_weight_model: BinaryWeightModel,
    /// Mean ground-truth patch size in nodes.
    pub patch_size: usize,
    /// Unary terms per node. Beyond the first, each extra term names a
    /// further distinct label with a weight shrunk by a random factor in
    /// `[0.2, 0.8)` relative to the previous one, like the runner-up scores
    /// of a classifier.
    #[serde(default = "one")]
    pub measurements_per_node: usize,
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 4,
            cols: 4,
            num_labels: 3,
            unary_noise: 0.2,
            unary_weight_range: (0.5, 1.5),
            binary_weight_model: BinaryWeightModel::default(),
            patch_size: 8,
            measurements_per_node: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub mrf: MrfInstance,
    pub ground_truth: Labeling,
}

fn check_range(name: &str, lo: f64, hi: f64) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("{name} bounds must be finite")));
    }
    if lo > hi {
        return Err(Error::invalid(format!("{name} is empty ({lo} > {hi})")));
    }
    Ok(())
}

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Grid edges in row-major order: right neighbor first, then the one below.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    edges
}

fn grow_patches(rng: &mut ChaCha8Rng, rows: usize, cols: usize, k: usize, patch: usize) -> Vec<usize> {
    let n = rows * cols;
    let num_seeds = (n / patch.max(1)).clamp(1, n);
    let mut label = vec![usize::MAX; n];
    let mut frontier = Vec::new();
    let mut placed = 0;
    while placed < num_seeds {
        let v = rng.random_range(0..n);
        if label[v] == usize::MAX {
            label[v] = rng.random_range(0..k);
            frontier.push(v);
            placed += 1;
        }
    }
    // Randomized region growing: expand a uniformly chosen frontier node.
    while !frontier.is_empty() {
        let idx = rng.random_range(0..frontier.len());
        let v = frontier[idx];
        let (r, c) = (v / cols, v % cols);
        let mut grew = false;
        let mut nbrs = Vec::with_capacity(4);
        if r > 0 {
            nbrs.push(v - cols);
        }
        if r + 1 < rows {
            nbrs.push(v + cols);
        }
        if c > 0 {
            nbrs.push(v - 1);
        }
        if c + 1 < cols {
            nbrs.push(v + 1);
        }
        for u in nbrs {
            if label[u] == usize::MAX {
                label[u] = label[v];
                frontier.push(u);
                grew = true;
                break;
            }
        }
        if !grew {
            frontier.swap_remove(idx);
        }
    }
    label
}

/// Generates a seeded grid instance together with its ground truth.
pub fn generate_grid_instance(spec: &GridSpec) -> Result<GeneratedInstance> {
    let GridSpec {
        rows,
        cols,
        num_labels: k,
        unary_noise,
        unary_weight_range,
        binary_weight_model,
        patch_size,
        measurements_per_node,
        seed,
    } = spec.clone();
    if measurements_per_node == 0 || measurements_per_node > k {
        return Err(Error::invalid(format!("measurements_per_node must lie in [1, {k}]")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid must have at least one row and one column"));
    }
    if k < 2 {
        return Err(Error::invalid("num_labels must be at least 2"));
    }
    if !(0.0..=1.0).contains(&unary_noise) {
        return Err(Error::invalid(format!("unary_noise {unary_noise} is not a probability")));
    }
    check_range("unary_weight_range", unary_weight_range.0, unary_weight_range.1)?;
    match binary_weight_model {
        BinaryWeightModel::Constant { weight } => check_range("binary weight", weight, weight)?,
        BinaryWeightModel::Uniform { low, high } => check_range("binary weight range", low, high)?,
        BinaryWeightModel::Contrast { lambda1, lambda2, beta, color_noise } => {
            check_range("lambda1", lambda1, lambda1)?;
            check_range("lambda2", lambda2, lambda2)?;
            if !(beta >= 0.0) || !beta.is_finite() {
                return Err(Error::invalid("beta must be finite and non-negative"));
            }
            if !(color_noise >= 0.0) || !color_noise.is_finite() {
                return Err(Error::invalid("color_noise must be finite and non-negative"));
            }
        }
    }

    let n = rows * cols;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = grow_patches(&mut rng, rows, cols, k, patch_size);

    let mut unary = Vec::with_capacity(n);
    for (node, &gt) in truth.iter().enumerate() {
        let label = if rng.random_bool(unary_noise) {
            let wrong = rng.random_range(0..k - 1);
            if wrong >= gt {
                wrong + 1
            } else {
                wrong
            }
        } else {
            gt
        };
        let mut weight = sample(&mut rng, unary_weight_range.0, unary_weight_range.1);
        unary.push(UnaryTerm { node, label, weight });
        if measurements_per_node > 1 {
            let mut others: Vec<usize> = (0..k).filter(|&l| l != label).collect();
            others.shuffle(&mut rng);
            for &extra in &others[..measurements_per_node - 1] {
                weight *= rng.random_range(0.2..0.8);
                unary.push(UnaryTerm { node, label: extra, weight });
            }
        }
    }

    let edges = grid_edges(rows, cols);
    let weights: Vec<f64> = match binary_weight_model {
        BinaryWeightModel::Constant { weight } => vec![weight; edges.len()],
        BinaryWeightModel::Uniform { low, high } => {
            edges.iter().map(|_| sample(&mut rng, low, high)).collect()
        }
        BinaryWeightModel::Contrast { lambda1, lambda2, beta, color_noise } => {
            let palette: Vec<[f64; 3]> = (0..k)
                .map(|_| [0, 1, 2].map(|_| rng.random_range(0.0..255.0)))
                .collect();
            let noise = Normal::new(0.0, color_noise).map_err(|e| Error::invalid(e.to_string()))?;
            let colors: Vec<[f64; 3]> = truth
                .iter()
                .map(|&l| palette[l].map(|c| c + noise.sample(&mut rng)))
                .collect();
            edges
                .iter()
                .map(|&(i, j)| binary_weight_from_features(&colors[i], &colors[j], lambda1, lambda2, beta))
                .collect::<Result<_>>()?
        }
    };
    let binary = edges
        .into_iter()
        .zip(weights)
        .map(|((i, j), weight)| BinaryTerm { i, j, weight })
        .collect();

    Ok(GeneratedInstance {
        mrf: MrfInstance::new(n, k, unary, binary)?,
        ground_truth: Labeling(truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rows: usize, cols: usize, k: usize, seed: u64) -> GridSpec {
        GridSpec { rows, cols, num_labels: k, seed, ..GridSpec::default() }
    }

    #[test]
    fn degenerate_grid() {
        let g = generate_grid_instance(&spec(1, 1, 4, 3)).unwrap();
        assert_eq!(g.mrf.num_nodes(), 1);
        assert!(g.mrf.binary_terms().is_empty());
        assert_eq!(g.mrf.unary_terms().len(), 1);
    }

    #[test]
    fn edge_counts() {
        assert_eq!(generate_grid_instance(&spec(2, 2, 2, 0)).unwrap().mrf.binary_terms().len(), 4);
        assert_eq!(generate_grid_instance(&spec(4, 4, 3, 0)).unwrap().mrf.binary_terms().len(), 24);
        assert_eq!(grid_edges(3, 5).len(), 3 * 4 + 2 * 5);
    }

    #[test]
    fn deterministic_per_seed() {
        let s = GridSpec { unary_noise: 0.3, seed: 7, ..spec(4, 4, 3, 7) };
        let a = serde_json::to_string(&generate_grid_instance(&s).unwrap().mrf).unwrap();
        let b = serde_json::to_string(&generate_grid_instance(&s).unwrap().mrf).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_grid_instance(&GridSpec { seed: 8, ..s }).unwrap().mrf)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_extremes() {
        let clean = generate_grid_instance(&GridSpec { unary_noise: 0.0, ..spec(5, 5, 3, 1) }).unwrap();
        for t in clean.mrf.unary_terms() {
            assert_eq!(t.label, clean.ground_truth[t.node]);
        }
        let noisy = generate_grid_instance(&GridSpec { unary_noise: 1.0, ..spec(5, 5, 3, 1) }).unwrap();
        for t in noisy.mrf.unary_terms() {
            assert_ne!(t.label, noisy.ground_truth[t.node]);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_grid_instance(&GridSpec { unary_noise: 1.5, ..GridSpec::default() }).is_err());
        assert!(generate_grid_instance(&GridSpec { unary_weight_range: (2.0, 1.0), ..GridSpec::default() })
            .is_err());
        let bad = BinaryWeightModel::Uniform { low: 1.0, high: 0.0 };
        assert!(generate_grid_instance(&GridSpec { binary_weight_model: bad, ..GridSpec::default() }).is_err());
        assert!(generate_grid_instance(&GridSpec { rows: 0, ..GridSpec::default() }).is_err());
    }

    #[test]
    fn patches_cover_grid() {
        let g = generate_grid_instance(&spec(6, 7, 5, 42)).unwrap();
        assert_eq!(g.ground_truth.len(), 42);
        assert!(g.ground_truth.as_slice().iter().all(|&l| l < 5));
    }

    #[test]
    fn runner_up_measurements() {
        let g = generate_grid_instance(&GridSpec { measurements_per_node: 3, ..spec(3, 3, 4, 5) }).unwrap();
        let by_node = g.mrf.unaries_by_node();
        for terms in &by_node {
            assert_eq!(terms.len(), 3);
            assert!(terms.windows(2).all(|w| w[1].1 < w[0].1 * 0.8 + 1e-12));
        }
        let single = generate_grid_instance(&spec(3, 3, 4, 5)).unwrap();
        assert_eq!(single.mrf.unary_terms().len(), 9);
        assert!(generate_grid_instance(&GridSpec { measurements_per_node: 5, ..spec(2, 2, 4, 0) }).is_err());
        assert!(generate_grid_instance(&GridSpec { measurements_per_node: 0, ..spec(2, 2, 4, 0) }).is_err());
    }
}
