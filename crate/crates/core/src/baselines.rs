//! Reference solvers: exhaustive enumeration and iterated conditional modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrf::{Labeling, MrfInstance};

/// Default cap on the number of labelings enumerated.
pub const DEFAULT_BUDGET: u64 = 20_000_000;

/// Relative slack for declaring one enumerated energy strictly better than
/// another; protects the lexicographic tie-break from accumulated rounding.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub labeling: Labeling,
    pub f_opt: f64,
    pub states_enumerated: u64,
}

struct Local {
    unaries: Vec<Vec<(usize, f64)>>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Local {
    fn new(mrf: &MrfInstance) -> Self {
        Local { unaries: mrf.unaries_by_node(), neighbors: mrf.neighbors() }
    }

    fn cost(&self, node: usize, x: &[usize], label: usize) -> f64 {
        MrfInstance::local_cost(&self.unaries[node], &self.neighbors[node], x, label)
    }
}

fn tie_scale(mrf: &MrfInstance) -> f64 {
    let total: f64 = mrf.unary_terms().iter().map(|t| t.weight.abs()).sum::<f64>()
        + mrf.binary_terms().iter().map(|t| t.weight.abs()).sum::<f64>();
    TIE_TOL * total.max(1.0)
}

/// Enumerates every labeling with node 0 fixed to `first`, in lexicographic
/// order, updating the energy incrementally as the odometer turns.
fn enumerate_branch(mrf: &MrfInstance, local: &Local, first: usize, tol: f64) -> (f64, Vec<usize>) {
    let (n, k) = (mrf.num_nodes(), mrf.num_labels());
    let mut x = vec![0usize; n];
    x[0] = first;
    let mut e = mrf.energy_unchecked(&x);
    let mut best = (e, x.clone());
    #[cfg(debug_assertions)]
    let mut counter: u64 = 0;
    loop {
        // Advance the odometer; node n−1 turns fastest.
        let mut pos = n;
        loop {
            if pos == 1 {
                return best;
            }
            pos -= 1;
            let old = x[pos];
            let new = if old + 1 == k { 0 } else { old + 1 };
            let before = local.cost(pos, &x, old);
            let after = local.cost(pos, &x, new);
            x[pos] = new;
            e += after - before;
            if new != 0 {
                break;
            }
        }
        if e < best.0 - tol {
            best = (e, x.clone());
        }
        #[cfg(debug_assertions)]
        {
            counter += 1;
            if counter % 100 == 0 {
                let exact = mrf.energy_unchecked(&x);
                debug_assert!((exact - e).abs() <= tol.max(1e-9), "incremental energy drifted: {e} vs {exact}");
            }
        }
    }
}

/// Exact minimizer by exhaustive search; refuses when `K^N > budget`.
/// Among (near-)ties the lexicographically smallest labeling wins.
pub fn brute_force(mrf: &MrfInstance, budget: u64) -> Result<ExactResult> {
    let (n, k) = (mrf.num_nodes(), mrf.num_labels());
    let states = (k as f64).powi(n as i32);
    if states > budget as f64 {
        return Err(Error::SizeExceeded { states, budget });
    }
    let local = Local::new(mrf);
    let tol = tie_scale(mrf);
    let branches: Vec<(f64, Vec<usize>)> =
        (0..k).into_par_iter().map(|first| enumerate_branch(mrf, &local, first, tol)).collect();
    let mut best = branches[0].clone();
    for b in branches.into_iter().skip(1) {
        if b.0 < best.0 - tol {
            best = b;
        }
    }
    let f_opt = mrf.energy_unchecked(&best.1);
    Ok(ExactResult { labeling: Labeling(best.1), f_opt, states_enumerated: states as u64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcmResult {
    pub labeling: Labeling,
    pub energy: f64,
    pub sweeps: usize,
}

/// Iterated conditional modes: sweep nodes in index order, moving each to
/// its best label given its neighbors. A node only moves on strict local
/// improvement, so fixed points are returned unchanged.
pub fn icm(mrf: &MrfInstance, init: &Labeling, max_sweeps: usize) -> Result<IcmResult> {
    init.validate(mrf.num_nodes(), mrf.num_labels())?;
    let local = Local::new(mrf);
    let mut x = init.0.clone();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut changed = false;
        for node in 0..mrf.num_nodes() {
            let current = local.cost(node, &x, x[node]);
            let mut best = (current, x[node]);
            for label in 0..mrf.num_labels() {
                let c = local.cost(node, &x, label);
                if c < best.0 - 1e-12 * current.abs().max(1.0) {
                    best = (c, label);
                }
            }
            if best.1 != x[node] {
                x[node] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let energy = mrf.energy_unchecked(&x);
    Ok(IcmResult { labeling: Labeling(x), energy, sweeps })
}
