//! ±1 vector encoding.
//!
//! Node `i` is represented by a block `x̃ᵢ ∈ {−1,+1}ᴷ` with a single `+1` at
//! its label, so that `1ᵀx̃ᵢ = 2 − K`. Stacking the blocks and appending a
//! constant `1` gives `y ∈ {−1,+1}^{NK+1}`, and the Potts energy becomes the
//! homogeneous quadratic form `yᵀLy` plus a constant, with
//!
//! ```text
//! L = [ A   b ]      A_ij = A_ji = −(δ̄ᵢⱼ/8)·I_K  per undirected edge
//!     [ bᵀ  0 ]      [b]_i      += −(δ̄ᵢ/4)·e_x̄ᵢ  per unary term
//! ```
//!
//! Two blocks have inner product `K` when their labels agree and `K − 4`
//! otherwise, so an edge costs `δ̄ᵢⱼ(K − x̃ᵢᵀx̃ⱼ)/4`; a unary term costs
//! `δ̄ᵢ(1 − [x̃ᵢ]_x̄ᵢ)/2`.
//!
//! The per-node constraint `trace(UᵢY) = 2 − K` only touches the last
//! column of `Y`, so `Uᵢ` is never materialized.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mrf::{Labeling, MrfInstance};
use crate::sparse::SymmetricCsr;

#[derive(Debug, Clone)]
pub struct PmEncoding {
    num_nodes: usize,
    num_labels: usize,
    matrix: SymmetricCsr,
    triplets: Vec<(usize, usize, f64)>,
    offset: f64,
}

/// A feasible `y`: one `+1` per node block, trailing entry `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PmAssignmentVector(pub DVector<f64>);

impl PmEncoding {
    pub fn new(mrf: &MrfInstance) -> Self {
        let (n, k) = (mrf.num_nodes(), mrf.num_labels());
        let last = n * k;
        let mut triplets = Vec::with_capacity(2 * k * mrf.binary_terms().len() + 2 * mrf.unary_terms().len());
        let mut offset = 0.0;
        for t in mrf.binary_terms() {
            let w = -t.weight / 8.0;
            for l in 0..k {
                triplets.push((t.i * k + l, t.j * k + l, w));
                triplets.push((t.j * k + l, t.i * k + l, w));
            }
            offset += t.weight * k as f64 / 4.0;
        }
        for t in mrf.unary_terms() {
            let w = -t.weight / 4.0;
            triplets.push((t.node * k + t.label, last, w));
            triplets.push((last, t.node * k + t.label, w));
            offset += t.weight / 2.0;
        }
        let matrix = SymmetricCsr::from_triplets(last + 1, &triplets)
            .expect("encoding triplets are symmetric by construction");
        PmEncoding { num_nodes: n, num_labels: k, matrix, triplets, offset }
    }

    pub fn dim(&self) -> usize {
        self.num_nodes * self.num_labels + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Index range of node `i`'s block within `y`.
    pub fn block(&self, i: usize) -> std::ops::Range<usize> {
        i * self.num_labels..(i + 1) * self.num_labels
    }

    pub fn last_index(&self) -> usize {
        self.num_nodes * self.num_labels
    }

    /// The cost matrix `L`.
    pub fn matrix(&self) -> &SymmetricCsr {
        &self.matrix
    }

    /// Constant `c` with `yᵀLy + c = energy`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Right-hand side `2 − K` of every per-node sum constraint.
    pub fn rhs(&self) -> f64 {
        2.0 - self.num_labels as f64
    }

    /// `L_λ = L + Σᵢ λᵢ·(Uᵢ + Uᵢᵀ)/2`. Symmetrizing leaves `trace(L_λ Y)`
    /// unchanged for every symmetric `Y`.
    pub fn lagrangian(&self, lambda: &[f64]) -> SymmetricCsr {
        assert_eq!(lambda.len(), self.num_nodes, "one multiplier per node");
        let last = self.last_index();
        let mut trip = self.triplets.clone();
        trip.reserve(2 * last);
        for (i, &l) in lambda.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            for b in self.block(i) {
                trip.push((b, last, l / 2.0));
                trip.push((last, b, l / 2.0));
            }
        }
        SymmetricCsr::from_triplets(last + 1, &trip).expect("symmetric by construction")
    }

    /// `trace(Uᵢ Y) = Σ_{b ∈ block i} Y[b, last]` for a dense symmetric `Y`.
    pub fn constraint_value(&self, i: usize, y: &DMatrix<f64>) -> f64 {
        let last = self.last_index();
        self.block(i).map(|b| y[(b, last)]).sum()
    }

    /// `trace(Uᵢ R Rᵀ)` evaluated from the factor without forming `RRᵀ`.
    pub fn constraint_value_factor(&self, i: usize, r: &DMatrix<f64>) -> f64 {
        let last_row = r.row(self.last_index());
        self.block(i).map(|b| r.row(b).dot(&last_row)).sum()
    }

    /// Triplet listing of `L` for debugging exports.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.matrix.triplets()
    }
}

pub fn encode_pm(mrf: &MrfInstance) -> PmEncoding {
    PmEncoding::new(mrf)
}

pub fn labeling_to_pm(x: &Labeling, num_nodes: usize, num_labels: usize) -> Result<PmAssignmentVector> {
    x.validate(num_nodes, num_labels)?;
    let mut y = DVector::from_element(num_nodes * num_labels + 1, -1.0);
    for (i, &l) in x.as_slice().iter().enumerate() {
        y[i * num_labels + l] = 1.0;
    }
    y[num_nodes * num_labels] = 1.0;
    Ok(PmAssignmentVector(y))
}

pub fn pm_to_labeling(y: &PmAssignmentVector, num_nodes: usize, num_labels: usize) -> Result<Labeling> {
    let y = &y.0;
    if y.len() != num_nodes * num_labels + 1 {
        return Err(Error::invalid(format!(
            "vector has length {}, expected {}",
            y.len(),
            num_nodes * num_labels + 1
        )));
    }
    if y[num_nodes * num_labels] != 1.0 {
        return Err(Error::Infeasible("homogenizing entry is not +1".into()));
    }
    let mut labels = Vec::with_capacity(num_nodes);
    for i in 0..num_nodes {
        let block = &y.as_slice()[i * num_labels..(i + 1) * num_labels];
        if block.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Infeasible(format!("block {i} has entries outside {{-1, +1}}")));
        }
        let plus: Vec<usize> = (0..num_labels).filter(|&l| block[l] == 1.0).collect();
        if plus.len() != 1 {
            return Err(Error::Infeasible(format!("block {i} has {} entries equal to +1", plus.len())));
        }
        labels.push(plus[0]);
    }
    Ok(Labeling(labels))
}
