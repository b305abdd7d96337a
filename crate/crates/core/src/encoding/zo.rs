//! {0,1} matrix encoding.
//!
//! Labels are rows of a one-hot matrix `X ∈ {0,1}^{N×K}`. With
//! `G[i, x̄ᵢ] = −δ̄ᵢ` and `H_ij = H_ji = −δ̄ᵢⱼ/2` per undirected edge,
//! `trace(XᵀHX) + trace(GXᵀ)` equals the energy up to the constant
//! `Σδ̄ᵢ + Σδ̄ᵢⱼ`. Lifting to `V = [X; I_K]` homogenizes the cost into
//! `trace(VᵀQV)` with `Q = [[H, G/2], [Gᵀ/2, 0]]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mrf::{Labeling, MrfInstance};
use crate::sparse::SymmetricCsr;

#[derive(Debug, Clone)]
pub struct ZoEncoding {
    num_nodes: usize,
    num_labels: usize,
    matrix: SymmetricCsr,
    offset: f64,
}

/// One-hot label matrix, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoAssignmentMatrix(pub DMatrix<f64>);

impl ZoAssignmentMatrix {
    /// The homogenized lift `[X; I_K]`.
    pub fn lifted(&self) -> DMatrix<f64> {
        let (n, k) = self.0.shape();
        let mut v = DMatrix::zeros(n + k, k);
        v.rows_mut(0, n).copy_from(&self.0);
        v.rows_mut(n, k).fill_with_identity();
        v
    }
}

impl ZoEncoding {
    pub fn new(mrf: &MrfInstance) -> Self {
        let (n, k) = (mrf.num_nodes(), mrf.num_labels());
        let mut triplets = Vec::new();
        let mut offset = 0.0;
        for t in mrf.binary_terms() {
            triplets.push((t.i, t.j, -t.weight / 2.0));
            triplets.push((t.j, t.i, -t.weight / 2.0));
            offset += t.weight;
        }
        for t in mrf.unary_terms() {
            // G/2 in the top-right block, Gᵀ/2 in the bottom-left.
            triplets.push((t.node, n + t.label, -t.weight / 2.0));
            triplets.push((n + t.label, t.node, -t.weight / 2.0));
            offset += t.weight;
        }
        let matrix = SymmetricCsr::from_triplets(n + k, &triplets)
            .expect("encoding triplets are symmetric by construction");
        ZoEncoding { num_nodes: n, num_labels: k, matrix, offset }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn dim(&self) -> usize {
        self.num_nodes + self.num_labels
    }

    /// The homogenized cost matrix `Q`.
    pub fn matrix(&self) -> &SymmetricCsr {
        &self.matrix
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `G[i, l]`, the unary coefficient of the unlifted problem.
    pub fn g(&self, i: usize, l: usize) -> f64 {
        2.0 * self.matrix.get(i, self.num_nodes + l)
    }

    /// `H[i, j]`, the pairwise coefficient of the unlifted problem.
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.matrix.triplets()
    }
}

pub fn encode_zo(mrf: &MrfInstance) -> ZoEncoding {
    ZoEncoding::new(mrf)
}

/// `trace(VᵀQV)` for an `(N+K)×K` matrix `V`.
pub fn zo_objective(enc: &ZoEncoding, v: &DMatrix<f64>) -> Result<f64> {
    if v.nrows() != enc.dim() || v.ncols() != enc.num_labels {
        return Err(Error::invalid(format!(
            "V is {}x{}, expected {}x{}",
            v.nrows(),
            v.ncols(),
            enc.dim(),
            enc.num_labels
        )));
    }
    Ok(enc.matrix.trace_quadratic(v))
}

pub fn labeling_to_zo(x: &Labeling, num_nodes: usize, num_labels: usize) -> Result<ZoAssignmentMatrix> {
    x.validate(num_nodes, num_labels)?;
    let mut m = DMatrix::zeros(num_nodes, num_labels);
    for (i, &l) in x.as_slice().iter().enumerate() {
        m[(i, l)] = 1.0;
    }
    Ok(ZoAssignmentMatrix(m))
}

pub fn zo_to_labeling(x: &ZoAssignmentMatrix) -> Result<Labeling> {
    let mut labels = Vec::with_capacity(x.0.nrows());
    for (i, row) in x.0.row_iter().enumerate() {
        if row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Infeasible(format!("row {i} is not binary")));
        }
        let ones: Vec<usize> = (0..row.len()).filter(|&l| row[l] == 1.0).collect();
        if ones.len() != 1 {
            return Err(Error::Infeasible(format!("row {i} has {} nonzero entries", ones.len())));
        }
        labels.push(ones[0]);
    }
    Ok(Labeling(labels))
}
