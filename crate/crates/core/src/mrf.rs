//! Pairwise Potts-model Markov random fields.
//!
//! An instance holds `N` nodes, `K` labels, a list of unary terms and a list
//! of binary terms. A unary term `(node, label, w)` costs `w` whenever the
//! node is *not* assigned `label`; a binary term `(i, j, w)` costs `w`
//! whenever the two endpoints disagree. The MAP problem is to find the
//! labeling of minimum total energy.
//!
//! Labels are 0-based. Every undirected edge is stored once with `i < j`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnaryTerm {
    pub node: usize,
    /// Measured label.
    pub label: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryTerm {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// A complete assignment of one label per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labeling(pub Vec<usize>);

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Labeling(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Checks length and label range against an instance shape.
    pub fn validate(&self, num_nodes: usize, num_labels: usize) -> Result<()> {
        if self.0.len() != num_nodes {
            return Err(Error::invalid(format!(
                "labeling has {} entries, expected {num_nodes}",
                self.0.len()
            )));
        }
        if let Some((node, &label)) = self.0.iter().enumerate().find(|(_, &l)| l >= num_labels) {
            return Err(Error::invalid(format!(
                "node {node} has label {label}, outside [0, {num_labels})"
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Labeling {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Serialized form of an instance; validated on conversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    num_nodes: usize,
    num_labels: usize,
    unary: Vec<UnaryTerm>,
    binary: Vec<BinaryTerm>,
}

/// A validated, immutable Potts MRF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDocument", into = "InstanceDocument")]
pub struct MrfInstance {
    num_nodes: usize,
    num_labels: usize,
    unary: Vec<UnaryTerm>,
    binary: Vec<BinaryTerm>,
}

impl TryFrom<InstanceDocument> for MrfInstance {
    type Error = Error;
    fn try_from(doc: InstanceDocument) -> Result<Self> {
        MrfInstance::new(doc.num_nodes, doc.num_labels, doc.unary, doc.binary)
    }
}

impl From<MrfInstance> for InstanceDocument {
    fn from(m: MrfInstance) -> Self {
        InstanceDocument {
            num_nodes: m.num_nodes,
            num_labels: m.num_labels,
            unary: m.unary,
            binary: m.binary,
        }
    }
}

impl MrfInstance {
    /// Builds an instance, canonicalizing edge orientation to `i < j` and
    /// rejecting anything that violates the model invariants.
    pub fn new(
        num_nodes: usize,
        num_labels: usize,
        unary: Vec<UnaryTerm>,
        binary: Vec<BinaryTerm>,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::invalid("num_nodes must be positive"));
        }
        if num_labels < 2 {
            return Err(Error::invalid("num_labels must be at least 2"));
        }

        let mut seen_unary = HashSet::with_capacity(unary.len());
        for t in &unary {
            if t.node >= num_nodes {
                return Err(Error::invalid(format!("unary node {} out of range", t.node)));
            }
            if t.label >= num_labels {
                return Err(Error::invalid(format!("unary label {} out of range", t.label)));
            }
            if !t.weight.is_finite() {
                return Err(Error::invalid(format!("unary weight at node {} is not finite", t.node)));
            }
            if !seen_unary.insert((t.node, t.label)) {
                return Err(Error::invalid(format!(
                    "duplicate unary term (node {}, label {})",
                    t.node, t.label
                )));
            }
        }

        let mut canonical = Vec::with_capacity(binary.len());
        let mut seen_edges = HashSet::with_capacity(binary.len());
        for t in binary {
            if t.i >= num_nodes || t.j >= num_nodes {
                return Err(Error::invalid(format!("edge ({}, {}) out of range", t.i, t.j)));
            }
            if t.i == t.j {
                return Err(Error::invalid(format!("self-loop at node {}", t.i)));
            }
            if !t.weight.is_finite() {
                return Err(Error::invalid(format!("edge ({}, {}) weight is not finite", t.i, t.j)));
            }
            let (i, j) = if t.i < t.j { (t.i, t.j) } else { (t.j, t.i) };
            if !seen_edges.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
            canonical.push(BinaryTerm { i, j, weight: t.weight });
        }

        Ok(MrfInstance { num_nodes, num_labels, unary, binary: canonical })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn unary_terms(&self) -> &[UnaryTerm] {
        &self.unary
    }

    pub fn binary_terms(&self) -> &[BinaryTerm] {
        &self.binary
    }

    /// Total Potts energy of a labeling.
    pub fn energy(&self, x: &Labeling) -> Result<f64> {
        x.validate(self.num_nodes, self.num_labels)?;
        Ok(self.energy_unchecked(x.as_slice()))
    }

    pub(crate) fn energy_unchecked(&self, x: &[usize]) -> f64 {
        let unary: f64 = self
            .unary
            .iter()
            .filter(|t| x[t.node] != t.label)
            .map(|t| t.weight)
            .sum();
        let binary: f64 = self
            .binary
            .iter()
            .filter(|t| x[t.i] != x[t.j])
            .map(|t| t.weight)
            .sum();
        // Float sums of empty iterators are −0.0; normalize the sign.
        unary + binary + 0.0
    }

    /// Per-node adjacency: `(neighbor, weight)` lists.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for t in &self.binary {
            adj[t.i].push((t.j, t.weight));
            adj[t.j].push((t.i, t.weight));
        }
        adj
    }

    /// Per-node unary terms: `(label, weight)` lists.
    pub fn unaries_by_node(&self) -> Vec<Vec<(usize, f64)>> {
        let mut by_node = vec![Vec::new(); self.num_nodes];
        for t in &self.unary {
            by_node[t.node].push((t.label, t.weight));
        }
        by_node
    }

    /// Local energy of assigning `label` to `node` given the labels of its
    /// neighbors in `x`.
    pub(crate) fn local_cost(
        unaries: &[(usize, f64)],
        neighbors: &[(usize, f64)],
        x: &[usize],
        label: usize,
    ) -> f64 {
        let u: f64 = unaries.iter().filter(|(l, _)| *l != label).map(|(_, w)| w).sum();
        let b: f64 = neighbors.iter().filter(|(j, _)| x[*j] != label).map(|(_, w)| w).sum();
        u + b
    }

    /// The labeling that takes each node's highest-weight measured label
    /// (label 0 for nodes without unary terms).
    pub fn unary_argmax_labeling(&self) -> Labeling {
        let mut best = vec![(0usize, f64::NEG_INFINITY); self.num_nodes];
        for t in &self.unary {
            let b = &mut best[t.node];
            if t.weight > b.1 || (t.weight == b.1 && t.label < b.0) {
                *b = (t.label, t.weight);
            }
        }
        Labeling(best.into_iter().map(|(l, _)| l).collect())
    }
}

/// Contrast-sensitive Potts weight `λ1 + λ2·exp(−β‖cᵢ − cⱼ‖²)`.
pub fn binary_weight_from_features(
    c_i: &[f64],
    c_j: &[f64],
    lambda1: f64,
    lambda2: f64,
    beta: f64,
) -> Result<f64> {
    if c_i.len() != c_j.len() {
        return Err(Error::invalid(format!(
            "feature vectors differ in length ({} vs {})",
            c_i.len(),
            c_j.len()
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta must be non-negative"));
    }
    let dist2: f64 = c_i.iter().zip(c_j).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(lambda1 + lambda2 * (-beta * dist2).exp())
}
