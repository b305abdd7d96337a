//! MAP inference for Potts-model Markov random fields through low-rank
//! semidefinite relaxations.
//!
//! Two pipelines are provided. [`fuses`] relaxes a one-hot label matrix and
//! solves a single Riemannian staircase over `St(1,r)ᴺ × St(K,r)`. [`dars`]
//! relaxes the ±1 vector encoding and runs dual ascent on its Lagrangian,
//! with a staircase solve for every primal step. Both return a rounded
//! labeling together with a lower bound on the optimal energy, so each
//! result carries its own sub-optimality certificate.

pub mod baselines;
pub mod bench;
pub mod dars;
pub mod encoding;
pub mod error;
pub mod fuses;
pub mod generate;
pub mod io;
pub mod lanczos;
pub mod manifold;
pub mod metrics;
pub mod mrf;
pub mod sparse;
pub mod staircase;
pub mod tnt;

pub use error::{Error, Result};
pub use mrf::{BinaryTerm, Labeling, MrfInstance, UnaryTerm};
