//! Quadratic encodings of the Potts energy.

pub mod pm;
pub mod zo;

pub use pm::{encode_pm, labeling_to_pm, pm_to_labeling, PmAssignmentVector, PmEncoding};
pub use zo::{encode_zo, labeling_to_zo, zo_objective, zo_to_labeling, ZoAssignmentMatrix, ZoEncoding};
