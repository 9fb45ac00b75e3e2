//! Multilayer perceptrons over a flat parameter vector.
//!
//! Parameters of a network live in one flat `Vec<f64>` in layer order
//! (weights, biases, then layer-norm gain and bias for normalized layers),
//! which keeps Adam, Polyak averaging and snapshots to simple slice loops.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;
pub(crate) mod snapshot;

pub use adam::AdamState;
pub use gradcheck::{gradcheck, relative_error, GradcheckReport, FD_STEP};
pub use matrix::Matrix;
pub use mlp::{Activation, Architecture, Gradients, MlpNet, Tape, LN_EPSILON};
pub use snapshot::{decode_snapshot, encode_snapshot};
