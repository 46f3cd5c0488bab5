//! Minimal deterministic tensor engine: reverse-mode autodiff on a tape, the
//! handful of layers a piano-roll CNN and an encoder–decoder transformer need,
//! Adam, finite-difference gradient checks and a binary checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod fpenv;
pub mod gradcheck;
pub mod layers;
pub mod ops;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, RngState};
pub use error::{NnError, Result};
pub use fpenv::flush_denormals;
pub use gradcheck::{gradient_check, relative_error, GradCheckConfig, GradCheckReport};
pub use params::{ParamId, ParamStore};
pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
