//! Dense tensors, rectifier MLPs, momentum SGD and gradient verification.

pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
mod normalize;
mod params;
pub mod sgd;
mod tensor;

pub use checkpoint::Checkpoint;
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use mlp::{backward, forward, param_gradients, ForwardCache, MlpSpec};
pub use normalize::{l2_normalize, l2_normalize_backward, MIN_ROW_NORM};
pub use params::ParamSet;
pub use sgd::{sgd_step, LrStep, SgdConfig, SgdState};
pub use tensor::Tensor;
