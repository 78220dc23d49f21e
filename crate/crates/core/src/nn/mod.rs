//! Minimal dense numeric core: MLP layers with analytic forward/backward,
//! softmax cross-entropy, SGD with momentum, and parameter snapshots.
//!
//! All operations are pure functions of their inputs; mutation happens only
//! through `&mut` arguments or returned values.

pub mod gradcheck;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod snapshot;

pub use gradcheck::{compare_grads, finite_diff_grads, GradCheckReport};
pub use loss::softmax_cross_entropy;
pub use mlp::{init_params, mlp_backward, mlp_forward, Activation, ForwardCache, MlpSpec};
pub use optim::sgd_momentum_step;
pub use snapshot::{interpolate_params, ParamEntry, ParamSnapshot};
