//! Differentiable-computation substrate: parameter registries, layers with
//! explicit forward/backward passes, Adam, and a finite-difference checker.

pub mod act;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod kernel;
pub mod lstm;
pub mod norm;
pub mod optim;
pub mod param;
pub mod resblock;
pub mod unet;

pub use act::Activation;
pub use conv::Conv1d;
pub use dense::Dense;
pub use lstm::{LstmCell, LstmState};
pub use norm::BatchNorm1d;
pub use optim::{lr_at, Adam};
pub use param::{Grads, ParamId, StateId, States, Vars};
pub use resblock::ResidualBlock;
pub use unet::TemporalUnet;
