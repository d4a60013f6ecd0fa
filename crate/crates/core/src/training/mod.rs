//! The auxiliary-process training objective and the optimization loop.

mod bregman;
mod data;
mod loss;
mod optim;
mod train;

pub use bregman::{bregman_divergence, generalized_kl};
pub use data::{Coupler, DataSource, Draw, IndependentPairs, WeightedPairs};
pub use loss::{example_loss, loss_and_grad, Example, LossOutput, RATE_FLOOR};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    sample_example, train, train_reverse, train_with_callback, Direction, StepMetrics, TrainConfig,
    TrainOutcome,
};
