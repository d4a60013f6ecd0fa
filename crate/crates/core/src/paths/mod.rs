//! Probability paths over the alignment space.

mod mixture;
mod propagation;
mod schedule;

pub use mixture::{conditional_rate, sample_zt, sample_zt_localized, CondRate, PathSample};
pub use propagation::{effective_weights, sample_poisson, sample_propagation, PropagationState};
pub use schedule::{ScheduleKind, Scheduler};
