//! Rate models: the prediction type, the model trait and the desk-scale
//! parameterizations.

mod checkpoint;
mod params;
mod prediction;

use std::borrow::Cow;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use params::{Conditioned, Gradient, ModelKind, ModelParams, PredictionCache};
pub use prediction::RatePrediction;

use crate::error::Result;
use crate::sequence::{Sequence, Vocab};

/// Anything that maps a state and a time to edit rates.
pub trait RateModel: Sync {
    fn vocab(&self) -> Vocab;

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>>;

    /// Hint for simulators: rates are constant on `[t, returned value)`.
    fn constant_until(&self, _t: f64) -> Option<f64> {
        None
    }
}

impl<M: RateModel + ?Sized> RateModel for &M {
    fn vocab(&self) -> Vocab {
        (**self).vocab()
    }

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>> {
        (**self).predict(x, t)
    }

    fn constant_until(&self, t: f64) -> Option<f64> {
        (**self).constant_until(t)
    }
}
