use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RateModel, RatePrediction};
use crate::sequence::{Sequence, Vocab};

/// Special cases obtained by zeroing parts of a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    /// Only substitutions; sequence length never changes.
    SubstitutionOnly,
    /// Only insertions; sequence length never decreases.
    InsertOnly,
    /// Only insertions at the last anchor: left-to-right generation.
    RightmostInsertOnly,
}

impl std::str::FromStr for Restriction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "substitution_only" => Ok(Restriction::SubstitutionOnly),
            "insert_only" => Ok(Restriction::InsertOnly),
            "rightmost_insert_only" => Ok(Restriction::RightmostInsertOnly),
            other => Err(Error::Config(format!("unknown restriction `{other}`"))),
        }
    }
}

impl Restriction {
    pub fn apply(self, pred: &mut RatePrediction) {
        match self {
            Restriction::SubstitutionOnly => {
                pred.lam_ins.iter_mut().for_each(|l| *l = 0.0);
                pred.lam_del.iter_mut().for_each(|l| *l = 0.0);
            }
            Restriction::InsertOnly | Restriction::RightmostInsertOnly => {
                pred.lam_del.iter_mut().for_each(|l| *l = 0.0);
                pred.lam_sub.iter_mut().for_each(|l| *l = 0.0);
                if self == Restriction::RightmostInsertOnly {
                    let last = pred.n;
                    pred.lam_ins[..last].iter_mut().for_each(|l| *l = 0.0);
                }
            }
        }
    }
}

/// Wraps a model and restricts every prediction.
pub struct Restricted<M> {
    pub inner: M,
    pub restriction: Restriction,
}

impl<M: RateModel> RateModel for Restricted<M> {
    fn vocab(&self) -> Vocab {
        self.inner.vocab()
    }

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>> {
        let mut pred = self.inner.predict(x, t)?.into_owned();
        self.restriction.apply(&mut pred);
        Ok(Cow::Owned(pred))
    }

    fn constant_until(&self, t: f64) -> Option<f64> {
        self.inner.constant_until(t)
    }
}
