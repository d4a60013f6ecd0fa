use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::model::{RateModel, RatePrediction};
use crate::paths::Scheduler;
use crate::sequence::{EditOp, Sequence, Vocab};

use super::coupling::WeightedCoupling;
use super::marginal::{enumerate_marginal, Marginal};
use super::space::EnumeratedSpace;

/// Entries kept before the per-time cache is flushed.
const CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableDirection {
    /// Rates of the marginal path at time `t`.
    Forward,
    /// Time-reversed rates: queried at `s`, built from the path at `1 - s`.
    Reverse,
}

/// The exact marginal rate of a coupling, served through [`RateModel`].
///
/// Each target state receives its whole rate on the first edit that reaches
/// it in neighbour order; equivalent edits get zero.
pub struct ExactRateTable {
    space: EnumeratedSpace,
    coupling: WeightedCoupling,
    sched: Scheduler,
    direction: TableDirection,
    cache: Mutex<HashMap<u64, Arc<Vec<RatePrediction>>>>,
}

impl ExactRateTable {
    pub fn new(
        space: EnumeratedSpace,
        coupling: WeightedCoupling,
        sched: Scheduler,
        direction: TableDirection,
    ) -> Self {
        Self {
            space,
            coupling,
            sched,
            direction,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn space(&self) -> &EnumeratedSpace {
        &self.space
    }

    /// Marginal of the underlying forward path at model time `t`.
    pub fn marginal(&self, t: f64) -> Result<Marginal> {
        let path_t = match self.direction {
            TableDirection::Forward => t,
            TableDirection::Reverse => 1.0 - t,
        };
        enumerate_marginal(&self.space, &self.coupling, &self.sched, path_t)
    }

    /// Rate from state `x` into state `y` at model time `t`.
    pub fn state_rate(&self, m: &Marginal, x: usize, y: usize) -> f64 {
        match self.direction {
            TableDirection::Forward => m.rate(x, y),
            TableDirection::Reverse => m.reverse_rate(x, y),
        }
    }

    fn build(&self, t: f64) -> Result<Vec<RatePrediction>> {
        let m = self.marginal(t)?;
        (0..self.space.len())
            .map(|x| self.prediction_for(&m, x))
            .collect()
    }

    fn prediction_for(&self, marg: &Marginal, x: usize) -> Result<RatePrediction> {
        let seq = self.space.sequence(x);
        let m = self.space.vocab().size();
        let mut pred = RatePrediction::zeros(seq.len(), m);
        let mut seen = vec![false; self.space.len()];
        seen[x] = true;
        let mut ins = vec![0.0; pred.q_ins.len()];
        let mut sub = vec![0.0; pred.q_sub.len()];
        for (op, y) in self.space.neighbors(x) {
            if std::mem::replace(&mut seen[y], true) {
                continue;
            }
            let r = self.state_rate(marg, x, y);
            match op {
                EditOp::Insert { pos, token } => ins[pos * m + token as usize] = r,
                EditOp::Delete { pos } => pred.lam_del[pos] = r,
                EditOp::Substitute { pos, token } => sub[pos * m + token as usize] = r,
            }
        }
        for y in 0..self.space.len() {
            if !seen[y] && self.state_rate(marg, x, y) != 0.0 {
                return Err(Error::Unsupported(format!(
                    "rate between non-neighbours {:?} and {:?}",
                    self.space.content(x),
                    self.space.content(y)
                )));
            }
        }
        let silent = RatePrediction::silent(&seq);
        for i in 0..=seq.len() {
            let row = i * m..(i + 1) * m;
            let li: f64 = ins[row.clone()].iter().sum();
            pred.lam_ins[i] = li;
            pred.q_ins[row.clone()].copy_from_slice(if li > 0.0 {
                &ins[row.clone()]
            } else {
                &silent.q_ins[row.clone()]
            });
            if li > 0.0 {
                pred.q_ins[row.clone()].iter_mut().for_each(|q| *q /= li);
            }
            let ls: f64 = sub[row.clone()].iter().sum();
            pred.lam_sub[i] = ls;
            pred.q_sub[row.clone()].copy_from_slice(if ls > 0.0 {
                &sub[row.clone()]
            } else {
                &silent.q_sub[row.clone()]
            });
            if ls > 0.0 {
                pred.q_sub[row].iter_mut().for_each(|q| *q /= ls);
            }
        }
        Ok(pred)
    }

    fn lookup(&self, t: f64) -> Result<Arc<Vec<RatePrediction>>> {
        let key = t.to_bits();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(self.build(t)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, built.clone());
        Ok(built)
    }
}

impl RateModel for ExactRateTable {
    fn vocab(&self) -> Vocab {
        self.space.vocab()
    }

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>> {
        let i = self
            .space
            .index_of_sequence(x)
            .ok_or(Error::StateOutsideSpace)?;
        Ok(Cow::Owned(self.lookup(t)?[i].clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::CouplingMode;

    #[test]
    fn forward_prediction_reproduces_state_rates() {
        let c = WeightedCoupling::from_pairs(
            2,
            &[(vec![0], vec![1, 1], 0.5), (vec![1, 0], vec![], 0.5)],
            CouplingMode::Optimal,
        )
        .unwrap();
        let space = c.space().unwrap();
        let table = ExactRateTable::new(
            space.clone(),
            c,
            Scheduler::cubic(),
            TableDirection::Forward,
        );
        let t = 0.4;
        let marg = table.marginal(t).unwrap();
        for x in 0..space.len() {
            let seq = space.sequence(x);
            let pred = table.predict(&seq, t).unwrap();
            let mut total = 0.0;
            for (op, _) in space.neighbors(x) {
                total += pred.rate_of_edit(&op).unwrap();
            }
            let expect: f64 = (0..space.len()).map(|y| marg.rate(x, y)).sum();
            assert!((total - expect).abs() < 1e-12);
            assert!((pred.exit_rate() - expect).abs() < 1e-12);
        }
    }
}
