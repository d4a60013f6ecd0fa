use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{RateModel, RatePrediction};
use crate::sequence::{EditOp, Sequence};

use super::euler::{draw_token, StepOptions};
use super::trace::{GenerationTrace, TraceRecord};

/// Settings for exact event-driven simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GillespieConfig {
    /// Width of the slices on which rates are frozen (at the slice midpoint).
    /// Slices are further split wherever the model reports a rate change.
    pub slice: f64,
    pub opts: StepOptions,
    /// Largest admissible number of one-edit neighbours of a state.
    pub max_neighbors: usize,
}

impl GillespieConfig {
    pub fn new(slice: f64, max_len: usize) -> Self {
        Self {
            slice,
            opts: StepOptions::plain(max_len),
            max_neighbors: 1 << 20,
        }
    }
}

/// Result of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub x: Sequence,
    pub num_edits: usize,
    pub dropped: usize,
    pub trace: Option<GenerationTrace>,
}

/// Chooses one edit with probability proportional to its rate.
fn pick_edit<R: Rng + ?Sized>(
    pred: &RatePrediction,
    total: f64,
    opts: &StepOptions,
    rng: &mut R,
) -> Result<EditOp> {
    let mut u = rng.gen::<f64>() * total;
    let mut fallback = None;
    for i in 0..=pred.n {
        for (kind, lam) in [
            (0u8, pred.lam_ins[i]),
            (1, pred.lam_del[i]),
            (2, pred.lam_sub[i]),
        ] {
            if lam <= 0.0 {
                continue;
            }
            fallback = Some((i, kind));
            if u < lam {
                return build(pred, i, kind, opts, rng);
            }
            u -= lam;
        }
    }
    let (i, kind) = fallback.ok_or(Error::EmptySupport)?;
    build(pred, i, kind, opts, rng)
}

fn build<R: Rng + ?Sized>(
    pred: &RatePrediction,
    i: usize,
    kind: u8,
    opts: &StepOptions,
    rng: &mut R,
) -> Result<EditOp> {
    Ok(match kind {
        0 => EditOp::Insert {
            pos: i,
            token: draw_token(pred.q_ins_row(i), opts, rng)?,
        },
        1 => EditOp::Delete { pos: i },
        _ => EditOp::Substitute {
            pos: i,
            token: draw_token(pred.q_sub_row(i), opts, rng)?,
        },
    })
}

/// Exact simulation of a model whose rates are treated as constant on short
/// time slices, from `t = 0` to `t = 1`.
///
/// Each event becomes one trace record. Insertions are switched off in states
/// already at the length cap.
pub fn gillespie_simulate<R: Rng + ?Sized>(
    model: &dyn RateModel,
    x0: &Sequence,
    cfg: &GillespieConfig,
    record: bool,
    rng: &mut R,
) -> Result<SimOutcome> {
    if !(cfg.slice > 0.0) {
        return Err(Error::Config(format!(
            "slice width must be positive, got {}",
            cfg.slice
        )));
    }
    let m = model.vocab().size();
    let mut x = x0.clone().with_max_len(cfg.opts.max_len.max(x0.len()))?;
    let mut trace = record.then(|| GenerationTrace::start(x0));
    let mut num_edits = 0;
    let mut t = 0.0f64;
    while t < 1.0 {
        let mut end = (t + cfg.slice).min(1.0);
        if let Some(c) = model.constant_until(t) {
            if c > t {
                end = end.min(c);
            }
        }
        let mid = 0.5 * (t + end);
        let mut now = t;
        loop {
            let neighbors = (x.len() + 1) * (2 * m + 1);
            if neighbors > cfg.max_neighbors {
                return Err(Error::SpaceTooLarge {
                    size: neighbors,
                    cap: cfg.max_neighbors,
                });
            }
            let pred = model.predict(&x, mid)?;
            let mut total = pred.exit_rate();
            let capped = x.len() >= cfg.opts.max_len;
            if capped {
                total -= pred.lam_ins.iter().sum::<f64>();
            }
            if !(total > 0.0) {
                break;
            }
            let wait = -(1.0 - rng.gen::<f64>()).ln() / total;
            if now + wait >= end {
                break;
            }
            now += wait;
            let op = if capped {
                let mut p = pred.into_owned();
                p.lam_ins.iter_mut().for_each(|l| *l = 0.0);
                pick_edit(&p, total, &cfg.opts, rng)?
            } else {
                pick_edit(&pred, total, &cfg.opts, rng)?
            };
            x = x.apply(&op)?;
            num_edits += 1;
            if let Some(tr) = trace.as_mut() {
                let step = tr.records.len();
                tr.push(TraceRecord {
                    step,
                    t: now,
                    edits: vec![op],
                    corrector_edits: Vec::new(),
                    tokens: x.content().to_vec(),
                });
            }
        }
        t = end;
    }
    Ok(SimOutcome {
        x,
        num_edits,
        dropped: 0,
        trace,
    })
}
