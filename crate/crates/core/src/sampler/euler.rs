use rand::Rng;

use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::sequence::{EditOp, Sequence, Token};

use super::sharpen::{is_identity, sharpen};

/// Settings shared by every step of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: Option<usize>,
    pub max_len: usize,
}

impl StepOptions {
    pub fn plain(max_len: usize) -> Self {
        Self {
            temperature: 1.0,
            top_p: 1.0,
            top_k: None,
            max_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x: Sequence,
    pub edits: Vec<EditOp>,
    /// Insertions discarded because the result would exceed `max_len`.
    pub dropped: usize,
}

pub(crate) fn draw_token<R: Rng + ?Sized>(
    row: &[f64],
    opts: &StepOptions,
    rng: &mut R,
) -> Result<Token> {
    let sharpened;
    let row = if is_identity(opts.temperature, opts.top_p, opts.top_k) {
        row
    } else {
        sharpened = sharpen(row, opts.temperature, opts.top_p, opts.top_k)?;
        &sharpened
    };
    let total: f64 = row.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptySupport);
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (a, &q) in row.iter().enumerate() {
        if q > 0.0 {
            if u < q {
                return Ok(a as Token);
            }
            u -= q;
            last = Some(a);
        }
    }
    Ok(last.expect("row has positive mass") as Token)
}

/// One first-order step of length `h` from `(x, t)`.
///
/// Every anchor independently fires an insertion with probability
/// `min(h lam_ins, 1)` and a deletion-or-substitution with probability
/// `min(h (lam_del + lam_sub), 1)`; a fired group is a deletion with
/// probability `lam_del / (lam_del + lam_sub)`. All fired edits are applied
/// simultaneously.
pub fn euler_step<R: Rng + ?Sized>(
    model: &dyn RateModel,
    x: &Sequence,
    t: f64,
    h: f64,
    opts: &StepOptions,
    rng: &mut R,
) -> Result<StepOutcome> {
    if !(h >= 0.0) || t + h > 1.0 + 1e-12 {
        return Err(Error::Config(format!("invalid step: t = {t}, h = {h}")));
    }
    let pred = model.predict(x, t)?;
    let n = x.len();
    let mut edits = Vec::new();
    let mut num_ins = 0usize;
    let mut num_del = 0usize;
    for i in 0..=n {
        if i > 0 {
            let (ld, ls) = (pred.lam_del[i], pred.lam_sub[i]);
            let group = ld + ls;
            let p = (h * group).min(1.0);
            if p > 0.0 && rng.gen::<f64>() < p {
                if rng.gen::<f64>() * group < ld {
                    edits.push(EditOp::Delete { pos: i });
                    num_del += 1;
                } else {
                    let token = draw_token(pred.q_sub_row(i), opts, rng)?;
                    edits.push(EditOp::Substitute { pos: i, token });
                }
            }
        }
        let p = (h * pred.lam_ins[i]).min(1.0);
        if p > 0.0 && rng.gen::<f64>() < p {
            let token = draw_token(pred.q_ins_row(i), opts, rng)?;
            edits.push(EditOp::Insert { pos: i, token });
            num_ins += 1;
        }
    }
    let mut dropped = 0;
    while n + num_ins - num_del > opts.max_len {
        let idx = edits
            .iter()
            .rposition(|op| matches!(op, EditOp::Insert { .. }))
            .expect("an insertion exists while over length");
        edits.remove(idx);
        num_ins -= 1;
        dropped += 1;
    }
    let x = x
        .clone()
        .with_max_len(opts.max_len.max(x.len()))?
        .apply_simultaneous(&edits)?;
    Ok(StepOutcome { x, edits, dropped })
}
