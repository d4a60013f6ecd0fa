use crate::error::{Error, Result};
use crate::model::{Gradient, ModelParams, RatePrediction};
use crate::par::Exec;
use crate::paths::PathSample;
use crate::sequence::{EditOp, Sequence};

/// Rates below this value are clamped before taking the logarithm.
pub const RATE_FLOOR: f64 = 1e-30;

/// A path sample together with the condition the model sees for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub path: PathSample,
    pub cond: Option<Sequence>,
}

impl From<PathSample> for Example {
    fn from(path: PathSample) -> Self {
        Self { path, cond: None }
    }
}

/// Batch-averaged loss, its two terms and the parameter gradient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossOutput {
    pub loss: f64,
    pub term1: f64,
    pub term2: f64,
    pub grad: Gradient,
    pub clamp_warnings: usize,
}

/// The rate the model assigns to reaching `op`'s result, summed over every
/// edit that yields the same sequence.
fn sequence_rate(pred: &RatePrediction, x: &Sequence, op: &EditOp) -> Result<(f64, Vec<EditOp>)> {
    let ops = x.equivalent_edits(op);
    let mut total = 0.0;
    for eq in &ops {
        total += pred.rate_of_edit(eq)?;
    }
    Ok((total, ops))
}

fn add_rate_cotangent(cot: &mut RatePrediction, pred: &RatePrediction, op: &EditOp, scale: f64) {
    let m = pred.m;
    match *op {
        EditOp::Insert { pos, token } => {
            let a = token as usize;
            cot.lam_ins[pos] += scale * pred.q_ins[pos * m + a];
            cot.q_ins[pos * m + a] += scale * pred.lam_ins[pos];
        }
        EditOp::Delete { pos } => cot.lam_del[pos] += scale,
        EditOp::Substitute { pos, token } => {
            let a = token as usize;
            cot.lam_sub[pos] += scale * pred.q_sub[pos * m + a];
            cot.q_sub[pos * m + a] += scale * pred.lam_sub[pos];
        }
    }
}

/// Loss of a single example: total exit rate minus the weighted log-rates of
/// the edits the conditional process still has to make.
///
/// Returns `(term1, term2, cotangent, clamp warnings)`.
pub fn example_loss(
    params: &ModelParams,
    ex: &Example,
) -> Result<(f64, f64, RatePrediction, usize)> {
    let path = &ex.path;
    let x = &path.x_t;
    let pred = params.predict(x, path.t, ex.cond.as_ref())?;
    let term1 = pred.exit_rate();
    let mut cot = RatePrediction::zeros(pred.n, pred.m);
    cot.lam_ins.iter_mut().for_each(|c| *c = 1.0);
    cot.lam_del.iter_mut().skip(1).for_each(|c| *c = 1.0);
    cot.lam_sub.iter_mut().skip(1).for_each(|c| *c = 1.0);
    let mut term2 = 0.0;
    let mut warnings = 0;
    for target in path.targets() {
        let w = target.rate;
        if !w.is_finite() {
            return Err(Error::Config(format!(
                "non-finite loss weight at t = {}; sample t below 1",
                path.t
            )));
        }
        let (rate, ops) = sequence_rate(&pred, x, &target.op)?;
        if rate < RATE_FLOOR {
            warnings += 1;
            term2 -= w * RATE_FLOOR.ln();
            continue;
        }
        term2 -= w * rate.ln();
        for op in &ops {
            add_rate_cotangent(&mut cot, &pred, op, -w / rate);
        }
    }
    Ok((term1, term2, cot, warnings))
}

/// Mean loss and gradient over a batch.
///
/// Per-example gradients may be computed in parallel; they are always summed
/// in batch order.
pub fn loss_and_grad(params: &ModelParams, batch: &[Example], exec: Exec) -> Result<LossOutput> {
    if batch.is_empty() {
        return Ok(LossOutput::default());
    }
    let parts = exec.map_slice(batch, |ex| -> Result<_> {
        let (t1, t2, cot, warn) = example_loss(params, ex)?;
        let grad = params.grad_predict(&ex.path.x_t, ex.path.t, ex.cond.as_ref(), &cot)?;
        Ok((t1, t2, grad, warn))
    });
    let scale = 1.0 / batch.len() as f64;
    let mut out = LossOutput::default();
    for part in parts {
        let (t1, t2, grad, warn) = part?;
        out.term1 += t1;
        out.term2 += t2;
        out.clamp_warnings += warn;
        for (k, g) in grad {
            *out.grad.entry(k).or_insert(0.0) += g;
        }
    }
    out.term1 *= scale;
    out.term2 *= scale;
    out.loss = out.term1 + out.term2;
    out.grad.values_mut().for_each(|g| *g *= scale);
    Ok(out)
}
