use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::Rng;

use super::prediction::RatePrediction;
use super::RateModel;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::paths::Scheduler;
use crate::sequence::{Sequence, Vocab};

const LOGIT_CLAMP: f64 = 30.0;
const WINDOW_RADIUS: usize = 2;
const WINDOW: usize = 2 * WINDOW_RADIUS + 1;
/// Largest enumerated state space a tabular model may cover.
pub const TABULAR_STATE_CAP: usize = 1 << 20;

/// The two desk-scale parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// One block of logits per (state, time bucket) over all sequences of
    /// length at most `max_len`; buckets are uniform in `-ln(1 - t)`.
    Tabular { max_len: usize, buckets: usize },
    /// A linear map from local window features to logits.
    Featurized,
}

/// Sparse parameter gradient keyed by parameter index.
pub type Gradient = BTreeMap<usize, f64>;

/// Raw parameters of a rate model.
///
/// Rates are `exp` of logits clamped to `[-30, 30]`; distributions are a
/// softmax of logits. Substitution rows exclude the current token.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    vocab: Vocab,
    kind: ModelKind,
    values: Vec<f64>,
}

fn positive(logit: f64) -> (f64, f64) {
    if logit >= LOGIT_CLAMP {
        (LOGIT_CLAMP.exp(), 0.0)
    } else if logit <= -LOGIT_CLAMP {
        ((-LOGIT_CLAMP).exp(), 0.0)
    } else {
        let v = logit.exp();
        (v, v)
    }
}

/// Softmax of `logits` with entry `skip` (if any) forced to zero.
fn masked_softmax(logits: &[f64], skip: Option<usize>, out: &mut [f64]) {
    let max = logits
        .iter()
        .enumerate()
        .filter(|(a, _)| Some(*a) != skip)
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (a, (&l, o)) in logits.iter().zip(out.iter_mut()).enumerate() {
        *o = if Some(a) == skip {
            0.0
        } else {
            (l - max).exp()
        };
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Gradient of `sum_k c_k q_k` w.r.t. softmax logits.
fn softmax_vjp(q: &[f64], cot: &[f64], mut emit: impl FnMut(usize, f64)) {
    let mean: f64 = q.iter().zip(cot).map(|(q, c)| q * c).sum();
    for (a, (&qa, &ca)) in q.iter().zip(cot).enumerate() {
        if qa > 0.0 {
            emit(a, qa * (ca - mean));
        }
    }
}

struct TabularLayout {
    m: usize,
    max_len: usize,
    buckets: usize,
    /// First parameter of each length class.
    len_offsets: Vec<usize>,
    /// Number of states of each length.
    len_counts: Vec<usize>,
}

impl TabularLayout {
    fn new(m: usize, max_len: usize, buckets: usize) -> Result<Self> {
        let mut len_offsets = Vec::with_capacity(max_len + 2);
        let mut len_counts = Vec::with_capacity(max_len + 1);
        let mut offset = 0usize;
        let mut states = 0usize;
        let mut count = 1usize;
        for n in 0..=max_len {
            len_offsets.push(offset);
            len_counts.push(count);
            states += count;
            if states > TABULAR_STATE_CAP {
                return Err(Error::SpaceTooLarge {
                    size: states,
                    cap: TABULAR_STATE_CAP,
                });
            }
            offset += count * buckets * Self::block(m, n);
            count = count.saturating_mul(m);
        }
        len_offsets.push(offset);
        Ok(Self {
            m,
            max_len,
            buckets,
            len_offsets,
            len_counts,
        })
    }

    fn block(m: usize, n: usize) -> usize {
        (n + 1) * (1 + m) + n * (2 + m)
    }

    fn total(&self) -> usize {
        *self.len_offsets.last().expect("non-empty")
    }

    fn num_states(&self) -> usize {
        self.len_counts.iter().sum()
    }

    fn bucket(&self, t: f64) -> usize {
        time_bucket(t, self.buckets)
    }

    fn state_rank(&self, x: &Sequence) -> Result<usize> {
        if x.len() > self.max_len {
            return Err(Error::StateOutsideSpace);
        }
        Ok(x.content()
            .iter()
            .fold(0usize, |acc, &tok| acc * self.m + tok as usize))
    }

    fn block_start(&self, x: &Sequence, t: f64) -> Result<usize> {
        let n = x.len();
        let rank = self.state_rank(x)?;
        Ok(self.len_offsets[n] + (rank * self.buckets + self.bucket(t)) * Self::block(self.m, n))
    }
}

/// Offsets inside one tabular block for a state with `n` content tokens.
struct BlockOffsets {
    ins: usize,
    del: usize,
    sub: usize,
    q_ins: usize,
    q_sub: usize,
}

impl BlockOffsets {
    fn new(m: usize, n: usize) -> Self {
        let ins = 0;
        let del = ins + n + 1;
        let sub = del + n;
        let q_ins = sub + n;
        let q_sub = q_ins + (n + 1) * m;
        Self {
            ins,
            del,
            sub,
            q_ins,
            q_sub,
        }
    }
}

/// Featurized model geometry.
struct FeatLayout {
    m: usize,
    slots: usize,
    features: usize,
    outputs: usize,
}

impl FeatLayout {
    fn new(m: usize) -> Self {
        let slots = m + 2;
        Self {
            m,
            slots,
            features: WINDOW * slots + 4,
            outputs: 3 + 2 * m,
        }
    }

    fn total(&self) -> usize {
        self.features * self.outputs
    }

    /// Active features at anchor `p` of `x`: indicator indices plus the dense
    /// tail `(rel_pos, t, cond_flag, bias)`.
    fn active(
        &self,
        ctx: &[u32],
        offset: usize,
        n: usize,
        p: usize,
        t: f64,
        cond: bool,
    ) -> [(usize, f64); WINDOW + 4] {
        let bos_slot = self.m;
        let pad_slot = self.m + 1;
        let centre = (p + offset) as isize;
        let mut out = [(0usize, 0.0f64); WINDOW + 4];
        for (w, slot) in out.iter_mut().take(WINDOW).enumerate() {
            let idx = centre + w as isize - WINDOW_RADIUS as isize;
            let kind = if idx < 0 || idx as usize >= ctx.len() {
                pad_slot
            } else if idx == 0 {
                bos_slot
            } else {
                ctx[idx as usize] as usize
            };
            *slot = (w * self.slots + kind, 1.0);
        }
        let dense = WINDOW * self.slots;
        out[WINDOW] = (dense, p as f64 / (n + 1) as f64);
        out[WINDOW + 1] = (dense + 1, t);
        out[WINDOW + 2] = (dense + 2, if cond { 1.0 } else { 0.0 });
        out[WINDOW + 3] = (dense + 3, 1.0);
        out
    }
}

/// Raw logits for one state, laid out like a tabular block but with full
/// `(n + 1)`-length del/sub arrays.
struct Logits {
    ins: Vec<f64>,
    del: Vec<f64>,
    sub: Vec<f64>,
    q_ins: Vec<f64>,
    q_sub: Vec<f64>,
}

impl ModelParams {
    /// Zero-initialized tabular model covering sequences up to `max_len`.
    pub fn tabular(vocab: Vocab, max_len: usize, buckets: usize) -> Result<Self> {
        if buckets == 0 {
            return Err(Error::Config(
                "tabular model needs at least one time bucket".into(),
            ));
        }
        let layout = TabularLayout::new(vocab.size(), max_len, buckets)?;
        Ok(Self {
            vocab: vocab.with_max_len(max_len),
            kind: ModelKind::Tabular { max_len, buckets },
            values: vec![0.0; layout.total()],
        })
    }

    /// Zero-initialized featurized model.
    pub fn featurized(vocab: Vocab) -> Self {
        let layout = FeatLayout::new(vocab.size());
        Self {
            vocab,
            kind: ModelKind::Featurized,
            values: vec![0.0; layout.total()],
        }
    }

    /// Builds a model from raw values, checking the parameter count.
    pub fn from_values(vocab: Vocab, kind: ModelKind, values: Vec<f64>) -> Result<Self> {
        let mut params = match kind {
            ModelKind::Tabular { max_len, buckets } => Self::tabular(vocab, max_len, buckets)?,
            ModelKind::Featurized => Self::featurized(vocab),
        };
        if values.len() != params.values.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                params.values.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        params.values = values;
        Ok(params)
    }

    /// Replaces every parameter with a uniform draw from `[-scale, scale]`.
    pub fn randomize<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        self.values
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-scale..=scale));
    }

    /// Adds `ln(sched.rate(mid)) + shift` to every rate logit of a tabular
    /// model, `mid` being the midpoint of the logit's time bucket.
    pub fn offset_rates(&mut self, sched: &Scheduler, shift: f64) -> Result<()> {
        let ModelKind::Tabular { max_len, buckets } = self.kind else {
            return Err(Error::Unsupported(
                "rate offsets need a tabular model".into(),
            ));
        };
        let m = self.vocab.size();
        let layout = TabularLayout::new(m, max_len, buckets)?;
        let offsets = (0..buckets)
            .map(|b| {
                Ok(sched
                    .rate(bucket_mid(b, buckets))?
                    .ln()
                    .clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
                    + shift)
            })
            .collect::<Result<Vec<f64>>>()?;
        for n in 0..=max_len {
            let block = TabularLayout::block(m, n);
            let off = BlockOffsets::new(m, n);
            let len_values = &mut self.values[layout.len_offsets[n]..layout.len_offsets[n + 1]];
            for (k, chunk) in len_values.chunks_exact_mut(block).enumerate() {
                let o = offsets[k % buckets];
                chunk[off.ins..off.q_ins].iter_mut().for_each(|v| *v += o);
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of enumerated states (tabular only).
    pub fn num_states(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Tabular { max_len, buckets } => {
                TabularLayout::new(self.vocab.size(), max_len, buckets)
                    .ok()
                    .map(|l| l.num_states())
            }
            ModelKind::Featurized => None,
        }
    }

    fn check_input(&self, x: &Sequence, t: f64, cond: Option<&Sequence>) -> Result<()> {
        if x.vocab().size() != self.vocab.size() {
            return Err(Error::Config(format!(
                "sequence vocabulary {} does not match model vocabulary {}",
                x.vocab().size(),
                self.vocab.size()
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfUnitInterval {
                what: "t",
                value: t,
            });
        }
        if let Some(c) = cond {
            if c.vocab().size() != self.vocab.size() {
                return Err(Error::Config(
                    "condition uses a different vocabulary".into(),
                ));
            }
        }
        Ok(())
    }

    /// Raw logits of every output at `(x, t)`.
    fn logits(&self, x: &Sequence, t: f64, cond: Option<&Sequence>) -> Result<Logits> {
        let n = x.len();
        let m = self.vocab.size();
        let mut lg = Logits {
            ins: vec![0.0; n + 1],
            del: vec![0.0; n + 1],
            sub: vec![0.0; n + 1],
            q_ins: vec![0.0; (n + 1) * m],
            q_sub: vec![0.0; (n + 1) * m],
        };
        match self.kind {
            ModelKind::Tabular { max_len, buckets } => {
                if cond.is_some() {
                    return Err(Error::Unsupported(
                        "tabular models take no condition".into(),
                    ));
                }
                let layout = TabularLayout::new(m, max_len, buckets)?;
                let start = layout.block_start(x, t)?;
                let off = BlockOffsets::new(m, n);
                let v = &self.values[start..start + TabularLayout::block(m, n)];
                lg.ins.copy_from_slice(&v[off.ins..off.ins + n + 1]);
                lg.del[1..].copy_from_slice(&v[off.del..off.del + n]);
                lg.sub[1..].copy_from_slice(&v[off.sub..off.sub + n]);
                lg.q_ins
                    .copy_from_slice(&v[off.q_ins..off.q_ins + (n + 1) * m]);
                lg.q_sub[m..].copy_from_slice(&v[off.q_sub..off.q_sub + n * m]);
            }
            ModelKind::Featurized => {
                let layout = FeatLayout::new(m);
                let (ctx, offset) = context(x, cond);
                let o = layout.outputs;
                for p in 0..=n {
                    let mut out = vec![0.0; o];
                    for (f, val) in layout.active(&ctx, offset, n, p, t, cond.is_some()) {
                        if val != 0.0 {
                            let w = &self.values[f * o..(f + 1) * o];
                            out.iter_mut().zip(w).for_each(|(acc, w)| *acc += val * w);
                        }
                    }
                    lg.ins[p] = out[0];
                    lg.del[p] = out[1];
                    lg.sub[p] = out[2];
                    lg.q_ins[p * m..(p + 1) * m].copy_from_slice(&out[3..3 + m]);
                    lg.q_sub[p * m..(p + 1) * m].copy_from_slice(&out[3 + m..3 + 2 * m]);
                }
            }
        }
        Ok(lg)
    }

    /// Predicts edit rates at `(x, t)`, optionally conditioned on a prefix.
    pub fn predict(&self, x: &Sequence, t: f64, cond: Option<&Sequence>) -> Result<RatePrediction> {
        self.check_input(x, t, cond)?;
        let lg = self.logits(x, t, cond)?;
        Ok(self.finish(x, &lg))
    }

    fn finish(&self, x: &Sequence, lg: &Logits) -> RatePrediction {
        let n = x.len();
        let m = self.vocab.size();
        let mut p = RatePrediction::zeros(n, m);
        for i in 0..=n {
            p.lam_ins[i] = positive(lg.ins[i]).0;
            masked_softmax(&lg.q_ins[i * m..(i + 1) * m], None, p.q_ins_row_mut(i));
            if i == 0 {
                p.q_sub_row_mut(0)
                    .iter_mut()
                    .for_each(|q| *q = 1.0 / m as f64);
                continue;
            }
            p.lam_del[i] = positive(lg.del[i]).0;
            if m == 1 {
                p.q_sub_row_mut(i)[0] = 1.0;
            } else {
                p.lam_sub[i] = positive(lg.sub[i]).0;
                let cur = x.token(i) as usize;
                masked_softmax(&lg.q_sub[i * m..(i + 1) * m], Some(cur), p.q_sub_row_mut(i));
            }
        }
        p
    }

    /// Vector-Jacobian product of [`ModelParams::predict`]: the gradient of
    /// `<cotangent, predict(x, t, cond)>` with respect to the parameters.
    pub fn grad_predict(
        &self,
        x: &Sequence,
        t: f64,
        cond: Option<&Sequence>,
        cot: &RatePrediction,
    ) -> Result<Gradient> {
        self.check_input(x, t, cond)?;
        let n = x.len();
        let m = self.vocab.size();
        if cot.n != n || cot.m != m {
            return Err(Error::Config(
                "cotangent shape does not match the input".into(),
            ));
        }
        let lg = self.logits(x, t, cond)?;
        let pred = self.finish(x, &lg);
        // Gradient w.r.t. each logit, in the same layout as `Logits`.
        let mut g = Logits {
            ins: vec![0.0; n + 1],
            del: vec![0.0; n + 1],
            sub: vec![0.0; n + 1],
            q_ins: vec![0.0; (n + 1) * m],
            q_sub: vec![0.0; (n + 1) * m],
        };
        for i in 0..=n {
            g.ins[i] = cot.lam_ins[i] * positive(lg.ins[i]).1;
            softmax_vjp(pred.q_ins_row(i), cot.q_ins_row(i), |a, v| {
                g.q_ins[i * m + a] = v
            });
            if i == 0 {
                continue;
            }
            g.del[i] = cot.lam_del[i] * positive(lg.del[i]).1;
            if m > 1 {
                g.sub[i] = cot.lam_sub[i] * positive(lg.sub[i]).1;
                softmax_vjp(pred.q_sub_row(i), cot.q_sub_row(i), |a, v| {
                    g.q_sub[i * m + a] = v
                });
            }
        }
        let mut grad = Gradient::new();
        let mut emit = |idx: usize, v: f64| {
            if v != 0.0 {
                *grad.entry(idx).or_insert(0.0) += v;
            }
        };
        match self.kind {
            ModelKind::Tabular { max_len, buckets } => {
                let layout = TabularLayout::new(m, max_len, buckets)?;
                let start = layout.block_start(x, t)?;
                let off = BlockOffsets::new(m, n);
                for i in 0..=n {
                    emit(start + off.ins + i, g.ins[i]);
                    for a in 0..m {
                        emit(start + off.q_ins + i * m + a, g.q_ins[i * m + a]);
                    }
                    if i > 0 {
                        emit(start + off.del + i - 1, g.del[i]);
                        emit(start + off.sub + i - 1, g.sub[i]);
                        for a in 0..m {
                            emit(start + off.q_sub + (i - 1) * m + a, g.q_sub[i * m + a]);
                        }
                    }
                }
            }
            ModelKind::Featurized => {
                let layout = FeatLayout::new(m);
                let (ctx, offset) = context(x, cond);
                let o = layout.outputs;
                let mut dout = vec![0.0; o];
                for p in 0..=n {
                    dout[0] = g.ins[p];
                    dout[1] = g.del[p];
                    dout[2] = g.sub[p];
                    dout[3..3 + m].copy_from_slice(&g.q_ins[p * m..(p + 1) * m]);
                    dout[3 + m..].copy_from_slice(&g.q_sub[p * m..(p + 1) * m]);
                    for (f, val) in layout.active(&ctx, offset, n, p, t, cond.is_some()) {
                        if val != 0.0 {
                            for (k, d) in dout.iter().enumerate() {
                                emit(f * o + k, val * d);
                            }
                        }
                    }
                }
            }
        }
        Ok(grad)
    }
}

/// Context tokens seen by the featurized model: BOS, the condition content,
/// then the state content. Returns the offset of state position 0.
fn context(x: &Sequence, cond: Option<&Sequence>) -> (Vec<u32>, usize) {
    match cond {
        None => (x.tokens().to_vec(), 0),
        Some(c) => {
            let mut ctx = Vec::with_capacity(c.len() + x.num_positions());
            ctx.push(x.vocab().bos());
            ctx.extend_from_slice(c.content());
            ctx.extend_from_slice(x.content());
            (ctx, c.len())
        }
    }
}

impl RateModel for ModelParams {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>> {
        ModelParams::predict(self, x, t, None).map(Cow::Owned)
    }

    fn constant_until(&self, t: f64) -> Option<f64> {
        match self.kind {
            ModelKind::Tabular { buckets, .. } => Some(bucket_end(t, buckets)),
            ModelKind::Featurized => None,
        }
    }
}

/// `1 - t` at the start of the last time bucket is `TIME_TAIL^((B - 1) / B)`.
const TIME_TAIL: f64 = 1e-3;

/// Left edge of bucket `k`: buckets are uniform in `-ln(1 - t)`, so they
/// shrink towards `t = 1` where path rates grow like `1 / (1 - t)`.
fn bucket_edge(k: usize, buckets: usize) -> f64 {
    if k == 0 {
        0.0
    } else if k >= buckets {
        1.0
    } else {
        1.0 - TIME_TAIL.powf(k as f64 / buckets as f64)
    }
}

/// Index of the bucket holding `t`: the number of interior edges at or
/// below `t`.
pub(crate) fn time_bucket(t: f64, buckets: usize) -> usize {
    let guess = if t >= 1.0 {
        buckets - 1
    } else {
        let u = (1.0 - t).ln() / TIME_TAIL.ln() * buckets as f64;
        (u.max(0.0).floor() as usize).min(buckets - 1)
    };
    let mut b = guess;
    while b > 0 && bucket_edge(b, buckets) > t {
        b -= 1;
    }
    while b + 1 < buckets && bucket_edge(b + 1, buckets) <= t {
        b += 1;
    }
    b
}

/// Midpoint of bucket `b`.
fn bucket_mid(b: usize, buckets: usize) -> f64 {
    0.5 * (bucket_edge(b, buckets) + bucket_edge(b + 1, buckets))
}

fn bucket_end(t: f64, buckets: usize) -> f64 {
    bucket_edge(time_bucket(t, buckets) + 1, buckets)
}

/// A model bound to an optional conditioning prefix.
#[derive(Debug, Clone, Copy)]
pub struct Conditioned<'a> {
    pub params: &'a ModelParams,
    pub cond: Option<&'a Sequence>,
}

impl RateModel for Conditioned<'_> {
    fn vocab(&self) -> Vocab {
        self.params.vocab()
    }

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>> {
        self.params.predict(x, t, self.cond).map(Cow::Owned)
    }

    fn constant_until(&self, t: f64) -> Option<f64> {
        RateModel::constant_until(self.params, t)
    }
}

/// Every prediction of a tabular model, computed once.
#[derive(Debug, Clone)]
pub struct PredictionCache {
    vocab: Vocab,
    m: usize,
    max_len: usize,
    buckets: usize,
    len_offsets: Vec<usize>,
    table: Vec<RatePrediction>,
}

impl PredictionCache {
    pub fn new(params: &ModelParams, exec: Exec) -> Result<Self> {
        let ModelKind::Tabular { max_len, buckets } = params.kind else {
            return Err(Error::Unsupported(
                "only tabular models can be cached".into(),
            ));
        };
        let m = params.vocab.size();
        let layout = TabularLayout::new(m, max_len, buckets)?;
        let mut len_offsets = Vec::with_capacity(max_len + 1);
        let mut keys = Vec::new();
        for n in 0..=max_len {
            len_offsets.push(keys.len());
            for rank in 0..layout.len_counts[n] {
                let mut content = vec![0u32; n];
                let mut r = rank;
                for slot in content.iter_mut().rev() {
                    *slot = (r % m) as u32;
                    r /= m;
                }
                for b in 0..buckets {
                    keys.push((content.clone(), b));
                }
            }
        }
        let vocab = params.vocab;
        let table = exec.try_map_range(keys.len(), |k| {
            let (content, b) = &keys[k];
            let x = Sequence::new(vocab, content)?;
            let t = bucket_mid(*b, buckets);
            params.predict(&x, t, None)
        })?;
        Ok(Self {
            vocab,
            m,
            max_len,
            buckets,
            len_offsets,
            table,
        })
    }

    pub fn get(&self, x: &Sequence, t: f64) -> Result<&RatePrediction> {
        let n = x.len();
        if n > self.max_len || x.vocab().size() != self.m {
            return Err(Error::StateOutsideSpace);
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfUnitInterval {
                what: "t",
                value: t,
            });
        }
        let rank = x
            .content()
            .iter()
            .fold(0usize, |acc, &tok| acc * self.m + tok as usize);
        let b = time_bucket(t, self.buckets);
        Ok(&self.table[self.len_offsets[n] + rank * self.buckets + b])
    }
}

impl RateModel for PredictionCache {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>> {
        self.get(x, t).map(Cow::Borrowed)
    }

    fn constant_until(&self, t: f64) -> Option<f64> {
        Some(bucket_end(t, self.buckets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_buckets_tile_the_unit_interval() {
        for buckets in [1, 2, 7, 20, 64] {
            assert_eq!(time_bucket(0.0, buckets), 0);
            assert_eq!(time_bucket(1.0, buckets), buckets - 1);
            let mut t = 0.0;
            for b in 0..buckets {
                assert_eq!(time_bucket(t, buckets), b);
                assert_eq!(time_bucket(bucket_mid(b, buckets), buckets), b);
                let end = bucket_end(t, buckets);
                assert!(end > t);
                t = end;
            }
            assert_eq!(t, 1.0);
        }
        assert!(bucket_edge(19, 20) > 0.998);
    }

    #[test]
    fn rate_offsets_follow_the_scheduler() {
        let vocab = Vocab::new(2).unwrap();
        let sched = Scheduler::cubic();
        let mut p = ModelParams::tabular(vocab, 3, 5).unwrap();
        p.offset_rates(&sched, -1.0).unwrap();
        let x = Sequence::new(vocab, &[1, 0]).unwrap();
        for b in 0..5 {
            let t = bucket_mid(b, 5);
            let want = sched.rate(t).unwrap() * (-1.0f64).exp();
            let pred = ModelParams::predict(&p, &x, t, None).unwrap();
            for r in pred
                .lam_ins
                .iter()
                .chain(&pred.lam_del[1..])
                .chain(&pred.lam_sub[1..])
            {
                assert!((r / want - 1.0).abs() < 1e-12);
            }
            assert!(pred.q_ins.iter().all(|&q| q == 0.5));
        }
        assert!(ModelParams::featurized(vocab)
            .offset_rates(&sched, 0.0)
            .is_err());
    }
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_cot<R: Rng>(n: usize, m: usize, rng: &mut R) -> RatePrediction {
        let mut c = RatePrediction::zeros(n, m);
        for v in c
            .lam_ins
            .iter_mut()
            .chain(c.lam_del.iter_mut())
            .chain(c.lam_sub.iter_mut())
            .chain(c.q_ins.iter_mut())
            .chain(c.q_sub.iter_mut())
        {
            *v = rng.gen_range(-1.0..1.0);
        }
        c
    }

    fn dot(a: &RatePrediction, b: &RatePrediction) -> f64 {
        let pairs = [
            (&a.lam_ins, &b.lam_ins),
            (&a.lam_del, &b.lam_del),
            (&a.lam_sub, &b.lam_sub),
            (&a.q_ins, &b.q_ins),
            (&a.q_sub, &b.q_sub),
        ];
        pairs
            .iter()
            .map(|(u, v)| u.iter().zip(v.iter()).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    fn check_fd(params: &ModelParams, x: &Sequence, t: f64, cond: Option<&Sequence>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cot = rand_cot(x.len(), params.vocab().size(), &mut rng);
        let grad = params.grad_predict(x, t, cond, &cot).unwrap();
        let h = 1e-6;
        let mut p = params.clone();
        for k in 0..params.len() {
            let orig = p.values[k];
            p.values[k] = orig + h;
            let up = dot(&cot, &p.predict(x, t, cond).unwrap());
            p.values[k] = orig - h;
            let down = dot(&cot, &p.predict(x, t, cond).unwrap());
            p.values[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grad.get(&k).copied().unwrap_or(0.0);
            assert!(
                (fd - an).abs() < 1e-6 * (1.0 + fd.abs()),
                "param {k}: fd {fd} vs {an}"
            );
        }
    }

    #[test]
    fn tabular_state_count_and_layout() {
        let v = Vocab::new(2).unwrap();
        let p = ModelParams::tabular(v, 2, 3).unwrap();
        assert_eq!(p.num_states(), Some(7));
        // Blocks: n=0 -> 3, n=1 -> 6+4=10, n=2 -> 9+8=17.
        assert_eq!(p.len(), 3 * (3 + 2 * 10 + 4 * 17));
    }

    #[test]
    fn zero_params_are_unit_rates() {
        let v = Vocab::new(3).unwrap();
        let p = ModelParams::tabular(v, 3, 2).unwrap();
        let x = Sequence::new(v, &[0, 2]).unwrap();
        let pred = ModelParams::predict(&p, &x, 0.3, None).unwrap();
        pred.validate(1e-12).unwrap();
        assert_eq!(pred.lam_ins, vec![1.0; 3]);
        assert_eq!(pred.q_sub_row(1), &[0.0, 0.5, 0.5]);
        assert_eq!(pred.exit_rate(), 7.0);
        let long = Sequence::new(v, &[0, 0, 0, 0]).unwrap();
        assert!(matches!(
            ModelParams::predict(&p, &long, 0.1, None),
            Err(Error::StateOutsideSpace)
        ));
        assert!(ModelParams::predict(&p, &x, 0.1, Some(&x)).is_err());
    }

    #[test]
    fn tabular_gradient_matches_finite_differences() {
        let v = Vocab::new(2).unwrap();
        let mut p = ModelParams::tabular(v, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        p.randomize(1.5, &mut rng);
        for (i, content) in [vec![], vec![1], vec![0, 1]].iter().enumerate() {
            let x = Sequence::new(v, content).unwrap();
            check_fd(&p, &x, 0.7, None, i as u64);
        }
    }

    #[test]
    fn featurized_gradient_matches_finite_differences() {
        let v = Vocab::new(3).unwrap();
        let mut p = ModelParams::featurized(v);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        p.randomize(0.5, &mut rng);
        let x = Sequence::new(v, &[2, 0, 1]).unwrap();
        let c = Sequence::new(v, &[1, 1]).unwrap();
        check_fd(&p, &x, 0.4, None, 1);
        check_fd(&p, &x, 0.4, Some(&c), 2);
        check_fd(&p, &Sequence::empty(v), 0.9, None, 3);
    }

    #[test]
    fn single_token_vocab_has_no_substitutions() {
        let v = Vocab::new(1).unwrap();
        let mut p = ModelParams::featurized(v);
        p.randomize(1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let x = Sequence::new(v, &[0, 0]).unwrap();
        let pred = ModelParams::predict(&p, &x, 0.5, None).unwrap();
        pred.validate(1e-12).unwrap();
        assert!(pred.lam_sub.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn cache_matches_direct_prediction() {
        let v = Vocab::new(2).unwrap();
        let mut p = ModelParams::tabular(v, 3, 4).unwrap();
        p.randomize(1.0, &mut ChaCha8Rng::seed_from_u64(2));
        let cache = PredictionCache::new(&p, Exec::Sequential).unwrap();
        let x = Sequence::new(v, &[1, 0, 1]).unwrap();
        for t in [0.0, 0.3, 0.99, 1.0] {
            assert_eq!(
                cache.get(&x, t).unwrap(),
                &ModelParams::predict(&p, &x, t, None).unwrap()
            );
        }
    }
}
