//! Simulation of trained rate models.

mod cfg;
mod euler;
mod gillespie;
mod restrict;
mod sharpen;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cfg::{apply_cfg, CfgVariant, Guided};
pub use euler::{euler_step, StepOptions, StepOutcome};
pub use gillespie::{gillespie_simulate, GillespieConfig, SimOutcome};
pub use restrict::{Restricted, Restriction};
pub use sharpen::sharpen;
pub use trace::{read_traces, write_traces, GenerationTrace, TraceRecord};

use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::par::Exec;
use crate::sequence::Sequence;

/// Corrector strength `alpha(t) = c t^a (1 - t)^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Corrector {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl Corrector {
    pub fn alpha(&self, t: f64) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            self.c * t.powf(self.a) * (1.0 - t).powf(self.b)
        }
    }

    pub fn is_off(&self) -> bool {
        self.c == 0.0
    }
}

/// How trajectories are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum Method {
    /// Fixed-step first-order simulation with simultaneous edits.
    Euler,
    /// Event-driven simulation with rates frozen on slices of this width.
    Gillespie { slice: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub steps: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: Option<usize>,
    pub guidance_weight: f64,
    pub guidance: CfgVariant,
    /// Guidance weight for the reverse model used by the corrector; `None`
    /// leaves the reverse rates unguided.
    pub reverse_guidance_weight: Option<f64>,
    pub corrector: Corrector,
    pub seed: u64,
    pub max_len: usize,
    pub method: Method,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            temperature: 1.0,
            top_p: 1.0,
            top_k: None,
            guidance_weight: 1.0,
            guidance: CfgVariant::Off,
            reverse_guidance_weight: None,
            corrector: Corrector::default(),
            seed: 0,
            max_len: crate::sequence::Vocab::DEFAULT_MAX_LEN,
            method: Method::Euler,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if !(self.temperature > 0.0) {
            return bad(format!(
                "temperature must be positive, got {}",
                self.temperature
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p must lie in (0, 1], got {}", self.top_p));
        }
        if self.top_k == Some(0) {
            return bad("top_k must be at least 1".into());
        }
        let Corrector { c, a, b } = self.corrector;
        if !(c >= 0.0) || !(a >= 0.0) || !(b >= 0.0) {
            return bad("corrector coefficients must be non-negative".into());
        }
        if let Method::Gillespie { slice } = self.method {
            if !(slice > 0.0) {
                return bad(format!("slice width must be positive, got {slice}"));
            }
            if !self.corrector.is_off() {
                return bad("the corrector is only available with the euler method".into());
            }
        }
        Ok(())
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            temperature: self.temperature,
            top_p: self.top_p,
            top_k: self.top_k,
            max_len: self.max_len,
        }
    }

    /// The RNG for trace number `index`: one ChaCha stream per trace.
    pub fn trace_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// One Euler step from `t` to `t + advance`, taken as a forward step to
/// `t + advance + overshoot` followed by a reverse step of length
/// `overshoot`. With `overshoot = 0` this is a plain Euler step and the
/// reverse model is not consulted.
#[allow(clippy::too_many_arguments)]
pub fn corrector_step<R: Rng + ?Sized>(
    model: &dyn RateModel,
    reverse: Option<&dyn RateModel>,
    x: &Sequence,
    t: f64,
    advance: f64,
    overshoot: f64,
    opts: &StepOptions,
    rng: &mut R,
) -> Result<(StepOutcome, Option<StepOutcome>)> {
    if overshoot > 0.0 {
        let reverse = reverse.ok_or(Error::MissingReverseModel)?;
        let mid = (t + advance + overshoot).min(1.0);
        let fwd = euler_step(model, x, t, mid - t, opts, rng)?;
        let back = euler_step(reverse, &fwd.x, 1.0 - mid, mid - (t + advance), opts, rng)?;
        Ok((fwd, Some(back)))
    } else {
        Ok((euler_step(model, x, t, advance, opts, rng)?, None))
    }
}

/// Euler simulation from `t = 0` to `t = 1`, optionally with corrector steps.
///
/// With a positive corrector strength `alpha`, each step moves forward by
/// `h (1 + alpha)` with the forward model and then back by `h alpha` with the
/// reverse model, which is queried at reverse time `s = 1 - t`.
pub fn run_euler<R: Rng + ?Sized>(
    model: &dyn RateModel,
    reverse: Option<&dyn RateModel>,
    x0: &Sequence,
    cfg: &SamplerConfig,
    record: bool,
    rng: &mut R,
) -> Result<SimOutcome> {
    let opts = cfg.step_options();
    let k = cfg.steps;
    let h = 1.0 / k as f64;
    let mut x = x0.clone().with_max_len(cfg.max_len.max(x0.len()))?;
    let mut trace = record.then(|| GenerationTrace::start(x0));
    let mut num_edits = 0;
    let mut dropped = 0;
    for step in 0..k {
        let t = step as f64 * h;
        let t_next = (step + 1) as f64 * h;
        let alpha = cfg.corrector.alpha(t).min(((1.0 - t) / h - 1.0).max(0.0));
        let (fwd, back) = corrector_step(model, reverse, &x, t, t_next - t, h * alpha, &opts, rng)?;
        num_edits += fwd.edits.len();
        dropped += fwd.dropped;
        let mut corrector_edits = Vec::new();
        x = match back {
            Some(b) => {
                num_edits += b.edits.len();
                dropped += b.dropped;
                corrector_edits = b.edits;
                b.x
            }
            None => fwd.x,
        };
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceRecord {
                step: step + 1,
                t: t_next,
                edits: fwd.edits,
                corrector_edits,
                tokens: x.content().to_vec(),
            });
        }
    }
    Ok(SimOutcome {
        x,
        num_edits,
        dropped,
        trace,
    })
}

/// Simulates one trajectory with the configured method.
pub fn run<R: Rng + ?Sized>(
    model: &dyn RateModel,
    reverse: Option<&dyn RateModel>,
    x0: &Sequence,
    cfg: &SamplerConfig,
    record: bool,
    rng: &mut R,
) -> Result<SimOutcome> {
    cfg.validate()?;
    match cfg.method {
        Method::Euler => run_euler(model, reverse, x0, cfg, record, rng),
        Method::Gillespie { slice } => {
            let g = GillespieConfig {
                slice,
                opts: cfg.step_options(),
                max_neighbors: 1 << 20,
            };
            gillespie_simulate(model, x0, &g, record, rng)
        }
    }
}

/// Simulates one trajectory and returns its full trace.
pub fn simulate<R: Rng + ?Sized>(
    model: &dyn RateModel,
    reverse: Option<&dyn RateModel>,
    x0: &Sequence,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<GenerationTrace> {
    let out = run(model, reverse, x0, cfg, true, rng)?;
    Ok(out.trace.expect("trace was recorded"))
}

/// Simulates `count` independent trajectories, trace `i` starting from
/// `x0(i)` with RNG stream `first_stream + i`.
pub fn run_many(
    model: &dyn RateModel,
    reverse: Option<&dyn RateModel>,
    x0: &(dyn Fn(usize) -> Sequence + Sync),
    cfg: &SamplerConfig,
    count: usize,
    first_stream: u64,
    record: bool,
    exec: Exec,
) -> Result<Vec<SimOutcome>> {
    cfg.validate()?;
    exec.try_map_range(count, |i| {
        let mut rng = cfg.trace_rng(first_stream + i as u64);
        run(model, reverse, &x0(i), cfg, record, &mut rng)
    })
}
