use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{Coupler, DataSource};
use super::loss::{loss_and_grad, Example};
use super::optim::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::par::Exec;
use crate::paths::{sample_zt, sample_zt_localized, Scheduler};

/// Which way along the path a model is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    /// Source and target swap roles and time runs as `s = 1 - t`.
    Reverse,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "reverse" => Ok(Direction::Reverse),
            other => Err(Error::Config(format!("unknown direction `{other}`"))),
        }
    }
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub coupler: Coupler,
    pub scheduler: Scheduler,
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f64,
    /// `Some(end)` decays the learning rate linearly from `lr` to `end`
    /// over the run.
    pub lr_end: Option<f64>,
    pub optimizer: OptimizerKind,
    /// `Some(lambda_prop)` switches to the localized propagation path.
    pub localized: Option<f64>,
    pub cond_drop: f64,
    pub seed: u64,
    pub delta: f64,
    pub direction: Direction,
    pub exec: Exec,
}

impl TrainConfig {
    pub fn new(coupler: Coupler, scheduler: Scheduler) -> Self {
        Self {
            coupler,
            scheduler,
            batch_size: 64,
            steps: 1000,
            lr: 1e-2,
            lr_end: None,
            optimizer: OptimizerKind::Adam,
            localized: None,
            cond_drop: 0.1,
            seed: 0,
            delta: 1e-3,
            direction: Direction::Forward,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            ));
        }
        if let Some(end) = self.lr_end {
            if !(end >= 0.0) || !end.is_finite() {
                return bad(format!(
                    "final learning rate must be finite and >= 0, got {end}"
                ));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(0.0..=1.0).contains(&self.cond_drop) {
            return bad(format!(
                "cond_drop must lie in [0, 1], got {}",
                self.cond_drop
            ));
        }
        if let Some(l) = self.localized {
            if !(l >= 0.0) || !l.is_finite() {
                return bad(format!("lambda_prop must be finite and >= 0, got {l}"));
            }
        }
        Ok(())
    }

    /// The scheduler used to sample training paths for this direction.
    pub fn path_scheduler(&self) -> Scheduler {
        match self.direction {
            Direction::Forward => self.scheduler,
            Direction::Reverse => self.scheduler.reverse(),
        }
    }
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub loss: f64,
    pub term1: f64,
    pub term2: f64,
    pub grad_norm: f64,
    pub clamp_warnings: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<StepMetrics>,
}

/// Draws one training example: pair, time, path state and condition.
pub fn sample_example<R: Rng>(
    source: &dyn DataSource,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Example> {
    let draw = source.draw(rng)?;
    let mut pair = cfg.coupler.couple(&draw, rng)?;
    if cfg.direction == Direction::Reverse {
        pair = pair.swapped();
    }
    let t = rng.gen_range(0.0..=1.0 - cfg.delta);
    let sched = cfg.path_scheduler();
    let path = match cfg.localized {
        Some(lambda) => sample_zt_localized(&pair, t, &sched, lambda, rng)?,
        None => sample_zt(&pair, t, &sched, rng)?,
    };
    let cond = match draw.cond {
        Some(c) if rng.gen::<f64>() >= cfg.cond_drop => Some(c),
        _ => None,
    };
    Ok(Example { path, cond })
}

/// Trains `params` on pairs from `source`.
pub fn train(
    params: ModelParams,
    source: &dyn DataSource,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_callback(params, source, cfg, |_| {})
}

/// Trains a reverse-time model: the same recipe with the roles of source and
/// target swapped and time reversed.
pub fn train_reverse(
    params: ModelParams,
    source: &dyn DataSource,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        direction: cfg.direction.flip(),
        ..cfg.clone()
    };
    train(params, source, &cfg)
}

/// [`train`] with a hook called after every step.
pub fn train_with_callback(
    mut params: ModelParams,
    source: &dyn DataSource,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, params.len());
    let mut history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        if let Some(end) = cfg.lr_end {
            let frac = step as f64 / cfg.steps as f64;
            opt.set_lr(cfg.lr + (end - cfg.lr) * frac);
        }
        let batch = (0..cfg.batch_size)
            .map(|_| sample_example(source, cfg, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let out = loss_and_grad(&params, &batch, cfg.exec)?;
        let grad_norm = out.grad.values().map(|g| g * g).sum::<f64>().sqrt();
        if !out.loss.is_finite() || !grad_norm.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!(
                    "loss {} (term1 {}, term2 {}), gradient norm {grad_norm}",
                    out.loss, out.term1, out.term2
                ),
            });
        }
        opt.step(&mut params, &out.grad);
        let metrics = StepMetrics {
            step,
            loss: out.loss,
            term1: out.term1,
            term2: out.term2,
            grad_norm,
            clamp_warnings: out.clamp_warnings,
        };
        on_step(&metrics);
        history.push(metrics);
    }
    Ok(TrainOutcome { params, history })
}
