use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RateModel, RatePrediction};
use crate::sequence::{Sequence, Vocab};

/// Floor applied to rates raised to a negative power.
const NAIVE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CfgVariant {
    /// No guidance: the conditional prediction is used as is.
    #[default]
    Off,
    /// Geometric mixture of the full rates, including the normalizer of the
    /// mixed distributions.
    Weighted,
    /// Conditional total rates with guided distributions.
    Fixed,
    /// Extrapolated total rates `lam_c^(1+w) lam^(-w)`.
    Naive,
}

impl std::str::FromStr for CfgVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(CfgVariant::Off),
            "weighted" => Ok(CfgVariant::Weighted),
            "fixed" => Ok(CfgVariant::Fixed),
            "naive" => Ok(CfgVariant::Naive),
            other => Err(Error::Config(format!("unknown guidance variant `{other}`"))),
        }
    }
}

/// Geometric mixture of two rows; returns the renormalized row and its
/// pre-normalization mass. A zero entry raised to a negative power
/// contributes zero.
fn mix_row(q: &[f64], qc: &[f64], w: f64, out: &mut [f64]) -> Result<f64> {
    if w == 1.0 {
        out.copy_from_slice(qc);
        return Ok(1.0);
    }
    let mut total = 0.0;
    for ((o, &a), &b) in out.iter_mut().zip(q).zip(qc) {
        *o = if (a == 0.0 && w > 1.0) || (b == 0.0 && w < 0.0) {
            0.0
        } else {
            a.powf(1.0 - w) * b.powf(w)
        };
        total += *o;
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::EmptySupport);
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(total)
}

fn guided_rate(variant: CfgVariant, lam: f64, lam_c: f64, mass: f64, w: f64) -> f64 {
    match variant {
        CfgVariant::Off | CfgVariant::Fixed => lam_c,
        CfgVariant::Weighted => lam.powf(1.0 - w) * lam_c.powf(w) * mass,
        CfgVariant::Naive => {
            if w == 0.0 {
                lam_c
            } else {
                lam_c.max(NAIVE_FLOOR).powf(1.0 + w) * lam.max(NAIVE_FLOOR).powf(-w)
            }
        }
    }
}

/// Combines conditional and unconditional predictions of the same state.
pub fn apply_cfg(
    cond: &RatePrediction,
    uncond: &RatePrediction,
    w: f64,
    variant: CfgVariant,
) -> Result<RatePrediction> {
    if cond.n != uncond.n || cond.m != uncond.m {
        return Err(Error::Config(
            "guidance needs predictions of the same state".into(),
        ));
    }
    if !w.is_finite() {
        return Err(Error::Config(format!(
            "guidance weight must be finite, got {w}"
        )));
    }
    if variant == CfgVariant::Off {
        return Ok(cond.clone());
    }
    let mut out = cond.clone();
    let (n, m) = (cond.n, cond.m);
    for i in 0..=n {
        let mass = mix_row(
            &uncond.q_ins[i * m..(i + 1) * m],
            &cond.q_ins[i * m..(i + 1) * m],
            w,
            &mut out.q_ins[i * m..(i + 1) * m],
        )?;
        out.lam_ins[i] = guided_rate(variant, uncond.lam_ins[i], cond.lam_ins[i], mass, w);
        if i == 0 {
            continue;
        }
        out.lam_del[i] = guided_rate(variant, uncond.lam_del[i], cond.lam_del[i], 1.0, w);
        let sub_mass = if cond.lam_sub[i] == 0.0 && uncond.lam_sub[i] == 0.0 {
            // No substitution mass on either side: keep the conditional row.
            1.0
        } else {
            mix_row(
                &uncond.q_sub[i * m..(i + 1) * m],
                &cond.q_sub[i * m..(i + 1) * m],
                w,
                &mut out.q_sub[i * m..(i + 1) * m],
            )?
        };
        out.lam_sub[i] = guided_rate(variant, uncond.lam_sub[i], cond.lam_sub[i], sub_mass, w);
    }
    Ok(out)
}

/// A rate model that applies guidance on the fly.
pub struct Guided<'a> {
    pub cond: &'a dyn RateModel,
    pub uncond: &'a dyn RateModel,
    pub w: f64,
    pub variant: CfgVariant,
}

impl RateModel for Guided<'_> {
    fn vocab(&self) -> Vocab {
        self.cond.vocab()
    }

    fn predict(&self, x: &Sequence, t: f64) -> Result<Cow<'_, RatePrediction>> {
        let c = self.cond.predict(x, t)?;
        if self.variant == CfgVariant::Off {
            return Ok(Cow::Owned(c.into_owned()));
        }
        let u = self.uncond.predict(x, t)?;
        apply_cfg(&c, &u, self.w, self.variant).map(Cow::Owned)
    }

    fn constant_until(&self, t: f64) -> Option<f64> {
        match (self.cond.constant_until(t), self.uncond.constant_until(t)) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        }
    }
}
