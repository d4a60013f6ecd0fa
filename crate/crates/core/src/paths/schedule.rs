use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Cubic,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "cubic" => Ok(ScheduleKind::Cubic),
            other => Err(Error::Config(format!("unknown scheduler `{other}`"))),
        }
    }
}

/// A monotone map `kappa: [0,1] -> [0,1]` with `kappa(0) = 0`, `kappa(1) = 1`.
///
/// The reversed form `1 - kappa(1 - s)` describes the same path run backwards
/// in time and is used to train reverse-time models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scheduler {
    pub kind: ScheduleKind,
    #[serde(default)]
    pub reversed: bool,
}

impl Scheduler {
    pub const fn linear() -> Self {
        Self {
            kind: ScheduleKind::Linear,
            reversed: false,
        }
    }

    pub const fn cubic() -> Self {
        Self {
            kind: ScheduleKind::Cubic,
            reversed: false,
        }
    }

    pub fn reverse(self) -> Self {
        Self {
            reversed: !self.reversed,
            ..self
        }
    }

    fn base(kind: ScheduleKind, t: f64) -> f64 {
        match kind {
            ScheduleKind::Linear => t,
            ScheduleKind::Cubic => t * t * t,
        }
    }

    fn base_dot(kind: ScheduleKind, t: f64) -> f64 {
        match kind {
            ScheduleKind::Linear => 1.0,
            ScheduleKind::Cubic => 3.0 * t * t,
        }
    }

    fn base_inv(kind: ScheduleKind, u: f64) -> f64 {
        match kind {
            ScheduleKind::Linear => u,
            ScheduleKind::Cubic => u.cbrt(),
        }
    }

    pub fn kappa(&self, t: f64) -> Result<f64> {
        check_unit("t", t).map(|t| self.k(t))
    }

    pub fn kappa_dot(&self, t: f64) -> Result<f64> {
        check_unit("t", t).map(|t| self.k_dot(t))
    }

    pub fn kappa_inv(&self, u: f64) -> Result<f64> {
        check_unit("u", u).map(|u| self.k_inv(u))
    }

    /// `kappa_dot / (1 - kappa)`, the per-cell jump rate of the mixture path.
    pub fn rate(&self, t: f64) -> Result<f64> {
        let t = check_unit("t", t)?;
        Ok(self.k_rate(t))
    }

    pub(crate) fn k(&self, t: f64) -> f64 {
        if self.reversed {
            1.0 - Self::base(self.kind, 1.0 - t)
        } else {
            Self::base(self.kind, t)
        }
    }

    pub(crate) fn k_dot(&self, t: f64) -> f64 {
        if self.reversed {
            Self::base_dot(self.kind, 1.0 - t)
        } else {
            Self::base_dot(self.kind, t)
        }
    }

    pub(crate) fn k_inv(&self, u: f64) -> f64 {
        if self.reversed {
            1.0 - Self::base_inv(self.kind, 1.0 - u)
        } else {
            Self::base_inv(self.kind, u)
        }
    }

    pub(crate) fn k_rate(&self, t: f64) -> f64 {
        let rem = 1.0 - self.k(t);
        if rem <= 0.0 {
            f64::INFINITY
        } else {
            self.k_dot(t) / rem
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        let s = Scheduler::cubic();
        assert_eq!(s.kappa(0.0).unwrap(), 0.0);
        assert_eq!(s.kappa(1.0).unwrap(), 1.0);
        assert_eq!(s.kappa(0.5).unwrap(), 0.125);
        assert_eq!(s.kappa_inv(0.125).unwrap(), 0.5);
        assert_eq!(s.kappa_dot(0.5).unwrap(), 0.75);
        assert!((s.rate(0.5).unwrap() - 0.857_142_857_142_857_1).abs() < 1e-15);
        assert!(s.kappa(1.5).is_err());
        assert!(s.kappa_inv(-0.1).is_err());
    }

    #[test]
    fn inverse_round_trip_on_grid() {
        // The reversed cubic loses digits near t = 1 where 1 - kappa is tiny.
        for (sched, tol) in [
            (Scheduler::linear(), 1e-12),
            (Scheduler::cubic(), 1e-12),
            (Scheduler::linear().reverse(), 1e-12),
            (Scheduler::cubic().reverse(), 1e-9),
        ] {
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                assert!(
                    (sched.k_inv(sched.k(t)) - t).abs() < tol,
                    "{sched:?} at {t}"
                );
            }
        }
    }

    #[test]
    fn reversed_boundaries_and_monotonicity() {
        let r = Scheduler::cubic().reverse();
        assert_eq!(r.k(0.0), 0.0);
        assert_eq!(r.k(1.0), 1.0);
        let mut prev = 0.0;
        for i in 1..=100 {
            let v = r.k(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(r.reverse(), Scheduler::cubic());
    }
}
