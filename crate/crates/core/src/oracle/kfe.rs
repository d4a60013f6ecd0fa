use crate::error::{Error, Result};

/// Tolerance on normalization and negativity during integration.
const MASS_TOL: f64 = 1e-9;

/// Probability vectors at the integration grid.
#[derive(Debug, Clone)]
pub struct KfeTrajectory {
    pub times: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

impl KfeTrajectory {
    pub fn last(&self) -> &[f64] {
        self.probs
            .last()
            .expect("trajectory holds the initial state")
    }
}

/// Integrates `dp/dt = p Q(t)` with classical RK4 on a uniform grid.
///
/// `generator(t)` returns the dense `[from][to]` rate matrix with negative
/// diagonal. Fails if mass drifts from one or any entry goes below zero by
/// more than `1e-9`.
pub fn integrate_kfe<G>(
    mut generator: G,
    p0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<KfeTrajectory>
where
    G: FnMut(f64) -> Result<Vec<f64>>,
{
    if steps == 0 || !(t1 >= t0) {
        return Err(Error::Config(format!(
            "bad integration range [{t0}, {t1}] in {steps} steps"
        )));
    }
    let n = p0.len();
    let h = (t1 - t0) / steps as f64;
    let mut p = p0.to_vec();
    let mut traj = KfeTrajectory {
        times: vec![t0],
        probs: vec![p.clone()],
    };
    let mut deriv = |t: f64, p: &[f64]| -> Result<Vec<f64>> {
        let q = generator(t)?;
        if q.len() != n * n {
            return Err(Error::Config(format!(
                "generator has {} entries, expected {}",
                q.len(),
                n * n
            )));
        }
        let mut d = vec![0.0; n];
        for (x, &px) in p.iter().enumerate() {
            if px != 0.0 {
                for (dy, &r) in d.iter_mut().zip(&q[x * n..(x + 1) * n]) {
                    *dy += px * r;
                }
            }
        }
        Ok(d)
    };
    let axpy = |p: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        p.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        let k1 = deriv(t, &p)?;
        let k2 = deriv(t + 0.5 * h, &axpy(&p, &k1, 0.5 * h))?;
        let k3 = deriv(t + 0.5 * h, &axpy(&p, &k2, 0.5 * h))?;
        let k4 = deriv(t + h, &axpy(&p, &k3, h))?;
        for i in 0..n {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mass: f64 = p.iter().sum();
        let low = p.iter().cloned().fold(f64::INFINITY, f64::min);
        if (mass - 1.0).abs() > MASS_TOL || low < -MASS_TOL {
            return Err(Error::StepTooLarge { t: t + h, mass });
        }
        traj.times.push(if step + 1 == steps { t1 } else { t + h });
        traj.probs.push(p.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_decay_matches_closed_form() {
        let traj = integrate_kfe(
            |_| Ok(vec![-2.0, 2.0, 0.0, 0.0]),
            &[1.0, 0.0],
            0.0,
            1.0,
            200,
        )
        .unwrap();
        assert!((traj.last()[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn oversized_steps_are_caught() {
        let err = integrate_kfe(
            |_| Ok(vec![-500.0, 500.0, 0.0, 0.0]),
            &[1.0, 0.0],
            0.0,
            1.0,
            2,
        );
        assert!(matches!(err, Err(Error::StepTooLarge { .. })));
    }
}
