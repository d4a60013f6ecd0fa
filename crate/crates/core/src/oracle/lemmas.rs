use std::fmt;

use crate::alignment::Cell;
use crate::error::{Error, Result};
use crate::paths::Scheduler;
use crate::sequence::Token;

use super::coupling::strip;
use super::space::EnumeratedSpace;

/// Residuals of an augmented-chain check.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// Largest absolute row sum over states in the support.
    pub row_sum: f64,
    /// Largest KFE residual over the time grid.
    pub kfe_residual: f64,
    /// Largest rate, out of a support state, of a transition that changes
    /// `x`.
    pub x_change_rate: f64,
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "row_sum={:.3e} kfe_residual={:.3e} x_change_rate={:.3e}",
            self.row_sum, self.kfe_residual, self.x_change_rate
        )
    }
}

/// Two cells over one token: the source holds `A` in the first cell, the
/// target in the second.
struct ZChain {
    states: Vec<[Cell; 2]>,
    z0: [Cell; 2],
    z1: [Cell; 2],
}

impl ZChain {
    fn new() -> Self {
        let opts = [Some(0), None];
        let states = opts
            .iter()
            .flat_map(|&a| opts.iter().map(move |&b| [a, b]))
            .collect();
        Self {
            states,
            z0: [Some(0), None],
            z1: [None, Some(0)],
        }
    }

    fn len(&self) -> usize {
        self.states.len()
    }

    fn p(&self, sched: &Scheduler, t: f64) -> Result<Vec<f64>> {
        let k = sched.kappa(t)?;
        Ok(self
            .states
            .iter()
            .map(|z| {
                (0..2)
                    .map(|i| {
                        let mut w = 0.0;
                        if z[i] == self.z1[i] {
                            w += k;
                        }
                        if z[i] == self.z0[i] {
                            w += 1.0 - k;
                        }
                        w
                    })
                    .product()
            })
            .collect())
    }

    /// Dense conditional generator over `z`.
    fn generator(&self, sched: &Scheduler, t: f64) -> Result<Vec<f64>> {
        let k = sched.kappa(t)?;
        let rate = sched.kappa_dot(t)? / (1.0 - k);
        let n = self.len();
        let mut q = vec![0.0; n * n];
        for (a, za) in self.states.iter().enumerate() {
            for i in 0..2 {
                if za[i] == self.z1[i] {
                    continue;
                }
                let mut zb = *za;
                zb[i] = self.z1[i];
                let b = self.states.iter().position(|s| *s == zb).expect("closed");
                q[a * n + b] += rate;
                q[a * n + a] -= rate;
            }
        }
        Ok(q)
    }
}

fn check_augmented<R, P>(
    nx: usize,
    chain: &ZChain,
    sched: &Scheduler,
    times: &[f64],
    dt: f64,
    rate: R,
    joint: P,
) -> Result<LemmaReport>
where
    R: Fn(&[f64], usize, usize, usize, usize) -> f64,
    P: Fn(&[f64], usize, usize) -> f64,
{
    let nz = chain.len();
    let total = nx * nz;
    let mut report = LemmaReport {
        row_sum: 0.0,
        kfe_residual: 0.0,
        x_change_rate: 0.0,
    };
    for &t in times {
        let qz = chain.generator(sched, t)?;
        let pz = chain.p(sched, t)?;
        let pz_hi = chain.p(sched, t + dt)?;
        let pz_lo = chain.p(sched, t - dt)?;
        let p: Vec<f64> = (0..total).map(|s| joint(&pz, s / nz, s % nz)).collect();
        let mut inflow = vec![0.0; total];
        for s in 0..total {
            let (x, z) = (s / nz, s % nz);
            let mut row = 0.0;
            for s2 in 0..total {
                let (x2, z2) = (s2 / nz, s2 % nz);
                let r = rate(&qz, x, z, x2, z2);
                row += r;
                inflow[s2] += p[s] * r;
                if p[s] > 0.0 && x2 != x && r != 0.0 {
                    report.x_change_rate = report.x_change_rate.max(r.abs());
                }
            }
            if p[s] > 0.0 {
                report.row_sum = report.row_sum.max(row.abs());
            }
        }
        for s in 0..total {
            let (x, z) = (s / nz, s % nz);
            let dp = (joint(&pz_hi, x, z) - joint(&pz_lo, x, z)) / (2.0 * dt);
            report.kfe_residual = report.kfe_residual.max((dp - inflow[s]).abs());
        }
    }
    Ok(report)
}

/// Checks the augmented rate `delta_{f(z)}(x) u_t(z | z_t)` on the two-cell
/// chain, where `f` maps cells to a sequence of length at most two over one
/// token.
pub fn verify_deterministic_rate_lemma<F>(
    f: F,
    sched: &Scheduler,
    times: &[f64],
    dt: f64,
) -> Result<LemmaReport>
where
    F: Fn(&[Cell]) -> Vec<Token>,
{
    let chain = ZChain::new();
    let xs = EnumeratedSpace::new(1, 2)?;
    let fz: Vec<usize> = chain
        .states
        .iter()
        .map(|z| xs.index_of(&f(z)).ok_or(Error::StateOutsideSpace))
        .collect::<Result<_>>()?;
    let nz = chain.len();
    check_augmented(
        xs.len(),
        &chain,
        sched,
        times,
        dt,
        |qz, _x, z, x2, z2| if fz[z2] == x2 { qz[z * nz + z2] } else { 0.0 },
        |pz, x, z| if fz[z] == x { pz[z] } else { 0.0 },
    )
}

/// Checks the augmented rate
/// `(1 - delta_{z_t}(z)) p(x | z) u_t(z | z_t) + delta_{x_t}(x) delta_{z_t}(z) u_t(z_t | z_t)`
/// for a fixed stochastic `p(x | z)` given row-major as `[x][z]` with
/// `nx` rows over the four chain states.
pub fn verify_time_independent_rate_lemma(
    p_x_given_z: &[f64],
    nx: usize,
    sched: &Scheduler,
    times: &[f64],
    dt: f64,
) -> Result<LemmaReport> {
    let chain = ZChain::new();
    let nz = chain.len();
    if p_x_given_z.len() != nx * nz {
        return Err(Error::Config(format!("p(x|z) needs {} entries", nx * nz)));
    }
    for z in 0..nz {
        let col: f64 = (0..nx).map(|x| p_x_given_z[x * nz + z]).sum();
        if (col - 1.0).abs() > 1e-12 || (0..nx).any(|x| p_x_given_z[x * nz + z] < 0.0) {
            return Err(Error::Config(format!("p(x|z={z}) is not a distribution")));
        }
    }
    check_augmented(
        nx,
        &chain,
        sched,
        times,
        dt,
        |qz, x, z, x2, z2| {
            if z2 != z {
                p_x_given_z[x2 * nz + z2] * qz[z * nz + z2]
            } else if x2 == x {
                qz[z * nz + z]
            } else {
                0.0
            }
        },
        |pz, x, z| p_x_given_z[x * nz + z] * pz[z],
    )
}

/// Blank-stripping map used as the default `f`.
pub fn strip_cells(cells: &[Cell]) -> Vec<Token> {
    strip(cells)
}
