use crate::error::{Error, Result};
use crate::paths::Scheduler;

use super::coupling::{strip, WeightedCoupling};
use super::space::EnumeratedSpace;

/// Largest number of disagreeing cells one atom may have.
const MAX_DISAGREE: usize = 20;

/// Exact marginal of the mixture path at one time.
///
/// `flux[x * n + y]` is the probability current `p_t(x) u_t(y | x)` from
/// state `x` into state `y`; dividing by `p_t(x)` recovers the marginal rate.
#[derive(Debug, Clone)]
pub struct Marginal {
    pub t: f64,
    pub n: usize,
    pub p: Vec<f64>,
    pub flux: Vec<f64>,
}

impl Marginal {
    /// Marginal rate `u_t(y | x)` for `y != x`, zero off the support.
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        if x == y || self.p[x] <= 0.0 {
            0.0
        } else {
            self.flux[x * self.n + y] / self.p[x]
        }
    }

    /// Dense generator `[from][to]` with diagonal `-sum` of the row.
    pub fn rate_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut q = vec![0.0; n * n];
        for x in 0..n {
            let mut out = 0.0;
            for y in 0..n {
                if y != x {
                    let r = self.rate(x, y);
                    q[x * n + y] = r;
                    out += r;
                }
            }
            q[x * n + x] = -out;
        }
        q
    }

    /// Reverse-time rate `u_t(x | y) p_t(x) / p_t(y)` from `y` into `x`.
    pub fn reverse_rate(&self, y: usize, x: usize) -> f64 {
        if x == y || self.p[y] <= 0.0 {
            0.0
        } else {
            self.flux[x * self.n + y] / self.p[y]
        }
    }

    /// Net probability inflow at each state, the time derivative implied by
    /// the rates.
    pub fn divergence(&self) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    let f = self.flux[x * n + y];
                    d[y] += f;
                    d[x] -= f;
                }
            }
        }
        d
    }
}

fn check_time(t: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(Error::OutOfUnitInterval {
            what: "t",
            value: t,
        })
    }
}

/// `p_t` alone, by summing over atoms and over subsets of flipped cells.
pub fn enumerate_marginal_p(
    space: &EnumeratedSpace,
    coupling: &WeightedCoupling,
    sched: &Scheduler,
    t: f64,
) -> Result<Vec<f64>> {
    Ok(walk(space, coupling, sched, check_time(t)?, false)?.p)
}

/// `p_t` and the probability flux between every pair of states.
///
/// Each still-unflipped cell jumps to its target at rate
/// `kappa_dot / (1 - kappa)`; the flux is accumulated as
/// `kappa^k (1 - kappa)^(d - k - 1) kappa_dot`, which stays finite at `t = 1`.
pub fn enumerate_marginal(
    space: &EnumeratedSpace,
    coupling: &WeightedCoupling,
    sched: &Scheduler,
    t: f64,
) -> Result<Marginal> {
    walk(space, coupling, sched, check_time(t)?, true)
}

fn walk(
    space: &EnumeratedSpace,
    coupling: &WeightedCoupling,
    sched: &Scheduler,
    t: f64,
    with_flux: bool,
) -> Result<Marginal> {
    if coupling.m() != space.vocab().size() {
        return Err(Error::Config(format!(
            "coupling over {} tokens, space over {}",
            coupling.m(),
            space.vocab().size()
        )));
    }
    let kappa = sched.kappa(t)?;
    let kdot = sched.kappa_dot(t)?;
    let n = space.len();
    let mut p = vec![0.0; n];
    let mut flux = if with_flux {
        vec![0.0; n * n]
    } else {
        Vec::new()
    };
    for atom in coupling.atoms() {
        let diff: Vec<usize> = (0..atom.z0.len())
            .filter(|&i| atom.z0[i] != atom.z1[i])
            .collect();
        let d = diff.len();
        if d > MAX_DISAGREE {
            return Err(Error::SpaceTooLarge {
                size: 1 << d.min(63),
                cap: 1 << MAX_DISAGREE,
            });
        }
        let mut cells = atom.z0.clone();
        for subset in 0u32..(1u32 << d) {
            for (b, &i) in diff.iter().enumerate() {
                cells[i] = if subset >> b & 1 == 1 {
                    atom.z1[i]
                } else {
                    atom.z0[i]
                };
            }
            let k = subset.count_ones() as i32;
            let prob = atom.weight * kappa.powi(k) * (1.0 - kappa).powi(d as i32 - k);
            let x = space
                .index_of(&strip(&cells))
                .ok_or(Error::StateOutsideSpace)?;
            p[x] += prob;
            if !with_flux || k as usize == d {
                continue;
            }
            let current = atom.weight * kappa.powi(k) * (1.0 - kappa).powi(d as i32 - k - 1) * kdot;
            if current == 0.0 {
                continue;
            }
            for (b, &i) in diff.iter().enumerate() {
                if subset >> b & 1 == 1 {
                    continue;
                }
                let keep = cells[i];
                cells[i] = atom.z1[i];
                let y = space
                    .index_of(&strip(&cells))
                    .ok_or(Error::StateOutsideSpace)?;
                cells[i] = keep;
                if y != x {
                    flux[x * n + y] += current;
                }
            }
        }
    }
    Ok(Marginal { t, n, p, flux })
}
