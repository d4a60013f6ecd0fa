use std::fmt;

use crate::error::Result;
use crate::paths::Scheduler;

use super::coupling::WeightedCoupling;
use super::marginal::{enumerate_marginal, enumerate_marginal_p};
use super::space::EnumeratedSpace;

/// Checks at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Row {
    pub t: f64,
    /// `max_y |dp/dt - (p Q)_y|` with `dp/dt` from central differences.
    pub kfe_residual: f64,
    /// Largest absolute row sum of the generator.
    pub row_sum: f64,
    /// Most negative off-diagonal entry (zero when none are negative).
    pub min_off_diagonal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub tol: f64,
    pub rows: Vec<Theorem1Row>,
}

impl Theorem1Report {
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.kfe_residual).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.kfe_residual < self.tol && r.row_sum < 1e-12 && r.min_off_diagonal >= 0.0)
    }
}

impl fmt::Display for Theorem1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(
                f,
                "t={:.4} kfe_residual={:.3e} row_sum={:.3e} min_offdiag={:.3e}",
                r.t, r.kfe_residual, r.row_sum, r.min_off_diagonal
            )?;
        }
        write!(
            f,
            "max_residual={:.3e} tol={:.1e}",
            self.max_residual(),
            self.tol
        )
    }
}

/// Marginalizes the conditional rates over the coupling and checks that the
/// result generates the marginal path: rows sum to zero, off-diagonals are
/// non-negative, and `dp/dt` (central difference with step `dt`) matches
/// `p Q` at every time in `times`.
pub fn verify_theorem1(
    space: &EnumeratedSpace,
    coupling: &WeightedCoupling,
    sched: &Scheduler,
    times: &[f64],
    dt: f64,
    tol: f64,
) -> Result<Theorem1Report> {
    let n = space.len();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let marg = enumerate_marginal(space, coupling, sched, t)?;
        let q = marg.rate_matrix();
        let ahead = enumerate_marginal_p(space, coupling, sched, t + dt)?;
        let behind = enumerate_marginal_p(space, coupling, sched, t - dt)?;
        let mut residual: f64 = 0.0;
        for y in 0..n {
            let lhs = (ahead[y] - behind[y]) / (2.0 * dt);
            let rhs: f64 = (0..n).map(|x| marg.p[x] * q[x * n + y]).sum();
            residual = residual.max((lhs - rhs).abs());
        }
        let mut row_sum: f64 = 0.0;
        let mut min_off: f64 = 0.0;
        for x in 0..n {
            row_sum = row_sum.max(q[x * n..(x + 1) * n].iter().sum::<f64>().abs());
            for y in 0..n {
                if y != x {
                    min_off = min_off.min(q[x * n + y]);
                }
            }
        }
        rows.push(Theorem1Row {
            t,
            kfe_residual: residual,
            row_sum,
            min_off_diagonal: min_off,
        });
    }
    Ok(Theorem1Report { tol, rows })
}
