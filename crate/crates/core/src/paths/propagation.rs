use rand::Rng;

use super::schedule::Scheduler;
use crate::error::{check_unit, Error, Result};

/// The auxiliary state of the localized propagation path at time `t`.
///
/// Row `i` of the boolean matrix becomes active at its switch time and then
/// spreads left and right; the counts record how far it has spread, clipped to
/// the sequence bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState {
    pub t: f64,
    pub lambda_prop: f64,
    pub switch_times: Vec<f64>,
    pub left: Vec<u64>,
    pub right: Vec<u64>,
}

impl PropagationState {
    pub fn len(&self) -> usize {
        self.switch_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.switch_times.is_empty()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.switch_times[i] <= self.t
    }

    /// The inclusive column range covered by row `i`, if active.
    pub fn span(&self, i: usize) -> Option<(usize, usize)> {
        if !self.is_active(i) {
            return None;
        }
        let n = self.len();
        let lo = i.saturating_sub(self.left[i].min(i as u64) as usize);
        let hi = i + (self.right[i].min((n - 1 - i) as u64) as usize);
        Some((lo, hi))
    }

    /// Entry `(i, j)` of the boolean matrix.
    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.span(i).is_some_and(|(lo, hi)| lo <= j && j <= hi)
    }

    /// Column-wise OR of the matrix.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.len()];
        for i in 0..self.len() {
            if let Some((lo, hi)) = self.span(i) {
                m[lo..=hi].iter_mut().for_each(|v| *v = true);
            }
        }
        m
    }

    /// The mask packed into an integer, bit `j` for column `j`.
    pub fn mask_bits(&self) -> u64 {
        self.mask()
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &b)| acc | (u64::from(b) << j))
    }
}

const POISSON_CHUNK: f64 = 256.0;

/// Draws from a Poisson distribution by inverting its CDF.
///
/// Large means are split into chunks that are sampled and summed.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let mut remaining = mean;
    let mut total = 0u64;
    while remaining > 0.0 {
        let mu = remaining.min(POISSON_CHUNK);
        remaining -= mu;
        let u: f64 = rng.gen();
        let mut k = 0u64;
        let mut p = (-mu).exp();
        let mut cdf = p;
        while cdf < u {
            k += 1;
            p *= mu / k as f64;
            cdf += p;
            if p == 0.0 && cdf < u {
                break;
            }
        }
        total += k;
    }
    total
}

/// Two-step sampler for the propagation state at time `t`.
///
/// Switch times are drawn by inverting the schedule; active rows then draw
/// independent Poisson spread counts to each side over `[t*, t]`.
pub fn sample_propagation<R: Rng + ?Sized>(
    n: usize,
    t: f64,
    sched: &Scheduler,
    lambda_prop: f64,
    rng: &mut R,
) -> Result<PropagationState> {
    let t = check_unit("t", t)?;
    if !(lambda_prop >= 0.0) || !lambda_prop.is_finite() {
        return Err(Error::Config(format!(
            "lambda_prop must be finite and >= 0, got {lambda_prop}"
        )));
    }
    let switch_times: Vec<f64> = (0..n).map(|_| sched.k_inv(rng.gen::<f64>())).collect();
    let mut left = vec![0u64; n];
    let mut right = vec![0u64; n];
    for i in 0..n {
        if switch_times[i] <= t {
            let mean = lambda_prop * (t - switch_times[i]);
            left[i] = sample_poisson(mean, rng);
            right[i] = sample_poisson(mean, rng);
        }
    }
    Ok(PropagationState {
        t,
        lambda_prop,
        switch_times,
        left,
        right,
    })
}

/// Per-cell localized loss weights: the independent rate plus `lambda_prop`
/// for every row that has a covered neighbour of the cell.
pub fn effective_weights(prop: &PropagationState, sched: &Scheduler, t: f64) -> Result<Vec<f64>> {
    let t = check_unit("t", t)?;
    let indep = sched.k_rate(t);
    let lambda_prop = prop.lambda_prop;
    let n = prop.len();
    let spans: Vec<Option<(usize, usize)>> = (0..n).map(|i| prop.span(i)).collect();
    Ok((0..n)
        .map(|j| {
            let sources = spans
                .iter()
                .filter(|s| {
                    s.is_some_and(|(lo, hi)| {
                        let covers = |c: usize| lo <= c && c <= hi;
                        (j > 0 && covers(j - 1)) || (j + 1 < n && covers(j + 1))
                    })
                })
                .count();
            indep + sources as f64 * lambda_prop
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(t: f64, times: &[f64], left: &[u64], right: &[u64]) -> PropagationState {
        PropagationState {
            t,
            lambda_prop: 2.0,
            switch_times: times.to_vec(),
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    #[test]
    fn zero_propagation_is_factorized() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = sample_propagation(8, 0.6, &Scheduler::cubic(), 0.0, &mut rng).unwrap();
            let mask = p.mask();
            for j in 0..8 {
                assert_eq!(mask[j], p.switch_times[j] <= 0.6);
            }
        }
        let p = sample_propagation(8, 1.0, &Scheduler::cubic(), 3.0, &mut rng).unwrap();
        assert!(p.mask().iter().all(|&b| b));
    }

    #[test]
    fn spans_clip_at_bounds() {
        let p = state(0.5, &[0.1, 0.9, 0.2], &[5, 0, 1], &[1, 0, 7]);
        assert_eq!(p.span(0), Some((0, 1)));
        assert_eq!(p.span(1), None);
        assert_eq!(p.span(2), Some((1, 2)));
        assert_eq!(p.mask(), vec![true, true, true]);
        assert!(p.entry(2, 1) && !p.entry(1, 1));
    }

    #[test]
    fn effective_weights_count_neighbouring_sources() {
        let sched = Scheduler::cubic();
        let indep = sched.k_rate(0.5);
        let none = state(0.5, &[0.9, 0.9, 0.9, 0.9], &[0; 4], &[0; 4]);
        assert!(effective_weights(&none, &sched, 0.5)
            .unwrap()
            .iter()
            .all(|&w| w == indep));
        // Row 0 covers {0}; row 3 covers {2, 3}.
        let p = state(0.5, &[0.1, 0.9, 0.9, 0.2], &[0, 0, 0, 1], &[0, 0, 0, 0]);
        let w = effective_weights(&p, &sched, 0.5).unwrap();
        let expect = [indep, indep + 4.0, indep + 2.0, indep + 2.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_mean_and_large_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| sample_poisson(3.0, &mut rng) as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 3.0).abs() < 4.0 * (3.0f64 / n as f64).sqrt());
        let big = sample_poisson(2000.0, &mut rng) as f64;
        assert!((big - 2000.0).abs() < 6.0 * 2000f64.sqrt());
        assert_eq!(sample_poisson(0.0, &mut rng), 0);
    }
}
