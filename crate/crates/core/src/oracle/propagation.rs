use rand::Rng;

use crate::error::{Error, Result};
use crate::paths::Scheduler;

use super::kfe::integrate_kfe;

fn independent_rate(sched: &Scheduler, s: f64) -> Result<f64> {
    let k = sched.kappa(s)?;
    Ok(sched.kappa_dot(s)? / (1.0 - k))
}

/// Simulates the localized switching process directly as a CTMC up to `t`.
///
/// Row `i` switches on at hazard `kappa_dot / (1 - kappa)`; once on, its
/// interval grows one column to the left and one to the right, each at rate
/// `lambda_prop`, until it reaches the ends. Activation events are drawn by
/// thinning against the hazard at `t`, which bounds it from above for every
/// schedule this crate provides. Returns the column mask as bits and the
/// activation times of the rows that switched on.
pub fn event_driven_mask<R: Rng + ?Sized>(
    n: usize,
    t: f64,
    sched: &Scheduler,
    lambda_prop: f64,
    rng: &mut R,
) -> Result<(u64, Vec<f64>)> {
    if n > 64 {
        return Err(Error::Unsupported(format!(
            "{n} rows exceed the 64-bit mask"
        )));
    }
    if !(lambda_prop >= 0.0) {
        return Err(Error::Config(format!("lambda_prop = {lambda_prop}")));
    }
    let bound = independent_rate(sched, t)?;
    if !bound.is_finite() {
        return Err(Error::OutOfUnitInterval {
            what: "t",
            value: t,
        });
    }
    let mut span: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut activated = Vec::new();
    let mut s = 0.0;
    loop {
        let inactive = span.iter().filter(|x| x.is_none()).count();
        let frontiers: usize = span
            .iter()
            .flatten()
            .map(|&(lo, hi)| usize::from(lo > 0) + usize::from(hi + 1 < n))
            .sum();
        let total = inactive as f64 * bound + frontiers as f64 * lambda_prop;
        if total <= 0.0 {
            break;
        }
        s += -rng.gen::<f64>().ln_1p_neg() / total;
        if s > t {
            break;
        }
        let mut pick = rng.gen::<f64>() * total;
        if pick < inactive as f64 * bound {
            if rng.gen::<f64>() * bound < independent_rate(sched, s)? {
                let k = ((pick / bound) as usize).min(inactive - 1);
                let row = span
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| x.is_none())
                    .nth(k)
                    .map(|(i, _)| i)
                    .expect("k < inactive");
                span[row] = Some((row, row));
                activated.push(s);
            }
            continue;
        }
        pick -= inactive as f64 * bound;
        let mut k = ((pick / lambda_prop) as usize).min(frontiers - 1);
        'rows: for entry in span.iter_mut().flatten() {
            let (lo, hi) = *entry;
            if lo > 0 {
                if k == 0 {
                    *entry = (lo - 1, hi);
                    break 'rows;
                }
                k -= 1;
            }
            if hi + 1 < n {
                if k == 0 {
                    *entry = (lo, hi + 1);
                    break 'rows;
                }
                k -= 1;
            }
        }
    }
    let mut bits = 0u64;
    for &(lo, hi) in span.iter().flatten() {
        for j in lo..=hi {
            bits |= 1 << j;
        }
    }
    Ok((bits, activated))
}

trait Ln1pNeg {
    fn ln_1p_neg(self) -> f64;
}

impl Ln1pNeg for f64 {
    /// `ln(1 - self)`.
    fn ln_1p_neg(self) -> f64 {
        (-self).ln_1p()
    }
}

/// Exact law of the column mask at time `t`.
///
/// Rows evolve independently, so each row's interval distribution is
/// obtained by integrating its own forward equation (`steps` RK4 steps);
/// the mask law is then the OR-convolution of the per-row laws.
pub fn exact_mask_distribution(
    n: usize,
    t: f64,
    sched: &Scheduler,
    lambda_prop: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    if n > 16 {
        return Err(Error::SpaceTooLarge {
            size: 1 << n.min(63),
            cap: 1 << 16,
        });
    }
    let mut law = vec![0.0; 1 << n];
    law[0] = 1.0;
    for row in 0..n {
        // state 0: inactive; then every interval [lo, hi] containing `row`
        let mut intervals = Vec::new();
        for lo in 0..=row {
            for hi in row..n {
                intervals.push((lo, hi));
            }
        }
        let ns = intervals.len() + 1;
        let index = |lo: usize, hi: usize| {
            1 + intervals
                .iter()
                .position(|&iv| iv == (lo, hi))
                .expect("interval")
        };
        let mut p0 = vec![0.0; ns];
        p0[0] = 1.0;
        let mut static_q = vec![0.0; ns * ns];
        for (k, &(lo, hi)) in intervals.iter().enumerate() {
            let a = k + 1;
            if lo > 0 {
                static_q[a * ns + index(lo - 1, hi)] += lambda_prop;
                static_q[a * ns + a] -= lambda_prop;
            }
            if hi + 1 < n {
                static_q[a * ns + index(lo, hi + 1)] += lambda_prop;
                static_q[a * ns + a] -= lambda_prop;
            }
        }
        let start = index(row, row);
        let traj = integrate_kfe(
            |s| {
                let r = independent_rate(sched, s)?;
                let mut q = static_q.clone();
                q[start] += r;
                q[0] -= r;
                Ok(q)
            },
            &p0,
            0.0,
            t,
            steps,
        )?;
        let row_law = traj.last();
        let mut next = vec![0.0; 1 << n];
        for (mask, &pm) in law.iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            next[mask] += pm * row_law[0];
            for (k, &(lo, hi)) in intervals.iter().enumerate() {
                let bits = ((1usize << (hi + 1)) - 1) & !((1usize << lo) - 1);
                next[mask | bits] += pm * row_law[k + 1];
            }
        }
        law = next;
    }
    Ok(law)
}

/// Normalized histogram of masks over `2^n` cells.
pub fn mask_histogram(masks: &[u64], n: usize) -> Vec<f64> {
    let mut h = vec![0.0; 1 << n];
    for &m in masks {
        h[m as usize] += 1.0;
    }
    let total = masks.len().max(1) as f64;
    h.iter_mut().for_each(|v| *v /= total);
    h
}

/// Half the L1 distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_against_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Expected total variation between `n` i.i.d. draws from `p` and `p`
/// itself, from the normal approximation of each cell count.
pub fn tv_noise_floor(p: &[f64], n: usize) -> f64 {
    let n = n as f64;
    0.5 * p
        .iter()
        .map(|&q| (2.0 * q * (1.0 - q) / (std::f64::consts::PI * n)).sqrt())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_law_without_propagation_is_a_product() {
        let sched = Scheduler::cubic();
        let t = 0.7;
        let k = t * t * t;
        let law = exact_mask_distribution(3, t, &sched, 0.0, 400).unwrap();
        for (mask, &p) in law.iter().enumerate() {
            let on = (mask as u32).count_ones() as i32;
            let expect = k.powi(on) * (1.0 - k).powi(3 - on);
            assert!((p - expect).abs() < 1e-9, "{mask}: {p} vs {expect}");
        }
    }

    #[test]
    fn event_driven_matches_exact_law() {
        let sched = Scheduler::cubic();
        let exact = exact_mask_distribution(4, 0.7, &sched, 2.0, 400).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let masks: Vec<u64> = (0..20_000)
            .map(|_| event_driven_mask(4, 0.7, &sched, 2.0, &mut rng).unwrap().0)
            .collect();
        let tv = total_variation(&mask_histogram(&masks, 4), &exact);
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.1], &[1.0, 2.0]), 1.0);
    }
}
