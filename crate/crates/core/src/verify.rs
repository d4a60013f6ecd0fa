//! Named verification suites built on the oracles.
//!
//! Each suite returns a [`Report`] with one line per check. Reports are pure
//! functions of the options: the same seed gives the same numbers.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::{CouplingMode, UniformX0};
use crate::error::{Error, Result};
use crate::model::{ModelParams, RateModel};
use crate::oracle::{
    enumerate_marginal, enumerate_marginal_p, event_driven_mask, exact_mask_distribution,
    integrate_kfe, ks_against_cdf, mask_histogram, strip_cells, total_variation, tv_noise_floor,
    verify_deterministic_rate_lemma, verify_theorem1, verify_time_independent_rate_lemma,
    EnumeratedSpace, ExactRateTable, TableDirection, WeightedCoupling,
};
use crate::par::Exec;
use crate::paths::{sample_propagation, Scheduler};
use crate::sampler::{apply_cfg, corrector_step, CfgVariant, StepOptions};
use crate::sequence::{Sequence, Token, Vocab};

/// Central-difference step for time derivatives.
pub const FD_STEP: f64 = 1e-5;
/// KFE residual tolerance for the enumerated checks.
pub const KFE_TOL: f64 = 1e-8;
/// Draws per stream in the Monte Carlo suites.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kfe,
    Theorem1,
    Lemmas,
    Propagation,
    Corrector,
    CfgIdentities,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Kfe,
        Suite::Theorem1,
        Suite::Lemmas,
        Suite::Propagation,
        Suite::Corrector,
        Suite::CfgIdentities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kfe => "kfe",
            Suite::Theorem1 => "theorem1",
            Suite::Lemmas => "lemmas",
            Suite::Propagation => "propagation",
            Suite::Corrector => "corrector",
            Suite::CfgIdentities => "cfg-identities",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!(
                    "unknown suite {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Bound {
    Below(f64),
    Zero,
}

/// One pass/fail line.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    bound: Bound,
}

impl Check {
    /// Passes when `value < tol`.
    pub fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: Bound::Below(tol),
        }
    }

    /// Passes when `value` (a count of violations) is exactly zero.
    pub fn zero(name: impl Into<String>, violations: usize) -> Self {
        Self {
            name: name.into(),
            value: violations as f64,
            bound: Bound::Zero,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::Below(tol) => self.value < tol,
            Bound::Zero => self.value == 0.0,
        }
    }

    /// Upper bound of a `below` check; `None` for violation counts.
    pub fn tolerance(&self) -> Option<f64> {
        match self.bound {
            Bound::Below(tol) => Some(tol),
            Bound::Zero => None,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        match self.bound {
            Bound::Below(tol) => write!(
                f,
                "{tag} {} = {:.3e} (< {:.1e})",
                self.name, self.value, tol
            ),
            Bound::Zero => write!(f, "{tag} {} violations = {} (== 0)", self.name, self.value),
        }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub suite: Suite,
    pub checks: Vec<Check>,
    /// Informational lines that do not affect the verdict.
    pub notes: Vec<String>,
}

impl Report {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}", self.suite)?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        write!(
            f,
            "{} {}: {} checks, {} failed",
            if failed == 0 { "PASS" } else { "FAIL" },
            self.suite,
            self.checks.len(),
            failed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Sample count for the Monte Carlo suites.
    pub samples: usize,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100_000,
            exec: Exec::default(),
        }
    }
}

/// Weighted pairs over `{A, B}` whose paths stay within length two.
pub fn toy_pairs() -> Vec<(Vec<Token>, Vec<Token>, f64)> {
    vec![
        (vec![], vec![0, 1], 0.3),
        (vec![], vec![1], 0.2),
        (vec![0], vec![1, 0], 0.2),
        (vec![1], vec![0], 0.15),
        (vec![0, 1], vec![0], 0.15),
    ]
}

/// The default toy coupling on the seven-state space.
pub fn toy_coupling() -> Result<(EnumeratedSpace, WeightedCoupling)> {
    let c = WeightedCoupling::from_pairs(2, &toy_pairs(), CouplingMode::Optimal)?;
    Ok((EnumeratedSpace::new(2, 2)?, c))
}

/// `0.1, 0.2, ..., 0.9`.
pub fn decile_grid() -> Vec<f64> {
    (1..10).map(|k| k as f64 / 10.0).collect()
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Report> {
    match suite {
        Suite::Kfe => kfe_suite(),
        Suite::Theorem1 => theorem1_suite(),
        Suite::Lemmas => lemmas_suite(),
        Suite::Propagation => propagation_suite(opts),
        Suite::Corrector => corrector_suite(opts),
        Suite::CfgIdentities => cfg_suite(opts),
    }
}

fn kfe_suite() -> Result<Report> {
    let mut r = Report::new(Suite::Kfe);

    let p0 = [0.3, 0.7, 0.0];
    let still = integrate_kfe(|_| Ok(vec![0.0; 9]), &p0, 0.0, 1.0, 50)?;
    r.checks.push(Check::below(
        "zero_rates_drift",
        max_abs_diff(still.last(), &p0),
        1e-15,
    ));

    let rate = 1.5;
    let two = integrate_kfe(
        |_| Ok(vec![-rate, rate, rate, -rate]),
        &[1.0, 0.0],
        0.0,
        1.0,
        1000,
    )?;
    let closed = (1.0 - (-2.0 * rate).exp()) / 2.0;
    r.checks.push(Check::below(
        "two_state_closed_form",
        (two.last()[1] - closed).abs(),
        1e-9,
    ));

    let sched = Scheduler::cubic();
    let (space, toy) = toy_coupling()?;
    let end = 1.0 - 1e-3;
    let traj = integrate_kfe(
        |t| Ok(enumerate_marginal(&space, &toy, &sched, t)?.rate_matrix()),
        &toy.source_distribution(&space)?,
        0.0,
        end,
        4000,
    )?;
    let mut worst: f64 = 0.0;
    for (t, p) in traj.times.iter().zip(&traj.probs).step_by(500) {
        worst = worst.max(max_abs_diff(
            p,
            &enumerate_marginal_p(&space, &toy, &sched, *t)?,
        ));
    }
    worst = worst.max(max_abs_diff(
        traj.last(),
        &enumerate_marginal_p(&space, &toy, &sched, end)?,
    ));
    r.checks
        .push(Check::below("toy_integrated_vs_enumerated", worst, 1e-6));

    let point = WeightedCoupling::point(2, &[0, 1], &[1, 1, 0], CouplingMode::Optimal)?;
    let pspace = point.space()?;
    let delta_x0 = point.source_distribution(&pspace)?;
    let delta_x1 = point.target_distribution(&pspace)?;
    let ptraj = integrate_kfe(
        |t| Ok(enumerate_marginal(&pspace, &point, &sched, t)?.rate_matrix()),
        &delta_x0,
        0.0,
        end,
        4000,
    )?;
    let exact_end = enumerate_marginal_p(&pspace, &point, &sched, end)?;
    r.checks.push(Check::below(
        "point_integrated_vs_enumerated_at_end",
        max_abs_diff(ptraj.last(), &exact_end),
        1e-6,
    ));
    let at_one = enumerate_marginal_p(&pspace, &point, &sched, 1.0)?;
    r.checks.push(Check::below(
        "point_path_at_one_vs_target",
        total_variation(&at_one, &delta_x1),
        1e-12,
    ));
    r.notes.push(format!(
        "point path TV to target at t = {end}: {:.3e} (exact value {:.3e})",
        total_variation(ptraj.last(), &delta_x1),
        total_variation(&exact_end, &delta_x1)
    ));
    Ok(r)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn theorem1_suite() -> Result<Report> {
    let mut r = Report::new(Suite::Theorem1);
    let grid = decile_grid();
    let (space, toy) = toy_coupling()?;
    for sched in [Scheduler::cubic(), Scheduler::linear()] {
        let rep = verify_theorem1(&space, &toy, &sched, &grid, FD_STEP, KFE_TOL)?;
        let tag = format!("{:?}", sched.kind).to_lowercase();
        r.checks.push(Check::below(
            format!("toy_{tag}_kfe_residual"),
            rep.max_residual(),
            KFE_TOL,
        ));
        let bad = rep
            .rows
            .iter()
            .filter(|row| row.row_sum >= 1e-12 || row.min_off_diagonal < 0.0)
            .count();
        r.checks
            .push(Check::zero(format!("toy_{tag}_rate_conditions"), bad));
    }

    let sched = Scheduler::cubic();
    let single = WeightedCoupling::point(2, &[0], &[0, 1], CouplingMode::Optimal)?;
    let rep = verify_theorem1(&single.space()?, &single, &sched, &grid, FD_STEP, KFE_TOL)?;
    r.checks.push(Check::below(
        "single_edit_kfe_residual",
        rep.max_residual(),
        KFE_TOL,
    ));

    let same = WeightedCoupling::point(2, &[1, 0], &[1, 0], CouplingMode::Optimal)?;
    let sspace = same.space()?;
    let mut moving = 0;
    for &t in &grid {
        let m = enumerate_marginal(&sspace, &same, &sched, t)?;
        moving += m.rate_matrix().iter().filter(|&&q| q != 0.0).count();
    }
    r.checks
        .push(Check::zero("identical_pair_rate_is_zero", moving));

    let opt = WeightedCoupling::point(2, &[0, 1], &[1, 0], CouplingMode::Optimal)?;
    let worst = WeightedCoupling::point(2, &[0, 1], &[1, 0], CouplingMode::WorstCase)?;
    let wspace = worst.space()?;
    let rep_o = verify_theorem1(&wspace, &opt, &sched, &grid, FD_STEP, KFE_TOL)?;
    let rep_w = verify_theorem1(&wspace, &worst, &sched, &grid, FD_STEP, KFE_TOL)?;
    r.checks.push(Check::below(
        "optimal_pair_kfe_residual",
        rep_o.max_residual(),
        KFE_TOL,
    ));
    r.checks.push(Check::below(
        "worst_case_pair_kfe_residual",
        rep_w.max_residual(),
        KFE_TOL,
    ));
    let a = enumerate_marginal(&wspace, &opt, &sched, 0.5)?.rate_matrix();
    let b = enumerate_marginal(&wspace, &worst, &sched, 0.5)?.rate_matrix();
    let gap = max_abs_diff(&a, &b);
    r.checks.push(Check::zero(
        "alignments_give_distinct_rates",
        usize::from(gap < 1e-3),
    ));

    let ux = WeightedCoupling::uniform_x0(
        2,
        &[(vec![0, 1], 0.5), (vec![1], 0.3), (vec![], 0.2)],
        &UniformX0 {
            num_delete: 1,
            num_substitute: 1,
            source: None,
        },
    )?;
    let rep = verify_theorem1(&ux.space()?, &ux, &sched, &grid, FD_STEP, KFE_TOL)?;
    r.checks.push(Check::below(
        "uniform_x0_kfe_residual",
        rep.max_residual(),
        KFE_TOL,
    ));
    Ok(r)
}

fn lemmas_suite() -> Result<Report> {
    let mut r = Report::new(Suite::Lemmas);
    let grid = decile_grid();
    for sched in [Scheduler::cubic(), Scheduler::linear()] {
        let tag = format!("{:?}", sched.kind).to_lowercase();
        let det = verify_deterministic_rate_lemma(strip_cells, &sched, &grid, FD_STEP)?;
        r.checks.push(Check::below(
            format!("deterministic_{tag}_kfe_residual"),
            det.kfe_residual,
            KFE_TOL,
        ));
        r.checks.push(Check::below(
            format!("deterministic_{tag}_row_sum"),
            det.row_sum,
            1e-12,
        ));

        let constant = verify_deterministic_rate_lemma(|_| Vec::new(), &sched, &grid, FD_STEP)?;
        r.checks.push(Check::below(
            format!("constant_f_{tag}_kfe_residual"),
            constant.kfe_residual,
            KFE_TOL,
        ));
        r.checks.push(Check::zero(
            format!("constant_f_{tag}_x_transitions"),
            usize::from(constant.x_change_rate != 0.0),
        ));

        #[rustfmt::skip]
        let pxz = [
            0.2, 0.5, 0.1, 0.7,
            0.3, 0.25, 0.6, 0.1,
            0.5, 0.25, 0.3, 0.2,
        ];
        let general = verify_time_independent_rate_lemma(&pxz, 3, &sched, &grid, FD_STEP)?;
        r.checks.push(Check::below(
            format!("stochastic_{tag}_kfe_residual"),
            general.kfe_residual,
            KFE_TOL,
        ));
        r.checks.push(Check::below(
            format!("stochastic_{tag}_row_sum"),
            general.row_sum,
            1e-12,
        ));
    }
    Ok(r)
}

/// Runs `f` on `n` draws, split into fixed-size chunks that each own an RNG
/// stream, so results do not depend on the executor.
fn chunked<T, F>(n: usize, seed: u64, stream_base: u64, exec: Exec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = exec.try_map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((stream_base << 32) | c as u64);
        let len = CHUNK.min(n - c * CHUNK);
        (0..len).map(|_| f(&mut rng)).collect::<Result<Vec<T>>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Outcome of comparing the two-step and event-driven samplers for one
/// setting.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationComparison {
    pub n: usize,
    pub t: f64,
    pub lambda_prop: f64,
    pub tv_samplers: f64,
    pub tv_two_step_exact: f64,
    pub tv_event_exact: f64,
    pub noise_floor_pair: f64,
    pub noise_floor_single: f64,
    pub ks_switch_times: f64,
    pub ks_event_activation: f64,
}

/// Two-step sampler against event-driven simulation and the exact law.
pub fn compare_propagation(
    n: usize,
    t: f64,
    lambda_prop: f64,
    sched: &Scheduler,
    opts: &VerifyOptions,
    stream_base: u64,
) -> Result<PropagationComparison> {
    let samples = opts.samples;
    let two = chunked(samples, opts.seed, stream_base, opts.exec, |rng| {
        let st = sample_propagation(n, t, sched, lambda_prop, rng)?;
        Ok((st.mask_bits(), st.switch_times))
    })?;
    let event = chunked(samples, opts.seed, stream_base + 1, opts.exec, |rng| {
        event_driven_mask(n, t, sched, lambda_prop, rng)
    })?;
    let exact = exact_mask_distribution(n, t, sched, lambda_prop, 2000)?;
    let h_two = mask_histogram(&two.iter().map(|(m, _)| *m).collect::<Vec<_>>(), n);
    let h_event = mask_histogram(&event.iter().map(|(m, _)| *m).collect::<Vec<_>>(), n);
    let tstar: Vec<f64> = two.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    let ks_switch_times = ks_against_cdf(&tstar, |s| {
        sched.kappa(s.clamp(0.0, 1.0)).unwrap_or(f64::NAN)
    });
    let kt = sched.kappa(t)?;
    let act: Vec<f64> = event.iter().flat_map(|(_, a)| a.iter().copied()).collect();
    let ks_event_activation = ks_against_cdf(&act, |s| {
        sched.kappa(s.clamp(0.0, 1.0)).unwrap_or(f64::NAN) / kt
    });
    let single = tv_noise_floor(&exact, samples);
    Ok(PropagationComparison {
        n,
        t,
        lambda_prop,
        tv_samplers: total_variation(&h_two, &h_event),
        tv_two_step_exact: total_variation(&h_two, &exact),
        tv_event_exact: total_variation(&h_event, &exact),
        noise_floor_pair: single * std::f64::consts::SQRT_2,
        noise_floor_single: single,
        ks_switch_times,
        ks_event_activation,
    })
}

fn propagation_suite(opts: &VerifyOptions) -> Result<Report> {
    let mut r = Report::new(Suite::Propagation);
    let sched = Scheduler::cubic();
    let mut base = 0;
    for lambda in [1.0, 4.0] {
        for t in [0.3, 0.7] {
            let c = compare_propagation(8, t, lambda, &sched, opts, base)?;
            base += 2;
            let tag = format!("lambda={lambda} t={t}");
            r.checks.push(Check::below(
                format!("tv_two_step_vs_event {tag}"),
                c.tv_samplers,
                0.02,
            ));
            r.checks.push(Check::below(
                format!("ks_switch_times {tag}"),
                c.ks_switch_times,
                0.01,
            ));
            let tol = 1.5 * c.noise_floor_single + 2e-3;
            r.checks.push(Check::below(
                format!("tv_two_step_vs_exact {tag}"),
                c.tv_two_step_exact,
                tol,
            ));
            r.checks.push(Check::below(
                format!("tv_event_vs_exact {tag}"),
                c.tv_event_exact,
                tol,
            ));
            r.checks.push(Check::below(
                format!("ks_event_activation {tag}"),
                c.ks_event_activation,
                0.01,
            ));
            r.notes.push(format!(
                "{tag}: expected sampling TV between two independent samples {:.4}, against the exact law {:.4}",
                c.noise_floor_pair, c.noise_floor_single
            ));
        }
    }
    Ok(r)
}

/// Exact forward and reverse rate tables for the toy coupling.
pub fn toy_tables() -> Result<(ExactRateTable, ExactRateTable)> {
    let (space, toy) = toy_coupling()?;
    let sched = Scheduler::cubic();
    Ok((
        ExactRateTable::new(space.clone(), toy.clone(), sched, TableDirection::Forward),
        ExactRateTable::new(space, toy, sched, TableDirection::Reverse),
    ))
}

/// Largest violation of `rev(x | y) p_t(y) = fwd(y | x) p_t(x)` over all
/// neighbouring pairs, with both sides read off model predictions.
pub fn flux_identity_residual(fwd: &ExactRateTable, rev: &ExactRateTable, t: f64) -> Result<f64> {
    let space = fwd.space();
    let p = fwd.marginal(t)?.p;
    let mut worst: f64 = 0.0;
    for x in 0..space.len() {
        let sx = space.sequence(x);
        let pf = fwd.predict(&sx, t)?;
        for (_, y) in space.neighbors(x) {
            let sy = space.sequence(y);
            let pr = rev.predict(&sy, 1.0 - t)?;
            let forward: f64 = edits_between(space, x, y)
                .iter()
                .map(|op| pf.rate_of_edit(op))
                .sum::<Result<f64>>()?;
            let backward: f64 = edits_between(space, y, x)
                .iter()
                .map(|op| pr.rate_of_edit(op))
                .sum::<Result<f64>>()?;
            worst = worst.max((backward * p[y] - forward * p[x]).abs());
        }
    }
    Ok(worst)
}

fn edits_between(space: &EnumeratedSpace, x: usize, y: usize) -> Vec<crate::sequence::EditOp> {
    space
        .neighbors(x)
        .into_iter()
        .filter(|&(_, z)| z == y)
        .map(|(op, _)| op)
        .collect()
}

/// Draws `opts.samples` states from `p_t`, applies one step of
/// [`corrector_step`] and returns the resulting histogram.
pub fn corrector_histogram(
    fwd: &ExactRateTable,
    rev: &ExactRateTable,
    t: f64,
    advance: f64,
    overshoot: f64,
    opts: &VerifyOptions,
    stream_base: u64,
) -> Result<Vec<f64>> {
    let space = fwd.space();
    let p = fwd.marginal(t)?.p;
    let dist = WeightedIndex::new(&p).map_err(|e| Error::Config(format!("p_t: {e}")))?;
    let step_opts = StepOptions::plain(space.max_len());
    let ends = chunked(opts.samples, opts.seed, stream_base, opts.exec, |rng| {
        let x = space.sequence(dist.sample(rng));
        let (f, b) = corrector_step(fwd, Some(rev), &x, t, advance, overshoot, &step_opts, rng)?;
        let end = b.map_or(f.x, |b| b.x);
        space
            .index_of_sequence(&end)
            .ok_or(Error::StateOutsideSpace)
    })?;
    let mut h = vec![0.0; space.len()];
    for i in &ends {
        h[*i] += 1.0 / ends.len() as f64;
    }
    Ok(h)
}

fn corrector_suite(opts: &VerifyOptions) -> Result<Report> {
    let mut r = Report::new(Suite::Corrector);
    let (fwd, rev) = toy_tables()?;
    let mut flux: f64 = 0.0;
    for t in decile_grid() {
        flux = flux.max(flux_identity_residual(&fwd, &rev, t)?);
    }
    r.checks.push(Check::below("flux_identity", flux, 1e-12));

    let (t, h, overshoot) = (0.5, 0.01, 0.02);
    let pure = corrector_histogram(&fwd, &rev, t, 0.0, overshoot, opts, 0)?;
    let p_t = fwd.marginal(t)?.p;
    r.checks.push(Check::below(
        "forward_reverse_preserves_p_t",
        total_variation(&pure, &p_t),
        0.02,
    ));
    let advanced = corrector_histogram(&fwd, &rev, t, h, overshoot, opts, 1)?;
    let p_next = fwd.marginal(t + h)?.p;
    r.checks.push(Check::below(
        "corrector_step_tracks_p_t_plus_h",
        total_variation(&advanced, &p_next),
        0.02,
    ));
    r.notes.push(format!(
        "expected sampling TV at {} draws: {:.4}",
        opts.samples,
        tv_noise_floor(&p_t, opts.samples)
    ));
    Ok(r)
}

fn random_sequence<R: Rng>(vocab: Vocab, max: usize, rng: &mut R) -> Result<Sequence> {
    let n = rng.gen_range(0..=max);
    let content: Vec<Token> = (0..n)
        .map(|_| rng.gen_range(0..vocab.size()) as Token)
        .collect();
    Sequence::new(vocab, &content)
}

fn cfg_suite(opts: &VerifyOptions) -> Result<Report> {
    let mut r = Report::new(Suite::CfgIdentities);
    let vocab = Vocab::new(3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut params = ModelParams::featurized(vocab);
    params.randomize(1.0, &mut rng);
    let variants = [CfgVariant::Weighted, CfgVariant::Fixed, CfgVariant::Naive];
    let mut w_one = [0usize; 3];
    let (mut naive_zero, mut fixed_flat) = (0, 0);
    for _ in 0..200 {
        let x = random_sequence(vocab, 5, &mut rng)?;
        let c = random_sequence(vocab, 4, &mut rng)?;
        let t = rng.gen::<f64>();
        let cond = params.predict(&x, t, Some(&c))?;
        let uncond = params.predict(&x, t, None)?;
        for (k, v) in variants.iter().enumerate() {
            if apply_cfg(&cond, &uncond, 1.0, *v)? != cond {
                w_one[k] += 1;
            }
        }
        let naive = apply_cfg(&cond, &uncond, 0.0, CfgVariant::Naive)?;
        if naive.lam_ins != cond.lam_ins
            || naive.lam_del != cond.lam_del
            || naive.lam_sub != cond.lam_sub
        {
            naive_zero += 1;
        }
        for w in [-2.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0] {
            let fixed = apply_cfg(&cond, &uncond, w, CfgVariant::Fixed)?;
            if fixed.lam_ins != cond.lam_ins
                || fixed.lam_del != cond.lam_del
                || fixed.lam_sub != cond.lam_sub
            {
                fixed_flat += 1;
            }
        }
    }
    for (k, v) in variants.iter().enumerate() {
        r.checks.push(Check::zero(
            format!("w=1 {v:?} equals conditional").to_lowercase(),
            w_one[k],
        ));
    }
    r.checks
        .push(Check::zero("w=0 naive rates equal conditional", naive_zero));
    r.checks
        .push(Check::zero("fixed rates independent of w", fixed_flat));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn deterministic_suites_pass() {
        let opts = VerifyOptions::default();
        for s in [Suite::Kfe, Suite::Theorem1, Suite::Lemmas] {
            let rep = run_suite(s, &opts).unwrap();
            assert!(rep.passed(), "{rep}");
        }
    }
}
