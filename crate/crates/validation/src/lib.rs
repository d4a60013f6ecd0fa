//! Acceptance criteria as pinned measurements.
//!
//! [`run`] executes one criterion and returns every measurement next to the
//! bound it must meet, plus the wall time against the criterion's budget.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use editflow::alignment::{align, align_optimal, UniformX0};
use editflow::model::PredictionCache;
use editflow::oracle::{
    edit_distance, total_variation, tv_noise_floor, EnumeratedSpace, ExactRateTable,
    TableDirection, WeightedCoupling,
};
use editflow::paths::sample_zt;
use editflow::sampler::{run_many, Method, Restricted, Restriction, SamplerConfig, SimOutcome};
use editflow::toy::{binary_words, training_mean_edits, CouplingTable, ToyPreset};
use editflow::training::{loss_and_grad, Example};
use editflow::verify::{
    compare_propagation, corrector_histogram, decile_grid, flux_identity_residual, run_suite,
    toy_pairs, toy_tables, Check, Suite, VerifyOptions,
};
use editflow::{CouplingMode, Exec, ModelParams, Result, Scheduler, Sequence, Token, Vocab};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step of the gradient check.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the gradient check's relative error.
pub const FD_REL_FLOOR: f64 = 1e-6;
/// Monte Carlo sample count of criteria 4, 5, 6 and 7.
pub const SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Below(f64),
    AtLeast(f64),
    Zero,
}

impl Rule {
    fn holds(self, v: f64) -> bool {
        match self {
            Rule::Below(b) => v < b,
            Rule::AtLeast(b) => v >= b,
            Rule::Zero => v == 0.0,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Below(b) => write!(f, "< {b:e}"),
            Rule::AtLeast(b) => write!(f, ">= {b}"),
            Rule::Zero => write!(f, "== 0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub name: String,
    pub value: f64,
    pub rule: Rule,
}

impl Measure {
    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            rule: Rule::Below(bound),
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            rule: Rule::AtLeast(bound),
        }
    }

    pub fn zero(name: impl Into<String>, count: usize) -> Self {
        Self {
            name: name.into(),
            value: count as f64,
            rule: Rule::Zero,
        }
    }

    fn from_check(c: &Check) -> Self {
        match c.tolerance() {
            Some(tol) => Self::below(c.name.clone(), c.value, tol),
            None => Self::zero(c.name.clone(), c.value as usize),
        }
    }

    pub fn passed(&self) -> bool {
        self.rule.holds(self.value)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "ok  " } else { "FAIL" };
        if self.value.fract() == 0.0 && self.value.abs() < 1e15 {
            write!(f, "{tag} {} = {} ({})", self.name, self.value, self.rule)
        } else {
            write!(
                f,
                "{tag} {} = {:.4e} ({})",
                self.name, self.value, self.rule
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub budget: Duration,
}

const fn criterion(id: usize, title: &'static str, secs: u64) -> Criterion {
    Criterion {
        id,
        title,
        budget: Duration::from_secs(secs),
    }
}

pub const CRITERIA: [Criterion; 10] = [
    criterion(1, "rate conditions", 10),
    criterion(2, "gradient correctness", 60),
    criterion(3, "forward equation and lemma oracles", 60),
    criterion(4, "transport with exact rates", 300),
    criterion(5, "two-letter toy reproduction", 900),
    criterion(6, "localized path sampler fidelity", 300),
    criterion(7, "corrector and reverse rates", 300),
    criterion(8, "guidance identities", 10),
    criterion(9, "special-case restrictions", 60),
    criterion(10, "alignment audit", 60),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub measures: Vec<Measure>,
    pub notes: Vec<String>,
    pub elapsed: Duration,
}

impl CriterionReport {
    pub fn within_budget(&self) -> bool {
        self.elapsed < self.criterion.budget
    }

    pub fn passed(&self) -> bool {
        self.within_budget() && self.measures.iter().all(Measure::passed)
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.criterion;
        write!(
            f,
            "{} criterion {}: {} ({:.1} s of {} s budget)",
            if self.passed() { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            self.elapsed.as_secs_f64(),
            c.budget.as_secs()
        )?;
        for m in &self.measures {
            write!(f, "\n    {m}")?;
        }
        if !self.within_budget() {
            write!(f, "\n    FAIL runtime over budget")?;
        }
        for n in &self.notes {
            write!(f, "\n    note: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub exec: Exec,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Default)]
struct Outcome {
    measures: Vec<Measure>,
    notes: Vec<String>,
}

impl Outcome {
    fn push(&mut self, m: Measure) {
        self.measures.push(m);
    }

    fn note(&mut self, n: String) {
        self.notes.push(n);
    }
}

/// Runs criterion `id` (1 to 10).
pub fn run(id: usize, s: &Settings) -> Result<CriterionReport> {
    let criterion = *CRITERIA
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| editflow::Error::Config(format!("no criterion {id}")))?;
    let start = Instant::now();
    let out = match id {
        1 => rate_conditions(s),
        2 => gradients(s),
        3 => forward_equation(s),
        4 => transport(s),
        5 => toy_reproduction(s),
        6 => localized_sampler(s),
        7 => corrector(s),
        8 => guidance(s),
        9 => restrictions(s),
        _ => alignment_audit(s),
    }?;
    Ok(CriterionReport {
        criterion,
        measures: out.measures,
        notes: out.notes,
        elapsed: start.elapsed(),
    })
}

fn random_sequence<R: Rng>(vocab: Vocab, min: usize, max: usize, rng: &mut R) -> Result<Sequence> {
    let n = rng.gen_range(min..=max);
    let content: Vec<Token> = (0..n)
        .map(|_| rng.gen_range(0..vocab.size()) as Token)
        .collect();
    Sequence::new(vocab, &content)
}

fn rate_conditions(s: &Settings) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let (mut bad_rates, mut row_err, mut sum_err, mut edit_err) = (0usize, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..1000 {
        let vocab = Vocab::new(rng.gen_range(1..=3))?;
        let tabular = k % 2 == 0;
        let mut p = if tabular {
            ModelParams::tabular(vocab, 4, 3)?
        } else {
            ModelParams::featurized(vocab)
        };
        p.randomize(rng.gen_range(0.1..8.0), &mut rng);
        let x = random_sequence(vocab, 0, if tabular { 4 } else { 8 }, &mut rng)?;
        let cond = if !tabular && rng.gen_bool(0.5) {
            Some(random_sequence(vocab, 0, 3, &mut rng)?)
        } else {
            None
        };
        let pred = p.predict(&x, rng.gen(), cond.as_ref())?;
        let rates: Vec<f64> = pred
            .lam_ins
            .iter()
            .chain(&pred.lam_del)
            .chain(&pred.lam_sub)
            .copied()
            .collect();
        bad_rates += rates
            .iter()
            .filter(|r| !(r.is_finite() && **r >= 0.0))
            .count();
        for i in 0..=pred.n {
            for row in [pred.q_ins_row(i), pred.q_sub_row(i)] {
                row_err = row_err.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
        let lam_total: f64 = rates.iter().sum();
        let scale = lam_total.max(1.0);
        sum_err = sum_err.max((pred.exit_rate() - lam_total).abs() / scale);
        let by_edit = x
            .neighbors()
            .iter()
            .map(|(op, _)| pred.rate_of_edit(op))
            .sum::<Result<f64>>()?;
        edit_err = edit_err.max((pred.exit_rate() - by_edit).abs() / scale);
    }
    let mut o = Outcome::default();
    o.push(Measure::zero("negative or non-finite rates", bad_rates));
    o.push(Measure::below("max |sum of Q row - 1|", row_err, 1e-9));
    o.push(Measure::below(
        "max rel |exit rate - sum of lambdas|",
        sum_err,
        1e-12,
    ));
    o.push(Measure::below(
        "max rel |exit rate - sum over one-edit neighbours|",
        edit_err,
        1e-9,
    ));
    o.note("1000 settings, alternating tabular and featurized models".into());
    Ok(o)
}

fn random_batch<R: Rng>(vocab: Vocab, with_cond: bool, rng: &mut R) -> Result<Vec<Example>> {
    let sched = Scheduler::cubic();
    let modes = [
        CouplingMode::Optimal,
        CouplingMode::PadRight,
        CouplingMode::WorstCase,
    ];
    (0..rng.gen_range(1..=8))
        .map(|_| {
            let x0 = random_sequence(vocab, 0, 2, rng)?;
            let x1 = random_sequence(vocab, 0, 2, rng)?;
            let pair = align(modes[rng.gen_range(0..modes.len())], &x0, &x1)?;
            let path = sample_zt(&pair, rng.gen_range(0.0..0.999), &sched, rng)?;
            let cond = if with_cond && rng.gen_bool(0.5) {
                Some(random_sequence(vocab, 0, 2, rng)?)
            } else {
                None
            };
            Ok(Example { path, cond })
        })
        .collect()
}

fn gradients(s: &Settings) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let vocab = Vocab::new(2)?;
    let mut o = Outcome::default();
    for tabular in [true, false] {
        let (mut worst, mut compared) = (0.0f64, 0usize);
        for _ in 0..100 {
            let mut p = if tabular {
                ModelParams::tabular(vocab, 4, 2)?
            } else {
                ModelParams::featurized(vocab)
            };
            p.randomize(1.0, &mut rng);
            let batch = random_batch(vocab, !tabular, &mut rng)?;
            let grad = loss_and_grad(&p, &batch, Exec::Sequential)?.grad;
            let loss = |p: &ModelParams| loss_and_grad(p, &batch, Exec::Sequential).map(|o| o.loss);
            for k in 0..p.len() {
                let orig = p.values()[k];
                p.values_mut()[k] = orig + FD_STEP;
                let up = loss(&p)?;
                p.values_mut()[k] = orig - FD_STEP;
                let down = loss(&p)?;
                p.values_mut()[k] = orig;
                let fd = (up - down) / (2.0 * FD_STEP);
                let an = grad.get(&k).copied().unwrap_or(0.0);
                worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(FD_REL_FLOOR));
                compared += 1;
            }
        }
        let kind = if tabular { "tabular" } else { "featurized" };
        o.push(Measure::below(
            format!("{kind} max relative error"),
            worst,
            1e-4,
        ));
        o.note(format!(
            "{kind}: {compared} partial derivatives over 100 (params, batch) pairs"
        ));
    }
    Ok(o)
}

fn forward_equation(_: &Settings) -> Result<Outcome> {
    let mut o = Outcome::default();
    let space = EnumeratedSpace::new(2, 2)?;
    o.push(Measure::zero(
        "toy space size differs from 7",
        space.len().abs_diff(7),
    ));
    let opts = VerifyOptions::default();
    for suite in [Suite::Theorem1, Suite::Lemmas] {
        let rep = run_suite(suite, &opts)?;
        o.measures
            .extend(rep.checks.iter().map(Measure::from_check));
        o.notes.extend(rep.notes);
    }
    Ok(o)
}

fn histogram(space: &EnumeratedSpace, runs: &[SimOutcome]) -> Result<Vec<f64>> {
    let mut h = vec![0.0; space.len()];
    for r in runs {
        let i = space
            .index_of_sequence(&r.x)
            .ok_or(editflow::Error::StateOutsideSpace)?;
        h[i] += 1.0 / runs.len() as f64;
    }
    Ok(h)
}

fn transport(s: &Settings) -> Result<Outcome> {
    let sched = Scheduler::cubic();
    let pairs = toy_pairs();
    let ux = UniformX0 {
        num_delete: 1,
        num_substitute: 1,
        source: None,
    };
    let couplings = [
        (
            "optimal",
            WeightedCoupling::from_pairs(2, &pairs, CouplingMode::Optimal)?,
        ),
        (
            "worst_case",
            WeightedCoupling::from_pairs(2, &pairs, CouplingMode::WorstCase)?,
        ),
        (
            "uniform_x0",
            WeightedCoupling::uniform_x0(
                2,
                &[(vec![0, 1], 0.5), (vec![1], 0.3), (vec![], 0.2)],
                &ux,
            )?,
        ),
    ];
    let mut o = Outcome::default();
    for (c, (name, coupling)) in couplings.into_iter().enumerate() {
        let space = coupling.space()?;
        let p0 = coupling.source_distribution(&space)?;
        let q = coupling.target_distribution(&space)?;
        let dist =
            WeightedIndex::new(&p0).map_err(|e| editflow::Error::Config(format!("source: {e}")))?;
        let table = ExactRateTable::new(space.clone(), coupling, sched, TableDirection::Forward);
        let cfg = SamplerConfig {
            steps: 2000,
            max_len: space.max_len(),
            seed: s.seed,
            method: Method::Euler,
            ..SamplerConfig::default()
        };
        let base = (c as u64) << 40;
        let x0 = |i: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(1));
            rng.set_stream(base + i as u64);
            space.sequence(dist.sample(&mut rng))
        };
        let runs = run_many(&table, None, &x0, &cfg, SAMPLES, base, false, s.exec)?;
        let tv = total_variation(&histogram(&space, &runs)?, &q);
        o.push(Measure::below(
            format!("{name} terminal TV to target"),
            tv,
            0.03,
        ));
        o.note(format!(
            "{name}: {} states, sampling noise TV about {:.4}",
            space.len(),
            tv_noise_floor(&q, SAMPLES)
        ));
    }
    Ok(o)
}

fn toy_reproduction(s: &Settings) -> Result<Outcome> {
    let preset = ToyPreset::new(s.seed);
    let words = preset.words()?;
    let trained = preset.run_training()?;
    let h = &trained.history;
    let window = 1000.min(h.len());
    let mean = |r: &[editflow::training::StepMetrics]| {
        r.iter().map(|m| m.loss).sum::<f64>() / r.len().max(1) as f64
    };
    let (first, last) = (mean(&h[..window]), mean(&h[h.len() - window..]));
    let cache = PredictionCache::new(&trained.params, s.exec)?;
    let table = CouplingTable::estimate(
        &cache,
        &words,
        SAMPLES,
        &preset.sampler(s.seed.wrapping_add(1)),
        s.exec,
    )?;
    let train_edits = training_mean_edits(preset.train.coupler.mode, &words)?;
    let bbbb = words.len() - 1;
    let mut o = Outcome::default();
    o.push(Measure::below(
        "training loss change (last minus first 1000 steps)",
        last - first,
        0.0,
    ));
    o.push(Measure::below(
        "(a) TV of generated marginal from uniform",
        table.marginal_tv(),
        0.05,
    ));
    o.push(Measure::at_least(
        "(b) p(AAAA|AAAA) / p(BBBB|AAAA)",
        table.ratio(0, 0, bbbb),
        5.0,
    ));
    o.push(Measure::below(
        "(c) mean edits per generation",
        table.mean_edits(),
        train_edits,
    ));
    o.note(format!(
        "training loss {first:.4} -> {last:.4} over {} steps",
        h.len()
    ));
    o.note(format!(
        "p(AAAA|AAAA) = {:.4}, p(BBBB|AAAA) = {:.4}, off-grid mass {:.4}",
        table.prob(0, 0),
        table.prob(0, bbbb),
        table.marginal()[words.len()]
    ));
    o.note(format!("training coupling mean edits {train_edits}"));
    Ok(o)
}

fn localized_sampler(s: &Settings) -> Result<Outcome> {
    let sched = Scheduler::cubic();
    let opts = VerifyOptions {
        seed: s.seed,
        samples: SAMPLES,
        exec: s.exec,
    };
    let mut o = Outcome::default();
    let mut base = 0;
    for lambda in [1.0, 4.0] {
        for t in [0.3, 0.7] {
            let c = compare_propagation(8, t, lambda, &sched, &opts, base)?;
            base += 2;
            let tag = format!("lambda_prop={lambda} t={t}");
            o.push(Measure::below(
                format!("{tag} TV two-step vs event-driven"),
                c.tv_samplers,
                0.02,
            ));
            o.push(Measure::below(
                format!("{tag} KS of switch times vs kappa"),
                c.ks_switch_times,
                0.01,
            ));
            o.note(format!(
                "{tag}: TV between two independent samples of the exact law is about {:.4}; TV to exact {:.4} / {:.4}",
                c.noise_floor_pair, c.tv_two_step_exact, c.tv_event_exact
            ));
        }
    }
    Ok(o)
}

fn corrector(s: &Settings) -> Result<Outcome> {
    let (fwd, rev) = toy_tables()?;
    let mut flux: f64 = 0.0;
    for t in decile_grid() {
        flux = flux.max(flux_identity_residual(&fwd, &rev, t)?);
    }
    let opts = VerifyOptions {
        seed: s.seed,
        samples: SAMPLES,
        exec: s.exec,
    };
    let t = 0.5;
    let h = corrector_histogram(&fwd, &rev, t, 0.0, 0.02, &opts, 0)?;
    let p_t = fwd.marginal(t)?.p;
    let mut o = Outcome::default();
    o.push(Measure::below("max flux identity residual", flux, 1e-12));
    o.push(Measure::below(
        "TV of p_t after forward+reverse step",
        total_variation(&h, &p_t),
        0.02,
    ));
    o.note(format!(
        "sampling noise TV about {:.4}",
        tv_noise_floor(&p_t, SAMPLES)
    ));
    Ok(o)
}

fn guidance(s: &Settings) -> Result<Outcome> {
    let rep = run_suite(
        Suite::CfgIdentities,
        &VerifyOptions {
            seed: s.seed,
            ..VerifyOptions::default()
        },
    )?;
    Ok(Outcome {
        measures: rep.checks.iter().map(Measure::from_check).collect(),
        notes: rep.notes,
    })
}

fn restrictions(s: &Settings) -> Result<Outcome> {
    let vocab = Vocab::new(3)?;
    let mut params = ModelParams::featurized(vocab);
    params.randomize(1.5, &mut ChaCha8Rng::seed_from_u64(s.seed));
    let cfg = SamplerConfig {
        steps: 100,
        max_len: 12,
        seed: s.seed,
        ..SamplerConfig::default()
    };
    let x0 = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(1));
        rng.set_stream(i as u64);
        random_sequence(vocab, 1, 6, &mut rng).expect("short sequence fits the vocabulary")
    };
    let count = 10_000;
    let mut o = Outcome::default();

    let sub = Restricted {
        inner: params.clone(),
        restriction: Restriction::SubstitutionOnly,
    };
    let runs = run_many(&sub, None, &x0, &cfg, count, 0, true, s.exec)?;
    let traces = runs.iter().filter_map(|r| r.trace.as_ref());
    let changed = traces
        .clone()
        .filter(|tr| tr.lengths().any(|n| n != tr.records[0].tokens.len()))
        .count();
    let edited = runs.iter().filter(|r| r.num_edits > 0).count();
    o.push(Measure::zero(
        "substitution-only traces that change length",
        changed,
    ));
    o.push(Measure::at_least(
        "substitution-only traces with at least one edit",
        edited as f64,
        1.0,
    ));

    let right = Restricted {
        inner: params.clone(),
        restriction: Restriction::RightmostInsertOnly,
    };
    let runs = run_many(&right, None, &x0, &cfg, count, count as u64, true, s.exec)?;
    let mut broken = 0;
    for tr in runs.iter().filter_map(|r| r.trace.as_ref()) {
        let ok = tr.records.windows(2).all(|w| {
            let (prev, next) = (&w[0].tokens, &w[1].tokens);
            next.starts_with(prev) && next.len() == prev.len() + w[1].edits.len()
        });
        broken += usize::from(!ok);
    }
    let grown = runs.iter().filter(|r| r.num_edits > 0).count();
    o.push(Measure::zero(
        "rightmost-insert traces that are not append-only",
        broken,
    ));
    o.push(Measure::at_least(
        "rightmost-insert traces with at least one edit",
        grown as f64,
        1.0,
    ));
    o.note(format!(
        "{count} traces per restriction, {} Euler steps each",
        cfg.steps
    ));
    Ok(o)
}

/// Shortest edit path lengths from `a` by breadth-first search over all
/// sequences up to `cap` tokens.
fn bfs_distances(a: &Sequence, cap: usize) -> Result<HashMap<Vec<Token>, usize>> {
    let mut dist = HashMap::from([(a.content().to_vec(), 0usize)]);
    let mut queue = VecDeque::from([a.clone().with_max_len(cap)?]);
    while let Some(x) = queue.pop_front() {
        let d = dist[x.content()];
        for (_, y) in x.neighbors() {
            if !dist.contains_key(y.content()) {
                dist.insert(y.content().to_vec(), d + 1);
                queue.push_back(y);
            }
        }
    }
    Ok(dist)
}

fn alignment_audit(s: &Settings) -> Result<Outcome> {
    let mut all = Vec::new();
    for n in 0..=5 {
        all.extend(binary_words(n)?);
    }
    let (mut vs_dp, mut vs_bfs, mut projection) = (0, 0, 0);
    let mut check = |a: &Sequence, b: &Sequence, bfs: Option<usize>| -> Result<()> {
        let pair = align_optimal(a, b)?;
        let dp = edit_distance(a.content(), b.content());
        vs_dp += usize::from(pair.disagreements() != dp);
        if let Some(d) = bfs {
            vs_bfs += usize::from(d != dp);
        }
        let back0 = pair.z0.rm_blanks()?;
        let back1 = pair.z1.rm_blanks()?;
        projection += usize::from(back0.content() != a.content() || back1.content() != b.content());
        Ok(())
    };
    for a in &all {
        let dist = bfs_distances(a, 6)?;
        for b in &all {
            check(a, b, dist.get(b.content()).copied())?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    for _ in 0..1000 {
        let vocab = Vocab::new(rng.gen_range(2..=4))?;
        let a = random_sequence(vocab, 6, 30, &mut rng)?;
        let b = random_sequence(vocab, 6, 30, &mut rng)?;
        check(&a, &b, None)?;
    }
    let mut o = Outcome::default();
    o.push(Measure::zero(
        "alignment disagreements != DP edit distance",
        vs_dp,
    ));
    o.push(Measure::zero(
        "DP edit distance != breadth-first distance",
        vs_bfs,
    ));
    o.push(Measure::zero(
        "alignments that do not project back to their endpoints",
        projection,
    ));
    o.note(format!(
        "{} exhaustive pairs up to length 5 plus 1000 random pairs of length 6 to 30",
        all.len() * all.len()
    ));
    Ok(o)
}
