use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use editflow::alignment::UniformX0;
use editflow::model::{load_checkpoint, write_checkpoint, ModelKind, PredictionCache};
use editflow::sampler::{
    run_many, write_traces, Corrector, Method, Restricted, Restriction, SamplerConfig,
};
use editflow::toy::{binary_words, decode, encode, CouplingTable};
use editflow::training::{
    train_with_callback, Coupler, DataSource, Draw, IndependentPairs, TrainConfig, WeightedPairs,
};
use editflow::verify::{run_suite, Suite, VerifyOptions};
use editflow::{Exec, ModelParams, RateModel, Scheduler, Sequence, Vocab};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, UsageError};
use crate::provenance::Provenance;

/// Per-trace default for `sample`.
pub const SAMPLE_COUNT: usize = 100;
/// Per-source default for `coupling-heatmap`.
pub const HEATMAP_COUNT: usize = 100_000;

/// Buffered file, or stdout when no path is given.
fn create(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn exec(cfg: &RunConfig) -> Result<Exec> {
    Ok(match cfg.text("exec") {
        "parallel" => Exec::Parallel,
        "sequential" => Exec::Sequential,
        other => bail!(UsageError(format!(
            "unknown exec `{other}`; expected parallel or sequential"
        ))),
    })
}

fn vocab(cfg: &RunConfig) -> Result<Vocab> {
    Ok(Vocab::new(cfg.get("vocab_size")?)?)
}

/// Letter string `src>tgt` pairs separated by commas.
fn parse_pairs(vocab: Vocab, spec: &str) -> Result<Vec<Draw>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (a, b) = item
                .split_once('>')
                .ok_or_else(|| UsageError(format!("pair `{item}` is not of the form `src>tgt`")))?;
            Ok(Draw {
                x0: encode(vocab, a.trim())?,
                x1: encode(vocab, b.trim())?,
                cond: None,
            })
        })
        .collect()
}

pub fn dataset(cfg: &RunConfig) -> Result<Box<dyn DataSource>> {
    let vocab = vocab(cfg)?;
    match cfg.text("dataset") {
        "toy" => {
            if vocab.size() != 2 {
                bail!(UsageError("the toy dataset needs vocab_size = 2".into()));
            }
            let words = binary_words(cfg.get("word_len")?)?;
            Ok(Box::new(IndependentPairs::new(words.clone(), words)?))
        }
        "pairs" => {
            let draws = match cfg.opt::<String>("pairs")? {
                Some(spec) => parse_pairs(vocab, &spec)?,
                None => Vec::new(),
            };
            if draws.is_empty() {
                bail!(UsageError(
                    "dataset is empty: set `pairs = src>tgt, ...`".into()
                ));
            }
            Ok(Box::new(WeightedPairs::new(
                draws.into_iter().map(|d| (d, 1.0)).collect(),
            )?))
        }
        other => bail!(UsageError(format!(
            "unknown dataset `{other}`; expected toy or pairs"
        ))),
    }
}

pub fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    let mut coupler = Coupler::new(cfg.get("coupling")?);
    coupler.uniform_x0 = UniformX0 {
        num_delete: cfg.get("num_delete")?,
        num_substitute: cfg.get("num_substitute")?,
        source: None,
    };
    let scheduler = Scheduler {
        kind: cfg.get("scheduler")?,
        reversed: false,
    };
    let mut tc = TrainConfig::new(coupler, scheduler);
    tc.batch_size = cfg.get("batch_size")?;
    tc.steps = cfg.get("steps")?;
    tc.lr = cfg.get("lr")?;
    tc.lr_end = cfg.opt("lr_end")?;
    tc.optimizer = cfg.get("optimizer")?;
    tc.cond_drop = cfg.get("cond_drop")?;
    tc.seed = cfg.get("seed")?;
    tc.delta = cfg.get("delta")?;
    tc.direction = cfg.get("direction")?;
    tc.exec = exec(cfg)?;
    tc.localized = match cfg.text("path") {
        "mixture" => None,
        "localized" => Some(
            cfg.opt("lambda_prop")?
                .ok_or_else(|| UsageError("path = localized requires `lambda_prop`".into()))?,
        ),
        other => bail!(UsageError(format!(
            "unknown path `{other}`; expected mixture or localized"
        ))),
    };
    Ok(tc)
}

/// Fresh parameters as configured.
pub fn init_params(cfg: &RunConfig, tc: &TrainConfig) -> Result<ModelParams> {
    let vocab = vocab(cfg)?;
    let mut params = match cfg.text("model") {
        "tabular" => ModelParams::tabular(vocab, cfg.get("max_len")?, cfg.get("buckets")?)?,
        "featurized" => ModelParams::featurized(vocab),
        other => bail!(UsageError(format!(
            "unknown model `{other}`; expected tabular or featurized"
        ))),
    };
    let scale: f64 = cfg.get("init_scale")?;
    if scale != 0.0 {
        params.randomize(scale, &mut ChaCha8Rng::seed_from_u64(tc.seed));
    }
    if let Some(shift) = cfg.opt::<f64>("rate_shift")? {
        params.offset_rates(&tc.path_scheduler(), shift)?;
    }
    Ok(params)
}

fn metrics_path(cfg: &RunConfig, out: &Path) -> PathBuf {
    match cfg.text("metrics") {
        "none" => out.with_extension("metrics.jsonl"),
        p => PathBuf::from(p),
    }
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let source = dataset(cfg)?;
    let tc = train_config(cfg)?;
    let params = init_params(cfg, &tc)?;
    let every: usize = cfg.get("metrics_every")?;
    if every == 0 {
        bail!(UsageError("metrics_every must be at least 1".into()));
    }
    let prov = Provenance::new("train", cfg)?;
    let mpath = metrics_path(cfg, out);
    let mut metrics = create(Some(&mpath))?;
    metrics.write_all(prov.json_line().as_bytes())?;
    let mut write_err = None;
    let last = tc.steps.saturating_sub(1);
    let outcome = train_with_callback(params, source.as_ref(), &tc, |m| {
        if write_err.is_none() && (m.step % every == 0 || m.step == last) {
            if let Err(e) = serde_json::to_writer(&mut metrics, m)
                .map_err(io::Error::from)
                .and_then(|_| metrics.write_all(b"\n"))
            {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", mpath.display()));
    }
    metrics.flush()?;
    let mut w = create(Some(out))?;
    w.write_all(prov.comment_lines().as_bytes())?;
    write_checkpoint(&outcome.params, &mut w)?;
    w.flush()?;
    match outcome.history.last() {
        Some(m) => eprintln!(
            "trained {} steps, final loss {:.6}",
            outcome.history.len(),
            m.loss
        ),
        None => eprintln!("trained 0 steps"),
    }
    Ok(())
}

fn checkpoint(cfg: &RunConfig, key: &str) -> Result<Option<ModelParams>> {
    let Some(path) = cfg.opt::<PathBuf>(key)? else {
        return Ok(None);
    };
    let params = load_checkpoint(&path).with_context(|| format!("loading {}", path.display()))?;
    let want = vocab(cfg)?.size();
    if params.vocab().size() != want {
        bail!(UsageError(format!(
            "checkpoint {} has vocabulary size {} but vocab_size = {want}",
            path.display(),
            params.vocab().size()
        )));
    }
    Ok(Some(params))
}

/// Tabular models are evaluated once up front.
enum Loaded {
    Table(PredictionCache),
    Params(ModelParams),
}

impl Loaded {
    fn new(params: ModelParams, exec: Exec) -> Result<Self> {
        Ok(match params.kind() {
            ModelKind::Tabular { .. } => Loaded::Table(PredictionCache::new(&params, exec)?),
            ModelKind::Featurized => Loaded::Params(params),
        })
    }

    fn model(&self) -> &dyn RateModel {
        match self {
            Loaded::Table(c) => c,
            Loaded::Params(p) => p,
        }
    }
}

fn sampler_config(cfg: &RunConfig, params: &ModelParams) -> Result<SamplerConfig> {
    let max_len = match cfg.get::<usize>("sample_max_len")? {
        0 => match params.kind() {
            ModelKind::Tabular { max_len, .. } => max_len,
            ModelKind::Featurized => Vocab::DEFAULT_MAX_LEN,
        },
        n => n,
    };
    let method = match cfg.text("method") {
        "euler" => Method::Euler,
        "gillespie" => Method::Gillespie {
            slice: cfg.get("slice")?,
        },
        other => bail!(UsageError(format!(
            "unknown method `{other}`; expected euler or gillespie"
        ))),
    };
    let sc = SamplerConfig {
        steps: cfg.get("sample_steps")?,
        temperature: cfg.get("temperature")?,
        top_p: cfg.get("top_p")?,
        top_k: cfg.opt("top_k")?,
        corrector: Corrector {
            c: cfg.get("corrector_c")?,
            a: cfg.get("corrector_a")?,
            b: cfg.get("corrector_b")?,
        },
        seed: cfg.get("seed")?,
        max_len,
        method,
        ..SamplerConfig::default()
    };
    sc.validate()?;
    Ok(sc)
}

/// Start state for trace `i`.
fn starts(cfg: &RunConfig, vocab: Vocab) -> Result<Vec<Sequence>> {
    Ok(match cfg.text("start") {
        "empty" => vec![Sequence::empty(vocab)],
        "words" => {
            if vocab.size() != 2 {
                bail!(UsageError("start = words needs vocab_size = 2".into()));
            }
            binary_words(cfg.get("word_len")?)?
        }
        letters => vec![encode(vocab, letters)?],
    })
}

fn require_checkpoint(cfg: &RunConfig) -> Result<ModelParams> {
    checkpoint(cfg, "checkpoint")?
        .ok_or_else(|| UsageError("set `checkpoint = <path>`".into()).into())
}

fn restricted<'a>(model: &'a dyn RateModel, r: Option<Restriction>) -> Box<dyn RateModel + 'a> {
    match r {
        Some(restriction) => Box::new(Restricted {
            inner: model,
            restriction,
        }),
        None => Box::new(model),
    }
}

pub fn sample(cfg: &RunConfig, count: Option<usize>, out: Option<&Path>) -> Result<()> {
    let exec = exec(cfg)?;
    let params = require_checkpoint(cfg)?;
    let sc = sampler_config(cfg, &params)?;
    let restriction: Option<Restriction> = cfg.opt("restriction")?;
    let reverse = match checkpoint(cfg, "reverse_checkpoint")? {
        Some(p) => Some(Loaded::new(p, exec)?),
        None if !sc.corrector.is_off() => {
            bail!(UsageError("a corrector needs `reverse_checkpoint`".into()))
        }
        None => None,
    };
    let vocab = params.vocab();
    let x0 = starts(cfg, vocab)?;
    let decoded: bool = cfg.get("decode")?;
    let count = count.or(cfg.opt("count")?).unwrap_or(SAMPLE_COUNT);
    let forward = Loaded::new(params, exec)?;
    let model = restricted(forward.model(), restriction);
    let rev = reverse.as_ref().map(|r| restricted(r.model(), restriction));
    let runs = run_many(
        model.as_ref(),
        rev.as_deref(),
        &|i| x0[i % x0.len()].clone(),
        &sc,
        count,
        0,
        true,
        exec,
    )?;
    let traces: Vec<_> = runs.into_iter().filter_map(|r| r.trace).collect();
    let mut w = create(out)?;
    w.write_all(Provenance::new("sample", cfg)?.json_line().as_bytes())?;
    write_traces(&traces, 0, &mut w)?;
    if decoded {
        for (i, t) in traces.iter().enumerate() {
            let line = serde_json::json!({ "decoded": i, "text": decode(&t.final_state(vocab)?) });
            writeln!(w, "{line}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `heatmap.csv` gets its reference table at `heatmap.training.csv`.
pub fn reference_path(out: &Path) -> PathBuf {
    out.with_extension("training.csv")
}

fn write_table(
    w: &mut dyn Write,
    prov: &Provenance,
    words: &[Sequence],
    rows: &[Vec<usize>],
    per_row: usize,
) -> Result<()> {
    w.write_all(prov.comment_lines().as_bytes())?;
    writeln!(w, "x0,x1,count,prob")?;
    for (x0, row) in words.iter().zip(rows) {
        for (col, &n) in row.iter().enumerate() {
            let x1 = words.get(col).map_or_else(|| "other".to_string(), decode);
            let prob = if per_row == 0 {
                0.0
            } else {
                n as f64 / per_row as f64
            };
            writeln!(w, "{},{x1},{n},{prob}", decode(x0))?;
        }
    }
    Ok(())
}

pub fn coupling_heatmap(cfg: &RunConfig, count: Option<usize>, out: Option<&Path>) -> Result<()> {
    let exec = exec(cfg)?;
    let params = require_checkpoint(cfg)?;
    if params.vocab().size() != 2 {
        bail!(UsageError(
            "the heatmap covers two-letter words; the checkpoint must have vocab_size = 2".into()
        ));
    }
    let sc = sampler_config(cfg, &params)?;
    let words = binary_words(cfg.get("word_len")?)?;
    let per_row = count.or(cfg.opt("count")?).unwrap_or(HEATMAP_COUNT);
    let loaded = Loaded::new(params, exec)?;
    let table = CouplingTable::estimate(loaded.model(), &words, per_row, &sc, exec)?;
    let prov = Provenance::new("coupling-heatmap", cfg)?;
    let mut w = create(out)?;
    write_table(&mut w, &prov, &words, &table.counts, per_row)?;
    w.flush()?;
    if let Some(p) = out {
        // Every source reaches every target once under independent pairing.
        let uniform: Vec<Vec<usize>> = words
            .iter()
            .map(|_| words.iter().map(|_| 1).chain([0]).collect())
            .collect();
        let mut r = create(Some(&reference_path(p)))?;
        write_table(&mut r, &prov, &words, &uniform, words.len())?;
        r.flush()?;
    }
    let last = words.len() - 1;
    eprintln!(
        "marginal TV from uniform {:.4}; p(A..A|A..A)/p(B..B|A..A) = {:.3}; mean edits {:.3}",
        table.marginal_tv(),
        table.ratio(0, 0, last),
        table.mean_edits()
    );
    Ok(())
}

/// Runs a suite and reports whether every check passed.
pub fn verify(
    cfg: &RunConfig,
    suite: &str,
    count: Option<usize>,
    out: Option<&Path>,
) -> Result<bool> {
    let suite: Suite = suite
        .parse()
        .map_err(|e: editflow::Error| UsageError(e.to_string()))?;
    let opts = VerifyOptions {
        seed: cfg.get("seed")?,
        samples: count
            .or(cfg.opt("count")?)
            .unwrap_or(VerifyOptions::default().samples),
        exec: exec(cfg)?,
    };
    let report = run_suite(suite, &opts)?;
    println!("{report}");
    if let Some(p) = out {
        let mut w = create(Some(p))?;
        w.write_all(Provenance::new("verify", cfg)?.comment_lines().as_bytes())?;
        writeln!(w, "{report}")?;
        w.flush()?;
    }
    Ok(report.passed())
}
