//! The two-letter toy problem: uniform fixed-length strings over `{A, B}`
//! paired independently and aligned by deleting every source token and
//! inserting every target token.

use crate::alignment::{align, CouplingMode};
use crate::error::{Error, Result};
use crate::model::{ModelParams, RateModel};
use crate::par::Exec;
use crate::paths::Scheduler;
use crate::sampler::{run_many, Method, SamplerConfig};
use crate::sequence::{Sequence, Token, Vocab};
use crate::training::{train, Coupler, IndependentPairs, TrainConfig, TrainOutcome};

/// Every string of length `len` over a two-token vocabulary, in
/// lexicographic order with `A < B`.
pub fn binary_words(len: usize) -> Result<Vec<Sequence>> {
    if len >= usize::BITS as usize {
        return Err(Error::Config(format!("word length {len} is too large")));
    }
    let vocab = Vocab::new(2)?;
    (0..1usize << len)
        .map(|k| {
            let tokens: Vec<Token> = (0..len).rev().map(|b| (k >> b & 1) as Token).collect();
            Sequence::new(vocab, &tokens)
        })
        .collect()
}

/// Letters `A`, `B`, ... for tokens `0, 1, ...`.
pub fn decode(x: &Sequence) -> String {
    x.content()
        .iter()
        .map(|&t| char::from_u32('A' as u32 + t).unwrap_or('?'))
        .collect()
}

pub fn encode(vocab: Vocab, s: &str) -> Result<Sequence> {
    let tokens = s
        .chars()
        .map(|c| {
            let t = (c as u32).wrapping_sub('A' as u32);
            if (t as usize) < vocab.size() {
                Ok(t as Token)
            } else {
                Err(Error::Config(format!("`{c}` is not a token name")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(vocab, &tokens)
}

/// Training and sampling settings for the toy problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPreset {
    pub word_len: usize,
    /// Longest state the tabular model covers.
    pub max_len: usize,
    pub buckets: usize,
    /// Initial rate logits sit at `ln(kappa_dot / (1 - kappa)) + rate_shift`.
    pub rate_shift: f64,
    pub train: TrainConfig,
}

impl ToyPreset {
    pub fn new(seed: u64) -> Self {
        let mut train = TrainConfig::new(Coupler::new(CouplingMode::WorstCase), Scheduler::cubic());
        train.steps = 250_000;
        train.batch_size = 64;
        train.lr = 0.1;
        train.lr_end = Some(1e-3);
        train.seed = seed;
        Self {
            word_len: 4,
            max_len: 8,
            buckets: 10,
            rate_shift: -2.0,
            train,
        }
    }

    pub fn words(&self) -> Result<Vec<Sequence>> {
        binary_words(self.word_len)
    }

    /// Uniform sources paired independently with uniform targets.
    pub fn source(&self) -> Result<IndependentPairs> {
        let words = self.words()?;
        IndependentPairs::new(words.clone(), words)
    }

    pub fn init_params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::tabular(Vocab::new(2)?, self.max_len, self.buckets)?;
        p.offset_rates(&self.train.scheduler, self.rate_shift)?;
        Ok(p)
    }

    pub fn run_training(&self) -> Result<TrainOutcome> {
        train(self.init_params()?, &self.source()?, &self.train)
    }

    /// Event-driven sampling; tabular rates are exact on their buckets.
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            method: Method::Gillespie { slice: 1.0 },
            max_len: self.max_len,
            seed,
            ..SamplerConfig::default()
        }
    }
}

/// Monte Carlo estimate of the generated coupling `p1(x1 | x0)` over a
/// fixed word list, with one trailing column for any other terminal string.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    pub words: Vec<Sequence>,
    /// `counts[row][col]`, `col == words.len()` being "other".
    pub counts: Vec<Vec<usize>>,
    pub per_row: usize,
    pub total_edits: usize,
}

impl CouplingTable {
    /// Row `r` simulates `per_row` trajectories from `words[r]` on RNG
    /// streams `r * per_row ..`.
    pub fn estimate(
        model: &dyn RateModel,
        words: &[Sequence],
        per_row: usize,
        cfg: &SamplerConfig,
        exec: Exec,
    ) -> Result<Self> {
        let k = words.len();
        let mut counts = vec![vec![0usize; k + 1]; k];
        let mut total_edits = 0;
        for (r, x0) in words.iter().enumerate() {
            let runs = run_many(
                model,
                None,
                &|_| x0.clone(),
                cfg,
                per_row,
                (r * per_row) as u64,
                false,
                exec,
            )?;
            for out in runs {
                total_edits += out.num_edits;
                let col = words
                    .iter()
                    .position(|w| w.content() == out.x.content())
                    .unwrap_or(k);
                counts[r][col] += 1;
            }
        }
        Ok(Self {
            words: words.to_vec(),
            counts,
            per_row,
            total_edits,
        })
    }

    pub fn prob(&self, row: usize, col: usize) -> f64 {
        if self.per_row == 0 {
            0.0
        } else {
            self.counts[row][col] as f64 / self.per_row as f64
        }
    }

    /// Terminal distribution pooled over all source rows.
    pub fn marginal(&self) -> Vec<f64> {
        let total = (self.per_row * self.counts.len()).max(1) as f64;
        (0..=self.words.len())
            .map(|c| self.counts.iter().map(|row| row[c]).sum::<usize>() as f64 / total)
            .collect()
    }

    /// Total variation of the pooled terminal distribution from uniform over
    /// the words.
    pub fn marginal_tv(&self) -> f64 {
        let u = 1.0 / self.words.len() as f64;
        let m = self.marginal();
        let (other, hits) = m.split_last().expect("other column");
        0.5 * (hits.iter().map(|p| (p - u).abs()).sum::<f64>() + other)
    }

    pub fn ratio(&self, row: usize, a: usize, b: usize) -> f64 {
        self.counts[row][a] as f64 / self.counts[row][b] as f64
    }

    pub fn mean_edits(&self) -> f64 {
        self.total_edits as f64 / (self.per_row * self.counts.len()).max(1) as f64
    }
}

/// Mean number of edits of the training alignment over all word pairs.
pub fn training_mean_edits(mode: CouplingMode, words: &[Sequence]) -> Result<f64> {
    let mut total = 0usize;
    for a in words {
        for b in words {
            total += align(mode, a, b)?.disagreements();
        }
    }
    Ok(total as f64 / (words.len() * words.len()).max(1) as f64)
}
