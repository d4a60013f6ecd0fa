use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore};

use crate::alignment::{align, align_uniform_x0, AlignedPair, CouplingMode, UniformX0};
use crate::error::{Error, Result};
use crate::sequence::Sequence;

/// One draw from the data coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub x0: Sequence,
    pub x1: Sequence,
    pub cond: Option<Sequence>,
}

/// A sampler of `(x0, x1)` pairs and optional conditions.
pub trait DataSource: Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<Draw>;
}

/// `x0` and `x1` drawn independently and uniformly from two lists.
#[derive(Debug, Clone)]
pub struct IndependentPairs {
    pub sources: Vec<Sequence>,
    pub targets: Vec<Sequence>,
}

impl IndependentPairs {
    pub fn new(sources: Vec<Sequence>, targets: Vec<Sequence>) -> Result<Self> {
        if sources.is_empty() || targets.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        Ok(Self { sources, targets })
    }
}

impl DataSource for IndependentPairs {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<Draw> {
        let x0 = self.sources[rng.gen_range(0..self.sources.len())].clone();
        let x1 = self.targets[rng.gen_range(0..self.targets.len())].clone();
        Ok(Draw { x0, x1, cond: None })
    }
}

/// A finite list of weighted draws.
#[derive(Debug, Clone)]
pub struct WeightedPairs {
    items: Vec<Draw>,
    dist: WeightedIndex<f64>,
}

impl WeightedPairs {
    pub fn new(items: Vec<(Draw, f64)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        let dist = WeightedIndex::new(items.iter().map(|(_, w)| *w))
            .map_err(|e| Error::Config(format!("pair weights: {e}")))?;
        Ok(Self {
            items: items.into_iter().map(|(d, _)| d).collect(),
            dist,
        })
    }
}

impl DataSource for WeightedPairs {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<Draw> {
        Ok(self.items[self.dist.sample(rng)].clone())
    }
}

/// Turns draws into aligned pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupler {
    pub mode: CouplingMode,
    pub uniform_x0: UniformX0,
}

impl Coupler {
    pub fn new(mode: CouplingMode) -> Self {
        Self {
            mode,
            uniform_x0: UniformX0::default(),
        }
    }

    /// Aligns a draw; the random-source mode ignores `draw.x0`.
    pub fn couple(&self, draw: &Draw, rng: &mut dyn RngCore) -> Result<AlignedPair> {
        match self.mode {
            CouplingMode::UniformX0 => align_uniform_x0(&draw.x1, &self.uniform_x0, rng),
            mode => align(mode, &draw.x0, &draw.x1),
        }
    }
}
