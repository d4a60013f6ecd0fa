//! The alignment space: sequences over tokens plus a blank, and the coupling
//! constructions that pair a source with a target sequence.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{EditOp, Sequence, Token, Vocab};

/// One alignment cell; `None` is the blank.
pub type Cell = Option<Token>;

/// A fixed-length list of cells whose first cell is BOS.
///
/// Like [`Sequence`], comparisons ignore the vocabulary's length cap.
#[derive(Debug, Clone)]
pub struct AlignedSequence {
    vocab: Vocab,
    cells: Vec<Cell>,
}

impl AlignedSequence {
    pub fn new(vocab: Vocab, cells: Vec<Cell>) -> Result<Self> {
        if cells.first() != Some(&Some(vocab.bos())) {
            return Err(Error::MalformedAlignment("first cell must be BOS".into()));
        }
        for cell in &cells[1..] {
            if let Some(tok) = *cell {
                vocab.check_content(tok)?;
            }
        }
        Ok(Self { vocab, cells })
    }

    pub(crate) fn from_cells_unchecked(vocab: Vocab, cells: Vec<Cell>) -> Self {
        Self { vocab, cells }
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Number of blank cells.
    pub fn num_blanks(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    /// Strips every blank, preserving order.
    pub fn rm_blanks(&self) -> Result<Sequence> {
        let tokens: Vec<Token> = self.cells.iter().flatten().copied().collect();
        Sequence::from_tokens(self.vocab, tokens)
    }
}

impl PartialEq for AlignedSequence {
    fn eq(&self, other: &Self) -> bool {
        self.vocab.size() == other.vocab.size() && self.cells == other.cells
    }
}

impl Eq for AlignedSequence {}

impl std::hash::Hash for AlignedSequence {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.vocab.size().hash(state);
        self.cells.hash(state);
    }
}

impl fmt::Display for AlignedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, cell) in self.cells.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            match cell {
                Some(t) if *t == self.vocab.bos() => write!(f, "<bos>")?,
                Some(t) => write!(f, "{t}")?,
                None => write!(f, "_")?,
            }
        }
        Ok(())
    }
}

/// How an aligned pair was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    Optimal,
    PadRight,
    WorstCase,
    UniformX0,
}

impl CouplingMode {
    pub const ALL: [CouplingMode; 4] = [
        CouplingMode::Optimal,
        CouplingMode::PadRight,
        CouplingMode::WorstCase,
        CouplingMode::UniformX0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CouplingMode::Optimal => "optimal",
            CouplingMode::PadRight => "pad_right",
            CouplingMode::WorstCase => "worst_case",
            CouplingMode::UniformX0 => "uniform_x0",
        }
    }
}

impl std::str::FromStr for CouplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CouplingMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown coupling mode `{s}`")))
    }
}

/// Two aligned sequences of equal length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignedPair {
    pub z0: AlignedSequence,
    pub z1: AlignedSequence,
    pub mode: CouplingMode,
}

impl AlignedPair {
    pub fn new(z0: AlignedSequence, z1: AlignedSequence, mode: CouplingMode) -> Result<Self> {
        if z0.len() != z1.len() {
            return Err(Error::MalformedAlignment(format!(
                "aligned lengths differ: {} vs {}",
                z0.len(),
                z1.len()
            )));
        }
        if z0.vocab().size() != z1.vocab().size() {
            return Err(Error::MalformedAlignment("vocabularies differ".into()));
        }
        Ok(Self { z0, z1, mode })
    }

    pub fn len(&self) -> usize {
        self.z0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z0.is_empty()
    }

    /// Number of cells where the two sides differ.
    pub fn disagreements(&self) -> usize {
        self.cells().filter(|(a, b)| a != b).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, Cell)> + '_ {
        self.z0
            .cells
            .iter()
            .copied()
            .zip(self.z1.cells.iter().copied())
    }

    /// The same alignment read in the opposite direction.
    pub fn swapped(&self) -> Self {
        Self {
            z0: self.z1.clone(),
            z1: self.z0.clone(),
            mode: self.mode,
        }
    }

    /// Edits that turn `rm_blanks(z0)` into `rm_blanks(z1)` when applied one
    /// after another in the returned order.
    pub fn edit_script(&self) -> Vec<EditOp> {
        let mut ops = Vec::new();
        let mut pos = 0usize;
        for (a, b) in self.cells().skip(1) {
            match (a, b) {
                (None, None) => {}
                (None, Some(token)) => {
                    ops.push(EditOp::Insert { pos, token });
                    pos += 1;
                }
                (Some(_), None) => ops.push(EditOp::Delete { pos: pos + 1 }),
                (Some(x), Some(y)) => {
                    if x != y {
                        ops.push(EditOp::Substitute {
                            pos: pos + 1,
                            token: y,
                        });
                    }
                    pos += 1;
                }
            }
        }
        ops
    }
}

fn pair_from_cells(vocab: Vocab, c0: Vec<Cell>, c1: Vec<Cell>, mode: CouplingMode) -> AlignedPair {
    AlignedPair {
        z0: AlignedSequence::from_cells_unchecked(vocab, c0),
        z1: AlignedSequence::from_cells_unchecked(vocab, c1),
        mode,
    }
}

fn check_same_vocab(x0: &Sequence, x1: &Sequence) -> Result<Vocab> {
    if x0.vocab().size() != x1.vocab().size() {
        return Err(Error::Config("sequences use different vocabularies".into()));
    }
    Ok(x0
        .vocab()
        .with_max_len(x0.vocab().max_len().max(x1.vocab().max_len())))
}

/// Minimum edit-distance alignment.
///
/// Ties are broken deterministically, preferring a substitution (or match)
/// over a deletion over an insertion, scanning from the left.
pub fn align_optimal(x0: &Sequence, x1: &Sequence) -> Result<AlignedPair> {
    let vocab = check_same_vocab(x0, x1)?;
    let a = x0.content();
    let b = x1.content();
    let (n, m) = (a.len(), b.len());
    // d[i][j]: distance between suffixes a[i..] and b[j..].
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            d[i * w + j] = if i == n {
                m - j
            } else if j == m {
                n - i
            } else {
                let diag = d[(i + 1) * w + j + 1] + usize::from(a[i] != b[j]);
                let del = d[(i + 1) * w + j] + 1;
                let ins = d[i * w + j + 1] + 1;
                diag.min(del).min(ins)
            };
        }
    }
    let bos = Some(vocab.bos());
    let mut c0 = vec![bos];
    let mut c1 = vec![bos];
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = d[i * w + j];
        if i < n && j < m && d[(i + 1) * w + j + 1] + usize::from(a[i] != b[j]) == here {
            c0.push(Some(a[i]));
            c1.push(Some(b[j]));
            i += 1;
            j += 1;
        } else if i < n && d[(i + 1) * w + j] + 1 == here {
            c0.push(Some(a[i]));
            c1.push(None);
            i += 1;
        } else {
            c0.push(None);
            c1.push(Some(b[j]));
            j += 1;
        }
    }
    Ok(pair_from_cells(vocab, c0, c1, CouplingMode::Optimal))
}

/// Positional alignment, padding the shorter side with blanks on the right.
pub fn align_pad_right(x0: &Sequence, x1: &Sequence) -> Result<AlignedPair> {
    let vocab = check_same_vocab(x0, x1)?;
    let len = x0.num_positions().max(x1.num_positions());
    let pad = |x: &Sequence| -> Vec<Cell> {
        let mut cells: Vec<Cell> = x.tokens().iter().map(|&t| Some(t)).collect();
        cells.resize(len, None);
        cells
    };
    Ok(pair_from_cells(
        vocab,
        pad(x0),
        pad(x1),
        CouplingMode::PadRight,
    ))
}

/// Delete everything in `x0`, then insert everything in `x1`.
pub fn align_worst_case(x0: &Sequence, x1: &Sequence) -> Result<AlignedPair> {
    let vocab = check_same_vocab(x0, x1)?;
    let bos = Some(vocab.bos());
    let mut c0 = vec![bos];
    let mut c1 = vec![bos];
    c0.extend(x0.content().iter().map(|&t| Some(t)));
    c1.extend(std::iter::repeat_n(None, x0.len()));
    c0.extend(std::iter::repeat_n(None, x1.len()));
    c1.extend(x1.content().iter().map(|&t| Some(t)));
    Ok(pair_from_cells(vocab, c0, c1, CouplingMode::WorstCase))
}

/// Deterministic couplings by mode; `UniformX0` needs randomness and is
/// rejected here.
pub fn align(mode: CouplingMode, x0: &Sequence, x1: &Sequence) -> Result<AlignedPair> {
    match mode {
        CouplingMode::Optimal => align_optimal(x0, x1),
        CouplingMode::PadRight => align_pad_right(x0, x1),
        CouplingMode::WorstCase => align_worst_case(x0, x1),
        CouplingMode::UniformX0 => Err(Error::Config(
            "uniform_x0 draws its own source; use align_uniform_x0".into(),
        )),
    }
}

/// Settings for the random-source coupling.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UniformX0 {
    pub num_delete: usize,
    pub num_substitute: usize,
    /// Optional unnormalized weights over tokens for drawing source tokens;
    /// uniform when absent.
    pub source: Option<Vec<f64>>,
}

/// The kinds of cell in a random-source alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Insert,
    Delete,
    Substitute,
}

impl UniformX0 {
    /// Cell-kind multiset for a target of content length `n`.
    pub fn cell_counts(&self, n: usize) -> (usize, usize, usize) {
        let num_sub = n.min(self.num_substitute);
        let num_del = self.num_delete + self.num_substitute - num_sub;
        (n - num_sub, num_del, num_sub)
    }
}

/// Draws a random source and aligns it against `x1`.
///
/// The cell kinds are shuffled uniformly; source tokens are drawn i.i.d. and
/// consumed left to right by deletion and substitution cells.
pub fn align_uniform_x0<R: Rng + ?Sized>(
    x1: &Sequence,
    cfg: &UniformX0,
    rng: &mut R,
) -> Result<AlignedPair> {
    let vocab = x1.vocab();
    let (num_ins, num_del, num_sub) = cfg.cell_counts(x1.len());
    let num_src = num_del + num_sub;
    let src: Vec<Token> = match &cfg.source {
        Some(weights) => {
            if weights.len() != vocab.size() {
                return Err(Error::Config(format!(
                    "source weights have {} entries for a vocabulary of {}",
                    weights.len(),
                    vocab.size()
                )));
            }
            let dist = WeightedIndex::new(weights)
                .map_err(|e| Error::Config(format!("source weights: {e}")))?;
            (0..num_src).map(|_| dist.sample(rng) as Token).collect()
        }
        None => (0..num_src)
            .map(|_| rng.gen_range(0..vocab.size()) as Token)
            .collect(),
    };
    let mut kinds = Vec::with_capacity(num_ins + num_src);
    kinds.extend(std::iter::repeat_n(CellKind::Insert, num_ins));
    kinds.extend(std::iter::repeat_n(CellKind::Delete, num_del));
    kinds.extend(std::iter::repeat_n(CellKind::Substitute, num_sub));
    kinds.shuffle(rng);
    let (c0, c1) = cells_from_kinds(vocab, &kinds, &src, x1.content());
    let x0_len = num_src;
    let pair_vocab = vocab.with_max_len(vocab.max_len().max(x0_len));
    Ok(pair_from_cells(pair_vocab, c0, c1, CouplingMode::UniformX0))
}

/// Builds cells from a kind arrangement, consuming `src` and `tgt` in order.
pub fn cells_from_kinds(
    vocab: Vocab,
    kinds: &[CellKind],
    src: &[Token],
    tgt: &[Token],
) -> (Vec<Cell>, Vec<Cell>) {
    let bos = Some(vocab.bos());
    let mut c0 = vec![bos];
    let mut c1 = vec![bos];
    let (mut si, mut ti) = (0, 0);
    for kind in kinds {
        match kind {
            CellKind::Delete => {
                c0.push(Some(src[si]));
                c1.push(None);
                si += 1;
            }
            CellKind::Insert => {
                c0.push(None);
                c1.push(Some(tgt[ti]));
                ti += 1;
            }
            CellKind::Substitute => {
                c0.push(Some(src[si]));
                c1.push(Some(tgt[ti]));
                si += 1;
                ti += 1;
            }
        }
    }
    (c0, c1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn word(s: &str) -> Sequence {
        let v = Vocab::new(26).unwrap();
        let content: Vec<Token> = s
            .bytes()
            .map(|b| (b.to_ascii_uppercase() - b'A') as Token)
            .collect();
        Sequence::new(v, &content).unwrap()
    }

    fn roundtrip(pair: &AlignedPair, x0: &Sequence, x1: &Sequence) {
        assert_eq!(pair.z0.rm_blanks().unwrap().content(), x0.content());
        assert_eq!(pair.z1.rm_blanks().unwrap().content(), x1.content());
        let mut x = x0.clone().with_max_len(64).unwrap();
        for op in pair.edit_script() {
            x = x.apply(&op).unwrap();
        }
        assert_eq!(x.content(), x1.content());
    }

    #[test]
    fn rm_blanks_strips_blanks() {
        let v = Vocab::new(26).unwrap();
        let z = AlignedSequence::new(v, vec![Some(v.bos()), Some(10), None, Some(8)]).unwrap();
        assert_eq!(z.rm_blanks().unwrap(), word("ki"));
        let z = AlignedSequence::new(v, vec![Some(v.bos()), None, None]).unwrap();
        assert!(z.rm_blanks().unwrap().is_empty());
        assert!(AlignedSequence::new(v, vec![None, Some(1)]).is_err());
    }

    #[test]
    fn kitten_smitten_optimal() {
        let (x0, x1) = (word("kitten"), word("smitten"));
        let pair = align_optimal(&x0, &x1).unwrap();
        assert_eq!(pair.disagreements(), 2);
        assert_eq!(
            pair.edit_script(),
            vec![
                EditOp::Substitute { pos: 1, token: 18 },
                EditOp::Insert { pos: 1, token: 12 }
            ]
        );
        roundtrip(&pair, &x0, &x1);
        let pair = align_optimal(&x0, &word("sitting")).unwrap();
        assert_eq!(pair.disagreements(), 3);
        assert_eq!(align_optimal(&x0, &x0).unwrap().disagreements(), 0);
    }

    #[test]
    fn kitten_smitten_pad_right() {
        let (x0, x1) = (word("kitten"), word("smitten"));
        let pair = align_pad_right(&x0, &x1).unwrap();
        assert_eq!(pair.len(), 8);
        let content: Vec<_> = pair.cells().skip(1).collect();
        let overlaps = content
            .iter()
            .filter(|(a, b)| a.is_some() && b.is_some())
            .count();
        let inserts = content
            .iter()
            .filter(|(a, b)| a.is_none() && b.is_some())
            .count();
        assert_eq!((overlaps, inserts), (6, 1));
        roundtrip(&pair, &x0, &x1);
        let same = align_pad_right(&word("abc"), &word("xyz")).unwrap();
        assert_eq!(same.z0.num_blanks() + same.z1.num_blanks(), 0);
    }

    #[test]
    fn kitten_smitten_worst_case() {
        let (x0, x1) = (word("kitten"), word("smitten"));
        let pair = align_worst_case(&x0, &x1).unwrap();
        assert_eq!(pair.disagreements(), 13);
        roundtrip(&pair, &x0, &x1);
        let empty = Sequence::empty(x0.vocab());
        let ins = align_worst_case(&empty, &x1).unwrap();
        assert!(ins
            .edit_script()
            .iter()
            .all(|op| matches!(op, EditOp::Insert { .. })));
        let del = align_worst_case(&x0, &empty).unwrap();
        assert!(del
            .edit_script()
            .iter()
            .all(|op| matches!(op, EditOp::Delete { .. })));
    }

    #[test]
    fn uniform_x0_degenerate_is_worst_case_from_empty() {
        let x1 = word("edit");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair = align_uniform_x0(&x1, &UniformX0::default(), &mut rng).unwrap();
        let reference = align_worst_case(&Sequence::empty(x1.vocab()), &x1).unwrap();
        assert_eq!(pair.z0.cells(), reference.z0.cells());
        assert_eq!(pair.z1.cells(), reference.z1.cells());
    }

    #[test]
    fn uniform_x0_clips_substitutions() {
        let x1 = word("ab");
        let cfg = UniformX0 {
            num_delete: 1,
            num_substitute: 5,
            source: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pair = align_uniform_x0(&x1, &cfg, &mut rng).unwrap();
        // 0 insertions, 1 + 5 - 2 deletions, 2 substitutions.
        assert_eq!(pair.len(), 1 + 4 + 2);
        let x0 = pair.z0.rm_blanks().unwrap();
        assert_eq!(x0.len(), 6);
        roundtrip(&pair, &x0, &x1);
    }
}
