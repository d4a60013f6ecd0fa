use rand::Rng;

use super::propagation::{effective_weights, sample_propagation, PropagationState};
use super::schedule::Scheduler;
use crate::alignment::{AlignedPair, AlignedSequence, Cell};
use crate::error::{check_unit, Error, Result};
use crate::sequence::{EditOp, Sequence};

/// One draw from the conditional path given an aligned pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub pair: AlignedPair,
    pub z_t: AlignedSequence,
    pub x_t: Sequence,
    /// Loss weight per cell; only cells disagreeing with `z1` contribute.
    pub weights: Vec<f64>,
    /// Position in `x_t` of each non-blank cell of `z_t`.
    pub cell_to_xpos: Vec<Option<usize>>,
    pub propagation: Option<PropagationState>,
}

/// A pending transition of the conditional process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondRate {
    pub cell: usize,
    pub target: Cell,
    pub rate: f64,
    pub op: EditOp,
}

fn xpos_map(z: &AlignedSequence) -> Vec<Option<usize>> {
    let mut next = 0usize;
    z.cells()
        .iter()
        .map(|c| {
            c.map(|_| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Edits on `rm_blanks(z_t)` that move each disagreeing cell to its target,
/// weighted per cell.
fn cell_edits(z_t: &AlignedSequence, z1: &AlignedSequence, weights: &[f64]) -> Vec<CondRate> {
    let mut out = Vec::new();
    let mut last_xpos = 0usize;
    for (i, (&cur, &tgt)) in z_t.cells().iter().zip(z1.cells()).enumerate() {
        if cur != tgt {
            let op = match (cur, tgt) {
                (None, Some(token)) => EditOp::Insert {
                    pos: last_xpos,
                    token,
                },
                (Some(_), None) => EditOp::Delete { pos: last_xpos + 1 },
                (Some(_), Some(token)) => EditOp::Substitute {
                    pos: last_xpos + 1,
                    token,
                },
                (None, None) => unreachable!("equal cells are skipped"),
            };
            out.push(CondRate {
                cell: i,
                target: tgt,
                rate: weights[i],
                op,
            });
        }
        if cur.is_some() && i > 0 {
            last_xpos += 1;
        }
    }
    out
}

/// The conditional rate of the mixture path at `z_t`: one entry per cell that
/// still differs from `z1`, each with rate `kappa_dot / (1 - kappa)`.
///
/// Insertions anchor at the nearest non-blank cell to their left.
pub fn conditional_rate(
    z_t: &AlignedSequence,
    z1: &AlignedSequence,
    sched: &Scheduler,
    t: f64,
) -> Result<Vec<CondRate>> {
    let t = check_unit("t", t)?;
    let rate = sched.k_rate(t);
    let weights = vec![rate; z_t.len()];
    Ok(cell_edits(z_t, z1, &weights))
}

impl PathSample {
    fn build(
        t: f64,
        pair: &AlignedPair,
        cells: Vec<Cell>,
        weights: Vec<f64>,
        propagation: Option<PropagationState>,
    ) -> Result<Self> {
        let z_t = AlignedSequence::from_cells_unchecked(pair.z0.vocab(), cells);
        let x_t = z_t.rm_blanks()?;
        let cell_to_xpos = xpos_map(&z_t);
        Ok(Self {
            t,
            pair: pair.clone(),
            z_t,
            x_t,
            weights,
            cell_to_xpos,
            propagation,
        })
    }

    /// The mixture-path sample with a given `z_t`, whose cells must each
    /// match the pair's `z0` or `z1`.
    pub fn at(pair: &AlignedPair, cells: Vec<Cell>, t: f64, sched: &Scheduler) -> Result<Self> {
        let t = check_unit("t", t)?;
        let consistent = cells.len() == pair.len()
            && pair
                .cells()
                .zip(&cells)
                .all(|((a, b), c)| *c == a || *c == b);
        if !consistent {
            return Err(Error::MalformedAlignment(
                "z_t cells must come from z0 or z1".into(),
            ));
        }
        let mut weights = vec![sched.k_rate(t); pair.len()];
        weights[0] = 0.0;
        Self::build(t, pair, cells, weights, None)
    }

    /// Edits still required to reach `z1`, each carrying its loss weight.
    pub fn targets(&self) -> Vec<CondRate> {
        cell_edits(&self.z_t, &self.pair.z1, &self.weights)
    }
}

/// Samples `z_t` cell-wise: each content cell takes `z1` with probability
/// `kappa(t)` and `z0` otherwise.
pub fn sample_zt<R: Rng + ?Sized>(
    pair: &AlignedPair,
    t: f64,
    sched: &Scheduler,
    rng: &mut R,
) -> Result<PathSample> {
    let t = check_unit("t", t)?;
    let kappa = sched.k(t);
    let cells: Vec<Cell> = pair
        .cells()
        .enumerate()
        .map(|(i, (a, b))| {
            if i == 0 {
                a
            } else if rng.gen::<f64>() < kappa {
                b
            } else {
                a
            }
        })
        .collect();
    let mut weights = vec![sched.k_rate(t); pair.len()];
    weights[0] = 0.0;
    PathSample::build(t, pair, cells, weights, None)
}

/// Samples `z_t` from the localized propagation path.
///
/// The BOS cell never participates; content cell `j` of the pair corresponds
/// to propagation index `j - 1`.
pub fn sample_zt_localized<R: Rng + ?Sized>(
    pair: &AlignedPair,
    t: f64,
    sched: &Scheduler,
    lambda_prop: f64,
    rng: &mut R,
) -> Result<PathSample> {
    let t = check_unit("t", t)?;
    let n = pair.len() - 1;
    let prop = sample_propagation(n, t, sched, lambda_prop, rng)?;
    let mask = prop.mask();
    let cells: Vec<Cell> = pair
        .cells()
        .enumerate()
        .map(|(i, (a, b))| if i > 0 && mask[i - 1] { b } else { a })
        .collect();
    let mut weights = vec![0.0];
    if n > 0 {
        weights.extend(effective_weights(&prop, sched, t)?);
    }
    PathSample::build(t, pair, cells, weights, Some(prop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{align_optimal, align_pad_right, align_worst_case};
    use crate::sequence::{Token, Vocab};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn word(s: &str) -> Sequence {
        let v = Vocab::new(26).unwrap();
        let content: Vec<Token> = s.bytes().map(|b| (b - b'a') as Token).collect();
        Sequence::new(v, &content).unwrap()
    }

    #[test]
    fn boundaries_hit_endpoints() {
        let pair = align_worst_case(&word("kitten"), &word("smitten")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = sample_zt(&pair, 0.0, &Scheduler::cubic(), &mut rng).unwrap();
        assert_eq!(s0.z_t, pair.z0);
        assert_eq!(s0.x_t, word("kitten"));
        let s1 = sample_zt(&pair, 1.0, &Scheduler::cubic(), &mut rng).unwrap();
        assert_eq!(s1.z_t, pair.z1);
        assert!(s1.targets().is_empty());
    }

    #[test]
    fn conditional_rate_values() {
        let pair = align_optimal(&word("kitten"), &word("smitten")).unwrap();
        let rates = conditional_rate(&pair.z0, &pair.z1, &Scheduler::cubic(), 0.5).unwrap();
        assert_eq!(rates.len(), 2);
        for r in &rates {
            assert!((r.rate - 0.75 / 0.875).abs() < 1e-15);
        }
        assert!(matches!(rates[0].op, EditOp::Substitute { pos: 1, .. }));
        assert!(matches!(rates[1].op, EditOp::Insert { pos: 1, .. }));
        assert!(
            conditional_rate(&pair.z1, &pair.z1, &Scheduler::cubic(), 0.5)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn targets_are_legal_edits_of_x_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pair = align_pad_right(&word("abcde"), &word("xy")).unwrap();
        for _ in 0..200 {
            let t = rng.gen::<f64>();
            let s = sample_zt(&pair, t, &Scheduler::linear(), &mut rng).unwrap();
            for target in s.targets() {
                let mut cells = s.z_t.cells().to_vec();
                cells[target.cell] = target.target;
                let expect = AlignedSequence::new(s.z_t.vocab(), cells)
                    .unwrap()
                    .rm_blanks()
                    .unwrap();
                assert_eq!(s.x_t.apply(&target.op).unwrap(), expect);
            }
        }
    }
}
