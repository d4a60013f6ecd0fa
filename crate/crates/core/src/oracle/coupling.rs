use crate::alignment::{align, Cell, CouplingMode, UniformX0};
use crate::error::{Error, Result};
use crate::sequence::{Sequence, Token, Vocab};

use super::space::EnumeratedSpace;

/// One aligned pair with its probability. Cells exclude BOS.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub z0: Vec<Cell>,
    pub z1: Vec<Cell>,
    pub weight: f64,
}

impl Atom {
    pub fn x0(&self) -> Vec<Token> {
        strip(&self.z0)
    }

    pub fn x1(&self) -> Vec<Token> {
        strip(&self.z1)
    }

    /// Longest sequence reachable along the mixture path of this pair.
    pub fn max_intermediate_len(&self) -> usize {
        self.z0
            .iter()
            .zip(&self.z1)
            .filter(|(a, b)| a.is_some() || b.is_some())
            .count()
    }
}

pub(crate) fn strip(cells: &[Cell]) -> Vec<Token> {
    let mut out = Vec::with_capacity(cells.len());
    for t in cells.iter().flatten() {
        out.push(*t);
    }
    out
}

/// A finite coupling over aligned pairs with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCoupling {
    m: usize,
    atoms: Vec<Atom>,
}

impl WeightedCoupling {
    /// Normalizes `atoms`; zero-weight atoms are dropped.
    pub fn from_atoms(m: usize, atoms: Vec<Atom>) -> Result<Self> {
        let mut total = 0.0;
        for a in &atoms {
            if a.z0.len() != a.z1.len() {
                return Err(Error::MalformedAlignment(format!(
                    "cell counts differ: {} vs {}",
                    a.z0.len(),
                    a.z1.len()
                )));
            }
            if !(a.weight >= 0.0 && a.weight.is_finite()) {
                return Err(Error::Config(format!("atom weight {}", a.weight)));
            }
            if let Some(&t) =
                a.z0.iter()
                    .chain(&a.z1)
                    .flatten()
                    .find(|&&t| t as usize >= m)
            {
                return Err(Error::InvalidToken { token: t, size: m });
            }
            total += a.weight;
        }
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        let atoms = atoms
            .into_iter()
            .filter(|a| a.weight > 0.0)
            .map(|a| Atom {
                weight: a.weight / total,
                ..a
            })
            .collect();
        Ok(Self { m, atoms })
    }

    /// Weighted `(x0, x1)` pairs aligned by a deterministic mode.
    pub fn from_pairs(
        m: usize,
        pairs: &[(Vec<Token>, Vec<Token>, f64)],
        mode: CouplingMode,
    ) -> Result<Self> {
        let longest = pairs
            .iter()
            .map(|(a, b, _)| a.len().max(b.len()))
            .max()
            .unwrap_or(0);
        let vocab = Vocab::new(m)?.with_max_len(longest.max(1));
        let mut atoms = Vec::with_capacity(pairs.len());
        for (x0, x1, w) in pairs {
            let pair = align(mode, &Sequence::new(vocab, x0)?, &Sequence::new(vocab, x1)?)?;
            atoms.push(Atom {
                z0: pair.z0.cells()[1..].to_vec(),
                z1: pair.z1.cells()[1..].to_vec(),
                weight: *w,
            });
        }
        Self::from_atoms(m, atoms)
    }

    /// A single pair with probability one.
    pub fn point(m: usize, x0: &[Token], x1: &[Token], mode: CouplingMode) -> Result<Self> {
        Self::from_pairs(m, &[(x0.to_vec(), x1.to_vec(), 1.0)], mode)
    }

    /// Exact law of the random-source coupling for a weighted target set:
    /// every distinct arrangement of the cell-kind multiset is equally
    /// likely and source tokens are i.i.d.
    pub fn uniform_x0(m: usize, targets: &[(Vec<Token>, f64)], cfg: &UniformX0) -> Result<Self> {
        let src_p: Vec<f64> = match &cfg.source {
            Some(w) if w.len() == m => {
                let s: f64 = w.iter().sum();
                if !(s > 0.0) {
                    return Err(Error::Config("source weights sum to zero".into()));
                }
                w.iter().map(|v| v / s).collect()
            }
            Some(w) => {
                return Err(Error::Config(format!(
                    "source weights have {} entries for a vocabulary of {m}",
                    w.len()
                )))
            }
            None => vec![1.0 / m as f64; m],
        };
        let mut atoms = Vec::new();
        for (x1, w) in targets {
            let (ni, nd, ns) = cfg.cell_counts(x1.len());
            let arrangements = arrangements(ni, nd, ns);
            let n_src = nd + ns;
            let n_words = m.checked_pow(n_src as u32).ok_or(Error::SpaceTooLarge {
                size: usize::MAX,
                cap: super::SPACE_CAP,
            })?;
            if arrangements.len().saturating_mul(n_words) > 1 << 20 {
                return Err(Error::SpaceTooLarge {
                    size: arrangements.len().saturating_mul(n_words),
                    cap: 1 << 20,
                });
            }
            let per_arrangement = w / arrangements.len() as f64;
            for kinds in &arrangements {
                for word in 0..n_words {
                    let mut src = vec![0 as Token; n_src];
                    let mut r = word;
                    let mut p = per_arrangement;
                    for s in src.iter_mut() {
                        *s = (r % m) as Token;
                        p *= src_p[r % m];
                        r /= m;
                    }
                    let mut z0 = Vec::with_capacity(kinds.len());
                    let mut z1 = Vec::with_capacity(kinds.len());
                    let (mut si, mut ti) = (0, 0);
                    for &k in kinds {
                        // 0: insertion, 1: deletion, 2: substitution
                        let a = if k == 0 {
                            None
                        } else {
                            si += 1;
                            Some(src[si - 1])
                        };
                        let b = if k == 1 {
                            None
                        } else {
                            ti += 1;
                            Some(x1[ti - 1])
                        };
                        z0.push(a);
                        z1.push(b);
                    }
                    atoms.push(Atom { z0, z1, weight: p });
                }
            }
        }
        Self::from_atoms(m, atoms)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn max_intermediate_len(&self) -> usize {
        self.atoms
            .iter()
            .map(Atom::max_intermediate_len)
            .max()
            .unwrap_or(0)
    }

    /// Smallest enumerated space containing every path state.
    pub fn space(&self) -> Result<EnumeratedSpace> {
        EnumeratedSpace::new(self.m, self.max_intermediate_len())
    }

    /// Roles of source and target exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            m: self.m,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    z0: a.z1.clone(),
                    z1: a.z0.clone(),
                    weight: a.weight,
                })
                .collect(),
        }
    }

    pub fn source_distribution(&self, space: &EnumeratedSpace) -> Result<Vec<f64>> {
        self.marginal(space, |a| a.x0())
    }

    pub fn target_distribution(&self, space: &EnumeratedSpace) -> Result<Vec<f64>> {
        self.marginal(space, |a| a.x1())
    }

    fn marginal(
        &self,
        space: &EnumeratedSpace,
        f: impl Fn(&Atom) -> Vec<Token>,
    ) -> Result<Vec<f64>> {
        let mut p = vec![0.0; space.len()];
        for a in &self.atoms {
            let i = space.index_of(&f(a)).ok_or(Error::StateOutsideSpace)?;
            p[i] += a.weight;
        }
        Ok(p)
    }
}

/// Distinct orderings of a multiset with `a` zeros, `b` ones and `c` twos.
fn arrangements(a: usize, b: usize, c: usize) -> Vec<Vec<u8>> {
    fn rec(left: [usize; 3], cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if left.iter().all(|&k| k == 0) {
            out.push(cur.clone());
            return;
        }
        for k in 0..3 {
            if left[k] > 0 {
                let mut next = left;
                next[k] -= 1;
                cur.push(k as u8);
                rec(next, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec([a, b, c], &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrangement_counts_are_multinomial() {
        assert_eq!(arrangements(2, 1, 1).len(), 12);
        assert_eq!(arrangements(0, 0, 0).len(), 1);
        assert_eq!(arrangements(3, 0, 0).len(), 1);
    }

    #[test]
    fn uniform_x0_marginals() {
        let cfg = UniformX0 {
            num_delete: 1,
            num_substitute: 1,
            source: None,
        };
        let c = WeightedCoupling::uniform_x0(2, &[(vec![0, 1], 0.5), (vec![], 0.5)], &cfg).unwrap();
        let space = c.space().unwrap();
        let src = c.source_distribution(&space).unwrap();
        // sources always have two tokens, uniformly distributed
        for (i, p) in src.iter().enumerate() {
            let expect = if space.content(i).len() == 2 {
                0.25
            } else {
                0.0
            };
            assert!((p - expect).abs() < 1e-12);
        }
        let tgt = c.target_distribution(&space).unwrap();
        assert!((tgt[space.index_of(&[0, 1]).unwrap()] - 0.5).abs() < 1e-12);
        assert!((tgt[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weights_are_normalized() {
        let c = WeightedCoupling::from_pairs(
            2,
            &[(vec![], vec![0], 2.0), (vec![1], vec![], 6.0)],
            CouplingMode::Optimal,
        )
        .unwrap();
        let w: Vec<f64> = c.atoms().iter().map(|a| a.weight).collect();
        assert_eq!(w, vec![0.25, 0.75]);
    }
}
