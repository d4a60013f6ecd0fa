use crate::error::{Error, Result};
use crate::sequence::{EditOp, Sequence, Token, Vocab};

/// Largest state space the oracles will enumerate.
pub const SPACE_CAP: usize = 2000;

/// All sequences of length at most `max_len` over `M` tokens.
///
/// States are ordered by length, then lexicographically; index arithmetic is
/// closed-form so lookups need no hashing.
#[derive(Debug, Clone)]
pub struct EnumeratedSpace {
    vocab: Vocab,
    max_len: usize,
    offsets: Vec<usize>,
    states: Vec<Vec<Token>>,
}

impl EnumeratedSpace {
    pub fn new(m: usize, max_len: usize) -> Result<Self> {
        let vocab = Vocab::new(m)?.with_max_len(max_len);
        let mut size = 0usize;
        let mut count = 1usize;
        let mut offsets = Vec::with_capacity(max_len + 1);
        for _ in 0..=max_len {
            offsets.push(size);
            size = size.saturating_add(count);
            if size > SPACE_CAP {
                return Err(Error::SpaceTooLarge {
                    size,
                    cap: SPACE_CAP,
                });
            }
            count = count.saturating_mul(m);
        }
        let mut states = Vec::with_capacity(size);
        for n in 0..=max_len {
            let count = m.pow(n as u32);
            for rank in 0..count {
                let mut s = vec![0 as Token; n];
                let mut r = rank;
                for slot in s.iter_mut().rev() {
                    *slot = (r % m) as Token;
                    r /= m;
                }
                states.push(s);
            }
        }
        Ok(Self {
            vocab,
            max_len,
            offsets,
            states,
        })
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Content tokens of state `i`.
    pub fn content(&self, i: usize) -> &[Token] {
        &self.states[i]
    }

    pub fn sequence(&self, i: usize) -> Sequence {
        Sequence::new(self.vocab, &self.states[i]).expect("enumerated states are valid")
    }

    pub fn index_of(&self, content: &[Token]) -> Option<usize> {
        if content.len() > self.max_len {
            return None;
        }
        let m = self.vocab.size();
        let mut rank = 0usize;
        for &tok in content {
            if tok as usize >= m {
                return None;
            }
            rank = rank * m + tok as usize;
        }
        Some(self.offsets[content.len()] + rank)
    }

    pub fn index_of_sequence(&self, x: &Sequence) -> Option<usize> {
        if x.vocab().size() != self.vocab.size() {
            return None;
        }
        self.index_of(x.content())
    }

    /// One-edit neighbours of state `i` that stay inside the space.
    pub fn neighbors(&self, i: usize) -> Vec<(EditOp, usize)> {
        self.sequence(i)
            .neighbors()
            .into_iter()
            .filter_map(|(op, y)| self.index_of(y.content()).map(|j| (op, j)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_indexing() {
        let s = EnumeratedSpace::new(2, 2).unwrap();
        assert_eq!(s.len(), 7);
        for i in 0..s.len() {
            assert_eq!(s.index_of(s.content(i)), Some(i));
        }
        assert_eq!(
            EnumeratedSpace::new(3, 4).unwrap().len(),
            1 + 3 + 9 + 27 + 81
        );
        assert!(matches!(
            EnumeratedSpace::new(2, 11),
            Err(Error::SpaceTooLarge { .. })
        ));
    }

    #[test]
    fn neighbor_relation_is_symmetric() {
        let s = EnumeratedSpace::new(2, 3).unwrap();
        for i in 0..s.len() {
            for (_, j) in s.neighbors(i) {
                assert!(s.neighbors(j).iter().any(|&(_, k)| k == i), "{i} -> {j}");
            }
        }
    }
}
