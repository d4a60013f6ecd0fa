//! Token vocabulary, BOS-anchored sequences and the three edit operations.
//!
//! Positions are indices into the full token list, so position `0` is the BOS
//! sentinel and content tokens live at `1..=len()`. An insertion at anchor `i`
//! places the new token immediately to the right of position `i`; deletions
//! and substitutions address content positions only.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Token = u32;

/// A dense vocabulary of `size` content tokens with ids `0..size`.
///
/// The BOS sentinel uses the reserved id `size`; it is never insertable or
/// substitutable and the alignment blank has no id at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vocab {
    size: u32,
    max_len: usize,
}

impl Vocab {
    pub const DEFAULT_MAX_LEN: usize = 256;

    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size >= u32::MAX as usize {
            return Err(Error::Config(format!(
                "vocabulary size {size} is not supported"
            )));
        }
        Ok(Self {
            size: size as u32,
            max_len: Self::DEFAULT_MAX_LEN,
        })
    }

    /// Same vocabulary with a different cap on the number of content tokens.
    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn bos(&self) -> Token {
        self.size
    }

    pub fn is_content(&self, token: Token) -> bool {
        token < self.size
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> {
        0..self.size
    }

    pub(crate) fn check_content(&self, token: Token) -> Result<()> {
        if self.is_content(token) {
            Ok(())
        } else {
            Err(Error::InvalidToken {
                token,
                size: self.size(),
            })
        }
    }
}

/// A CTMC state: BOS followed by zero or more content tokens.
///
/// Equality, ordering and hashing look at the vocabulary size and the tokens
/// only; the length cap is a property of the context, not of the state.
#[derive(Debug, Clone)]
pub struct Sequence {
    vocab: Vocab,
    tokens: Vec<Token>,
}

impl Sequence {
    /// The empty sequence (BOS only).
    pub fn empty(vocab: Vocab) -> Self {
        Self {
            vocab,
            tokens: vec![vocab.bos()],
        }
    }

    /// Builds a sequence from content tokens; BOS is prepended.
    pub fn new(vocab: Vocab, content: &[Token]) -> Result<Self> {
        if content.len() > vocab.max_len() {
            return Err(Error::TooLong {
                len: content.len(),
                max: vocab.max_len(),
            });
        }
        for &tok in content {
            vocab.check_content(tok)?;
        }
        let mut tokens = Vec::with_capacity(content.len() + 1);
        tokens.push(vocab.bos());
        tokens.extend_from_slice(content);
        Ok(Self { vocab, tokens })
    }

    /// Builds a sequence from a full token list that must start with BOS.
    pub fn from_tokens(vocab: Vocab, tokens: Vec<Token>) -> Result<Self> {
        match tokens.first() {
            Some(&first) if first == vocab.bos() => {}
            _ => {
                return Err(Error::MalformedAlignment(
                    "sequence must start with BOS".into(),
                ))
            }
        }
        if tokens.len() - 1 > vocab.max_len() {
            return Err(Error::TooLong {
                len: tokens.len() - 1,
                max: vocab.max_len(),
            });
        }
        for &tok in &tokens[1..] {
            vocab.check_content(tok)?;
        }
        Ok(Self { vocab, tokens })
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    /// All tokens including the leading BOS.
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn content(&self) -> &[Token] {
        &self.tokens[1..]
    }

    /// Number of content tokens, `n(x)`.
    pub fn len(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == 1
    }

    /// Number of insertion anchors, `len() + 1`.
    pub fn num_positions(&self) -> usize {
        self.tokens.len()
    }

    pub fn token(&self, pos: usize) -> Token {
        self.tokens[pos]
    }

    /// Returns the vocabulary view with a different length cap.
    pub fn with_max_len(mut self, max_len: usize) -> Result<Self> {
        if self.len() > max_len {
            return Err(Error::TooLong {
                len: self.len(),
                max: max_len,
            });
        }
        self.vocab = self.vocab.with_max_len(max_len);
        Ok(self)
    }

    /// Validates `op` against this sequence without applying it.
    pub fn check_edit(&self, op: &EditOp) -> Result<()> {
        let n = self.len();
        match *op {
            EditOp::Insert { pos, token } => {
                if pos > n {
                    return Err(Error::AnchorOutOfRange { pos, len: n });
                }
                self.vocab.check_content(token)?;
                if n + 1 > self.vocab.max_len() {
                    return Err(Error::TooLong {
                        len: n + 1,
                        max: self.vocab.max_len(),
                    });
                }
            }
            EditOp::Delete { pos } => {
                if pos == 0 {
                    return Err(Error::ImmutableBos);
                }
                if pos > n {
                    return Err(Error::AnchorOutOfRange { pos, len: n });
                }
            }
            EditOp::Substitute { pos, token } => {
                if pos == 0 {
                    return Err(Error::ImmutableBos);
                }
                if pos > n {
                    return Err(Error::AnchorOutOfRange { pos, len: n });
                }
                self.vocab.check_content(token)?;
            }
        }
        Ok(())
    }

    /// Applies one edit, returning the new sequence.
    pub fn apply(&self, op: &EditOp) -> Result<Self> {
        self.check_edit(op)?;
        let mut tokens = self.tokens.clone();
        match *op {
            EditOp::Insert { pos, token } => tokens.insert(pos + 1, token),
            EditOp::Delete { pos } => {
                tokens.remove(pos);
            }
            EditOp::Substitute { pos, token } => tokens[pos] = token,
        }
        Ok(Self {
            vocab: self.vocab,
            tokens,
        })
    }

    /// Applies a set of edits that all refer to positions of `self`.
    ///
    /// At most one insertion per anchor and at most one deletion or
    /// substitution per position are allowed. Edits are applied from the
    /// rightmost anchor to the leftmost; at a shared anchor the insertion lands
    /// to the right of whatever the deletion or substitution left behind.
    pub fn apply_simultaneous(&self, ops: &[EditOp]) -> Result<Self> {
        let n = self.len();
        let mut inserts: Vec<Option<Token>> = vec![None; n + 1];
        let mut changes: Vec<Option<Option<Token>>> = vec![None; n + 1];
        let mut num_ins = 0usize;
        let mut num_del = 0usize;
        for op in ops {
            match *op {
                EditOp::Insert { pos, token } => {
                    if pos > n {
                        return Err(Error::AnchorOutOfRange { pos, len: n });
                    }
                    self.vocab.check_content(token)?;
                    if inserts[pos].replace(token).is_some() {
                        return Err(Error::Config(format!("two insertions at anchor {pos}")));
                    }
                    num_ins += 1;
                }
                EditOp::Delete { pos } | EditOp::Substitute { pos, .. } => {
                    if pos == 0 {
                        return Err(Error::ImmutableBos);
                    }
                    if pos > n {
                        return Err(Error::AnchorOutOfRange { pos, len: n });
                    }
                    let change = match *op {
                        EditOp::Substitute { token, .. } => {
                            self.vocab.check_content(token)?;
                            Some(token)
                        }
                        _ => {
                            num_del += 1;
                            None
                        }
                    };
                    if changes[pos].replace(change).is_some() {
                        return Err(Error::Config(format!("two edits at position {pos}")));
                    }
                }
            }
        }
        let new_len = n + num_ins - num_del;
        if new_len > self.vocab.max_len() {
            return Err(Error::TooLong {
                len: new_len,
                max: self.vocab.max_len(),
            });
        }
        let mut tokens = Vec::with_capacity(new_len + 1);
        for pos in 0..=n {
            match changes[pos] {
                None => tokens.push(self.tokens[pos]),
                Some(Some(tok)) => tokens.push(tok),
                Some(None) => {}
            }
            if let Some(tok) = inserts[pos] {
                tokens.push(tok);
            }
        }
        Ok(Self {
            vocab: self.vocab,
            tokens,
        })
    }

    /// Every legal single edit of `self`, paired with its result.
    ///
    /// Ordered by position; at each position insertions (by token) come first,
    /// then the deletion, then substitutions to every other token.
    /// Substitutions that would not change the token are excluded.
    pub fn neighbors(&self) -> Vec<(EditOp, Sequence)> {
        let n = self.len();
        let can_insert = n < self.vocab.max_len();
        let m = self.vocab.size();
        let mut out = Vec::with_capacity((n + 1) * (2 * m + 1));
        for pos in 0..=n {
            if can_insert {
                for token in self.vocab.tokens() {
                    let op = EditOp::Insert { pos, token };
                    out.push((op, self.apply_unchecked(&op)));
                }
            }
            if pos == 0 {
                continue;
            }
            let op = EditOp::Delete { pos };
            out.push((op, self.apply_unchecked(&op)));
            for token in self.vocab.tokens() {
                if token != self.tokens[pos] {
                    let op = EditOp::Substitute { pos, token };
                    out.push((op, self.apply_unchecked(&op)));
                }
            }
        }
        out
    }

    fn apply_unchecked(&self, op: &EditOp) -> Self {
        let mut tokens = self.tokens.clone();
        match *op {
            EditOp::Insert { pos, token } => tokens.insert(pos + 1, token),
            EditOp::Delete { pos } => {
                tokens.remove(pos);
            }
            EditOp::Substitute { pos, token } => tokens[pos] = token,
        }
        Self {
            vocab: self.vocab,
            tokens,
        }
    }

    /// All edits of `self` that produce the same sequence as `op`.
    ///
    /// Inserting `a` next to a run of `a`s, or deleting any member of a run,
    /// gives identical results; substitutions are always unique.
    pub fn equivalent_edits(&self, op: &EditOp) -> Vec<EditOp> {
        let n = self.len();
        match *op {
            EditOp::Insert { pos, token } => {
                let mut lo = pos;
                while lo >= 1 && self.tokens[lo] == token {
                    lo -= 1;
                }
                let mut hi = pos;
                while hi < n && self.tokens[hi + 1] == token {
                    hi += 1;
                }
                (lo..=hi)
                    .map(|p| EditOp::Insert { pos: p, token })
                    .collect()
            }
            EditOp::Delete { pos } => {
                let tok = self.tokens[pos];
                let mut lo = pos;
                while lo > 1 && self.tokens[lo - 1] == tok {
                    lo -= 1;
                }
                let mut hi = pos;
                while hi < n && self.tokens[hi + 1] == tok {
                    hi += 1;
                }
                (lo..=hi).map(|p| EditOp::Delete { pos: p }).collect()
            }
            EditOp::Substitute { .. } => vec![*op],
        }
    }
}

impl PartialEq for Sequence {
    fn eq(&self, other: &Self) -> bool {
        self.vocab.size == other.vocab.size && self.tokens == other.tokens
    }
}

impl Eq for Sequence {}

impl std::hash::Hash for Sequence {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.vocab.size.hash(state);
        self.tokens.hash(state);
    }
}

impl PartialOrd for Sequence {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Sequence {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.vocab.size, &self.tokens).cmp(&(other.vocab.size, &other.tokens))
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<bos>")?;
        for tok in self.content() {
            write!(f, " {tok}")?;
        }
        Ok(())
    }
}

/// One CTMC transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EditOp {
    Insert { pos: usize, token: Token },
    Delete { pos: usize },
    Substitute { pos: usize, token: Token },
}

impl EditOp {
    pub fn pos(&self) -> usize {
        match *self {
            EditOp::Insert { pos, .. }
            | EditOp::Delete { pos }
            | EditOp::Substitute { pos, .. } => pos,
        }
    }

    pub fn token(&self) -> Option<Token> {
        match *self {
            EditOp::Insert { token, .. } | EditOp::Substitute { token, .. } => Some(token),
            EditOp::Delete { .. } => None,
        }
    }

    /// Change in content length caused by this edit.
    pub fn length_delta(&self) -> isize {
        match self {
            EditOp::Insert { .. } => 1,
            EditOp::Delete { .. } => -1,
            EditOp::Substitute { .. } => 0,
        }
    }
}
