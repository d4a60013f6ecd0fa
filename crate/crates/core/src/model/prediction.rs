use crate::error::{Error, Result};
use crate::sequence::{EditOp, Sequence};

/// Edit rates out of one state.
///
/// Insertion arrays have one entry per anchor `0..=n`; deletion and
/// substitution arrays use the same indexing with entry `0` (BOS) fixed at
/// zero. `q_ins` and `q_sub` are row-major `(n + 1) x M` tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePrediction {
    pub n: usize,
    pub m: usize,
    pub lam_ins: Vec<f64>,
    pub lam_del: Vec<f64>,
    pub lam_sub: Vec<f64>,
    pub q_ins: Vec<f64>,
    pub q_sub: Vec<f64>,
}

impl RatePrediction {
    /// All rates and all distribution entries zero.
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            lam_ins: vec![0.0; n + 1],
            lam_del: vec![0.0; n + 1],
            lam_sub: vec![0.0; n + 1],
            q_ins: vec![0.0; (n + 1) * m],
            q_sub: vec![0.0; (n + 1) * m],
        }
    }

    /// Zero rates with uniform insertion rows and substitution rows that are
    /// uniform over the tokens differing from `x`.
    pub fn silent(x: &Sequence) -> Self {
        let (n, m) = (x.len(), x.vocab().size());
        let mut p = Self::zeros(n, m);
        p.q_ins.iter_mut().for_each(|q| *q = 1.0 / m as f64);
        for i in 0..=n {
            let row = &mut p.q_sub[i * m..(i + 1) * m];
            if i == 0 || m == 1 {
                row.iter_mut().for_each(|q| *q = 1.0 / m as f64);
            } else {
                let cur = x.token(i) as usize;
                row.iter_mut()
                    .enumerate()
                    .for_each(|(a, q)| *q = if a == cur { 0.0 } else { 1.0 / (m - 1) as f64 });
            }
        }
        p
    }

    pub fn q_ins_row(&self, i: usize) -> &[f64] {
        &self.q_ins[i * self.m..(i + 1) * self.m]
    }

    pub fn q_sub_row(&self, i: usize) -> &[f64] {
        &self.q_sub[i * self.m..(i + 1) * self.m]
    }

    pub fn q_ins_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.q_ins[i * self.m..(i + 1) * self.m]
    }

    pub fn q_sub_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.q_sub[i * self.m..(i + 1) * self.m]
    }

    /// Total rate of leaving the current state; the diagonal of the rate
    /// matrix is its negation.
    pub fn exit_rate(&self) -> f64 {
        self.lam_ins.iter().sum::<f64>()
            + self.lam_del.iter().sum::<f64>()
            + self.lam_sub.iter().sum::<f64>()
    }

    /// Rate of one specific edit.
    pub fn rate_of_edit(&self, op: &EditOp) -> Result<f64> {
        let n = self.n;
        let check_tok = |token: u32| -> Result<usize> {
            if (token as usize) < self.m {
                Ok(token as usize)
            } else {
                Err(Error::InvalidToken {
                    token,
                    size: self.m,
                })
            }
        };
        match *op {
            EditOp::Insert { pos, token } => {
                if pos > n {
                    return Err(Error::AnchorOutOfRange { pos, len: n });
                }
                Ok(self.lam_ins[pos] * self.q_ins_row(pos)[check_tok(token)?])
            }
            EditOp::Delete { pos } | EditOp::Substitute { pos, .. } if pos == 0 => {
                Err(Error::ImmutableBos)
            }
            EditOp::Delete { pos } | EditOp::Substitute { pos, .. } if pos > n => {
                Err(Error::AnchorOutOfRange { pos, len: n })
            }
            EditOp::Delete { pos } => Ok(self.lam_del[pos]),
            EditOp::Substitute { pos, token } => {
                Ok(self.lam_sub[pos] * self.q_sub_row(pos)[check_tok(token)?])
            }
        }
    }

    /// Checks the rate conditions: finite non-negative rates, zero BOS
    /// deletion and substitution, and distribution rows summing to one.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let bad = |what: &str| Err(Error::Unsupported(format!("invalid prediction: {what}")));
        let expect = self.n + 1;
        if self.lam_ins.len() != expect
            || self.lam_del.len() != expect
            || self.lam_sub.len() != expect
            || self.q_ins.len() != expect * self.m
            || self.q_sub.len() != expect * self.m
        {
            return bad("shape mismatch");
        }
        let rates = self
            .lam_ins
            .iter()
            .chain(&self.lam_del)
            .chain(&self.lam_sub);
        if rates.clone().any(|&l| !l.is_finite() || l < 0.0) {
            return bad("negative or non-finite rate");
        }
        if self.lam_del[0] != 0.0 || self.lam_sub[0] != 0.0 {
            return bad("BOS has a deletion or substitution rate");
        }
        for i in 0..=self.n {
            for row in [self.q_ins_row(i), self.q_sub_row(i)] {
                if row.iter().any(|&q| !(q >= 0.0)) {
                    return bad("negative distribution entry");
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > tol {
                    return bad("distribution row does not sum to one");
                }
            }
        }
        Ok(())
    }
}
