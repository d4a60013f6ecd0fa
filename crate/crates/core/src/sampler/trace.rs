use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{EditOp, Sequence, Token, Vocab};

/// One entry of a generation trace: the state after `step` at time `t`.
///
/// `edits` are the forward edits of the step, all addressed to the previous
/// state and applied simultaneously; `corrector_edits` are then applied the
/// same way to the intermediate state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub t: f64,
    pub edits: Vec<EditOp>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corrector_edits: Vec<EditOp>,
    /// Content tokens of the resulting state (BOS omitted).
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationTrace {
    pub records: Vec<TraceRecord>,
}

impl GenerationTrace {
    pub fn start(x0: &Sequence) -> Self {
        Self {
            records: vec![TraceRecord {
                step: 0,
                t: 0.0,
                edits: Vec::new(),
                corrector_edits: Vec::new(),
                tokens: x0.content().to_vec(),
            }],
        }
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn initial(&self, vocab: Vocab) -> Result<Sequence> {
        let first = self
            .records
            .first()
            .ok_or_else(|| Error::Trace("empty trace".into()))?;
        Sequence::new(vocab, &first.tokens)
    }

    pub fn final_state(&self, vocab: Vocab) -> Result<Sequence> {
        let last = self
            .records
            .last()
            .ok_or_else(|| Error::Trace("empty trace".into()))?;
        Sequence::new(vocab, &last.tokens)
    }

    /// Total number of edits over the trace.
    pub fn num_edits(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.edits.len() + r.corrector_edits.len())
            .sum()
    }

    /// Content lengths along the trace.
    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.tokens.len())
    }

    /// Replays every step from the first record and checks each recorded
    /// state; returns the final state.
    pub fn replay(&self, vocab: Vocab) -> Result<Sequence> {
        let mut x = self.initial(vocab)?;
        let mut last_t = f64::NEG_INFINITY;
        for rec in &self.records {
            if rec.t <= last_t {
                return Err(Error::Trace(format!(
                    "time does not increase at step {}",
                    rec.step
                )));
            }
            last_t = rec.t;
            if rec.step > 0 {
                x = x.apply_simultaneous(&rec.edits)?;
                if !rec.corrector_edits.is_empty() {
                    x = x.apply_simultaneous(&rec.corrector_edits)?;
                }
            }
            if x.content() != rec.tokens.as_slice() {
                return Err(Error::Trace(format!(
                    "replay diverges at step {}",
                    rec.step
                )));
            }
        }
        Ok(x)
    }
}

#[derive(Serialize, Deserialize)]
struct Line<'a> {
    trace: usize,
    #[serde(flatten)]
    record: std::borrow::Cow<'a, TraceRecord>,
}

/// Writes traces as newline-delimited JSON, one record per line tagged with
/// its trace index.
pub fn write_traces<W: Write>(traces: &[GenerationTrace], first_id: usize, mut w: W) -> Result<()> {
    for (i, trace) in traces.iter().enumerate() {
        for rec in &trace.records {
            let line = Line {
                trace: first_id + i,
                record: std::borrow::Cow::Borrowed(rec),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads traces written by [`write_traces`]; lines without a `trace` field
/// (headers) are skipped.
pub fn read_traces<R: BufRead>(r: R) -> Result<Vec<GenerationTrace>> {
    let mut traces: Vec<GenerationTrace> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)?;
        if value.get("trace").is_none() {
            continue;
        }
        let parsed: Line<'static> = serde_json::from_value(value)?;
        let id = parsed.trace;
        if id >= traces.len() {
            traces.resize_with(id + 1, GenerationTrace::default);
        }
        traces[id].records.push(parsed.record.into_owned());
    }
    Ok(traces)
}
