//! Plain-text parameter checkpoints.
//!
//! ```text
//! editflow-checkpoint v1
//! kind tabular            (or: kind featurized)
//! vocab <M>
//! max_len <L>             (tabular only)
//! buckets <B>             (tabular only)
//! params <P>
//! <value 1>
//! ...
//! <value P>
//! ```
//!
//! Values are written in Rust's shortest round-trip decimal form, so a
//! save/load cycle is bit-exact. Lines starting with `#` are ignored on load.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::params::{ModelKind, ModelParams};
use crate::error::{Error, Result};
use crate::sequence::Vocab;

const MAGIC: &str = "editflow-checkpoint v1";

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    match params.kind() {
        ModelKind::Tabular { max_len, buckets } => {
            writeln!(w, "kind tabular")?;
            writeln!(w, "vocab {}", params.vocab().size())?;
            writeln!(w, "max_len {max_len}")?;
            writeln!(w, "buckets {buckets}")?;
        }
        ModelKind::Featurized => {
            writeln!(w, "kind featurized")?;
            writeln!(w, "vocab {}", params.vocab().size())?;
        }
    }
    writeln!(w, "params {}", params.len())?;
    for v in params.values() {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<ModelParams> {
    let mut lines = BufReader::new(r)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.starts_with('#') || s.trim().is_empty()));
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?
            .map_err(Error::from)
    };
    if next()?.trim() != MAGIC {
        return Err(Error::Checkpoint("missing checkpoint header".into()));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = next()?;
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| Error::Checkpoint(format!("malformed line `{line}`")))?;
        if key != name {
            return Err(Error::Checkpoint(format!(
                "expected `{name}`, found `{key}`"
            )));
        }
        Ok(value.trim().to_string())
    };
    let num = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Checkpoint(format!("`{s}` is not a count")))
    };
    let kind_name = field("kind")?;
    let vocab = Vocab::new(num(field("vocab")?)?)?;
    let kind = match kind_name.as_str() {
        "tabular" => ModelKind::Tabular {
            max_len: num(field("max_len")?)?,
            buckets: num(field("buckets")?)?,
        },
        "featurized" => ModelKind::Featurized,
        other => return Err(Error::Checkpoint(format!("unknown model kind `{other}`"))),
    };
    let count = num(field("params")?)?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next()?;
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|_| Error::Checkpoint(format!("`{line}` is not a number")))?,
        );
    }
    ModelParams::from_values(vocab, kind, values)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(params, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    read_checkpoint(std::fs::File::open(path)?)
}
