//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. Every key has a default, `preset = toy` swaps in the two-letter
//! toy settings, and explicit keys always win. The value `none` stands for
//! an absent optional setting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use editflow::paths::ScheduleKind;
use editflow::toy::ToyPreset;
use sha2::{Digest, Sha256};

/// Bad flags, unknown keys or values that do not parse.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Every accepted key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("preset", "none"),
    ("seed", "0"),
    ("exec", "parallel"),
    // dataset
    ("dataset", "toy"),
    ("vocab_size", "2"),
    ("word_len", "4"),
    ("pairs", "none"),
    // model
    ("model", "tabular"),
    ("max_len", "8"),
    ("buckets", "10"),
    ("rate_shift", "none"),
    ("init_scale", "0"),
    // training
    ("coupling", "optimal"),
    ("num_delete", "0"),
    ("num_substitute", "0"),
    ("scheduler", "cubic"),
    ("path", "mixture"),
    ("lambda_prop", "none"),
    ("direction", "forward"),
    ("batch_size", "64"),
    ("steps", "1000"),
    ("lr", "0.01"),
    ("lr_end", "none"),
    ("optimizer", "adam"),
    ("cond_drop", "0.1"),
    ("delta", "0.001"),
    ("metrics", "none"),
    ("metrics_every", "1"),
    // sampling
    ("checkpoint", "none"),
    ("reverse_checkpoint", "none"),
    ("count", "none"),
    ("method", "euler"),
    ("sample_steps", "1000"),
    ("slice", "0.01"),
    ("temperature", "1"),
    ("top_p", "1"),
    ("top_k", "none"),
    ("corrector_c", "0"),
    ("corrector_a", "0"),
    ("corrector_b", "0"),
    ("sample_max_len", "0"),
    ("restriction", "none"),
    ("start", "empty"),
    ("decode", "false"),
];

fn scheduler_name(kind: ScheduleKind) -> &'static str {
    match kind {
        ScheduleKind::Linear => "linear",
        ScheduleKind::Cubic => "cubic",
    }
}

/// Overrides applied by `preset = toy`.
pub fn toy_preset() -> Vec<(&'static str, String)> {
    let p = ToyPreset::new(0);
    vec![
        ("dataset", "toy".into()),
        ("vocab_size", "2".into()),
        ("word_len", p.word_len.to_string()),
        ("model", "tabular".into()),
        ("max_len", p.max_len.to_string()),
        ("buckets", p.buckets.to_string()),
        ("rate_shift", p.rate_shift.to_string()),
        ("coupling", p.train.coupler.mode.name().into()),
        ("scheduler", scheduler_name(p.train.scheduler.kind).into()),
        ("steps", p.train.steps.to_string()),
        ("batch_size", p.train.batch_size.to_string()),
        ("lr", p.train.lr.to_string()),
        (
            "lr_end",
            p.train.lr_end.map_or("none".into(), |v| v.to_string()),
        ),
        ("metrics_every", "1000".into()),
        ("method", "gillespie".into()),
        ("slice", "1".into()),
        ("sample_max_len", p.max_len.to_string()),
        ("start", "words".into()),
    ]
}

/// Parses config text into ordered `(key, value)` pairs, rejecting unknown
/// and repeated keys.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected `key = value`", i + 1));
        };
        let (k, v) = (k.trim(), v.trim());
        check_key(k)?;
        if let Some(prev) = seen.insert(k.to_string(), i + 1) {
            return usage(format!(
                "config line {}: `{k}` already set on line {prev}",
                i + 1
            ));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn check_key(k: &str) -> Result<&'static str, UsageError> {
    KEYS.iter()
        .map(|(name, _)| *name)
        .find(|name| *name == k)
        .ok_or_else(|| UsageError(format!("unknown config key `{k}`")))
}

/// A fully resolved configuration: one value for every known key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    /// Defaults, then the preset, then the file, then `overrides`.
    pub fn resolve(
        file: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self, UsageError> {
        let explicit: Vec<_> = file.iter().chain(overrides).collect();
        let mut cfg = Self::default();
        let preset = explicit
            .iter()
            .rev()
            .find(|(k, _)| k == "preset")
            .map_or("none", |(_, v)| v.as_str());
        match preset {
            "none" => {}
            "toy" => {
                for (k, v) in toy_preset() {
                    cfg.values.insert(k, v);
                }
            }
            other => return usage(format!("unknown preset `{other}`; expected none or toy")),
        }
        for (k, v) in explicit {
            cfg.values.insert(check_key(k)?, v.clone());
        }
        Ok(cfg)
    }

    pub fn text(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key `{key}`"))
    }

    pub fn get<T>(&self, key: &str) -> Result<T, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self.text(key);
        raw.parse()
            .map_err(|e| UsageError(format!("config key `{key}` = `{raw}`: {e}")))
    }

    /// `None` for the literal value `none`.
    pub fn opt<T>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if self.text(key) == "none" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// Sorted `key = value` lines; the hashed form of the config.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn parses_comments_and_whitespace() {
        let got = parse("# hi\n\n steps = 5 \nlr=0.5\n").unwrap();
        assert_eq!(got, pairs(&[("steps", "5"), ("lr", "0.5")]));
    }

    #[test]
    fn rejects_unknown_repeated_and_malformed_lines() {
        assert!(parse("stpes = 5")
            .unwrap_err()
            .0
            .contains("unknown config key `stpes`"));
        assert!(parse("steps = 5\nsteps = 6")
            .unwrap_err()
            .0
            .contains("already set on line 1"));
        assert!(parse("steps 5").unwrap_err().0.contains("line 1"));
        assert!(RunConfig::resolve(&[], &pairs(&[("bogus", "1")])).is_err());
    }

    #[test]
    fn explicit_keys_beat_the_preset() {
        let cfg = RunConfig::resolve(&pairs(&[("preset", "toy"), ("steps", "7")]), &[]).unwrap();
        assert_eq!(cfg.get::<usize>("steps").unwrap(), 7);
        assert_eq!(cfg.text("coupling"), "worst_case");
        assert_eq!(cfg.get::<f64>("lr").unwrap(), 0.1);
        assert!(RunConfig::resolve(&pairs(&[("preset", "big")]), &[]).is_err());
    }

    #[test]
    fn typed_access_reports_the_key() {
        let cfg = RunConfig::resolve(&pairs(&[("steps", "many")]), &[]).unwrap();
        assert!(cfg.get::<usize>("steps").unwrap_err().0.contains("`steps`"));
        assert_eq!(cfg.opt::<usize>("top_k").unwrap(), None);
    }

    #[test]
    fn hash_tracks_every_value() {
        let a = RunConfig::default();
        assert_eq!(a.sha256(), RunConfig::resolve(&[], &[]).unwrap().sha256());
        assert_eq!(a.sha256().len(), 64);
        let b = RunConfig::resolve(&[], &pairs(&[("seed", "1")])).unwrap();
        assert_ne!(a.sha256(), b.sha256());
    }
}
