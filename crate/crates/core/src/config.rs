//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [group]
//! descriptor = "Heisenberg"
//!
//! [radii]
//! ball = 8
//! ```
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown sections, unknown keys and repeated keys are errors.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::{Spanned, Table, Value};

use crate::group::Descriptor;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {field}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the error has no position.
    pub line: usize,
    pub field: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("expected csv or json, got '{s}'")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

/// The function whose operator norm `opnorm` estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportShape {
    Ball(usize),
    Sphere(usize),
}

impl FromStr for SupportShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.split_whitespace();
        let (Some(kind), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("expected 'ball N' or 'sphere N', got '{s}'"));
        };
        let r: usize = r.parse().map_err(|_| format!("bad radius '{r}'"))?;
        match kind {
            "ball" => Ok(Self::Ball(r)),
            "sphere" => Ok(Self::Sphere(r)),
            _ => Err(format!("expected 'ball N' or 'sphere N', got '{s}'")),
        }
    }
}

impl fmt::Display for SupportShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ball(r) => write!(f, "ball {r}"),
            Self::Sphere(r) => write!(f, "sphere {r}"),
        }
    }
}

/// The automorphism profiled by `aut-growth`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AutSpec {
    Identity,
    /// Conjugation by the named generator.
    Inner(String),
    /// `v ↦ A v` on ℤ², entries row by row.
    Linear([[i64; 2]; 2]),
}

impl FromStr for AutSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts.as_slice() {
            ["identity"] => Ok(Self::Identity),
            ["inner", g] => Ok(Self::Inner(g.to_string())),
            ["linear", a, b, c, d] => {
                let p = |v: &str| {
                    v.parse::<i64>()
                        .map_err(|_| format!("bad matrix entry '{v}'"))
                };
                Ok(Self::Linear([[p(a)?, p(b)?], [p(c)?, p(d)?]]))
            }
            _ => Err(format!(
                "expected 'identity', 'inner GEN' or 'linear A B C D', got '{s}'"
            )),
        }
    }
}

impl fmt::Display for AutSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("identity"),
            Self::Inner(g) => write!(f, "inner {g}"),
            Self::Linear([[a, b], [c, d]]) => write!(f, "linear {a} {b} {c} {d}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub descriptor: Descriptor,
    pub ball_radius: usize,
    pub section_radius: usize,
    pub aut_radius: usize,
    pub truncation: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub support: SupportShape,
    /// At most `i64::MAX`, the largest TOML integer.
    pub seed: u64,
    pub out: String,
    pub format: ReportFormat,
    pub pairs: usize,
    pub words: usize,
    pub word_length: usize,
    pub function_radius: usize,
    pub aut: AutSpec,
    /// Generator names forming the set `U`.
    pub aut_set: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            descriptor: Descriptor::new("Heisenberg"),
            ball_radius: 8,
            section_radius: 8,
            aut_radius: 10,
            truncation: 12,
            tol: 1e-9,
            max_iter: 10_000,
            support: SupportShape::Ball(1),
            seed: 1,
            out: "rdlab-out".into(),
            format: ReportFormat::Csv,
            pairs: 100,
            words: 200,
            word_length: 10,
            function_radius: 2,
            aut: AutSpec::Inner("x".into()),
            aut_set: vec!["y".into()],
        }
    }
}

type Field<T> = Option<Spanned<T>>;

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct Raw {
    group: RawGroup,
    radii: RawRadii,
    estimator: RawEstimator,
    run: RawRun,
    checks: RawChecks,
    aut: RawAut,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawGroup {
    descriptor: Field<String>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawRadii {
    ball: Field<i64>,
    section: Field<i64>,
    aut: Field<i64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawEstimator {
    m: Field<i64>,
    tol: Field<f64>,
    max_iter: Field<i64>,
    support: Field<String>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    seed: Field<i64>,
    out: Field<String>,
    format: Field<String>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawChecks {
    pairs: Field<i64>,
    words: Field<i64>,
    word_length: Field<i64>,
    function_radius: Field<i64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawAut {
    map: Field<String>,
    set: Field<Vec<String>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    let end = offset.min(text.len());
    text.as_bytes()[..end]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

/// `section.key` for the entry on `line`. Header lines give `section`.
fn field_at(text: &str, line: usize) -> String {
    let mut section = String::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if let Some(name) = l.strip_prefix('[') {
            section = name.trim_end_matches(']').trim().to_string();
            if i + 1 == line {
                return "section".into();
            }
        } else if i + 1 == line {
            let key = l.split('=').next().unwrap_or("").trim();
            return if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
        }
    }
    String::new()
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: Range<usize>, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: line_of(self.text, span.start),
            field: field.into(),
            message: message.into(),
        }
    }

    fn positive(&self, v: &Field<i64>, field: &str, default: usize) -> Result<usize, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) => match usize::try_from(*s.get_ref()) {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(self.err(
                    s.span(),
                    field,
                    format!("expected a positive integer, got {}", s.get_ref()),
                )),
            },
        }
    }

    fn parsed<T: FromStr<Err = String>>(
        &self,
        v: &Field<String>,
        field: &str,
        default: T,
    ) -> Result<T, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) => s
                .get_ref()
                .parse()
                .map_err(|e| self.err(s.span(), field, e)),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: Raw = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            ConfigError {
                line,
                field: field_at(text, line),
                message: e.message().trim().to_string(),
            }
        })?;
        let c = Ctx { text };
        let d = Self::default();
        let descriptor = match &raw.group.descriptor {
            None => d.descriptor,
            Some(s) => Descriptor::parse(s.get_ref())
                .map_err(|e| c.err(s.span(), "group.descriptor", e.to_string()))?,
        };
        let tol = match &raw.estimator.tol {
            None => d.tol,
            Some(s) if *s.get_ref() > 0.0 && s.get_ref().is_finite() => *s.get_ref(),
            Some(s) => {
                return Err(c.err(
                    s.span(),
                    "estimator.tol",
                    format!("expected a positive number, got {}", s.get_ref()),
                ))
            }
        };
        let seed = match &raw.run.seed {
            None => d.seed,
            Some(s) => u64::try_from(*s.get_ref()).map_err(|_| {
                c.err(
                    s.span(),
                    "run.seed",
                    format!("expected a non-negative integer, got {}", s.get_ref()),
                )
            })?,
        };
        let out = match &raw.run.out {
            None => d.out,
            Some(s) if s.get_ref().is_empty() => {
                return Err(c.err(s.span(), "run.out", "empty path"))
            }
            Some(s) => s.get_ref().clone(),
        };
        let aut_set = match &raw.aut.set {
            None => d.aut_set,
            Some(s) if s.get_ref().is_empty() => {
                return Err(c.err(s.span(), "aut.set", "empty set"))
            }
            Some(s) => s.get_ref().clone(),
        };
        Ok(Self {
            descriptor,
            ball_radius: c.positive(&raw.radii.ball, "radii.ball", d.ball_radius)?,
            section_radius: c.positive(&raw.radii.section, "radii.section", d.section_radius)?,
            aut_radius: c.positive(&raw.radii.aut, "radii.aut", d.aut_radius)?,
            truncation: c.positive(&raw.estimator.m, "estimator.m", d.truncation)?,
            tol,
            max_iter: c.positive(&raw.estimator.max_iter, "estimator.max_iter", d.max_iter)?,
            support: c.parsed(&raw.estimator.support, "estimator.support", d.support)?,
            seed,
            out,
            format: c.parsed(&raw.run.format, "run.format", d.format)?,
            pairs: c.positive(&raw.checks.pairs, "checks.pairs", d.pairs)?,
            words: c.positive(&raw.checks.words, "checks.words", d.words)?,
            word_length: c.positive(
                &raw.checks.word_length,
                "checks.word_length",
                d.word_length,
            )?,
            function_radius: c.positive(
                &raw.checks.function_radius,
                "checks.function_radius",
                d.function_radius,
            )?,
            aut: c.parsed(&raw.aut.map, "aut.map", d.aut)?,
            aut_set,
        })
    }

    /// The canonical TOML form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        fn int(n: usize) -> Value {
            Value::Integer(i64::try_from(n).expect("config values fit in i64"))
        }
        fn table(entries: Vec<(&str, Value)>) -> Value {
            Value::Table(
                entries
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            )
        }
        let mut t = Table::new();
        t.insert(
            "group".into(),
            table(vec![(
                "descriptor",
                Value::String(self.descriptor.to_string()),
            )]),
        );
        t.insert(
            "radii".into(),
            table(vec![
                ("ball", int(self.ball_radius)),
                ("section", int(self.section_radius)),
                ("aut", int(self.aut_radius)),
            ]),
        );
        t.insert(
            "estimator".into(),
            table(vec![
                ("m", int(self.truncation)),
                ("tol", Value::Float(self.tol)),
                ("max_iter", int(self.max_iter)),
                ("support", Value::String(self.support.to_string())),
            ]),
        );
        t.insert(
            "run".into(),
            table(vec![
                (
                    "seed",
                    Value::Integer(i64::try_from(self.seed).expect("seed is at most i64::MAX")),
                ),
                ("out", Value::String(self.out.clone())),
                ("format", Value::String(self.format.to_string())),
            ]),
        );
        t.insert(
            "checks".into(),
            table(vec![
                ("pairs", int(self.pairs)),
                ("words", int(self.words)),
                ("word_length", int(self.word_length)),
                ("function_radius", int(self.function_radius)),
            ]),
        );
        t.insert(
            "aut".into(),
            table(vec![
                ("map", Value::String(self.aut.to_string())),
                (
                    "set",
                    Value::Array(self.aut_set.iter().cloned().map(Value::String).collect()),
                ),
            ]),
        );
        toml::to_string(&t).expect("config tables serialize")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_text`], with the
    /// output directory blanked so that it does not change the reports.
    pub fn digest(&self) -> String {
        let text = Self {
            out: String::new(),
            ..self.clone()
        }
        .to_text();
        let h = Sha256::digest(text.as_bytes());
        hex::encode(&h[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(
            ExperimentConfig::parse("").unwrap(),
            ExperimentConfig::default()
        );
        assert_eq!(
            ExperimentConfig::parse("# only a comment\n\n").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_text();
        assert!(
            text.starts_with("[group]\ndescriptor = \"Heisenberg\"\n\n[radii]\n"),
            "{text}"
        );
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(other.digest(), cfg.digest());
        other.seed = cfg.seed;
        other.out = "elsewhere".into();
        assert_eq!(other.digest(), cfg.digest());
    }

    #[test]
    fn values_are_read() {
        let cfg = ExperimentConfig::parse(
            "[group]\ndescriptor = \"BS1m m=2\"\n[radii]\nball = 11\n\
             [estimator]\nsupport = \"sphere 1\"\ntol = 1e-6\n\
             [run]\nformat = \"json\"\n[aut]\nmap = \"linear 2 1 1 1\"\nset = [\"e1\", \"e2\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.descriptor.to_string(), "BS1m m=2");
        assert_eq!(cfg.ball_radius, 11);
        assert_eq!(cfg.support, SupportShape::Sphere(1));
        assert_eq!(cfg.tol, 1e-6);
        assert_eq!(cfg.format, ReportFormat::Json);
        assert_eq!(cfg.aut, AutSpec::Linear([[2, 1], [1, 1]]));
        assert_eq!(cfg.aut_set, vec!["e1", "e2"]);
    }

    fn error(text: &str) -> ConfigError {
        ExperimentConfig::parse(text).unwrap_err()
    }

    #[test]
    fn errors_carry_line_and_field() {
        let e = error("[radii]\nball = 0\n");
        assert_eq!((e.line, e.field.as_str()), (2, "radii.ball"));
        let e = error("[radii]\nball = 3\nball = 4\n");
        assert_eq!((e.line, e.field.as_str()), (3, "radii.ball"));
        let e = error("[nope]\nx = 1\n");
        assert_eq!((e.line, e.field.as_str()), (1, "section"));
        let e = error("[run]\nformat = \"xml\"\n");
        assert_eq!((e.line, e.field.as_str()), (2, "run.format"));
        let e = error("# radii\n[radii]\nradius = 3\n");
        assert_eq!((e.line, e.field.as_str()), (3, "radii.radius"));
        assert!(e.message.contains("unknown field"), "{}", e.message);
        let e = error("[estimator]\ntol = -1.0\n");
        assert_eq!((e.line, e.field.as_str()), (2, "estimator.tol"));
        let e = error("[radii]\nball = \"eight\"\n");
        assert_eq!((e.line, e.field.as_str()), (2, "radii.ball"));
        let e = error("[run]\nseed = -1\n");
        assert_eq!(e.field, "run.seed");
        let e = error("[group]\ndescriptor = \"\"\n");
        assert_eq!(e.field, "group.descriptor");
    }

    proptest! {
        #[test]
        fn parser_never_panics(text in "(\\[[a-z]{0,8}\\]|[a-z_]{0,10} ?= ?[ -~]{0,12}|#.*|\\s*)(\n(\\[[a-z]{0,8}\\]|[a-z_]{0,10} ?= ?[ -~]{0,12}))*") {
            let _ = ExperimentConfig::parse(&text);
        }

        #[test]
        fn values_round_trip(
            ball in 1usize..50,
            seed in 0..=i64::MAX as u64,
            m in 1usize..300,
            tol in 1e-15f64..1.0,
            out in "[a-z/._ \"\\\\-]{1,20}",
        ) {
            let cfg = ExperimentConfig { ball_radius: ball, seed, truncation: m, tol, out, ..ExperimentConfig::default() };
            prop_assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        }
    }
}
