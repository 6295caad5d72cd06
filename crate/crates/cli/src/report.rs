//! Report files: a module's CSV export or a schema-versioned JSON document,
//! both stamped with the config digest.

use std::fmt::Write as _;

use rdlab::config::ReportFormat;
use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

pub struct Report {
    pub command: &'static str,
    /// False when an exact identity failed or an asserted inequality was
    /// violated.
    pub ok: bool,
    /// Headline quantities, printed as `key: value` lines.
    pub summary: Vec<(String, Value)>,
    /// The module's CSV export, header included.
    pub csv: Vec<u8>,
    pub data: Value,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            ok: true,
            summary: Vec::new(),
            csv: Vec::new(),
            data: Value::Null,
        }
    }

    pub fn line(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.summary.push((key.into(), value.into()));
    }

    pub fn file_name(&self, format: ReportFormat) -> String {
        format!("{}.{format}", self.command)
    }

    pub fn render(&self, format: ReportFormat, digest: &str) -> Vec<u8> {
        match format {
            ReportFormat::Csv => {
                let mut out =
                    format!("# rdlab report v{SCHEMA_VERSION} config={digest}\n").into_bytes();
                out.extend_from_slice(&self.csv);
                out
            }
            ReportFormat::Json => {
                let summary: Map<String, Value> = self
                    .summary
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                let doc = json!({
                    "schema_version": SCHEMA_VERSION,
                    "config_digest": digest,
                    "command": self.command,
                    "ok": self.ok,
                    "summary": summary,
                    "data": self.data,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
                s.push('\n');
                s.into_bytes()
            }
        }
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!("[{}]\n", self.command);
        for (k, v) in &self.summary {
            match v {
                Value::String(t) => writeln!(s, "{k}: {t}"),
                other => writeln!(s, "{k}: {other}"),
            }
            .expect("writing to a String");
        }
        s.push_str(if self.ok {
            "result: ok\n"
        } else {
            "result: FAILED\n"
        });
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_starts_with_digest_line() {
        let mut r = Report::new("growth");
        r.csv = b"n,ball_size\n0,1\n".to_vec();
        let text = String::from_utf8(r.render(ReportFormat::Csv, "abc")).unwrap();
        assert_eq!(text, "# rdlab report v1 config=abc\nn,ball_size\n0,1\n");
        assert_eq!(r.file_name(ReportFormat::Csv), "growth.csv");
    }

    #[test]
    fn json_is_versioned() {
        let mut r = Report::new("section");
        r.line("mismatches", 0);
        r.ok = false;
        let v: Value = serde_json::from_slice(&r.render(ReportFormat::Json, "abc")).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["config_digest"], "abc");
        assert_eq!(v["summary"]["mismatches"], 0);
        assert_eq!(v["ok"], false);
        assert!(r
            .summary_text()
            .ends_with("mismatches: 0\nresult: FAILED\n"));
    }
}
