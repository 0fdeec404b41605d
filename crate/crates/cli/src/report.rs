use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// One pass/fail decision. Numeric checks carry the value and the tolerance
/// it was held to; solver failures carry the library error name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Vec<String>,
    /// SHA-256 of the canonical form of every input file.
    pub input_digest: String,
    pub results: BTreeMap<String, Value>,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    /// SHA-256 over everything above except the command echo.
    pub content_digest: String,
    /// Seconds.
    pub wall_time: f64,
}

impl RunReport {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            input_digest: String::new(),
            results: BTreeMap::new(),
            residuals: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            verdicts: Vec::new(),
            content_digest: String::new(),
            wall_time: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn seal(&mut self, inputs: &[String], wall_time: f64) {
        self.input_digest = sha256(inputs.iter().map(String::as_str));
        let body = serde_json::to_string(&(&self.input_digest, &self.results, &self.residuals, &self.tolerances, &self.verdicts))
            .expect("serializable");
        self.content_digest = sha256([body.as_str()]);
        self.wall_time = wall_time;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.command.join(" "));
        let _ = writeln!(out, "input sha256 {}", self.input_digest);
        if !self.results.is_empty() {
            out.push_str("results\n");
            let mut rows = Vec::new();
            for (k, v) in &self.results {
                flatten(k, v, &mut rows);
            }
            table(&mut out, &rows);
        }
        for (title, map) in [("residuals", &self.residuals), ("tolerances", &self.tolerances)] {
            if !map.is_empty() {
                let _ = writeln!(out, "{title}");
                let rows: Vec<_> = map.iter().map(|(k, v)| (k.clone(), format!("{v:e}"))).collect();
                table(&mut out, &rows);
            }
        }
        out.push_str("verdicts\n");
        for v in &self.verdicts {
            let mark = if v.passed { "PASS" } else { "FAIL" };
            let _ = write!(out, "  {mark} {}", v.check);
            if let (Some(x), Some(t)) = (v.value, v.tolerance) {
                let _ = write!(out, "  {x:e} <= {t:e}");
            }
            if let Some(e) = &v.error {
                let _ = write!(out, "  {e}");
            }
            if let Some(d) = &v.detail {
                let _ = write!(out, "  ({d})");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "wall time {:.3} s", self.wall_time);
        out
    }
}

fn sha256<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

fn table(out: &mut String, rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        let _ = writeln!(out, "  {k:width$}  {v}");
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => n.as_f64().map(fmt_num).or_else(|| Some(n.to_string())),
        Value::String(s) => Some(s.clone()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null => Some("null".into()),
        Value::Array(a) if a.len() == 2 && a.iter().all(Value::is_f64) => {
            let (re, im) = (a[0].as_f64()?, a[1].as_f64()?);
            Some(if im == 0.0 {
                fmt_num(re)
            } else {
                format!("{}{}{}i", fmt_num(re), if im < 0.0 { "-" } else { "+" }, fmt_num(im.abs()))
            })
        }
        _ => None,
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x:.6}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.6e}")
    }
}

fn flatten(key: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    if let Some(s) = scalar(v) {
        rows.push((key.to_string(), s));
        return;
    }
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&format!("{key}.{k}"), x, rows);
            }
        }
        Value::Array(a) => {
            let parts: Option<Vec<String>> = a.iter().map(scalar).collect();
            match parts {
                Some(p) if !a.iter().any(Value::is_array) => rows.push((key.to_string(), p.join(", "))),
                _ => {
                    for (i, x) in a.iter().enumerate() {
                        flatten(&format!("{key}[{i}]"), x, rows);
                    }
                }
            }
        }
        _ => unreachable!("scalars handled above"),
    }
}
