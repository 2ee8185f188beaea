//! Experiment specifications and self-contained reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::numfmt::{fmt15, parse_real, round15};

/// A scalar or a list parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    List(Vec<f64>),
}

impl ParamValue {
    /// Parses `x` or a comma-separated list `x,y,z`; entries may be
    /// symbolic multiples of pi.
    pub fn parse(text: &str) -> Result<Self> {
        if text.contains(',') {
            let items = text
                .split(',')
                .map(parse_real)
                .collect::<Result<Vec<f64>>>()?;
            Ok(ParamValue::List(items))
        } else {
            Ok(ParamValue::Scalar(parse_real(text)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub preset: String,
    pub parameters: BTreeMap<String, ParamValue>,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl ExperimentSpec {
    pub fn new(preset: impl Into<String>) -> Self {
        Self {
            preset: preset.into(),
            parameters: BTreeMap::new(),
            seed: DEFAULT_SEED,
        }
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn scalar(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), ParamValue::Scalar(value));
        self
    }

    pub fn list(mut self, key: &str, values: &[f64]) -> Self {
        self.parameters.insert(key.to_string(), ParamValue::List(values.to_vec()));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Scalar parameter or `default`.
    pub fn get_scalar(&self, key: &str, default: f64) -> Result<f64> {
        match self.parameters.get(key) {
            None => Ok(default),
            Some(ParamValue::Scalar(v)) => Ok(*v),
            Some(ParamValue::List(v)) if v.len() == 1 => Ok(v[0]),
            Some(ParamValue::List(_)) => Err(Error::ParameterOutOfRange {
                name: key.into(),
                reason: "expected a single value".into(),
            }),
        }
    }

    /// List parameter (a scalar counts as a one-element list) or `default`.
    pub fn get_list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.parameters.get(key) {
            None => default.to_vec(),
            Some(ParamValue::Scalar(v)) => vec![*v],
            Some(ParamValue::List(v)) => v.clone(),
        }
    }

    /// Parses `key=value` lines (`#` starts a comment). `preset` and `seed`
    /// are recognized; everything else becomes a parameter.
    pub fn parse_config(text: &str, base: ExperimentSpec) -> Result<Self> {
        let mut spec = base;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got '{line}'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "preset" => spec.preset = value.to_string(),
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad seed '{value}'", lineno + 1)))?
                }
                _ => {
                    let v = ParamValue::parse(value)
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                    spec.parameters.insert(key.replace('-', "_"), v);
                }
            }
        }
        Ok(spec)
    }
}

/// One verified expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: Value,
    pub observed: Value,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, expected: impl Into<Value>, observed: impl Into<Value>, tolerance: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            expected: expected.into(),
            observed: observed.into(),
            tolerance,
            pass,
        }
    }

    /// `|observed − expected| ≤ tol · |expected|`.
    pub fn rel(name: impl Into<String>, expected: f64, observed: f64, tol: f64) -> Self {
        let pass = (observed - expected).abs() <= tol * expected.abs();
        Self::new(name, expected, observed, tol, pass)
    }

    /// `observed ≤ bound`.
    pub fn at_most(name: impl Into<String>, bound: f64, observed: f64) -> Self {
        Self::new(name, bound, observed, 0.0, observed <= bound)
    }

    /// `observed ≥ bound`.
    pub fn at_least(name: impl Into<String>, bound: f64, observed: f64) -> Self {
        Self::new(name, bound, observed, 0.0, observed >= bound)
    }

    pub fn flag(name: impl Into<String>, observed: bool) -> Self {
        Self::new(name, true, observed, 0.0, observed)
    }

    /// A violation count that must be zero.
    pub fn none(name: impl Into<String>, violations: usize) -> Self {
        Self::new(name, 0, violations, 0.0, violations == 0)
    }
}

/// A named numeric table, exportable as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt15(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub mesh_sizes: Vec<f64>,
    pub node_counts: Vec<usize>,
    pub seed: u64,
    pub notes: Vec<String>,
}

/// Run-dependent data, excluded from comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub preset: String,
    pub parameters: BTreeMap<String, ParamValue>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub provenance: Provenance,
    pub metadata: Metadata,
}

/// Pretty JSON with every floating-point number rounded to 15 significant
/// digits.
pub fn rounded_json(mut value: Value) -> String {
    round_value(&mut value);
    serde_json::to_string_pretty(&value).expect("value is serializable")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if n.is_f64() {
                    *v = serde_json::Number::from_f64(round15(x)).map_or(Value::Null, Value::Number);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

impl ExperimentReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// JSON with every number rounded to 15 significant digits. Without
    /// metadata the output depends only on the spec.
    pub fn to_json(&self, with_metadata: bool) -> String {
        let mut v = serde_json::to_value(self).expect("report is serializable");
        if !with_metadata {
            if let Value::Object(map) = &mut v {
                map.remove("metadata");
            }
        }
        rounded_json(v)
    }

    /// CSV of the checks: `name,expected,observed,tolerance,pass`.
    pub fn checks_csv(&self) -> String {
        let cell = |v: &Value| match v {
            Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), fmt15),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|x| x.as_f64().map_or_else(|| x.to_string(), fmt15))
                    .collect();
                format!("\"[{}]\"", parts.join(";"))
            }
            other => other.to_string(),
        };
        let mut out = String::from("name,expected,observed,tolerance,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name,
                cell(&c.expected),
                cell(&c.observed),
                fmt15(c.tolerance),
                c.pass
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let text = "# demo\npreset = example1-halfline\nmesh_h = 1e-3\neps = 0.3, 0.2\nradius = pi/4\nseed = 7\n";
        let spec = ExperimentSpec::parse_config(text, ExperimentSpec::new("x")).unwrap();
        assert_eq!(spec.preset, "example1-halfline");
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.get_scalar("mesh_h", 0.0).unwrap(), 1e-3);
        assert_eq!(spec.get_list("eps", &[]), vec![0.3, 0.2]);
        assert_eq!(spec.get_scalar("radius", 0.0).unwrap(), std::f64::consts::FRAC_PI_4);
        assert!(ExperimentSpec::parse_config("novalue", ExperimentSpec::new("x")).is_err());
    }

    #[test]
    fn json_rounds_numbers() {
        let mut t = Table::new("t", &["a"]);
        t.push(vec![1.0 / 3.0]);
        let r = ExperimentReport {
            preset: "p".into(),
            parameters: BTreeMap::new(),
            tables: vec![t],
            checks: vec![Check::rel("c", 1.0, 1.0 + 1e-9, 1e-6)],
            provenance: Provenance {
                mesh_sizes: vec![0.1],
                node_counts: vec![3],
                seed: 1,
                notes: vec![],
            },
            metadata: Metadata { runtime_seconds: 0.5 },
        };
        let j = r.to_json(false);
        assert!(j.contains("0.333333333333333"));
        assert!(!j.contains("0.3333333333333333"));
        assert!(!j.contains("runtime_seconds"));
        assert!(r.to_json(true).contains("runtime_seconds"));
        assert!(r.checks_csv().contains("c,1,1.000000001,1e-6,true"));
    }
}
