//! `report.json`: resolved config, its hash, module versions, results and
//! the assertion list. No timestamps or paths, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition, e.g. `≤ 1e-6`.
    pub condition: String,
    pub pass: bool,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub results: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
    pub files: Vec<String>,
}

impl Outcome {
    pub fn result(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).expect("plain data serializes");
        self.results.insert(key.to_string(), v);
    }

    pub fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name, value, format!("≤ {bound:e}"), value <= bound);
    }

    pub fn at_least(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name, value, format!("≥ {bound}"), value >= bound);
    }

    pub fn near(&mut self, name: impl Into<String>, value: f64, target: f64, tol: f64) {
        self.push(name, value, format!("{target} ± {tol}"), (value - target).abs() <= tol);
    }

    fn push(&mut self, name: impl Into<String>, value: f64, condition: String, pass: bool) {
        self.assertions.push(Assertion {
            name: name.into(),
            value,
            condition,
            pass,
        });
    }

    pub fn failures(&self) -> Vec<String> {
        self.assertions.iter().filter(|a| !a.pass).map(|a| a.name.clone()).collect()
    }
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    config_hash: String,
    config: &'a BTreeMap<String, String>,
    versions: BTreeMap<&'static str, &'static str>,
    results: &'a BTreeMap<String, Value>,
    assertions: &'a [Assertion],
    failures: Vec<String>,
    pass: bool,
    files: &'a [String],
}

pub fn write(dir: &Path, command: &str, config: &Config, outcome: &Outcome) -> Result<()> {
    let failures = outcome.failures();
    let report = Report {
        command,
        config_hash: config.hash(),
        config: config.table(),
        versions: BTreeMap::from([
            ("fracell", fracell::VERSION),
            ("fracell-cli", env!("CARGO_PKG_VERSION")),
        ]),
        results: &outcome.results,
        assertions: &outcome.assertions,
        pass: failures.is_empty(),
        failures,
        files: &outcome.files,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    let path = dir.join("report.json");
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
