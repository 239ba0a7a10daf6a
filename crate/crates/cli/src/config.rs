//! Flat `key = value` configuration with command-line overrides.
//!
//! Every key has a default, so a run is fully described by the resolved
//! table; the report hashes that table, not the file it came from.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

use fracell::regularity::CampanatoMode;
use fracell::{BoundaryCondition, CoefficientSpec, Grid};

/// `(key, default, meaning)`.
const KEYS: &[(&str, &str, &str)] = &[
    ("dim", "1", "spatial dimension, 1 or 2"),
    ("nodes", "129", "nodes per axis, boundary included"),
    ("extent", "1.0", "side length of the box"),
    ("bc", "dirichlet", "dirichlet | neumann"),
    ("coefficient", "identity", "identity | constant | sine"),
    ("a11", "1.0", "constant coefficient, first diagonal entry"),
    ("a22", "1.0", "constant coefficient, second diagonal entry"),
    ("amplitude", "0.5", "sine coefficient amplitude"),
    ("frequency", "1.0", "sine coefficient frequency"),
    ("s", "0.5", "fractional power in (0, 1)"),
    ("rhs", "sine", "one | sine | random | spike | indicator"),
    ("alpha", "0.2", "Hölder exponent of the spike/kink data"),
    ("p", "0", "L^p integrability of the spike (0 = Hölder kink)"),
    ("x0", "0.5", "probe/spike location along each axis"),
    ("seed", "0", "seed for randomized data"),
    ("tol", "1e-6", "route agreement tolerance (solve)"),
    ("kernel", "ks", "ks | gs | poisson"),
    ("y", "0.1", "Poisson kernel height"),
    ("window_min", "2", "smallest fitted distance, in cells"),
    ("window_max", "0.125", "largest fitted distance"),
    ("margin", "0.25", "minimum boundary distance of fitted pairs"),
    ("slope_tol", "0.15", "tolerance on fitted kernel slopes"),
    ("layers", "64", "extension layers in y"),
    ("dtn_tol", "2e-2", "tolerance on the relative DtN error (extension)"),
    ("energy_tol", "1e-2", "tolerance on the relative energy error (extension)"),
    ("halfline_rhs", "one", "one | indicator (halfline)"),
    ("levels", "3", "refinement levels (converge)"),
    ("order_min", "0.8", "minimum observed order (converge)"),
    ("target", "extension", "extension | eigen (converge)"),
    ("points", "21", "sample points (halfline)"),
    ("xmin", "1e-3", "smallest sample abscissa (halfline)"),
    ("xmax", "0.1", "largest sample abscissa (halfline)"),
    ("probe", "interior", "interior | boundary"),
    ("mode", "oscillation", "oscillation | linear | raw"),
    ("exponent_tol", "0.1", "tolerance on probe exponents"),
];

pub fn describe_keys() -> String {
    KEYS.iter()
        .map(|(k, d, m)| format!("  {k:<13} {m} [default {d}]"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Defaults, then the file (if any), then `--key=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            KEYS.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            for (k, v) in parse_flat(&text)? {
                set(&mut values, &k, v)?;
            }
        }
        for (k, v) in overrides {
            set(&mut values, k, v.clone())?;
        }
        Ok(Self { values })
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("every key has a default")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.trim()
            .parse()
            .map_err(|e| anyhow!("invalid value `{raw}` for key `{key}`: {e}"))
    }

    pub fn f64_in(&self, key: &str, lo: f64, hi: f64) -> Result<f64> {
        let v: f64 = self.get(key)?;
        if !(v.is_finite() && v >= lo && v <= hi) {
            bail!("key `{key}` = {v} is outside [{lo}, {hi}]");
        }
        Ok(v)
    }

    pub fn usize_in(&self, key: &str, lo: usize, hi: usize) -> Result<usize> {
        let v: usize = self.get(key)?;
        if v < lo || v > hi {
            bail!("key `{key}` = {v} is outside [{lo}, {hi}]");
        }
        Ok(v)
    }

    pub fn choice(&self, key: &str, allowed: &[&str]) -> Result<String> {
        let v = self.raw(key).trim().to_ascii_lowercase();
        if !allowed.contains(&v.as_str()) {
            bail!("key `{key}` = `{v}` is not one of {}", allowed.join(", "));
        }
        Ok(v)
    }

    pub fn s(&self) -> Result<f64> {
        let s = self.f64_in("s", 0.0, 1.0)?;
        if s <= 0.0 || s >= 1.0 {
            bail!("key `s` = {s} must lie strictly inside (0, 1)");
        }
        Ok(s)
    }

    pub fn bc(&self) -> Result<BoundaryCondition> {
        self.choice("bc", &["dirichlet", "neumann"])?;
        self.get("bc")
    }

    pub fn mode(&self) -> Result<CampanatoMode> {
        self.choice("mode", &["oscillation", "linear", "raw"])?;
        self.get("mode")
    }

    pub fn grid(&self) -> Result<Grid> {
        let dim = self.usize_in("dim", 1, 2)?;
        let nodes = self.usize_in("nodes", 5, 1 << 20)?;
        let extent = self.f64_in("extent", 1e-6, 1e6)?;
        if dim == 2 && nodes > 1025 {
            bail!("key `nodes` = {nodes} is too large for dim = 2 (at most 1025)");
        }
        let g = if dim == 1 {
            Grid::new_1d(extent, nodes)
        } else {
            Grid::new_2d([extent, extent], [nodes, nodes])
        };
        g.map_err(|e| anyhow!("grid from keys `dim`, `nodes`, `extent`: {e}"))
    }

    pub fn coefficient(&self) -> Result<CoefficientSpec> {
        Ok(match self.choice("coefficient", &["identity", "constant", "sine"])?.as_str() {
            "identity" => CoefficientSpec::Identity,
            "constant" => CoefficientSpec::Constant {
                a11: self.f64_in("a11", 1e-6, 1e6)?,
                a12: 0.0,
                a22: self.f64_in("a22", 1e-6, 1e6)?,
            },
            _ => CoefficientSpec::Sine {
                amplitude: self.f64_in("amplitude", -0.99, 0.99)?,
                frequency: self.f64_in("frequency", 0.0, 1e3)?,
            },
        })
    }

    /// Canonical `key=value` lines of the resolved table.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={}\n", v.trim())).collect()
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn table(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

fn set(values: &mut BTreeMap<String, String>, key: &str, v: String) -> Result<()> {
    match values.get_mut(key) {
        Some(slot) => {
            *slot = v;
            Ok(())
        }
        None => bail!("unknown configuration key `{key}`"),
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, found `{line}`", n + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win_and_unknown_keys_are_named() {
        let c = Config::load(None, &[("s".into(), "0.3".into())]).unwrap();
        assert_eq!(c.s().unwrap(), 0.3);
        let e = Config::load(None, &[("sigma".into(), "0.3".into())]).unwrap_err();
        assert!(e.to_string().contains("`sigma`"));
        let bad = Config::load(None, &[("s".into(), "1.5".into())]).unwrap();
        assert!(bad.s().unwrap_err().to_string().contains("`s`"));
    }

    #[test]
    fn flat_format() {
        let kv = parse_flat("# comment\n s = 0.25 \n\nbc=neumann # trailing\n").unwrap();
        assert_eq!(kv, vec![("s".into(), "0.25".into()), ("bc".into(), "neumann".into())]);
        assert!(parse_flat("no equals sign").is_err());
    }

    #[test]
    fn hash_tracks_the_resolved_table() {
        let a = Config::load(None, &[]).unwrap();
        let b = Config::load(None, &[("s".into(), "0.5".into())]).unwrap();
        let c = Config::load(None, &[("s".into(), "0.6".into())]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
