//! Flat `section.key = value` run configuration.

use crate::error::CliError;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Every key any subcommand understands. Anything else is rejected.
pub const KNOWN_KEYS: &[&str] = &[
    "run.method",
    "run.seed",
    "model.sigma0",
    "model.sigma_h",
    "model.hurst",
    "model.lambda",
    "model.mu_y",
    "model.sigma_y",
    "model.rate",
    "model.mu",
    "contract.kind",
    "contract.spot",
    "contract.strike",
    "contract.maturity",
    "contract.barrier",
    "transform.talbot_nodes",
    "transform.mellin_nodes",
    "transform.mellin_line",
    "transform.tolerance",
    "transform.verify",
    "pide.n_space",
    "pide.n_time",
    "pide.history",
    "pide.fft_block",
    "pide.hermite_nodes",
    "mc.n_paths",
    "mc.steps_per_year",
    "mc.control_variate",
    "mc.antithetic",
    "mc.measure",
    "mc.bridge_correction",
    "crossval.methods",
    "simulate.n_paths",
    "simulate.steps",
    "simulate.measure",
    "quotes.path",
    "quotes.spot",
    "quotes.strikes",
    "quotes.maturities",
    "quotes.noise",
    "quotes.filter",
    "calibrate.pricer",
    "de.population",
    "de.generations",
    "de.mutation",
    "de.crossover",
    "de.patience",
    "de.target",
    "de.weighting",
    "de.polish",
    "bounds.lower",
    "bounds.upper",
    "surface.hurst",
    "surface.lambda",
    "converge.dt0",
    "converge.levels",
    "converge.reference",
    "greeks.mode",
    "greeks.moneyness",
    "output.batches",
    "output.layers",
    "output.history",
    "output.scenarios",
    "output.vanna",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Directory relative paths in the file resolve against.
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `section.key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(CliError::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(Self {
            values,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Command-line overrides win over the file.
    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        debug_assert!(KNOWN_KEYS.contains(&key));
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("bad value `{v}` for `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.values.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<T>()
                    .map_err(|e| CliError::Config(format!("bad list entry `{s}` for `{key}`: {e}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|v| self.base_dir.join(v))
    }

    /// Canonical `key = value` lines in key order.
    pub fn resolved(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.resolved().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(s, Path::new("."))
    }

    #[test]
    fn parses_comments_and_whitespace() {
        let c = parse("# header\nmodel.sigma0 = 0.2  # trailing\n\n  contract.kind=call\n").unwrap();
        assert_eq!(c.require::<f64>("model.sigma0").unwrap(), 0.2);
        assert_eq!(c.require::<String>("contract.kind").unwrap(), "call");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = parse("model.sigma = 0.2").unwrap_err();
        assert!(e.to_string().contains("`model.sigma`"));
        assert!(parse("run.seed = 1\nrun.seed = 2").is_err());
        assert!(parse("run.seed 1").is_err());
    }

    #[test]
    fn missing_keys_are_named() {
        let e = parse("").unwrap().require::<f64>("contract.strike").unwrap_err();
        assert!(e.to_string().contains("`contract.strike`"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn hash_ignores_layout_but_not_values() {
        let a = parse("run.seed = 1\nmodel.rate = 0.05").unwrap();
        let b = parse("model.rate=0.05\n\n# x\nrun.seed=1").unwrap();
        let mut c = b.clone();
        c.set("run.seed", 2);
        assert_eq!(a.sha256(), b.sha256());
        assert_ne!(a.sha256(), c.sha256());
    }

    #[test]
    fn lists() {
        let c = parse("quotes.strikes = 3800, 4200,4600").unwrap();
        assert_eq!(c.list::<f64>("quotes.strikes").unwrap().unwrap(), vec![3800.0, 4200.0, 4600.0]);
        assert!(parse("quotes.strikes = 1, x").unwrap().list::<f64>("quotes.strikes").is_err());
    }
}
