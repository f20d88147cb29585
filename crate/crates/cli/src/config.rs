//! Plain-text `key = value` run configuration.
//!
//! Each subcommand has a fixed key set with documented defaults. Values are
//! layered defaults < config file < command-line flags; unknown keys are an
//! error. The resolved set is echoed into every report and written back as
//! `config.txt`, which reproduces the run when passed to `--config`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use gar_core::rng::DEFAULT_SEED;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Gof,
    Eval,
}

/// One setting: name, default (as written in a config file), meaning.
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(name: &'static str, default: &'static str, doc: &'static str) -> Key {
    Key { name, default, doc }
}

// One place for the seed default so the docs cannot drift from the library.
const SEED_DEFAULT: &str = "20240601";
const _: () = assert!(DEFAULT_SEED == 20_240_601);

const SOLVER_KEYS: [Key; 4] = [
    key("eps_abs", "1e-5", "absolute ADMM stopping tolerance"),
    key("eps_rel", "1e-3", "relative ADMM stopping tolerance"),
    key("max_iter", "5000", "ADMM iteration cap per solve"),
    key("rho", "auto", "ADMM penalty; auto = max(lambda, 0.3)"),
];

const SIMULATE_KEYS: [Key; 10] = [
    key("seed", SEED_DEFAULT, "master seed for the graph and the sample"),
    key("p", "100", "number of nodes"),
    key("n", "500", "number of observations"),
    key("edge_prob", "auto", "probability of each edge; auto = 2 / p"),
    key("self_loop_prob", "0", "probability of a self-loop at each node"),
    key("weight_min", "0.5", "lower end of the uniform edge-weight range"),
    key("weight_max", "1", "upper end of the uniform edge-weight range"),
    key("theta0", "1", "intercept of the GAR filter"),
    key("theta1", "2", "scale of the normalized Laplacian"),
    key("isolation", "condition", "isolated nodes: condition | resample | self-loop"),
];

const FIT_KEYS: [Key; 6] = [
    key("data", "", "input CSV (required)"),
    key("standardize", "false", "scale each column to mean 0, variance 1 before fitting"),
    key("lambda", "auto", "comma-separated sparsity penalties; auto = {0.5, 1} * sqrt(log p / n)"),
    key("eps_thre", "auto", "comma-separated thresholds; auto = ten log-spaced values"),
    key("gamma", "auto", "eBIC edge-prior weight; auto = 0.5 if p / n <= 0.5 else 1"),
    key("warm_start", "false", "start the constrained refit from the penalized solution"),
];

const GOF_KEYS: [Key; 5] = [
    key("data", "", "input CSV (required)"),
    key("standardize", "false", "scale each column to mean 0, variance 1 before fitting"),
    key("lambda", "auto", "penalty of the plug-in fit; auto = sqrt(log p / n)"),
    key("bootstrap_b", "100", "number of parametric bootstrap draws"),
    key("seed", SEED_DEFAULT, "master seed for the bootstrap draws"),
];

const EVAL_KEYS: [Key; 2] = [
    key("fit_dir", "", "output directory of `gar fit` (required)"),
    key("truth_dir", "", "output directory of `gar simulate` (required)"),
];

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Gof => "gof",
            Command::Eval => "eval",
        }
    }

    pub fn keys(self) -> Vec<&'static Key> {
        match self {
            Command::Simulate => SIMULATE_KEYS.iter().collect(),
            Command::Fit => FIT_KEYS.iter().chain(&SOLVER_KEYS).collect(),
            Command::Gof => GOF_KEYS.iter().chain(&SOLVER_KEYS).collect(),
            Command::Eval => EVAL_KEYS.iter().collect(),
        }
    }

    fn lookup(self, name: &str) -> Option<&'static Key> {
        self.keys().into_iter().find(|k| k.name == name)
    }
}

/// Fully resolved settings of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let values = command.keys().into_iter().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        Self { command, values }
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        if self.command.lookup(name).is_none() {
            let known: Vec<_> = self.command.keys().iter().map(|k| k.name).collect();
            return Err(CliError::Config(format!(
                "unknown key `{name}` for `{}` (known: {})",
                self.command.name(),
                known.join(", ")
            )));
        }
        self.values.insert(name.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Overlay a config file's text; `origin` names it in error messages.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((name, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("{origin}:{}: expected `key = value`", k + 1)));
            };
            let name = name.trim();
            if let Some(first) = seen.insert(name.to_string(), k + 1) {
                return Err(CliError::Config(format!("{origin}:{}: `{name}` already set on line {first}", k + 1)));
            }
            self.set(name, value).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{origin}:{}: {msg}", k + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn get(&self, name: &str) -> &str {
        self.values.get(name).map(String::as_str).unwrap_or_else(|| panic!("`{name}` is not a key of this command"))
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Parse a value; `auto` maps to `None`.
    pub fn parse_auto<T: FromStr>(&self, name: &str) -> Result<Option<T>> {
        match self.get(name) {
            "auto" => Ok(None),
            v => v.parse().map(Some).map_err(|_| invalid(name, v)),
        }
    }

    pub fn parse<T: FromStr>(&self, name: &str) -> Result<T> {
        let v = self.get(name);
        v.parse().map_err(|_| invalid(name, v))
    }

    pub fn parse_bool(&self, name: &str) -> Result<bool> {
        match self.get(name) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(invalid(name, v)),
        }
    }

    /// Comma-separated list; `auto` maps to `None`.
    pub fn parse_list(&self, name: &str) -> Result<Option<Vec<f64>>> {
        match self.get(name) {
            "auto" => Ok(None),
            v => v.split(',').map(|x| x.trim().parse().map_err(|_| invalid(name, v))).collect::<Result<_>>().map(Some),
        }
    }

    /// Non-empty value of a required key.
    pub fn required(&self, name: &str) -> Result<&str> {
        match self.get(name) {
            "" => Err(CliError::Config(format!("`{name}` is required for `{}`", self.command.name()))),
            v => Ok(v),
        }
    }

    /// Config-file text of the resolved settings, with each key's meaning as a comment.
    pub fn to_text(&self) -> String {
        let mut out = format!("# gar {} settings\n", self.command.name());
        for (name, value) in &self.values {
            let doc = self.command.lookup(name).map_or("", |k| k.doc);
            let _ = write!(out, "\n# {doc}\n{name} = {value}\n");
        }
        out
    }
}

fn invalid(name: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value {value:?} for `{name}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::defaults(Command::Fit);
        c.set("lambda", "0.1, 0.2").unwrap();
        c.set("data", "x.csv").unwrap();
        let mut back = RunConfig::defaults(Command::Fit);
        back.apply_text(&c.to_text(), "echo").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.parse_list("lambda").unwrap(), Some(vec![0.1, 0.2]));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let mut c = RunConfig::defaults(Command::Simulate);
        let err = c.apply_text("p = 3\nlambda = 1\n", "cfg").unwrap_err().to_string();
        assert!(err.contains("cfg:2") && err.contains("unknown key `lambda`"), "{err}");
        let err = c.apply_text("p = 3\np = 4\n", "cfg").unwrap_err().to_string();
        assert!(err.contains("already set on line 1"), "{err}");
    }

    #[test]
    fn every_key_has_a_parseable_default() {
        for command in [Command::Simulate, Command::Fit, Command::Gof, Command::Eval] {
            let c = RunConfig::defaults(command);
            assert_eq!(c.values().len(), command.keys().len());
        }
    }
}
