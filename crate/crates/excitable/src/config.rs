//! Flat `key = value` run configuration.
//!
//! Values come from built-in defaults, then the config file, then
//! `--set key=value` overrides. Every key is listed in [`KEYS`]; anything else
//! is rejected.

use std::fmt;

use excitable_core::model::fit_estar;
use excitable_core::pde::{default_dt, Grid1D, PdeModel};
use excitable_core::{FhnParams, KarmaParams, Reaction};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("bad value for `{key}`: `{value}` ({reason})")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Karma,
    Fhn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Karma => "karma",
            ModelKind::Fhn => "fhn",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "karma" => Some(ModelKind::Karma),
            "fhn" => Some(ModelKind::Fhn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ode,
    Analyze,
    Wave,
    Pde,
    Sweep,
    Blowup,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ode => "ode",
            Command::Analyze => "analyze",
            Command::Wave => "wave",
            Command::Pde => "pde",
            Command::Sweep => "sweep",
            Command::Blowup => "blowup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    FloatList,
    Word,
}

/// Known keys, in the order they are written to output headers.
pub const KEYS: &[&str] = &[
    "model",
    "variant",
    "eps",
    "D",
    "M",
    "n_B",
    "I",
    "E_star",
    "delta",
    "a",
    "b",
    "fast0",
    "slow0",
    "t_end",
    "rtol",
    "atol",
    "L",
    "n_points",
    "dt",
    "center",
    "width",
    "height",
    "level",
    "snapshots",
    "measure_times",
    "sweep_param",
    "sweep_values",
    "M_values",
    "locus_points",
    "c_max",
    "I_max",
    "I_points",
    "theta_points",
    "r_max",
    "r_points",
];

fn kind(key: &str) -> Kind {
    match key {
        "model" | "variant" | "sweep_param" => Kind::Word,
        "M" | "n_points" | "locus_points" | "I_points" | "theta_points" | "r_points" => Kind::Int,
        "snapshots" | "measure_times" | "sweep_values" | "M_values" => Kind::FloatList,
        _ => Kind::Float,
    }
}

fn default_value(key: &str, model: ModelKind, command: Command) -> &'static str {
    let karma = model == ModelKind::Karma;
    match key {
        "model" => "karma",
        "variant" => "cubic",
        "eps" => "0.01",
        "D" => "1",
        "M" => "4",
        "n_B" => "0.5",
        "I" => "0",
        "E_star" => "auto",
        "delta" => "0.25",
        "a" => "0.7",
        "b" => "0.8",
        "fast0" if karma => "1.5",
        "fast0" => "0",
        "slow0" => "0",
        "t_end" => match command {
            Command::Pde => "500",
            Command::Sweep => "120",
            _ => "1000",
        },
        "rtol" => "1e-8",
        "atol" => "1e-10",
        "L" => "400",
        "n_points" => "2001",
        "dt" => "auto",
        "center" => "50",
        "width" => "10",
        "height" => "3",
        "level" => "auto",
        "snapshots" => "100,200,300,400,500",
        "measure_times" => "50,60,70,80,90,100,110,120",
        "sweep_param" => "eps",
        "sweep_values" => "0.001,0.01,0.08",
        "M_values" => "4,10,30",
        "locus_points" => "51",
        "c_max" => "3",
        "I_max" => "0.6",
        "I_points" => "121",
        "theta_points" => "360",
        "r_max" => "0.5",
        "r_points" => "11",
        _ => unreachable!("key table and defaults out of sync"),
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses one `--set key=value` argument.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
        line: 0,
        text: s.to_string(),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelKind,
    values: Vec<(&'static str, String)>,
}

impl RunConfig {
    /// Defaults, then `pairs` in order (later wins).
    pub fn resolve(
        command: Command,
        model: Option<&str>,
        pairs: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        for (k, _) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
        }
        let model_name = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "model")
            .map(|(_, v)| v.as_str())
            .or(model)
            .unwrap_or("karma");
        let model = ModelKind::from_name(model_name).ok_or_else(|| ConfigError::Value {
            key: "model".into(),
            value: model_name.into(),
            reason: "expected karma or fhn".into(),
        })?;
        let mut values: Vec<(&'static str, String)> = KEYS
            .iter()
            .map(|&k| (k, default_value(k, model, command).to_string()))
            .collect();
        for (k, v) in pairs {
            let slot = values
                .iter_mut()
                .find(|(key, _)| *key == k)
                .expect("checked above");
            slot.1 = v.clone();
        }
        values
            .iter_mut()
            .find(|(k, _)| *k == "model")
            .expect("model key")
            .1 = model.name().into();
        let mut cfg = Self {
            command,
            model,
            values,
        };
        cfg.check_types()?;
        cfg.resolve_auto()?;
        Ok(cfg)
    }

    fn check_types(&self) -> Result<(), ConfigError> {
        for (k, v) in &self.values {
            if v == "auto" && matches!(*k, "E_star" | "dt" | "level") {
                continue;
            }
            match kind(k) {
                Kind::Float => {
                    self.f64(k)?;
                }
                Kind::Int => {
                    self.usize(k)?;
                }
                Kind::FloatList => {
                    self.list(k)?;
                }
                Kind::Word => {}
            }
        }
        Reaction::from_name(self.str("variant"))
            .ok_or_else(|| self.bad("variant", "expected cubic or tanh93"))?;
        Ok(())
    }

    fn resolve_auto(&mut self) -> Result<(), ConfigError> {
        if self.str("E_star") == "auto" {
            let e = match Reaction::from_name(self.str("variant")) {
                Some(Reaction::Tanh93) => {
                    fit_estar(Reaction::Tanh93, self.f64("delta")?)
                        .map_err(|e| self.bad("E_star", &e.to_string()))?
                        .1
                }
                _ => 1.5,
            };
            self.set("E_star", fmt_value(e));
        }
        if self.str("level") == "auto" {
            let level = match self.model {
                ModelKind::Karma => "1",
                ModelKind::Fhn => "0",
            };
            self.set("level", level.to_string());
        }
        // a swept D changes the bound, so sweeps keep the rule
        if self.str("dt") == "auto" && self.command != Command::Sweep {
            let grid = self.grid()?;
            self.set("dt", fmt_value(default_dt(&grid, self.f64("D")?)));
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: String) {
        if let Some(slot) = self.values.iter_mut().find(|(k, _)| *k == key) {
            slot.1 = value;
        }
    }

    fn bad(&self, key: &str, reason: &str) -> ConfigError {
        ConfigError::Value {
            key: key.into(),
            value: self.str(key).into(),
            reason: reason.into(),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("unknown key {key}"))
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self
            .str(key)
            .parse()
            .map_err(|_| self.bad(key, "expected a number"))?;
        if !v.is_finite() {
            return Err(self.bad(key, "must be finite"));
        }
        Ok(v)
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.str(key)
            .parse()
            .map_err(|_| self.bad(key, "expected a non-negative integer"))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let s = self.str(key);
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.bad(key, "expected comma-separated numbers"))
            })
            .collect()
    }

    /// `dt` as a number, or `None` for the automatic rule.
    pub fn dt(&self) -> Result<Option<f64>, ConfigError> {
        if self.str("dt") == "auto" {
            Ok(None)
        } else {
            self.f64("dt").map(Some)
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.values.iter().map(|(k, v)| (*k, v.as_str()))
    }

    pub fn karma(&self) -> Result<KarmaParams, ConfigError> {
        let m = self.usize("M")?;
        let p = KarmaParams {
            eps: self.f64("eps")?,
            diff: self.f64("D")?,
            m: u32::try_from(m).map_err(|_| self.bad("M", "too large"))?,
            n_b: self.f64("n_B")?,
            current: self.f64("I")?,
            e_star: self.f64("E_star")?,
            delta: self.f64("delta")?,
            reaction: Reaction::from_name(self.str("variant")).unwrap_or_default(),
        };
        p.validate().map_err(|e| ConfigError::Value {
            key: "model".into(),
            value: "karma".into(),
            reason: e.to_string(),
        })?;
        Ok(p)
    }

    pub fn fhn(&self) -> Result<FhnParams, ConfigError> {
        let p = FhnParams {
            eps: self.f64("eps")?,
            diff: self.f64("D")?,
            a: self.f64("a")?,
            b: self.f64("b")?,
            current: self.f64("I")?,
        };
        p.validate().map_err(|e| ConfigError::Value {
            key: "model".into(),
            value: "fhn".into(),
            reason: e.to_string(),
        })?;
        Ok(p)
    }

    pub fn pde_model(&self) -> Result<PdeModel, ConfigError> {
        Ok(match self.model {
            ModelKind::Karma => PdeModel::Karma(self.karma()?),
            ModelKind::Fhn => PdeModel::Fhn(self.fhn()?),
        })
    }

    pub fn grid(&self) -> Result<Grid1D, ConfigError> {
        Grid1D::new(self.f64("L")?, self.usize("n_points")?)
            .map_err(|e| self.bad("n_points", &e.to_string()))
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "command = {}", self.command.name())?;
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Shortest decimal that round-trips, for resolved values.
fn fmt_value(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(s: &[(&str, &str)]) -> Vec<(String, String)> {
        s.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(Command::Pde, None, &[]).unwrap();
        assert_eq!(c.model, ModelKind::Karma);
        assert_eq!(c.f64("E_star").unwrap(), 1.5);
        assert_eq!(c.f64("level").unwrap(), 1.0);
        assert_eq!(c.dt().unwrap(), Some(0.01));
        assert_eq!(c.karma().unwrap(), KarmaParams::default());
    }

    #[test]
    fn later_pairs_win() {
        let c = RunConfig::resolve(
            Command::Ode,
            Some("karma"),
            &pairs(&[("eps", "0.1"), ("eps", "0.2")]),
        )
        .unwrap();
        assert_eq!(c.f64("eps").unwrap(), 0.2);
        let c =
            RunConfig::resolve(Command::Ode, Some("karma"), &pairs(&[("model", "fhn")])).unwrap();
        assert_eq!(c.model, ModelKind::Fhn);
        assert_eq!(c.f64("level").unwrap(), 0.0);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(
            RunConfig::resolve(Command::Ode, None, &pairs(&[("epsilon", "1")])),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(RunConfig::resolve(Command::Ode, None, &pairs(&[("eps", "x")])).is_err());
        assert!(RunConfig::resolve(Command::Ode, None, &pairs(&[("variant", "quartic")])).is_err());
        assert!(parse_pairs("eps 0.1").is_err());
    }

    #[test]
    fn file_syntax() {
        let p = parse_pairs("# run\neps = 0.02  # slower\n\nM=10\n").unwrap();
        assert_eq!(p, pairs(&[("eps", "0.02"), ("M", "10")]));
    }

    #[test]
    fn tanh_variant_fits_estar() {
        let c = RunConfig::resolve(Command::Ode, None, &pairs(&[("variant", "tanh93")])).unwrap();
        assert!((c.f64("E_star").unwrap() - 1.5415).abs() < 1e-3);
    }

    #[test]
    fn sweep_keeps_dt_rule() {
        let c = RunConfig::resolve(Command::Sweep, None, &[]).unwrap();
        assert_eq!(c.dt().unwrap(), None);
    }
}
