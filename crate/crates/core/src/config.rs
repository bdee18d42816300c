//! Solver settings loaded from TOML files and `key=value` overrides.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::baseline::{LsConfig, RefineMode};
use crate::dfsearch::SearchConfig;
use crate::error::{Error, Result};
use crate::penalty::{PenaltyParams, XiSchedule};

/// Every tunable setting. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gamma: f64,
    pub theta: f64,
    pub max_expansions: u32,
    pub xi: f64,
    /// `"constant"` or `"geometric"`.
    pub xi_schedule: String,
    /// Ratio of the geometric schedule.
    pub xi_decay: f64,
    pub tau0: f64,
    pub tau_growth: f64,
    pub tau_cap: f64,
    pub outer_step_tol: f64,
    pub max_outer: usize,
    /// Seconds per run; 0 disables the limit.
    pub wall_clock_limit: f64,
    pub workers: usize,
    /// Stepsize threshold of the LS and SALS baselines.
    pub stop_alpha: f64,
    /// Stepsize threshold of the refinement that follows PDDF.
    pub refine_stop_alpha: f64,
    /// `"ls"` or `"sals"`.
    pub refine: String,
}

impl Default for Config {
    fn default() -> Self {
        let p = PenaltyParams::default();
        let ls = LsConfig::default();
        Self {
            gamma: ls.gamma,
            theta: ls.theta,
            max_expansions: ls.max_expansions,
            xi: p.xi,
            xi_schedule: "constant".into(),
            xi_decay: 0.9,
            tau0: p.tau0,
            tau_growth: p.tau_growth,
            tau_cap: p.tau_cap,
            outer_step_tol: p.outer_step_tol,
            max_outer: p.max_outer,
            wall_clock_limit: 600.0,
            workers: 12,
            stop_alpha: ls.stop_alpha,
            refine_stop_alpha: ls.stop_alpha,
            refine: "ls".into(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies `key=value` overrides; values use TOML syntax, bare words are
    /// taken as strings.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut table = toml::Table::try_from(&self)
            .map_err(|e| Error::Usage(format!("config: {e}")))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("override {o:?} is not key=value")))?;
            let key = key.trim();
            if !table.contains_key(key) {
                return Err(Error::Usage(format!("unknown config key {key:?}")));
            }
            let raw = raw.trim();
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.search().validate()?;
        self.penalty()?.validate()?;
        self.ls()?.validate()?;
        self.refine_ls()?.validate()?;
        self.refine_mode()?;
        if self.workers == 0 {
            return Err(Error::Usage("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            gamma: self.gamma,
            theta: self.theta,
            max_expansions: self.max_expansions,
        }
    }

    fn limit(&self) -> Result<Option<Duration>> {
        if self.wall_clock_limit == 0.0 {
            Ok(None)
        } else {
            Duration::try_from_secs_f64(self.wall_clock_limit)
                .map(Some)
                .map_err(|_| {
                    Error::Usage(format!("invalid wall_clock_limit {}", self.wall_clock_limit))
                })
        }
    }

    pub fn penalty(&self) -> Result<PenaltyParams> {
        let xi_schedule = match self.xi_schedule.as_str() {
            "constant" => XiSchedule::Constant,
            "geometric" => XiSchedule::Geometric(self.xi_decay),
            other => return Err(Error::Usage(format!("unknown xi_schedule {other:?}"))),
        };
        Ok(PenaltyParams {
            tau0: self.tau0,
            tau_growth: self.tau_growth,
            tau_cap: self.tau_cap,
            xi: self.xi,
            xi_schedule,
            outer_step_tol: self.outer_step_tol,
            max_outer: self.max_outer,
            wall_clock_limit: self.limit()?,
            inner_cap: None,
        })
    }

    pub fn ls(&self) -> Result<LsConfig> {
        Ok(LsConfig {
            gamma: self.gamma,
            theta: self.theta,
            max_expansions: self.max_expansions,
            stop_alpha: self.stop_alpha,
            wall_clock_limit: self.limit()?,
            max_evals: None,
        })
    }

    pub fn refine_ls(&self) -> Result<LsConfig> {
        Ok(LsConfig {
            stop_alpha: self.refine_stop_alpha,
            ..self.ls()?
        })
    }

    pub fn refine_mode(&self) -> Result<RefineMode> {
        match self.refine.as_str() {
            "ls" => Ok(RefineMode::Ls),
            "sals" => Ok(RefineMode::Sals),
            other => Err(Error::Usage(format!("unknown refine mode {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let c = Config::default();
        assert_eq!((c.gamma, c.theta, c.xi, c.tau0, c.tau_growth), (1e-6, 0.5, 1e-2, 1.0, 1.1));
        assert_eq!((c.tau_cap, c.outer_step_tol, c.max_outer), (1e8, 1e-2, 100));
        assert_eq!((c.wall_clock_limit, c.workers, c.stop_alpha), (600.0, 12, 1e-4));
        assert_eq!(c.xi_schedule, "constant");
        assert_eq!(c.penalty().unwrap(), PenaltyParams::default());
    }

    #[test]
    fn toml_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(Config::from_toml("").unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = Config::from_toml("xi = 1e-3\nxi_schedule = \"geometric\"\nworkers = 4\n").unwrap();
        assert_eq!(c.xi, 1e-3);
        assert_eq!(c.workers, 4);
        assert_eq!(c.penalty().unwrap().xi_schedule, XiSchedule::Geometric(0.9));
        assert_eq!(c.theta, 0.5);
    }

    #[test]
    fn unknown_or_invalid_keys_are_usage_errors() {
        assert!(matches!(Config::from_toml("gama = 1.0"), Err(Error::Usage(_))));
        assert!(matches!(Config::from_toml("theta = 1.5"), Err(Error::Usage(_))));
        assert!(matches!(Config::from_toml("refine = \"nomad\""), Err(Error::Usage(_))));
        assert!(matches!(Config::from_toml("workers = 0"), Err(Error::Usage(_))));
        let d = Config::default();
        assert!(matches!(d.clone().with_overrides(&["nope=1"]), Err(Error::Usage(_))));
        assert!(matches!(d.clone().with_overrides(&["theta"]), Err(Error::Usage(_))));
        assert!(matches!(d.with_overrides(&["max_outer=abc"]), Err(Error::Usage(_))));
    }

    #[test]
    fn overrides_parse_toml_values() {
        let c = Config::default()
            .with_overrides(&["max_outer=7", "tau_growth = 1.5", "refine=sals", "wall_clock_limit=0"])
            .unwrap();
        assert_eq!(c.max_outer, 7);
        assert_eq!(c.tau_growth, 1.5);
        assert_eq!(c.refine_mode().unwrap(), RefineMode::Sals);
        assert_eq!(c.penalty().unwrap().wall_clock_limit, None);
    }
}
