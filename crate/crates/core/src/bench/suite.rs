//! Suite definition files.
//!
//! A suite is a TOML document with a list of `[[problem]]` tables:
//!
//! ```toml
//! name = "example"
//!
//! [[problem]]
//! pattern = "chain"        # chain | shared_head | shared_all | disjoint
//! bases = ["ROSENBR"]      # base function names; shared_head takes several
//! m = 5                    # number of copies (chain, shared_all, disjoint)
//!
//! [[problem]]
//! id = "TRIDIA-50-box"     # optional, defaults to the generated name
//! pattern = "tridia"       # tridia | broydn3d | morebv | woods | dixmaana
//! n = 50                   # dimension of the element families
//! lower = -1.0             # optional uniform box, both bounds or neither
//! upper = 1.0
//!
//! [[problem]]
//! pattern = "shared_head"
//! bases = ["SQUAD_A", "SQUAD_B"]
//! s = 1                    # number of leading shared coordinates
//! start = [0.1, 0.2, 0.3, 0.4, 0.5]   # optional start point
//! ```

use std::path::Path;

use serde::Deserialize;

use super::generate::{
    broydn3d_elements, dixmaana_elements, generate_chain, generate_disjoint, generate_shared_all,
    generate_shared_head, morebv_elements, tridia_chain, woods_elements, Generated,
};
use super::library::base_by_name;
use crate::error::{Error, Result};

/// Structure of a generated problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Chain,
    SharedHead,
    SharedAll,
    Disjoint,
    Tridia,
    Broydn3d,
    Morebv,
    Woods,
    Dixmaana,
}

/// One `[[problem]]` entry.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub id: Option<String>,
    pub pattern: Pattern,
    #[serde(default)]
    pub bases: Vec<String>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub s: Option<usize>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub start: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default, rename = "problem")]
    pub entries: Vec<SuiteEntry>,
}

const ACCEPTANCE: &str = include_str!("../../suites/acceptance.toml");
const CPS: &str = include_str!("../../suites/cps.toml");

fn need(v: Option<usize>, key: &str, pattern: Pattern) -> Result<usize> {
    v.ok_or_else(|| Error::Usage(format!("pattern {pattern:?} requires `{key}`")))
}

impl SuiteEntry {
    fn single_base(&self) -> Result<super::library::BaseFunction> {
        match self.bases.as_slice() {
            [b] => base_by_name(b),
            _ => Err(Error::Usage(format!(
                "pattern {:?} takes exactly one base, got {}",
                self.pattern,
                self.bases.len()
            ))),
        }
    }

    pub fn build(&self) -> Result<Generated> {
        let pat = self.pattern;
        let mut g = match pat {
            Pattern::Chain => generate_chain(&self.single_base()?, need(self.m, "m", pat)?)?,
            Pattern::SharedAll => generate_shared_all(&self.single_base()?, need(self.m, "m", pat)?)?,
            Pattern::Disjoint => generate_disjoint(&self.single_base()?, need(self.m, "m", pat)?)?,
            Pattern::SharedHead => {
                if self.bases.is_empty() {
                    return Err(Error::Usage("shared_head requires at least one base".into()));
                }
                let bases = self
                    .bases
                    .iter()
                    .map(|b| base_by_name(b))
                    .collect::<Result<Vec<_>>>()?;
                generate_shared_head(&bases, need(self.s, "s", pat)?)?
            }
            Pattern::Tridia => tridia_chain(need(self.n, "n", pat)?)?,
            Pattern::Broydn3d => broydn3d_elements(need(self.n, "n", pat)?)?,
            Pattern::Morebv => morebv_elements(need(self.n, "n", pat)?)?,
            Pattern::Woods => woods_elements(need(self.n, "n", pat)?)?,
            Pattern::Dixmaana => dixmaana_elements(need(self.n, "n", pat)?)?,
        };
        if let Some(x0) = &self.start {
            g = g.with_start(x0.clone())?;
        }
        g = match (self.lower, self.upper) {
            (Some(lo), Some(hi)) => g.with_box(lo, hi)?,
            (None, None) => g,
            _ => return Err(Error::Usage("give both `lower` and `upper` or neither".into())),
        };
        let name = match &self.id {
            Some(id) => id.clone(),
            None if self.lower.is_some() => format!("{}-box", g.problem.name()),
            None => g.problem.name().to_string(),
        };
        Ok(g.with_name(&name))
    }
}

impl SuiteSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("suite: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read suite {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Reads a single problem: either one bare entry or a suite holding
    /// exactly one `[[problem]]`.
    pub fn load_problem(path: &Path) -> Result<Generated> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read problem {}: {e}", path.display())))?;
        if let Ok(entry) = toml::from_str::<SuiteEntry>(&text) {
            return entry.build();
        }
        let spec = Self::from_toml(&text)?;
        match spec.entries.as_slice() {
            [entry] => entry.build(),
            other => Err(Error::Usage(format!(
                "{} defines {} problems, expected one",
                path.display(),
                other.len()
            ))),
        }
    }

    /// Built-in suites: `acceptance` and `cps`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "acceptance" => Self::from_toml(ACCEPTANCE),
            "cps" => Self::from_toml(CPS),
            other => Err(Error::Usage(format!("unknown built-in suite {other:?}"))),
        }
    }

    /// Builds every problem; problem names must be distinct.
    pub fn build(&self) -> Result<Vec<Generated>> {
        let built = self
            .entries
            .iter()
            .map(SuiteEntry::build)
            .collect::<Result<Vec<_>>>()?;
        for (i, g) in built.iter().enumerate() {
            if built[..i].iter().any(|h| h.problem.name() == g.problem.name()) {
                return Err(Error::Usage(format!("duplicate problem id {}", g.problem.name())));
            }
        }
        Ok(built)
    }
}
