//! Portfolio instance description and its TOML form.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::money::Money;
use super::PortfolioError;
use crate::rgp::{DEFAULT_EPSILON, DEFAULT_WEIGHT};

const BUNDLED: &str = include_str!("../../data/portfolio.toml");

/// Goal levels (millions) for one (stage, state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageGoal {
    pub stage: usize,
    pub state: String,
    pub fund: f64,
    pub withdrawal: f64,
}

/// Weight override for meta-objectives matching `objective` (1-based, absent
/// = all) and `path` (comma-separated states with `*` wildcards, or `*`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<usize>,
    #[serde(default = "wildcard")]
    pub path: String,
    pub weight: f64,
}

fn wildcard() -> String {
    "*".into()
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_weight() -> f64 {
    DEFAULT_WEIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preferences {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<WeightOverride>,
}

impl Default for Preferences {
    fn default() -> Self {
        Preferences { epsilon: DEFAULT_EPSILON, weight: DEFAULT_WEIGHT, overrides: Vec::new() }
    }
}

impl Preferences {
    /// Weight for objective `objective` (0-based) on the full state path `states`.
    /// The last matching override wins.
    pub fn weight_for(&self, objective: usize, states: &[String]) -> f64 {
        self.overrides
            .iter()
            .rev()
            .find(|o| o.objective.is_none_or(|i| i == objective + 1) && path_matches(&o.path, states))
            .map_or(self.weight, |o| o.weight)
    }
}

fn path_matches(pattern: &str, states: &[String]) -> bool {
    if pattern.trim() == "*" {
        return true;
    }
    let parts: Vec<&str> = pattern.split(',').map(str::trim).collect();
    parts.len() == states.len() && parts.iter().zip(states).all(|(p, s)| *p == "*" || p == s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioInstance {
    pub name: String,
    pub root_state: String,
    pub states: Vec<String>,
    pub options: Vec<String>,
    /// Initial holding per option, currency units.
    pub initial_funds: Vec<i64>,
    /// Withdrawal floor per stage and node, currency units.
    pub min_withdrawal: i64,
    pub max_withdrawal: i64,
    /// Whether `max_withdrawal` becomes a constraint.
    pub enforce_max_withdrawal: bool,
    pub transitions: BTreeMap<String, Vec<String>>,
    /// Per option, growth in percent for each state in `states` order.
    pub growth_percent: BTreeMap<String, Vec<f64>>,
    /// Per state, per source option: signed percent change on transfer to
    /// each option, then on withdrawal. Losses are negative.
    pub penalty_percent: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    pub goals: Vec<StageGoal>,
    #[serde(default)]
    pub preferences: Preferences,
}

impl PortfolioInstance {
    /// The bundled case-study instance.
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED).expect("bundled instance is valid")
    }

    pub fn bundled_toml() -> &'static str {
        BUNDLED
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PortfolioError> {
        let inst: PortfolioInstance = toml::from_str(text).map_err(|e| PortfolioError::Config(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: &Path) -> Result<Self, PortfolioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PortfolioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            PortfolioError::Config(msg) => PortfolioError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("instance serializes")
    }

    pub fn n(&self) -> usize {
        self.options.len()
    }

    pub fn capital(&self) -> Money {
        self.initial_funds.iter().map(|&b| Money::from_units(b)).sum()
    }

    fn state_index(&self, state: &str) -> usize {
        self.states.iter().position(|s| s == state).expect("validated state")
    }

    /// Growth fraction of option `i` in `state`.
    pub fn growth(&self, i: usize, state: &str) -> f64 {
        self.growth_percent[&self.options[i]][self.state_index(state)] / 100.0
    }

    /// Loss fraction when moving funds out of option `i` into column `j`
    /// (`j == n` is withdrawal) in `state`.
    pub fn penalty(&self, state: &str, i: usize, j: usize) -> f64 {
        -self.penalty_percent[state][&self.options[i]][j] / 100.0
    }

    pub fn goal(&self, stage: usize, state: &str) -> Result<&StageGoal, PortfolioError> {
        self.goals
            .iter()
            .find(|g| g.stage == stage && g.state == state)
            .ok_or_else(|| PortfolioError::MissingGoal { stage, state: state.to_string() })
    }

    pub fn validate(&self) -> Result<(), PortfolioError> {
        let bad = |msg: String| Err(PortfolioError::InvalidInstance(msg));
        let n = self.n();
        if n == 0 || self.states.is_empty() {
            return bad("at least one option and one state are required".into());
        }
        if !self.states.contains(&self.root_state) {
            return bad(format!("root state {:?} is not a declared state", self.root_state));
        }
        if self.initial_funds.len() != n {
            return bad(format!("{} initial funds for {n} options", self.initial_funds.len()));
        }
        if self.initial_funds.iter().any(|&b| b < 0) || self.min_withdrawal < 0 || self.max_withdrawal < 0 {
            return bad("money amounts must be nonnegative".into());
        }
        if self.enforce_max_withdrawal && self.max_withdrawal < self.min_withdrawal {
            return bad("maximum withdrawal is below the minimum".into());
        }
        for (from, tos) in &self.transitions {
            if let Some(s) = std::iter::once(from).chain(tos).find(|s| !self.states.contains(s)) {
                return bad(format!("transition {from:?} references unknown state {s:?}"));
            }
        }
        for opt in &self.options {
            let Some(row) = self.growth_percent.get(opt) else {
                return bad(format!("no growth row for option {opt:?}"));
            };
            if row.len() != self.states.len() {
                return bad(format!("growth row {opt:?} has {} entries for {} states", row.len(), self.states.len()));
            }
            if row.iter().any(|g| !g.is_finite() || *g <= -100.0) {
                return bad(format!("growth of {opt:?} must exceed -100%"));
            }
        }
        for state in &self.states {
            let Some(table) = self.penalty_percent.get(state) else {
                return bad(format!("no penalty table for state {state:?}"));
            };
            for (i, opt) in self.options.iter().enumerate() {
                let Some(row) = table.get(opt) else {
                    return bad(format!("penalty table {state:?} lacks a row for {opt:?}"));
                };
                if row.len() != n + 1 {
                    return bad(format!("penalty row {state:?}/{opt:?} needs {} entries", n + 1));
                }
                if row.iter().any(|v| !v.is_finite() || *v > 0.0 || *v <= -100.0) {
                    return bad(format!("penalty row {state:?}/{opt:?} must lie in (-100%, 0]"));
                }
                if row[i] != 0.0 {
                    return bad(format!("penalty for keeping funds in {opt:?} under {state:?} must be 0"));
                }
            }
        }
        for g in &self.goals {
            if !self.states.contains(&g.state) || !g.fund.is_finite() || !g.withdrawal.is_finite() {
                return bad(format!("invalid goal entry for stage {} state {:?}", g.stage, g.state));
            }
        }
        let p = &self.preferences;
        if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
            return bad("preferences.epsilon must be positive".into());
        }
        if std::iter::once(p.weight).chain(p.overrides.iter().map(|o| o.weight)).any(|w| !(w > 0.0 && w.is_finite())) {
            return bad("preference weights must be positive".into());
        }
        Ok(())
    }
}
