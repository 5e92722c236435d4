use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::payoff_game::RationalityMode;

use super::race::{DEFAULT_LEAD_CUTOFF, MIN_LEAD_CUTOFF};

/// Shares must add up to one within this tolerance.
pub const SHARE_TOLERANCE: f64 = 1e-9;

/// Defection record of one stakeholder: `defections` attacks joined out of
/// `transactions` observed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct History {
    #[serde(rename = "d")]
    pub defections: u64,
    #[serde(rename = "t")]
    pub transactions: u64,
}

impl History {
    pub fn new(defections: u64, transactions: u64) -> Result<Self> {
        let h = Self {
            defections,
            transactions,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.defections > self.transactions {
            return Err(Error::invalid(
                "history",
                format!(
                    "defections ({}) exceed transactions ({})",
                    self.defections, self.transactions
                ),
            ));
        }
        Ok(())
    }
}

pub type Histories = BTreeMap<String, History>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeholderProfile {
    pub id: String,
    pub hashrate_share: f64,
    pub dishonesty_propensity: f64,
    pub history: History,
}

/// The consortium: constant total hashrate `H`, block interval `T0` at that
/// hashrate, and its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub total_hashrate: f64,
    pub block_interval: f64,
    pub stakeholders: Vec<StakeholderProfile>,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_hashrate.is_finite() && self.total_hashrate > 0.0) {
            return Err(Error::invalid("total_hashrate_H", "must be positive"));
        }
        if !(self.block_interval.is_finite() && self.block_interval > 0.0) {
            return Err(Error::invalid("block_interval_T0", "must be positive"));
        }
        if self.stakeholders.is_empty() {
            return Err(Error::invalid("stakeholders", "at least one is required"));
        }
        let mut seen = BTreeSet::new();
        for s in &self.stakeholders {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(
                    "stakeholders",
                    format!("duplicate id `{}`", s.id),
                ));
            }
            if !(0.0..=1.0).contains(&s.hashrate_share) {
                return Err(Error::invalid(
                    "share",
                    format!("`{}` has share {} outside [0, 1]", s.id, s.hashrate_share),
                ));
            }
            if !(0.0..=1.0).contains(&s.dishonesty_propensity) {
                return Err(Error::invalid(
                    "propensity",
                    format!(
                        "`{}` has propensity {} outside [0, 1]",
                        s.id, s.dishonesty_propensity
                    ),
                ));
            }
            s.history.validate()?;
        }
        let total: f64 = self.stakeholders.iter().map(|s| s.hashrate_share).sum();
        if (total - 1.0).abs() > SHARE_TOLERANCE {
            return Err(Error::invalid(
                "stakeholders",
                format!("hashrate shares sum to {total}, not 1"),
            ));
        }
        Ok(())
    }

    pub fn stakeholder(&self, id: &str) -> Option<&StakeholderProfile> {
        self.stakeholders.iter().find(|s| s.id == id)
    }

    pub fn histories(&self) -> Histories {
        self.stakeholders
            .iter()
            .map(|s| (s.id.clone(), s.history))
            .collect()
    }

    /// Expected wall-clock time for `blocks` blocks at the full hashrate.
    pub fn expected_duration(&self, blocks: f64) -> f64 {
        blocks * self.block_interval
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeholderSpec {
    pub id: String,
    pub share: f64,
    pub propensity: f64,
}

/// Distribution of transaction values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ValueDistribution {
    Lognormal { mu: f64, sigma: f64 },
    Uniform { low: f64, high: f64 },
}

impl ValueDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ValueDistribution::Lognormal { mu, sigma } => {
                mu.is_finite() && sigma.is_finite() && sigma >= 0.0
            }
            ValueDistribution::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && low >= 0.0 && low < high
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "value_distribution",
                format!("invalid parameters {self:?}"),
            ))
        }
    }

    /// The distribution's median, used as the reference value when scaling
    /// the attackers' sensitivity to `v`.
    pub fn median(&self) -> f64 {
        match *self {
            ValueDistribution::Lognormal { mu, .. } => mu.exp(),
            ValueDistribution::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ValueDistribution::Lognormal { mu, sigma } => LogNormal::new(mu, sigma)
                .expect("validated lognormal parameters")
                .sample(rng),
            ValueDistribution::Uniform { low, high } => Uniform::new(low, high)
                .expect("validated uniform bounds")
                .sample(rng),
        }
    }
}

fn default_value_sensitivity() -> f64 {
    0.3
}
fn default_lead_cutoff() -> u32 {
    DEFAULT_LEAD_CUTOFF
}
fn default_total_hashrate() -> f64 {
    1.0
}
fn default_block_interval() -> f64 {
    600.0
}

/// Collusion scenario, read from a TOML file.
///
/// Coalitions form with probability `collusion_rate`; each stakeholder then
/// joins with probability equal to its propensity. A coalition whose attack
/// is rational under `rationality` always attacks. Otherwise it attacks with
/// probability `irrationality_rho + value_sensitivity * v / (v + median_v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub stakeholders: Vec<StakeholderSpec>,
    pub value_distribution: ValueDistribution,
    pub collusion_rate: f64,
    pub irrationality_rho: f64,
    pub observation_sigma: f64,
    pub confirmations_n: u32,
    #[serde(rename = "block_value_B")]
    pub block_value: f64,
    #[serde(default = "default_value_sensitivity")]
    pub value_sensitivity: f64,
    #[serde(default)]
    pub rationality: RationalityMode,
    /// When set, every episode uses exactly this coalition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_coalition: Option<Vec<String>>,
    #[serde(default = "default_lead_cutoff")]
    pub lead_cutoff: u32,
    #[serde(default = "default_total_hashrate", rename = "total_hashrate_H")]
    pub total_hashrate: f64,
    #[serde(default = "default_block_interval", rename = "block_interval_T0")]
    pub block_interval: f64,
}

pub const DEFAULT_SCENARIO_TOML: &str = include_str!("../../scenarios/default.toml");

impl Default for Scenario {
    fn default() -> Self {
        Scenario::from_toml(DEFAULT_SCENARIO_TOML).expect("bundled default scenario is valid")
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Malformed {
            path: "<scenario>".into(),
            line: 0,
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scenario: Scenario = toml::from_str(&text).map_err(|e| Error::Malformed {
            path: path.into(),
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.network().validate()?;
        self.value_distribution.validate()?;
        for (name, value) in [
            ("collusion_rate", self.collusion_rate),
            ("irrationality_rho", self.irrationality_rho),
            ("value_sensitivity", self.value_sensitivity),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(name, format!("{value} is not in [0, 1]")));
            }
        }
        if !(self.observation_sigma.is_finite() && self.observation_sigma >= 0.0) {
            return Err(Error::invalid(
                "observation_sigma",
                "must be finite and >= 0",
            ));
        }
        if self.confirmations_n < 1 {
            return Err(Error::invalid("confirmations_n", "must be at least 1"));
        }
        if !(self.block_value.is_finite() && self.block_value >= 0.0) {
            return Err(Error::invalid("block_value_B", "must be finite and >= 0"));
        }
        if self.lead_cutoff < MIN_LEAD_CUTOFF {
            return Err(Error::invalid(
                "lead_cutoff",
                format!("must be at least {MIN_LEAD_CUTOFF}"),
            ));
        }
        if let Some(forced) = &self.forced_coalition {
            if forced.is_empty() {
                return Err(Error::invalid("forced_coalition", "must not be empty"));
            }
            for id in forced {
                if !self.stakeholders.iter().any(|s| &s.id == id) {
                    return Err(Error::invalid(
                        "forced_coalition",
                        format!("unknown stakeholder `{id}`"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Network parameters with empty histories.
    pub fn network(&self) -> NetworkParams {
        NetworkParams {
            total_hashrate: self.total_hashrate,
            block_interval: self.block_interval,
            stakeholders: self
                .stakeholders
                .iter()
                .map(|s| StakeholderProfile {
                    id: s.id.clone(),
                    hashrate_share: s.share,
                    dishonesty_propensity: s.propensity,
                    history: History::default(),
                })
                .collect(),
        }
    }
}
