//! Attacker payoffs for a double-spend attempt.
//!
//! A successful attack keeps the commodity value `v`; a failed one loses
//! `v` together with the `o` pre-mined blocks worth `B` each. The step rule
//! switches on the attacker's hashrate share alone; the expected form weights
//! both outcomes by the exact double-spend success probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::race_math::{double_spend_risk, HashratePartition};

/// Economic parameters of one attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackStake {
    value: f64,
    blocks_at_risk: u32,
    block_value: f64,
}

impl AttackStake {
    pub fn new(value: f64, blocks_at_risk: u32, block_value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::invalid(
                "v",
                format!("{value} must be finite and >= 0"),
            ));
        }
        if !block_value.is_finite() || block_value < 0.0 {
            return Err(Error::invalid(
                "B",
                format!("{block_value} must be finite and >= 0"),
            ));
        }
        Ok(Self {
            value,
            blocks_at_risk,
            block_value,
        })
    }

    /// Commodity value `v`.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Pre-mined blocks `o` forfeited on failure.
    pub fn blocks_at_risk(&self) -> u32 {
        self.blocks_at_risk
    }

    /// Value `B` of each block.
    pub fn block_value(&self) -> f64 {
        self.block_value
    }

    /// `v + o B`, the amount lost when the attack fails.
    pub fn loss_on_failure(&self) -> f64 {
        self.value + f64::from(self.blocks_at_risk) * self.block_value
    }
}

/// Signed payoff in abstract currency units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffValue(pub f64);

impl PayoffValue {
    pub fn amount(self) -> f64 {
        self.0
    }
}

/// How an attacker judges whether attacking pays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationalityMode {
    /// Attack iff the step payoff is positive, i.e. `q >= 0.5`.
    #[default]
    Step,
    /// Attack iff the success-weighted payoff is positive.
    Expected,
}

/// `+v` if `q >= 0.5`, otherwise `-(v + o B)`.
pub fn attacker_payoff(stake: AttackStake, split: HashratePartition) -> PayoffValue {
    if split.attacker() >= 0.5 {
        PayoffValue(stake.value)
    } else {
        PayoffValue(-stake.loss_on_failure())
    }
}

/// The attacker's utility `u(a)`; the same rule as [`attacker_payoff`].
pub fn attack_utility(stake: AttackStake, split: HashratePartition) -> PayoffValue {
    attacker_payoff(stake, split)
}

/// `r v - (1 - r)(v + o B)` with `r` the success probability after `n`
/// confirmations.
pub fn expected_attack_payoff(
    stake: AttackStake,
    split: HashratePartition,
    n: u32,
) -> Result<PayoffValue> {
    let r = double_spend_risk(n, split)?;
    if r == 1.0 {
        return Ok(attacker_payoff(stake, split));
    }
    Ok(PayoffValue(
        r * stake.value - (1.0 - r) * stake.loss_on_failure(),
    ))
}

pub fn is_attack_rational(
    stake: AttackStake,
    split: HashratePartition,
    mode: RationalityMode,
    n: u32,
) -> Result<bool> {
    match mode {
        RationalityMode::Step => Ok(split.attacker() >= 0.5),
        RationalityMode::Expected => Ok(expected_attack_payoff(stake, split, n)?.amount() > 0.0),
    }
}
