use std::collections::BTreeSet;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::payoff_game::{is_attack_rational, AttackStake};
use crate::race_math::HashratePartition;
use crate::rng::{derive_seed, rng_from_seed, EPISODE_DOMAIN};

use super::race::simulate_block_race;
use super::scenario::{Histories, NetworkParams, Scenario};

/// Blocks an attacker forfeits on failure: the single block it pre-mines
/// before the merchant's confirmations begin.
pub const PREMINED_BLOCKS: u32 = 1;

/// A colluding subset of stakeholders pooling their hashrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coalition {
    member_ids: Vec<String>,
    pooled_q: f64,
}

impl Coalition {
    /// Builds a coalition from member ids, summing their shares.
    pub fn new(params: &NetworkParams, member_ids: &[String]) -> Result<Self> {
        let unique: BTreeSet<&String> = member_ids.iter().collect();
        if unique.is_empty() {
            return Err(Error::invalid("coalition", "must have at least one member"));
        }
        if unique.len() != member_ids.len() {
            return Err(Error::invalid("coalition", "duplicate member id"));
        }
        let mut pooled = 0.0;
        for id in member_ids {
            let s = params
                .stakeholder(id)
                .ok_or_else(|| Error::invalid("coalition", format!("unknown member `{id}`")))?;
            pooled += s.hashrate_share;
        }
        if pooled <= 0.0 {
            return Err(Error::invalid(
                "coalition",
                "pooled hashrate must be positive",
            ));
        }
        Ok(Self {
            member_ids: member_ids.to_vec(),
            pooled_q: pooled.min(1.0),
        })
    }

    pub fn member_ids(&self) -> &[String] {
        &self.member_ids
    }

    pub fn pooled_q(&self) -> f64 {
        self.pooled_q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub value_v: f64,
    pub confirmations_n: u32,
    pub block_value_b: f64,
}

/// What the detection agent may see about an episode. Carries no label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observables {
    pub pooled_q_observed: f64,
    pub value_v: f64,
    pub confirmations_n: u32,
    #[serde(rename = "block_value_B")]
    pub block_value_b: f64,
    /// Stakeholders known to be mining together in this transaction.
    pub coalition_members: Vec<String>,
    pub histories: Histories,
}

/// One transaction passing through the approval pipeline, with ground truth.
/// Field order is the trace line's field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Episode {
    pub seed: u64,
    pub value_v: f64,
    pub confirmations_n: u32,
    #[serde(rename = "block_value_B")]
    pub block_value_b: f64,
    pub coalition_members: Vec<String>,
    pub pooled_q_true: f64,
    pub pooled_q_observed: f64,
    pub attack_attempted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_succeeded: Option<bool>,
    /// Stakeholder histories as they stood before this transaction.
    pub histories: Histories,
}

impl Episode {
    pub fn transaction(&self) -> Transaction {
        Transaction {
            value_v: self.value_v,
            confirmations_n: self.confirmations_n,
            block_value_b: self.block_value_b,
        }
    }

    pub fn coalition(&self) -> Option<Coalition> {
        if self.coalition_members.is_empty() {
            None
        } else {
            Some(Coalition {
                member_ids: self.coalition_members.clone(),
                pooled_q: self.pooled_q_true,
            })
        }
    }

    pub fn observables(&self) -> Observables {
        Observables {
            pooled_q_observed: self.pooled_q_observed,
            value_v: self.value_v,
            confirmations_n: self.confirmations_n,
            block_value_b: self.block_value_b,
            coalition_members: self.coalition_members.clone(),
            histories: self.histories.clone(),
        }
    }

    /// Checks the label invariants: an outcome is present exactly when an
    /// attack was attempted, and only coalitions attack.
    pub fn validate(&self) -> Result<()> {
        if self.attack_attempted != self.attack_succeeded.is_some() {
            return Err(Error::invalid(
                "attack_succeeded",
                "must be present exactly when attack_attempted is true",
            ));
        }
        if self.attack_attempted && self.coalition_members.is_empty() {
            return Err(Error::invalid(
                "attack_attempted",
                "an attack needs a coalition",
            ));
        }
        for (name, v) in [
            ("pooled_q_true", self.pooled_q_true),
            ("pooled_q_observed", self.pooled_q_observed),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} is not in [0, 1]")));
            }
        }
        if !(self.value_v.is_finite() && self.value_v >= 0.0) {
            return Err(Error::invalid("value_v", "must be finite and >= 0"));
        }
        for h in self.histories.values() {
            h.validate()?;
        }
        Ok(())
    }
}

/// Samples a colluding subset: with probability `collusion_rate` a collusion
/// round happens and each stakeholder joins with probability equal to its
/// propensity. A forced coalition in the scenario overrides sampling.
pub fn form_coalition<R: Rng + ?Sized>(
    params: &NetworkParams,
    scenario: &Scenario,
    rng: &mut R,
) -> Result<Option<Coalition>> {
    if let Some(forced) = &scenario.forced_coalition {
        return Coalition::new(params, forced).map(Some);
    }
    if !rng.random_bool(scenario.collusion_rate) {
        return Ok(None);
    }
    let members: Vec<String> = params
        .stakeholders
        .iter()
        .filter(|s| rng.random_bool(s.dishonesty_propensity))
        .map(|s| s.id.clone())
        .collect();
    if members.is_empty() {
        return Ok(None);
    }
    match Coalition::new(params, &members) {
        Ok(c) => Ok(Some(c)),
        // Members holding no hashrate at all cannot mine a fork.
        Err(_) => Ok(None),
    }
}

/// Probability that `coalition` attempts an attack on a transaction of value `v`.
pub fn attempt_probability(
    scenario: &Scenario,
    coalition: &Coalition,
    value_v: f64,
) -> Result<f64> {
    let split = HashratePartition::from_attacker_share(coalition.pooled_q())?;
    let stake = AttackStake::new(value_v, PREMINED_BLOCKS, scenario.block_value)?;
    if is_attack_rational(stake, split, scenario.rationality, scenario.confirmations_n)? {
        return Ok(1.0);
    }
    let reference = scenario.value_distribution.median();
    let pull = if value_v + reference > 0.0 {
        value_v / (value_v + reference)
    } else {
        0.0
    };
    Ok((scenario.irrationality_rho + scenario.value_sensitivity * pull).clamp(0.0, 1.0))
}

/// Draws one episode from its own seed. Histories are left empty; they are
/// filled in by [`record_outcome`] or [`generate_dataset`].
pub fn draw_episode(params: &NetworkParams, scenario: &Scenario, seed: u64) -> Result<Episode> {
    let mut rng = rng_from_seed(seed);
    let value_v = scenario.value_distribution.sample(&mut rng);
    let coalition = form_coalition(params, scenario, &mut rng)?;

    let (attack_attempted, attack_succeeded) = match &coalition {
        Some(c) => {
            let attempt = attempt_probability(scenario, c, value_v)?;
            if rng.random_bool(attempt) {
                let split = HashratePartition::from_attacker_share(c.pooled_q())?;
                let succeeded = if split.honest() == 0.0 {
                    // The honest side has nothing left to mine with.
                    true
                } else {
                    simulate_block_race(
                        split,
                        scenario.confirmations_n,
                        scenario.lead_cutoff,
                        &mut rng,
                    )?
                    .succeeded()
                };
                (true, Some(succeeded))
            } else {
                (false, None)
            }
        }
        None => (false, None),
    };

    let pooled_q_true = coalition.as_ref().map_or(0.0, Coalition::pooled_q);
    let noise = if scenario.observation_sigma > 0.0 {
        Normal::new(0.0, scenario.observation_sigma)
            .map_err(|e| Error::invalid("observation_sigma", e.to_string()))?
            .sample(&mut rng)
    } else {
        0.0
    };

    Ok(Episode {
        seed,
        value_v,
        confirmations_n: scenario.confirmations_n,
        block_value_b: scenario.block_value,
        coalition_members: coalition.map(|c| c.member_ids).unwrap_or_default(),
        pooled_q_true,
        pooled_q_observed: (pooled_q_true + noise).clamp(0.0, 1.0),
        attack_attempted,
        attack_succeeded,
        histories: Histories::new(),
    })
}

/// Stamps `episode` with the histories before it and folds its outcome into
/// `params`: every stakeholder sees one more transaction, and coalition
/// members of an attempted attack one more defection.
pub fn record_outcome(params: &mut NetworkParams, episode: &mut Episode) {
    episode.histories = params.histories();
    for s in &mut params.stakeholders {
        s.history.transactions += 1;
        if episode.attack_attempted && episode.coalition_members.contains(&s.id) {
            s.history.defections += 1;
        }
    }
}

/// Draws and records one episode.
pub fn generate_episode(
    params: &mut NetworkParams,
    scenario: &Scenario,
    seed: u64,
) -> Result<Episode> {
    let mut episode = draw_episode(params, scenario, seed)?;
    record_outcome(params, &mut episode);
    Ok(episode)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: u64,
    pub mean_value_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub episodes: u64,
    pub attacks: ClassStats,
    pub honest: ClassStats,
    pub successful_attacks: u64,
    pub with_coalition: u64,
    pub final_histories: Histories,
}

impl DatasetSummary {
    pub fn prevalence(&self) -> f64 {
        self.attacks.count as f64 / self.episodes as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub summary: DatasetSummary,
}

/// Generates `count` episodes from one root seed. Episode `i` uses seed
/// `derive_seed(seed, EPISODE_DOMAIN, i)`; draws run in parallel and
/// histories are folded in index order, so the result is independent of the
/// thread count.
pub fn generate_dataset(
    params: &NetworkParams,
    scenario: &Scenario,
    count: u64,
    seed: u64,
) -> Result<Dataset> {
    if count < 1 {
        return Err(Error::invalid("count", "at least one episode is required"));
    }
    params.validate()?;
    scenario.validate()?;
    let mut episodes = (0..count)
        .into_par_iter()
        .map(|i| draw_episode(params, scenario, derive_seed(seed, EPISODE_DOMAIN, i)))
        .collect::<Result<Vec<_>>>()?;

    let mut state = params.clone();
    for episode in &mut episodes {
        record_outcome(&mut state, episode);
    }
    let summary = summarize(&episodes, state.histories());
    Ok(Dataset { episodes, summary })
}

fn summarize(episodes: &[Episode], final_histories: Histories) -> DatasetSummary {
    let mut attacks = ClassStats::default();
    let mut honest = ClassStats::default();
    let mut successful_attacks = 0;
    let mut with_coalition = 0;
    for e in episodes {
        let class = if e.attack_attempted {
            &mut attacks
        } else {
            &mut honest
        };
        class.count += 1;
        class.mean_value_v += e.value_v;
        if e.attack_succeeded == Some(true) {
            successful_attacks += 1;
        }
        if !e.coalition_members.is_empty() {
            with_coalition += 1;
        }
    }
    for class in [&mut attacks, &mut honest] {
        if class.count > 0 {
            class.mean_value_v /= class.count as f64;
        }
    }
    DatasetSummary {
        episodes: episodes.len() as u64,
        attacks,
        honest,
        successful_attacks,
        with_coalition,
        final_histories,
    }
}
