use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::race_math::HashratePartition;
use crate::rng::{substream, MONTE_CARLO_DOMAIN};

/// Lead at which the honest chain is declared the winner of the race.
pub const DEFAULT_LEAD_CUTOFF: u32 = 200;
pub const MIN_LEAD_CUTOFF: u32 = 50;
pub const MIN_TRIALS: u64 = 100;

/// Trials per independently seeded block; fixed so results do not depend on
/// how blocks are scheduled across threads.
const TRIALS_PER_BLOCK: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceResult {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceOutcome {
    /// Blocks the attacker found while the honest network found its `n`.
    pub attacker_blocks: u32,
    pub result: RaceResult,
    /// Steps of the catch-up walk after the confirmation phase.
    pub walk_steps: u64,
}

impl RaceOutcome {
    pub fn succeeded(&self) -> bool {
        self.result == RaceResult::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub successes: u64,
    pub trials: u64,
}

/// Plays one double-spend race block by block.
///
/// The merchant waits for `n` honest blocks while the attacker mines in
/// private, starting one block ahead. Afterwards the honest lead performs a
/// +1/-1 walk until the attacker overtakes or the lead reaches
/// `lead_cutoff`.
pub fn simulate_block_race<R: Rng + ?Sized>(
    split: HashratePartition,
    n: u32,
    lead_cutoff: u32,
    rng: &mut R,
) -> Result<RaceOutcome> {
    let attacker_step = check_race(split, n, lead_cutoff)?;
    Ok(race(attacker_step, n, lead_cutoff, rng))
}

fn check_race(split: HashratePartition, n: u32, lead_cutoff: u32) -> Result<Option<Bernoulli>> {
    if n < 1 {
        return Err(Error::invalid("n", "at least one confirmation is required"));
    }
    if lead_cutoff < MIN_LEAD_CUTOFF {
        return Err(Error::invalid(
            "lead_cutoff",
            format!("{lead_cutoff} is below the minimum of {MIN_LEAD_CUTOFF}"),
        ));
    }
    if split.honest() == 0.0 {
        return Err(Error::invalid(
            "q",
            "with q = 1 the honest network never confirms the transaction",
        ));
    }
    if split.attacker() == 0.0 {
        return Ok(None);
    }
    Bernoulli::new(split.attacker())
        .map(Some)
        .map_err(|e| Error::invalid("q", e.to_string()))
}

fn race<R: Rng + ?Sized>(
    attacker_step: Option<Bernoulli>,
    n: u32,
    lead_cutoff: u32,
    rng: &mut R,
) -> RaceOutcome {
    let Some(attacker_step) = attacker_step else {
        // An attacker without hashrate never finds a block.
        return RaceOutcome {
            attacker_blocks: 0,
            result: RaceResult::Failure,
            walk_steps: 0,
        };
    };

    let mut honest = 0u32;
    let mut attacker = 0u32;
    while honest < n {
        if attacker_step.sample(rng) {
            attacker += 1;
        } else {
            honest += 1;
        }
    }

    let cutoff = i64::from(lead_cutoff);
    let mut deficit = i64::from(n) - i64::from(attacker) - 1;
    let mut steps = 0u64;
    while deficit >= 0 && deficit < cutoff {
        deficit += if attacker_step.sample(rng) { -1 } else { 1 };
        steps += 1;
    }
    RaceOutcome {
        attacker_blocks: attacker,
        result: if deficit < 0 {
            RaceResult::Success
        } else {
            RaceResult::Failure
        },
        walk_steps: steps,
    }
}

/// Fraction of successful races over `trials` independent runs, with its
/// binomial standard error. Deterministic in `(seed, trials)` whatever the
/// size of the current rayon pool.
pub fn estimate_risk_monte_carlo(
    split: HashratePartition,
    n: u32,
    trials: u64,
    lead_cutoff: u32,
    seed: u64,
) -> Result<RiskEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(
            "trials",
            format!("{trials} is below the minimum of {MIN_TRIALS}"),
        ));
    }
    let attacker_step = check_race(split, n, lead_cutoff)?;
    let blocks = trials.div_ceil(TRIALS_PER_BLOCK);
    let successes: u64 = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = substream(seed, MONTE_CARLO_DOMAIN, block);
            let start = block * TRIALS_PER_BLOCK;
            let len = TRIALS_PER_BLOCK.min(trials - start);
            (0..len)
                .filter(|_| race(attacker_step, n, lead_cutoff, &mut rng).succeeded())
                .count() as u64
        })
        .sum();
    let estimate = successes as f64 / trials as f64;
    Ok(RiskEstimate {
        estimate,
        std_error: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
        successes,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::race_math::double_spend_risk;
    use crate::rng::rng_from_seed;

    fn split(q: f64) -> HashratePartition {
        HashratePartition::from_attacker_share(q).unwrap()
    }

    #[test]
    fn zero_hashrate_attacker_always_fails() {
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let o = simulate_block_race(split(0.0), 3, 200, &mut rng).unwrap();
            assert_eq!(o.attacker_blocks, 0);
            assert_eq!(o.result, RaceResult::Failure);
        }
    }

    #[test]
    fn attacker_only_split_is_rejected() {
        let mut rng = rng_from_seed(1);
        assert!(matches!(
            simulate_block_race(split(1.0), 3, 200, &mut rng),
            Err(Error::InvalidArgument { name: "q", .. })
        ));
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = rng_from_seed(1);
        assert!(simulate_block_race(split(0.2), 0, 200, &mut rng).is_err());
        assert!(simulate_block_race(split(0.2), 1, 49, &mut rng).is_err());
        assert!(matches!(
            estimate_risk_monte_carlo(split(0.2), 1, 99, 200, 0),
            Err(Error::InvalidArgument { name: "trials", .. })
        ));
    }

    #[test]
    fn outcome_is_consistent_with_walk() {
        let mut rng = rng_from_seed(9);
        for _ in 0..2000 {
            let o = simulate_block_race(split(0.3), 2, 60, &mut rng).unwrap();
            // An attacker already ahead after the confirmation phase wins
            // without walking.
            if o.attacker_blocks + 1 > 2 {
                assert!(o.succeeded());
                assert_eq!(o.walk_steps, 0);
            } else if !o.succeeded() {
                assert!(o.walk_steps >= 58);
            }
        }
    }

    #[test]
    fn single_confirmation_estimate_matches_closed_form() {
        let est = estimate_risk_monte_carlo(split(0.1), 1, 1_000_000, 200, 2024).unwrap();
        assert!((est.estimate - 0.2).abs() <= 3.0 * 0.0004, "{est:?}");
    }

    #[test]
    fn majority_estimate_is_near_one() {
        let est = estimate_risk_monte_carlo(split(0.5), 4, 100_000, 200, 5).unwrap();
        assert!(est.estimate >= 0.99, "{est:?}");
        assert!(est.estimate <= 1.0);
    }

    #[test]
    fn estimates_are_deterministic_and_thread_independent() {
        let s = split(0.25);
        let a = estimate_risk_monte_carlo(s, 2, 50_000, 200, 11).unwrap();
        let b = estimate_risk_monte_carlo(s, 2, 50_000, 200, 11).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let c = pool
            .install(|| estimate_risk_monte_carlo(s, 2, 50_000, 200, 11))
            .unwrap();
        assert_eq!(a, c);
        let closed = double_spend_risk(2, s).unwrap();
        assert!((a.estimate - closed).abs() <= 4.0 * a.std_error);
    }
}
