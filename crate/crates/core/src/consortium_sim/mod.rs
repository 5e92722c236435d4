//! Monte Carlo simulation of block races and of consortium transactions with
//! colluding coalitions.

mod episode;
mod race;
mod scenario;
mod trace;

pub use episode::{
    attempt_probability, draw_episode, form_coalition, generate_dataset, generate_episode,
    record_outcome, ClassStats, Coalition, Dataset, DatasetSummary, Episode, Observables,
    Transaction, PREMINED_BLOCKS,
};
pub use race::{
    estimate_risk_monte_carlo, simulate_block_race, RaceOutcome, RaceResult, RiskEstimate,
    DEFAULT_LEAD_CUTOFF, MIN_LEAD_CUTOFF, MIN_TRIALS,
};
pub use scenario::{
    Histories, History, NetworkParams, Scenario, StakeholderProfile, StakeholderSpec,
    ValueDistribution, DEFAULT_SCENARIO_TOML, SHARE_TOLERANCE,
};
pub use trace::{parse_trace, read_trace, write_trace, write_trace_to};
