//! Exact catch-up and double-spend probabilities for a proof-of-work block race.
//!
//! The honest network holds hashrate share `p`, the attacker `q = 1 - p`.
//! An attacker `z` blocks behind overtakes the honest chain with probability
//! `a_z = min(q/p, 1)^max(z+1, 0)`. A merchant waiting for `n` confirmations
//! is defrauded with probability
//!
//! ```text
//! r(n) = sum_{m>=0} P(m) a_{n-m-1}
//!      = 1 - sum_{m=0}^{n} C(m+n-1, m) (p^n q^m - p^m q^n)      (q < p)
//! ```
//!
//! where `P(m) = C(m+n-1, m) p^n q^m` is the probability the attacker mines
//! exactly `m` blocks while the honest network mines its `n`-th, and the
//! attacker starts the race with one pre-mined block.
//!
//! All binomial terms are evaluated in log space so `n` in the tens of
//! thousands neither overflows nor underflows prematurely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `p + q = 1` accepted by [`HashratePartition::new`].
pub const PARTITION_TOLERANCE: f64 = 1e-12;

/// Default upper bound on the confirmation search.
pub const DEFAULT_N_CAP: u32 = 10_000;

/// Smallest absorbing ceiling used by [`oracle_z_max`].
pub const MIN_ORACLE_Z_MAX: u32 = 200;

/// Sweep-to-sweep change below which the recurrence oracle is converged.
pub const ORACLE_CONVERGENCE: f64 = 1e-12;

/// Split of a constant total hashrate between the honest network and the
/// attacker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashratePartition {
    honest: f64,
    attacker: f64,
}

impl HashratePartition {
    /// Builds a partition from both shares, rejecting pairs that are not
    /// probabilities or do not sum to one within [`PARTITION_TOLERANCE`].
    pub fn new(honest: f64, attacker: f64) -> Result<Self> {
        for (name, value) in [("p", honest), ("q", attacker)] {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(name, format!("{value} is not in [0, 1]")));
            }
        }
        if (honest + attacker - 1.0).abs() > PARTITION_TOLERANCE {
            return Err(Error::invalid(
                "q",
                format!("p + q = {} differs from 1", honest + attacker),
            ));
        }
        Ok(Self { honest, attacker })
    }

    /// Builds the partition `(1 - q, q)`.
    pub fn from_attacker_share(q: f64) -> Result<Self> {
        if !q.is_finite() || !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid("q", format!("{q} is not in [0, 1]")));
        }
        Self::new(1.0 - q, q)
    }

    pub fn honest(&self) -> f64 {
        self.honest
    }

    pub fn attacker(&self) -> f64 {
        self.attacker
    }

    /// True when the attacker holds at least half of the hashrate, the regime
    /// in which every race is eventually won by the attacker.
    pub fn is_majority(&self) -> bool {
        self.attacker >= self.honest
    }
}

/// The honest chain's advantage over the attacker, in blocks. Negative when
/// the attacker is ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Lead(pub i64);

/// Outcome of a minimum-confirmation search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confirmations {
    Required(u32),
    /// No `n <= n_cap` pushes the risk below the ceiling.
    Unattainable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfirmationPolicy {
    pub epsilon: f64,
    pub confirmations: Confirmations,
    pub n_cap: u32,
}

impl ConfirmationPolicy {
    pub fn n_star(&self) -> Option<u32> {
        match self.confirmations {
            Confirmations::Required(n) => Some(n),
            Confirmations::Unattainable => None,
        }
    }
}

/// Probability that an attacker `lead` blocks behind ever overtakes the
/// honest chain. Ties (`q = p`) count as certain success.
pub fn catch_up_probability(split: HashratePartition, lead: Lead) -> f64 {
    if lead.0 < 0 || split.is_majority() {
        return 1.0;
    }
    let ratio = split.attacker / split.honest;
    // lead + 1 can exceed i32; powf keeps huge exponents well defined.
    ratio.powf(lead.0 as f64 + 1.0)
}

/// Ceiling used by callers that do not pick their own: `max(200, 10 z)`.
pub fn oracle_z_max(lead: Lead) -> u32 {
    let scaled = lead.0.max(0).saturating_mul(10);
    u32::try_from(scaled)
        .unwrap_or(u32::MAX)
        .max(MIN_ORACLE_Z_MAX)
}

/// Solves `a_z = p a_{z+1} + q a_{z-1}` on `z in [-1, z_max]` with
/// `a_{-1} = 1` and `a_{z_max} = 0` by over-relaxed Gauss-Seidel sweeps and
/// returns the converged `a_z`.
///
/// The relaxation factor is the optimum for a consistently ordered
/// tridiagonal system whose Jacobi spectral radius is `2 sqrt(pq) cos(pi/N)`.
/// This route never evaluates the closed form, so it can check it.
pub fn catch_up_recurrence_oracle(
    split: HashratePartition,
    lead: Lead,
    z_max: u32,
    iterations: u32,
) -> Result<f64> {
    if split.is_majority() {
        return Err(Error::invalid(
            "q",
            "recurrence truncation needs an honest majority (q < p)",
        ));
    }
    if lead.0 < 0 {
        return Ok(1.0);
    }
    if i64::from(z_max) < lead.0 + 10 {
        return Err(Error::invalid(
            "z_max",
            format!("{z_max} must be at least z + 10 = {}", lead.0 + 10),
        ));
    }
    let (p, q) = (split.honest, split.attacker);
    // a[j] holds a_{j-1}; a[0] and a[intervals] are the fixed boundaries.
    let intervals = z_max as usize + 1;
    let mut a = vec![0.0_f64; intervals + 1];
    a[0] = 1.0;

    let jacobi = 2.0 * (p * q).sqrt() * (std::f64::consts::PI / intervals as f64).cos();
    let omega = 2.0 / (1.0 + (1.0 - jacobi * jacobi).max(0.0).sqrt());

    for _ in 0..iterations {
        let mut change = 0.0_f64;
        for j in 1..intervals {
            let target = p * a[j + 1] + q * a[j - 1];
            let next = a[j] + omega * (target - a[j]);
            change = change.max((next - a[j]).abs());
            a[j] = next;
        }
        if !change.is_finite() {
            return Err(Error::Numerical("recurrence oracle diverged".into()));
        }
        if change <= ORACLE_CONVERGENCE {
            return Ok(a[lead.0 as usize + 1].clamp(0.0, 1.0));
        }
    }
    Err(Error::Numerical(format!(
        "recurrence oracle did not converge within {iterations} sweeps"
    )))
}

/// Probability that the attacker mines exactly `m` blocks while the honest
/// network mines its `n`-th: `C(m+n-1, m) p^n q^m`.
pub fn negative_binomial_pmf(n: u32, m: u32, split: HashratePartition) -> Result<f64> {
    check_confirmations(n)?;
    let (p, q) = (split.honest, split.attacker);
    if q == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let (n, m) = (f64::from(n), f64::from(m));
    let log_term = ln_choose(m + n - 1.0, m) + n * p.ln() + m * q.ln();
    Ok(log_term.exp())
}

/// Probability that a double-spend succeeds against a merchant waiting for
/// `n` confirmations. Exactly 1 whenever `q >= p`.
///
/// Evaluated as a finite sum of non-negative terms that is algebraically
/// equal to `1 - sum_{m=0}^{n} C(m+n-1, m)(p^n q^m - p^m q^n)`: the
/// negative-binomial part `1 - P(M <= n)` is rewritten as the binomial tail
/// `P(Bin(2n, p) < n)`. This avoids the catastrophic cancellation of the
/// literal form once the risk falls below machine epsilon.
pub fn double_spend_risk(n: u32, split: HashratePartition) -> Result<f64> {
    check_confirmations(n)?;
    if split.is_majority() {
        return Ok(1.0);
    }
    let (p, q) = (split.honest, split.attacker);
    if q == 0.0 {
        return Ok(0.0);
    }
    let (ln_p, ln_q) = (p.ln(), q.ln());
    let nf = f64::from(n);
    let mut total = LogSum::default();

    // sum_{k=0}^{n-1} C(2n, k) p^k q^(2n-k)
    let mut log_term = 2.0 * nf * ln_q;
    for k in 0..n {
        total.add(log_term);
        let k = f64::from(k);
        log_term += (2.0 * nf - k).ln() - (k + 1.0).ln() + ln_p - ln_q;
    }

    // sum_{m=0}^{n} C(m+n-1, m) p^m q^n
    let mut log_term = nf * ln_q;
    for m in 0..=n {
        total.add(log_term);
        let m = f64::from(m);
        log_term += (m + nf).ln() - (m + 1.0).ln() + ln_p;
    }

    Ok(total.value().clamp(0.0, 1.0))
}

/// Direct evaluation of `sum_m P(m) a_{n-m-1}`, stopping once the remaining
/// negative-binomial tail mass is provably below `tail_tolerance`.
/// Independent of [`double_spend_risk`]; only defined for `q < p`.
pub fn double_spend_risk_series(
    n: u32,
    split: HashratePartition,
    tail_tolerance: f64,
) -> Result<f64> {
    check_confirmations(n)?;
    if split.is_majority() {
        return Err(Error::invalid(
            "q",
            "the series does not converge for q >= p; use double_spend_risk",
        ));
    }
    if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
        return Err(Error::invalid(
            "tail_tolerance",
            format!("{tail_tolerance} is not in (0, 1)"),
        ));
    }
    let (p, q) = (split.honest, split.attacker);
    if q == 0.0 {
        return Ok(0.0);
    }
    let nf = f64::from(n);
    let (ln_p, ln_q) = (p.ln(), q.ln());
    let ln_ratio = ln_q - ln_p;

    let mut sum = 0.0;
    let mut log_pmf = nf * ln_p;
    let mut m: u32 = 0;
    loop {
        // a_{n-m-1}: the attacker is n - m - 1 blocks behind after the race.
        let log_catch_up = if m < n {
            f64::from(n - m) * ln_ratio
        } else {
            0.0
        };
        sum += (log_pmf + log_catch_up).exp();

        let mf = f64::from(m);
        let log_next = log_pmf + (mf + nf).ln() - (mf + 1.0).ln() + ln_q;
        // P(j+1)/P(j) = q (j+n)/(j+1) decreases in j, so once it is below one
        // the tail beyond m is dominated by a geometric series.
        let next_ratio = q * (mf + 1.0 + nf) / (mf + 2.0);
        if m >= n && next_ratio < 1.0 {
            let tail_bound = log_next.exp() / (1.0 - next_ratio);
            if tail_bound < tail_tolerance {
                break;
            }
        }
        log_pmf = log_next;
        m = m
            .checked_add(1)
            .ok_or_else(|| Error::Numerical("series did not reach tolerance".into()))?;
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Smallest `n >= 1` with `double_spend_risk(n) < epsilon`, searched up to
/// `n_cap`. Always unattainable for an attacker majority.
pub fn min_confirmations(
    split: HashratePartition,
    epsilon: f64,
    n_cap: u32,
) -> Result<ConfirmationPolicy> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("eps", format!("{epsilon} is not in (0, 1)")));
    }
    if n_cap < 1 {
        return Err(Error::invalid("n_cap", "must be at least 1"));
    }
    let policy = |confirmations| ConfirmationPolicy {
        epsilon,
        confirmations,
        n_cap,
    };
    if split.is_majority() {
        return Ok(policy(Confirmations::Unattainable));
    }
    let below = |n: u32| double_spend_risk(n, split).map(|r| r < epsilon);

    if below(1)? {
        return Ok(policy(Confirmations::Required(1)));
    }
    // Gallop to bracket the crossing, then bisect. Invariant: risk(lo) >= eps.
    let mut lo = 1u32;
    let mut hi = loop {
        let probe = lo.saturating_mul(2).min(n_cap);
        if probe == lo {
            return Ok(policy(Confirmations::Unattainable));
        }
        if below(probe)? {
            break probe;
        }
        lo = probe;
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(policy(Confirmations::Required(hi)))
}

fn check_confirmations(n: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid("n", "at least one confirmation is required"));
    }
    Ok(())
}

/// `ln C(a, b)` for real `a >= b >= 0`.
pub(crate) fn ln_choose(a: f64, b: f64) -> f64 {
    if b == 0.0 || b == a {
        return 0.0;
    }
    libm::lgamma(a + 1.0) - libm::lgamma(b + 1.0) - libm::lgamma(a - b + 1.0)
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSum {
    fn add(&mut self, log_value: f64) {
        if log_value == f64::NEG_INFINITY {
            return;
        }
        if log_value > self.max {
            self.scaled = self.scaled * (self.max - log_value).exp() + 1.0;
            self.max = log_value;
        } else {
            self.scaled += (log_value - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            0.0
        } else {
            self.scaled * self.max.exp()
        }
    }
}
