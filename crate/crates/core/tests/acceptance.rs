//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints one `[PASS]`/`[FAIL]` line in ordinary `cargo test` output; the
//! process fails if any criterion does.

use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use forkguard::collusion_detector::{
    detect, evaluate, labeled_examples, loss_and_gradient, train_on_episodes, Decision,
    FeatureVector, LabeledExample, TrainingConfig, FEATURE_COUNT,
};
use forkguard::consortium_sim::{estimate_risk_monte_carlo, generate_dataset, Episode, Scenario};
use forkguard::payoff_game::{attack_utility, attacker_payoff, AttackStake};
use forkguard::race_math::{
    catch_up_probability, catch_up_recurrence_oracle, double_spend_risk, double_spend_risk_series,
    min_confirmations, oracle_z_max, Confirmations, HashratePartition, Lead, DEFAULT_N_CAP,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "[{}] criterion {id}: {name} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn split(q: f64) -> HashratePartition {
    HashratePartition::from_attacker_share(q).unwrap()
}

fn q_grid() -> Vec<f64> {
    (1..=9).map(|k| f64::from(k) * 0.05).collect()
}

fn criterion_1_confirmation_policy_table() -> bool {
    let start = Instant::now();
    let got: Vec<Option<u32>> = [0.10, 0.01, 0.001]
        .iter()
        .map(|&eps| {
            min_confirmations(split(0.1), eps, DEFAULT_N_CAP)
                .unwrap()
                .n_star()
        })
        .collect();
    let elapsed = start.elapsed();
    let pass = got == [Some(2), Some(4), Some(6)] && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "q=0.1 needs 2/4/6 confirmations for 10%/1%/0.1%",
        pass,
        &format!("got {got:?} in {elapsed:?}"),
    )
}

fn criterion_2_closed_forms_match_oracles() -> bool {
    let start = Instant::now();
    let mut worst_catch_up = 0.0_f64;
    let mut worst_risk = 0.0_f64;
    for q in q_grid() {
        let s = split(q);
        for z in 0..=20 {
            let lead = Lead(z);
            let oracle =
                catch_up_recurrence_oracle(s, lead, oracle_z_max(lead), 1_000_000).unwrap();
            worst_catch_up = worst_catch_up.max((catch_up_probability(s, lead) - oracle).abs());
        }
        for n in 1..=30 {
            let series = double_spend_risk_series(n, s, 1e-13).unwrap();
            worst_risk = worst_risk.max((double_spend_risk(n, s).unwrap() - series).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_catch_up <= 1e-9 && worst_risk <= 1e-9 && elapsed < Duration::from_secs(10);
    verdict(
        2,
        "closed forms agree with recurrence and direct-sum oracles",
        pass,
        &format!(
            "max catch-up gap {worst_catch_up:.3e}, max risk gap {worst_risk:.3e}, {elapsed:?}"
        ),
    )
}

fn criterion_3_monte_carlo_agrees_with_closed_form() -> bool {
    let start = Instant::now();
    let mut worst_sigma = 0.0_f64;
    let mut spot = f64::NAN;
    let mut failures = Vec::new();
    for (i, q) in [0.05, 0.1, 0.25, 0.4].into_iter().enumerate() {
        for (j, n) in [1u32, 2, 4, 6].into_iter().enumerate() {
            let seed = 1000 + (i * 4 + j) as u64;
            let est = estimate_risk_monte_carlo(split(q), n, 1_000_000, 200, seed).unwrap();
            let exact = double_spend_risk(n, split(q)).unwrap();
            let gap = (est.estimate - exact).abs();
            let sigmas = gap / est.std_error;
            worst_sigma = worst_sigma.max(sigmas);
            if gap > 3.0 * est.std_error {
                failures.push(format!("q={q} n={n}: {} vs {exact}", est.estimate));
            }
            if q == 0.1 && n == 1 {
                spot = est.estimate;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass =
        failures.is_empty() && (spot - 0.2).abs() <= 0.0012 && elapsed < Duration::from_secs(120);
    verdict(
        3,
        "Monte Carlo within 3 standard errors of the closed form",
        pass,
        &format!(
            "worst {worst_sigma:.2} sigma, r(1,0.1) ~ {spot}, {elapsed:?}, failures {failures:?}"
        ),
    )
}

fn criterion_4_majority_boundary() -> bool {
    let mut bad = Vec::new();
    for q in [0.5, 0.55, 0.7] {
        for n in [1, 6, 20] {
            if double_spend_risk(n, split(q)).unwrap() != 1.0 {
                bad.push(format!("risk q={q} n={n}"));
            }
        }
        for eps in [0.1, 0.01, 0.001] {
            let p = min_confirmations(split(q), eps, DEFAULT_N_CAP).unwrap();
            if p.confirmations != Confirmations::Unattainable {
                bad.push(format!("policy q={q} eps={eps}"));
            }
        }
    }
    verdict(
        4,
        "risk is exactly 1 and no confirmation count suffices for q >= 0.5",
        bad.is_empty(),
        &format!("violations {bad:?}"),
    )
}

fn criterion_5_payoff_branches() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for _ in 0..10_000 {
        let v: f64 = rng.random_range(0.0..1e6);
        let o: u32 = rng.random_range(0..100);
        let b: f64 = rng.random_range(0.0..1e4);
        let q: f64 = if rng.random_bool(0.1) {
            0.5
        } else {
            rng.random_range(0.0..=1.0)
        };
        let stake = AttackStake::new(v, o, b).unwrap();
        let s = split(q);
        let expected = if q >= 0.5 { v } else { -(v + f64::from(o) * b) };
        let payoff = attacker_payoff(stake, s).amount();
        let utility = attack_utility(stake, s).amount();
        if payoff.to_bits() != expected.to_bits() || utility.to_bits() != payoff.to_bits() {
            bad += 1;
        }
    }
    verdict(
        5,
        "payoff is +v iff q >= 0.5, else -(v + oB), bit-exact",
        bad == 0,
        &format!("{bad} mismatches in 10000 draws"),
    )
}

fn criterion_6_gradient_check() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let mut weights = [0.0; FEATURE_COUNT];
        weights
            .iter_mut()
            .for_each(|w| *w = normal.sample(&mut rng));
        let bias = normal.sample(&mut rng);
        let size = rng.random_range(5..50);
        let batch: Vec<LabeledExample> = (0..size)
            .map(|_| {
                let mut x = [0.0; FEATURE_COUNT];
                x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                LabeledExample {
                    features: FeatureVector(x),
                    attack: rng.random_bool(0.5),
                }
            })
            .collect();
        let (_, analytic) = loss_and_gradient(&weights, bias, &batch);
        for k in 0..=FEATURE_COUNT {
            let loss_at = |delta: f64| {
                let mut w = weights;
                let mut b = bias;
                if k < FEATURE_COUNT {
                    w[k] += delta;
                } else {
                    b += delta;
                }
                loss_and_gradient(&w, b, &batch).0
            };
            let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[k] - numeric).abs() / scale);
        }
    }
    verdict(
        6,
        "analytic logistic gradient matches central differences",
        worst <= 1e-5,
        &format!("max relative error {worst:.3e} over 100 models"),
    )
}

fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let idx = ((values.len() - 1) as f64 * p).round() as usize;
    values[idx]
}

fn criterion_7_end_to_end_gate() -> bool {
    let start = Instant::now();
    let scenario = Scenario::default();
    let params = scenario.network();
    let train_set = generate_dataset(&params, &scenario, 10_000, 7)
        .unwrap()
        .episodes;
    let test_set = generate_dataset(&params, &scenario, 2_000, 8)
        .unwrap()
        .episodes;
    let model = train_on_episodes(&train_set, TrainingConfig::default())
        .unwrap()
        .model;

    let test_data = labeled_examples(&test_set, model.median_v()).unwrap();
    let auc = evaluate(&model, &test_data, 0.5).unwrap().auc.unwrap();

    // Low-noise majority coalitions on high-value transactions.
    let mut values: Vec<f64> = train_set.iter().map(|e| e.value_v).collect();
    let top_decile = percentile(&mut values, 0.9);
    let mut low_noise = scenario.clone();
    low_noise.observation_sigma = 0.02;
    low_noise.collusion_rate = 1.0;
    let mut majority: Vec<Episode> = Vec::new();
    let mut batch_seed = 100;
    while majority.len() < 1000 {
        let batch = generate_dataset(&params, &low_noise, 20_000, batch_seed).unwrap();
        majority.extend(
            batch
                .episodes
                .into_iter()
                .filter(|e| e.pooled_q_true >= 0.5 && e.value_v >= top_decile),
        );
        batch_seed += 1;
    }
    majority.truncate(1000);
    let cancel_rate = |episodes: &[Episode]| {
        let cancelled = episodes
            .iter()
            .filter(|e| {
                detect(&model, &e.observables(), 0.5).unwrap().decision == Decision::CancelAndRetry
            })
            .count();
        cancelled as f64 / episodes.len() as f64
    };
    let majority_cancel = cancel_rate(&majority);

    let honest: Vec<Episode> = test_set
        .iter()
        .filter(|e| e.coalition_members.is_empty())
        .cloned()
        .collect();
    let honest_cancel = cancel_rate(&honest);
    let elapsed = start.elapsed();

    let pass = auc >= 0.90
        && majority_cancel >= 0.95
        && honest_cancel <= 0.10
        && elapsed < Duration::from_secs(60);
    verdict(
        7,
        "trained gate separates collusion from honest traffic",
        pass,
        &format!(
            "held-out AUC {auc:.4}, majority cancel {majority_cancel:.3}, honest cancel {honest_cancel:.3} ({} honest), {elapsed:?}",
            honest.len()
        ),
    )
}

fn run_cli(args: &[&str], threads: &str, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_forkguard"))
        .args(args)
        .args(["--threads", threads, "--output"])
        .arg(out)
        .env_remove("FORKGUARD_SEED")
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} failed");
    std::fs::read(out).unwrap()
}

fn criterion_8_determinism() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);

    let trace_a = run_cli(
        &["gen-data", "--count", "3000", "--seed", "7"],
        "1",
        &p("a.jsonl"),
    );
    let trace_b = run_cli(
        &["gen-data", "--count", "3000", "--seed", "7"],
        "4",
        &p("b.jsonl"),
    );

    let sim = [
        "simulate", "--q", "0.3", "--n", "2", "--trials", "200000", "--seed", "7",
    ];
    let sim_a = run_cli(&sim, "1", &p("sa.csv"));
    let sim_b = run_cli(&sim, "3", &p("sb.csv"));

    let trace = p("a.jsonl");
    let trace = trace.to_str().unwrap();
    let train = |model: &Path, threads: &str, out: &Path| {
        run_cli(
            &[
                "train",
                "--trace",
                trace,
                "--model",
                model.to_str().unwrap(),
                "--seed",
                "7",
            ],
            threads,
            out,
        );
        std::fs::read(model).unwrap()
    };
    let model_a = train(&p("ma.json"), "1", &p("ta.csv"));
    let model_b = train(&p("mb.json"), "2", &p("tb.csv"));

    let pass = trace_a == trace_b && sim_a == sim_b && model_a == model_b && !trace_a.is_empty();
    verdict(
        8,
        "gen-data, simulate and train are byte-identical across runs and thread counts",
        pass,
        &format!(
            "trace {} bytes, simulate {} bytes, model {} bytes",
            trace_a.len(),
            sim_a.len(),
            model_a.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> bool);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "criterion_1_confirmation_policy_table",
            criterion_1_confirmation_policy_table,
        ),
        (
            "criterion_2_closed_forms_match_oracles",
            criterion_2_closed_forms_match_oracles,
        ),
        (
            "criterion_3_monte_carlo_agrees_with_closed_form",
            criterion_3_monte_carlo_agrees_with_closed_form,
        ),
        (
            "criterion_4_majority_boundary",
            criterion_4_majority_boundary,
        ),
        ("criterion_5_payoff_branches", criterion_5_payoff_branches),
        ("criterion_6_gradient_check", criterion_6_gradient_check),
        ("criterion_7_end_to_end_gate", criterion_7_end_to_end_gate),
        ("criterion_8_determinism", criterion_8_determinism),
    ];
    if std::env::args().any(|a| a == "--list") {
        for (name, _) in criteria {
            println!("{name}: test");
        }
        return;
    }
    let mut failed = 0;
    for (name, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(true) => {}
            Ok(false) => failed += 1,
            Err(_) => {
                println!("[FAIL] {name}: aborted by panic");
                failed += 1;
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
