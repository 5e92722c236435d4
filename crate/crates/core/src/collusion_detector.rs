//! The approval agent: per-stakeholder defection estimates, a logistic attack
//! classifier over the current transaction's observables, and the gate that
//! approves a transaction or cancels it and asks for a new one.

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::consortium_sim::{Episode, History, Observables};
use crate::error::{Error, Result};
use crate::payoff_game::{attack_utility, AttackStake};
use crate::race_math::HashratePartition;
use crate::rng::{substream, TRAINING_DOMAIN};

pub const FEATURE_COUNT: usize = 6;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "q_observed",
    "v_normalized",
    "defect_prob_max",
    "defect_prob_mean",
    "utility_signal",
    "inv_confirmations",
];

pub const MODEL_FORMAT: &str = "forkguard-model-v1";

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Laplace-smoothed defection rate `(d + 1) / (t + 2)`.
pub fn defect_probability(history: History) -> Result<f64> {
    history.validate()?;
    Ok((history.defections as f64 + 1.0) / (history.transactions as f64 + 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Maps one transaction's observables to the classifier's inputs.
///
/// `median_v` is the median transaction value of the training set. Defection
/// statistics are taken over the observed coalition members and fall back to
/// the uninformed prior 0.5 when there are none.
pub fn extract_features(observables: &Observables, median_v: f64) -> Result<FeatureVector> {
    let q = observables.pooled_q_observed;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(
            "pooled_q_observed",
            format!("{q} is not in [0, 1]"),
        ));
    }
    let v = observables.value_v;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::invalid(
            "value_v",
            format!("{v} must be finite and >= 0"),
        ));
    }
    if observables.confirmations_n < 1 {
        return Err(Error::invalid("confirmations_n", "must be at least 1"));
    }
    if !(median_v.is_finite() && median_v > 0.0) {
        return Err(Error::invalid(
            "median_v",
            format!("{median_v} must be positive"),
        ));
    }

    let v_normalized = v / (v + median_v);

    let prior = defect_probability(History::default())?;
    let (mut max, mut sum) = (f64::NEG_INFINITY, 0.0);
    for id in &observables.coalition_members {
        let history = observables.histories.get(id).copied().unwrap_or_default();
        let p = defect_probability(history)?;
        max = max.max(p);
        sum += p;
    }
    let (defect_max, defect_mean) = match observables.coalition_members.len() {
        0 => (prior, prior),
        k => (max, sum / k as f64),
    };

    let stake = AttackStake::new(v, 0, observables.block_value_b)?;
    let utility = attack_utility(stake, HashratePartition::from_attacker_share(q)?).amount();
    let utility_signal = (utility / (v + 1.0)).tanh();

    Ok(FeatureVector([
        q,
        v_normalized,
        defect_max,
        defect_mean,
        utility_signal,
        1.0 / f64::from(observables.confirmations_n),
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub attack: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 3000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub learning_rate: f64,
    pub epochs: u32,
    pub seed: u64,
    pub final_loss: f64,
    pub median_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub training_meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    weights: Vec<f64>,
    bias: f64,
    training_meta: TrainingMeta,
}

impl LinearModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            weights: self.weights.to_vec(),
            bias: self.bias,
            training_meta: self.training_meta,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    /// Parses a model file, skipping leading `#` header lines.
    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        let malformed = |line, message: String| Error::Malformed {
            path: path.into(),
            line,
            message,
        };
        let skipped = text.lines().take_while(|l| l.starts_with('#')).count();
        let body: String = text.lines().skip(skipped).collect::<Vec<_>>().join("\n");
        let file: ModelFile = serde_json::from_str(&body)
            .map_err(|e| malformed(skipped + e.line(), e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(malformed(
                skipped + 1,
                format!("unsupported model format `{}`", file.format),
            ));
        }
        let weights: [f64; FEATURE_COUNT] = file.weights.as_slice().try_into().map_err(|_| {
            malformed(
                skipped + 1,
                format!(
                    "expected {FEATURE_COUNT} weights, found {}",
                    file.weights.len()
                ),
            )
        })?;
        let model = LinearModel {
            weights,
            bias: file.bias,
            training_meta: file.training_meta,
        };
        model
            .validate()
            .map_err(|e| malformed(skipped + 1, e.to_string()))?;
        Ok(model)
    }

    pub fn save(&self, path: &Path, header: &[String]) -> Result<()> {
        let mut text = String::new();
        for line in header {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        text.push_str(&self.to_json());
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(path, &text)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.weights.iter().all(|w| w.is_finite()) || !self.bias.is_finite() {
            return Err(Error::Numerical("model has non-finite parameters".into()));
        }
        let meta = &self.training_meta;
        if !(meta.final_loss.is_finite() && meta.final_loss >= 0.0) {
            return Err(Error::Numerical(
                "model final_loss must be finite and >= 0".into(),
            ));
        }
        if !(meta.median_v.is_finite() && meta.median_v > 0.0) {
            return Err(Error::invalid("median_v", "must be positive"));
        }
        Ok(())
    }

    pub fn median_v(&self) -> f64 {
        self.training_meta.median_v
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn logit(weights: &[f64; FEATURE_COUNT], bias: f64, x: &FeatureVector) -> f64 {
    weights
        .iter()
        .zip(x.0.iter())
        .map(|(w, x)| w * x)
        .sum::<f64>()
        + bias
}

/// Mean logistic loss over `batch` and its gradient with respect to
/// `(weights, bias)`; the bias component is last.
pub fn loss_and_gradient(
    weights: &[f64; FEATURE_COUNT],
    bias: f64,
    batch: &[LabeledExample],
) -> (f64, [f64; FEATURE_COUNT + 1]) {
    let mut loss = 0.0;
    let mut grad = [0.0; FEATURE_COUNT + 1];
    for example in batch {
        let z = logit(weights, bias, &example.features);
        let y = if example.attack { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, x) in grad.iter_mut().zip(example.features.0.iter()) {
            *g += residual * x;
        }
        grad[FEATURE_COUNT] += residual;
    }
    let scale = 1.0 / batch.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub model: LinearModel,
    /// Loss before each epoch's update, followed by the final loss.
    pub loss_curve: Vec<f64>,
}

/// Full-batch gradient descent on the mean logistic loss. Initial weights are
/// drawn from `N(0, 0.01^2)` using `config.seed`.
pub fn train(data: &[LabeledExample], config: TrainingConfig, median_v: f64) -> Result<Training> {
    let positives = data.iter().filter(|e| e.attack).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::invalid(
            "dataset",
            "training needs both attack and honest examples",
        ));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::invalid("learning_rate", "must be positive"));
    }
    if !(median_v.is_finite() && median_v > 0.0) {
        return Err(Error::invalid("median_v", "must be positive"));
    }

    let mut rng = substream(config.seed, TRAINING_DOMAIN, 0);
    let init = Normal::new(0.0, 0.01).expect("valid init distribution");
    let mut weights = [0.0; FEATURE_COUNT];
    weights.iter_mut().for_each(|w| *w = init.sample(&mut rng));
    let mut bias = init.sample(&mut rng);

    let mut loss_curve = Vec::with_capacity(config.epochs as usize + 1);
    for epoch in 0..config.epochs {
        let (loss, grad) = loss_and_gradient(&weights, bias, data);
        if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Numerical(format!(
                "loss became non-finite at epoch {epoch} (learning rate {})",
                config.learning_rate
            )));
        }
        loss_curve.push(loss);
        for (w, g) in weights.iter_mut().zip(grad.iter()) {
            *w -= config.learning_rate * g;
        }
        bias -= config.learning_rate * grad[FEATURE_COUNT];
    }
    let (final_loss, _) = loss_and_gradient(&weights, bias, data);
    if !final_loss.is_finite() {
        return Err(Error::Numerical("final loss is non-finite".into()));
    }
    loss_curve.push(final_loss);

    let model = LinearModel {
        weights,
        bias,
        training_meta: TrainingMeta {
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            seed: config.seed,
            final_loss,
            median_v,
        },
    };
    model.validate()?;
    Ok(Training { model, loss_curve })
}

/// Median transaction value of `episodes`.
pub fn median_value(episodes: &[Episode]) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::invalid("dataset", "no episodes"));
    }
    let mut values: Vec<f64> = episodes.iter().map(|e| e.value_v).collect();
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Ok(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

/// Extracts features and ground-truth labels from `episodes`.
pub fn labeled_examples(episodes: &[Episode], median_v: f64) -> Result<Vec<LabeledExample>> {
    episodes
        .iter()
        .map(|e| {
            Ok(LabeledExample {
                features: extract_features(&e.observables(), median_v)?,
                attack: e.attack_attempted,
            })
        })
        .collect()
}

/// Trains on simulated episodes, fixing the value scale to their median.
pub fn train_on_episodes(episodes: &[Episode], config: TrainingConfig) -> Result<Training> {
    let median_v = median_value(episodes)?;
    let data = labeled_examples(episodes, median_v)?;
    train(&data, config, median_v)
}

pub fn predict(model: &LinearModel, features: &FeatureVector) -> f64 {
    sigmoid(logit(&model.weights, model.bias, features))
}

/// [`predict`] for an untyped feature slice.
pub fn predict_slice(model: &LinearModel, features: &[f64]) -> Result<f64> {
    let array: [f64; FEATURE_COUNT] = features.try_into().map_err(|_| {
        Error::invalid(
            "features",
            format!("expected {FEATURE_COUNT} values, found {}", features.len()),
        )
    })?;
    if !array.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("features", "values must be finite"));
    }
    Ok(predict(model, &FeatureVector(array)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Approve,
    CancelAndRetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub attack_probability: f64,
    pub decision: Decision,
    pub threshold_used: f64,
}

/// Cancels the transaction when `probability >= threshold`, approves it
/// otherwise.
pub fn decide(probability: f64, threshold: f64) -> Result<DetectionVerdict> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(
            "threshold",
            format!("{threshold} is not in [0, 1]"),
        ));
    }
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::invalid(
            "probability",
            format!("{probability} is not in [0, 1]"),
        ));
    }
    Ok(DetectionVerdict {
        attack_probability: probability,
        decision: if probability >= threshold {
            Decision::CancelAndRetry
        } else {
            Decision::Approve
        },
        threshold_used: threshold,
    })
}

/// Runs one episode through the agent.
pub fn detect(
    model: &LinearModel,
    observables: &Observables,
    threshold: f64,
) -> Result<DetectionVerdict> {
    let features = extract_features(observables, model.median_v())?;
    decide(predict(model, &features), threshold)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// `None` when the dataset holds a single class.
    pub auc: Option<f64>,
    pub confusion: ConfusionMatrix,
}

/// Area under the ROC curve via the Mann-Whitney rank statistic; tied scores
/// share their mean rank, so each tied positive/negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mean_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn metrics_from_scores(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics> {
    if scores.is_empty() {
        return Err(Error::invalid(
            "dataset",
            "cannot evaluate an empty dataset",
        ));
    }
    let mut confusion = ConfusionMatrix::default();
    for (&s, &label) in scores.iter().zip(labels) {
        let flagged = decide(s, threshold)?.decision == Decision::CancelAndRetry;
        match (flagged, label) {
            (true, true) => confusion.true_positive += 1,
            (true, false) => confusion.false_positive += 1,
            (false, false) => confusion.true_negative += 1,
            (false, true) => confusion.false_negative += 1,
        }
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let c = confusion;
    Ok(Metrics {
        accuracy: ratio(c.true_positive + c.true_negative, scores.len() as u64),
        precision: ratio(c.true_positive, c.true_positive + c.false_positive),
        recall: ratio(c.true_positive, c.true_positive + c.false_negative),
        auc: auc(scores, labels),
        confusion,
    })
}

pub fn evaluate(model: &LinearModel, data: &[LabeledExample], threshold: f64) -> Result<Metrics> {
    let scores: Vec<f64> = data.iter().map(|e| predict(model, &e.features)).collect();
    let labels: Vec<bool> = data.iter().map(|e| e.attack).collect();
    metrics_from_scores(&scores, &labels, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consortium_sim::Histories;

    fn observables(
        q: f64,
        v: f64,
        members: &[&str],
        histories: &[(&str, u64, u64)],
    ) -> Observables {
        Observables {
            pooled_q_observed: q,
            value_v: v,
            confirmations_n: 6,
            block_value_b: 12.5,
            coalition_members: members.iter().map(|s| s.to_string()).collect(),
            histories: histories
                .iter()
                .map(|&(id, d, t)| (id.to_string(), History::new(d, t).unwrap()))
                .collect::<Histories>(),
        }
    }

    fn model(weights: [f64; FEATURE_COUNT], bias: f64) -> LinearModel {
        LinearModel {
            weights,
            bias,
            training_meta: TrainingMeta {
                learning_rate: 1.0,
                epochs: 0,
                seed: 0,
                final_loss: 0.0,
                median_v: 1000.0,
            },
        }
    }

    #[test]
    fn defect_probability_examples() {
        assert_eq!(
            defect_probability(History::new(0, 0).unwrap()).unwrap(),
            0.5
        );
        let p = defect_probability(History::new(3, 7).unwrap()).unwrap();
        assert!((p - 4.0 / 9.0).abs() < 1e-15);
        let p = defect_probability(History::new(0, 1000).unwrap()).unwrap();
        assert!((p - 1.0 / 1002.0).abs() < 1e-15 && p > 0.0);
        let bad = History {
            defections: 5,
            transactions: 2,
        };
        assert!(defect_probability(bad).is_err());
    }

    #[test]
    fn zero_value_without_candidates_uses_prior() {
        let f = extract_features(&observables(0.0, 0.0, &[], &[]), 1000.0).unwrap();
        assert_eq!(f.0[1], 0.0);
        assert_eq!(f.0[2], 0.5);
        assert_eq!(f.0[3], 0.5);
        assert_eq!(f.0[5], 1.0 / 6.0);
    }

    #[test]
    fn utility_signal_follows_majority_branch() {
        let hi = extract_features(&observables(0.6, 500.0, &["a"], &[]), 1000.0).unwrap();
        let lo = extract_features(&observables(0.3, 500.0, &["a"], &[]), 1000.0).unwrap();
        assert!(hi.0[4] > 0.0);
        assert!(lo.0[4] < 0.0);
    }

    #[test]
    fn defect_stats_use_member_histories() {
        let obs = observables(0.4, 100.0, &["a", "b", "c"], &[("a", 3, 7), ("b", 0, 8)]);
        let f = extract_features(&obs, 1000.0).unwrap();
        let (a, b, c) = (4.0 / 9.0, 0.1, 0.5);
        assert!((f.0[2] - c).abs() < 1e-15);
        assert!((f.0[3] - (a + b + c) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn features_are_deterministic_and_bounded() {
        let obs = observables(0.45, 1e7, &["a"], &[("a", 1, 2)]);
        let a = extract_features(&obs, 1000.0).unwrap();
        let b = extract_features(&obs, 1000.0).unwrap();
        assert_eq!(a.0.map(f64::to_bits), b.0.map(f64::to_bits));
        assert!(a.0[1] < 1.0);
        assert!(a.0.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_bad_observables() {
        let obs = observables(1.5, 1.0, &[], &[]);
        assert!(matches!(
            extract_features(&obs, 1000.0),
            Err(Error::InvalidArgument {
                name: "pooled_q_observed",
                ..
            })
        ));
        let obs = observables(0.5, f64::NAN, &[], &[]);
        assert!(matches!(
            extract_features(&obs, 1000.0),
            Err(Error::InvalidArgument {
                name: "value_v",
                ..
            })
        ));
        let missing = r#"{"pooled_q_observed":0.1,"confirmations_n":6,"block_value_B":1,"coalition_members":[],"histories":{}}"#;
        let err = serde_json::from_str::<Observables>(missing).unwrap_err();
        assert!(err.to_string().contains("value_v"));
    }

    #[test]
    fn zero_model_predicts_one_half() {
        let m = model([0.0; FEATURE_COUNT], 0.0);
        for x in [[0.0; 6], [1.0, 0.9, 0.2, 0.1, -0.7, 0.5]] {
            assert_eq!(predict(&m, &FeatureVector(x)), 0.5);
        }
    }

    #[test]
    fn predict_slice_rejects_wrong_length() {
        let m = model([0.0; FEATURE_COUNT], 0.0);
        assert!(predict_slice(&m, &[0.0; 5]).is_err());
        assert_eq!(predict_slice(&m, &[0.0; 6]).unwrap(), 0.5);
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0.7, 0.5).unwrap().decision, Decision::CancelAndRetry);
        assert_eq!(decide(0.5, 0.5).unwrap().decision, Decision::CancelAndRetry);
        assert_eq!(decide(0.49, 0.5).unwrap().decision, Decision::Approve);
        assert!(matches!(
            decide(0.5, 1.1),
            Err(Error::InvalidArgument {
                name: "threshold",
                ..
            })
        ));
        let v = decide(0.3, 0.2).unwrap();
        assert_eq!((v.attack_probability, v.threshold_used), (0.3, 0.2));
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let point = |q: f64, attack| LabeledExample {
            features: FeatureVector([q, 0.5, 0.5, 0.5, 0.0, 1.0]),
            attack,
        };
        let data = [
            point(0.1, false),
            point(0.2, false),
            point(0.7, true),
            point(0.8, true),
        ];
        let cfg = TrainingConfig {
            learning_rate: 1.0,
            epochs: 500,
            seed: 1,
        };
        let t = train(&data, cfg, 1.0).unwrap();
        let m = evaluate(&t.model, &data, 0.5).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.auc, Some(1.0));
        assert!(t.loss_curve.last().unwrap() <= t.loss_curve.first().unwrap());
        assert_eq!(t.loss_curve.len(), 501);
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let e = LabeledExample {
            features: FeatureVector([0.0; 6]),
            attack: true,
        };
        assert!(train(&[e, e], TrainingConfig::default(), 1.0).is_err());
    }

    #[test]
    fn runaway_learning_rate_is_diagnosed() {
        let point = |x: f64, attack| LabeledExample {
            features: FeatureVector([x * 1e300, 0.0, 0.0, 0.0, 0.0, 0.0]),
            attack,
        };
        let data = [point(1.0, true), point(-1.0, false), point(1.0, false)];
        let cfg = TrainingConfig {
            learning_rate: 1e300,
            epochs: 50,
            seed: 0,
        };
        assert!(matches!(train(&data, cfg, 1.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn auc_examples() {
        let labels = [false, false, true, true, false, true];
        let perfect = [0.1, 0.2, 0.8, 0.9, 0.3, 0.7];
        assert_eq!(auc(&perfect, &labels), Some(1.0));
        assert_eq!(auc(&[0.4; 6], &labels), Some(0.5));
        let reversed: Vec<f64> = perfect.iter().map(|s| 1.0 - s).collect();
        assert_eq!(auc(&reversed, &labels), Some(0.0));
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), None);
    }

    #[test]
    fn auc_matches_pairwise_count() {
        let scores = [0.3, 0.3, 0.5, 0.1, 0.5, 0.9, 0.3];
        let labels = [true, false, true, false, false, true, true];
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        assert!((auc(&scores, &labels).unwrap() - wins / pairs).abs() < 1e-15);
    }

    #[test]
    fn empty_evaluation_is_rejected() {
        let m = model([0.0; FEATURE_COUNT], 0.0);
        assert!(evaluate(&m, &[], 0.5).is_err());
    }

    #[test]
    fn model_file_round_trip_and_format_check() {
        let m = model([0.5, -1.25, 3.0, 0.0, 1e-17, 2.0], -0.75);
        let text = format!("# header\n{}\n", m.to_json());
        assert_eq!(LinearModel::from_json(Path::new("m"), &text).unwrap(), m);
        let bad = text.replace(MODEL_FORMAT, "forkguard-model-v0");
        assert!(matches!(
            LinearModel::from_json(Path::new("m"), &bad),
            Err(Error::Malformed { .. })
        ));
        let short = m.to_json().replace("-1.25,", "");
        assert!(LinearModel::from_json(Path::new("m"), &short).is_err());
    }
}
