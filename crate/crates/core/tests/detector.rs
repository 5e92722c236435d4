use forkguard::collusion_detector::{
    auc, evaluate, labeled_examples, train_on_episodes, LinearModel, TrainingConfig,
};
use forkguard::consortium_sim::{generate_dataset, Episode, Scenario};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn episodes(count: u64, seed: u64) -> Vec<Episode> {
    let s = Scenario::default();
    generate_dataset(&s.network(), &s, count, seed)
        .unwrap()
        .episodes
}

#[test]
fn held_out_accuracy_beats_threshold() {
    let train = episodes(5000, 21);
    let test = episodes(2000, 22);
    let model = train_on_episodes(&train, TrainingConfig::default())
        .unwrap()
        .model;
    let data = labeled_examples(&test, model.median_v()).unwrap();
    let m = evaluate(&model, &data, 0.5).unwrap();
    assert!(m.accuracy >= 0.85, "accuracy {}", m.accuracy);
    let c = m.confusion;
    assert_eq!(
        c.true_positive + c.false_positive + c.true_negative + c.false_negative,
        2000
    );
}

#[test]
fn shuffled_labels_give_chance_auc() {
    let train = episodes(5000, 31);
    let model = train_on_episodes(&train, TrainingConfig::default())
        .unwrap()
        .model;
    let data = labeled_examples(&episodes(4000, 32), model.median_v()).unwrap();
    let scores: Vec<f64> = data
        .iter()
        .map(|e| forkguard::collusion_detector::predict(&model, &e.features))
        .collect();
    let mut labels: Vec<bool> = data.iter().map(|e| e.attack).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(33));
    let shuffled = auc(&scores, &labels).unwrap();
    assert!((0.45..=0.55).contains(&shuffled), "auc {shuffled}");
}

#[test]
fn training_loss_decreases_and_model_round_trips() {
    let train = episodes(1000, 41);
    let config = TrainingConfig {
        epochs: 400,
        ..TrainingConfig::default()
    };
    let training = train_on_episodes(&train, config).unwrap();
    let curve = &training.loss_curve;
    assert_eq!(curve.len(), 401);
    assert!(curve.last().unwrap() < &curve[0]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    training.model.save(&path, &["test".into()]).unwrap();
    let back = LinearModel::load(&path).unwrap();
    assert_eq!(back, training.model);
}
