use granule::ball::GranularBall;
use granule::layer::BackwardMode;
use granule::noise::{synthesize, SynthSpec};
use granule::replay::ReplayConfig;
use granule::seed;
use granule::trainer::{
    ball_loss_and_gradient, evaluate, LossWeighting, LrSchedule, Mode, ModelParams, StepMetrics, TrainConfig,
    TrainData, Trainer,
};
use granule::{Error, Matrix, SplitConfig};
use rand::Rng;

fn run(data: &TrainData, cfg: TrainConfig, split: SplitConfig) -> Vec<StepMetrics> {
    let mut t = Trainer::new(data.features.cols(), data.num_classes, cfg, split, ReplayConfig::default()).unwrap();
    let mut out = Vec::new();
    t.run(data, |m| {
        out.push(m.clone());
        Ok(())
    })
    .unwrap();
    out
}

#[test]
fn distinct_labels_reduce_gbc_to_individual() {
    let mut rng = seed::rng(5);
    let n = 16;
    let features = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let data = TrainData {
        features,
        labels: (0..n).collect(),
        clean_labels: Some((0..n).collect()),
        num_classes: n,
    };
    let cfg = TrainConfig {
        batch_size: 8,
        steps: 40,
        seed: 9,
        hidden: vec![6],
        feature_dim: 4,
        ..TrainConfig::default()
    };
    let individual = run(&data, TrainConfig { mode: Mode::Individual, ..cfg.clone() }, SplitConfig::with_purity(1.0));
    let gbc = run(&data, TrainConfig { mode: Mode::Gbc, ..cfg }, SplitConfig::with_purity(1.0));
    assert_eq!(
        serde_json::to_string(&individual).unwrap(),
        serde_json::to_string(&gbc).unwrap()
    );
}

#[test]
fn identical_samples_scale_extractor_gradient_by_one_over_k() {
    let mut rng = seed::rng(8);
    let params = ModelParams::init(3, &[5], 4, 2, &mut rng);
    let k = 5;
    let row: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Matrix::from_rows(&vec![row; k]).unwrap();
    let balls = [GranularBall {
        members: (0..k).collect(),
        center: Vec::new(),
        label: 1,
        purity: 1.0,
    }];
    let grads = |mode| {
        ball_loss_and_gradient(&params, &x, &balls, LossWeighting::PerBall, mode, 0.0)
            .unwrap()
            .1
    };
    let mean = grads(BackwardMode::MeanScaled);
    let rep = grads(BackwardMode::Replicate);
    let last = params.layers.len() - 1;
    assert_eq!(mean.layers[last], rep.layers[last]);
    for (m, r) in mean.layers[..last].iter().zip(&rep.layers[..last]) {
        let (m, r) = (m.weights.as_slice().iter().chain(&m.bias), r.weights.as_slice().iter().chain(&r.bias));
        for (a, b) in m.zip(r) {
            assert!((a - b / k as f64).abs() <= 1e-14 * b.abs().max(1e-12), "{a} vs {b}/{k}");
        }
    }
}

fn nearest_mean_accuracy(means: &[Vec<f64>], x: &Matrix, labels: &[usize]) -> f64 {
    let correct = x
        .iter_rows()
        .zip(labels)
        .filter(|(r, &l)| {
            let d = |m: &Vec<f64>| r.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (0..means.len()).min_by(|&a, &b| d(&means[a]).total_cmp(&d(&means[b]))) == Some(l)
        })
        .count();
    correct as f64 / labels.len() as f64
}

#[test]
fn separable_blobs_train_to_high_accuracy() {
    let spec = SynthSpec {
        classes: 2,
        per_class: 200,
        dim: 2,
        separation: 20.0,
        seed: 1,
        ..SynthSpec::default()
    };
    let train = synthesize(&spec).unwrap();
    let test = synthesize(&SynthSpec { seed: 2, ..spec.clone() }).unwrap();
    let means = spec.class_means();
    // The data really is separable by the perpendicular bisector.
    assert_eq!(nearest_mean_accuracy(&means, &train.features(), &train.observed_labels()), 1.0);
    assert_eq!(nearest_mean_accuracy(&means, &test.features(), &test.observed_labels()), 1.0);

    let data = TrainData::from_dataset(&train);
    let cfg = TrainConfig {
        mode: Mode::Individual,
        batch_size: 64,
        steps: 200,
        lr: LrSchedule::constant(0.05),
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(2, 2, cfg, SplitConfig::default(), ReplayConfig::default()).unwrap();
    t.run(&data, |_| Ok(())).unwrap();
    let acc = evaluate(t.params(), &test.features(), &test.observed_labels()).unwrap();
    assert!(acc >= 0.99, "accuracy {acc}");
}

#[test]
fn constant_classifier_scores_one_over_c() {
    let mut params = ModelParams::init(4, &[3], 3, 10, &mut seed::rng(0));
    let last = params.layers.len() - 1;
    let mut flat = params.to_flat();
    let classifier_len = params.layers[last].weights.as_slice().len() + 10;
    let start = flat.len() - classifier_len;
    flat[start..].iter_mut().for_each(|v| *v = 0.0);
    params.set_flat(&flat);
    params.layers[last].bias[4] = 1.0;
    let x = Matrix::from_vec(50, 4, (0..200).map(|i| (i as f64).sin()).collect()).unwrap();
    let labels: Vec<usize> = (0..50).map(|i| i % 10).collect();
    assert_eq!(evaluate(&params, &x, &labels).unwrap(), 0.1);
    assert_eq!(evaluate(&params, &x, &labels).unwrap(), evaluate(&params, &x, &labels).unwrap());
    assert!(evaluate(&params, &Matrix::zeros(0, 4), &[]).is_err());
}

#[test]
fn divergence_aborts_with_non_finite_error() {
    let spec = SynthSpec {
        classes: 3,
        per_class: 20,
        dim: 4,
        ..SynthSpec::default()
    };
    let data = TrainData::from_dataset(&synthesize(&spec).unwrap());
    let cfg = TrainConfig {
        lr: LrSchedule::constant(1e300),
        batch_size: 16,
        steps: 50,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(4, 3, cfg, SplitConfig::default(), ReplayConfig::default()).unwrap();
    let err = t.run(&data, |_| Ok(())).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
    assert!(!err.is_input_error());
}
