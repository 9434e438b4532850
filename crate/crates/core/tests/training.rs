use std::path::Path;
use std::time::Instant;

use dwnet::data::idx::load_mnist_dir;
use dwnet::data::make_toy_dataset;
use dwnet::{
    build_network, evaluate_accuracy, run_comparison, train, Activation, Checkpoint, ComparisonConfig, EvalConfig,
    LayerSpec, Loss, NetworkSpec, OptimizerSpec, Rng, Split, ToyKind, Trainer,
};

fn toy_data(seed: u64, n: usize) -> dwnet::Dataset {
    make_toy_dataset(&mut Rng::new(seed), n, ToyKind::TwoGaussians).unwrap()
}

#[test]
fn two_layer_networks_learn_two_gaussians() {
    let start = Instant::now();
    let train_set = toy_data(100, 400);
    let test_set = toy_data(101, 400);
    for dw in [false, true] {
        let mut reached = 0;
        for seed in 0..10 {
            let spec = NetworkSpec {
                seed,
                ..NetworkSpec::toy(dw)
            };
            assert_eq!(spec.iterations, 500);
            let out = train(&spec, &train_set, None, EvalConfig::default()).unwrap();
            let acc = evaluate_accuracy(&out.model, &test_set).unwrap();
            if acc >= 0.95 {
                reached += 1;
            }
        }
        assert!(reached >= 9, "double_weight={dw}: only {reached}/10 seeds reached 0.95");
    }
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn full_batch_logistic_loss_never_increases() {
    let data = toy_data(7, 100);
    let spec = NetworkSpec {
        layers: vec![LayerSpec::Dense {
            units: 2,
            activation: Activation::Softmax,
            double_weight: false,
        }],
        loss: Loss::CrossEntropy,
        optimizer: OptimizerSpec::Sgd,
        learning_rate: 0.5,
        batch_size: 100,
        iterations: 200,
        ..NetworkSpec::toy(false)
    };
    let (x, y) = data.gather(&(0..100).collect::<Vec<_>>()).unwrap();
    let mut trainer = Trainer::new(&spec, data.len()).unwrap();
    let mut prev = trainer.model().loss(&x, &y).unwrap();
    for i in 0..200 {
        trainer.step(&data).unwrap();
        let loss = trainer.model().loss(&x, &y).unwrap();
        assert!(loss <= prev, "iteration {i}: {loss} > {prev}");
        prev = loss;
    }
    assert!(prev < 0.3, "{prev}");
}

#[test]
fn training_is_deterministic() {
    let data = toy_data(3, 200);
    let spec = NetworkSpec {
        seed: 11,
        ..NetworkSpec::toy(true)
    };
    let eval = EvalConfig { every: 25, subset: 200 };
    let a = train(&spec, &data, Some(&data), eval).unwrap();
    let b = train(&spec, &data, Some(&data), eval).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);
    assert_eq!(a.curve, b.curve);
}

#[test]
fn resuming_from_a_checkpoint_is_bitwise_identical() {
    let data = toy_data(4, 120);
    for dw in [false, true] {
        let spec = NetworkSpec {
            seed: 9,
            iterations: 40,
            ..NetworkSpec::toy(dw)
        };
        let mut straight = Trainer::new(&spec, data.len()).unwrap();
        for _ in 0..40 {
            straight.step(&data).unwrap();
        }

        let mut first = Trainer::new(&spec, data.len()).unwrap();
        for _ in 0..17 {
            first.step(&data).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        first.checkpoint().save(&path).unwrap();
        let mut resumed = Trainer::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(resumed.iteration(), 17);
        let mut losses = Vec::new();
        for _ in 17..40 {
            losses.push(resumed.step(&data).unwrap());
        }
        let mut reference = Vec::new();
        for _ in 17..40 {
            reference.push(first.step(&data).unwrap());
        }
        assert_eq!(losses, reference);
        assert_eq!(resumed.model(), straight.model());
        assert_eq!(resumed.checkpoint().to_bytes(), straight.checkpoint().to_bytes());
    }
}

#[test]
fn untrained_classifier_is_at_chance() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-desk");
    let test = load_mnist_dir(dir, Split::Test).unwrap();
    assert!(test.len() >= 1000);
    for dw in [false, true] {
        for seed in 0..3 {
            let spec = NetworkSpec {
                seed,
                ..NetworkSpec::mnist_fnn(dw)
            };
            let acc = evaluate_accuracy(&build_network(&spec).unwrap(), &test).unwrap();
            assert!((acc - 0.1).abs() <= 0.05, "dw={dw} seed={seed}: {acc}");
        }
    }
}

#[test]
fn comparison_smoke() {
    let data = toy_data(5, 100);
    let logistic = |dw| NetworkSpec {
        layers: vec![LayerSpec::Dense {
            units: 2,
            activation: Activation::Softmax,
            double_weight: dw,
        }],
        iterations: 5,
        learning_rate: 0.3,
        ..NetworkSpec::toy(dw)
    };
    let cfg = ComparisonConfig {
        labels: ["standard".into(), "double-weight".into()],
        variant_a: logistic(false),
        variant_b: logistic(true),
        n_seeds: 2,
        master_seed: 1,
        burn_in: 2,
        eval: EvalConfig { every: 1, subset: 100 },
        paired: true,
        allow_spec_mismatch: false,
    };
    let report = run_comparison(&cfg, &data, &data, 2).unwrap();
    for v in &report.variants {
        assert_eq!(v.seeds.len(), 2);
        assert!(v.failed_seeds.is_empty());
        assert!(v.mean_accuracy.is_some() && v.variance.is_some());
    }
    assert!(
        report.welch.is_some() && report.mean_difference.is_some(),
        "{:#?}",
        report.variants
    );
    assert_eq!(report.curves.iterations, vec![1, 2, 3, 4, 5]);
    assert!(report.timing.time_ratio.is_some());
    let again = run_comparison(&cfg, &data, &data, 1).unwrap();
    assert_eq!(
        serde_json::to_string(&report).unwrap(),
        serde_json::to_string(&again).unwrap()
    );
}
