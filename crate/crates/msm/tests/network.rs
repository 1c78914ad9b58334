use axmag_core::datagen::{generate_sample, DatasetConfig, TrainSample};
use axmag_core::rng;
use axmag_msm::gradcheck::{check_gradients, randomize_biases, GradCheckConfig};
use axmag_msm::loss::Prepared;
use axmag_msm::{train, CompactSample, LossConfig, Model, ModelConfig, TrainConfig};

fn micro() -> ModelConfig {
    ModelConfig {
        channels: 4,
        decoder_channels: 8,
        encoder_blocks: 2,
        texture_blocks: 2,
        decoder_blocks: 2,
        seed: 21,
    }
}

fn sample(size: usize, seed: u64) -> TrainSample {
    let cfg = DatasetConfig {
        count: 1,
        size,
        margin: 16,
        k_min: 3,
        k_max: 4,
        alpha_max: 1.5,
        seed,
        ..DatasetConfig::default()
    };
    generate_sample(&cfg, 0, None).unwrap()
}

#[test]
fn backward_matches_central_differences() {
    let mut model = Model::<f64>::new(micro()).unwrap();
    randomize_biases(&mut model, 0.1, 2);
    assert!(model.parameter_count() <= 20_000);
    let s = sample(16, 3);
    let mut r = rng::seeded(5);
    let prepared = Prepared::<f64>::new(&s, Some(&mut r)).unwrap();
    let reports = check_gradients(&model, &prepared, &LossConfig::default(), &GradCheckConfig::default()).unwrap();
    assert_eq!(reports.len(), model.params.len());
    for b in &reports {
        assert!(b.checked > 0, "{}: every probe crossed a kink", b.name);
        println!("{:14} checked {:2} skipped {:2} max rel err {:.2e}", b.name, b.checked, b.skipped, b.max_rel_err);
        assert!(b.max_rel_err <= 1e-4, "{}: relative error {:e}", b.name, b.max_rel_err);
    }
}

#[test]
fn overfits_a_single_sample() {
    let mut model = Model::<f32>::new(ModelConfig {
        channels: 8,
        decoder_channels: 16,
        seed: 4,
        ..ModelConfig::default()
    })
    .unwrap();
    let data = vec![CompactSample::from_sample(&sample(32, 8)).unwrap()];
    let cfg = TrainConfig {
        epochs: 200,
        batch: 1,
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &data, &cfg, None).unwrap();
    assert_eq!(report.steps, 200);
    let first = report.history[0].total;
    let last = report.history.last().unwrap().total;
    assert!(last <= 0.5 * first, "loss {first} -> {last}");
}

#[test]
fn default_schedule_is_valid() {
    let cfg = TrainConfig {
        epochs: 50,
        batch: 8,
        lr: 2e-4,
        ..TrainConfig::default()
    };
    assert_eq!(cfg, TrainConfig::default());
    cfg.validate().unwrap();
    assert!(TrainConfig { batch: 0, ..cfg.clone() }.validate().is_err());
    assert!(TrainConfig { lr: f64::NAN, ..cfg }.validate().is_err());
}

#[test]
fn texture_is_shared_for_a_static_pair() {
    let model = Model::<f32>::new(ModelConfig::default()).unwrap();
    let s = sample(32, 6);
    let mut t = axmag_msm::tape::Tape::new();
    let b = model.bind(&mut t);
    let (shape, d) = axmag_msm::model::frame_to_chw::<f32>(&s.frame_b).unwrap();
    let x1 = t.input(shape, d.clone());
    let x2 = t.input(shape, d);
    let e1 = model.encode(&mut t, &b, x1);
    let e2 = model.encode(&mut t, &b, x2);
    let t1 = model.texture(&mut t, &b, e1);
    let t2 = model.texture(&mut t, &b, e2);
    assert_eq!(t.shape(t1), axmag_msm::tape::Shape::new(32, 8, 8));
    assert_eq!(t.value(t1), t.value(t2));
}
