//! Reduced-scale end-to-end training smoke test: the procedural dataset
//! must be learnable in both domains within a few epochs. The full-budget
//! run lives in the acceptance suite.

use aigi_core::data::{build_spectral_cache, synth_dataset, TensorCache};
use aigi_core::nn::arch::tiny_detector_arch;
use aigi_core::nn::train::{train, SampleSet, TrainConfig};
use aigi_core::rng::Rng;

fn to_set(cache: &TensorCache) -> SampleSet {
    SampleSet::from_images(&cache.images(), &cache.labels).unwrap()
}

fn run_domain(
    train_cache: &TensorCache,
    val_cache: &TensorCache,
    seed: u64,
    epochs: usize,
) -> f64 {
    let mut net = tiny_detector_arch(train_cache.height, train_cache.width).unwrap();
    net.init_params(&mut Rng::new(seed));
    let cfg = TrainConfig {
        epochs,
        seed,
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let report = train(
        &mut net,
        &to_set(train_cache),
        &to_set(val_cache),
        &cfg,
    )
    .unwrap();
    report.best_val_acc
}

#[test]
fn both_domains_learn_at_reduced_scale() {
    let mut rng = Rng::new(424242);
    let (train_sp, val_sp) = synth_dataset(300, 64, &mut rng).unwrap();
    let train_fr = build_spectral_cache(&train_sp).unwrap();
    let val_fr = build_spectral_cache(&val_sp).unwrap();

    let acc_spatial = run_domain(&train_sp, &val_sp, 7, 15);
    let acc_spectral = run_domain(&train_fr, &val_fr, 7, 40);
    println!("reduced-scale val accuracy: spatial {acc_spatial:.2}%, spectral {acc_spectral:.2}%");

    assert!(acc_spectral >= 90.0, "spectral accuracy {acc_spectral}");
    assert!(acc_spatial >= 80.0, "spatial accuracy {acc_spatial}");
}
