use evfield::io::{dataset_hash, load_checkpoint, Dataset, Split};
use evfield::metrics::{evaluate, EvalOptions};
use evfield::radiance::ModelConfig;
use evfield::synth::{gen_dataset, AnalyticScene, DatasetConfig};
use evfield::training::{finetune, fit, TrainConfig};

fn tiny_model() -> ModelConfig {
    ModelConfig {
        x_freq: 3,
        t_freq: 2,
        deform_width: 16,
        deform_hidden: 1,
        canonical_width: 16,
        canonical_hidden: 1,
        ..ModelConfig::default()
    }
}

fn tiny_train(seed: u64) -> TrainConfig {
    TrainConfig {
        total_iterations: 8,
        warmup_iterations: 2,
        crop_iterations: 2,
        progressive_iterations: 4,
        milestones: vec![6],
        rays_per_iteration: 64,
        samples_per_ray: 8,
        checkpoint_every: 4,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn generate_train_evaluate_finetune() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg = DatasetConfig {
        n_views: 2,
        n_frames: 5,
        width: 16,
        height: 16,
        supersample: 2,
        samples_per_ray: 16,
        ..DatasetConfig::default()
    };
    gen_dataset(&AnalyticScene::translating_sphere(), &cfg, &data).unwrap();
    let hash = dataset_hash(&data).unwrap();
    let ds = Dataset::load(&data).unwrap();
    assert_eq!(ds.meta.view_indices(Split::Train).len(), 2);
    assert!(ds.streams.iter().any(|s| !s.is_empty()));

    let a = fit::<f64>(&tiny_train(3), &tiny_model(), &ds, &dir.path().join("a")).unwrap();
    let b = fit::<f64>(&tiny_train(3), &tiny_model(), &ds, &dir.path().join("b")).unwrap();
    assert_eq!(a.checkpoints.len(), 2);
    let losses = |o: &evfield::training::FitOutput| o.losses.iter().map(|r| r.loss).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
    assert!(losses(&a).iter().all(|l| l.is_finite()));

    let ck = load_checkpoint::<f64>(&a.final_checkpoint).unwrap();
    assert_eq!(ck.iteration, 8);
    let opts = EvalOptions {
        samples_per_ray: 8,
        write_png: false,
        ..EvalOptions::default()
    };
    let windows = [(0.0, 0.25), (0.5, 0.75)];
    let report = evaluate(&ck.model, &ds, &windows, &ds.meta.view_indices(Split::Val), &[], &opts, None).unwrap();
    assert_eq!(report.entries.len(), 4);
    assert!(report.mae.mean >= 0.0);

    let tuned = finetune::<f64>(&a.final_checkpoint, &tiny_train(4), &tiny_model(), &ds, &dir.path().join("c")).unwrap();
    assert_eq!(tuned.losses.len(), 8);
    assert_eq!(dataset_hash(&data).unwrap(), hash);
}
