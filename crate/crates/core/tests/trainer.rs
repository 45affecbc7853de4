use pdeflow::data::{generate_dataset, Dataset, Split, SynthConfig};
use pdeflow::net::{load_checkpoint, Model, NetConfig};
use pdeflow::train::{
    ablate, evaluate, stability_experiment, train, train_with, AblationAxis, RunStatus, ScheduleSpec, TrainConfig,
    TrainOptions, STATUS_DIVERGED,
};
use pdeflow::Real;

fn tiny_net() -> NetConfig {
    NetConfig {
        depth: 1,
        base_channels: 3,
        pde_layers: 2,
        height: 8,
        width: 8,
        ..NetConfig::default()
    }
}

fn tiny_data() -> Dataset {
    generate_dataset(&SynthConfig {
        train: 16,
        val: 4,
        test: 4,
        height: 8,
        width: 8,
        seed: 21,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn tiny_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        run_id: "tiny".into(),
        epochs,
        batch_size: 4,
        learning_rate: 3e-3,
        seed: 4,
        net: tiny_net(),
        ..TrainConfig::default()
    }
}

fn model(cfg: &TrainConfig) -> Model {
    Model::new(cfg.net, cfg.seed).unwrap()
}

#[test]
fn zero_epochs_returns_initial_params() {
    let cfg = tiny_config(0);
    let m = model(&cfg);
    let out = train(&m, &tiny_data(), &cfg).unwrap();
    assert_eq!(out.params, m.params);
    assert!(out.log.rows.is_empty());
    assert_eq!(out.log.status, RunStatus::Completed);
}

#[test]
fn zero_learning_rate_keeps_params() {
    let cfg = TrainConfig { learning_rate: 0.0, ..tiny_config(2) };
    let m = model(&cfg);
    let out = train(&m, &tiny_data(), &cfg).unwrap();
    assert_eq!(out.params, m.params);
    assert_eq!(out.log.rows.len(), 8);
}

#[test]
fn runs_are_deterministic() {
    let cfg = tiny_config(3);
    let data = tiny_data();
    let a = train(&model(&cfg), &data, &cfg).unwrap();
    let b = train(&model(&cfg), &data, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.log.without_timing(), b.log.without_timing());
    assert_eq!(a.epochs, b.epochs);
    assert_ne!(a.params, model(&cfg).params);
}

#[test]
fn schedule_fidelity_and_boundary_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(6);
    let schedule = cfg.schedule.resolve().unwrap();
    let out = train_with(
        &model(&cfg),
        &tiny_data(),
        &cfg,
        TrainOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.log.rows.len(), 24);
    for row in &out.log.rows {
        let phase = schedule.phase_for_epoch(row.epoch);
        assert_eq!((row.k, row.delta_t), (phase.k, phase.delta_t));
        assert!((row.k as Real * row.delta_t - 1.0).abs() <= 1e-3);
    }
    let ks: Vec<usize> = out.epochs.iter().map(|e| e.k).collect();
    assert_eq!(ks, vec![1, 1, 3, 3, 5, 5]);

    let names: Vec<String> = out
        .checkpoints_written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["epoch0002.ckpt", "epoch0004.ckpt", "final.ckpt"]);
    // Moments survive the boundary: the checkpoint carries eight steps of state.
    let at_boundary = load_checkpoint(&dir.path().join("epoch0002.ckpt")).unwrap();
    assert_eq!(at_boundary.optimizer.step, 8);
    assert!(at_boundary.optimizer.moments.iter().all(|m| m.iter().any(|&v| v != 0.0)));
    assert_eq!(at_boundary.phase_index, 1);
    let last = load_checkpoint(&dir.path().join("final.ckpt")).unwrap();
    assert_eq!(last.params, out.params);
    assert_eq!((last.discretization.k, last.epoch, last.step), (5, 6, 24));
}

#[test]
fn interrupted_and_resumed_run_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(6);
    let data = tiny_data();
    let full = train(&model(&cfg), &data, &cfg).unwrap();

    let first = train_with(
        &model(&cfg),
        &data,
        &cfg,
        TrainOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            stop_after_epoch: Some(3),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(first.log.status, RunStatus::Halted { epoch: 3 });
    let ck = load_checkpoint(&dir.path().join("final.ckpt")).unwrap();
    assert_eq!(ck.epoch, 3);
    let second = train_with(
        &model(&cfg),
        &data,
        &cfg,
        TrainOptions {
            resume: Some(ck),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(second.params, full.params);
    assert_eq!(second.optimizer, full.optimizer);
    let mut joined = first.log.clone();
    joined.extend(second.log.clone()).unwrap();
    assert_eq!(joined.without_timing(), full.log.without_timing());
    assert_eq!(joined.status, RunStatus::Completed);
}

#[test]
fn injected_gradient_blowup_halts_before_the_update() {
    let cfg = tiny_config(4);
    let data = tiny_data();
    let trigger = 8;
    let out = train_with(
        &model(&cfg),
        &data,
        &cfg,
        TrainOptions {
            grad_hook: Some(Box::new(move |info, g| {
                if info.step == trigger {
                    g.iter_mut().for_each(|v| *v *= 1e9);
                }
            })),
            ..Default::default()
        },
    )
    .unwrap();
    let last = out.log.rows.last().unwrap();
    assert_eq!(last.step, trigger);
    assert_eq!(last.status, STATUS_DIVERGED);
    assert!(last.grad_norm > 1e3);
    match &out.log.status {
        RunStatus::Diverged { epoch, step, reason } => {
            assert_eq!((*epoch, *step), (2, trigger));
            assert!(reason.starts_with("grad_norm ") && reason.ends_with("> 1000"), "{reason}");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
    // Step 8 opens epoch 2, so the surviving params are those after two epochs.
    let two = train_with(
        &model(&cfg),
        &data,
        &cfg,
        TrainOptions {
            stop_after_epoch: Some(2),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.params, two.params);
}

#[test]
fn non_finite_gradient_is_caught() {
    let cfg = tiny_config(1);
    let out = train_with(
        &model(&cfg),
        &tiny_data(),
        &cfg,
        TrainOptions {
            grad_hook: Some(Box::new(|info, g| {
                if info.step == 1 {
                    g[0] = Real::NAN;
                }
            })),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(matches!(out.log.status, RunStatus::Diverged { step: 1, ref reason, .. } if reason == "non-finite gradient"));
    assert_eq!(out.log.rows.len(), 2);
}

#[test]
fn fixed_schedule_logs_constant_k() {
    let cfg = TrainConfig {
        schedule: ScheduleSpec::Fixed { k: 1, delta_t: 1.0 },
        ..tiny_config(3)
    };
    let out = train(&model(&cfg), &tiny_data(), &cfg).unwrap();
    assert!(out.log.rows.iter().all(|r| r.k == 1 && r.delta_t == 1.0));
}

#[test]
fn config_text_drives_training() {
    let mut cfg = TrainConfig::from_text(
        "epochs = 2\nbatch_size = 8\nlearning_rate = 1e-3\nnet.depth = 1\nnet.base_channels = 3\nnet.pde_layers = 1\nnet.height = 8\nnet.width = 8\nschedule = fixed:2,0.5\n",
    )
    .unwrap();
    cfg.validate().unwrap();
    cfg.apply("optimizer", "sgd").unwrap();
    let out = train(&model(&cfg), &tiny_data(), &cfg).unwrap();
    assert_eq!(out.log.rows.len(), 4);
    assert!(out.log.rows.iter().all(|r| r.k == 2));
}

#[test]
fn evaluation_matches_training_validation() {
    let cfg = tiny_config(2);
    let data = tiny_data();
    let out = train(&model(&cfg), &data, &cfg).unwrap();
    let trained = Model::with_params(cfg.net, out.params.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = evaluate(&trained, &data, Split::Val, out.checkpoint.discretization, Some(dir.path())).unwrap();
    let b = evaluate(&trained, &data, Split::Val, out.checkpoint.discretization, None).unwrap();
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    assert!((a.mean_restored_psnr() - out.final_val_psnr().unwrap()).abs() < 1e-9);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 12);
}

#[test]
fn stability_report_compares_both_arms() {
    let cfg = tiny_config(5);
    let report = stability_experiment(&tiny_data(), &cfg).unwrap();
    assert!(report.same_first_batch_order);
    assert_eq!(report.direct.schedule, "5");
    assert_eq!(report.progressive.schedule, "1->3->5");
    assert!(report.direct.log.rows.iter().all(|r| r.k == 5));
    let ks: Vec<usize> = report.progressive.epochs.iter().map(|e| e.k).collect();
    assert_eq!(ks, vec![1, 1, 3, 3, 5]);
    let text = report.to_string();
    assert!(text.contains("max grad norm") && text.contains("direct") && text.contains("progressive"));
    let csv = String::from_utf8(report.summary_csv().unwrap()).unwrap();
    assert!(csv.starts_with("strategy,schedule,status,diverged_epoch,steps,max_grad_norm,final_val_psnr\n"));
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    assert!(dir.path().join("progressive_log.csv").exists());
}

#[test]
fn ablation_varies_only_the_axis() {
    let cfg = tiny_config(2);
    let data = tiny_data();
    let k = ablate(&data, &cfg, AblationAxis::K, &[0, 1, 3]).unwrap();
    assert_eq!(k.rows.len(), 3);
    assert_eq!((k.rows[0].pde_layers, k.rows[0].pde_macs), (0, 0));
    assert!(k.rows[1].pde_macs > 0);
    assert_eq!(k.rows[2].schedule, "1->3");
    assert!(k.rows.iter().all(|r| r.status == "completed"));

    let layers = ablate(&data, &cfg, AblationAxis::Layers, &[0, 2]).unwrap();
    assert_eq!(layers.rows[1].pde_layers, 2);
    // Layers = 0 and K = 0 are the same run.
    assert_eq!(layers.rows[0].val_psnr, k.rows[0].val_psnr);
    assert!(k.table().contains("val PSNR"));
}

#[test]
fn mismatched_model_is_rejected() {
    let cfg = tiny_config(1);
    let other = Model::new(NetConfig { pde_layers: 1, ..tiny_net() }, 0).unwrap();
    assert!(train(&other, &tiny_data(), &cfg).is_err());
}
