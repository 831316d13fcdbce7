mod common;

use std::path::Path;

use augssl_core::apc::PretrainConfig;
use augssl_core::harness::{
    load_reports, report_deltas, run_grid, ExperimentSpec, RunStatus, StrategyKind, StrategyRatios,
};
use augssl_core::probe::FinetuneConfig;
use augssl_core::Error;

use common::{noise, synth};

fn tiny_spec(dir: &Path, strategies: Vec<StrategyRatios>) -> ExperimentSpec {
    ExperimentSpec {
        name: "tiny".into(),
        base_manifest: synth(dir, "base", 4, 0.5, 1, 1.0),
        finetune_manifest: synth(dir, "ft", 3, 0.5, 2, 1.0),
        test_manifest: synth(dir, "te", 3, 0.5, 3, 1.0),
        noise_manifest: Some(noise(dir, 4)),
        extra_clean_manifest: None,
        other_corpus_manifest: None,
        strategies,
        seeds: vec![0],
        pretrain: PretrainConfig {
            epochs: 2,
            hidden_dim: 8,
            batch_size: 2,
            learning_rate: 1e-3,
            ..Default::default()
        },
        finetune: FinetuneConfig {
            epochs: 2,
            batch_size: 2,
            learning_rate: 1e-3,
            ..Default::default()
        },
        snr_choices_db: vec![5.0, 10.0, 15.0],
        pitch: Default::default(),
        stack_effects: false,
        output_dir: None,
        keep_audio: false,
    }
}

fn pitch1() -> Vec<StrategyRatios> {
    vec![StrategyRatios {
        strategy: StrategyKind::Pitch,
        ratios: vec![1],
    }]
}

#[test]
fn one_cell_grid_then_resume() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_spec(dir.path(), pitch1());
    let out_dir = dir.path().join("grid");
    let first = run_grid(&spec, &out_dir, 1, None).unwrap();
    assert_eq!(first.reports.len(), 2);
    assert_eq!(first.trained, 2);
    assert_eq!(first.reports[0].strategy, StrategyKind::Baseline);
    assert_eq!(first.reports[0].delta_accuracy, Some(0.0));
    let cell = &first.reports[1];
    assert_eq!(cell.run_id, "pitch_r1_s0");
    assert_eq!(
        cell.delta_accuracy,
        Some(cell.frame_accuracy_percent - first.reports[0].frame_accuracy_percent)
    );
    assert!((cell.pretrain_hours - 2.0 * first.reports[0].pretrain_hours).abs() < 1e-12);

    let again = run_grid(&spec, &out_dir, 1, None).unwrap();
    assert_eq!(again.trained, 0);
    assert_eq!(again.reports, first.reports);

    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("run_id,pretrain_hours,strategy,ratio"));
    let table = report_deltas(&load_reports(&out_dir).unwrap(), None).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert!(!out_dir.join("work").join("pitch_r1_s0").exists());
}

#[test]
fn overlap_aborts_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = tiny_spec(dir.path(), pitch1());
    spec.test_manifest = spec.base_manifest.clone();
    let out_dir = dir.path().join("grid");
    assert!(matches!(
        run_grid(&spec, &out_dir, 1, None),
        Err(Error::Overlap(_))
    ));
    assert!(!out_dir.join("cells").exists());
}

#[test]
fn failed_cell_is_recorded_and_grid_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = tiny_spec(dir.path(), pitch1());
    spec.strategies.insert(
        0,
        StrategyRatios {
            strategy: StrategyKind::Noise,
            ratios: vec![1],
        },
    );
    // a noise manifest whose audio is missing
    let broken = dir.path().join("broken.jsonl");
    std::fs::write(
        &broken,
        "{\"id\":\"n\",\"audio_path\":\"missing.wav\",\"duration_s\":1.0,\"labels_path\":null,\"source_tag\":\"clean\"}\n",
    )
    .unwrap();
    spec.noise_manifest = Some(broken);
    let out_dir = dir.path().join("grid");
    let out = run_grid(&spec, &out_dir, 1, None).unwrap();
    assert_eq!(out.failed, 1);
    let statuses: Vec<(String, RunStatus)> =
        out.reports.iter().map(|r| (r.run_id.clone(), r.status)).collect();
    assert_eq!(
        statuses,
        vec![
            ("baseline_s0".into(), RunStatus::Ok),
            ("noise_r1_s0".into(), RunStatus::Failed),
            ("pitch_r1_s0".into(), RunStatus::Ok),
        ]
    );
    assert!(out.reports[1].error.as_deref().unwrap().starts_with("io:"));
    assert!(out_dir.join("failures/noise_r1_s0.json").exists());
    // failed cells are retried on resume
    let again = run_grid(&spec, &out_dir, 1, None).unwrap();
    assert_eq!(again.trained, 1);
}

#[test]
fn spec_file_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "base", 2, 0.5, 1, 1.0);
    let path = dir.path().join("spec.json");
    std::fs::write(
        &path,
        r#"{"base_manifest":"base/manifest.jsonl","finetune_manifest":"ft.jsonl","test_manifest":"te.jsonl",
            "strategies":[{"strategy":"mix","ratios":[1,2]}],"seeds":[0,1],"noise_manifest":"noise.jsonl"}"#,
    )
    .unwrap();
    let spec = ExperimentSpec::load(&path).unwrap();
    assert_eq!(spec.base_manifest, dir.path().join("base/manifest.jsonl"));
    assert_eq!(spec.strategies[0].strategy, StrategyKind::NoisePitchMix);
    assert_eq!(augssl_core::harness::plan_cells(&spec).len(), 2 + 2 * 2);
}
