use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use augssl_core::apc::{pretrain, write_loss_curve, ApcMeta, ApcModel, PretrainConfig};
use augssl_core::audio_io::synth::{
    generate_noise_corpus, generate_synth_corpus, NoiseCorpusSpec, SynthCorpusSpec,
};
use augssl_core::audio_io::{load_manifest, ManifestEntry};
use augssl_core::augment::{expand_plan, AugmentationPlan, AugmentationStrategy, NoiseAugSpec, PitchAugSpec};
use augssl_core::dsp::{extract_features, save_features, FeatureConfig, FeatureNorm};
use augssl_core::harness::{load_reports, report_deltas, report_scaling, run_grid, ExperimentSpec};
use augssl_core::nn::gradcheck::run_suite;
use augssl_core::nn::Checkpoint;
use augssl_core::probe::{evaluate, finetune, Backbone, FinetuneConfig, ProbeModel};
use augssl_core::Manifest;
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::*;

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::SynthCorpus(a) => synth_corpus(g, a),
        Command::Featurize(a) => featurize(g, a),
        Command::Augment(a) => augment(g, a),
        Command::Pretrain(a) => pretrain_cmd(g, a),
        Command::Finetune(a) => finetune_cmd(g, a),
        Command::Evaluate(a) => evaluate_cmd(g, a),
        Command::Experiment(a) => experiment(g, a),
        Command::Report(a) => report(g, a),
        Command::Gradcheck(a) => return gradcheck(g, a),
    }?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RunRecord<'a, A: Serialize> {
    command: &'a str,
    seed: u64,
    version: &'a str,
    feature_format_version: u32,
    checkpoint_format_version: u32,
    global: &'a GlobalArgs,
    args: &'a A,
}

/// Writes the invocation record to `path`.
fn record<A: Serialize>(path: &Path, command: &str, seed: u64, g: &GlobalArgs, args: &A) -> Result<()> {
    let rec = RunRecord {
        command,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        feature_format_version: augssl_core::FEATURE_FORMAT_VERSION,
        checkpoint_format_version: augssl_core::CHECKPOINT_FORMAT_VERSION,
        global: g,
        args,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, serde_json::to_string_pretty(&rec)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// `<file>.run.json` next to a single-file output.
fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn read_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(serde_json::from_str(&text).map_err(augssl_core::Error::from)?)
        }
    }
}

fn synth_corpus(g: &GlobalArgs, a: &SynthCorpusArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let m = match a.kind {
        CorpusKind::Speech => {
            let mut spec = SynthCorpusSpec {
                num_utterances: a.count,
                utterance_duration_s: a.duration,
                num_phoneme_classes: a.classes,
                seed,
                formant_scale: a.formant_scale,
                ..Default::default()
            };
            if let Some(p) = &a.id_prefix {
                spec.id_prefix = p.clone();
            }
            generate_synth_corpus(&spec, &a.out_dir)?
        }
        CorpusKind::Noise => {
            let mut spec = NoiseCorpusSpec {
                num_files: a.count,
                duration_s: a.duration,
                seed,
                ..Default::default()
            };
            if let Some(p) = &a.id_prefix {
                spec.id_prefix = p.clone();
            }
            generate_noise_corpus(&spec, &a.out_dir)?
        }
    };
    record(&a.out_dir.join("run.json"), "synth-corpus", seed, g, a)?;
    println!(
        "{} utterances, {:.4} h -> {}",
        m.len(),
        m.total_hours(),
        a.out_dir.join("manifest.jsonl").display()
    );
    Ok(())
}

fn featurize(g: &GlobalArgs, a: &FeaturizeArgs) -> Result<()> {
    let mut config: FeatureConfig = read_json(a.config.as_deref())?;
    config.normalize = FeatureNorm::None;
    let m = load_manifest(&a.manifest)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut entries = Vec::with_capacity(m.len());
    for e in &m.entries {
        let feats = extract_features(&m, e, &config)?;
        let rel = format!("{}.afea", e.id);
        save_features(&feats, a.out_dir.join(&rel))?;
        let abs = m.absolutized(e);
        entries.push(ManifestEntry {
            audio_path: rel,
            ..abs
        });
    }
    let out = Manifest::new(entries, &a.out_dir)?;
    out.save(a.out_dir.join("manifest.jsonl"))?;
    record(
        &a.out_dir.join("run.json"),
        "featurize",
        g.seed.unwrap_or(0),
        g,
        a,
    )?;
    println!("{} feature files -> {}", out.len(), a.out_dir.display());
    Ok(())
}

fn augment(g: &GlobalArgs, a: &AugmentArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let need = |p: &Option<PathBuf>, flag: &str| -> Result<Manifest> {
        match p {
            Some(p) => Ok(load_manifest(p)?),
            None => bail!(
                "--strategy {} needs {flag}",
                a.strategy.to_possible_value().unwrap().get_name()
            ),
        }
    };
    let noise = |a: &AugmentArgs| -> Result<NoiseAugSpec> {
        Ok(NoiseAugSpec {
            noise_manifest: need(&a.noise_manifest, "--noise-manifest")?,
            snr_choices_db: a.snr_db.clone(),
        })
    };
    let pitch = PitchAugSpec {
        max_semitones: a.max_semitones,
        dead_zone: a.dead_zone,
    };
    let strategy = match a.strategy {
        AugmentKind::Noise => AugmentationStrategy::Noise(noise(a)?),
        AugmentKind::Pitch => AugmentationStrategy::Pitch(pitch),
        AugmentKind::Mix => AugmentationStrategy::NoisePitchMix {
            noise: noise(a)?,
            pitch,
            stack_effects: a.stack_effects,
        },
        AugmentKind::Corpus => AugmentationStrategy::CorpusMix {
            other: need(&a.other_manifest, "--other-manifest")?,
        },
    };
    let plan = AugmentationPlan {
        base: load_manifest(&a.base)?,
        strategy,
        ratio: a.ratio,
        seed,
    };
    let m = expand_plan(&plan, &a.out_dir)?;
    record(&a.out_dir.join("run.json"), "augment", seed, g, a)?;
    println!(
        "{} utterances, {:.4} h -> {}",
        m.len(),
        m.total_hours(),
        a.out_dir.join("manifest.jsonl").display()
    );
    Ok(())
}

fn pretrain_cmd(g: &GlobalArgs, a: &PretrainArgs) -> Result<()> {
    let mut cfg: PretrainConfig = read_json(a.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.hidden_dim {
        cfg.hidden_dim = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    let m = load_manifest(&a.manifest)?;
    let out = pretrain(&cfg, &m)?;
    let meta = ApcMeta {
        kind: "apc".into(),
        input_dim: out.model.input_dim(),
        hidden_dim: out.model.hidden_dim(),
        num_layers: cfg.num_layers,
        residual: true,
        pretrain_hours: out.pretrain_hours,
        final_loss: out.final_loss(),
        config: cfg,
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    out.model.to_checkpoint(&meta)?.save(&a.out)?;
    let curve = a.loss_curve.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".loss.csv");
        PathBuf::from(s)
    });
    write_loss_curve(&out.loss_curve, &curve)?;
    record(&sidecar(&a.out), "pretrain", cfg.seed, g, a)?;
    println!(
        "{} epochs on {:.4} h, final loss {} -> {}",
        cfg.epochs,
        out.pretrain_hours,
        out.final_loss().map_or("n/a".into(), |l| format!("{l:.6}")),
        a.out.display()
    );
    Ok(())
}

fn finetune_cmd(g: &GlobalArgs, a: &FinetuneArgs) -> Result<()> {
    let mut cfg: FinetuneConfig = read_json(a.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if a.unfreeze {
        cfg.backbone_frozen = false;
    }
    let (backbone, features, apc_meta) = match &a.ckpt {
        Some(p) => {
            let (model, meta) = ApcModel::from_checkpoint(&Checkpoint::load(p)?)?;
            let features = ApcModel::feature_config(&meta);
            (Backbone::Apc(model), features, Some(meta))
        }
        None => (Backbone::Identity { dim: 80 }, FeatureConfig::default(), None),
    };
    let m = load_manifest(&a.manifest)?;
    let out = finetune(backbone, &m, &features, &cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    out.probe.to_checkpoint(&cfg, apc_meta)?.save(&a.out)?;
    record(&sidecar(&a.out), "finetune", cfg.seed, g, a)?;
    println!(
        "{} epochs, final loss {} -> {}",
        cfg.epochs,
        out.loss_curve.last().map_or("n/a".into(), |l| format!("{l:.6}")),
        a.out.display()
    );
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn evaluate_cmd(g: &GlobalArgs, a: &EvaluateArgs) -> Result<()> {
    let (probe, meta) = ProbeModel::from_checkpoint(&Checkpoint::load(&a.probe)?)?;
    let m = load_manifest(&a.manifest)?;
    let rep = evaluate(&probe, &m)?;
    let hours = meta.apc.as_ref().map_or(0.0, |x| x.pretrain_hours);
    let row = format!(
        "run_id,pretrain_hours,strategy,ratio,frame_accuracy_percent,total_frames\n{},{},{},{},{},{}\n",
        csv_field(&a.run_id),
        hours,
        csv_field(&a.strategy),
        a.ratio.map_or(String::new(), |r| r.to_string()),
        rep.frame_accuracy_percent,
        rep.total_frames
    );
    if let Some(dir) = a.report.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&a.report, row).with_context(|| format!("writing {}", a.report.display()))?;
    let seed = g.seed.unwrap_or(meta.finetune.seed);
    record(&sidecar(&a.report), "evaluate", seed, g, a)?;
    println!("{}", serde_json::to_string(&rep)?);
    Ok(())
}

fn experiment(g: &GlobalArgs, a: &ExperimentArgs) -> Result<()> {
    let mut spec = ExperimentSpec::load(&a.spec)?;
    if let Some(s) = g.seed {
        spec.seeds = vec![s];
    }
    let out_dir = match (&a.out_dir, &spec.output_dir) {
        (Some(d), _) | (None, Some(d)) => d.clone(),
        (None, None) => bail!("no output directory: pass --out-dir or set output_dir in the spec"),
    };
    let jobs = g.jobs.unwrap_or_else(rayon::current_num_threads);
    let outcome = run_grid(&spec, &out_dir, jobs, a.max_cells)?;
    record(&out_dir.join("run.json"), "experiment", spec.seeds[0], g, a)?;
    println!(
        "{} cells reported, {} trained now, {} failed -> {}",
        outcome.reports.len(),
        outcome.trained,
        outcome.failed,
        out_dir.display()
    );
    if outcome.failed > 0 {
        bail!(
            "{} grid cells failed; see {}",
            outcome.failed,
            out_dir.join("failures").display()
        );
    }
    Ok(())
}

fn report(g: &GlobalArgs, a: &ReportArgs) -> Result<()> {
    let reports = load_reports(&a.dir)?;
    if reports.is_empty() {
        bail!("no completed cells under {}", a.dir.join("cells").display());
    }
    let csv = match a.kind {
        ReportKind::Deltas => {
            let table = report_deltas(&reports, a.ratio)?;
            print!("{}", table.to_text());
            table.to_csv()
        }
        ReportKind::Scaling => {
            let s = report_scaling(&reports)?;
            for w in &s.warnings {
                println!("warning: {w}");
            }
            s.to_csv()
        }
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out.display()))?;
    record(&sidecar(&a.out), "report", g.seed.unwrap_or(0), g, a)
}

fn gradcheck(g: &GlobalArgs, a: &GradcheckArgs) -> Result<ExitCode> {
    let seed = g.seed.unwrap_or(0);
    let suite = run_suite(a.instances, seed)?;
    let mut ok = true;
    for e in &suite {
        ok &= e.passed;
        println!(
            "{:<14} instances {:>3}  max rel err {:.3e}  tol {:.0e}  {}",
            e.name,
            e.instances,
            e.max_rel_error,
            e.tolerance,
            if e.passed { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
