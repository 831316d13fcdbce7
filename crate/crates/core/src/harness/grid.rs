use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{ExperimentSpec, StrategyKind};
use crate::apc::{pretrain, write_loss_curve};
use crate::audio_io::{load_manifest, Manifest, SourceTag};
use crate::augment::{expand_plan, take_duration, AugmentationPlan, AugmentationStrategy, NoiseAugSpec};
use crate::error::{Error, Result};
use crate::probe::{evaluate, finetune, Backbone, FinetuneConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub strategy: StrategyKind,
    /// 0 for the baseline.
    pub ratio: u32,
    pub seed: u64,
}

impl CellId {
    pub fn run_id(&self) -> String {
        match self.strategy {
            StrategyKind::Baseline => format!("baseline_s{}", self.seed),
            s => format!("{s}_r{}_s{}", self.ratio, self.seed),
        }
    }

    /// Seed for the augmentation draws of this cell. Depends only on the
    /// cell itself, so adding cells never perturbs existing ones.
    pub fn augmentation_seed(&self) -> u64 {
        seed::split(
            seed::split_str(self.seed, self.strategy.as_str()),
            u64::from(self.ratio),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub strategy: StrategyKind,
    pub ratio: u32,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub pretrain_utterances: usize,
    /// Summed duration of the pre-training manifest.
    pub pretrain_hours: f64,
    pub final_pretrain_loss: Option<f64>,
    pub frame_accuracy_percent: f64,
    pub total_frames: u64,
    pub correct_frames: u64,
    pub baseline_accuracy_percent: Option<f64>,
    /// Accuracy minus the baseline accuracy of the same seed.
    pub delta_accuracy: Option<f64>,
    pub wall_clock_s: f64,
    /// Fingerprint of everything in the spec that affects this cell's result.
    pub spec_fingerprint: String,
}

impl RunReport {
    pub fn cell(&self) -> CellId {
        CellId {
            strategy: self.strategy,
            ratio: self.ratio,
            seed: self.seed,
        }
    }

    /// Copy with the wall-clock zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_s: 0.0,
            ..self.clone()
        }
    }

    fn failed(cell: CellId, fingerprint: &str, err: &Error, wall_clock_s: f64) -> Self {
        Self {
            run_id: cell.run_id(),
            strategy: cell.strategy,
            ratio: cell.ratio,
            seed: cell.seed,
            status: RunStatus::Failed,
            error: Some(format!("{}: {err}", err.kind())),
            pretrain_utterances: 0,
            pretrain_hours: 0.0,
            final_pretrain_loss: None,
            frame_accuracy_percent: 0.0,
            total_frames: 0,
            correct_frames: 0,
            baseline_accuracy_percent: None,
            delta_accuracy: None,
            wall_clock_s,
            spec_fingerprint: fingerprint.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// One report per planned cell, baseline cells first.
    pub reports: Vec<RunReport>,
    /// Cells trained in this invocation (the rest were resumed from disk).
    pub trained: usize,
    pub failed: usize,
}

/// All cells of a spec: baselines for every seed, then each
/// (strategy, ratio, seed) in spec order.
pub fn plan_cells(spec: &ExperimentSpec) -> Vec<CellId> {
    let mut cells: Vec<CellId> = spec
        .seeds
        .iter()
        .map(|&seed| CellId {
            strategy: StrategyKind::Baseline,
            ratio: 0,
            seed,
        })
        .collect();
    for sr in &spec.strategies {
        for &ratio in &sr.ratios {
            for &seed in &spec.seeds {
                cells.push(CellId {
                    strategy: sr.strategy,
                    ratio,
                    seed,
                });
            }
        }
    }
    cells
}

/// Fails when any utterance (by id or audio file) appears both in a
/// pre-training source and in fine-tuning/test data, or in both of the latter.
pub fn check_disjoint(pretrain_sources: &[&Manifest], finetune: &Manifest, test: &Manifest) -> Result<()> {
    let keys = |m: &Manifest| -> HashMap<String, String> {
        let mut out = HashMap::new();
        for e in &m.entries {
            out.insert(format!("id:{}", e.id), e.id.clone());
            out.insert(format!("path:{}", m.audio_path(e).display()), e.id.clone());
        }
        out
    };
    let ft = keys(finetune);
    let te = keys(test);
    for src in pretrain_sources {
        for (k, id) in keys(src) {
            for (other, name) in [(&ft, "fine-tuning"), (&te, "test")] {
                if other.contains_key(&k) {
                    return Err(Error::Overlap(format!(
                        "pre-training utterance {id} also appears in the {name} manifest"
                    )));
                }
            }
        }
    }
    for (k, id) in &ft {
        if te.contains_key(k) {
            return Err(Error::Overlap(format!(
                "utterance {id} is in both fine-tuning and test manifests"
            )));
        }
    }
    Ok(())
}

struct Inputs {
    base: Manifest,
    finetune: Manifest,
    test: Manifest,
    noise: Option<Manifest>,
    extra_clean: Option<Manifest>,
    other_corpus: Option<Manifest>,
}

impl Inputs {
    fn load(spec: &ExperimentSpec) -> Result<Self> {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(load_manifest).transpose();
        Ok(Self {
            base: load_manifest(&spec.base_manifest)?,
            finetune: load_manifest(&spec.finetune_manifest)?,
            test: load_manifest(&spec.test_manifest)?,
            noise: opt(&spec.noise_manifest)?,
            extra_clean: opt(&spec.extra_clean_manifest)?,
            other_corpus: opt(&spec.other_corpus_manifest)?,
        })
    }
}

fn fingerprint(spec: &ExperimentSpec) -> Result<String> {
    let mut s = spec.clone();
    s.name.clear();
    s.strategies.clear();
    s.seeds.clear();
    s.output_dir = None;
    s.keep_audio = false;
    let json = serde_json::to_string(&s)?;
    Ok(format!("{:016x}", seed::split_str(0, &json)))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn cell_path(out_dir: &Path, cell: &CellId) -> PathBuf {
    out_dir.join("cells").join(format!("{}.json", cell.run_id()))
}

/// Completed cell reports found under `out_dir/cells`, sorted by cell.
pub fn load_reports(out_dir: impl AsRef<Path>) -> Result<Vec<RunReport>> {
    let dir = out_dir.as_ref().join("cells");
    let mut out = Vec::new();
    let rd = match fs::read_dir(&dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(Error::io(&dir, e)),
    };
    for ent in rd {
        let path = ent.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().and_then(|s| s.to_str()) != Some("json") {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let r: RunReport = serde_json::from_str(&text)?;
        if r.status == RunStatus::Ok {
            out.push(r);
        }
    }
    out.sort_by_key(|r| r.cell());
    Ok(out)
}

fn pretrain_manifest(spec: &ExperimentSpec, inputs: &Inputs, cell: &CellId, work: &Path) -> Result<Manifest> {
    let base = &inputs.base;
    let noise = || -> Result<NoiseAugSpec> {
        let m = inputs
            .noise
            .clone()
            .ok_or_else(|| Error::Config("noise manifest missing".into()))?;
        Ok(NoiseAugSpec {
            noise_manifest: m,
            snr_choices_db: spec.snr_choices_db.clone(),
        })
    };
    let strategy = match cell.strategy {
        StrategyKind::Baseline => return Ok(base.clone()),
        StrategyKind::CleanExtra => {
            let pool = inputs
                .extra_clean
                .as_ref()
                .ok_or_else(|| Error::Config("extra clean manifest missing".into()))?;
            let mut entries: Vec<_> = base.entries.iter().map(|e| base.absolutized(e)).collect();
            let target = f64::from(cell.ratio) * base.total_duration_s();
            entries.extend(take_duration(pool, target, "extra.", SourceTag::Clean)?);
            return Manifest::new(entries, &base.base_dir);
        }
        StrategyKind::CorpusMix => AugmentationStrategy::CorpusMix {
            other: inputs
                .other_corpus
                .clone()
                .ok_or_else(|| Error::Config("other corpus manifest missing".into()))?,
        },
        StrategyKind::Noise => AugmentationStrategy::Noise(noise()?),
        StrategyKind::Pitch => AugmentationStrategy::Pitch(spec.pitch),
        StrategyKind::NoisePitchMix => AugmentationStrategy::NoisePitchMix {
            noise: noise()?,
            pitch: spec.pitch,
            stack_effects: spec.stack_effects,
        },
    };
    let plan = AugmentationPlan {
        base: base.clone(),
        strategy,
        ratio: cell.ratio,
        seed: cell.augmentation_seed(),
    };
    expand_plan(&plan, work)
}

fn run_cell(
    spec: &ExperimentSpec,
    inputs: &Inputs,
    cell: CellId,
    out_dir: &Path,
    baseline: Option<f64>,
    fingerprint: &str,
) -> Result<RunReport> {
    let started = Instant::now();
    let work = out_dir.join("work").join(cell.run_id());
    let manifest = pretrain_manifest(spec, inputs, &cell, &work)?;
    let pcfg = crate::apc::PretrainConfig {
        seed: cell.seed,
        checkpoint_every: None,
        ..spec.pretrain
    };
    let outcome = pretrain(&pcfg, &manifest)?;
    write_loss_curve(
        &outcome.loss_curve,
        out_dir.join("curves").join(format!("{}.csv", cell.run_id())),
    )?;
    let fcfg = FinetuneConfig {
        seed: cell.seed,
        ..spec.finetune
    };
    let tuned = finetune(
        Backbone::Apc(outcome.model.clone()),
        &inputs.finetune,
        &pcfg.features,
        &fcfg,
    )?;
    let eval = evaluate(&tuned.probe, &inputs.test)?;
    if !spec.keep_audio && work.exists() {
        fs::remove_dir_all(&work).map_err(|e| Error::io(&work, e))?;
    }
    let acc = eval.frame_accuracy_percent;
    let baseline = if cell.strategy == StrategyKind::Baseline {
        Some(acc)
    } else {
        baseline
    };
    Ok(RunReport {
        run_id: cell.run_id(),
        strategy: cell.strategy,
        ratio: cell.ratio,
        seed: cell.seed,
        status: RunStatus::Ok,
        error: None,
        pretrain_utterances: manifest.len() - outcome.skipped.len(),
        pretrain_hours: outcome.pretrain_hours,
        final_pretrain_loss: outcome.final_loss(),
        frame_accuracy_percent: acc,
        total_frames: eval.total_frames,
        correct_frames: eval.correct_frames,
        baseline_accuracy_percent: baseline,
        delta_accuracy: baseline.map(|b| acc - b),
        wall_clock_s: started.elapsed().as_secs_f64(),
        spec_fingerprint: fingerprint.to_string(),
    })
}

/// Column order of the aggregate `results.csv`.
pub(crate) const RESULTS_HEADER: &str = "run_id,pretrain_hours,strategy,ratio,seed,frame_accuracy_percent,total_frames,correct_frames,baseline_accuracy_percent,delta_accuracy,final_pretrain_loss";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn results_csv(reports: &[RunReport]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.pretrain_hours,
            r.strategy,
            r.ratio,
            r.seed,
            r.frame_accuracy_percent,
            r.total_frames,
            r.correct_frames,
            opt(r.baseline_accuracy_percent),
            opt(r.delta_accuracy),
            opt(r.final_pretrain_loss),
        ));
    }
    s
}

#[derive(Serialize)]
struct GridMeta<'a> {
    spec: &'a ExperimentSpec,
    spec_fingerprint: &'a str,
    cells: Vec<String>,
    notes: [&'static str; 4],
}

/// Runs every cell of `spec` not already completed under `out_dir`, using at
/// most `jobs` worker threads. `max_new_cells` stops after that many fresh
/// runs, leaving the grid resumable.
pub fn run_grid(
    spec: &ExperimentSpec,
    out_dir: impl AsRef<Path>,
    jobs: usize,
    max_new_cells: Option<usize>,
) -> Result<GridOutcome> {
    let out_dir = out_dir.as_ref();
    spec.validate()?;
    let inputs = Inputs::load(spec)?;
    let mut sources = vec![&inputs.base];
    sources.extend(inputs.extra_clean.as_ref());
    sources.extend(inputs.other_corpus.as_ref());
    check_disjoint(&sources, &inputs.finetune, &inputs.test)?;

    let fp = fingerprint(spec)?;
    let cells = plan_cells(spec);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let meta = GridMeta {
        spec,
        spec_fingerprint: &fp,
        cells: cells.iter().map(CellId::run_id).collect(),
        notes: [
            "pretrain_hours are summed manifest durations",
            "delta_accuracy is relative to the baseline of the same seed; multi-seed means are unweighted",
            "crossover multipliers use linear interpolation between bracketing points",
            "repeated seeds are added here; the reference results are single runs without variance",
        ],
    };
    write_atomic(
        &out_dir.join("grid.json"),
        serde_json::to_string_pretty(&meta)?.as_bytes(),
    )?;

    let mut done: BTreeMap<CellId, RunReport> = BTreeMap::new();
    for r in load_reports(out_dir)? {
        if r.spec_fingerprint == fp {
            done.insert(r.cell(), r);
        } else {
            warn!("{} was produced by a different spec; rerunning", r.run_id);
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut budget = max_new_cells.unwrap_or(usize::MAX);
    let mut trained = 0;
    let mut failures: BTreeMap<CellId, RunReport> = BTreeMap::new();
    let (baselines, rest): (Vec<CellId>, Vec<CellId>) =
        cells.iter().partition(|c| c.strategy == StrategyKind::Baseline);

    for phase in [baselines, rest] {
        let todo: Vec<CellId> = phase
            .into_iter()
            .filter(|c| !done.contains_key(c))
            .take(budget)
            .collect();
        budget -= todo.len();
        trained += todo.len();
        let baseline_acc: HashMap<u64, f64> = done
            .values()
            .filter(|r| r.strategy == StrategyKind::Baseline)
            .map(|r| (r.seed, r.frame_accuracy_percent))
            .collect();
        let results: Vec<RunReport> = pool.install(|| {
            todo.par_iter()
                .map(|&cell| {
                    info!("running {}", cell.run_id());
                    let started = Instant::now();
                    let base = baseline_acc.get(&cell.seed).copied();
                    let report = match run_cell(spec, &inputs, cell, out_dir, base, &fp) {
                        Ok(r) => r,
                        Err(e) => {
                            warn!("{} failed: {e}", cell.run_id());
                            RunReport::failed(cell, &fp, &e, started.elapsed().as_secs_f64())
                        }
                    };
                    let path = match report.status {
                        RunStatus::Ok => cell_path(out_dir, &cell),
                        RunStatus::Failed => out_dir.join("failures").join(format!("{}.json", cell.run_id())),
                    };
                    serde_json::to_string_pretty(&report)
                        .map_err(Error::from)
                        .and_then(|j| write_atomic(&path, j.as_bytes()))
                        .map(|_| report)
                })
                .collect::<Result<_>>()
        })?;
        for r in results {
            match r.status {
                RunStatus::Ok => {
                    done.insert(r.cell(), r);
                }
                RunStatus::Failed => {
                    failures.insert(r.cell(), r);
                }
            }
        }
    }

    let completed = load_reports(out_dir)?
        .into_iter()
        .filter(|r| r.spec_fingerprint == fp)
        .collect::<Vec<_>>();
    write_atomic(&out_dir.join("results.csv"), results_csv(&completed).as_bytes())?;

    let failed = failures.len();
    let reports = cells
        .iter()
        .filter_map(|c| done.get(c).or_else(|| failures.get(c)).cloned())
        .collect();
    Ok(GridOutcome {
        reports,
        trained,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::ManifestEntry;
    use crate::harness::StrategyRatios;

    fn manifest(ids: &[&str]) -> Manifest {
        let entries = ids
            .iter()
            .map(|id| ManifestEntry {
                id: id.to_string(),
                audio_path: format!("audio/{id}.wav"),
                duration_s: 1.0,
                labels_path: None,
                source_tag: SourceTag::Clean,
            })
            .collect();
        Manifest::new(entries, "/corpus").unwrap()
    }

    fn spec(strategies: Vec<StrategyRatios>, seeds: Vec<u64>) -> ExperimentSpec {
        ExperimentSpec {
            name: String::new(),
            base_manifest: "b".into(),
            finetune_manifest: "f".into(),
            test_manifest: "t".into(),
            noise_manifest: None,
            extra_clean_manifest: None,
            other_corpus_manifest: None,
            strategies,
            seeds,
            pretrain: Default::default(),
            finetune: Default::default(),
            snr_choices_db: vec![5.0],
            pitch: Default::default(),
            stack_effects: false,
            output_dir: None,
            keep_audio: false,
        }
    }

    #[test]
    fn single_pitch_cell_plans_two_runs() {
        let s = spec(
            vec![StrategyRatios {
                strategy: StrategyKind::Pitch,
                ratios: vec![1],
            }],
            vec![0],
        );
        let cells = plan_cells(&s);
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].strategy, StrategyKind::Baseline);
        assert_eq!(cells[1].run_id(), "pitch_r1_s0");
    }

    #[test]
    fn overlap_detected() {
        let base = manifest(&["a", "b"]);
        let ft = manifest(&["c"]);
        let te = manifest(&["b", "d"]);
        assert!(matches!(
            check_disjoint(&[&base], &ft, &te),
            Err(Error::Overlap(_))
        ));
        assert!(check_disjoint(&[&base], &ft, &manifest(&["d"])).is_ok());
        assert!(check_disjoint(&[&base], &ft, &manifest(&["c"])).is_err());
    }

    #[test]
    fn augmentation_seed_is_local_to_the_cell() {
        let a = CellId {
            strategy: StrategyKind::Noise,
            ratio: 2,
            seed: 7,
        };
        let b = CellId {
            strategy: StrategyKind::Pitch,
            ratio: 2,
            seed: 7,
        };
        let c = CellId {
            strategy: StrategyKind::Noise,
            ratio: 3,
            seed: 7,
        };
        assert_ne!(a.augmentation_seed(), b.augmentation_seed());
        assert_ne!(a.augmentation_seed(), c.augmentation_seed());
        assert_eq!(a.augmentation_seed(), a.augmentation_seed());
    }

    #[test]
    fn fingerprint_ignores_grid_layout() {
        let a = spec(vec![], vec![0]);
        let b = spec(
            vec![StrategyRatios {
                strategy: StrategyKind::Pitch,
                ratios: vec![1, 2],
            }],
            vec![0, 1, 2],
        );
        assert_eq!(fingerprint(&a).unwrap(), fingerprint(&b).unwrap());
        let mut c = a.clone();
        c.pretrain.epochs = 3;
        assert_ne!(fingerprint(&a).unwrap(), fingerprint(&c).unwrap());
    }
}
