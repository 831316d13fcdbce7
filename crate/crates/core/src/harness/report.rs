use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use super::grid::{RunReport, RunStatus};
use super::spec::StrategyKind;
use crate::error::{Error, Result};

/// Seed-averaged comparison of one (strategy, ratio) against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub strategy: StrategyKind,
    pub ratio: u32,
    pub n_seeds: usize,
    pub pretrain_hours: f64,
    pub accuracy_percent: f64,
    /// Mean baseline accuracy over the same seeds.
    pub baseline_accuracy_percent: f64,
    /// `accuracy_percent - baseline_accuracy_percent`
    pub delta_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeltaTable {
    pub rows: Vec<DeltaRow>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl DeltaTable {
    pub const CSV_HEADER: &'static str =
        "strategy,ratio,n_seeds,pretrain_hours,accuracy_percent,baseline_accuracy_percent,delta_accuracy";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.strategy,
                r.ratio,
                r.n_seeds,
                r.pretrain_hours,
                r.accuracy_percent,
                r.baseline_accuracy_percent,
                r.delta_accuracy
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let header = ["strategy", "ratio", "seeds", "hours", "acc %", "base %", "delta"];
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.strategy.to_string(),
                    r.ratio.to_string(),
                    r.n_seeds.to_string(),
                    format!("{:.4}", r.pretrain_hours),
                    format!("{:.2}", r.accuracy_percent),
                    format!("{:.2}", r.baseline_accuracy_percent),
                    format!("{:+.2}", r.delta_accuracy),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |cells: Vec<&str>, out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(header.to_vec(), &mut out);
        for row in &body {
            line(row.iter().map(String::as_str).collect(), &mut out);
        }
        out
    }
}

/// Per (strategy, ratio) seed-averaged deltas over the baseline. With
/// `ratio` set, only cells at that ratio are reported.
pub fn report_deltas(reports: &[RunReport], ratio: Option<u32>) -> Result<DeltaTable> {
    let ok: Vec<&RunReport> = reports.iter().filter(|r| r.status == RunStatus::Ok).collect();
    let baselines: BTreeMap<u64, &RunReport> = ok
        .iter()
        .filter(|r| r.strategy == StrategyKind::Baseline)
        .map(|r| (r.seed, *r))
        .collect();
    if baselines.is_empty() {
        return Err(Error::InvalidInput("no baseline run among the reports".into()));
    }
    let mut groups: BTreeMap<(StrategyKind, u32), Vec<&RunReport>> = BTreeMap::new();
    for r in &ok {
        if r.strategy == StrategyKind::Baseline || ratio.is_some_and(|x| x != r.ratio) {
            continue;
        }
        if !baselines.contains_key(&r.seed) {
            warn!("{} has no baseline for seed {}; skipped", r.run_id, r.seed);
            continue;
        }
        groups.entry((r.strategy, r.ratio)).or_default().push(r);
    }
    let rows = groups
        .into_iter()
        .map(|((strategy, ratio), mut runs)| {
            runs.sort_by_key(|r| r.seed);
            let accuracy = mean(runs.iter().map(|r| r.frame_accuracy_percent));
            let base = mean(runs.iter().map(|r| baselines[&r.seed].frame_accuracy_percent));
            DeltaRow {
                strategy,
                ratio,
                n_seeds: runs.len(),
                pretrain_hours: mean(runs.iter().map(|r| r.pretrain_hours)),
                accuracy_percent: accuracy,
                baseline_accuracy_percent: base,
                delta_accuracy: accuracy - base,
            }
        })
        .collect();
    Ok(DeltaTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    /// `accuracy_vs_hours` or `delta_vs_multiplier`
    pub series: String,
    pub strategy: StrategyKind,
    pub x: f64,
    pub y: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub warnings: Vec<String>,
}

impl ScalingReport {
    pub const ACCURACY_VS_HOURS: &'static str = "accuracy_vs_hours";
    pub const DELTA_VS_MULTIPLIER: &'static str = "delta_vs_multiplier";
    pub const CSV_HEADER: &'static str = "series,strategy,x,y,n_seeds";

    /// `(x, y)` pairs of one series, in x order.
    pub fn series(&self, name: &str, strategy: StrategyKind) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.series == name && p.strategy == strategy)
            .map(|p| (p.x, p.y))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{},{}", p.series, p.strategy, p.x, p.y, p.n_seeds);
        }
        s
    }
}

/// Accuracy against total pre-training hours for every strategy (each series
/// starts at the baseline point), and delta against augmentation multiplier.
pub fn report_scaling(reports: &[RunReport]) -> Result<ScalingReport> {
    let table = report_deltas(reports, None)?;
    let base: Vec<&RunReport> = reports
        .iter()
        .filter(|r| r.status == RunStatus::Ok && r.strategy == StrategyKind::Baseline)
        .collect();
    let base_hours = mean(base.iter().map(|r| r.pretrain_hours));
    let base_acc = mean(base.iter().map(|r| r.frame_accuracy_percent));

    let mut by_strategy: BTreeMap<StrategyKind, Vec<&DeltaRow>> = BTreeMap::new();
    for row in &table.rows {
        by_strategy.entry(row.strategy).or_default().push(row);
    }
    let mut out = ScalingReport::default();
    if !by_strategy.values().any(|rows| rows.len() >= 2) {
        let msg = "no strategy has two or more ratios; scaling series are partial".to_string();
        warn!("{msg}");
        out.warnings.push(msg);
    }
    for (strategy, mut rows) in by_strategy {
        rows.sort_by(|a, b| {
            a.pretrain_hours
                .total_cmp(&b.pretrain_hours)
                .then(a.ratio.cmp(&b.ratio))
        });
        out.points.push(ScalingPoint {
            series: ScalingReport::ACCURACY_VS_HOURS.into(),
            strategy,
            x: base_hours,
            y: base_acc,
            n_seeds: base.len(),
        });
        for r in &rows {
            out.points.push(ScalingPoint {
                series: ScalingReport::ACCURACY_VS_HOURS.into(),
                strategy,
                x: r.pretrain_hours,
                y: r.accuracy_percent,
                n_seeds: r.n_seeds,
            });
        }
        rows.sort_by_key(|r| r.ratio);
        for r in &rows {
            out.points.push(ScalingPoint {
                series: ScalingReport::DELTA_VS_MULTIPLIER.into(),
                strategy,
                x: f64::from(r.ratio),
                y: r.delta_accuracy,
                n_seeds: r.n_seeds,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Crossover {
    /// Interpolated multiplier where the series first reaches the target.
    Reached { multiplier: f64 },
    /// The first point already meets the target.
    AlreadyExceeded { multiplier: f64 },
    /// The series never reaches the target.
    Unreachable { max_delta: Option<f64> },
}

/// Multiplier at which a (multiplier, delta) series first reaches `target`,
/// by linear interpolation between the bracketing points.
pub fn crossover_multiplier(series: &[(f64, f64)], target: f64) -> Crossover {
    let mut pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(i) = pts.iter().position(|&(_, y)| y >= target) else {
        return Crossover::Unreachable {
            max_delta: pts.iter().map(|p| p.1).reduce(f64::max),
        };
    };
    let (x1, y1) = pts[i];
    if i == 0 {
        return if y1 == target {
            Crossover::Reached { multiplier: x1 }
        } else {
            Crossover::AlreadyExceeded { multiplier: x1 }
        };
    }
    let (x0, y0) = pts[i - 1];
    Crossover::Reached {
        multiplier: x0 + (target - y0) * (x1 - x0) / (y1 - y0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(strategy: StrategyKind, ratio: u32, seed: u64, hours: f64, acc: f64) -> RunReport {
        RunReport {
            run_id: format!("{strategy}_{ratio}_{seed}"),
            strategy,
            ratio,
            seed,
            status: RunStatus::Ok,
            error: None,
            pretrain_utterances: 1,
            pretrain_hours: hours,
            final_pretrain_loss: None,
            frame_accuracy_percent: acc,
            total_frames: 100,
            correct_frames: 0,
            baseline_accuracy_percent: None,
            delta_accuracy: None,
            wall_clock_s: 0.0,
            spec_fingerprint: String::new(),
        }
    }

    #[test]
    fn interpolates_between_brackets() {
        assert_eq!(
            crossover_multiplier(&[(1.0, 2.0), (3.0, 6.0)], 4.0),
            Crossover::Reached { multiplier: 2.0 }
        );
    }

    #[test]
    fn boundary_and_unreachable() {
        let s = [(3.0, 6.0), (1.0, 2.0)];
        assert_eq!(
            crossover_multiplier(&s, 1.0),
            Crossover::AlreadyExceeded { multiplier: 1.0 }
        );
        assert_eq!(
            crossover_multiplier(&s, 6.0),
            Crossover::Reached { multiplier: 3.0 }
        );
        assert_eq!(
            crossover_multiplier(&s, 7.0),
            Crossover::Unreachable { max_delta: Some(6.0) }
        );
        assert_eq!(
            crossover_multiplier(&[], 1.0),
            Crossover::Unreachable { max_delta: None }
        );
    }

    #[test]
    fn reference_style_delta() {
        let reports = vec![
            run(StrategyKind::Baseline, 0, 0, 25.0, 51.5),
            run(StrategyKind::NoisePitchMix, 3, 0, 100.0, 54.8),
            run(StrategyKind::Pitch, 3, 0, 100.0, 51.5),
        ];
        let t = report_deltas(&reports, Some(3)).unwrap();
        let mix = t
            .rows
            .iter()
            .find(|r| r.strategy == StrategyKind::NoisePitchMix)
            .unwrap();
        assert!((mix.delta_accuracy - 3.3).abs() < 1e-9);
        let pitch = t.rows.iter().find(|r| r.strategy == StrategyKind::Pitch).unwrap();
        assert_eq!(pitch.delta_accuracy, 0.0);
    }

    #[test]
    fn deltas_recompute_exactly() {
        let mut reports = Vec::new();
        for seed in 0..3 {
            reports.push(run(
                StrategyKind::Baseline,
                0,
                seed,
                0.1,
                40.0 + seed as f64 * 1.37,
            ));
            for ratio in 1..=3 {
                reports.push(run(
                    StrategyKind::Noise,
                    ratio,
                    seed,
                    0.1 * (1 + ratio) as f64,
                    41.3 + ratio as f64 * 0.71 - seed as f64 * 0.13,
                ));
            }
        }
        let t = report_deltas(&reports, None).unwrap();
        assert_eq!(t.rows.len(), 3);
        for row in &t.rows {
            assert_eq!(row.n_seeds, 3);
            assert_eq!(
                row.delta_accuracy,
                row.accuracy_percent - row.baseline_accuracy_percent
            );
        }
        let text = t.to_text();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(t.to_csv().lines().count(), 4);
    }

    #[test]
    fn missing_baseline_is_an_error() {
        let reports = vec![run(StrategyKind::Noise, 1, 0, 1.0, 50.0)];
        assert!(report_deltas(&reports, None).is_err());
    }

    #[test]
    fn scaling_series_sorted_by_hours() {
        let reports = vec![
            run(StrategyKind::Baseline, 0, 0, 25.0, 51.5),
            run(StrategyKind::CleanExtra, 3, 0, 100.0, 57.1),
            run(StrategyKind::CleanExtra, 1, 0, 50.0, 54.0),
            run(StrategyKind::CleanExtra, 2, 0, 75.0, 55.9),
        ];
        let s = report_scaling(&reports).unwrap();
        let acc = s.series(ScalingReport::ACCURACY_VS_HOURS, StrategyKind::CleanExtra);
        let hours: Vec<f64> = acc.iter().map(|p| p.0).collect();
        assert_eq!(hours, vec![25.0, 50.0, 75.0, 100.0]);
        let d = s.series(ScalingReport::DELTA_VS_MULTIPLIER, StrategyKind::CleanExtra);
        assert_eq!(d.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn single_ratio_warns() {
        let reports = vec![
            run(StrategyKind::Baseline, 0, 0, 25.0, 51.5),
            run(StrategyKind::Pitch, 1, 0, 50.0, 52.0),
        ];
        let s = report_scaling(&reports).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(
            s.series(ScalingReport::ACCURACY_VS_HOURS, StrategyKind::Pitch)
                .len(),
            2
        );
    }
}
