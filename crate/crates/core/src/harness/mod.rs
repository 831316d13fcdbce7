//! Experiment grid: pre-train → fine-tune → evaluate for every
//! (strategy, ratio, seed) cell, with persisted per-cell results and
//! delta / scaling reports.

mod grid;
pub mod reference;
mod report;
mod spec;

pub use grid::{
    check_disjoint, load_reports, plan_cells, run_grid, CellId, GridOutcome, RunReport, RunStatus,
};
pub use report::{
    crossover_multiplier, report_deltas, report_scaling, Crossover, DeltaRow, DeltaTable, ScalingPoint,
    ScalingReport,
};
pub use spec::{ExperimentSpec, StrategyKind, StrategyRatios};
