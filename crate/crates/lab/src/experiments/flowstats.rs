//! Flow-convergence statistics for a mollification ladder.

use transport_core::field::VectorField;
use transport_core::flow::{flow_convergence_stats, FlowStatsOptions};

use super::{drift_ladder, monotone_violations, new_report};
use crate::config::ExperimentConfig;
use crate::report::{cells, ExperimentReport, Series, Verdict};
use crate::LabResult;

/// `est1`/`est2` values at or below this count as converged.
const ZERO_FLOOR: f64 = 1e-14;
/// Allowed spread of `est3` across the ladder.
pub const EST3_SPREAD: f64 = 1.2;

/// `est1`, `est2`, `est3` per ladder level against the raw drift.
pub fn run_flow_stats(cfg: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let drift = cfg.drift()?;
    let ladder = drift_ladder(&drift, &cfg.mollify_ladder)?;
    let mut opts = FlowStatsOptions::new(2, cfg.horizon, cfg.p, cfg.flow_samples());
    opts.direction = cfg.direction()?;
    let refs: Vec<&dyn VectorField> = ladder.iter().map(|b| b.as_ref()).collect();
    let stats = flow_convergence_stats(&refs, drift.as_ref(), cfg.source()?, &opts)?;
    let mut report = new_report(cfg);

    let mut table = Series::new(
        "levels",
        &["delta", "est1", "est1_half_width", "est2", "est2_half_width", "est3", "est3_half_width"],
    );
    for (delta, l) in cfg.mollify_ladder.iter().zip(&stats.levels) {
        let mut row = vec![*delta];
        row.extend(cells(&l.est1));
        row.extend(cells(&l.est2));
        row.extend(cells(&l.est3));
        table.push(row);
    }
    let mut limit = Series::new("limit", &["est3", "est3_half_width"]);
    limit.push(cells(&stats.limit_est3).to_vec());

    for (name, series) in [("est1_decreasing", stats.est1()), ("est2_decreasing", stats.est2())] {
        report.verdicts.push(Verdict::at_most(
            name,
            monotone_violations(&series, ZERO_FLOOR) as f64,
            0.0,
            stats.samples,
            "ladder steps that do not decrease",
        ));
    }
    let e3 = stats.est3();
    let max = e3.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = e3.iter().copied().fold(f64::INFINITY, f64::min);
    report.verdicts.push(Verdict::at_most("est3_bounded", max / min, EST3_SPREAD, stats.samples, "max over min of est3 across the ladder"));
    report.series.extend([table, limit]);
    Ok(report)
}
