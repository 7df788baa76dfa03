//! Norm persistence along the characteristics solution.

use transport_core::flow::{flow_convergence_stats, Direction, FlowStatsOptions};
use transport_core::transport::{solution_norms, TransportSolution};

use super::{config_error, mc_samples, new_report, LEAKAGE_FAILURE};
use crate::config::ExperimentConfig;
use crate::report::{cells, ExperimentReport, Series, Verdict};
use crate::LabResult;

/// Relative L^p drift allowed on top of the reported leakage.
pub const LP_TOLERANCE: f64 = 0.02;

/// `‖u(t)‖_p^p` and `|u(t)|_{1,p}^p` at `t ∈ {0, T/4, T/2, T}`, checked for
/// L^p conservation and for the seminorm bound `C_est·|u₀|_{1,p}^p`, where
/// `C_est` is the forward `E sup |DX|^p` statistic of the same drift.
pub fn run_persistence(cfg: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let drift = cfg.drift()?;
    if !drift.divergence_free() {
        return config_error(format!("persistence needs a divergence-free field, got {}", drift.label()));
    }
    let n = cfg.steps;
    if n < 4 {
        return config_error("persistence needs at least 4 steps");
    }
    let source = cfg.source()?;
    let sol = TransportSolution::new(cfg.datum()?, drift.clone(), source)?;
    let bx = cfg.quadrature_box(8.0, 64)?;
    let samples = mc_samples(cfg);
    let mut report = new_report(cfg);

    let mut norms = Series::new(
        "norms",
        &["t", "lp", "lp_half_width", "lp_leakage", "seminorm", "seminorm_half_width", "seminorm_leakage"],
    );
    let mut sets = Vec::new();
    for t in [0, n / 4, n / 2, n] {
        let set = solution_norms(&sol, t, &[cfg.p], &bx, samples, true)?.remove(0);
        let sem = set.seminorm.expect("gradient requested");
        norms.push(vec![
            sol.grid().time(t),
            set.lp.estimate.mean,
            set.lp.estimate.half_width,
            set.lp.leakage,
            sem.estimate.mean,
            sem.estimate.half_width,
            sem.leakage,
        ]);
        for (what, w) in [("L^p", set.lp.warning), ("seminorm", sem.warning)] {
            if let Some(w) = w {
                report.warnings.push(format!("{what} at step {t}: leakage {:.3e} above {:.0e}", w.leakage, w.threshold));
            }
        }
        sets.push((set.lp, sem));
    }

    let mut opts = FlowStatsOptions::new(2, cfg.horizon, cfg.p, cfg.flow_samples());
    opts.direction = Direction::Forward;
    let stats = flow_convergence_stats(&[], drift.as_ref(), source, &opts)?;
    let c_est = stats.limit_est3;
    let mut constant = Series::new("constant", &["limit_est3", "limit_est3_half_width"]);
    constant.push(cells(&c_est).to_vec());

    let (lp0, sem0) = (sets[0].0.estimate.mean, sets[0].1.estimate.mean);
    let lp_excess = sets
        .iter()
        .map(|(lp, _)| {
            let dev = if lp0 > 0.0 { (lp.estimate.mean / lp0 - 1.0).abs() } else { lp.estimate.mean.abs() };
            dev - lp.leakage
        })
        .fold(f64::NEG_INFINITY, f64::max);
    report.verdicts.push(Verdict::at_most(
        "lp_conservation",
        lp_excess,
        LP_TOLERANCE,
        samples,
        "max over stored times of |‖u(t)‖_p^p/‖u₀‖_p^p − 1| minus leakage",
    ));
    let growth = sets
        .iter()
        .map(|(_, s)| {
            let lower = s.estimate.lower().max(0.0);
            if sem0 > 0.0 {
                lower / sem0
            } else if lower > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    report.verdicts.push(Verdict::at_most(
        "seminorm_bound",
        growth,
        c_est.upper(),
        samples,
        format!("CI lower end of |u(t)|^p / |u₀|^p against the upper end of C_est = {:.4e} ({} flow samples)", c_est.mean, c_est.samples),
    ));
    let leak = sets.iter().map(|(a, b)| a.leakage.max(b.leakage)).fold(0.0, f64::max);
    report.verdicts.push(Verdict::at_most("leakage", leak, LEAKAGE_FAILURE, samples, "largest mass fraction possibly outside the box"));
    report.series.extend([norms, constant]);
    Ok(report)
}
