//! Agreement of mollified-drift solutions with the rough-drift solution on
//! coupled paths.

use transport_core::field::CutoffSpec;
use transport_core::flow::{flow_convergence_stats, Direction, FlowStatsOptions, FlowStats};
use transport_core::stats::{spearman, Estimate};
use transport_core::transport::{TailMass, TransportSolution};

use super::{drift_ladder, estimate_column, mc_samples, mean_tail, monotone_violations, new_report, per_sample};
use crate::config::ExperimentConfig;
use crate::report::{cells, ExperimentReport, Series, Verdict};
use crate::LabResult;

/// Rank correlation demanded between distances and flow statistics.
pub const CO_MONOTONE: f64 = 1.0 - 1e-12;

/// `tol = max(2·floor, 3·half-width of the last distance)`.
pub fn uniqueness_tolerance(floor: &Estimate, last: &Estimate) -> f64 {
    (2.0 * floor.mean).max(3.0 * last.half_width)
}

/// Distances `E ∫_box |u^{δ_n}(T) − u(T)|^p` down the ladder. The floor is
/// the rough solution's own discretization error `E ∫_box |u_n − u_{2n}|^p`
/// on a refined coupled path.
pub fn run_uniqueness_agreement(cfg: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let drift = cfg.drift()?;
    let datum = cfg.datum()?;
    let source = cfg.source()?;
    let fine = source.at_level(1);
    let n = cfg.steps;
    let bx = cfg.quadrature_box(4.0, 24)?;
    let samples = mc_samples(cfg);
    let p = cfg.p;
    let ladder = drift_ladder(&drift, &cfg.mollify_ladder)?;
    let levels = ladder.len();
    let sol = TransportSolution::new(datum.clone(), drift.clone(), source)?;
    let sol_fine = TransportSolution::new(datum.clone(), drift.clone(), fine)?;
    let sols: Vec<TransportSolution> = ladder
        .iter()
        .map(|b| TransportSolution::new(datum.clone(), b.clone(), source))
        .collect::<Result<_, _>>()?;
    let cutoffs: Vec<CutoffSpec> = cfg.cutoff_ladder.iter().map(|r| CutoffSpec::new(*r)).collect::<Result<_, _>>()?;
    let mut report = new_report(cfg);

    // Per sample: distances per level, floor, localized distances per cutoff.
    let rows = per_sample(samples, |s| {
        let path = sol.path(s);
        let fine_path = sol_fine.path(s);
        let mut out = vec![0.0; levels + 1 + cutoffs.len()];
        let mut x = [0.0; 2];
        for i in 0..bx.len() {
            let w = bx.node(i, &mut x);
            let u = sol.value_on_path(&path, n, &x)?;
            let mut last = 0.0;
            for (k, sk) in sols.iter().enumerate() {
                last = (sk.value_on_path(&path, n, &x)? - u).abs().powf(p);
                out[k] += w * last;
            }
            out[levels] += w * (sol_fine.value_on_path(&fine_path, 2 * n, &x)? - u).abs().powf(p);
            for (c, eta) in cutoffs.iter().enumerate() {
                out[levels + 1 + c] += w * eta.value(&x) * last;
            }
        }
        Ok(out)
    })?;
    let dists: Vec<Estimate> = (0..levels).map(|k| estimate_column(&rows, k)).collect();
    let floor = estimate_column(&rows, levels);
    let tol = uniqueness_tolerance(&floor, dists.last().expect("nonempty ladder"));

    let mut opts = FlowStatsOptions::new(2, cfg.horizon, p, cfg.flow_samples());
    opts.direction = Direction::Backward;
    let refs: Vec<&dyn transport_core::field::VectorField> = ladder.iter().map(|b| b.as_ref()).collect();
    let stats: FlowStats = flow_convergence_stats(&refs, drift.as_ref(), source, &opts)?;

    let mut table = Series::new(
        "distances",
        &["delta", "distance", "distance_half_width", "est1", "est1_half_width", "est2", "est2_half_width"],
    );
    for (k, delta) in cfg.mollify_ladder.iter().enumerate() {
        let l = &stats.levels[k];
        let mut row = vec![*delta];
        row.extend(cells(&dists[k]));
        row.extend(cells(&l.est1));
        row.extend(cells(&l.est2));
        table.push(row);
    }
    let mut floor_series = Series::new("floor", &["floor", "floor_half_width", "tolerance"]);
    floor_series.push(vec![floor.mean, floor.half_width, tol]);
    let mut local = Series::new("localized", &["radius", "distance", "distance_half_width"]);
    for (c, r) in cfg.cutoff_ladder.iter().enumerate() {
        let e = estimate_column(&rows, levels + 1 + c);
        local.push(vec![*r, e.mean, e.half_width]);
    }

    let means: Vec<f64> = dists.iter().map(|e| e.mean).collect();
    let last = *means.last().expect("nonempty ladder");
    report.verdicts.push(Verdict::at_most(
        "monotone",
        monotone_violations(&means, tol) as f64,
        0.0,
        samples,
        "ladder steps that neither decrease nor end within tolerance",
    ));
    report.verdicts.push(Verdict::at_most(
        "final_within_tolerance",
        last,
        tol,
        samples,
        format!("tolerance max(2·floor, 3·CI) with floor {:.4e} ± {:.1e}", floor.mean, floor.half_width),
    ));
    let at_floor = means.iter().all(|m| *m <= tol);
    for (name, est) in [("co_monotone_est1", stats.est1()), ("co_monotone_est2", stats.est2())] {
        if at_floor || levels < 2 {
            report.verdicts.push(Verdict::holds(name, true, stats.samples, "distances at the floor; ranks carry no information"));
        } else {
            report.verdicts.push(Verdict::at_least(
                name,
                spearman(&means, &est),
                CO_MONOTONE,
                stats.samples,
                "Spearman correlation between distances and flow statistics",
            ));
        }
    }
    let reach = datum.effective_radius();
    if reach.is_finite() && reach > 0.0 {
        let tails = TailMass::new(datum.as_ref(), &[p])?;
        let leak = mean_tail(&sol, n, &bx, samples, |r| tails.value_tail(0, r))?;
        if leak > transport_core::transport::LEAKAGE_WARNING {
            report.warnings.push(format!("datum mass fraction {leak:.3e} may lie outside the box image"));
        }
    }
    report.series.extend([table, floor_series, local]);
    Ok(report)
}
