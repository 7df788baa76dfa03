//! Local stability in the drift: `uⁿ → u` on a compact box as `bⁿ → b`.

use transport_core::field::{Smoothness, VectorField};
use transport_core::flow::{flow_convergence_stats, Direction, FlowStatsOptions};
use transport_core::linalg::{dist, norm};
use transport_core::quadrature::{QuadratureBox, Rule};
use transport_core::stats::{spearman, Estimate};
use transport_core::transport::TransportSolution;

use super::{config_error, drift_ladder, estimate_column, mc_samples, monotone_violations, new_report, per_sample};
use super::uniqueness::CO_MONOTONE;
use crate::config::ExperimentConfig;
use crate::report::{cells, ExperimentReport, Series, Verdict};
use crate::LabResult;

/// Terminal distance allowed relative to the flow-statistics prediction.
pub const SCALE_FACTOR: f64 = 3.0;
/// Distances below this fraction of `∫_K |u₀|^p` count as zero.
const ZERO_FLOOR: f64 = 1e-12;
/// Midpoint nodes per axis for the datum integral in the prediction.
const REFERENCE_NODES: usize = 200;

/// `E ∫_K |uⁿ − u|^p` and `E ∫_K |∇uⁿ − ∇u|^p` for `bⁿ = b * ρ_{δₙ}`, next to
/// the backward `est1`/`est2` statistics of the same ladder. The predicted
/// terminal scale is `est2 · ∫ (1+|y|)^p |∇u₀(y)|^p dy`.
pub fn run_drift_stability(cfg: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let u0 = cfg.datum()?;
    if u0.smoothness() != Smoothness::CompactlySmooth {
        return config_error(format!("drift stability needs a compactly supported smooth datum, got {}", u0.label()));
    }
    let drift = cfg.drift()?;
    let source = cfg.source()?;
    let n = cfg.steps;
    let bx = cfg.quadrature_box(2.0, 16)?;
    let samples = mc_samples(cfg);
    let p = cfg.p;
    let ladder = drift_ladder(&drift, &cfg.mollify_ladder)?;
    let levels = ladder.len();
    let sol = TransportSolution::new(u0.clone(), drift.clone(), source)?;
    let sols: Vec<TransportSolution> = ladder
        .iter()
        .map(|b| TransportSolution::new(u0.clone(), b.clone(), source))
        .collect::<Result<_, _>>()?;
    let mut report = new_report(cfg);

    let rows = per_sample(samples, |s| {
        let path = sol.path(s);
        let mut out = vec![0.0; 2 * levels];
        let mut x = [0.0; 2];
        for i in 0..bx.len() {
            let w = bx.node(i, &mut x);
            let (u, g) = sol.value_and_gradient_on_path(&path, n, &x)?;
            for (k, sk) in sols.iter().enumerate() {
                let (uk, gk) = sk.value_and_gradient_on_path(&path, n, &x)?;
                out[k] += w * (uk - u).abs().powf(p);
                out[levels + k] += w * dist(&gk, &g).powf(p);
            }
        }
        Ok(out)
    })?;
    let values: Vec<Estimate> = (0..levels).map(|k| estimate_column(&rows, k)).collect();
    let grads: Vec<Estimate> = (0..levels).map(|k| estimate_column(&rows, levels + k)).collect();

    let mut opts = FlowStatsOptions::new(2, cfg.horizon, p, cfg.flow_samples());
    opts.direction = Direction::Backward;
    let refs: Vec<&dyn VectorField> = ladder.iter().map(|b| b.as_ref()).collect();
    let stats = flow_convergence_stats(&refs, drift.as_ref(), source, &opts)?;

    let reach = u0.effective_radius();
    let reference = QuadratureBox::new(2, reach.max(1e-3), REFERENCE_NODES, Rule::Midpoint)?;
    let (mut weighted, mut mass) = (0.0, 0.0);
    let mut y = [0.0; 2];
    for i in 0..reference.len() {
        let w = reference.node(i, &mut y);
        weighted += w * (1.0 + norm(&y)).powf(p) * norm(&u0.gradient(&y)).powf(p);
        if bx.contains_ball(&y, 0.0) {
            mass += w * u0.value(&y).abs().powf(p);
        }
    }
    let predicted = stats.levels[levels - 1].est2.mean * weighted;

    let mut table = Series::new(
        "distances",
        &[
            "delta",
            "value",
            "value_half_width",
            "gradient",
            "gradient_half_width",
            "est1",
            "est1_half_width",
            "est2",
            "est2_half_width",
        ],
    );
    for (k, delta) in cfg.mollify_ladder.iter().enumerate() {
        let mut row = vec![*delta];
        row.extend(cells(&values[k]));
        row.extend(cells(&grads[k]));
        row.extend(cells(&stats.levels[k].est1));
        row.extend(cells(&stats.levels[k].est2));
        table.push(row);
    }
    let mut scale = Series::new("prediction", &["est2_final", "weighted_gradient_integral", "predicted"]);
    scale.push(vec![stats.levels[levels - 1].est2.mean, weighted, predicted]);

    let floor = ZERO_FLOOR * mass;
    let v: Vec<f64> = values.iter().map(|e| e.mean).collect();
    let g: Vec<f64> = grads.iter().map(|e| e.mean).collect();
    for (name, series) in [("value_decreasing", &v), ("gradient_decreasing", &g)] {
        report.verdicts.push(Verdict::at_most(
            name,
            monotone_violations(series, floor) as f64,
            0.0,
            samples,
            format!("ladder steps that neither decrease nor sit below {floor:.1e}"),
        ));
    }
    for (name, series, est) in [("co_monotone_value_est2", &v, stats.est2()), ("co_monotone_gradient_est1", &g, stats.est1())] {
        if series.iter().all(|d| *d <= floor) || levels < 2 {
            report.verdicts.push(Verdict::holds(name, true, stats.samples, "distances vanish; ranks carry no information"));
        } else {
            report.verdicts.push(Verdict::at_least(
                name,
                spearman(series, &est),
                CO_MONOTONE,
                stats.samples,
                "Spearman correlation with the flow statistics",
            ));
        }
    }
    let last = v[levels - 1];
    if last <= floor {
        report.verdicts.push(Verdict::at_most("terminal_scale", last, floor, samples, "distances vanish"));
    } else {
        report.verdicts.push(Verdict::at_most(
            "terminal_scale",
            last,
            SCALE_FACTOR * predicted,
            samples,
            format!("terminal distance against {SCALE_FACTOR}× the predicted scale {predicted:.4e}"),
        ));
    }
    report.series.extend([table, scale]);
    Ok(report)
}
