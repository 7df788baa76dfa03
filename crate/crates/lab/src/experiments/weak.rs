//! Weak-formulation residuals aggregated over the test-function catalog and
//! a step-halving ladder.

use transport_core::brownian::{PathSource, TimeGrid};
use transport_core::linalg::norm;
use transport_core::quadrature::{QuadratureBox, Rule};
use transport_core::stats::{fit_slope, Estimate, Z95};
use transport_core::transport::TransportSolution;
use transport_core::weakform::{pairing_terms, semimartingale_check, test_function_catalog, TestFunction};

use super::{column, config_error, new_report, per_sample};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Series, Verdict};
use crate::LabResult;

/// Required reduction of the aggregated Itô residual per halving.
pub const ITO_DECAY: f64 = 1.3;
/// Required order of the compensator defect in `dt`.
pub const COMPENSATOR_ORDER: f64 = 1.0;
/// Accepted band for realized over predicted quadratic variation.
pub const QV_BAND: (f64, f64) = (0.8, 1.2);
/// Bound on every residual of a test function whose support the solution
/// never reaches.
pub const CONTROL_TOLERANCE: f64 = 1e-10;

/// Least-squares slope of `log mean` against `log dt` and its jackknife
/// standard error over samples. `per_sample[s][l]` holds level `l`.
fn slope_with_error(log_dt: &[f64], per_sample: &[Vec<f64>]) -> (f64, f64) {
    let levels = log_dt.len();
    let fit = |rows: &mut dyn Iterator<Item = &Vec<f64>>, count: usize| -> f64 {
        let mut sums = vec![0.0; levels];
        for r in rows {
            for (s, v) in sums.iter_mut().zip(r) {
                *s += v;
            }
        }
        let logs: Vec<f64> = sums.iter().map(|s| (s / count as f64).ln()).collect();
        fit_slope(log_dt, &logs)
    };
    let n = per_sample.len();
    let full = fit(&mut per_sample.iter(), n);
    if n < 2 {
        return (full, 0.0);
    }
    let leave_out: Vec<f64> = (0..n)
        .map(|i| fit(&mut per_sample.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r), n - 1))
        .collect();
    let mean = leave_out.iter().sum::<f64>() / n as f64;
    let var = leave_out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (full, var.sqrt())
}

/// Itô, Stratonovich and compensator residuals at `T` for every catalog test
/// function over `levels` step halvings ending at `steps`, plus quadratic
/// variation on the coarsest level. Test functions whose support lies beyond
/// the datum's effective radius serve as zero controls.
pub fn run_weak_residual(cfg: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let levels = cfg.levels;
    let coarse_steps = cfg.steps >> (levels - 1);
    if coarse_steps < 2 || coarse_steps << (levels - 1) != cfg.steps {
        return config_error(format!("steps {} cannot be halved {} times", cfg.steps, levels - 1));
    }
    let drift = cfg.drift()?;
    let datum = cfg.datum()?;
    let base = TimeGrid::new(cfg.horizon, coarse_steps)?;
    let source = if cfg.zero_noise { PathSource::zero_noise(2, base) } else { PathSource::new(cfg.seed, 2, base) };
    let samples = cfg.samples;
    let catalog = test_function_catalog(2);
    let reach = datum.effective_radius();
    let is_control = |phi: &TestFunction| norm(phi.center()) - phi.support_radius() > reach;
    let boxes: Vec<QuadratureBox> = catalog
        .iter()
        .map(|phi| QuadratureBox::centered(phi.center().to_vec(), phi.support_radius(), cfg.test_nodes, Rule::Midpoint))
        .collect::<Result<_, _>>()?;
    let mut report = new_report(cfg);

    let mut table = Series::new(
        "residuals",
        &[
            "level",
            "dt",
            "test_function",
            "control",
            "ito",
            "ito_half_width",
            "stratonovich",
            "stratonovich_half_width",
            "compensator",
            "compensator_defect",
            "compensator_defect_half_width",
        ],
    );
    let mut aggregate = Series::new("aggregate", &["level", "dt", "ito", "ito_ratio", "compensator_defect", "defect_ratio"]);
    let mut ito_levels = Vec::new();
    let mut defect_levels = Vec::new();
    // Per sample, per level: aggregated |defect| over non-control functions.
    let mut defect_per_sample = vec![vec![0.0; levels]; samples];
    let mut control_max = 0.0f64;
    let mut qv = Series::new("quadratic_variation", &["test_function", "realized", "predicted", "ratio", "max_jump_ratio"]);
    let mut qv_checks = Vec::new();
    let mut log_dt = Vec::new();

    for level in 0..levels {
        let sol = TransportSolution::new(datum.clone(), drift.clone(), source.at_level(level as u32))?;
        let n = sol.grid().steps();
        let dt = sol.grid().dt();
        log_dt.push(dt.ln());
        let run = if level == 0 { samples.max(cfg.qv_samples) } else { samples };
        let (mut ito_sum, mut defect_sum) = (0.0, 0.0);
        for (f, (phi, bx)) in catalog.iter().zip(&boxes).enumerate() {
            let terms = per_sample(run, |s| Ok(pairing_terms(&sol, phi, &sol.path(s), n, bx)?))?;
            let rows: Vec<Vec<f64>> = terms[..samples]
                .iter()
                .map(|t| {
                    let r = t.residuals();
                    vec![r.ito.abs(), r.stratonovich.abs(), r.compensator.abs(), r.compensator_defect.abs()]
                })
                .collect();
            let [ito, strat, comp, defect] = [0, 1, 2, 3].map(|k| Estimate::from_samples(&column(&rows, k)));
            let control = is_control(phi);
            table.push(vec![
                level as f64,
                dt,
                f as f64,
                if control { 1.0 } else { 0.0 },
                ito.mean,
                ito.half_width,
                strat.mean,
                strat.half_width,
                comp.mean,
                defect.mean,
                defect.half_width,
            ]);
            if control {
                control_max = rows.iter().flat_map(|r| [r[0], r[1], r[2]]).fold(control_max, f64::max);
                continue;
            }
            ito_sum += ito.mean;
            defect_sum += defect.mean;
            for (s, r) in rows.iter().enumerate() {
                defect_per_sample[s][level] += r[3];
            }
            if level == 0 {
                let ensemble: Vec<_> = terms.iter().map(|t| t.series()).collect();
                let rep = semimartingale_check(&ensemble)?;
                qv.push(vec![f as f64, rep.realized_qv.mean, rep.predicted_qv.mean, rep.qv_ratio, rep.max_jump_ratio]);
                qv_checks.push((f, rep));
            }
        }
        let (ito_ratio, defect_ratio) = match (ito_levels.last(), defect_levels.last()) {
            (Some(a), Some(b)) => (a / ito_sum, b / defect_sum),
            _ => (f64::NAN, f64::NAN),
        };
        aggregate.push(vec![level as f64, dt, ito_sum, ito_ratio, defect_sum, defect_ratio]);
        ito_levels.push(ito_sum);
        defect_levels.push(defect_sum);
    }

    if ito_levels.iter().chain(&defect_levels).all(|v| *v == 0.0) {
        report.verdicts.push(Verdict::holds("ito_decay", true, samples, "residuals vanish identically"));
        report.verdicts.push(Verdict::holds("compensator_order", true, samples, "defects vanish identically"));
    } else {
        let decay = ito_levels.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
        report.verdicts.push(Verdict::at_least(
            "ito_decay",
            decay,
            ITO_DECAY,
            samples,
            "smallest per-halving ratio of the catalog-summed mean |R_Itô(T)|",
        ));
        let (slope, se) = slope_with_error(&log_dt, &defect_per_sample);
        report.verdicts.push(Verdict::at_least(
            "compensator_order",
            slope,
            COMPENSATOR_ORDER - Z95 * se,
            samples,
            format!("log-log slope of the summed defect; jackknife standard error {se:.3e}"),
        ));
        let mut order = Series::new("order", &["defect_slope", "defect_slope_standard_error"]);
        order.push(vec![slope, se]);
        report.series.push(order);
    }
    for (f, rep) in &qv_checks {
        let name = format!("qv_ratio_{f}");
        if rep.realized_qv.mean == 0.0 && rep.predicted_qv.mean == 0.0 {
            report.verdicts.push(Verdict::holds(&name, true, rep.samples, "pairing is constant"));
            continue;
        }
        report.verdicts.push(Verdict::within(
            &name,
            rep.qv_ratio,
            QV_BAND.0,
            QV_BAND.1,
            rep.samples,
            format!("test function {}", catalog[*f].label()),
        ));
    }
    report.verdicts.push(Verdict::at_most(
        "disjoint_control",
        control_max,
        CONTROL_TOLERANCE,
        samples,
        format!("largest |residual| over test functions beyond radius {reach:.3}"),
    ));
    report.series.extend([table, aggregate, qv]);
    Ok(report)
}
