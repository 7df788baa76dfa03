//! Stability in the initial datum: the change-of-variables identity
//! `∫₀^T E∫|uⁿ − u|^p dx dt = T ∫|u₀ⁿ − u₀|^p dy` for volume-preserving flows.

use std::sync::Arc;

use transport_core::field::{mollify_datum, Datum, MollifierSpec};
use transport_core::flow::{backward_flow_with, flow_convergence_stats, Direction, FlowStatsOptions, JacobianMethod};
use transport_core::linalg::{norm, Mat};
use transport_core::quadrature::{QuadratureBox, Rule};
use transport_core::transport::{TailMass, TransportSolution};

use super::{config_error, estimate_column, mc_samples, mean_tail, new_report, per_sample, Difference, LEAKAGE_FAILURE};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Series, Verdict};
use crate::LabResult;

/// Stored times `jT/8`, `j = 0..=8`, combined by the trapezoid rule.
pub const TIME_NODES: usize = 9;
/// Accepted band for the simulated-to-analytic ratio.
pub const RATIO_BAND: (f64, f64) = (0.9, 1.1);
/// Midpoint nodes per axis for the analytic right-hand side.
const REFERENCE_NODES: usize = 200;

/// Compares the simulated left side with the analytic right side, computed
/// by direct quadrature, at each mollification level of the datum. Also
/// reports `∫₀^T E∫|∇uⁿ − ∇u|^p` against `T·C_est·∫|∇u₀ⁿ − ∇u₀|^p`.
pub fn run_ic_stability(cfg: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let n = cfg.steps;
    if n % (TIME_NODES - 1) != 0 {
        return config_error(format!("ic-stability needs steps divisible by {}, got {n}", TIME_NODES - 1));
    }
    let drift = cfg.drift()?;
    let u0 = cfg.datum()?;
    let source = cfg.source()?;
    let sol = TransportSolution::new(u0.clone(), drift.clone(), source)?;
    let bx = cfg.quadrature_box(6.0, 32)?;
    let samples = mc_samples(cfg);
    let p = cfg.p;
    let t_end = cfg.horizon;
    let data: Vec<Datum> = cfg
        .mollify_ladder
        .iter()
        .map(|e| Ok(Arc::new(mollify_datum(u0.clone(), MollifierSpec::new(*e))?) as Datum))
        .collect::<LabResult<_>>()?;
    let levels = data.len();
    let method = JacobianMethod::default_for(drift.as_ref());
    let stride = n / (TIME_NODES - 1);
    let tau = t_end / (TIME_NODES - 1) as f64;
    let mut report = new_report(cfg);

    // Per sample: value then gradient integrals per level.
    let rows = per_sample(samples, |s| {
        let path = sol.path(s);
        let mut out = vec![0.0; 2 * levels];
        let mut x = [0.0; 2];
        let mut g = [0.0; 2];
        let mut gn = [0.0; 2];
        let mut diff = [0.0; 2];
        for i in 0..bx.len() {
            let w = bx.node(i, &mut x);
            for j in 0..TIME_NODES {
                let weight = w * if j == 0 || j == TIME_NODES - 1 { 0.5 * tau } else { tau };
                let (y, jac) = if j == 0 {
                    (x.to_vec(), Mat::identity(2))
                } else {
                    let r = backward_flow_with(drift.as_ref(), &path, 0, j * stride, &x, method)?;
                    (r.terminal, r.jacobian)
                };
                let v = u0.value(&y);
                u0.gradient_into(&y, &mut g);
                for (k, dk) in data.iter().enumerate() {
                    out[k] += weight * (dk.value(&y) - v).abs().powf(p);
                    dk.gradient_into(&y, &mut gn);
                    let dg = [gn[0] - g[0], gn[1] - g[1]];
                    jac.apply_transpose(&dg, &mut diff);
                    out[levels + k] += weight * norm(&diff).powf(p);
                }
            }
        }
        Ok(out)
    })?;

    let reach = u0.effective_radius() + cfg.mollify_ladder[0];
    let reference = QuadratureBox::new(2, reach.max(1e-3), REFERENCE_NODES, Rule::Midpoint)?;
    let mut rhs = vec![0.0; levels];
    let mut grad_rhs = vec![0.0; levels];
    let mut x = [0.0; 2];
    for i in 0..reference.len() {
        let w = reference.node(i, &mut x);
        let (v, g) = (u0.value(&x), u0.gradient(&x));
        for (k, dk) in data.iter().enumerate() {
            rhs[k] += t_end * w * (dk.value(&x) - v).abs().powf(p);
            let gk = dk.gradient(&x);
            grad_rhs[k] += t_end * w * norm(&[gk[0] - g[0], gk[1] - g[1]]).powf(p);
        }
    }

    let mut opts = FlowStatsOptions::new(2, t_end, p, cfg.flow_samples());
    opts.direction = Direction::Backward;
    let c_est = flow_convergence_stats(&[], drift.as_ref(), source, &opts)?.limit_est3;

    let mut table = Series::new(
        "identity",
        &[
            "epsilon",
            "lhs",
            "lhs_half_width",
            "rhs",
            "ratio",
            "gradient_lhs",
            "gradient_lhs_half_width",
            "gradient_rhs",
            "gradient_bound",
        ],
    );
    let mut worst_leak = 0.0f64;
    for k in 0..levels {
        let lhs = estimate_column(&rows, k);
        let glhs = estimate_column(&rows, levels + k);
        let ratio = lhs.mean / rhs[k];
        table.push(vec![
            cfg.mollify_ladder[k],
            lhs.mean,
            lhs.half_width,
            rhs[k],
            ratio,
            glhs.mean,
            glhs.half_width,
            grad_rhs[k],
            c_est.upper() * grad_rhs[k],
        ]);
        let name = format!("identity_ratio_{k}");
        if rhs[k] == 0.0 {
            report.verdicts.push(Verdict::at_most(&name, lhs.mean, 0.0, samples, "identical data: both sides must vanish"));
            continue;
        }
        report.verdicts.push(Verdict::within(
            &name,
            ratio,
            RATIO_BAND.0,
            RATIO_BAND.1,
            samples,
            format!("epsilon {}: simulated over analytic", cfg.mollify_ladder[k]),
        ));
        let diff = Difference::new(data[k].clone(), u0.clone());
        let tails = TailMass::new(&diff, &[p])?;
        for j in 1..TIME_NODES {
            worst_leak = worst_leak.max(mean_tail(&sol, j * stride, &bx, samples, |r| tails.value_tail(0, r))?);
        }
    }
    report.verdicts.push(Verdict::at_most(
        "leakage",
        worst_leak,
        LEAKAGE_FAILURE,
        samples,
        "largest difference mass fraction possibly outside the box image",
    ));
    report.notes.push(format!("gradient bound uses C_est = {:.4e} ± {:.1e} (backward E sup |DY|^p)", c_est.mean, c_est.half_width));
    report.series.push(table);
    Ok(report)
}
