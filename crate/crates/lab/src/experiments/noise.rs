//! The same solver with and without noise on regions closing in on the
//! singular line `y = 0` of the shear field.

use transport_core::brownian::PathSource;
use transport_core::field::FieldKind;
use transport_core::linalg::norm;
use transport_core::quadrature::gauss_legendre;
use transport_core::stats::Estimate;
use transport_core::transport::TransportSolution;

use super::{column, config_error, new_report, per_sample};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Series, Verdict};
use crate::LabResult;

/// Gauss–Legendre nodes per y-panel.
const PANEL_NODES: usize = 12;
/// Required deterministic growth per level.
pub const GROWTH_FACTOR: f64 = 2.0;
/// Allowed relative spread of a bounded series.
pub const VARIATION_TOLERANCE: f64 = 0.2;
/// Agreement between the deterministic arm and the closed-form gradient.
pub const ORACLE_TOLERANCE: f64 = 1e-4;

struct Node {
    x: [f64; 2],
    w: f64,
    region: usize,
}

/// Nodes on `[−a, a] × ±[a/r^{L}, a]`. Region 0 is `|y| ≥ a/r`; region `k`
/// is `a/r^{k+1} ≤ |y| < a/r^k`. Level `k` integrates regions `0..=k`.
fn nodes(a: f64, x_nodes: usize, ratio: f64, levels: usize) -> Vec<Node> {
    let (gx, wx) = gauss_legendre(x_nodes);
    let (gy, wy) = gauss_legendre(PANEL_NODES);
    let mut out = Vec::new();
    for region in 0..levels {
        let hi = a / ratio.powi(region as i32);
        let lo = hi / ratio;
        for (yi, wyi) in gy.iter().zip(&wy) {
            let y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * yi;
            let w_y = 0.5 * (hi - lo) * wyi;
            for sign in [1.0, -1.0] {
                for (xi, wxi) in gx.iter().zip(&wx) {
                    out.push(Node { x: [a * xi, sign * y], w: a * wxi * w_y, region });
                }
            }
        }
    }
    out
}

/// Cumulative `∫_{K_k} |∇u|^p` for each level `k`.
fn cumulative(per_region: &[f64]) -> Vec<f64> {
    per_region
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

fn relative_spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        (max - min) / min
    }
}

/// `E ∫_{K_k} |∇u(T)|^p` on nested regions `K_k` toward `y = 0`, once with
/// zero noise and once with Brownian noise, on the same solver.
pub fn run_noise_regularization_demo(cfg: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let FieldKind::ShearHolder { theta, scale } = cfg.drift_kind()? else {
        return config_error(format!("noise demo needs the shear-holder field, got `{}`", cfg.field));
    };
    let p = cfg.p;
    let lipschitz = theta >= 1.0;
    if !lipschitz && p * (1.0 - theta) <= 1.0 {
        return config_error(format!("noise demo needs p(1 − θ) > 1, got p = {p}, θ = {theta}"));
    }
    let drift = cfg.drift()?;
    let datum = cfg.datum()?;
    let grid = cfg.grid()?;
    let n = grid.steps();
    let t_end = cfg.horizon;
    let a = cfg.box_half_width.unwrap_or(1.0);
    let levels = cfg.levels;
    let ratio = cfg.level_ratio;
    let nodes = nodes(a, cfg.box_nodes.unwrap_or(16), ratio, levels);
    let mut report = new_report(cfg);
    if cfg.zero_noise {
        report.notes.push("zero_noise is ignored: this experiment always runs both arms".into());
    }

    let arm = |source: PathSource, samples: usize| -> LabResult<Vec<Vec<f64>>> {
        let sol = TransportSolution::new(datum.clone(), drift.clone(), source)?;
        per_sample(samples, |s| {
            let path = sol.path(s);
            let mut regions = vec![0.0; levels];
            for node in &nodes {
                let (_, g) = sol.value_and_gradient_on_path(&path, n, &node.x)?;
                regions[node.region] += node.w * norm(&g).powf(p);
            }
            Ok(cumulative(&regions))
        })
    };
    let det = arm(PathSource::zero_noise(2, grid), 1)?.remove(0);
    let stoch_rows = arm(PathSource::new(cfg.seed, 2, grid), cfg.samples)?;
    let stoch: Vec<Estimate> = (0..levels).map(|k| Estimate::from_samples(&column(&stoch_rows, k))).collect();

    // Closed form without noise: Y = (x − T·b₁(y), y), ∂_y Y₁ = −T·s·θ|y|^{θ−1}.
    let mut oracle_regions = vec![0.0; levels];
    for node in &nodes {
        let [x, y] = node.x;
        let y0 = [x - t_end * scale * y.signum() * y.abs().powf(theta), y];
        let g0 = datum.gradient(&y0);
        let g = [g0[0], g0[1] - t_end * scale * theta * y.abs().powf(theta - 1.0) * g0[0]];
        oracle_regions[node.region] += node.w * norm(&g).powf(p);
    }
    let oracle = cumulative(&oracle_regions);
    // ∫_{K_k} (T s θ)^p |y|^{(θ−1)p}, the singular part of the oracle.
    let q = (theta - 1.0) * p;
    let c = (t_end * scale.abs() * theta).powf(p) * 2.0 * (2.0 * a);
    let analytic: Vec<f64> = (0..levels)
        .map(|k| {
            let lo = a / ratio.powi(k as i32 + 1);
            if (q + 1.0).abs() < 1e-12 {
                c * (a / lo).ln()
            } else {
                c * (a.powf(q + 1.0) - lo.powf(q + 1.0)) / (q + 1.0)
            }
        })
        .collect();

    let mut table = Series::new(
        "seminorm",
        &["level", "y_min", "deterministic", "oracle", "analytic_singular_part", "stochastic", "stochastic_half_width"],
    );
    for k in 0..levels {
        table.push(vec![
            k as f64,
            a / ratio.powi(k as i32 + 1),
            det[k],
            oracle[k],
            analytic[k],
            stoch[k].mean,
            stoch[k].half_width,
        ]);
    }
    report.series.push(table);

    let oracle_gap = det.iter().zip(&oracle).map(|(d, o)| (d / o - 1.0).abs()).fold(0.0, f64::max);
    report.verdicts.push(Verdict::at_most(
        "deterministic_matches_oracle",
        oracle_gap,
        ORACLE_TOLERANCE,
        1,
        "relative gap between the zero-noise solver and the closed-form gradient",
    ));
    if lipschitz {
        report.verdicts.push(Verdict::at_most(
            "deterministic_bounded",
            relative_spread(&det),
            VARIATION_TOLERANCE,
            1,
            "Lipschitz control: relative spread across levels",
        ));
    } else {
        let growth = det.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
        report.verdicts.push(Verdict::at_least(
            "deterministic_growth",
            growth,
            GROWTH_FACTOR,
            1,
            "smallest ratio between consecutive levels",
        ));
    }
    let means: Vec<f64> = stoch.iter().map(|e| e.mean).collect();
    report.verdicts.push(Verdict::at_most(
        "stochastic_variation",
        relative_spread(&means),
        VARIATION_TOLERANCE,
        cfg.samples,
        "(max − min) / min of the stochastic means across levels",
    ));
    Ok(report)
}
