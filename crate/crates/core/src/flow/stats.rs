//! Monte Carlo flow-convergence statistics for a drift ladder `bⁿ → b`.

use rayon::prelude::*;

use super::{march, Direction, JacobianMethod};
use crate::brownian::PathSource;
use crate::error::{config, Result};
use crate::field::VectorField;
use crate::linalg::{norm, Mat};
use crate::stats::Estimate;
use crate::MAX_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowStatsOptions {
    pub p: f64,
    pub samples: usize,
    pub x_panel: Vec<Vec<f64>>,
    /// Start times. For the backward direction each entry `s` anchors the
    /// march at `T − s`, and the supremum runs over the nodes down to 0.
    pub s_panel: Vec<f64>,
    pub direction: Direction,
    /// Overrides the per-field default method.
    pub method: Option<JacobianMethod>,
}

impl FlowStatsOptions {
    pub fn new(dim: usize, horizon: f64, p: f64, samples: usize) -> Self {
        Self {
            p,
            samples,
            x_panel: default_x_panel(dim),
            s_panel: vec![0.0, horizon / 2.0],
            direction: Direction::Forward,
            method: None,
        }
    }
}

/// Statistics of one ladder level. Each estimate is the panel entry with the
/// largest mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    /// `E sup_t |Dφⁿ − Dφ|^p`
    pub est1: Estimate,
    /// `E sup_t (|φⁿ − φ| / (1+|x|))^p`
    pub est2: Estimate,
    /// `E sup_t |Dφⁿ|^p`
    pub est3: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowStats {
    pub levels: Vec<LevelStats>,
    /// `E sup_t |Dφ|^p` for the limit drift.
    pub limit_est3: Estimate,
    pub samples: usize,
    pub p: f64,
    pub direction: Direction,
}

impl FlowStats {
    pub fn est1(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.est1.mean).collect()
    }

    pub fn est2(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.est2.mean).collect()
    }

    pub fn est3(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.est3.mean).collect()
    }
}

/// Nine low-discrepancy points in `[−2, 2]^d`, none on a coordinate
/// hyperplane, followed by the far points `10·e` and `100·e` with `e` the unit
/// diagonal.
pub fn default_x_panel(dim: usize) -> Vec<Vec<f64>> {
    // Additive recurrence with the generalized golden ratio.
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=dim).map(|k| 1.0 / phi.powi(k as i32)).collect();
    let mut panel: Vec<Vec<f64>> = (0..9)
        .map(|i| alpha.iter().map(|a| -2.0 + 4.0 * (0.5 + (i as f64 + 1.0) * a).fract()).collect())
        .collect();
    let e = 1.0 / (dim as f64).sqrt();
    panel.push(vec![10.0 * e; dim]);
    panel.push(vec![100.0 * e; dim]);
    panel
}

struct Anchor {
    x: Vec<f64>,
    s: usize,
    t: usize,
}

/// Estimates for each level of `fields` against `limit`, all driven by the
/// coupled paths of `source`.
pub fn flow_convergence_stats(
    fields: &[&dyn VectorField],
    limit: &dyn VectorField,
    source: PathSource,
    options: &FlowStatsOptions,
) -> Result<FlowStats> {
    let d = limit.dim();
    if options.samples < 16 {
        return config(format!("flow statistics need at least 16 samples, got {}", options.samples));
    }
    if !(options.p >= 1.0) || !options.p.is_finite() {
        return config(format!("exponent p must be at least 1, got {}", options.p));
    }
    if fields.iter().any(|f| f.dim() != d) || source.dim != d || d > MAX_DIM {
        return config("drifts and paths must share one dimension");
    }
    if options.x_panel.is_empty() || options.s_panel.is_empty() {
        return config("x and s panels must be nonempty");
    }
    if options.x_panel.iter().any(|x| x.len() != d) {
        return config("x-panel point has wrong dimension");
    }
    let grid = source.grid();
    let n = grid.steps();
    let mut anchors = Vec::new();
    for s in &options.s_panel {
        let node = grid.index_of(*s)?;
        if node >= n {
            return config(format!("start time {s} leaves no steps"));
        }
        for x in &options.x_panel {
            let (s, t) = match options.direction {
                Direction::Forward => (node, n),
                Direction::Backward => (0, n - node),
            };
            anchors.push(Anchor { x: x.clone(), s, t });
        }
    }
    let method_for = |f: &dyn VectorField| options.method.unwrap_or_else(|| JacobianMethod::default_for(f));
    for f in fields.iter().copied().chain(std::iter::once(limit)) {
        if method_for(f) == JacobianMethod::Variational && !f.has_jacobian() {
            return config(format!("variational Jacobian requires an analytic Jacobian for {}", f.label()));
        }
    }
    let levels = fields.len();
    let p = options.p;
    let direction = options.direction;

    // Per sample: for each anchor, [limit est3, then (est1, est2, est3) per level].
    let per_anchor = 1 + 3 * levels;
    let per_sample: Vec<Vec<f64>> = (0..options.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let path = source.path(i);
            let mut out = Vec::with_capacity(anchors.len() * per_anchor);
            let mut states: Vec<[f64; MAX_DIM]> = Vec::with_capacity(n + 1);
            let mut jacs: Vec<Mat> = Vec::with_capacity(n + 1);
            for a in &anchors {
                states.clear();
                jacs.clear();
                let mut sup3 = 0.0f64;
                march(limit, &path, a.s, a.t, &a.x, direction, Some(method_for(limit)), |_, y, j| {
                    let mut buf = [0.0; MAX_DIM];
                    buf[..d].copy_from_slice(y);
                    states.push(buf);
                    let j = j.expect("jacobian requested");
                    jacs.push(*j);
                    sup3 = sup3.max(j.frobenius().powf(p));
                })?;
                out.push(sup3);
                let weight = 1.0 + norm(&a.x);
                for f in fields {
                    let (mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64);
                    let mut k = 0;
                    march(*f, &path, a.s, a.t, &a.x, direction, Some(method_for(*f)), |_, y, j| {
                        let j = j.expect("jacobian requested");
                        s1 = s1.max(j.sub(&jacs[k]).frobenius().powf(p));
                        let dy = crate::linalg::dist(y, &states[k][..d]);
                        s2 = s2.max((dy / weight).powf(p));
                        s3 = s3.max(j.frobenius().powf(p));
                        k += 1;
                    })?;
                    out.extend([s1, s2, s3]);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let column = |c: usize| -> Estimate {
        let v: Vec<f64> = per_sample.iter().map(|s| s[c]).collect();
        Estimate::from_samples(&v)
    };
    let pick = |cols: Vec<usize>| -> Estimate {
        cols.into_iter().map(column).fold(None, |best: Option<Estimate>, e| match best {
            Some(b) if b.mean >= e.mean => Some(b),
            _ => Some(e),
        })
        .expect("nonempty panel")
    };
    let anchor_cols = |offset: usize| (0..anchors.len()).map(move |a| a * per_anchor + offset).collect::<Vec<_>>();
    let level_stats = (0..levels)
        .map(|l| LevelStats {
            est1: pick(anchor_cols(1 + 3 * l)),
            est2: pick(anchor_cols(2 + 3 * l)),
            est3: pick(anchor_cols(3 + 3 * l)),
        })
        .collect();
    Ok(FlowStats {
        levels: level_stats,
        limit_est3: pick(anchor_cols(0)),
        samples: options.samples,
        p,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::TimeGrid;
    use crate::field::CatalogField;

    #[test]
    fn panel_shape() {
        for d in 1..=3 {
            let panel = default_x_panel(d);
            assert_eq!(panel.len(), 11);
            for x in &panel[..9] {
                assert!(x.iter().all(|v| v.abs() <= 2.0 && v.abs() > 1e-3));
            }
            assert!((norm(&panel[9]) - 10.0).abs() < 1e-12);
            assert!((norm(&panel[10]) - 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples() {
        let f = CatalogField::rotation();
        let src = PathSource::new(1, 2, TimeGrid::new(1.0, 16).unwrap());
        let opts = FlowStatsOptions::new(2, 1.0, 2.0, 15);
        assert!(flow_convergence_stats(&[&f], &f, src, &opts).is_err());
    }

    #[test]
    fn identical_drifts_give_zero_distance() {
        let f = CatalogField::rotation();
        let g = CatalogField::shear_holder(0.5);
        let src = PathSource::new(4, 2, TimeGrid::new(1.0, 32).unwrap());
        for direction in [Direction::Forward, Direction::Backward] {
            let mut opts = FlowStatsOptions::new(2, 1.0, 2.0, 16);
            opts.direction = direction;
            let s = flow_convergence_stats(&[&f, &f], &f, src, &opts).unwrap();
            assert!(s.est1().iter().chain(s.est2().iter()).all(|v| *v == 0.0));
            assert_eq!(s.est3()[0], s.limit_est3.mean);
            let s = flow_convergence_stats(&[&g], &g, src, &opts).unwrap();
            assert_eq!(s.est1()[0], 0.0);
            assert_eq!(s.est2()[0], 0.0);
        }
    }
}
