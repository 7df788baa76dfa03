//! The characteristics solution `u(t, x) = u₀(Y_{0,t}(x))`, its gradient and
//! box-truncated Monte Carlo norms.

use rayon::prelude::*;

use crate::brownian::{BrownianPath, PathSource, TimeGrid};
use crate::error::{config, Result};
use crate::field::{Datum, Drift};
use crate::flow::{march, Direction, JacobianMethod};
use crate::linalg::{dist, norm};
use crate::quadrature::{QuadratureBox, Rule};
use crate::stats::Estimate;
use crate::MAX_DIM;

/// Leakage above which a norm carries a [`TruncationWarning`].
pub const LEAKAGE_WARNING: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct TransportSolution {
    datum: Datum,
    drift: Drift,
    source: PathSource,
    method: JacobianMethod,
}

impl TransportSolution {
    pub fn new(datum: Datum, drift: Drift, source: PathSource) -> Result<Self> {
        let d = drift.dim();
        if datum.dim() != d || source.dim != d {
            return config(format!(
                "datum ({}), drift ({d}) and paths ({}) must share one dimension",
                datum.dim(),
                source.dim
            ));
        }
        let method = JacobianMethod::default_for(drift.as_ref());
        Ok(Self { datum, drift, source, method })
    }

    pub fn with_method(mut self, method: JacobianMethod) -> Result<Self> {
        if method == JacobianMethod::Variational && !self.drift.has_jacobian() {
            return config(format!("variational Jacobian requires an analytic Jacobian for {}", self.drift.label()));
        }
        self.method = method;
        Ok(self)
    }

    pub fn datum(&self) -> &Datum {
        &self.datum
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn source(&self) -> PathSource {
        self.source
    }

    pub fn method(&self) -> JacobianMethod {
        self.method
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn grid(&self) -> TimeGrid {
        self.source.grid()
    }

    pub fn path(&self, sample_index: u64) -> BrownianPath {
        self.source.path(sample_index)
    }

    fn check(&self, path: &BrownianPath, t_index: usize, x: &[f64]) -> Result<()> {
        if t_index > path.grid().steps() {
            return config(format!("time index {t_index} beyond {} steps", path.grid().steps()));
        }
        if x.len() != self.dim() || path.dim() != self.dim() {
            return config("point or path has wrong dimension");
        }
        Ok(())
    }

    /// `Y_{0,t}(x)` on `path`.
    pub fn characteristic(&self, path: &BrownianPath, t_index: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check(path, t_index, x)?;
        let d = self.dim();
        let (y, _) = march(self.drift.as_ref(), path, 0, t_index, x, Direction::Backward, None, |_, _, _| {})?;
        Ok(y[..d].to_vec())
    }

    /// `u(t, x)` on `path`.
    pub fn value_on_path(&self, path: &BrownianPath, t_index: usize, x: &[f64]) -> Result<f64> {
        if t_index == 0 {
            self.check(path, t_index, x)?;
            return Ok(self.datum.value(x));
        }
        Ok(self.datum.value(&self.characteristic(path, t_index, x)?))
    }

    /// `(u(t, x), ∇u(t, x))` on `path`, with `∇u = DY^T ∇u₀(Y)`.
    pub fn value_and_gradient_on_path(&self, path: &BrownianPath, t_index: usize, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(path, t_index, x)?;
        let d = self.dim();
        if t_index == 0 {
            return Ok((self.datum.value(x), self.datum.gradient(x)));
        }
        let (y, j) = march(self.drift.as_ref(), path, 0, t_index, x, Direction::Backward, Some(self.method), |_, _, _| {})?;
        let mut g0 = [0.0; MAX_DIM];
        self.datum.gradient_into(&y[..d], &mut g0[..d]);
        let mut g = vec![0.0; d];
        j.apply_transpose(&g0[..d], &mut g);
        Ok((self.datum.value(&y[..d]), g))
    }
}

/// `u(t, x)` for sample `sample_index`.
pub fn solution_value(sol: &TransportSolution, t_index: usize, x: &[f64], sample_index: u64) -> Result<f64> {
    sol.value_on_path(&sol.path(sample_index), t_index, x)
}

/// `∇u(t, x)` for sample `sample_index`.
pub fn solution_gradient(sol: &TransportSolution, t_index: usize, x: &[f64], sample_index: u64) -> Result<Vec<f64>> {
    Ok(sol.value_and_gradient_on_path(&sol.path(sample_index), t_index, x)?.1)
}

/// Default box: half-width `6 (r + √T)` with `r` the datum's effective
/// radius, 64 midpoint nodes per axis.
pub fn default_box(sol: &TransportSolution) -> Result<QuadratureBox> {
    let r = sol.datum.effective_radius();
    if !r.is_finite() {
        return config("datum has no finite effective radius; give the box explicitly");
    }
    QuadratureBox::new(sol.dim(), 6.0 * (r + sol.grid().horizon().sqrt()), 64, Rule::Midpoint)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    pub leakage: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Monte Carlo estimate of the box integral.
    pub estimate: Estimate,
    /// Largest per-sample fraction of the datum mass possibly outside `Y(box)`.
    pub leakage: f64,
    pub warning: Option<TruncationWarning>,
}

impl NormEstimate {
    fn new(estimate: Estimate, leakage: f64) -> Self {
        let warning = (leakage > LEAKAGE_WARNING).then_some(TruncationWarning { leakage, threshold: LEAKAGE_WARNING });
        Self { estimate, leakage, warning }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSet {
    pub p: f64,
    /// `E ∫_box |u(t)|^p`
    pub lp: NormEstimate,
    /// `E ∫_box |∇u(t)|^p`, when requested.
    pub seminorm: Option<NormEstimate>,
}

/// Tail masses of `|u₀|^p` and `|∇u₀|^p` outside centered balls, from a fine
/// reference quadrature over the datum's effective support.
#[derive(Debug, Clone)]
pub struct TailMass {
    radii: Vec<f64>,
    /// Suffix sums per exponent, normalized by the total.
    value_tails: Vec<Vec<f64>>,
    gradient_tails: Vec<Vec<f64>>,
}

impl TailMass {
    pub fn new(datum: &dyn crate::field::ScalarDatum, ps: &[f64]) -> Result<Self> {
        let d = datum.dim();
        let r = datum.effective_radius();
        if !r.is_finite() {
            return config("datum has no finite effective radius");
        }
        let m = match d {
            1 => 4000,
            2 => 256,
            _ => 48,
        };
        let bx = QuadratureBox::new(d, r * 1.05, m, Rule::Midpoint)?;
        let mut rows: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::with_capacity(bx.len());
        let mut x = vec![0.0; d];
        let mut g = vec![0.0; d];
        for i in 0..bx.len() {
            let w = bx.node(i, &mut x);
            let v = datum.value(&x).abs();
            datum.gradient_into(&x, &mut g);
            let gn = norm(&g);
            rows.push((norm(&x), ps.iter().map(|p| w * v.powf(*p)).collect(), ps.iter().map(|p| w * gn.powf(*p)).collect()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let suffix = |pick: &dyn Fn(&(f64, Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<Vec<f64>> {
            (0..ps.len())
                .map(|k| {
                    let mut acc = vec![0.0; rows.len() + 1];
                    for i in (0..rows.len()).rev() {
                        acc[i] = acc[i + 1] + pick(&rows[i])[k];
                    }
                    let total = acc[0];
                    acc.iter().map(|a| if total > 0.0 { a / total } else { 0.0 }).collect()
                })
                .collect()
        };
        let value_tails = suffix(&|r| &r.1);
        let gradient_tails = suffix(&|r| &r.2);
        Ok(Self { radii: rows.iter().map(|r| r.0).collect(), value_tails, gradient_tails })
    }

    fn index(&self, radius: f64) -> usize {
        self.radii.partition_point(|r| *r < radius)
    }

    /// Fraction of `∫|u₀|^{p_k}` at distance at least `radius` from the origin.
    pub fn value_tail(&self, k: usize, radius: f64) -> f64 {
        if radius <= 0.0 {
            return 1.0;
        }
        self.value_tails[k][self.index(radius)]
    }

    pub fn gradient_tail(&self, k: usize, radius: f64) -> f64 {
        if radius <= 0.0 {
            return 1.0;
        }
        self.gradient_tails[k][self.index(radius)]
    }
}

/// Radius of a centered ball guaranteed to lie inside `Y_{0,t}(box)` on this
/// path, or 0 when none is certified.
pub fn certified_inner_radius(sol: &TransportSolution, path: &BrownianPath, t_index: usize, bx: &QuadratureBox) -> Result<f64> {
    let d = sol.dim();
    if d == 2 {
        return planar_inner_radius(sol, path, t_index, bx);
    }
    let per_edge = if d <= 2 { 64 } else { 12 };
    let images: Vec<Vec<f64>> = bx
        .boundary_points(per_edge)
        .iter()
        .map(|z| sol.characteristic(path, t_index, z))
        .collect::<Result<_>>()?;
    // Gaps between sampled boundary images bound how far the true image
    // boundary can come inside the sampled minimum.
    let mut margin = 0.0f64;
    for (i, a) in images.iter().enumerate() {
        let nearest = images
            .iter()
            .enumerate()
            .filter(|(j, b)| *j != i && dist(a, b) > 0.0)
            .map(|(_, b)| dist(a, b))
            .fold(f64::INFINITY, f64::min);
        if nearest.is_finite() {
            margin = margin.max(nearest);
        }
    }
    let r_in = images.iter().map(|y| norm(y)).fold(f64::INFINITY, f64::min) - margin;
    if r_in <= 0.0 {
        return Ok(0.0);
    }
    let center = sol.characteristic(path, t_index, &bx.center)?;
    Ok(if norm(&center) < r_in { r_in } else { 0.0 })
}

/// Planar case: the image of the box perimeter is a closed curve, sampled in
/// order. The ball is certified when it clears the sampled curve by the
/// largest gap between consecutive samples and the curve winds around the
/// origin.
fn planar_inner_radius(sol: &TransportSolution, path: &BrownianPath, t_index: usize, bx: &QuadratureBox) -> Result<f64> {
    const PER_EDGE: usize = 64;
    let h = bx.half_width;
    let (cx, cy) = (bx.center[0], bx.center[1]);
    let mut images = Vec::with_capacity(4 * PER_EDGE);
    for edge in 0..4 {
        for i in 0..PER_EDGE {
            let s = -h + 2.0 * h * i as f64 / PER_EDGE as f64;
            let (x, y) = match edge {
                0 => (s, -h),
                1 => (h, s),
                2 => (-s, h),
                _ => (-h, -s),
            };
            images.push(sol.characteristic(path, t_index, &[cx + x, cy + y])?);
        }
    }
    let m = images.len();
    let mut margin = 0.0f64;
    let mut winding = 0.0;
    for i in 0..m {
        let (a, b) = (&images[i], &images[(i + 1) % m]);
        margin = margin.max(dist(a, b));
        let turn = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
        winding += turn;
    }
    let r_in = images.iter().map(|y| norm(y)).fold(f64::INFINITY, f64::min) - margin;
    let encloses = (winding / std::f64::consts::TAU).round() != 0.0;
    Ok(if r_in > 0.0 && encloses { r_in } else { 0.0 })
}

/// Box integrals of `|u(t)|^p` (and `|∇u(t)|^p` when `gradient`) for every
/// exponent in `ps`, averaged over samples `0..samples`.
pub fn solution_norms(
    sol: &TransportSolution,
    t_index: usize,
    ps: &[f64],
    bx: &QuadratureBox,
    samples: usize,
    gradient: bool,
) -> Result<Vec<NormSet>> {
    let d = sol.dim();
    if bx.dim != d {
        return config("box dimension differs from solution dimension");
    }
    if ps.iter().any(|p| !(*p >= 1.0) || !p.is_finite()) {
        return config("exponents must be finite and at least 1");
    }
    if samples == 0 {
        return config("need at least one sample");
    }
    if t_index > sol.grid().steps() {
        return config(format!("time index {t_index} beyond {} steps", sol.grid().steps()));
    }
    let tails = TailMass::new(sol.datum.as_ref(), ps)?;
    let k = ps.len();
    let deterministic = t_index == 0 || sol.source.zero_noise;
    let run = if deterministic { 1 } else { samples };
    // Per sample: k value integrals, k gradient integrals, inner radius.
    let rows: Vec<Vec<f64>> = (0..run as u64)
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let path = sol.path(s);
            let mut out = vec![0.0; 2 * k + 1];
            let mut x = [0.0; MAX_DIM];
            for i in 0..bx.len() {
                let w = bx.node(i, &mut x[..d]);
                let (v, g) = if gradient {
                    let (v, g) = sol.value_and_gradient_on_path(&path, t_index, &x[..d])?;
                    (v, norm(&g))
                } else {
                    (sol.value_on_path(&path, t_index, &x[..d])?, 0.0)
                };
                for (j, p) in ps.iter().enumerate() {
                    out[j] += w * v.abs().powf(*p);
                    if gradient {
                        out[k + j] += w * g.powf(*p);
                    }
                }
            }
            out[2 * k] = if t_index == 0 {
                (0..d).map(|a| bx.half_width - bx.center[a].abs()).fold(f64::INFINITY, f64::min).max(0.0)
            } else {
                certified_inner_radius(sol, &path, t_index, bx)?
            };
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let column = |c: usize| -> Estimate {
        if deterministic {
            Estimate::exact(rows[0][c])
        } else {
            Estimate::from_samples(&rows.iter().map(|r| r[c]).collect::<Vec<_>>())
        }
    };
    let r_min = rows.iter().map(|r| r[2 * k]).fold(f64::INFINITY, f64::min);
    Ok(ps
        .iter()
        .enumerate()
        .map(|(j, p)| NormSet {
            p: *p,
            lp: NormEstimate::new(column(j), tails.value_tail(j, r_min)),
            seminorm: gradient.then(|| NormEstimate::new(column(k + j), tails.gradient_tail(j, r_min))),
        })
        .collect())
}

/// `E ∫_box |u(t)|^p dx`.
pub fn lp_norm(sol: &TransportSolution, t_index: usize, p: f64, bx: &QuadratureBox, samples: usize) -> Result<NormEstimate> {
    Ok(solution_norms(sol, t_index, &[p], bx, samples, false)?[0].lp)
}

/// `E ∫_box |∇u(t)|^p dx`.
pub fn sobolev_seminorm(sol: &TransportSolution, t_index: usize, p: f64, bx: &QuadratureBox, samples: usize) -> Result<NormEstimate> {
    Ok(solution_norms(sol, t_index, &[p], bx, samples, true)?[0].seminorm.expect("gradient requested"))
}
