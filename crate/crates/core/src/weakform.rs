//! Pathwise checks of the weak formulation for the characteristics solution:
//! the Itô and Stratonovich residuals of the pairing `t ↦ ∫ u(t,x) φ(x) dx`.

use crate::brownian::BrownianPath;
use crate::error::{config, Result};
use crate::field::datum::bump_profile;
use crate::quadrature::QuadratureBox;
use crate::stats::Estimate;
use crate::transport::TransportSolution;
use crate::MAX_DIM;

/// Radial bump `φ(x) = q(|x − c|²/ρ²)`, `q(s) = exp(1 − 1/(1 − s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    center: Vec<f64>,
    radius: f64,
    label: String,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return config(format!("test-function radius must be positive, got {radius}"));
        }
        if center.is_empty() || center.len() > MAX_DIM {
            return config("test-function center has unsupported dimension");
        }
        let label = format!("bump(center={center:?},radius={radius})");
        Ok(Self { center, radius, label })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn profile(&self, x: &[f64]) -> (f64, f64, f64, f64) {
        let s = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (self.radius * self.radius);
        let (q, q1, q2) = bump_profile(s);
        (s, q, q1, q2)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.profile(x).1
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let (_, _, q1, _) = self.profile(x);
        let r2 = self.radius * self.radius;
        for (k, o) in out.iter_mut().enumerate().take(self.dim()) {
            *o = q1 * 2.0 * (x[k] - self.center[k]) / r2;
        }
    }

    /// Row-major Hessian.
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let (_, _, q1, q2) = self.profile(x);
        let r2 = self.radius * self.radius;
        for i in 0..d {
            for j in 0..d {
                let ri = x[i] - self.center[i];
                let rj = x[j] - self.center[j];
                out[i * d + j] = q2 * 4.0 * ri * rj / (r2 * r2) + if i == j { q1 * 2.0 / r2 } else { 0.0 };
            }
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let (s, _, q1, q2) = self.profile(x);
        let r2 = self.radius * self.radius;
        q2 * 4.0 * s / r2 + 2.0 * self.dim() as f64 * q1 / r2
    }
}

/// Bumps of radius 0.5 and 1 at the origin, at `e₁`, and at the far point
/// `(8, …, 8)`.
pub fn test_function_catalog(dim: usize) -> Vec<TestFunction> {
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    let centers = [vec![0.0; dim], e1, vec![8.0; dim]];
    centers
        .iter()
        .flat_map(|c| [0.5, 1.0].map(|r| TestFunction::new(c.clone(), r).expect("valid catalog entry")))
        .collect()
}

/// Per-node spatial integrals along one path, for nodes `0..=t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingTerms {
    pub dt: f64,
    /// `∫ u(t_k) φ`
    pub pairing: Vec<f64>,
    /// `∫ b·∇u(t_k) φ`
    pub transport: Vec<f64>,
    /// `∫ u(t_k) ∂ᵢφ`, row `k`, `d` entries
    pub noise: Vec<Vec<f64>>,
    /// `∫ u(t_k) Δφ`
    pub laplacian: Vec<f64>,
    /// `∫ u(t_k) ∂ᵢⱼφ`, row-major
    pub hessian: Vec<Vec<f64>>,
    /// `ΔB_k`
    pub increments: Vec<Vec<f64>>,
}

fn check_box(phi: &TestFunction, bx: &QuadratureBox, sol: &TransportSolution) -> Result<()> {
    if phi.dim() != sol.dim() || bx.dim != sol.dim() {
        return config("test function, box and solution must share one dimension");
    }
    if !bx.contains_ball(phi.center(), phi.support_radius()) {
        return config(format!("box of half-width {} does not contain the support of {}", bx.half_width, phi.label()));
    }
    Ok(())
}

/// Spatial integrals at every node up to `t_index` on `path`.
pub fn pairing_terms(
    sol: &TransportSolution,
    phi: &TestFunction,
    path: &BrownianPath,
    t_index: usize,
    bx: &QuadratureBox,
) -> Result<PairingTerms> {
    check_box(phi, bx, sol)?;
    if t_index > path.grid().steps() {
        return config(format!("time index {t_index} beyond {} steps", path.grid().steps()));
    }
    let d = sol.dim();
    let drift = sol.drift().clone();
    let mut terms = PairingTerms {
        dt: path.grid().dt(),
        pairing: vec![0.0; t_index + 1],
        transport: vec![0.0; t_index + 1],
        noise: vec![vec![0.0; d]; t_index + 1],
        laplacian: vec![0.0; t_index + 1],
        hessian: vec![vec![0.0; d * d]; t_index + 1],
        increments: (0..t_index).map(|k| path.increment_unchecked(k).to_vec()).collect(),
    };
    let mut x = [0.0; MAX_DIM];
    let mut dphi = [0.0; MAX_DIM];
    let mut hphi = [0.0; MAX_DIM * MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    for i in 0..bx.len() {
        let w = bx.node(i, &mut x[..d]);
        let phi_v = phi.value(&x[..d]);
        if phi_v == 0.0 {
            continue;
        }
        phi.gradient_into(&x[..d], &mut dphi[..d]);
        phi.hessian_into(&x[..d], &mut hphi[..d * d]);
        let lap = phi.laplacian(&x[..d]);
        drift.eval_into(&x[..d], &mut b[..d]);
        for k in 0..=t_index {
            let (u, g) = sol.value_and_gradient_on_path(path, k, &x[..d])?;
            let wu = w * u;
            terms.pairing[k] += wu * phi_v;
            terms.transport[k] += w * phi_v * (0..d).map(|a| b[a] * g[a]).sum::<f64>();
            for a in 0..d {
                terms.noise[k][a] += wu * dphi[a];
            }
            terms.laplacian[k] += wu * lap;
            for a in 0..d * d {
                terms.hessian[k][a] += wu * hphi[a];
            }
        }
    }
    Ok(terms)
}

/// Residuals at the final node of a [`PairingTerms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub ito: f64,
    pub stratonovich: f64,
    /// `½ Σ_k ∫ u(t_k) ∂ᵢⱼφ · ΔB_kⁱ ΔB_kʲ`
    pub compensator: f64,
    /// `(Stratonovich sum − Itô sum) − compensator`
    pub compensator_defect: f64,
}

impl PairingTerms {
    pub fn last(&self) -> usize {
        self.pairing.len() - 1
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn residuals(&self) -> Residuals {
        let t = self.last();
        let dt = self.dt;
        let d = self.noise[0].len();
        let mut drift = 0.0;
        let mut ito = 0.0;
        let mut strat = 0.0;
        let mut lap = 0.0;
        let mut comp = 0.0;
        for k in 0..t {
            let db = &self.increments[k];
            drift += self.transport[k] * dt;
            ito += Self::dot(&self.noise[k], db);
            strat += 0.5 * (Self::dot(&self.noise[k], db) + Self::dot(&self.noise[k + 1], db));
            lap += 0.5 * self.laplacian[k] * dt;
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += self.hessian[k][i * d + j] * db[i] * db[j];
                }
            }
            comp += 0.5 * q;
        }
        let change = self.pairing[t] - self.pairing[0];
        Residuals {
            ito: change + drift - ito - lap,
            stratonovich: change + drift - strat,
            compensator: comp,
            compensator_defect: (strat - ito) - comp,
        }
    }

    /// Pairing increments and their predicted quadratic variation.
    pub fn series(&self) -> PairingSeries {
        let n = self.last();
        PairingSeries {
            times: (0..=n).map(|k| k as f64 * self.dt).collect(),
            values: self.pairing.clone(),
            predicted_qv: (0..n).map(|k| self.noise[k].iter().map(|g| g * g).sum::<f64>() * self.dt).sum(),
            dt: self.dt,
        }
    }
}

/// `∫ u(t, x) φ(x) dx` for one sample.
pub fn pairing(sol: &TransportSolution, phi: &TestFunction, t_index: usize, sample_index: u64, bx: &QuadratureBox) -> Result<f64> {
    check_box(phi, bx, sol)?;
    let path = sol.path(sample_index);
    let d = sol.dim();
    let mut x = [0.0; MAX_DIM];
    let mut acc = 0.0;
    for i in 0..bx.len() {
        let w = bx.node(i, &mut x[..d]);
        let f = phi.value(&x[..d]);
        if f != 0.0 {
            acc += w * f * sol.value_on_path(&path, t_index, &x[..d])?;
        }
    }
    Ok(acc)
}

pub fn ito_residual(sol: &TransportSolution, phi: &TestFunction, t_index: usize, sample_index: u64, bx: &QuadratureBox) -> Result<f64> {
    Ok(pairing_terms(sol, phi, &sol.path(sample_index), t_index, bx)?.residuals().ito)
}

pub fn stratonovich_residual(
    sol: &TransportSolution,
    phi: &TestFunction,
    t_index: usize,
    sample_index: u64,
    bx: &QuadratureBox,
) -> Result<f64> {
    Ok(pairing_terms(sol, phi, &sol.path(sample_index), t_index, bx)?.residuals().stratonovich)
}

/// Discrete compensator `½ Σ_k ∫ u(t_k) ∂ᵢⱼφ ΔBⁱΔBʲ`.
pub fn compensator(sol: &TransportSolution, phi: &TestFunction, t_index: usize, sample_index: u64, bx: &QuadratureBox) -> Result<f64> {
    Ok(pairing_terms(sol, phi, &sol.path(sample_index), t_index, bx)?.residuals().compensator)
}

/// Pairing series along `path` for nodes `0..=t_index`, using values only.
pub fn pairing_series(
    sol: &TransportSolution,
    phi: &TestFunction,
    path: &BrownianPath,
    t_index: usize,
    bx: &QuadratureBox,
) -> Result<PairingSeries> {
    check_box(phi, bx, sol)?;
    if t_index > path.grid().steps() {
        return config(format!("time index {t_index} beyond {} steps", path.grid().steps()));
    }
    let d = sol.dim();
    let dt = path.grid().dt();
    let mut values = vec![0.0; t_index + 1];
    let mut noise = vec![[0.0; MAX_DIM]; t_index + 1];
    let mut x = [0.0; MAX_DIM];
    let mut dphi = [0.0; MAX_DIM];
    for i in 0..bx.len() {
        let w = bx.node(i, &mut x[..d]);
        let phi_v = phi.value(&x[..d]);
        if phi_v == 0.0 {
            continue;
        }
        phi.gradient_into(&x[..d], &mut dphi[..d]);
        for k in 0..=t_index {
            let wu = w * sol.value_on_path(path, k, &x[..d])?;
            values[k] += wu * phi_v;
            for a in 0..d {
                noise[k][a] += wu * dphi[a];
            }
        }
    }
    Ok(PairingSeries {
        times: (0..=t_index).map(|k| k as f64 * dt).collect(),
        values,
        predicted_qv: noise[..t_index].iter().map(|g| g[..d].iter().map(|v| v * v).sum::<f64>() * dt).sum(),
        dt,
    })
}

/// One sample of the pairing process on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `Σ_k |∫ u(t_k) ∇φ|² dt`
    pub predicted_qv: f64,
    pub dt: f64,
}

impl PairingSeries {
    pub fn realized_qv(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
    }

    pub fn max_jump(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemimartingaleReport {
    pub samples: usize,
    /// Largest pairing increment over all samples, divided by `√dt`.
    pub max_jump_ratio: f64,
    pub realized_qv: Estimate,
    pub predicted_qv: Estimate,
    /// Ratio of ensemble means; 0 when both vanish.
    pub qv_ratio: f64,
}

/// Minimum ensemble size for [`semimartingale_check`].
pub const SEMIMARTINGALE_MIN_SAMPLES: usize = 64;

pub fn semimartingale_check(ensemble: &[PairingSeries]) -> Result<SemimartingaleReport> {
    if ensemble.len() < SEMIMARTINGALE_MIN_SAMPLES {
        return config(format!("semimartingale check needs at least {SEMIMARTINGALE_MIN_SAMPLES} samples, got {}", ensemble.len()));
    }
    let realized = Estimate::from_samples(&ensemble.iter().map(|s| s.realized_qv()).collect::<Vec<_>>());
    let predicted = Estimate::from_samples(&ensemble.iter().map(|s| s.predicted_qv).collect::<Vec<_>>());
    let max_jump_ratio = ensemble.iter().map(|s| s.max_jump() / s.dt.sqrt()).fold(0.0, f64::max);
    let qv_ratio = if predicted.mean == 0.0 && realized.mean == 0.0 { 0.0 } else { realized.mean / predicted.mean };
    Ok(SemimartingaleReport { samples: ensemble.len(), max_jump_ratio, realized_qv: realized, predicted_qv: predicted, qv_ratio })
}
