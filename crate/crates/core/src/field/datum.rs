use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// C^∞ with compact support.
    CompactlySmooth,
    /// C^∞, rapidly decaying, unbounded support.
    Smooth,
    /// Only weakly differentiable (kinks allowed).
    SobolevOnly,
}

/// Initial datum `u₀` together with its gradient.
pub trait ScalarDatum: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn label(&self) -> &str;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
    /// Radius of a centered ball outside which the datum vanishes, if finite.
    fn support_radius(&self) -> Option<f64>;
    /// Radius beyond which the datum is negligible (|u₀| < 1e-6 max|u₀|).
    fn effective_radius(&self) -> f64 {
        self.support_radius().unwrap_or(f64::INFINITY)
    }
    fn smoothness(&self) -> Smoothness;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }
}

/// `q(s) = exp(1 - 1/(1-s))` on `s < 1` with its first two derivatives.
#[inline]
pub(crate) fn bump_profile(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let a = 1.0 / (1.0 - s);
    let q = (1.0 - a).exp();
    let q1 = -q * a * a;
    let q2 = q * (a.powi(4) - 2.0 * a.powi(3));
    (q, q1, q2)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumKind {
    Zero,
    /// `exp(-|x - c|² / (2σ²))`
    Gaussian { sigma: f64, center: Vec<f64> },
    /// `exp(1 - 1/(1 - |x - c|²/r²))`, unit peak, support radius `r` about `c`.
    Bump { radius: f64, center: Vec<f64> },
    /// `(1 - |x|/r)_+`, Lipschitz but not C¹.
    Cone { radius: f64 },
}

#[derive(Debug, Clone)]
pub struct CatalogDatum {
    kind: DatumKind,
    dim: usize,
    label: String,
}

impl CatalogDatum {
    pub fn new(kind: DatumKind, dim: usize) -> Result<Self> {
        if dim == 0 || dim > crate::MAX_DIM {
            return config(format!("datum dimension {dim} unsupported"));
        }
        match &kind {
            DatumKind::Gaussian { sigma, center } if !(*sigma > 0.0) || center.len() != dim => {
                return config("gaussian datum needs sigma > 0 and a center of matching dimension")
            }
            DatumKind::Bump { radius, center } if !(*radius > 0.0) || center.len() != dim => {
                return config("bump datum needs radius > 0 and a center of matching dimension")
            }
            DatumKind::Cone { radius } if !(*radius > 0.0) => return config("cone datum needs radius > 0"),
            _ => {}
        }
        let label = match &kind {
            DatumKind::Zero => "zero".to_string(),
            DatumKind::Gaussian { sigma, .. } => format!("gaussian(sigma={sigma})"),
            DatumKind::Bump { radius, .. } => format!("bump(radius={radius})"),
            DatumKind::Cone { radius } => format!("cone(radius={radius})"),
        };
        Ok(Self { kind, dim, label })
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(DatumKind::Zero, dim).unwrap()
    }

    pub fn gaussian(dim: usize, sigma: f64) -> Self {
        Self::new(DatumKind::Gaussian { sigma, center: vec![0.0; dim] }, dim).unwrap()
    }

    pub fn bump(dim: usize, radius: f64) -> Self {
        Self::new(DatumKind::Bump { radius, center: vec![0.0; dim] }, dim).unwrap()
    }

    pub fn bump_at(center: Vec<f64>, radius: f64) -> Self {
        let d = center.len();
        Self::new(DatumKind::Bump { radius, center }, d).unwrap()
    }

    pub fn cone(dim: usize, radius: f64) -> Self {
        Self::new(DatumKind::Cone { radius }, dim).unwrap()
    }

    pub fn kind(&self) -> &DatumKind {
        &self.kind
    }
}

impl ScalarDatum for CatalogDatum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DatumKind::Zero => 0.0,
            DatumKind::Gaussian { sigma, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-r2 / (2.0 * sigma * sigma)).exp()
            }
            DatumKind::Bump { radius, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                bump_profile(r2 / (radius * radius)).0
            }
            DatumKind::Cone { radius } => {
                let r = crate::linalg::norm(x);
                (1.0 - r / radius).max(0.0)
            }
        }
    }

    #[inline]
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.kind {
            DatumKind::Zero => out[..d].fill(0.0),
            DatumKind::Gaussian { sigma, center } => {
                let s2 = sigma * sigma;
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let v = (-r2 / (2.0 * s2)).exp();
                for i in 0..d {
                    out[i] = -v * (x[i] - center[i]) / s2;
                }
            }
            DatumKind::Bump { radius, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let rr = radius * radius;
                let (_, q1, _) = bump_profile(r2 / rr);
                for i in 0..d {
                    out[i] = q1 * 2.0 * (x[i] - center[i]) / rr;
                }
            }
            DatumKind::Cone { radius } => {
                let r = crate::linalg::norm(x);
                if r >= *radius || r == 0.0 {
                    out[..d].fill(0.0);
                } else {
                    for i in 0..d {
                        out[i] = -x[i] / (r * radius);
                    }
                }
            }
        }
    }

    fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            DatumKind::Zero => Some(0.0),
            DatumKind::Gaussian { .. } => None,
            DatumKind::Bump { radius, center } => Some(radius + crate::linalg::norm(center)),
            DatumKind::Cone { radius } => Some(*radius),
        }
    }

    fn effective_radius(&self) -> f64 {
        match &self.kind {
            DatumKind::Gaussian { sigma, center } => {
                sigma * (2.0 * 1e6f64.ln()).sqrt() + crate::linalg::norm(center)
            }
            _ => self.support_radius().unwrap(),
        }
    }

    fn smoothness(&self) -> Smoothness {
        match self.kind {
            DatumKind::Zero | DatumKind::Bump { .. } => Smoothness::CompactlySmooth,
            DatumKind::Gaussian { .. } => Smoothness::Smooth,
            DatumKind::Cone { .. } => Smoothness::SobolevOnly,
        }
    }
}

/// `α u₀`
#[derive(Debug, Clone)]
pub struct Scaled {
    inner: Arc<dyn ScalarDatum>,
    factor: f64,
    label: String,
}

impl Scaled {
    pub fn new(inner: Arc<dyn ScalarDatum>, factor: f64) -> Self {
        let label = format!("{}*{}", factor, inner.label());
        Self { inner, factor, label }
    }
}

impl ScalarDatum for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.factor * self.inner.value(x)
    }
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient_into(x, out);
        out[..self.dim()].iter_mut().for_each(|g| *g *= self.factor);
    }
    fn support_radius(&self) -> Option<f64> {
        self.inner.support_radius()
    }
    fn effective_radius(&self) -> f64 {
        self.inner.effective_radius()
    }
    fn smoothness(&self) -> Smoothness {
        self.inner.smoothness()
    }
}
