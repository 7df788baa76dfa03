//! Smooth plateau cutoffs.
//!
//! The profile is `η(x) = g(|x|)` with `g = 1` on `[0, 1]`, `g = 0` on
//! `[2, ∞)` and `g(r) = f(2-r) / (f(2-r) + f(r-1))` in between, where
//! `f(s) = exp(-1/s)` for `s > 0`.

use std::sync::OnceLock;

use crate::error::{config, Result};
use crate::MAX_DIM;

#[inline]
fn f(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let v = (-1.0 / s).exp();
    let s2 = s * s;
    (v, v / s2, v * (1.0 - 2.0 * s) / (s2 * s2))
}

/// `(g, g', g'')` at radius `r`.
#[inline]
fn profile(r: f64) -> (f64, f64, f64) {
    if r <= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if r >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let (fa, fa1, fa2) = f(2.0 - r);
    let (fb, fb1, fb2) = f(r - 1.0);
    // A(r) = f(2-r), B(r) = f(r-1)
    let (a, a1, a2) = (fa, -fa1, fa2);
    let (b, b1, b2) = (fb, fb1, fb2);
    let s = a + b;
    let s1 = a1 + b1;
    let num1 = a1 * b - a * b1;
    let g = a / s;
    let g1 = num1 / (s * s);
    let g2 = (a2 * b - a * b2) / (s * s) - 2.0 * num1 * s1 / (s * s * s);
    (g, g1, g2)
}

/// Radial Laplacian `g'' + (d-1) g'/r` of the profile.
#[inline]
fn profile_laplacian(r: f64, dim: usize) -> f64 {
    let (_, g1, g2) = profile(r);
    if g1 == 0.0 && g2 == 0.0 {
        return 0.0;
    }
    g2 + (dim as f64 - 1.0) * g1 / r
}

/// `(K_∇, K_Δ)` for the unit profile in dimension `dim`, by dense sampling.
pub(crate) fn profile_constants(dim: usize) -> (f64, f64) {
    static CONSTS: OnceLock<[(f64, f64); MAX_DIM]> = OnceLock::new();
    CONSTS.get_or_init(|| {
        let mut out = [(0.0, 0.0); MAX_DIM];
        let n = 400_000;
        for (k, slot) in out.iter_mut().enumerate() {
            let d = k + 1;
            let (mut kg, mut kl) = (0.0f64, 0.0f64);
            for i in 1..n {
                let r = 1.0 + i as f64 / n as f64;
                kg = kg.max(profile(r).1.abs());
                kl = kl.max(profile_laplacian(r, d).abs());
            }
            // sampling misses the true sup by O(n^-2) relative
            *slot = (kg * (1.0 + 1e-6), kl * (1.0 + 1e-6));
        }
        out
    })[dim - 1]
}

/// `η_R(x) = η(x / R)`: equal to 1 on `|x| ≤ R`, 0 on `|x| ≥ 2R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub radius: f64,
}

impl CutoffSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 1.0) || !radius.is_finite() {
            return config(format!("cutoff radius must be >= 1, got {radius}"));
        }
        Ok(Self { radius })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        profile(crate::linalg::norm(x) / self.radius).0
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = crate::linalg::norm(x);
        let (_, g1, _) = profile(r / self.radius);
        if g1 == 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter().map(|xi| g1 * xi / (r * self.radius)).collect()
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let r = crate::linalg::norm(x);
        profile_laplacian(r / self.radius, x.len()) / (self.radius * self.radius)
    }

    /// `K_∇ / R`
    pub fn gradient_bound(&self, dim: usize) -> f64 {
        profile_constants(dim).0 / self.radius
    }

    /// `K_Δ / R²`
    pub fn laplacian_bound(&self, dim: usize) -> f64 {
        profile_constants(dim).1 / (self.radius * self.radius)
    }
}

/// `η_ε(x) = η(ε x)`: a cutoff whose plateau widens to radius `1/ε` as `ε → 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WideningCutoff {
    pub epsilon: f64,
}

impl WideningCutoff {
    pub fn value(&self, x: &[f64]) -> f64 {
        profile(self.epsilon * crate::linalg::norm(x)).0
    }

    /// Value and gradient `ε ∇η(ε x)` written into `grad`.
    pub fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = crate::linalg::norm(x);
        let (g, g1, _) = profile(self.epsilon * r);
        for (gi, xi) in grad.iter_mut().zip(x) {
            *gi = if g1 == 0.0 { 0.0 } else { g1 * self.epsilon * xi / r };
        }
        g
    }

    pub fn support_radius(&self) -> f64 {
        2.0 / self.epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_outside() {
        let c = CutoffSpec::new(2.0).unwrap();
        let inside = [1.0, 0.0];
        assert_eq!(c.value(&inside), 1.0);
        assert_eq!(c.gradient(&inside), vec![0.0, 0.0]);
        assert_eq!(c.laplacian(&inside), 0.0);
        let outside = [0.0, 6.0];
        assert_eq!(c.value(&outside), 0.0);
        assert_eq!(c.gradient(&outside), vec![0.0, 0.0]);
        assert_eq!(c.laplacian(&outside), 0.0);
        assert!(CutoffSpec::new(0.5).is_err());
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let h = 1e-6;
        for r in [1.1, 1.3, 1.5, 1.77, 1.95] {
            let (_, g1, g2) = profile(r);
            let fd1 = (profile(r + h).0 - profile(r - h).0) / (2.0 * h);
            let fd2 = (profile(r + h).1 - profile(r - h).1) / (2.0 * h);
            assert!((g1 - fd1).abs() < 1e-6, "r={r}");
            assert!((g2 - fd2).abs() < 1e-5 * (1.0 + g2.abs()), "r={r}");
        }
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let c = CutoffSpec::new(1.5).unwrap();
        let h = 1e-4;
        for x in [[1.8, 0.4], [-1.0, 2.0], [0.3, -2.5]] {
            let mut fd = 0.0;
            for i in 0..2 {
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                fd += (c.value(&p) - 2.0 * c.value(&x) + c.value(&m)) / (h * h);
            }
            assert!((c.laplacian(&x) - fd).abs() < 1e-5, "{x:?}");
        }
    }

    #[test]
    fn sampled_gradient_within_bound_for_radius_two() {
        let c = CutoffSpec::new(2.0).unwrap();
        let bound = c.gradient_bound(2);
        let mut max = 0.0f64;
        for i in 0..20_000 {
            let t = i as f64 * 0.7;
            let r = 2.0 + 2.0 * (i as f64 / 20_000.0);
            let x = [r * t.cos(), r * t.sin()];
            max = max.max(crate::linalg::norm(&c.gradient(&x)));
        }
        assert!(max <= bound);
        assert!(max >= 0.99 * bound);
    }
}
