//! Sampled estimates of the weighted Hölder norm
//! `‖f‖_θ = sup |f(x)|/(1+|x|) + sup_{0<|x-y|≤1} |f(x)-f(y)|/|x-y|^θ`.
//!
//! These are lower estimates of a supremum over a continuum; they can
//! falsify membership in `C^θ` but never certify it.

use super::{evaluate_field, VectorField};
use crate::error::{config, Result};
use crate::linalg::{dist, norm};
use crate::quadrature::halton_box;

/// Pair sampler: around each center, partners at dyadic distances
/// `2^{-k}`, `k = 0..=max_level`, along every coordinate axis.
#[derive(Debug, Clone)]
pub struct HolderSampler {
    pub centers: Vec<Vec<f64>>,
    pub max_level: u32,
}

impl HolderSampler {
    /// 64 Halton centers in `[-half_width, half_width]^d`, levels 0..=20.
    pub fn on_box(dim: usize, half_width: f64) -> Self {
        Self { centers: halton_box(64, dim, half_width), max_level: 20 }
    }

    pub fn with_centers(mut self, extra: impl IntoIterator<Item = Vec<f64>>) -> Self {
        self.centers.extend(extra);
        self
    }

    fn pairs(&self, level: u32) -> impl Iterator<Item = (&[f64], Vec<f64>)> + '_ {
        let h = 0.5f64.powi(level as i32);
        self.centers.iter().flat_map(move |c| {
            (0..c.len()).map(move |axis| {
                let mut y = c.clone();
                y[axis] += h;
                (c.as_slice(), y)
            })
        })
    }
}

fn validate(theta: f64, sampler: &HolderSampler) -> Result<()> {
    if !(theta > 0.0 && theta <= 1.0) {
        return config(format!("Hölder exponent must lie in (0, 1], got {theta}"));
    }
    if sampler.centers.is_empty() {
        return config("Hölder sampler has no sample points");
    }
    Ok(())
}

/// Maximum difference quotient at each dyadic level `k = 0..=max_level`.
pub fn holder_seminorm_profile(field: &dyn VectorField, theta: f64, sampler: &HolderSampler) -> Result<Vec<f64>> {
    validate(theta, sampler)?;
    (0..=sampler.max_level)
        .map(|k| {
            let mut best = 0.0f64;
            for (x, y) in sampler.pairs(k) {
                let fx = evaluate_field(field, x)?;
                let fy = evaluate_field(field, &y)?;
                best = best.max(dist(&fx, &fy) / dist(x, &y).powf(theta));
            }
            Ok(best)
        })
        .collect()
}

/// Sampled `‖(1+|·|)^{-1} f‖_∞ + [f]_θ`.
pub fn holder_norm_estimate(field: &dyn VectorField, theta: f64, sampler: &HolderSampler) -> Result<f64> {
    validate(theta, sampler)?;
    let mut weighted_sup = 0.0f64;
    for c in &sampler.centers {
        let fc = evaluate_field(field, c)?;
        weighted_sup = weighted_sup.max(norm(&fc) / (1.0 + norm(c)));
    }
    let seminorm = holder_seminorm_profile(field, theta, sampler)?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(weighted_sup + seminorm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CatalogField;

    #[test]
    fn zero_field_has_zero_norm() {
        let s = HolderSampler::on_box(2, 1.0);
        assert_eq!(holder_norm_estimate(&CatalogField::zero(2), 0.5, &s).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_norm_bracketed_by_analytic_sup() {
        // exact sup of 3/(1+|x|) over [-1,1]^2 is 3 (at the origin); its
        // minimum over the box is 3/(1+√2)
        let s = HolderSampler::on_box(2, 1.0);
        let est = holder_norm_estimate(&CatalogField::constant(vec![3.0, 0.0]), 0.5, &s).unwrap();
        assert!(est <= 3.0 && est >= 3.0 / (1.0 + 2f64.sqrt()), "{est}");
    }

    #[test]
    fn shear_seminorm_finite_at_own_exponent_and_blows_up_above() {
        let s = HolderSampler::on_box(2, 1.0).with_centers([vec![0.0, 0.0]]);
        let f = CatalogField::shear_holder(0.5);
        let own = holder_seminorm_profile(&f, 0.5, &s).unwrap();
        // pairs straddling y = 0 attain the seminorm 2^{1-θ}
        assert!(own.iter().all(|v| *v <= 2f64.powf(0.5) + 1e-12), "{own:?}");
        assert!(own.iter().any(|v| *v > 1.4));
        let above = holder_seminorm_profile(&f, 0.8, &s).unwrap();
        // oracle: at the origin the ratio is (2^-k)^{0.5-0.8} = 2^{0.3k}
        for (k, v) in above.iter().enumerate() {
            let oracle = 2f64.powf(0.3 * k as f64);
            assert!(*v >= oracle * (1.0 - 1e-12), "k={k}: {v} < {oracle}");
        }
        assert!(above[20] > 60.0);
    }

    #[test]
    fn estimate_is_monotone_in_sample_set() {
        let f = CatalogField::cellular();
        let small = HolderSampler::on_box(2, 2.0);
        let big = small.clone().with_centers(crate::quadrature::halton_box(100, 2, 3.0));
        let a = holder_norm_estimate(&f, 1.0, &small).unwrap();
        let b = holder_norm_estimate(&f, 1.0, &big).unwrap();
        assert!(b >= a);
    }

    #[test]
    fn empty_sampler_is_config_error() {
        let s = HolderSampler { centers: vec![], max_level: 20 };
        assert!(holder_norm_estimate(&CatalogField::rotation(), 0.5, &s).is_err());
    }
}
