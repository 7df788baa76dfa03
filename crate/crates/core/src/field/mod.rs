//! Drift fields, initial data, mollification and cutoff functions.

mod catalog;
mod cutoff;
pub(crate) mod datum;
mod holder;
mod mollify;

pub use catalog::{CatalogField, FieldKind};
pub use cutoff::{CutoffSpec, WideningCutoff};
pub use datum::{CatalogDatum, DatumKind, Scaled, ScalarDatum, Smoothness};
pub use holder::{holder_norm_estimate, holder_seminorm_profile, HolderSampler};
pub use mollify::{mollify_datum, mollify_field, MollifiedDatum, MollifiedField, MollifierSpec};

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{check_finite, Result};
use crate::linalg::Mat;
use crate::MAX_DIM;

/// Autonomous drift `b: R^d -> R^d`.
///
/// Implementations must be pure; the same input always yields bit-identical
/// output, which the coupling and replay guarantees rely on.
pub trait VectorField: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn label(&self) -> &str;

    /// Claimed Hölder exponent, in (0, 1].
    fn holder_exponent(&self) -> f64;

    /// Whether the field is Lipschitz, so that `Db` is bounded wherever defined.
    fn lipschitz(&self) -> bool {
        self.holder_exponent() >= 1.0
    }

    /// Claim that `div b = 0`.
    fn divergence_free(&self) -> bool;

    /// Writes `b(x)` into `out[..dim]`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    /// Whether [`VectorField::jacobian_into`] is meaningful.
    fn has_jacobian(&self) -> bool {
        false
    }

    /// Writes `Db(x)` row-major into `out[..dim*dim]`: `out[i*dim + j] = ∂_j b_i`.
    fn jacobian_into(&self, _x: &[f64], _out: &mut [f64]) {
        unimplemented!("field {} has no analytic Jacobian", self.label())
    }

    /// `b(x)` and `Db(x)` together; override when one pass computes both.
    fn eval_with_jacobian(&self, x: &[f64], out: &mut [f64], jac: &mut [f64]) {
        self.eval_into(x, out);
        self.jacobian_into(x, jac);
    }

    /// Bitmask of axes along which the field is constant.
    fn invariant_axes(&self) -> u32 {
        0
    }

    /// True if `x` lies within `tol` of the set where `Db` is undefined.
    fn near_singular(&self, _x: &[f64], _tol: f64) -> bool {
        false
    }
}

pub type Drift = Arc<dyn VectorField>;
pub type Datum = Arc<dyn ScalarDatum>;

/// Evaluates `b(x)`, rejecting non-finite output.
pub fn evaluate_field(field: &dyn VectorField, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != field.dim() {
        return crate::error::config(format!(
            "point has dimension {} but field {} has dimension {}",
            x.len(),
            field.label(),
            field.dim()
        ));
    }
    let mut out = vec![0.0; field.dim()];
    field.eval_into(x, &mut out);
    check_finite(&out, || format!("from field {} at x = {x:?}", field.label()))?;
    Ok(out)
}

/// Analytic Jacobian of `field` at `x`.
pub fn field_jacobian(field: &dyn VectorField, x: &[f64]) -> Result<Mat> {
    if !field.has_jacobian() {
        return crate::error::config(format!("field {} has no Jacobian evaluator", field.label()));
    }
    let d = field.dim();
    let mut buf = [0.0; MAX_DIM * MAX_DIM];
    field.jacobian_into(x, &mut buf[..d * d]);
    check_finite(&buf[..d * d], || format!("Jacobian of {} at x = {x:?}", field.label()))?;
    Ok(Mat::from_row_major(d, &buf[..d * d]))
}

/// Central-difference divergence `Σ_i (b_i(x + h e_i) - b_i(x - h e_i)) / 2h`.
pub fn divergence_estimate(field: &dyn VectorField, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return crate::error::config(format!("difference step must be positive, got {h}"));
    }
    let d = field.dim();
    let mut xp = [0.0; MAX_DIM];
    let mut bp = [0.0; MAX_DIM];
    let mut bm = [0.0; MAX_DIM];
    let mut div = 0.0;
    for i in 0..d {
        xp[..d].copy_from_slice(x);
        xp[i] = x[i] + h;
        field.eval_into(&xp[..d], &mut bp[..d]);
        xp[i] = x[i] - h;
        field.eval_into(&xp[..d], &mut bm[..d]);
        div += (bp[i] - bm[i]) / (2.0 * h);
    }
    check_finite(&[div], || format!("divergence of {} at x = {x:?}", field.label()))?;
    Ok(div)
}

/// Central-difference Jacobian of a field; used to validate analytic ones.
pub fn finite_difference_jacobian(field: &dyn VectorField, x: &[f64], h: f64) -> Mat {
    let d = field.dim();
    let mut m = Mat::zeros(d);
    let mut xp = [0.0; MAX_DIM];
    let mut bp = [0.0; MAX_DIM];
    let mut bm = [0.0; MAX_DIM];
    for j in 0..d {
        xp[..d].copy_from_slice(x);
        xp[j] = x[j] + h;
        field.eval_into(&xp[..d], &mut bp[..d]);
        xp[j] = x[j] - h;
        field.eval_into(&xp[..d], &mut bm[..d]);
        for i in 0..d {
            m[(i, j)] = (bp[i] - bm[i]) / (2.0 * h);
        }
    }
    m
}
