use super::VectorField;
use crate::error::{config, Result};

/// The fixed test bed of drifts.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Zero,
    Constant(Vec<f64>),
    /// `s (-y, x)`
    Rotation { scale: f64 },
    /// `s (x, -y)`, hyperbolic strain.
    Strain { scale: f64 },
    /// `s (sin x cos y, -cos x sin y)`, cellular flow.
    Cellular { scale: f64 },
    /// `s (sign(y)|y|^θ, 0)`: divergence-free, C^θ, not Lipschitz on `y = 0`.
    ShearHolder { theta: f64, scale: f64 },
    /// `s (x, 0)`: negative control with divergence `s`.
    Compressive { scale: f64 },
}

#[derive(Debug, Clone)]
pub struct CatalogField {
    kind: FieldKind,
    dim: usize,
    label: String,
}

impl CatalogField {
    pub fn new(kind: FieldKind, dim: usize) -> Result<Self> {
        let planar = !matches!(kind, FieldKind::Zero | FieldKind::Constant(_));
        if dim == 0 || dim > crate::MAX_DIM {
            return config(format!("field dimension {dim} unsupported"));
        }
        if planar && dim != 2 {
            return config(format!("{kind:?} is only defined in two dimensions"));
        }
        if let FieldKind::Constant(c) = &kind {
            if c.len() != dim {
                return config("constant field value has wrong dimension");
            }
        }
        if let FieldKind::ShearHolder { theta, .. } = kind {
            if !(theta > 0.0 && theta <= 1.0) {
                return config(format!("Hölder exponent must lie in (0, 1], got {theta}"));
            }
        }
        let label = match &kind {
            FieldKind::Zero => "zero".to_string(),
            FieldKind::Constant(c) => format!("constant{c:?}"),
            FieldKind::Rotation { scale } => format!("rotation(scale={scale})"),
            FieldKind::Strain { scale } => format!("strain(scale={scale})"),
            FieldKind::Cellular { scale } => format!("cellular(scale={scale})"),
            FieldKind::ShearHolder { theta, scale } => format!("shear-holder(theta={theta},scale={scale})"),
            FieldKind::Compressive { scale } => format!("compressive(scale={scale})"),
        };
        Ok(Self { kind, dim, label })
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(FieldKind::Zero, dim).expect("valid dimension")
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let d = value.len();
        Self::new(FieldKind::Constant(value), d).expect("valid constant")
    }

    pub fn rotation() -> Self {
        Self::new(FieldKind::Rotation { scale: 1.0 }, 2).unwrap()
    }

    pub fn strain() -> Self {
        Self::new(FieldKind::Strain { scale: 1.0 }, 2).unwrap()
    }

    pub fn cellular() -> Self {
        Self::new(FieldKind::Cellular { scale: 1.0 }, 2).unwrap()
    }

    pub fn shear_holder(theta: f64) -> Self {
        Self::new(FieldKind::ShearHolder { theta, scale: 1.0 }, 2).expect("valid exponent")
    }

    pub fn compressive() -> Self {
        Self::new(FieldKind::Compressive { scale: 1.0 }, 2).unwrap()
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// Every divergence-free entry at default parameters, for sweeps.
    pub fn divergence_free_catalog() -> Vec<CatalogField> {
        vec![
            Self::zero(2),
            Self::constant(vec![0.5, -0.25]),
            Self::rotation(),
            Self::strain(),
            Self::cellular(),
            Self::shear_holder(0.3),
            Self::shear_holder(0.5),
        ]
    }
}

impl VectorField for CatalogField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn holder_exponent(&self) -> f64 {
        match self.kind {
            FieldKind::ShearHolder { theta, .. } => theta,
            _ => 1.0,
        }
    }

    fn divergence_free(&self) -> bool {
        !matches!(self.kind, FieldKind::Compressive { .. })
    }

    #[inline]
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Zero => out[..self.dim].fill(0.0),
            FieldKind::Constant(c) => out[..self.dim].copy_from_slice(c),
            FieldKind::Rotation { scale } => {
                out[0] = -scale * x[1];
                out[1] = scale * x[0];
            }
            FieldKind::Strain { scale } => {
                out[0] = scale * x[0];
                out[1] = -scale * x[1];
            }
            FieldKind::Cellular { scale } => {
                let (sx, cx) = x[0].sin_cos();
                let (sy, cy) = x[1].sin_cos();
                out[0] = scale * sx * cy;
                out[1] = -scale * cx * sy;
            }
            FieldKind::ShearHolder { theta, scale } => {
                let y = x[1];
                out[0] = if y == 0.0 { 0.0 } else { scale * y.signum() * y.abs().powf(*theta) };
                out[1] = 0.0;
            }
            FieldKind::Compressive { scale } => {
                out[0] = scale * x[0];
                out[1] = 0.0;
            }
        }
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    #[inline]
    fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out[..d * d].fill(0.0);
        match &self.kind {
            FieldKind::Zero | FieldKind::Constant(_) => {}
            FieldKind::Rotation { scale } => {
                out[1] = -scale;
                out[2] = *scale;
            }
            FieldKind::Strain { scale } => {
                out[0] = *scale;
                out[3] = -scale;
            }
            FieldKind::Cellular { scale } => {
                let (sx, cx) = x[0].sin_cos();
                let (sy, cy) = x[1].sin_cos();
                out[0] = scale * cx * cy;
                out[1] = -scale * sx * sy;
                out[2] = scale * sx * sy;
                out[3] = -scale * cx * cy;
            }
            FieldKind::ShearHolder { theta, scale } => {
                // θ|y|^{θ-1}; infinite on y = 0 when θ < 1
                out[1] = scale * theta * x[1].abs().powf(theta - 1.0);
            }
            FieldKind::Compressive { scale } => out[0] = *scale,
        }
    }

    fn invariant_axes(&self) -> u32 {
        match self.kind {
            FieldKind::Zero | FieldKind::Constant(_) => (1u32 << self.dim) - 1,
            FieldKind::ShearHolder { .. } => 0b01,
            _ => 0,
        }
    }

    fn near_singular(&self, x: &[f64], tol: f64) -> bool {
        match self.kind {
            FieldKind::ShearHolder { theta, .. } if theta < 1.0 => x[1].abs() <= tol,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{divergence_estimate, evaluate_field, field_jacobian, finite_difference_jacobian};
    use crate::quadrature::halton_box;

    #[test]
    fn evaluation_examples() {
        assert_eq!(evaluate_field(&CatalogField::zero(2), &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(evaluate_field(&CatalogField::rotation(), &[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(evaluate_field(&CatalogField::shear_holder(0.5), &[0.0, 4.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        assert!(evaluate_field(&CatalogField::rotation(), &[1.0]).is_err());
        assert!(CatalogField::new(FieldKind::Rotation { scale: 1.0 }, 3).is_err());
        assert!(CatalogField::new(FieldKind::ShearHolder { theta: 1.5, scale: 1.0 }, 2).is_err());
    }

    #[test]
    fn divergence_examples() {
        let h = 1e-4;
        for x in [[0.3, -1.2], [2.0, 5.0]] {
            assert!(divergence_estimate(&CatalogField::rotation(), &x, h).unwrap().abs() < 1e-9);
        }
        assert!(divergence_estimate(&CatalogField::shear_holder(0.5), &[1.0, 1.0], h).unwrap().abs() < 1e-6);
        let c = divergence_estimate(&CatalogField::compressive(), &[0.7, 0.1], h).unwrap();
        assert!((c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn divergence_free_entries_pass_sampled_check() {
        let pts = halton_box(100, 2, 5.0);
        for f in CatalogField::divergence_free_catalog() {
            for p in &pts {
                let div = divergence_estimate(&f, p, 1e-4).unwrap();
                assert!(div.abs() <= 1e-6, "{} div {div} at {p:?}", f.label());
            }
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let pts = halton_box(50, 2, 3.0);
        let mut fields = CatalogField::divergence_free_catalog();
        fields.push(CatalogField::compressive());
        for f in &fields {
            for p in &pts {
                if f.near_singular(p, 1e-2) {
                    continue;
                }
                let a = field_jacobian(f, p).unwrap();
                let fd = finite_difference_jacobian(f, p, 1e-5);
                let scale = 1.0 + a.frobenius();
                assert!(a.max_abs_diff(&fd) <= 1e-5 * scale, "{} at {p:?}", f.label());
            }
        }
    }
}
