//! Convolution with the standard bump kernel `ρ_ε(z) = c ε^{-d} exp(-1/(1 - |z/ε|²))`.
//!
//! Lipschitz fields and data are integrated with moving tensor Gauss–Legendre
//! nodes, `Σ w b(x - z)`, which is smooth because the integrand is.
//! Non-Lipschitz fields use a normalized convolution over a fixed lattice,
//! `Σ ρ_ε(x - y_i) b(y_i) / Σ ρ_ε(x - y_i)`, which is smooth in `x` for any
//! `b`. In both schemes axes along which the field is invariant are
//! integrated out in advance.

use std::sync::{Arc, OnceLock};

use super::{ScalarDatum, Smoothness, VectorField, WideningCutoff};
use crate::error::{config, Result};
use crate::quadrature::gauss_legendre;
use crate::MAX_DIM;

/// `ε`, Gauss–Legendre nodes per axis for the moving scheme, lattice points
/// per length `ε` for the fixed-lattice scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub epsilon: f64,
    pub nodes_per_axis: usize,
    pub lattice_per_epsilon: usize,
}

impl MollifierSpec {
    pub const DEFAULT_NODES: usize = 9;
    pub const DEFAULT_LATTICE: usize = 16;
    const MAX_LATTICE: usize = 30;

    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, nodes_per_axis: Self::DEFAULT_NODES, lattice_per_epsilon: Self::DEFAULT_LATTICE }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return config(format!("mollifier width must be positive, got {}", self.epsilon));
        }
        if self.nodes_per_axis < 3 {
            return config(format!(
                "mollifier quadrature needs at least 3 nodes per axis, got {}",
                self.nodes_per_axis
            ));
        }
        if self.lattice_per_epsilon < 4 || self.lattice_per_epsilon > Self::MAX_LATTICE {
            return config(format!(
                "mollifier lattice needs 4 to {} points per width, got {}",
                Self::MAX_LATTICE,
                self.lattice_per_epsilon
            ));
        }
        Ok(())
    }

    /// Kernel value at a point of the unit ball (unnormalized).
    pub fn unit_profile(xi: &[f64]) -> f64 {
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r2)).exp()
        }
    }

    /// Quadrature nodes with weights already multiplied by the kernel.
    /// Axes in `invariant` are summed out in advance: for an integrand
    /// constant along them this yields the same sum as the full tensor rule.
    pub(crate) fn kernel_nodes(&self, dim: usize, invariant: u32) -> Vec<KernelNode> {
        let m = self.nodes_per_axis;
        let (xs, ws) = gauss_legendre(m);
        let eps = self.epsilon;
        let total = m.pow(dim as u32);
        let mut nodes: Vec<KernelNode> = Vec::new();
        let mut index_of = std::collections::HashMap::new();
        let mut mass = 0.0;
        for flat in 0..total {
            let mut rest = flat;
            let mut xi = [0.0; MAX_DIM];
            let mut w = 1.0;
            let mut key = 0usize;
            let mut stride = 1usize;
            for k in 0..dim {
                let i = rest % m;
                rest /= m;
                xi[k] = xs[i];
                w *= ws[i];
                if invariant & (1 << k) == 0 {
                    key += i * stride;
                }
                stride *= m;
            }
            let r2: f64 = xi[..dim].iter().map(|v| v * v).sum();
            if r2 >= 1.0 {
                continue;
            }
            let rho = Self::unit_profile(&xi[..dim]);
            let kw = w * rho;
            mass += kw;
            let dfac = -2.0 / ((1.0 - r2) * (1.0 - r2));
            let slot = *index_of.entry(key).or_insert_with(|| {
                let mut offset = [0.0; MAX_DIM];
                for k in 0..dim {
                    if invariant & (1 << k) == 0 {
                        offset[k] = eps * xi[k];
                    }
                }
                nodes.push(KernelNode { offset, weight: 0.0, grad_weight: [0.0; MAX_DIM] });
                nodes.len() - 1
            });
            nodes[slot].weight += kw;
            for k in 0..dim {
                nodes[slot].grad_weight[k] += kw * dfac * xi[k] / eps;
            }
        }
        for n in &mut nodes {
            n.weight /= mass;
            n.grad_weight.iter_mut().for_each(|g| *g /= mass);
        }
        nodes
    }
}

/// Marginal of the unit bump over `k` integrated-out axes, as a function of
/// `q = |s|²` in the remaining coordinates:
/// `f_k(q) = ∫_{|t|² < 1-q} exp(-1/(1 - q - |t|²)) dt`.
/// Tabulated with values and derivatives for cubic Hermite interpolation.
#[derive(Debug)]
struct Marginal {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const MARGINAL_INTERVALS: usize = 4096;

impl Marginal {
    fn build(k: usize) -> Self {
        let (xs, ws) = gauss_legendre(64);
        let sphere = if k == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
        let mut values = Vec::with_capacity(MARGINAL_INTERVALS + 1);
        let mut slopes = Vec::with_capacity(MARGINAL_INTERVALS + 1);
        for i in 0..=MARGINAL_INTERVALS {
            let q = i as f64 / MARGINAL_INTERVALS as f64;
            let top = (1.0 - q).max(0.0).sqrt();
            let (mut v, mut dv) = (0.0, 0.0);
            for (x, w) in xs.iter().zip(&ws) {
                let tau = 0.5 * top * (x + 1.0);
                let r = 1.0 - q - tau * tau;
                if r <= 0.0 {
                    continue;
                }
                let e = (-1.0 / r).exp() * tau.powi(k as i32 - 1) * 0.5 * top * w;
                v += e;
                dv -= e / (r * r);
            }
            values.push(sphere * v);
            slopes.push(sphere * dv);
        }
        Self { values, slopes }
    }

    fn get(k: usize) -> &'static Marginal {
        static TABLES: [OnceLock<Marginal>; 2] = [OnceLock::new(), OnceLock::new()];
        TABLES[k - 1].get_or_init(|| Marginal::build(k))
    }

    /// `(f(q), f'(q))`
    #[inline]
    fn eval(&self, q: f64) -> (f64, f64) {
        if q >= 1.0 {
            return (0.0, 0.0);
        }
        let n = MARGINAL_INTERVALS as f64;
        let x = q * n;
        let i = (x as usize).min(MARGINAL_INTERVALS - 1);
        let t = x - i as f64;
        let h = 1.0 / n;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        let dv = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1) / h;
        (v, dv)
    }
}

/// Kernel profile after integrating out `collapsed` axes: `(f(q), f'(q))`.
#[inline]
fn collapsed_profile(collapsed: usize, q: f64) -> (f64, f64) {
    if q >= 1.0 {
        return (0.0, 0.0);
    }
    match collapsed {
        0 => {
            let r = 1.0 - q;
            let v = (-1.0 / r).exp();
            (v, -v / (r * r))
        }
        k => Marginal::get(k).eval(q),
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelNode {
    pub offset: [f64; MAX_DIM],
    /// quadrature weight times normalized `ρ_ε`
    pub weight: f64,
    /// quadrature weight times `∂_k ρ_ε`
    pub grad_weight: [f64; MAX_DIM],
}

#[derive(Debug, Clone)]
enum Scheme {
    Moving(Vec<KernelNode>),
    Lattice { spacing: f64, active: Vec<usize> },
}

/// `b^δ = b * ρ_δ`.
#[derive(Debug, Clone)]
pub struct MollifiedField {
    inner: Arc<dyn VectorField>,
    spec: MollifierSpec,
    scheme: Scheme,
    label: String,
    line: Option<LineCache>,
}

/// Inner values at the lattice points of a single active axis, for
/// `|coordinate| ≤ LINE_CACHE_EXTENT`.
#[derive(Debug, Clone)]
struct LineCache {
    first: i64,
    values: Vec<f64>,
}

const LINE_CACHE_EXTENT: f64 = 64.0;

impl MollifiedField {
    pub fn inner(&self) -> &Arc<dyn VectorField> {
        &self.inner
    }

    pub fn spec(&self) -> MollifierSpec {
        self.spec
    }

    /// Whether the fixed-lattice scheme is in use.
    pub fn uses_lattice(&self) -> bool {
        matches!(self.scheme, Scheme::Lattice { .. })
    }

    /// Lattice sums `Σρ`, `Σρ b`, `Σ∇ρ`, `Σ∇ρ b` at `x`.
    fn lattice_sums(&self, x: &[f64], spacing: f64, active: &[usize], want_grad: bool) -> LatticeSums {
        let d = self.dim();
        let eps = self.spec.epsilon;
        let collapsed = d - active.len();
        let mut lo = [0i64; MAX_DIM];
        let mut len = [1usize; MAX_DIM];
        let mut total = 1usize;
        for &k in active {
            let a = ((x[k] - eps) / spacing).floor() as i64 + 1;
            let b = ((x[k] + eps) / spacing).ceil() as i64 - 1;
            lo[k] = a;
            len[k] = (b - a + 1).max(0) as usize;
            total *= len[k];
        }
        let mut s = LatticeSums::default();
        let mut y = [0.0; MAX_DIM];
        y[..d].copy_from_slice(&x[..d]);
        let mut b = [0.0; MAX_DIM];
        let inv_eps2 = 1.0 / (eps * eps);
        for flat in 0..total {
            let mut rest = flat;
            let mut q = 0.0;
            for &k in active {
                let i = rest % len[k];
                rest /= len[k];
                y[k] = (lo[k] + i as i64) as f64 * spacing;
                q += (x[k] - y[k]) * (x[k] - y[k]) * inv_eps2;
            }
            let (w, dw) = collapsed_profile(collapsed, q);
            if w == 0.0 {
                continue;
            }
            let cached = self.line.as_ref().and_then(|c| {
                let i = lo[active[0]] + flat as i64 - c.first;
                (i >= 0 && ((i as usize + 1) * d) <= c.values.len()).then(|| &c.values[i as usize * d..(i as usize + 1) * d])
            });
            match cached {
                Some(v) => b[..d].copy_from_slice(v),
                None => self.inner.eval_into(&y[..d], &mut b[..d]),
            }
            s.mass += w;
            for i in 0..d {
                s.value[i] += w * b[i];
            }
            if want_grad {
                for &k in active {
                    let g = dw * 2.0 * (x[k] - y[k]) * inv_eps2;
                    s.mass_grad[k] += g;
                    for i in 0..d {
                        s.value_grad[i * d + k] += g * b[i];
                    }
                }
            }
        }
        s
    }
}

#[derive(Default)]
struct LatticeSums {
    mass: f64,
    value: [f64; MAX_DIM],
    mass_grad: [f64; MAX_DIM],
    value_grad: [f64; MAX_DIM * MAX_DIM],
}

pub fn mollify_field(field: Arc<dyn VectorField>, spec: MollifierSpec) -> Result<MollifiedField> {
    spec.validate()?;
    let d = field.dim();
    let invariant = field.invariant_axes();
    let scheme = if field.lipschitz() {
        Scheme::Moving(spec.kernel_nodes(d, invariant))
    } else {
        let spacing = spec.epsilon / spec.lattice_per_epsilon as f64;
        Scheme::Lattice { spacing, active: (0..d).filter(|k| invariant & (1 << k) == 0).collect() }
    };
    let line = match &scheme {
        Scheme::Lattice { spacing, active } if active.len() == 1 => {
            let count = (LINE_CACHE_EXTENT / spacing).ceil() as i64;
            let mut y = vec![0.0; d];
            let mut values = Vec::with_capacity((2 * count as usize + 1) * d);
            let mut b = vec![0.0; d];
            for i in -count..=count {
                y[active[0]] = i as f64 * spacing;
                field.eval_into(&y, &mut b);
                values.extend_from_slice(&b);
            }
            Some(LineCache { first: -count, values })
        }
        _ => None,
    };
    let label = format!("mollified({}, eps={})", field.label(), spec.epsilon);
    Ok(MollifiedField { inner: field, spec, scheme, label, line })
}

impl VectorField for MollifiedField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn holder_exponent(&self) -> f64 {
        self.inner.holder_exponent()
    }

    fn lipschitz(&self) -> bool {
        true
    }

    fn divergence_free(&self) -> bool {
        self.inner.divergence_free()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        match &self.scheme {
            Scheme::Moving(nodes) => {
                let mut acc = [0.0; MAX_DIM];
                let mut y = [0.0; MAX_DIM];
                let mut b = [0.0; MAX_DIM];
                for n in nodes {
                    for k in 0..d {
                        y[k] = x[k] - n.offset[k];
                    }
                    self.inner.eval_into(&y[..d], &mut b[..d]);
                    for k in 0..d {
                        acc[k] += n.weight * b[k];
                    }
                }
                out[..d].copy_from_slice(&acc[..d]);
            }
            Scheme::Lattice { spacing, active } => {
                let s = self.lattice_sums(x, *spacing, active, false);
                for i in 0..d {
                    out[i] = s.value[i] / s.mass;
                }
            }
        }
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    /// Exact derivative of [`Self::eval_into`] where available: the node sum
    /// of `Db` for inner fields with a Jacobian, the quotient rule on the
    /// lattice, and the kernel-gradient sum otherwise.
    fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut acc = [0.0; MAX_DIM * MAX_DIM];
        let mut y = [0.0; MAX_DIM];
        match &self.scheme {
            Scheme::Moving(nodes) if self.inner.has_jacobian() => {
                let mut j = [0.0; MAX_DIM * MAX_DIM];
                for n in nodes {
                    for k in 0..d {
                        y[k] = x[k] - n.offset[k];
                    }
                    self.inner.jacobian_into(&y[..d], &mut j[..d * d]);
                    for k in 0..d * d {
                        acc[k] += n.weight * j[k];
                    }
                }
            }
            Scheme::Moving(nodes) => {
                let mut b = [0.0; MAX_DIM];
                for n in nodes {
                    for k in 0..d {
                        y[k] = x[k] - n.offset[k];
                    }
                    self.inner.eval_into(&y[..d], &mut b[..d]);
                    for i in 0..d {
                        for jj in 0..d {
                            acc[i * d + jj] += b[i] * n.grad_weight[jj];
                        }
                    }
                }
            }
            Scheme::Lattice { spacing, active } => {
                let s = self.lattice_sums(x, *spacing, active, true);
                for i in 0..d {
                    for k in 0..d {
                        acc[i * d + k] = (s.value_grad[i * d + k] * s.mass - s.value[i] * s.mass_grad[k]) / (s.mass * s.mass);
                    }
                }
            }
        }
        out[..d * d].copy_from_slice(&acc[..d * d]);
    }

    fn eval_with_jacobian(&self, x: &[f64], out: &mut [f64], jac: &mut [f64]) {
        match &self.scheme {
            Scheme::Lattice { spacing, active } => {
                let d = self.dim();
                let s = self.lattice_sums(x, *spacing, active, true);
                for i in 0..d {
                    out[i] = s.value[i] / s.mass;
                    for k in 0..d {
                        jac[i * d + k] = (s.value_grad[i * d + k] * s.mass - s.value[i] * s.mass_grad[k]) / (s.mass * s.mass);
                    }
                }
            }
            Scheme::Moving(_) => {
                self.eval_into(x, out);
                self.jacobian_into(x, jac);
            }
        }
    }

    fn invariant_axes(&self) -> u32 {
        self.inner.invariant_axes()
    }
}

/// `u₀^ε(x) = η(ε x) [u₀ * ρ_ε](x)`.
#[derive(Debug, Clone)]
pub struct MollifiedDatum {
    inner: Arc<dyn ScalarDatum>,
    cutoff: WideningCutoff,
    nodes: Vec<KernelNode>,
    label: String,
}

pub fn mollify_datum(u0: Arc<dyn ScalarDatum>, spec: MollifierSpec) -> Result<MollifiedDatum> {
    spec.validate()?;
    let nodes = spec.kernel_nodes(u0.dim(), 0);
    let label = format!("mollified({}, eps={})", u0.label(), spec.epsilon);
    Ok(MollifiedDatum { inner: u0, cutoff: WideningCutoff { epsilon: spec.epsilon }, nodes, label })
}

impl MollifiedDatum {
    /// `[u₀ * ρ_ε](x)` without the cutoff.
    pub fn convolved(&self, x: &[f64]) -> f64 {
        let d = self.inner.dim();
        let mut y = [0.0; MAX_DIM];
        let mut acc = 0.0;
        for n in &self.nodes {
            for k in 0..d {
                y[k] = x[k] - n.offset[k];
            }
            acc += n.weight * self.inner.value(&y[..d]);
        }
        acc
    }
}

impl ScalarDatum for MollifiedDatum {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value(&self, x: &[f64]) -> f64 {
        let eta = self.cutoff.value(x);
        if eta == 0.0 {
            return 0.0;
        }
        eta * self.convolved(x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut eta_grad = [0.0; MAX_DIM];
        let eta = self.cutoff.value_and_gradient(x, &mut eta_grad[..d]);
        if eta == 0.0 {
            out[..d].fill(0.0);
            return;
        }
        let mut y = [0.0; MAX_DIM];
        let mut g = [0.0; MAX_DIM];
        let mut conv = 0.0;
        let mut conv_grad = [0.0; MAX_DIM];
        for n in &self.nodes {
            for k in 0..d {
                y[k] = x[k] - n.offset[k];
            }
            conv += n.weight * self.inner.value(&y[..d]);
            self.inner.gradient_into(&y[..d], &mut g[..d]);
            for k in 0..d {
                conv_grad[k] += n.weight * g[k];
            }
        }
        for k in 0..d {
            out[k] = eta_grad[k] * conv + eta * conv_grad[k];
        }
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.cutoff.support_radius())
    }

    fn effective_radius(&self) -> f64 {
        let spread = self.inner.effective_radius() + self.cutoff.epsilon;
        spread.min(self.cutoff.support_radius())
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::CompactlySmooth
    }
}
