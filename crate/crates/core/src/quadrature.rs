//! One-dimensional rules, tensor boxes and low-discrepancy points.

use crate::error::{config, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Midpoint,
    GaussLegendre,
}

/// Tensor-product quadrature on the box `center + [-half_width, half_width]^d`.
#[derive(Debug, Clone)]
pub struct QuadratureBox {
    pub dim: usize,
    pub center: Vec<f64>,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    pub rule: Rule,
    axis_nodes: Vec<f64>,
    axis_weights: Vec<f64>,
}

impl QuadratureBox {
    pub fn new(dim: usize, half_width: f64, nodes_per_axis: usize, rule: Rule) -> Result<Self> {
        Self::centered(vec![0.0; dim], half_width, nodes_per_axis, rule)
    }

    pub fn centered(center: Vec<f64>, half_width: f64, nodes_per_axis: usize, rule: Rule) -> Result<Self> {
        let dim = center.len();
        if dim == 0 || dim > crate::MAX_DIM {
            return config(format!("box dimension {dim} outside 1..={}", crate::MAX_DIM));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return config(format!("box half-width must be positive, got {half_width}"));
        }
        if nodes_per_axis == 0 {
            return config("box needs at least one node per axis");
        }
        let (axis_nodes, axis_weights) = match rule {
            Rule::Midpoint => {
                let h = 2.0 * half_width / nodes_per_axis as f64;
                let nodes = (0..nodes_per_axis)
                    .map(|i| -half_width + (i as f64 + 0.5) * h)
                    .collect();
                (nodes, vec![h; nodes_per_axis])
            }
            Rule::GaussLegendre => {
                let (x, w) = gauss_legendre(nodes_per_axis);
                (
                    x.iter().map(|v| v * half_width).collect(),
                    w.iter().map(|v| v * half_width).collect(),
                )
            }
        };
        Ok(Self { dim, center, half_width, nodes_per_axis, rule, axis_nodes, axis_weights })
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.nodes_per_axis as f64
    }

    /// Node `index` written into `x`; returns its weight.
    pub fn node(&self, index: usize, x: &mut [f64]) -> f64 {
        let m = self.nodes_per_axis;
        let mut rest = index;
        let mut w = 1.0;
        for k in 0..self.dim {
            let i = rest % m;
            rest /= m;
            x[k] = self.center[k] + self.axis_nodes[i];
            w *= self.axis_weights[i];
        }
        w
    }

    /// All nodes as (point, weight) pairs, in index order.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        (0..self.len())
            .map(|i| {
                let mut x = vec![0.0; self.dim];
                let w = self.node(i, &mut x);
                (x, w)
            })
            .collect()
    }

    pub fn weight_sum(&self) -> f64 {
        self.axis_weights.iter().sum::<f64>().powi(self.dim as i32)
    }

    pub fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        center
            .iter()
            .zip(&self.center)
            .all(|(c, b)| (c - b).abs() + radius <= self.half_width + 1e-12)
    }

    /// Points evenly spread over the box boundary, `per_edge` per face direction.
    pub fn boundary_points(&self, per_edge: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let n = per_edge.max(2);
        let coords: Vec<f64> = (0..n)
            .map(|i| -self.half_width + 2.0 * self.half_width * i as f64 / (n - 1) as f64)
            .collect();
        let face_count = n.pow(self.dim as u32 - 1);
        for axis in 0..self.dim {
            for side in [-1.0, 1.0] {
                for f in 0..face_count {
                    let mut rest = f;
                    let mut x = self.center.clone();
                    for k in 0..self.dim {
                        if k == axis {
                            x[k] += side * self.half_width;
                        } else {
                            x[k] += coords[rest % n];
                            rest /= n;
                        }
                    }
                    out.push(x);
                }
            }
        }
        out
    }
}

/// Halton sequence point `index` (1-based internally) in [0,1)^d.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    (0..dim)
        .map(|k| {
            let base = PRIMES[k];
            let mut i = index as u64 + 1;
            let mut f = 1.0;
            let mut r = 0.0;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// Halton points scaled into `[-half_width, half_width]^d`.
pub fn halton_box(count: usize, dim: usize, half_width: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| halton(i, dim).into_iter().map(|u| (2.0 * u - 1.0) * half_width).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for m in [3, 8, 9, 16] {
            let (x, w) = gauss_legendre(m);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * m) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-12, "m={m} deg={deg}");
            }
            for i in 0..m {
                assert_eq!(x[i], -x[m - 1 - i]);
            }
        }
    }

    #[test]
    fn box_weights_sum_to_volume() {
        for rule in [Rule::Midpoint, Rule::GaussLegendre] {
            let b = QuadratureBox::new(2, 3.0, 17, rule).unwrap();
            let total: f64 = b.nodes().iter().map(|(_, w)| w).sum();
            assert!((total - 36.0).abs() < 1e-10);
            assert!((b.weight_sum() - 36.0).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_points_lie_on_boundary() {
        let b = QuadratureBox::new(2, 2.0, 4, Rule::Midpoint).unwrap();
        let pts = b.boundary_points(5);
        assert_eq!(pts.len(), 20);
        for p in pts {
            let m = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!((m - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(QuadratureBox::new(2, 0.0, 4, Rule::Midpoint).is_err());
        assert!(QuadratureBox::new(0, 1.0, 4, Rule::Midpoint).is_err());
        assert!(QuadratureBox::new(2, 1.0, 0, Rule::Midpoint).is_err());
    }
}
