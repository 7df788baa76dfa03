//! Euler–Maruyama integration of the forward flow `X_{s,t}`, the backward
//! flow `Y_{s,t}` and their Jacobians on a fixed Brownian path.

mod stats;

pub use stats::{default_x_panel, flow_convergence_stats, FlowStats, FlowStatsOptions, LevelStats};

use crate::brownian::BrownianPath;
use crate::error::{config, Error, Result};
use crate::field::VectorField;
use crate::linalg::{dist, Mat};
use crate::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JacobianMethod {
    /// Co-integrate `J_{k+1} = (I ± Db·dt) J_k`.
    Variational,
    /// Central differences of the flow map, all perturbed trajectories on one path.
    Bump,
}

impl JacobianMethod {
    /// Variational for Lipschitz fields with an analytic Jacobian, bump otherwise.
    pub fn default_for(field: &dyn VectorField) -> Self {
        if field.lipschitz() && field.has_jacobian() {
            JacobianMethod::Variational
        } else {
            JacobianMethod::Bump
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub terminal: Vec<f64>,
    pub jacobian: Mat,
    /// States at grid nodes `s..=t` in increasing node order.
    pub trajectory: Option<Vec<Vec<f64>>>,
    pub checksum: u64,
}

/// Volume-preservation tolerance for a step size.
pub fn tol_jac(dt: f64) -> f64 {
    (5.0 * dt).max(5e-3)
}

/// Bump displacement at `x`.
pub fn h_bump(x: &[f64]) -> f64 {
    f64::EPSILON.sqrt() * (1.0 + crate::linalg::norm(x))
}

/// `Cof(J)^T`, which equals `det(J)·J^{-1}` when `J` is invertible.
pub fn cofactor_inverse(j: &Mat) -> Mat {
    j.cofactor_transpose()
}

fn check_args(field: &dyn VectorField, path: &BrownianPath, s: usize, t: usize, x: &[f64]) -> Result<()> {
    let d = field.dim();
    if d == 0 || d > MAX_DIM {
        return config(format!("dimension {d} unsupported"));
    }
    if path.dim() != d {
        return config(format!("path dimension {} does not match field dimension {d}", path.dim()));
    }
    if x.len() != d {
        return config(format!("point has dimension {}, expected {d}", x.len()));
    }
    if s > t || t > path.grid().steps() {
        return config(format!("indices s={s}, t={t} invalid for {} steps", path.grid().steps()));
    }
    Ok(())
}

/// Core integrator. Calls `visit(node, state, jacobian)` at every node from the
/// starting node onward (`s..=t` forward, `t..=s` descending backward). The
/// Jacobian argument is `None` when `method` is `None`.
pub(crate) fn march<V>(
    field: &dyn VectorField,
    path: &BrownianPath,
    s: usize,
    t: usize,
    x: &[f64],
    direction: Direction,
    method: Option<JacobianMethod>,
    mut visit: V,
) -> Result<([f64; MAX_DIM], Mat)>
where
    V: FnMut(usize, &[f64], Option<&Mat>),
{
    let d = field.dim();
    let dt = path.grid().dt();
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let steps = t - s;
    let node_at = |k: usize| match direction {
        Direction::Forward => s + k,
        Direction::Backward => t - k,
    };
    let increment_at = |k: usize| match direction {
        Direction::Forward => path.increment_unchecked(s + k),
        Direction::Backward => path.increment_unchecked(t - k - 1),
    };
    let fail = |k: usize| Error::Numerics { context: format!("in {direction:?} flow at step {k} from node {}", node_at(0)) };

    match method {
        Some(JacobianMethod::Variational) => {
            if !field.has_jacobian() {
                return config(format!("variational Jacobian requires an analytic Jacobian for {}", field.label()));
            }
            let mut y = [0.0; MAX_DIM];
            y[..d].copy_from_slice(x);
            let mut j = Mat::identity(d);
            let mut b = [0.0; MAX_DIM];
            let mut db = [0.0; MAX_DIM * MAX_DIM];
            visit(node_at(0), &y[..d], Some(&j));
            let sdt = sign * dt;
            for k in 0..steps {
                field.eval_with_jacobian(&y[..d], &mut b[..d], &mut db[..d * d]);
                // J ← (I + sign·dt·Db) J
                let prev = j;
                let mut total = 0.0;
                for r in 0..d {
                    for c in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += db[r * d + m] * prev[(m, c)];
                        }
                        let v = prev[(r, c)] + sdt * s;
                        j[(r, c)] = v;
                        total += v;
                    }
                }
                let inc = increment_at(k);
                for r in 0..d {
                    y[r] += sign * (b[r] * dt + inc[r]);
                    total += y[r];
                }
                if !total.is_finite() && (!y[..d].iter().all(|v| v.is_finite()) || !j.is_finite()) {
                    return Err(fail(k));
                }
                visit(node_at(k + 1), &y[..d], Some(&j));
            }
            Ok((y, j))
        }
        Some(JacobianMethod::Bump) => {
            let h = h_bump(x);
            let count = 2 * d + 1;
            let mut ys = [[0.0; MAX_DIM]; 2 * MAX_DIM + 1];
            for (m, y) in ys.iter_mut().take(count).enumerate() {
                y[..d].copy_from_slice(x);
                if m > 0 {
                    let axis = (m - 1) / 2;
                    y[axis] += if m % 2 == 1 { h } else { -h };
                }
            }
            let jac = |ys: &[[f64; MAX_DIM]]| {
                let mut j = Mat::zeros(d);
                for c in 0..d {
                    for r in 0..d {
                        j[(r, c)] = (ys[2 * c + 1][r] - ys[2 * c + 2][r]) / (2.0 * h);
                    }
                }
                j
            };
            let mut j = jac(&ys);
            visit(node_at(0), &ys[0][..d], Some(&j));
            let mut b = [0.0; MAX_DIM];
            for k in 0..steps {
                let inc = increment_at(k);
                for y in ys.iter_mut().take(count) {
                    field.eval_into(&y[..d], &mut b[..d]);
                    for r in 0..d {
                        y[r] += sign * (b[r] * dt + inc[r]);
                    }
                }
                j = jac(&ys);
                if !ys[0][..d].iter().all(|v| v.is_finite()) || !j.is_finite() {
                    return Err(fail(k));
                }
                visit(node_at(k + 1), &ys[0][..d], Some(&j));
            }
            Ok((ys[0], j))
        }
        None => {
            let mut y = [0.0; MAX_DIM];
            y[..d].copy_from_slice(x);
            let mut b = [0.0; MAX_DIM];
            visit(node_at(0), &y[..d], None);
            for k in 0..steps {
                field.eval_into(&y[..d], &mut b[..d]);
                let inc = increment_at(k);
                for r in 0..d {
                    y[r] += sign * (b[r] * dt + inc[r]);
                }
                if !y[..d].iter().all(|v| v.is_finite()) {
                    return Err(fail(k));
                }
                visit(node_at(k + 1), &y[..d], None);
            }
            Ok((y, Mat::identity(d)))
        }
    }
}

fn run(
    field: &dyn VectorField,
    path: &BrownianPath,
    s: usize,
    t: usize,
    x: &[f64],
    direction: Direction,
    method: JacobianMethod,
    store_trajectory: bool,
) -> Result<FlowResult> {
    check_args(field, path, s, t, x)?;
    let d = field.dim();
    let mut trajectory = store_trajectory.then(|| vec![Vec::new(); t - s + 1]);
    let (y, jacobian) = march(field, path, s, t, x, direction, Some(method), |node, state, _| {
        if let Some(tr) = trajectory.as_mut() {
            tr[node - s] = state.to_vec();
        }
    })?;
    Ok(FlowResult { terminal: y[..d].to_vec(), jacobian, trajectory, checksum: path.checksum(s, t) })
}

/// `X_{s,t}(x)` with the field's default Jacobian method.
pub fn forward_flow(
    field: &dyn VectorField,
    path: &BrownianPath,
    s_index: usize,
    t_index: usize,
    x: &[f64],
    store_trajectory: bool,
) -> Result<FlowResult> {
    run(field, path, s_index, t_index, x, Direction::Forward, JacobianMethod::default_for(field), store_trajectory)
}

/// `X_{s,t}(x)` with an explicit Jacobian method.
pub fn forward_flow_with(
    field: &dyn VectorField,
    path: &BrownianPath,
    s_index: usize,
    t_index: usize,
    x: &[f64],
    store_trajectory: bool,
    method: JacobianMethod,
) -> Result<FlowResult> {
    run(field, path, s_index, t_index, x, Direction::Forward, method, store_trajectory)
}

/// `Y_{s,t}(x)`, marching from node `t` down to node `s` with drift `−b` and
/// reversed increments.
pub fn backward_flow(
    field: &dyn VectorField,
    path: &BrownianPath,
    s_index: usize,
    t_index: usize,
    x: &[f64],
) -> Result<FlowResult> {
    run(field, path, s_index, t_index, x, Direction::Backward, JacobianMethod::default_for(field), false)
}

pub fn backward_flow_with(
    field: &dyn VectorField,
    path: &BrownianPath,
    s_index: usize,
    t_index: usize,
    x: &[f64],
    method: JacobianMethod,
) -> Result<FlowResult> {
    run(field, path, s_index, t_index, x, Direction::Backward, method, false)
}

/// Jacobian of the forward flow map `x ↦ X_{s,t}(x)`.
pub fn jacobian_flow(
    field: &dyn VectorField,
    path: &BrownianPath,
    s_index: usize,
    t_index: usize,
    x: &[f64],
    method: JacobianMethod,
) -> Result<Mat> {
    Ok(forward_flow_with(field, path, s_index, t_index, x, false, method)?.jacobian)
}

/// `|Y_{0,T}(X_{0,T}(x)) − x|` on the full path.
pub fn roundtrip_error(field: &dyn VectorField, path: &BrownianPath, x: &[f64]) -> Result<f64> {
    let n = path.grid().steps();
    check_args(field, path, 0, n, x)?;
    let (fx, _) = march(field, path, 0, n, x, Direction::Forward, None, |_, _, _| {})?;
    let d = field.dim();
    let (y, _) = march(field, path, 0, n, &fx[..d], Direction::Backward, None, |_, _, _| {})?;
    Ok(dist(&y[..d], x))
}

/// Debug cross-check: solves `X_{s,t}(y) = x` by Newton iteration started at
/// the backward-flow value.
pub fn newton_inverse(
    field: &dyn VectorField,
    path: &BrownianPath,
    s_index: usize,
    t_index: usize,
    x: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let method = JacobianMethod::default_for(field);
    let mut y = backward_flow_with(field, path, s_index, t_index, x, method)?.terminal;
    let d = x.len();
    for _ in 0..max_iter {
        let f = forward_flow_with(field, path, s_index, t_index, &y, false, method)?;
        let r: Vec<f64> = (0..d).map(|i| f.terminal[i] - x[i]).collect();
        if crate::linalg::norm(&r) <= tol * (1.0 + crate::linalg::norm(x)) {
            return Ok(y);
        }
        let det = f.jacobian.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Numerics { context: "singular Jacobian in Newton inversion".into() });
        }
        let mut delta = [0.0; MAX_DIM];
        cofactor_inverse(&f.jacobian).apply(&r, &mut delta[..d]);
        for i in 0..d {
            y[i] -= delta[i] / det;
        }
    }
    Err(Error::Numerics { context: format!("Newton inversion did not converge in {max_iter} iterations") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::{sample_path, TimeGrid};
    use crate::field::CatalogField;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn drift_free_flow_is_shifted_noise() {
        let f = CatalogField::zero(2);
        let p = sample_path(1, 0, 2, grid(64));
        let x = [0.3, -0.7];
        let r = forward_flow(&f, &p, 8, 40, &x, true).unwrap();
        for i in 0..2 {
            let db = p.position(40).unwrap()[i] - p.position(8).unwrap()[i];
            assert!((r.terminal[i] - (x[i] + db)).abs() < 1e-14);
        }
        assert_eq!(r.jacobian, Mat::identity(2));
        assert_eq!(r.trajectory.as_ref().unwrap().len(), 33);
        assert_eq!(r.checksum, p.checksum(8, 40));
        let b = backward_flow(&f, &p, 8, 40, &x).unwrap();
        for i in 0..2 {
            let db = p.position(40).unwrap()[i] - p.position(8).unwrap()[i];
            assert!((b.terminal[i] - (x[i] - db)).abs() < 1e-14);
        }
        let v = jacobian_flow(&f, &p, 0, 64, &x, JacobianMethod::Variational).unwrap();
        let bump = jacobian_flow(&f, &p, 0, 64, &x, JacobianMethod::Bump).unwrap();
        assert_eq!(v, Mat::identity(2));
        assert!(bump.max_abs_diff(&Mat::identity(2)) < 1e-7);
    }

    #[test]
    fn argument_errors() {
        let f = CatalogField::rotation();
        let p = sample_path(1, 0, 2, grid(8));
        assert!(matches!(forward_flow(&f, &p, 4, 2, &[0.0, 0.0], false), Err(Error::Config(_))));
        assert!(matches!(forward_flow(&f, &p, 0, 9, &[0.0, 0.0], false), Err(Error::Config(_))));
        assert!(matches!(forward_flow(&f, &p, 0, 8, &[0.0], false), Err(Error::Config(_))));
        let p1 = sample_path(1, 0, 1, grid(8));
        assert!(matches!(forward_flow(&f, &p1, 0, 8, &[0.0, 0.0], false), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_state_reports_step() {
        let f = CatalogField::new(crate::field::FieldKind::Strain { scale: 1e308 }, 2).unwrap();
        let p = BrownianPath::zero(2, grid(8));
        match forward_flow_with(&f, &p, 0, 8, &[10.0, 1.0], false, JacobianMethod::Variational) {
            Err(Error::Numerics { context }) => assert!(context.contains("step")),
            other => panic!("expected numerics error, got {other:?}"),
        }
    }

    #[test]
    fn default_method_selection() {
        assert_eq!(JacobianMethod::default_for(&CatalogField::rotation()), JacobianMethod::Variational);
        assert_eq!(JacobianMethod::default_for(&CatalogField::shear_holder(0.3)), JacobianMethod::Bump);
    }

    #[test]
    fn cofactor_examples() {
        assert_eq!(cofactor_inverse(&Mat::identity(2)), Mat::identity(2));
        let j = Mat::from_rows(&[&[1.0, 2.5], &[0.0, 1.0]]);
        assert_eq!(cofactor_inverse(&j), Mat::from_rows(&[&[1.0, -2.5], &[0.0, 1.0]]));
    }

    #[test]
    fn tolerances() {
        assert_eq!(tol_jac(1e-3), 5e-3);
        assert_eq!(tol_jac(1e-2), 5e-2);
        assert!((h_bump(&[3.0, 4.0]) - 6.0 * f64::EPSILON.sqrt()).abs() < 1e-20);
    }
}
