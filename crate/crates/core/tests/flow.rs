use std::sync::Arc;

use transport_core::brownian::{sample_path, BrownianPath, PathSource, TimeGrid};
use transport_core::field::{mollify_field, CatalogField, MollifierSpec, VectorField};
use transport_core::flow::{
    backward_flow, cofactor_inverse, flow_convergence_stats, forward_flow, forward_flow_with, h_bump, jacobian_flow,
    newton_inverse, roundtrip_error, tol_jac, Direction, FlowStatsOptions, JacobianMethod,
};
use transport_core::linalg::{dist, Mat};
use transport_core::stats::fit_slope;

fn rot(t: f64) -> Mat {
    Mat::from_rows(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]])
}

#[test]
fn rotation_matches_closed_form_linear_sde() {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let path = sample_path(42, 0, 2, grid);
    let f = CatalogField::rotation();
    let x = [1.0, 0.0];
    let r = forward_flow(&f, &path, 0, 1024, &x, false).unwrap();
    // e^{At} x + Σ e^{A(t - t_k)} ΔB_k
    let mut oracle = [0.0; 2];
    rot(1.0).apply(&x, &mut oracle);
    for k in 0..1024 {
        let mut v = [0.0; 2];
        rot(1.0 - grid.time(k)).apply(path.increment(k).unwrap(), &mut v);
        oracle[0] += v[0];
        oracle[1] += v[1];
    }
    assert!(dist(&r.terminal, &oracle) <= 5e-3, "{:?} vs {oracle:?}", r.terminal);
    assert!(r.jacobian.max_abs_diff(&rot(1.0)) <= 5e-3);
    assert!((r.jacobian.det() - 1.0).abs() <= 5e-3);
}

#[test]
fn shear_zero_noise_flow_and_jacobian() {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let path = BrownianPath::zero(2, grid);
    for theta in [0.3, 0.5] {
        let f = CatalogField::shear_holder(theta);
        for t in [256, 1024] {
            let time = grid.time(t);
            let r = forward_flow(&f, &path, 0, t, &[0.0, 2.0], false).unwrap();
            assert!((r.terminal[0] - time * 2f64.powf(theta)).abs() <= 1e-6);
            assert!((r.terminal[1] - 2.0).abs() <= 1e-6);
            let j = jacobian_flow(&f, &path, 0, t, &[0.0, 2.0], JacobianMethod::Bump).unwrap();
            let oracle = Mat::from_rows(&[&[1.0, time * theta * 2f64.powf(theta - 1.0)], &[0.0, 1.0]]);
            assert!(j.max_abs_diff(&oracle) <= 1e-4, "{j:?} vs {oracle:?}");
        }
    }
}

#[test]
fn rotation_jacobian_is_rotation_matrix() {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let f = CatalogField::rotation();
    for s in 0..4 {
        let path = sample_path(5, s, 2, grid);
        for method in [JacobianMethod::Variational, JacobianMethod::Bump] {
            let j = jacobian_flow(&f, &path, 0, 1024, &[0.3, -1.2], method).unwrap();
            assert!(j.max_abs_diff(&rot(1.0)) <= 5e-3);
            assert!((j.det() - 1.0).abs() <= 5e-3);
        }
    }
}

#[test]
fn variational_requires_analytic_jacobian() {
    #[derive(Debug)]
    struct Opaque;
    impl VectorField for Opaque {
        fn dim(&self) -> usize {
            2
        }
        fn label(&self) -> &str {
            "opaque"
        }
        fn holder_exponent(&self) -> f64 {
            1.0
        }
        fn divergence_free(&self) -> bool {
            true
        }
        fn eval_into(&self, x: &[f64], out: &mut [f64]) {
            out[0] = -x[1];
            out[1] = x[0];
        }
    }
    let path = BrownianPath::zero(2, TimeGrid::new(1.0, 8).unwrap());
    let err = jacobian_flow(&Opaque, &path, 0, 8, &[1.0, 0.0], JacobianMethod::Variational).unwrap_err();
    assert!(matches!(err, transport_core::Error::Config(_)));
    assert_eq!(JacobianMethod::default_for(&Opaque), JacobianMethod::Bump);
    assert!(jacobian_flow(&Opaque, &path, 0, 8, &[1.0, 0.0], JacobianMethod::Bump).is_ok());
}

#[test]
fn methods_agree_for_smooth_fields() {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let fields = [CatalogField::rotation(), CatalogField::strain(), CatalogField::cellular(), CatalogField::constant(vec![0.5, -0.25])];
    for f in &fields {
        for s in 0..3 {
            let path = sample_path(8, s, 2, grid);
            for x in [[0.2, 0.4], [-1.5, 0.9]] {
                let v = jacobian_flow(f, &path, 0, 256, &x, JacobianMethod::Variational).unwrap();
                let b = jacobian_flow(f, &path, 0, 256, &x, JacobianMethod::Bump).unwrap();
                let tol = (1e-4f64).max(10.0 * h_bump(&x));
                assert!(v.max_abs_diff(&b) <= tol * (1.0 + v.frobenius()), "{:?}: {v:?} vs {b:?}", f);
            }
        }
    }
}

#[test]
fn volume_preservation_for_divergence_free_catalog() {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let tol = tol_jac(grid.dt());
    for f in CatalogField::divergence_free_catalog() {
        let mut acc = 0.0;
        for s in 0..64 {
            let path = sample_path(77, s, 2, grid);
            let r = forward_flow(&f, &path, 0, 1024, &[0.7, -0.4], false).unwrap();
            assert!(r.jacobian.det() > 0.0);
            acc += (r.jacobian.det() - 1.0).abs();
        }
        let mean = acc / 64.0;
        assert!(mean <= 5e-3 && mean <= tol, "{}: {mean}", f.label());
    }
}

#[test]
fn cofactor_identity_on_computed_jacobians() {
    let grid = TimeGrid::new(1.0, 128).unwrap();
    for f in CatalogField::divergence_free_catalog() {
        let path = sample_path(3, 0, 2, grid);
        let j = forward_flow(&f, &path, 0, 128, &[0.5, 0.5], false).unwrap().jacobian;
        let prod = cofactor_inverse(&j).mul(&j);
        assert!(prod.max_abs_diff(&Mat::identity(2).scale(j.det())) <= 1e-10 * (1.0 + j.frobenius().powi(2)));
    }
}

#[test]
fn drift_free_backward_flow() {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let path = sample_path(9, 1, 2, grid);
    let r = backward_flow(&CatalogField::zero(2), &path, 10, 50, &[1.0, 1.0]).unwrap();
    for i in 0..2 {
        let db = path.position(50).unwrap()[i] - path.position(10).unwrap()[i];
        assert!((r.terminal[i] - (1.0 - db)).abs() < 1e-14);
    }
    assert_eq!(r.jacobian, Mat::identity(2));
}

#[test]
fn zero_noise_rotation_roundtrip_has_exact_euler_defect() {
    // Forward and backward Euler steps on a rotation compose to (1 + dt²) I,
    // so the roundtrip defect is ((1 + dt²)^n - 1)|x|.
    let grid = TimeGrid::new(1.0, 1 << 13).unwrap();
    let path = BrownianPath::zero(2, grid);
    let x = [1.0, 0.5];
    let err = roundtrip_error(&CatalogField::rotation(), &path, &x).unwrap();
    let n = grid.steps() as f64;
    let oracle = ((1.0 + grid.dt() * grid.dt()).powf(n) - 1.0) * transport_core::linalg::norm(&x);
    assert!((err - oracle).abs() <= 1e-12, "{err} vs {oracle}");
    // backward flow is the reverse rotation up to the same defect
    let y = backward_flow(&CatalogField::rotation(), &path, 0, grid.steps(), &x).unwrap().terminal;
    let mut reverse = [0.0; 2];
    rot(-1.0).apply(&x, &mut reverse);
    assert!(dist(&y, &reverse) <= 1e-4);
}

#[test]
fn roundtrip_converges_at_first_order_for_smooth_fields() {
    let base = TimeGrid::new(1.0, 64).unwrap();
    let fields = [CatalogField::rotation(), CatalogField::strain(), CatalogField::cellular()];
    for f in &fields {
        let mut errors = vec![0.0; 5];
        for s in 0..16 {
            let mut path = sample_path(123, s, 2, base);
            for (level, e) in errors.iter_mut().enumerate() {
                if level > 0 {
                    path = path.refine().unwrap();
                }
                for x in [[0.5, 0.0], [-1.0, 1.0], [0.1, -0.3]] {
                    *e += roundtrip_error(f, &path, &x).unwrap();
                }
            }
        }
        let xs: Vec<f64> = (6..=10).map(|k| -(k as f64)).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
        let slope = fit_slope(&xs, &ys);
        assert!(slope >= 0.8, "{}: slope {slope}, errors {errors:?}", f.label());
    }
}

#[test]
fn newton_inverse_cross_check() {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let path = sample_path(2, 0, 2, grid);
    let f = CatalogField::cellular();
    let x = [0.3, 0.8];
    let y = newton_inverse(&f, &path, 0, 256, &x, 1e-13, 20).unwrap();
    let back = forward_flow(&f, &path, 0, 256, &y, false).unwrap().terminal;
    assert!(dist(&back, &x) <= 1e-11);
    let approx = backward_flow(&f, &path, 0, 256, &x).unwrap().terminal;
    assert!(dist(&approx, &y) <= 20.0 * grid.dt());
}

#[test]
fn coupled_flows_consume_identical_noise() {
    let path = sample_path(1, 0, 2, TimeGrid::new(1.0, 128).unwrap());
    let a = forward_flow(&CatalogField::rotation(), &path, 0, 128, &[1.0, 0.0], false).unwrap();
    let b = forward_flow(&CatalogField::shear_holder(0.3), &path, 0, 128, &[1.0, 0.0], false).unwrap();
    assert_eq!(a.checksum, b.checksum);
    let c = forward_flow(&CatalogField::rotation(), &path, 5, 128, &[1.0, 0.0], false).unwrap();
    assert_ne!(a.checksum, c.checksum);
}

#[test]
fn trajectory_is_stored_in_node_order() {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let path = sample_path(1, 0, 2, grid);
    let f = CatalogField::rotation();
    let r = forward_flow_with(&f, &path, 4, 20, &[1.0, 0.0], true, JacobianMethod::Variational).unwrap();
    let tr = r.trajectory.unwrap();
    assert_eq!(tr.len(), 17);
    assert_eq!(tr[0], vec![1.0, 0.0]);
    assert_eq!(tr[16], r.terminal);
    let mid = forward_flow(&f, &path, 4, 12, &[1.0, 0.0], false).unwrap();
    assert_eq!(tr[8], mid.terminal);
}

fn shear_ladder(eps: &[f64]) -> Vec<Arc<dyn VectorField>> {
    let shear: Arc<dyn VectorField> = Arc::new(CatalogField::shear_holder(0.3));
    eps.iter()
        .map(|e| Arc::new(mollify_field(shear.clone(), MollifierSpec::new(*e)).unwrap()) as Arc<dyn VectorField>)
        .collect()
}

#[test]
fn rotation_ladder_has_vanishing_est2() {
    let rotation: Arc<dyn VectorField> = Arc::new(CatalogField::rotation());
    let ladder: Vec<Arc<dyn VectorField>> = (1..=3)
        .map(|n| Arc::new(mollify_field(rotation.clone(), MollifierSpec::new(0.5f64.powi(n))).unwrap()) as Arc<dyn VectorField>)
        .collect();
    let refs: Vec<&dyn VectorField> = ladder.iter().map(|f| f.as_ref()).collect();
    let src = PathSource::new(5, 2, TimeGrid::new(1.0, 256).unwrap());
    let stats = flow_convergence_stats(&refs, rotation.as_ref(), src, &FlowStatsOptions::new(2, 1.0, 2.0, 16)).unwrap();
    assert!(stats.est2().iter().all(|v| *v <= 1e-16), "{:?}", stats.est2());
    assert!(stats.est1().iter().all(|v| *v <= 1e-16), "{:?}", stats.est1());
}

#[test]
fn shear_ladder_statistics_decrease_with_bounded_est3() {
    let eps = [0.4, 0.2, 0.1, 0.05];
    let ladder = shear_ladder(&eps);
    let refs: Vec<&dyn VectorField> = ladder.iter().map(|f| f.as_ref()).collect();
    let limit = CatalogField::shear_holder(0.3);
    let src = PathSource::new(2024, 2, TimeGrid::new(1.0, 1024).unwrap());
    let stats = flow_convergence_stats(&refs, &limit, src, &FlowStatsOptions::new(2, 1.0, 2.0, 256)).unwrap();
    for w in stats.levels.windows(2) {
        assert!(w[1].est1.mean < w[0].est1.mean, "est1 {:?}", stats.est1());
        assert!(w[1].est2.mean < w[0].est2.mean, "est2 {:?}", stats.est2());
    }
    let e3 = stats.est3();
    let max = e3.iter().cloned().fold(0.0, f64::max);
    let min = e3.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max <= 1.2 * min, "est3 {e3:?}");
    for l in &stats.levels {
        assert!(l.est1.mean >= 0.0 && l.est2.mean >= 0.0 && l.est3.mean >= 0.0);
    }
}

#[test]
fn half_widths_shrink_with_sample_count() {
    let ladder = shear_ladder(&[0.2]);
    let refs: Vec<&dyn VectorField> = ladder.iter().map(|f| f.as_ref()).collect();
    let limit = CatalogField::shear_holder(0.3);
    let src = PathSource::new(11, 2, TimeGrid::new(1.0, 128).unwrap());
    let mut opts = FlowStatsOptions::new(2, 1.0, 2.0, 64);
    opts.direction = Direction::Backward;
    let small = flow_convergence_stats(&refs, &limit, src, &opts).unwrap();
    opts.samples = 256;
    let large = flow_convergence_stats(&refs, &limit, src, &opts).unwrap();
    let ratio = small.levels[0].est3.half_width / large.levels[0].est3.half_width;
    assert!(ratio > 1.4 && ratio < 2.9, "ratio {ratio}");
}
