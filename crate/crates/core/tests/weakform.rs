use std::sync::Arc;

use transport_core::brownian::{PathSource, TimeGrid};
use transport_core::error::Error;
use transport_core::field::{CatalogDatum, CatalogField, Datum, Drift, Scaled};
use transport_core::quadrature::{QuadratureBox, Rule};
use transport_core::transport::TransportSolution;
use transport_core::weakform::{
    pairing, pairing_series, pairing_terms, semimartingale_check, test_function_catalog, TestFunction,
    SEMIMARTINGALE_MIN_SAMPLES,
};

fn gaussian() -> Datum {
    Arc::new(CatalogDatum::gaussian(2, 1.0))
}

fn solution(datum: Datum, drift: Drift, steps: usize, level: u32) -> TransportSolution {
    let src = PathSource::new(23, 2, TimeGrid::new(1.0, steps).unwrap()).at_level(level);
    TransportSolution::new(datum, drift, src).unwrap()
}

fn unit_bump() -> (TestFunction, QuadratureBox) {
    let phi = TestFunction::new(vec![0.0, 0.0], 1.0).unwrap();
    let bx = QuadratureBox::centered(vec![0.0, 0.0], 1.0, 60, Rule::Midpoint).unwrap();
    (phi, bx)
}

#[test]
fn zero_datum_gives_zero_residuals_and_statistics() {
    let sol = solution(Arc::new(CatalogDatum::zero(2)), Arc::new(CatalogField::rotation()), 16, 0);
    let phi = TestFunction::new(vec![0.2, 0.1], 0.5).unwrap();
    let bx = QuadratureBox::centered(vec![0.2, 0.1], 0.5, 12, Rule::Midpoint).unwrap();
    let r = pairing_terms(&sol, &phi, &sol.path(0), 16, &bx).unwrap().residuals();
    assert_eq!((r.ito, r.stratonovich, r.compensator, r.compensator_defect), (0.0, 0.0, 0.0, 0.0));
    let ensemble: Vec<_> = (0..64).map(|i| pairing_series(&sol, &phi, &sol.path(i), 16, &bx).unwrap()).collect();
    let rep = semimartingale_check(&ensemble).unwrap();
    assert_eq!((rep.max_jump_ratio, rep.realized_qv.mean, rep.predicted_qv.mean, rep.qv_ratio), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn residuals_are_linear_in_the_datum() {
    let alpha = -2.75;
    let base = solution(gaussian(), Arc::new(CatalogField::cellular()), 16, 0);
    let scaled = solution(Arc::new(Scaled::new(gaussian(), alpha)), Arc::new(CatalogField::cellular()), 16, 0);
    let phi = TestFunction::new(vec![0.3, -0.2], 0.8).unwrap();
    let bx = QuadratureBox::centered(vec![0.3, -0.2], 0.8, 24, Rule::Midpoint).unwrap();
    for s in 0..3 {
        let a = pairing_terms(&base, &phi, &base.path(s), 16, &bx).unwrap().residuals();
        let b = pairing_terms(&scaled, &phi, &scaled.path(s), 16, &bx).unwrap().residuals();
        assert!((b.ito - alpha * a.ito).abs() <= 1e-12);
        assert!((b.stratonovich - alpha * a.stratonovich).abs() <= 1e-12);
        assert!((b.compensator - alpha * a.compensator).abs() <= 1e-12);
    }
}

#[test]
fn zero_time_pairing_is_datum_quadrature() {
    let sol = solution(gaussian(), Arc::new(CatalogField::strain()), 16, 0);
    for phi in test_function_catalog(2) {
        let bx = QuadratureBox::centered(phi.center().to_vec(), phi.support_radius(), 40, Rule::Midpoint).unwrap();
        let direct: f64 = bx.nodes().iter().map(|(x, w)| w * sol.datum().value(x) * phi.value(x)).sum();
        let p = pairing(&sol, &phi, 0, 3, &bx).unwrap();
        assert!((p - direct).abs() <= 1e-12);
        if phi.center()[0] == 8.0 {
            assert!(p.abs() <= 1e-12);
        }
    }
}

#[test]
fn drift_free_pairing_matches_shifted_overlap() {
    let sol = solution(gaussian(), Arc::new(CatalogField::zero(2)), 64, 0);
    let (phi, bx) = unit_bump();
    let fine = QuadratureBox::centered(vec![0.0, 0.0], 1.0, 400, Rule::Midpoint).unwrap();
    for s in 0..4 {
        let path = sol.path(s);
        for t in [16, 64] {
            let b = path.position(t).unwrap();
            let oracle: f64 = fine
                .nodes()
                .iter()
                .map(|(x, w)| {
                    let r2 = (x[0] - b[0]).powi(2) + (x[1] - b[1]).powi(2);
                    w * (-r2 / 2.0).exp() * phi.value(x)
                })
                .sum();
            let p = pairing(&sol, &phi, t, s, &bx).unwrap();
            assert!((p - oracle).abs() <= 1e-6, "{p} vs {oracle}");
        }
    }
}

#[test]
fn residual_and_compensator_defect_decay_under_refinement() {
    let (phi, bx) = unit_bump();
    let mut ito = Vec::new();
    let mut defect = Vec::new();
    for level in 0..3 {
        let sol = solution(gaussian(), Arc::new(CatalogField::zero(2)), 16, level);
        let n = sol.grid().steps();
        let (mut a, mut b) = (0.0, 0.0);
        for s in 0..32 {
            let r = pairing_terms(&sol, &phi, &sol.path(s), n, &bx).unwrap().residuals();
            a += r.ito.abs() / 32.0;
            b += r.compensator_defect.abs() / 32.0;
        }
        ito.push(a);
        defect.push(b);
    }
    assert!(ito.windows(2).all(|w| w[1] < w[0]), "{ito:?}");
    // Order one: each halving should divide the defect by about two.
    assert!(defect.windows(2).all(|w| w[0] / w[1] >= 1.6), "{defect:?}");
}

#[test]
fn quadratic_variation_matches_prediction() {
    let sol = solution(gaussian(), Arc::new(CatalogField::zero(2)), 64, 0);
    let phi = TestFunction::new(vec![0.0, 0.0], 1.0).unwrap();
    let bx = QuadratureBox::centered(vec![0.0, 0.0], 1.0, 40, Rule::Midpoint).unwrap();
    let ensemble: Vec<_> = (0..256).map(|i| pairing_series(&sol, &phi, &sol.path(i), 64, &bx).unwrap()).collect();
    let rep = semimartingale_check(&ensemble).unwrap();
    assert!((0.8..=1.2).contains(&rep.qv_ratio), "{rep:?}");
    assert!(rep.max_jump_ratio.is_finite() && rep.max_jump_ratio > 0.0);
}

#[test]
fn far_test_function_sees_nothing() {
    let datum: Datum = Arc::new(CatalogDatum::bump(2, 1.0));
    let sol = TransportSolution::new(
        datum,
        Arc::new(CatalogField::rotation()),
        PathSource::new(2, 2, TimeGrid::new(0.25, 32).unwrap()),
    )
    .unwrap();
    let phi = TestFunction::new(vec![8.0, 8.0], 0.5).unwrap();
    let bx = QuadratureBox::centered(vec![8.0, 8.0], 0.5, 16, Rule::Midpoint).unwrap();
    let ensemble: Vec<_> = (0..64).map(|i| pairing_series(&sol, &phi, &sol.path(i), 32, &bx).unwrap()).collect();
    let rep = semimartingale_check(&ensemble).unwrap();
    assert!(rep.realized_qv.mean <= 1e-10 && rep.predicted_qv.mean <= 1e-10 && rep.max_jump_ratio <= 1e-10);
    let r = pairing_terms(&sol, &phi, &sol.path(0), 32, &bx).unwrap().residuals();
    assert!(r.ito.abs() <= 1e-10 && r.stratonovich.abs() <= 1e-10);
}

#[test]
fn configuration_errors() {
    let sol = solution(gaussian(), Arc::new(CatalogField::zero(2)), 16, 0);
    let phi = TestFunction::new(vec![0.0, 0.0], 1.0).unwrap();
    let small = QuadratureBox::new(2, 0.9, 10, Rule::Midpoint).unwrap();
    assert!(matches!(pairing(&sol, &phi, 4, 0, &small), Err(Error::Config(_))));
    assert!(matches!(pairing_terms(&sol, &phi, &sol.path(0), 4, &small), Err(Error::Config(_))));
    let bx = QuadratureBox::new(2, 1.0, 10, Rule::Midpoint).unwrap();
    assert!(matches!(pairing(&sol, &phi, 17, 0, &bx), Err(Error::Config(_))));
    let few: Vec<_> = (0..SEMIMARTINGALE_MIN_SAMPLES as u64 - 1)
        .map(|i| pairing_series(&sol, &phi, &sol.path(i), 4, &bx).unwrap())
        .collect();
    assert!(matches!(semimartingale_check(&few), Err(Error::Config(_))));
    assert!(TestFunction::new(vec![0.0, 0.0], 0.0).is_err());
}

#[test]
fn test_function_derivatives_vanish_outside_support() {
    for phi in test_function_catalog(2) {
        let mut x = phi.center().to_vec();
        x[1] += phi.support_radius() * 1.0001;
        let mut g = [1.0; 2];
        phi.gradient_into(&x, &mut g);
        assert_eq!((phi.value(&x), g, phi.laplacian(&x)), (0.0, [0.0, 0.0], 0.0));
    }
}
