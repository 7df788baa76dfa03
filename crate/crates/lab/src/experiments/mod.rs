//! Scenario runners. Each parallelizes over Monte Carlo samples only and
//! reduces in sample order, so reports do not depend on the worker count.

mod drift;
mod flowstats;
mod ic;
mod noise;
mod persistence;
mod uniqueness;
mod weak;

pub use drift::run_drift_stability;
pub use flowstats::run_flow_stats;
pub use ic::run_ic_stability;
pub use noise::run_noise_regularization_demo;
pub use persistence::run_persistence;
pub use uniqueness::run_uniqueness_agreement;
pub use weak::run_weak_residual;

use std::sync::Arc;

use rayon::prelude::*;
use transport_core::field::{mollify_field, Datum, Drift, MollifierSpec, ScalarDatum, Smoothness};
use transport_core::quadrature::QuadratureBox;
use transport_core::stats::Estimate;
use transport_core::transport::{certified_inner_radius, TransportSolution};

use crate::config::ExperimentConfig;
use crate::report::ExperimentReport;
use crate::{LabError, LabResult};

/// Leakage above which a norm-based verdict fails outright.
pub const LEAKAGE_FAILURE: f64 = 0.05;

pub(crate) fn new_report(cfg: &ExperimentConfig) -> ExperimentReport {
    ExperimentReport::new(&cfg.experiment, cfg.echo())
}

pub(crate) fn config_error<T>(msg: impl Into<String>) -> LabResult<T> {
    Err(LabError::Config(msg.into()))
}

/// Monte Carlo sample count; a single path suffices without noise.
pub(crate) fn mc_samples(cfg: &ExperimentConfig) -> usize {
    if cfg.zero_noise {
        1
    } else {
        cfg.samples
    }
}

/// Evaluates `f` on samples `0..samples` in parallel, keeping sample order.
pub(crate) fn per_sample<T: Send>(samples: usize, f: impl Fn(u64) -> LabResult<T> + Sync + Send) -> LabResult<Vec<T>> {
    (0..samples as u64).into_par_iter().map(f).collect()
}

pub(crate) fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

pub(crate) fn estimate_column(rows: &[Vec<f64>], k: usize) -> Estimate {
    Estimate::from_samples(&column(rows, k))
}

/// Mollified copies of `drift`, one per ladder width.
pub(crate) fn drift_ladder(drift: &Drift, ladder: &[f64]) -> LabResult<Vec<Drift>> {
    ladder
        .iter()
        .map(|d| Ok(Arc::new(mollify_field(drift.clone(), MollifierSpec::new(*d))?) as Drift))
        .collect()
}

/// Every consecutive step either decreases or ends at or below `floor`.
/// Returns the number of offending steps.
pub(crate) fn monotone_violations(values: &[f64], floor: f64) -> usize {
    values.windows(2).filter(|w| !(w[1] < w[0] || w[1] <= floor)).count()
}

/// Mean over samples of `tail(r)`, where `r` is the radius of a centered
/// ball certified to lie inside `Y_{0,t}(bx)` on that sample.
pub(crate) fn mean_tail(
    sol: &TransportSolution,
    t_index: usize,
    bx: &QuadratureBox,
    samples: usize,
    tail: impl Fn(f64) -> f64 + Sync,
) -> LabResult<f64> {
    if t_index == 0 {
        let r = (0..bx.dim).map(|a| bx.half_width - bx.center[a].abs()).fold(f64::INFINITY, f64::min).max(0.0);
        return Ok(tail(r));
    }
    let tails = per_sample(samples, |s| Ok(tail(certified_inner_radius(sol, &sol.path(s), t_index, bx)?)))?;
    Ok(tails.iter().sum::<f64>() / samples as f64)
}

/// `a − b`, used to measure tail mass of datum differences.
#[derive(Debug)]
pub(crate) struct Difference {
    a: Datum,
    b: Datum,
    label: String,
}

impl Difference {
    pub(crate) fn new(a: Datum, b: Datum) -> Self {
        let label = format!("{} - {}", a.label(), b.label());
        Self { a, b, label }
    }
}

impl ScalarDatum for Difference {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.a.value(x) - self.b.value(x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut g = vec![0.0; d];
        self.a.gradient_into(x, out);
        self.b.gradient_into(x, &mut g);
        for (o, v) in out[..d].iter_mut().zip(g) {
            *o -= v;
        }
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.a.support_radius()?.max(self.b.support_radius()?))
    }

    fn effective_radius(&self) -> f64 {
        self.a.effective_radius().max(self.b.effective_radius())
    }

    fn smoothness(&self) -> Smoothness {
        self.b.smoothness()
    }
}
