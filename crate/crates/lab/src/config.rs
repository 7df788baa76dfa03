//! Flat TOML experiment configuration. Unknown keys are rejected and every
//! label must resolve against the core catalogs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use transport_core::brownian::{PathSource, TimeGrid};
use transport_core::field::{CatalogDatum, CatalogField, Datum, DatumKind, Drift, FieldKind};
use transport_core::flow::Direction;
use transport_core::quadrature::{QuadratureBox, Rule};

use crate::LabError;

/// Subcommand names, in CLI order.
pub const EXPERIMENTS: [&str; 7] =
    ["persistence", "noise-demo", "uniqueness", "ic-stability", "drift-stability", "weak-residual", "flow-stats"];

pub const FIELD_LABELS: [&str; 7] = ["zero", "constant", "rotation", "strain", "cellular", "shear-holder", "compressive"];

pub const DATUM_LABELS: [&str; 4] = ["zero", "gaussian", "bump", "cone"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Experiment name; filled from the subcommand when empty.
    pub experiment: String,
    pub field: String,
    /// Hölder exponent of the shear field.
    pub theta: f64,
    /// Field amplitude.
    pub scale: f64,
    pub datum: String,
    /// Gaussian σ, bump or cone radius.
    pub datum_width: f64,
    pub p: f64,
    pub horizon: f64,
    /// Euler steps on `[0, horizon]`, a power of two.
    pub steps: usize,
    /// Quadrature box half-width; experiment default when absent.
    pub box_half_width: Option<f64>,
    /// Quadrature nodes per axis; experiment default when absent.
    pub box_nodes: Option<usize>,
    pub samples: usize,
    /// Samples for flow statistics; `samples` when absent, at least 16.
    pub flow_samples: Option<usize>,
    pub seed: u64,
    /// Mollification widths, strictly decreasing.
    pub mollify_ladder: Vec<f64>,
    /// Cutoff radii, strictly increasing.
    pub cutoff_ladder: Vec<f64>,
    /// Refinement levels (noise demo regions, weak-residual step halvings).
    pub levels: usize,
    /// Shrink factor between nested noise-demo regions.
    pub level_ratio: f64,
    /// Midpoint nodes per axis on each test-function box.
    pub test_nodes: usize,
    /// Paths for the quadratic-variation check.
    pub qv_samples: usize,
    /// `forward` or `backward`, for flow statistics.
    pub direction: String,
    pub zero_noise: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            field: "shear-holder".into(),
            theta: 0.3,
            scale: 1.0,
            datum: "gaussian".into(),
            datum_width: 1.0,
            p: 2.0,
            horizon: 1.0,
            steps: 1024,
            box_half_width: None,
            box_nodes: None,
            samples: 32,
            flow_samples: None,
            seed: 1,
            mollify_ladder: vec![0.4, 0.2, 0.1, 0.05],
            cutoff_ladder: vec![1.0, 2.0, 4.0],
            levels: 3,
            level_ratio: 32.0,
            test_nodes: 60,
            qv_samples: 256,
            direction: "forward".into(),
            zero_noise: false,
            out: None,
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, LabError> {
    Err(LabError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical echo: keys sorted, floats in shortest round-trip form.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if !self.experiment.is_empty() && !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return bad(format!("unknown experiment `{}`", self.experiment));
        }
        self.drift()?;
        self.datum()?;
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return bad(format!("p must be finite and at least 1, got {}", self.p));
        }
        self.grid()?;
        if self.samples == 0 {
            return bad("samples must be positive");
        }
        if self.flow_samples.is_some_and(|n| n < 16) {
            return bad("flow_samples must be at least 16");
        }
        if self.mollify_ladder.is_empty() || self.mollify_ladder.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad("mollify_ladder must hold positive widths");
        }
        if self.mollify_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return bad("mollify_ladder must be strictly decreasing");
        }
        if self.cutoff_ladder.is_empty() || self.cutoff_ladder.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad("cutoff_ladder must hold positive radii");
        }
        if self.cutoff_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return bad("cutoff_ladder must be strictly increasing");
        }
        if self.box_half_width.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
            return bad("box_half_width must be positive");
        }
        if self.box_nodes.is_some_and(|m| m < 2) {
            return bad("box_nodes must be at least 2");
        }
        if self.levels < 2 {
            return bad("levels must be at least 2");
        }
        if !(self.level_ratio > 1.0 && self.level_ratio.is_finite()) {
            return bad("level_ratio must exceed 1");
        }
        if self.test_nodes < 4 {
            return bad("test_nodes must be at least 4");
        }
        self.direction()?;
        Ok(())
    }

    pub fn drift_kind(&self) -> Result<FieldKind, LabError> {
        let s = self.scale;
        if !s.is_finite() {
            return bad("scale must be finite");
        }
        Ok(match self.field.as_str() {
            "zero" => FieldKind::Zero,
            "constant" => FieldKind::Constant(vec![s, 0.0]),
            "rotation" => FieldKind::Rotation { scale: s },
            "strain" => FieldKind::Strain { scale: s },
            "cellular" => FieldKind::Cellular { scale: s },
            "shear-holder" => FieldKind::ShearHolder { theta: self.theta, scale: s },
            "compressive" => FieldKind::Compressive { scale: s },
            other => return bad(format!("unknown field `{other}`; expected one of {FIELD_LABELS:?}")),
        })
    }

    pub fn catalog_field(&self) -> Result<CatalogField, LabError> {
        Ok(CatalogField::new(self.drift_kind()?, 2)?)
    }

    pub fn drift(&self) -> Result<Drift, LabError> {
        Ok(Arc::new(self.catalog_field()?))
    }

    pub fn datum(&self) -> Result<Datum, LabError> {
        let w = self.datum_width;
        let kind = match self.datum.as_str() {
            "zero" => DatumKind::Zero,
            "gaussian" => DatumKind::Gaussian { sigma: w, center: vec![0.0; 2] },
            "bump" => DatumKind::Bump { radius: w, center: vec![0.0; 2] },
            "cone" => DatumKind::Cone { radius: w },
            other => return bad(format!("unknown datum `{other}`; expected one of {DATUM_LABELS:?}")),
        };
        Ok(Arc::new(CatalogDatum::new(kind, 2)?))
    }

    pub fn grid(&self) -> Result<TimeGrid, LabError> {
        Ok(TimeGrid::new(self.horizon, self.steps)?)
    }

    /// Paths on the configured grid, or the zero-noise source.
    pub fn source(&self) -> Result<PathSource, LabError> {
        let grid = self.grid()?;
        Ok(if self.zero_noise { PathSource::zero_noise(2, grid) } else { PathSource::new(self.seed, 2, grid) })
    }

    pub fn direction(&self) -> Result<Direction, LabError> {
        match self.direction.as_str() {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            other => bad(format!("direction must be `forward` or `backward`, got `{other}`")),
        }
    }

    pub fn flow_samples(&self) -> usize {
        self.flow_samples.unwrap_or(self.samples.max(16))
    }

    /// Centered midpoint box with experiment defaults for unset keys.
    pub fn quadrature_box(&self, half_width: f64, nodes: usize) -> Result<QuadratureBox, LabError> {
        let hw = self.box_half_width.unwrap_or(half_width);
        let m = self.box_nodes.unwrap_or(nodes);
        Ok(QuadratureBox::new(2, hw, m, Rule::Midpoint)?)
    }
}
