use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, Propagation};
use crate::model::{SystemModel, UncertaintyBounds};
use crate::simkit::{ExperimentConfig, ModelSpec, NoiseDistribution, NoiseSpec};
use crate::synthesis::{SynthesisConfig, V0Bound};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub w_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    pub x0_center: Vec<f64>,
    pub x0_radius: Vec<f64>,
}

/// JSON form of [`V0Bound`]: `"box_vertices"`, `"radius_vector"` or
/// `{"initial_error": [..]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V0Rule {
    #[default]
    BoxVertices,
    RadiusVector,
    InitialError(Vec<f64>),
}

impl From<&V0Rule> for V0Bound {
    fn from(r: &V0Rule) -> Self {
        match r {
            V0Rule::BoxVertices => V0Bound::BoxVertices,
            V0Rule::RadiusVector => V0Bound::RadiusVector,
            V0Rule::InitialError(e) => V0Bound::InitialError(DVector::from_vec(e.clone())),
        }
    }
}

/// Experiment configuration file. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub bounds: BoundsConfig,
    /// True initial state of the simulated plant.
    pub x0: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub strictness_margin: Option<f64>,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub noise: NoiseDistribution,
    #[serde(default)]
    pub v0_bound: V0Rule,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_lambda() -> f64 {
    0.5
}
fn default_q() -> usize {
    20
}
fn default_horizon() -> usize {
    200
}
fn default_runs() -> usize {
    50
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub horizon: Option<usize>,
    pub q: Option<usize>,
    pub lambda: Option<f64>,
}

/// Fully built objects ready for the library API.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub model_id: &'static str,
    pub model: SystemModel,
    pub bounds: UncertaintyBounds,
    pub experiment: ExperimentConfig,
    pub runs: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.runs {
            self.runs = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.q {
            self.q = v;
        }
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
    }

    /// Validates every field and builds the model, bounds and experiment.
    pub fn prepare(&self) -> Result<Prepared> {
        let synthesis = SynthesisConfig {
            lambda: self.lambda,
            lambda_grid: self.lambda_grid.clone(),
            strictness_margin: self.strictness_margin.unwrap_or(SynthesisConfig::default().strictness_margin),
            ..SynthesisConfig::default()
        };
        synthesis.validate()?;
        let model = self.model.build()?;
        let n = model.nx();
        let bounds = UncertaintyBounds {
            w_bar: DVector::from_vec(self.bounds.w_bar.clone()),
            v_bar: DVector::from_vec(self.bounds.v_bar.clone()),
            x0_center: DVector::from_vec(self.bounds.x0_center.clone()),
            x0_radius: DVector::from_vec(self.bounds.x0_radius.clone()),
        };
        bounds.validate(&model).map_err(|e| Error::Config(format!("bounds: {e}")))?;
        if self.x0.len() != n {
            return Err(Error::Config(format!("x0 has length {}, expected {n}", self.x0.len())));
        }
        let outside = (0..n).find(|&i| !((self.x0[i] - bounds.x0_center[i]).abs() <= bounds.x0_radius[i]));
        if let Some(i) = outside {
            return Err(Error::Config(format!("x0[{i}] lies outside the initial box x0_center ± x0_radius")));
        }
        if self.q <= n {
            return Err(Error::Config(format!("q must exceed the state dimension {n}, got {}", self.q)));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if let V0Rule::InitialError(e) = &self.v0_bound {
            if e.len() != n {
                return Err(Error::Config(format!("v0_bound.initial_error has length {}, expected {n}", e.len())));
            }
        }
        let experiment = ExperimentConfig {
            x0: DVector::from_vec(self.x0.clone()),
            horizon: self.horizon,
            noise: NoiseSpec::from_bounds(&bounds, self.seed, self.noise),
            estimator: EstimatorConfig { q: self.q, propagation: self.propagation, v0_bound: (&self.v0_bound).into() },
            synthesis,
        };
        Ok(Prepared {
            model_id: self.model.id(),
            model,
            bounds,
            experiment,
            runs: self.runs,
            out_dir: self.out_dir.clone(),
        })
    }
}
