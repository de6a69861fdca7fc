//! Closed-loop experiments: model registry, seeded bounded noise, truth
//! simulation and per-step traces.
//!
//! Noise comes from ChaCha8 seeded with a `u64`, so traces are bit-for-bit
//! reproducible across platforms. At every step `w_k` is drawn before `v_k`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Estimator, EstimatorConfig, StepOutput};
use crate::interval::IntervalMatrix;
use crate::model::{LinearPerturbation, SystemModel, UncertaintyBounds, ZeroNonlinearity};
use crate::synthesis::{synthesize, SynthesisConfig, SynthesisReport, SynthesisResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Each component uniform on `[−bound, bound]`.
    #[default]
    Uniform,
    /// Each component `−bound` or `+bound` with equal probability.
    Extremal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub w_bar: DVector<f64>,
    pub v_bar: DVector<f64>,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    /// Noise at exactly the amplitudes declared in `bounds`.
    pub fn from_bounds(bounds: &UncertaintyBounds, seed: u64, distribution: NoiseDistribution) -> Self {
        Self { w_bar: bounds.w_bar.clone(), v_bar: bounds.v_bar.clone(), seed, distribution }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn sampler(&self) -> NoiseSampler {
        NoiseSampler { spec: self.clone(), rng: ChaCha8Rng::seed_from_u64(self.seed) }
    }
}

/// Stateful generator for one noise realization.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
}

impl NoiseSampler {
    fn draw(rng: &mut ChaCha8Rng, bound: &DVector<f64>, dist: NoiseDistribution) -> DVector<f64> {
        DVector::from_iterator(
            bound.len(),
            bound.iter().map(|&b| match dist {
                NoiseDistribution::Uniform if b > 0.0 => rng.gen_range(-b..=b),
                NoiseDistribution::Uniform => 0.0,
                NoiseDistribution::Extremal => {
                    if rng.gen::<bool>() {
                        b
                    } else {
                        -b
                    }
                }
            }),
        )
    }

    /// Returns `(w_k, v_k)`.
    pub fn next_pair(&mut self) -> (DVector<f64>, DVector<f64>) {
        let w = Self::draw(&mut self.rng, &self.spec.w_bar, self.spec.distribution);
        let v = Self::draw(&mut self.rng, &self.spec.v_bar, self.spec.distribution);
        (w, v)
    }
}

/// True trajectory with the realized signals; every vector has `horizon + 1`
/// entries (`w` at the final step is drawn but never applied).
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
}

/// Simulates `x⁺ = A·x + B·u + f(x) + D₁·w`, `y = C·x + D₂·v`.
///
/// `inputs` defaults to `u ≡ 0`; when given it must cover `horizon + 1` steps.
pub fn simulate_truth(
    model: &SystemModel,
    x0: &DVector<f64>,
    noise: &NoiseSpec,
    inputs: Option<&[DVector<f64>]>,
    horizon: usize,
) -> Result<Truth> {
    if x0.len() != model.nx() {
        return Err(Error::dims("simulate_truth x0", (x0.len(), 1), (model.nx(), 1)));
    }
    if noise.w_bar.len() != model.nw() || noise.v_bar.len() != model.nv() {
        return Err(Error::InvalidArgument(format!(
            "noise bounds have lengths ({}, {}), model expects ({}, {})",
            noise.w_bar.len(),
            noise.v_bar.len(),
            model.nw(),
            model.nv()
        )));
    }
    if let Some(u) = inputs {
        if u.len() < horizon + 1 || u.iter().any(|ui| ui.len() != model.nu()) {
            return Err(Error::InvalidArgument(format!(
                "input sequence must have {} entries of length {}",
                horizon + 1,
                model.nu()
            )));
        }
    }
    let mut sampler = noise.sampler();
    let mut truth = Truth { x: vec![], y: vec![], u: vec![], w: vec![], v: vec![] };
    let mut x = x0.clone();
    for k in 0..=horizon {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        let u = inputs.map_or_else(|| DVector::zeros(model.nu()), |s| s[k].clone());
        let (w, v) = sampler.next_pair();
        let y = model.c() * &x + model.d2() * &v;
        let next = model.a() * &x + model.input_term(&u) + model.f(&x) + model.d1() * &w;
        truth.x.push(std::mem::replace(&mut x, next));
        truth.y.push(y);
        truth.u.push(u);
        truth.w.push(w);
        truth.v.push(v);
    }
    Ok(truth)
}

/// Built-in models, selectable by name from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Pendulum {
        #[serde(default = "default_step")]
        h: f64,
        #[serde(default = "default_d2")]
        d2: f64,
    },
    /// `f ≡ 0`. Matrices are row-major nested lists; `b` may be omitted.
    Linear {
        a: Vec<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<Vec<f64>>>,
        c: Vec<Vec<f64>>,
        d1: Vec<Vec<f64>>,
        d2: Vec<Vec<f64>>,
    },
    /// `f(x) = ΔA·x` with `ΔA ∈ [delta_lower, delta_upper]`.
    UncertainLinear {
        a: Vec<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<Vec<f64>>>,
        c: Vec<Vec<f64>>,
        d1: Vec<Vec<f64>>,
        d2: Vec<Vec<f64>>,
        delta: Vec<Vec<f64>>,
        delta_lower: Vec<Vec<f64>>,
        delta_upper: Vec<Vec<f64>>,
    },
}

fn default_step() -> f64 {
    0.065
}

fn default_d2() -> f64 {
    0.1
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{name}: rows have differing lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl ModelSpec {
    /// Registry key: `pendulum`, `linear` or `uncertain-linear`.
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Pendulum { .. } => "pendulum",
            ModelSpec::Linear { .. } => "linear",
            ModelSpec::UncertainLinear { .. } => "uncertain-linear",
        }
    }

    pub fn build(&self) -> Result<SystemModel> {
        let input = |b: &Option<Vec<Vec<f64>>>, n: usize| match b {
            Some(rows) => matrix("b", rows),
            None => Ok(DMatrix::zeros(n, 0)),
        };
        match self {
            ModelSpec::Pendulum { h, d2 } => {
                if !(h.is_finite() && d2.is_finite()) {
                    return Err(Error::Config("pendulum: h and d2 must be finite".into()));
                }
                Ok(SystemModel::pendulum(*h, *d2))
            }
            ModelSpec::Linear { a, b, c, d1, d2 } => {
                let a = matrix("a", a)?;
                let n = a.nrows();
                SystemModel::new(
                    a,
                    input(b, n)?,
                    matrix("c", c)?,
                    matrix("d1", d1)?,
                    matrix("d2", d2)?,
                    Arc::new(ZeroNonlinearity { dim: n }),
                    IntervalMatrix::point(DMatrix::zeros(n, n)),
                )
            }
            ModelSpec::UncertainLinear { a, b, c, d1, d2, delta, delta_lower, delta_upper } => {
                let a = matrix("a", a)?;
                let n = a.nrows();
                let range =
                    IntervalMatrix::new(matrix("delta_lower", delta_lower)?, matrix("delta_upper", delta_upper)?)?;
                let f = LinearPerturbation::new(matrix("delta", delta)?, range.clone())?;
                SystemModel::new(
                    a,
                    input(b, n)?,
                    matrix("c", c)?,
                    matrix("d1", d1)?,
                    matrix("d2", d2)?,
                    Arc::new(f),
                    range,
                )
            }
        }
    }
}

/// Everything besides the model needed to run one closed-loop experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// True initial state.
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub noise: NoiseSpec,
    pub estimator: EstimatorConfig,
    pub synthesis: SynthesisConfig,
}

/// The reference pendulum: `h = 0.065`, `D₂ = 0.1`, `w̄ = 0.006·1`, `v̄ = 0.01`,
/// `x₀ = [1, 0]`, `x̂₀ = [0.98, 0.02]`, `x̄₀ = [0.1, 1]`, `λ = 0.5`, `q = 20`,
/// 200 steps of uniform noise with seed 0.
pub fn pendulum_experiment() -> (SystemModel, UncertaintyBounds, ExperimentConfig) {
    let model = SystemModel::pendulum(0.065, 0.1);
    let bounds = UncertaintyBounds {
        w_bar: DVector::from_element(2, 0.006),
        v_bar: DVector::from_element(1, 0.01),
        x0_center: DVector::from_vec(vec![0.98, 0.02]),
        x0_radius: DVector::from_vec(vec![0.1, 1.0]),
    };
    let experiment = ExperimentConfig {
        x0: DVector::from_vec(vec![1.0, 0.0]),
        horizon: 200,
        noise: NoiseSpec::from_bounds(&bounds, 0, NoiseDistribution::Uniform),
        estimator: EstimatorConfig::default(),
        synthesis: SynthesisConfig::with_lambda(0.5),
    };
    (model, bounds, experiment)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub x_true: DVector<f64>,
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub v: DVector<f64>,
    pub output: StepOutput,
    pub contained_p: bool,
    pub contained_z: bool,
    pub contained_fused: bool,
    /// `‖x_k − x̂_k‖₂`
    pub error_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceMetadata {
    pub model_id: String,
    pub seed: u64,
    pub distribution: NoiseDistribution,
    pub q: usize,
    pub lambda: f64,
    pub synthesis: SynthesisReport,
}

/// Inverted fused-box component at step `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ContractViolation {
    pub k: usize,
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub metadata: TraceMetadata,
    pub records: Vec<TraceRecord>,
}

impl SimulationTrace {
    pub fn all_contained(&self) -> bool {
        self.records.iter().all(|r| r.contained_p && r.contained_z && r.contained_fused)
    }

    /// Fraction of steps whose fused box contains the true state.
    pub fn containment_rate(&self) -> f64 {
        let hit = self.records.iter().filter(|r| r.contained_fused).count();
        hit as f64 / self.records.len() as f64
    }

    pub fn violations(&self) -> Vec<ContractViolation> {
        self.records
            .iter()
            .flat_map(|r| r.output.violations.iter().map(move |&c| ContractViolation { k: r.k, component: c }))
            .collect()
    }

    /// Smallest `φ_k − ‖e_k‖₂` over the trace; negative means the
    /// peak-to-peak bound was broken.
    pub fn min_phi_margin(&self) -> f64 {
        self.records.iter().map(|r| r.output.phi - r.error_norm).fold(f64::INFINITY, f64::min)
    }

    /// Mean widths of `(box_p, box_z, box_fused)` over steps `k ≥ from_k`.
    pub fn mean_widths(&self, from_k: usize) -> Option<WidthSummary> {
        let tail: Vec<_> = self.records.iter().filter(|r| r.k >= from_k).collect();
        let first = tail.first()?;
        let n = first.x_true.len();
        let mut s = WidthSummary::zeros(n);
        for r in &tail {
            s.p += r.output.box_p.widths();
            s.z += r.output.box_z.widths();
            s.fused += r.output.box_fused.widths();
        }
        let scale = 1.0 / tail.len() as f64;
        s.p *= scale;
        s.z *= scale;
        s.fused *= scale;
        Some(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WidthSummary {
    pub p: DVector<f64>,
    pub z: DVector<f64>,
    pub fused: DVector<f64>,
}

impl WidthSummary {
    fn zeros(n: usize) -> Self {
        Self { p: DVector::zeros(n), z: DVector::zeros(n), fused: DVector::zeros(n) }
    }
}

/// Synthesizes a gain with `experiment.synthesis` and runs the experiment.
pub fn run_experiment(
    model: &SystemModel,
    bounds: &UncertaintyBounds,
    experiment: &ExperimentConfig,
    model_id: &str,
) -> Result<SimulationTrace> {
    let synthesis = synthesize(model, bounds, &experiment.synthesis)?;
    run_with_gain(model, bounds, &synthesis, experiment, model_id)
}

/// Runs the experiment with an already synthesized gain.
pub fn run_with_gain(
    model: &SystemModel,
    bounds: &UncertaintyBounds,
    synthesis: &SynthesisResult,
    experiment: &ExperimentConfig,
    model_id: &str,
) -> Result<SimulationTrace> {
    let noise = &experiment.noise;
    let exceeds = |n: &DVector<f64>, b: &DVector<f64>| n.len() == b.len() && n.iter().zip(b.iter()).any(|(x, y)| x > y);
    if exceeds(&noise.w_bar, &bounds.w_bar) || exceeds(&noise.v_bar, &bounds.v_bar) {
        log::warn!("noise amplitudes exceed the declared bounds; containment is not guaranteed");
    }
    let estimator = Estimator::new(model, bounds, synthesis, experiment.estimator.clone())?;
    let truth = simulate_truth(model, &experiment.x0, noise, None, experiment.horizon)?;

    let mut records = Vec::with_capacity(experiment.horizon + 1);
    let (mut state, mut out) = estimator.init()?;
    for k in 0..=experiment.horizon {
        let x = &truth.x[k];
        records.push(TraceRecord {
            k,
            x_true: x.clone(),
            y: truth.y[k].clone(),
            u: truth.u[k].clone(),
            w: truth.w[k].clone(),
            v: truth.v[k].clone(),
            contained_p: out.box_p.contains(x),
            contained_z: out.box_z.contains(x),
            contained_fused: out.violations.is_empty() && out.box_fused.contains(x),
            error_norm: (x - &out.x_hat).norm(),
            output: out.clone(),
        });
        if k < experiment.horizon {
            (state, out) = estimator.step(&state, &truth.u[k], &truth.y[k])?;
        }
    }
    Ok(SimulationTrace {
        metadata: TraceMetadata {
            model_id: model_id.to_string(),
            seed: noise.seed,
            distribution: noise.distribution,
            q: experiment.estimator.q,
            lambda: synthesis.lambda,
            synthesis: synthesis.report(),
        },
        records,
    })
}

/// Per-seed outcome of a Monte Carlo batch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: usize,
    pub contained_steps: usize,
    pub violations: usize,
    pub min_phi_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub runs: Vec<RunSummary>,
    pub failures: Vec<RunFailure>,
    /// Contained steps over all steps of the successful runs.
    pub containment_rate: f64,
    /// Per step, per component mean widths across successful runs.
    pub mean_width_p: Vec<Vec<f64>>,
    pub mean_width_z: Vec<Vec<f64>>,
    pub mean_width_fused: Vec<Vec<f64>>,
    pub min_phi_margin: f64,
}

/// Runs seeds `base_seed .. base_seed + n_runs` in parallel with a shared
/// gain. Failed runs are reported and excluded from the aggregates.
/// Returns the report and the successful traces in seed order.
pub fn monte_carlo(
    model: &SystemModel,
    bounds: &UncertaintyBounds,
    synthesis: &SynthesisResult,
    experiment: &ExperimentConfig,
    model_id: &str,
    n_runs: usize,
    base_seed: u64,
) -> Result<(MonteCarloReport, Vec<SimulationTrace>)> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let outcomes: Vec<(u64, Result<SimulationTrace>)> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let exp = ExperimentConfig { noise: experiment.noise.with_seed(seed), ..experiment.clone() };
            (seed, run_with_gain(model, bounds, synthesis, &exp, model_id))
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut traces = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(trace) => {
                runs.push(RunSummary {
                    seed,
                    steps: trace.records.len(),
                    contained_steps: trace.records.iter().filter(|r| r.contained_fused).count(),
                    violations: trace.violations().len(),
                    min_phi_margin: trace.min_phi_margin(),
                });
                traces.push(trace);
            }
            Err(e) => {
                log::error!("seed {seed}: {e}");
                failures.push(RunFailure { seed, error: e.to_string() });
            }
        }
    }

    let total: usize = runs.iter().map(|r| r.steps).sum();
    let hit: usize = runs.iter().map(|r| r.contained_steps).sum();
    let mean_of = |select: fn(&StepOutput) -> DVector<f64>| -> Vec<Vec<f64>> {
        if traces.is_empty() {
            return vec![];
        }
        (0..=experiment.horizon)
            .map(|k| {
                let sum = traces.iter().fold(DVector::zeros(model.nx()), |acc, t| acc + select(&t.records[k].output));
                (sum / traces.len() as f64).iter().copied().collect()
            })
            .collect()
    };
    let report = MonteCarloReport {
        containment_rate: if total == 0 { 0.0 } else { hit as f64 / total as f64 },
        mean_width_p: mean_of(|o| o.box_p.widths()),
        mean_width_z: mean_of(|o| o.box_z.widths()),
        mean_width_fused: mean_of(|o| o.box_fused.widths()),
        min_phi_margin: runs.iter().map(|r| r.min_phi_margin).fold(f64::INFINITY, f64::min),
        runs,
        failures,
    };
    Ok((report, traces))
}
