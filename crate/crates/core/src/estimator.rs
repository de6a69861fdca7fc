//! Online interval estimation.
//!
//! Each step advances the point observer
//! `x̂⁺ = A·x̂ + B·u + f(x̂) + L·(y − C·x̂)` and the zonotope `⟨0, M_x⟩` that
//! holds the estimation error `e = x − x̂`. The nonlinearity enters through a
//! mean-value expansion: `f(x) − f(x̂) ∈ [A]·e` with `[A]` the interval
//! Jacobian over the hull of `x̂ ⊕ ⟨0, M_x⟩`. Three boxes are reported per
//! step: the zonotope hull, the peak-to-peak box `x̂ ± φ_k`, and their
//! intersection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{jacobian_range, zonotope_inclusion, IntervalMatrix};
use crate::model::{SystemModel, UncertaintyBounds};
use crate::synthesis::{bounded_error_interval, PhiSchedule, SynthesisResult, V0Bound};
use crate::zonotope::{hcat, BoxSet, Zonotope};

/// Reduction order used by the reference pendulum experiment.
pub const DEFAULT_REDUCTION_ORDER: usize = 20;

/// How the interval-Jacobian image of the error set is combined with the
/// linear part `Ã = A − L·C`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// `M⁺ = [(Ã + mid[A])·M, 0, Dˢ, D₁·M_w, L·D₂·M_v]`: the Jacobian midpoint
    /// acts on the same generators as `Ã`, and only the Jacobian radius is
    /// boxed. Collapses to the LTI recursion when `[A]` is degenerate.
    #[default]
    MidpointMerged,
    /// `M⁺ = [Ã·M, Dᶜ, Dˢ, D₁·M_w, L·D₂·M_v]` with `[Dᶜ, Dˢ]` the inclusion of
    /// `[A]·M`. Treats `Ã·e` and `[A]·e` as independent.
    Separate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Generator cap `q > n` applied after every step.
    pub q: usize,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default)]
    pub v0_bound: V0Bound,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { q: DEFAULT_REDUCTION_ORDER, propagation: Propagation::default(), v0_bound: V0Bound::default() }
    }
}

/// Estimator state at time `k`: point estimate and error zonotope (center 0).
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub k: usize,
    pub x_hat: DVector<f64>,
    pub err: Zonotope,
    pub q: usize,
}

/// Interval estimates at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub k: usize,
    pub x_hat: DVector<f64>,
    /// `x̂ ± φ_k`
    pub box_p: BoxSet,
    /// `x̂ ⊕ hull(⟨0, M_x⟩)`
    pub box_z: BoxSet,
    /// componentwise intersection of `box_p` and `box_z`
    pub box_fused: BoxSet,
    pub phi: f64,
    /// Components where the fused box came out inverted (lower > upper).
    pub violations: Vec<usize>,
    /// Largest entry width of the Jacobian enclosure used for this step.
    pub jacobian_width: f64,
    /// Generator count of the error zonotope carried to the next step.
    pub err_order: usize,
}

/// Result of one error-set update: the generator matrix used for the hull
/// at this step and its reduction carried forward.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSetUpdate {
    pub full: Zonotope,
    pub reduced: Zonotope,
    pub jacobian: IntervalMatrix,
}

/// One step of the point observer.
pub fn observer_step(
    model: &SystemModel,
    gain: &DMatrix<f64>,
    x_hat: &DVector<f64>,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    let innovation = y - model.c() * x_hat;
    model.a() * x_hat + model.input_term(u) + model.f(x_hat) + gain * innovation
}

/// Propagates the error zonotope one step and reduces it to order `state.q`.
pub fn error_set_step(
    model: &SystemModel,
    gain: &DMatrix<f64>,
    bounds: &UncertaintyBounds,
    state: &EstimatorState,
    propagation: Propagation,
) -> Result<ErrorSetUpdate> {
    let n = model.nx();
    let mx = state.err.generators();
    let a_tilde = model.a() - gain * model.c();

    let hull = BoxSet::centered(&state.x_hat, &state.err.hull_radius())?;
    let jac = jacobian_range(model, &hull)?;

    let linear_part;
    let jac_image;
    match propagation {
        Propagation::Separate => {
            linear_part = &a_tilde * mx;
            jac_image = zonotope_inclusion(&DVector::zeros(n), &jac.mul_real(mx)?)?;
        }
        Propagation::MidpointMerged => {
            let mid = jac.center();
            let r = jac.radius();
            let centered = IntervalMatrix::new(-&r, r)?;
            linear_part = (&a_tilde + mid) * mx;
            jac_image = zonotope_inclusion(&DVector::zeros(n), &centered.mul_real(mx)?)?;
        }
    }
    let dw = model.d1() * bounds.mw();
    let dv = gain * model.d2() * bounds.mv();
    let generators = hcat(&[&linear_part, jac_image.generators(), &dw, &dv]);
    let full = Zonotope::new(DVector::zeros(n), generators)?;
    let reduced = full.reduce(state.q)?;
    Ok(ErrorSetUpdate { full, reduced, jacobian: jac })
}

/// `x̂₀ = p₀`, error set `⟨0, diag(x̄₀)⟩`.
pub fn init(model: &SystemModel, bounds: &UncertaintyBounds, q: usize) -> Result<EstimatorState> {
    bounds.validate(model)?;
    let n = model.nx();
    if q <= n {
        return Err(Error::ReductionOrder { q, n });
    }
    Ok(EstimatorState {
        k: 0,
        x_hat: bounds.x0_center.clone(),
        err: Zonotope::from_box(DVector::zeros(n), &bounds.x0_radius),
        q,
    })
}

/// Intersection of the peak-to-peak and zonotope boxes; inverted components
/// are reported, not clipped.
pub fn fuse(box_p: &BoxSet, box_z: &BoxSet) -> (BoxSet, Vec<usize>) {
    box_p.intersect(box_z)
}

fn output(
    k: usize,
    x_hat: DVector<f64>,
    err_radius: &DVector<f64>,
    phi: f64,
    jacobian_width: f64,
    err_order: usize,
) -> Result<StepOutput> {
    let box_z = BoxSet::centered(&x_hat, err_radius)?;
    let box_p = bounded_error_interval(&x_hat, phi)?;
    let (box_fused, violations) = fuse(&box_p, &box_z);
    Ok(StepOutput { k, x_hat, box_p, box_z, box_fused, phi, violations, jacobian_width, err_order })
}

/// Interval estimates for the initial state.
pub fn initial_output(state: &EstimatorState, phi0: f64) -> Result<StepOutput> {
    output(state.k, state.x_hat.clone(), &state.err.hull_radius(), phi0, 0.0, state.err.order())
}

/// Advances from time `k` to `k + 1` using `u_k`, `y_k` and `φ_{k+1}`.
#[allow(clippy::too_many_arguments)]
pub fn step(
    model: &SystemModel,
    bounds: &UncertaintyBounds,
    gain: &DMatrix<f64>,
    state: &EstimatorState,
    u: &DVector<f64>,
    y: &DVector<f64>,
    phi_next: f64,
    propagation: Propagation,
) -> Result<(EstimatorState, StepOutput)> {
    if y.len() != model.ny() {
        return Err(Error::dims("step measurement", (y.len(), 1), (model.ny(), 1)));
    }
    let x_hat = observer_step(model, gain, &state.x_hat, u, y);
    let update = error_set_step(model, gain, bounds, state, propagation)?;
    let k = state.k + 1;
    let out = output(
        k,
        x_hat.clone(),
        &update.full.hull_radius(),
        phi_next,
        update.jacobian.max_width(),
        update.reduced.order(),
    )?;
    if !out.violations.is_empty() {
        log::warn!("step {k}: fused box inverted in components {:?}", out.violations);
    }
    Ok((EstimatorState { k, x_hat, err: update.reduced, q: state.q }, out))
}

/// Bundles a model, its bounds and a synthesized gain.
#[derive(Clone, Debug)]
pub struct Estimator<'a> {
    model: &'a SystemModel,
    bounds: &'a UncertaintyBounds,
    synthesis: &'a SynthesisResult,
    phi: PhiSchedule,
    config: EstimatorConfig,
}

impl<'a> Estimator<'a> {
    pub fn new(
        model: &'a SystemModel,
        bounds: &'a UncertaintyBounds,
        synthesis: &'a SynthesisResult,
        config: EstimatorConfig,
    ) -> Result<Self> {
        bounds.validate(model)?;
        if synthesis.gain.shape() != (model.nx(), model.ny()) {
            return Err(Error::dims("Estimator gain", synthesis.gain.shape(), (model.nx(), model.ny())));
        }
        if config.q <= model.nx() {
            return Err(Error::ReductionOrder { q: config.q, n: model.nx() });
        }
        let phi = PhiSchedule::new(synthesis, bounds, &config.v0_bound)?;
        Ok(Self { model, bounds, synthesis, phi, config })
    }

    pub fn phi_schedule(&self) -> &PhiSchedule {
        &self.phi
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.synthesis.gain
    }

    pub fn init(&self) -> Result<(EstimatorState, StepOutput)> {
        let state = init(self.model, self.bounds, self.config.q)?;
        let out = initial_output(&state, self.phi.at(0))?;
        Ok((state, out))
    }

    pub fn step(
        &self,
        state: &EstimatorState,
        u: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Result<(EstimatorState, StepOutput)> {
        step(
            self.model,
            self.bounds,
            &self.synthesis.gain,
            state,
            u,
            y,
            self.phi.at(state.k + 1),
            self.config.propagation,
        )
    }
}
