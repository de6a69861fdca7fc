//! Guaranteed interval state estimation for discrete-time nonlinear systems
//! with bounded Jacobians and amplitude-bounded disturbances.
//!
//! The estimator has two halves:
//!
//! * [`synthesis`] designs a Luenberger-like observer offline by solving an LMI
//!   program whose optimum bounds the estimation error in the peak-to-peak
//!   sense (`‖e_k‖₂ ≤ φ_k`).
//! * [`estimator`] propagates the error set online as a zonotope, enclosing the
//!   nonlinearity through an interval Jacobian, and intersects the resulting
//!   box with the peak-to-peak box.
//!
//! [`simkit`] drives closed-loop experiments and [`cli`] exposes them as the
//! `zonobs` command-line tool (JSON config in, CSV traces and SVG plots out).
//!
//! ```no_run
//! use zonobs::prelude::*;
//!
//! let (model, bounds, experiment) = simkit::pendulum_experiment();
//! let gain = synthesize(&model, &bounds, &SynthesisConfig::with_lambda(0.5)).unwrap();
//! println!("L = {}", gain.gain);
//! let trace = simkit::run_with_gain(&model, &bounds, &gain, &experiment, "pendulum").unwrap();
//! assert!(trace.all_contained());
//! ```

// `!(a <= b)` is used on purpose throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

// clarabel's dense LAPACK calls resolve against the system OpenBLAS
use openblas_src as _;

pub mod cli;
pub mod error;
pub mod estimator;
mod feasibility;
pub mod interval;
pub mod model;
pub mod sdp;
pub mod simkit;
pub mod synthesis;
pub mod zonotope;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::estimator::{Estimator, EstimatorState, StepOutput};
    pub use crate::interval::{zonotope_inclusion, Interval, IntervalMatrix};
    pub use crate::model::{Nonlinearity, SystemModel, UncertaintyBounds};
    pub use crate::simkit::{self, ExperimentConfig, NoiseDistribution, NoiseSpec};
    pub use crate::synthesis::{synthesize, PhiSchedule, SynthesisConfig, SynthesisResult, V0Bound};
    pub use crate::zonotope::{BoxSet, Zonotope};
}
