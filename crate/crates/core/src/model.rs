//! System description `x⁺ = A·x + B·u + f(x) + D₁·w`, `y = C·x + D₂·v`
//! and its bounded-uncertainty data.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalMatrix, JacobianEnclosure};
use crate::zonotope::BoxSet;

/// The nonlinear part `f` of the state map together with an interval
/// enclosure of its Jacobian.
///
/// Implementations must return an enclosure that contains `∂f/∂x(x)` for every
/// `x` in the given box and that lies inside the model's global Jacobian
/// bounds.
pub trait Nonlinearity: Debug + Send + Sync {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;

    fn jacobian_enclosure(&self, domain: &BoxSet) -> Result<IntervalMatrix>;
}

/// `f ≡ 0`.
#[derive(Clone, Debug)]
pub struct ZeroNonlinearity {
    pub dim: usize,
}

impl Nonlinearity for ZeroNonlinearity {
    fn eval(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn jacobian_enclosure(&self, _domain: &BoxSet) -> Result<IntervalMatrix> {
        Ok(IntervalMatrix::point(DMatrix::zeros(self.dim, self.dim)))
    }
}

/// Discretized pendulum gravity term `f(x) = [0, −c·sin(x₁)]`.
#[derive(Clone, Debug)]
pub struct PendulumGravity {
    pub coefficient: f64,
}

impl Nonlinearity for PendulumGravity {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0, -self.coefficient * x[0].sin()])
    }

    fn jacobian_enclosure(&self, domain: &BoxSet) -> Result<IntervalMatrix> {
        if domain.dim() != 2 {
            return Err(Error::dims("PendulumGravity", (domain.dim(), 1), (2, 1)));
        }
        let angle = Interval::new(domain.lower()[0], domain.upper()[0]);
        let d21 = angle.cos().scale(-self.coefficient);
        Ok(IntervalMatrix::from_fn(2, 2, |i, j| if (i, j) == (1, 0) { d21 } else { Interval::point(0.0) }))
    }
}

/// Linear perturbation `f(x) = ΔA·x` of an uncertain linear system.
///
/// `delta` is the realized perturbation; the Jacobian enclosure is the
/// constant interval matrix `[ΔA]`, independent of the state.
#[derive(Clone, Debug)]
pub struct LinearPerturbation {
    delta: DMatrix<f64>,
    range: IntervalMatrix,
}

impl LinearPerturbation {
    pub fn new(delta: DMatrix<f64>, range: IntervalMatrix) -> Result<Self> {
        if !delta.is_square() || delta.shape() != range.shape() {
            return Err(Error::dims("LinearPerturbation", delta.shape(), range.shape()));
        }
        if !range.contains(&delta) {
            return Err(Error::InvalidArgument("realized perturbation lies outside its interval".into()));
        }
        Ok(Self { delta, range })
    }

    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn range(&self) -> &IntervalMatrix {
        &self.range
    }
}

impl Nonlinearity for LinearPerturbation {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.delta * x
    }

    fn jacobian_enclosure(&self, _domain: &BoxSet) -> Result<IntervalMatrix> {
        Ok(self.range.clone())
    }
}

/// System matrices, nonlinearity and global Jacobian bounds `[J̲, J̄]`.
#[derive(Clone, Debug)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    f: Arc<dyn Nonlinearity>,
    jacobian_bounds: IntervalMatrix,
}

impl JacobianEnclosure for SystemModel {
    fn jacobian_enclosure(&self, domain: &BoxSet) -> Result<IntervalMatrix> {
        self.f.jacobian_enclosure(domain)
    }
}

impl SystemModel {
    /// Validates that all shapes agree. `b` may have zero columns.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d1: DMatrix<f64>,
        d2: DMatrix<f64>,
        f: Arc<dyn Nonlinearity>,
        jacobian_bounds: IntervalMatrix,
    ) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::dims("SystemModel A", a.shape(), (n, n)));
        }
        if b.nrows() != n {
            return Err(Error::dims("SystemModel B", b.shape(), (n, b.ncols())));
        }
        if c.ncols() != n {
            return Err(Error::dims("SystemModel C", c.shape(), (c.nrows(), n)));
        }
        if d1.nrows() != n {
            return Err(Error::dims("SystemModel D1", d1.shape(), (n, d1.ncols())));
        }
        if d2.nrows() != c.nrows() {
            return Err(Error::dims("SystemModel D2", d2.shape(), (c.nrows(), d2.ncols())));
        }
        if jacobian_bounds.shape() != (n, n) {
            return Err(Error::dims("SystemModel Jacobian bounds", jacobian_bounds.shape(), (n, n)));
        }
        Ok(Self { a, b, c, d1, d2, f, jacobian_bounds })
    }

    /// Discretized pendulum with step `h`: `A = [[1, h], [0, 1]]`,
    /// `f = [0, −h·sin(x₁)]`, position measured through `C = [1, 0]`.
    pub fn pendulum(h: f64, d2: f64) -> Self {
        let jac = IntervalMatrix::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -h.abs(), 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, h.abs(), 0.0]),
        )
        .expect("ordered bounds");
        Self::new(
            DMatrix::from_row_slice(2, 2, &[1.0, h, 0.0, 1.0]),
            DMatrix::zeros(2, 0),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, d2),
            Arc::new(PendulumGravity { coefficient: h }),
            jac,
        )
        .expect("consistent pendulum shapes")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }
    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }
    pub fn nonlinearity(&self) -> &dyn Nonlinearity {
        self.f.as_ref()
    }
    pub fn jacobian_bounds(&self) -> &IntervalMatrix {
        &self.jacobian_bounds
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }
    pub fn ny(&self) -> usize {
        self.c.nrows()
    }
    pub fn nu(&self) -> usize {
        self.b.ncols()
    }
    pub fn nw(&self) -> usize {
        self.d1.ncols()
    }
    pub fn nv(&self) -> usize {
        self.d2.ncols()
    }

    pub fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        self.f.eval(x)
    }

    /// `B·u`, treating an empty input as zero.
    pub(crate) fn input_term(&self, u: &DVector<f64>) -> DVector<f64> {
        if self.nu() == 0 || u.is_empty() {
            DVector::zeros(self.nx())
        } else {
            &self.b * u
        }
    }
}

/// Amplitude bounds `|w| ≤ w̄`, `|v| ≤ v̄`, `|x₀ − p₀| ≤ x̄₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBounds {
    pub w_bar: DVector<f64>,
    pub v_bar: DVector<f64>,
    pub x0_center: DVector<f64>,
    pub x0_radius: DVector<f64>,
}

impl UncertaintyBounds {
    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        let check = |name: &str, v: &DVector<f64>, len: usize, nonneg: bool| -> Result<()> {
            if v.len() != len {
                return Err(Error::InvalidArgument(format!("{name} has length {}, expected {len}", v.len())));
            }
            if nonneg && v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative")));
            }
            Ok(())
        };
        check("w_bar", &self.w_bar, model.nw(), true)?;
        check("v_bar", &self.v_bar, model.nv(), true)?;
        check("x0_center", &self.x0_center, model.nx(), false)?;
        check("x0_radius", &self.x0_radius, model.nx(), true)
    }

    /// `M_w = diag(w̄)`.
    pub fn mw(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.w_bar)
    }

    /// `M_v = diag(v̄)`.
    pub fn mv(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.v_bar)
    }

    /// `M_{x,0} = diag(x̄₀)`.
    pub fn mx0(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.x0_radius)
    }
}
