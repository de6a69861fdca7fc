//! Linear-objective SDP over affine symmetric matrix constraints, solved with
//! Clarabel's interior-point method.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `F(x) = F₀ + Σⱼ xⱼ·Fⱼ` with symmetric `Fⱼ`.
#[derive(Clone, Debug)]
pub struct AffineSymMatrix {
    pub constant: DMatrix<f64>,
    pub coefficients: Vec<DMatrix<f64>>,
}

impl AffineSymMatrix {
    /// Recovers the affine representation of `f` by evaluating it at the
    /// origin and at every unit vector. `f` must be affine in its argument.
    pub fn from_affine_fn(num_vars: usize, f: impl Fn(&[f64]) -> DMatrix<f64>) -> Self {
        let mut x = vec![0.0; num_vars];
        let constant = f(&x);
        let coefficients = (0..num_vars)
            .map(|j| {
                x[j] = 1.0;
                let m = f(&x) - &constant;
                x[j] = 0.0;
                m
            })
            .collect();
        Self { constant, coefficients }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (c, &v) in self.coefficients.iter().zip(x) {
            if v != 0.0 {
                out += c * v;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Definiteness {
    /// `F(x) ⪯ −margin·I`
    Negative,
    /// `F(x) ⪰ margin·I`
    Positive,
}

#[derive(Clone, Debug)]
pub struct LmiConstraint {
    pub matrix: AffineSymMatrix,
    pub sense: Definiteness,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverSettings {
    pub max_iter: u32,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub tol_feas: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { max_iter: 200, tol_gap_abs: 1e-9, tol_gap_rel: 1e-9, tol_feas: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SdpOutcome {
    Solved { x: DVector<f64>, objective: f64, status: String, iterations: u32 },
    Infeasible { status: String },
}

/// Minimizes `cᵀx` subject to LMIs and `xⱼ ≥ lower_j` for the listed indices.
pub fn solve(
    objective: &[f64],
    lmis: &[LmiConstraint],
    lower_bounds: &[(usize, f64)],
    settings: &SolverSettings,
) -> Result<SdpOutcome> {
    let nvar = objective.len();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();

    // s = b − A x must lie in each cone
    for lmi in lmis {
        let d = lmi.matrix.dim();
        let sign = match lmi.sense {
            // s = −F(x) − εI
            Definiteness::Negative => -1.0,
            // s = F(x) − εI
            Definiteness::Positive => 1.0,
        };
        let row0 = b.len();
        let rhs = lmi.matrix.constant.clone() * sign - DMatrix::identity(d, d) * lmi.margin;
        b.extend(svec(&rhs));
        for (j, coeff) in lmi.matrix.coefficients.iter().enumerate() {
            for (r, v) in svec(coeff).into_iter().enumerate() {
                if v != 0.0 {
                    rows.push(row0 + r);
                    cols.push(j);
                    vals.push(-sign * v);
                }
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(d));
    }
    if !lower_bounds.is_empty() {
        // s = x_j − lb ≥ 0
        for &(j, lb) in lower_bounds {
            rows.push(b.len());
            cols.push(j);
            vals.push(-1.0);
            b.push(-lb);
        }
        cones.push(SupportedConeT::NonnegativeConeT(lower_bounds.len()));
    }

    let a = CscMatrix::new_from_triplets(b.len(), nvar, rows, cols, vals);
    let p = CscMatrix::<f64>::zeros((nvar, nvar));
    let solver_settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iter)
        .tol_gap_abs(settings.tol_gap_abs)
        .tol_gap_rel(settings.tol_gap_rel)
        .tol_feas(settings.tol_feas)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, objective, &a, &b, &cones, solver_settings)
        .map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
    solver.solve();

    let status = solver.solution.status;
    let status_name = format!("{status:?}");
    log::debug!(
        "sdp: {} vars, {} cone rows, status {status_name}, {} iterations",
        nvar,
        b.len(),
        solver.solution.iterations
    );
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(SdpOutcome::Solved {
            x: DVector::from_vec(solver.solution.x.clone()),
            objective: solver.solution.obj_val,
            status: status_name,
            iterations: solver.solution.iterations,
        }),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Ok(SdpOutcome::Infeasible { status: status_name })
        }
        _ => Err(Error::Solver(status_name)),
    }
}

/// Upper triangle, column by column, off-diagonals scaled by `√2`.
fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for i in 0..=j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}
