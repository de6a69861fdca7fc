//! Offline observer design.
//!
//! The gain `L` of the point observer comes from a semidefinite program: find
//! `P ≻ 0, W, U, a, b, γ, μ_w, μ_v` minimizing `μ = μ_w + μ_v` such that a
//! 6×6 block LMI holds at every vertex of the Jacobian box and a 4×4 block LMI
//! ties `μ` to the peak-to-peak error bound. Then `L = P⁻¹·W`, and
//!
//! ```text
//! ‖e_k‖₂ ≤ φ_k = sqrt(μ·(λ(1−λ)^k·V₀ + μ_w·w̄ᵀw̄ + μ_v·v̄ᵀv̄))
//! ```
//!
//! bounds the estimation error at every step, with `V₀ ≥ e₀ᵀ·P·e₀`.
//!
//! Strict inequalities are imposed with a margin `ε·I`. The solver output is
//! never trusted as is: every LMI is re-evaluated at the returned point and
//! checked by a symmetric eigendecomposition before the result is handed out.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ConstraintFamily, Error, InfeasibilityReport, Result};
use crate::model::{SystemModel, UncertaintyBounds};
use crate::sdp::{self, AffineSymMatrix, Definiteness, LmiConstraint, SdpOutcome, SolverSettings};
use crate::zonotope::BoxSet;

/// Default cap on the number of non-degenerate Jacobian entries (`2^20` vertices).
pub const DEFAULT_VERTEX_CAP: usize = 20;

/// Largest state dimension for which `V₀` is bounded by exact vertex enumeration.
pub const MAX_V0_VERTEX_DIM: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Decay rate `λ ∈ (0, 1)`.
    pub lambda: f64,
    /// `ε` in `F ⪯ −ε·I` / `G ⪰ ε·I` and in the scalar positivity constraints.
    pub strictness_margin: f64,
    /// Maximum number of free Jacobian entries.
    pub vertex_cap: usize,
    /// When set, every `λ` in the grid is tried and the smallest `μ` wins.
    pub lambda_grid: Option<Vec<f64>>,
    pub solver: SolverSettings,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            strictness_margin: 1e-7,
            vertex_cap: DEFAULT_VERTEX_CAP,
            lambda_grid: None,
            solver: SolverSettings::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |l: f64| l > 0.0 && l < 1.0;
        if !in_range(self.lambda) {
            return Err(Error::InvalidArgument("lambda must be in (0,1)".into()));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() || !grid.iter().all(|&l| in_range(l)) {
                return Err(Error::InvalidArgument("lambda_grid must be non-empty with every entry in (0,1)".into()));
            }
        }
        if !(self.strictness_margin > 0.0) {
            return Err(Error::InvalidArgument("strictness_margin must be positive".into()));
        }
        Ok(())
    }
}

/// Index map of the decision vector `x = [svec(P), vec(W), vec(U), a, b, γ, μ_w, μ_v]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecisionLayout {
    nx: usize,
    ny: usize,
}

impl DecisionLayout {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    pub fn for_model(model: &SystemModel) -> Self {
        Self::new(model.nx(), model.ny())
    }

    fn p_len(&self) -> usize {
        self.nx * (self.nx + 1) / 2
    }

    fn w_offset(&self) -> usize {
        self.p_len()
    }

    fn u_offset(&self) -> usize {
        self.w_offset() + self.nx * self.ny
    }

    fn scalar_offset(&self) -> usize {
        self.u_offset() + self.nx * self.nx
    }

    pub fn len(&self) -> usize {
        self.scalar_offset() + 5
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn a_index(&self) -> usize {
        self.scalar_offset()
    }
    pub fn b_index(&self) -> usize {
        self.scalar_offset() + 1
    }
    pub fn gamma_index(&self) -> usize {
        self.scalar_offset() + 2
    }
    pub fn mu_w_index(&self) -> usize {
        self.scalar_offset() + 3
    }
    pub fn mu_v_index(&self) -> usize {
        self.scalar_offset() + 4
    }

    pub fn unpack(&self, x: &[f64]) -> DecisionValues {
        let n = self.nx;
        let mut p = DMatrix::zeros(n, n);
        let mut k = 0;
        for j in 0..n {
            for i in 0..=j {
                p[(i, j)] = x[k];
                p[(j, i)] = x[k];
                k += 1;
            }
        }
        let w = DMatrix::from_row_slice(n, self.ny, &x[self.w_offset()..self.u_offset()]);
        let u = DMatrix::from_row_slice(n, n, &x[self.u_offset()..self.scalar_offset()]);
        let s = &x[self.scalar_offset()..];
        DecisionValues { p, w, u, a: s[0], b: s[1], gamma: s[2], mu_w: s[3], mu_v: s[4] }
    }

    pub fn pack(&self, v: &DecisionValues) -> Vec<f64> {
        let n = self.nx;
        let mut x = Vec::with_capacity(self.len());
        for j in 0..n {
            for i in 0..=j {
                x.push(0.5 * (v.p[(i, j)] + v.p[(j, i)]));
            }
        }
        for i in 0..n {
            for j in 0..self.ny {
                x.push(v.w[(i, j)]);
            }
        }
        for i in 0..n {
            for j in 0..n {
                x.push(v.u[(i, j)]);
            }
        }
        x.extend([v.a, v.b, v.gamma, v.mu_w, v.mu_v]);
        x
    }
}

/// Values of the LMI decision variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionValues {
    pub p: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub mu_w: f64,
    pub mu_v: f64,
}

impl DecisionValues {
    pub fn mu(&self) -> f64 {
        self.mu_w + self.mu_v
    }
}

/// Lists the vertex matrices of `[lower, upper]`.
///
/// Each entry with `lower < upper` takes either bound; equal entries stay
/// fixed. Order is lexicographic over free entries in row-major order with the
/// lower bound first, so the first free entry varies slowest.
pub fn enumerate_vertices(lower: &DMatrix<f64>, upper: &DMatrix<f64>, cap: usize) -> Result<Vec<DMatrix<f64>>> {
    if lower.shape() != upper.shape() {
        return Err(Error::dims("enumerate_vertices", lower.shape(), upper.shape()));
    }
    let (r, c) = lower.shape();
    let mut free = Vec::new();
    for i in 0..r {
        for j in 0..c {
            let (l, u) = (lower[(i, j)], upper[(i, j)]);
            if !(l <= u) {
                return Err(Error::InvalidArgument(format!("Jacobian bound entry ({i},{j}) has lower > upper")));
            }
            if l < u {
                free.push((i, j));
            }
        }
    }
    if free.len() > cap {
        return Err(Error::VertexExplosion { free: free.len(), cap });
    }
    let count = 1usize << free.len();
    let f = free.len();
    Ok((0..count)
        .map(|code| {
            let mut m = lower.clone();
            for (t, &(i, j)) in free.iter().enumerate() {
                if (code >> (f - 1 - t)) & 1 == 1 {
                    m[(i, j)] = upper[(i, j)];
                }
            }
            m
        })
        .collect())
}

fn set_sym_block(m: &mut DMatrix<f64>, r0: usize, c0: usize, block: &DMatrix<f64>) {
    m.view_mut((r0, c0), block.shape()).copy_from(block);
    if r0 != c0 {
        m.view_mut((c0, r0), (block.ncols(), block.nrows())).copy_from(&block.transpose());
    }
}

/// Numeric value of the per-vertex LMI matrix at `v`.
///
/// Block rows: error, nonlinearity increment, process disturbance,
/// measurement noise, `P`-coupling row, and the `U·J` slack row.
pub fn vertex_lmi_matrix(model: &SystemModel, lambda: f64, j: &DMatrix<f64>, v: &DecisionValues) -> DMatrix<f64> {
    let (n, nw, nv) = (model.nx(), model.nw(), model.nv());
    let o2 = n;
    let o3 = 2 * n;
    let o4 = o3 + nw;
    let o5 = o4 + nv;
    let o6 = o5 + n;
    let dim = o6 + n;
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::zeros(dim, dim);

    let phi11 = &v.p * (lambda - 1.0) + (j + j.transpose()) * v.a;
    set_sym_block(&mut m, 0, 0, &phi11);
    set_sym_block(&mut m, o2, 0, &(-&id * v.a));
    set_sym_block(&mut m, o2, o2, &(-&id * v.b));
    set_sym_block(&mut m, o3, o3, &(-DMatrix::identity(nw, nw) * v.gamma));
    set_sym_block(&mut m, o4, o4, &(-DMatrix::identity(nv, nv) * v.gamma));
    let phi51 = &v.p * model.a() - &v.w * model.c();
    set_sym_block(&mut m, o5, 0, &phi51);
    set_sym_block(&mut m, o5, o2, &v.p);
    set_sym_block(&mut m, o5, o3, &(&v.p * model.d1()));
    set_sym_block(&mut m, o5, o4, &(-(&v.w * model.d2())));
    set_sym_block(&mut m, o5, o5, &(-&v.p));
    set_sym_block(&mut m, o6, 0, &(&v.u * j));
    let phi66 = &id * v.b - &v.u - v.u.transpose();
    set_sym_block(&mut m, o6, o6, &phi66);
    m
}

/// Numeric value of the peak-to-peak bound LMI matrix at `v`, with `μ = μ_w + μ_v`.
pub fn bound_lmi_matrix(nx: usize, nw: usize, nv: usize, lambda: f64, v: &DecisionValues) -> DMatrix<f64> {
    let o2 = nx;
    let o3 = o2 + nw;
    let o4 = o3 + nv;
    let dim = o4 + nx;
    let mut m = DMatrix::zeros(dim, dim);
    set_sym_block(&mut m, 0, 0, &(&v.p * lambda));
    set_sym_block(&mut m, o2, o2, &(DMatrix::identity(nw, nw) * (v.mu_w - v.gamma)));
    set_sym_block(&mut m, o3, o3, &(DMatrix::identity(nv, nv) * (v.mu_v - v.gamma)));
    set_sym_block(&mut m, o4, 0, &DMatrix::identity(nx, nx));
    set_sym_block(&mut m, o4, o4, &(DMatrix::identity(nx, nx) * v.mu()));
    m
}

/// Per-vertex LMI as an affine function of the decision vector, constrained
/// `⪯ −ε·I`.
pub fn assemble_vertex_lmi(model: &SystemModel, config: &SynthesisConfig, j_i: &DMatrix<f64>) -> Result<LmiConstraint> {
    let n = model.nx();
    if j_i.shape() != (n, n) {
        return Err(Error::dims("assemble_vertex_lmi", j_i.shape(), (n, n)));
    }
    let bounds = model.jacobian_bounds();
    let slack = 1e-12 * (1.0 + bounds.lower().amax().max(bounds.upper().amax()));
    let outside = j_i
        .iter()
        .zip(bounds.lower().iter().zip(bounds.upper().iter()))
        .any(|(v, (l, u))| *v < l - slack || *v > u + slack);
    if outside {
        return Err(Error::InvalidArgument("vertex matrix lies outside the Jacobian bounds".into()));
    }
    let layout = DecisionLayout::for_model(model);
    let lambda = config.lambda;
    let matrix =
        AffineSymMatrix::from_affine_fn(layout.len(), |x| vertex_lmi_matrix(model, lambda, j_i, &layout.unpack(x)));
    Ok(LmiConstraint { matrix, sense: Definiteness::Negative, margin: config.strictness_margin })
}

/// Peak-to-peak bound LMI as an affine function of the decision vector,
/// constrained `⪰ ε·I`.
pub fn assemble_bound_lmi(model: &SystemModel, config: &SynthesisConfig) -> LmiConstraint {
    let layout = DecisionLayout::for_model(model);
    let (nx, nw, nv, lambda) = (model.nx(), model.nw(), model.nv(), config.lambda);
    let matrix =
        AffineSymMatrix::from_affine_fn(layout.len(), |x| bound_lmi_matrix(nx, nw, nv, lambda, &layout.unpack(x)));
    LmiConstraint { matrix, sense: Definiteness::Positive, margin: config.strictness_margin }
}

/// Eigenvalue margins of the returned certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateMargins {
    /// Largest eigenvalue of each vertex LMI (must be `≤ −ε/2`).
    pub vertex_max_eigenvalues: Vec<f64>,
    /// Smallest eigenvalue of the bound LMI (must be `≥ ε/2`).
    pub bound_min_eigenvalue: f64,
    pub p_min_eigenvalue: f64,
    /// `‖P·L − W‖∞`.
    pub gain_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub gain: DMatrix<f64>,
    pub decision: DecisionValues,
    pub mu: f64,
    pub lambda: f64,
    pub vertex_count: usize,
    pub strictness_margin: f64,
    pub solver_status: String,
    pub iterations: u32,
    pub certificate: CertificateMargins,
}

impl SynthesisResult {
    pub fn p(&self) -> &DMatrix<f64> {
        &self.decision.p
    }
    pub fn mu_w(&self) -> f64 {
        self.decision.mu_w
    }
    pub fn mu_v(&self) -> f64 {
        self.decision.mu_v
    }

    pub fn report(&self) -> SynthesisReport {
        SynthesisReport {
            lambda: self.lambda,
            vertex_count: self.vertex_count,
            solver_status: self.solver_status.clone(),
            iterations: self.iterations,
            mu_w: self.decision.mu_w,
            mu_v: self.decision.mu_v,
            mu: self.mu,
            gamma: self.decision.gamma,
            a: self.decision.a,
            b: self.decision.b,
            gain: rows(&self.gain),
            p: rows(&self.decision.p),
            strictness_margin: self.strictness_margin,
            certificate: self.certificate.clone(),
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Structured synthesis summary written by the `synthesize` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub lambda: f64,
    pub vertex_count: usize,
    pub solver_status: String,
    pub iterations: u32,
    pub mu_w: f64,
    pub mu_v: f64,
    pub mu: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub gain: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub strictness_margin: f64,
    pub certificate: CertificateMargins,
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Solves the min-`μ` observer design program.
pub fn synthesize(
    model: &SystemModel,
    bounds: &UncertaintyBounds,
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    config.validate()?;
    bounds.validate(model)?;
    let jb = model.jacobian_bounds();
    let vertices = enumerate_vertices(jb.lower(), jb.upper(), config.vertex_cap)?;

    let Some(grid) = &config.lambda_grid else {
        return solve_for_lambda(model, &vertices, config);
    };
    let mut best: Option<SynthesisResult> = None;
    let mut last_err = None;
    for &lambda in grid {
        let cfg = SynthesisConfig { lambda, lambda_grid: None, ..config.clone() };
        match solve_for_lambda(model, &vertices, &cfg) {
            Ok(r) => {
                log::info!("lambda {lambda}: mu = {}", r.mu);
                if best.as_ref().is_none_or(|b| r.mu < b.mu) {
                    best = Some(r);
                }
            }
            Err(e) => {
                log::info!("lambda {lambda}: {e}");
                last_err = Some(e);
            }
        }
    }
    best.ok_or_else(|| last_err.expect("non-empty grid"))
}

fn solve_for_lambda(
    model: &SystemModel,
    vertices: &[DMatrix<f64>],
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    let layout = DecisionLayout::for_model(model);
    let eps = config.strictness_margin;
    let mut lmis = vertices.iter().map(|j| assemble_vertex_lmi(model, config, j)).collect::<Result<Vec<_>>>()?;
    let vertex_lmis = lmis.len();
    lmis.push(assemble_bound_lmi(model, config));

    let scalars: Vec<(usize, f64)> =
        [layout.a_index(), layout.b_index(), layout.gamma_index(), layout.mu_w_index(), layout.mu_v_index()]
            .into_iter()
            .map(|i| (i, eps))
            .collect();
    let mut objective = vec![0.0; layout.len()];
    objective[layout.mu_w_index()] = 1.0;
    objective[layout.mu_v_index()] = 1.0;

    let (x, status, iterations) = match sdp::solve(&objective, &lmis, &scalars, &config.solver)? {
        SdpOutcome::Solved { x, status, iterations, .. } => (x, status, iterations),
        SdpOutcome::Infeasible { status } => {
            return Err(Error::Infeasible(diagnose_infeasibility(
                &lmis[..vertex_lmis],
                &scalars,
                layout.len(),
                config,
                status,
            )?));
        }
    };

    let decision = layout.unpack(x.as_slice());
    let certificate_err = |msg: String| Error::CertificateRejected(msg);
    let chol = decision.p.clone().cholesky().ok_or_else(|| certificate_err("P is not positive definite".into()))?;
    let gain = chol.solve(&decision.w);

    let certificate = revalidate(model, vertices, config.lambda, eps, &decision, &gain)?;
    let mu = decision.mu();
    Ok(SynthesisResult {
        gain,
        decision,
        mu,
        lambda: config.lambda,
        vertex_count: vertices.len(),
        strictness_margin: eps,
        solver_status: status,
        iterations,
        certificate,
    })
}

fn diagnose_infeasibility(
    vertex_lmis: &[LmiConstraint],
    scalars: &[(usize, f64)],
    nvar: usize,
    config: &SynthesisConfig,
    status: String,
) -> Result<InfeasibilityReport> {
    let zero = vec![0.0; nvar];
    let infeasible = |lmis: &[LmiConstraint]| -> Result<bool> {
        Ok(matches!(sdp::solve(&zero, lmis, scalars, &config.solver)?, SdpOutcome::Infeasible { .. }))
    };
    let family_infeasible = infeasible(vertex_lmis).unwrap_or(true);
    let mut vertex = None;
    if family_infeasible {
        for (i, lmi) in vertex_lmis.iter().enumerate() {
            if infeasible(std::slice::from_ref(lmi)).unwrap_or(false) {
                vertex = Some(i);
                break;
            }
        }
    }
    Ok(InfeasibilityReport {
        family: if family_infeasible { ConstraintFamily::VertexStability } else { ConstraintFamily::PeakToPeakBound },
        vertex,
        solver_status: status,
        lambda: config.lambda,
    })
}

/// Re-evaluates every LMI at the returned point with an independent
/// eigendecomposition. Vertex LMIs must reach `−ε/2`, the bound LMI `+ε/2`.
fn revalidate(
    model: &SystemModel,
    vertices: &[DMatrix<f64>],
    lambda: f64,
    margin: f64,
    v: &DecisionValues,
    gain: &DMatrix<f64>,
) -> Result<CertificateMargins> {
    let vertex_max_eigenvalues: Vec<f64> =
        vertices.iter().map(|j| max_eig(&vertex_lmi_matrix(model, lambda, j, v))).collect();
    let bound_min_eigenvalue = min_eig(&bound_lmi_matrix(model.nx(), model.nw(), model.nv(), lambda, v));
    let p_min_eigenvalue = min_eig(&v.p);
    let gain_residual = (&v.p * gain - &v.w).amax();
    let certificate =
        CertificateMargins { vertex_max_eigenvalues, bound_min_eigenvalue, p_min_eigenvalue, gain_residual };

    if let Some((i, e)) = certificate.vertex_max_eigenvalues.iter().enumerate().find(|(_, &e)| !(e <= -0.5 * margin)) {
        return Err(Error::CertificateRejected(format!(
            "vertex LMI {i} has max eigenvalue {e:e} > -{:e}",
            0.5 * margin
        )));
    }
    if !(certificate.bound_min_eigenvalue >= 0.5 * margin) {
        return Err(Error::CertificateRejected(format!(
            "bound LMI has min eigenvalue {:e} < {:e}",
            certificate.bound_min_eigenvalue,
            0.5 * margin
        )));
    }
    if !(p_min_eigenvalue > 0.0) {
        return Err(Error::CertificateRejected("P is not positive definite".into()));
    }
    let scalars = [v.a, v.b, v.gamma, v.mu_w, v.mu_v];
    if scalars.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::CertificateRejected(format!("nonpositive scalar multiplier in {scalars:?}")));
    }
    if !(gain_residual <= 1e-6 * (1.0 + v.w.amax())) {
        return Err(Error::CertificateRejected(format!("gain residual {gain_residual:e}")));
    }
    Ok(certificate)
}

/// Rule for bounding `V₀ = e₀ᵀ·P·e₀` when `e₀` is only known to lie in `[−x̄₀, x̄₀]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V0Bound {
    /// Maximum over the `2ⁿ` vertices of the initial error box (exact for a
    /// convex quadratic); `λ_max(P)·‖x̄₀‖²` above [`MAX_V0_VERTEX_DIM`].
    #[default]
    BoxVertices,
    /// `x̄₀ᵀ·P·x̄₀`: the quadratic evaluated at the radius vector itself. Not a
    /// bound over the whole box when `P` has off-diagonal terms.
    RadiusVector,
    /// Exact value for a known initial error.
    InitialError(DVector<f64>),
}

/// Value of `V₀` under the given rule.
pub fn initial_lyapunov_value(p: &DMatrix<f64>, radius: &DVector<f64>, rule: &V0Bound) -> Result<f64> {
    let n = p.nrows();
    let quad = |e: &DVector<f64>| (e.transpose() * p * e)[(0, 0)];
    match rule {
        V0Bound::BoxVertices => {
            if radius.len() != n {
                return Err(Error::dims("V0 bound", (radius.len(), 1), p.shape()));
            }
            if n > MAX_V0_VERTEX_DIM {
                let lmax = SymmetricEigen::new(p.clone()).eigenvalues.max();
                return Ok(lmax * radius.norm_squared());
            }
            Ok((0..1usize << n)
                .map(|code| {
                    let e = DVector::from_fn(n, |i, _| if (code >> i) & 1 == 1 { radius[i] } else { -radius[i] });
                    quad(&e)
                })
                .fold(0.0, f64::max))
        }
        V0Bound::RadiusVector => Ok(quad(radius)),
        V0Bound::InitialError(e0) => {
            if e0.len() != n {
                return Err(Error::dims("V0 initial error", (e0.len(), 1), p.shape()));
            }
            Ok(quad(e0))
        }
    }
}

/// Closed-form peak-to-peak radius `φ_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSchedule {
    pub mu: f64,
    pub lambda: f64,
    pub v0: f64,
    /// `μ_w·w̄ᵀw̄ + μ_v·v̄ᵀv̄`
    pub disturbance_term: f64,
}

impl PhiSchedule {
    pub fn new(result: &SynthesisResult, bounds: &UncertaintyBounds, rule: &V0Bound) -> Result<Self> {
        let v0 = initial_lyapunov_value(result.p(), &bounds.x0_radius, rule)?;
        Ok(Self {
            mu: result.mu,
            lambda: result.lambda,
            v0,
            disturbance_term: result.mu_w() * bounds.w_bar.norm_squared() + result.mu_v() * bounds.v_bar.norm_squared(),
        })
    }

    pub fn at(&self, k: usize) -> f64 {
        let decay = (1.0 - self.lambda).powf(k as f64);
        (self.mu * (self.lambda * decay * self.v0 + self.disturbance_term)).sqrt()
    }

    /// `lim φ_k = sqrt(μ·(μ_w·w̄ᵀw̄ + μ_v·v̄ᵀv̄))`.
    pub fn limit(&self) -> f64 {
        (self.mu * self.disturbance_term).sqrt()
    }

    pub fn values(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max).map(|k| self.at(k)).collect()
    }
}

/// `φ_0..=φ_{k_max}` with the default `V₀` rule.
pub fn phi_schedule(result: &SynthesisResult, bounds: &UncertaintyBounds, k_max: usize) -> Result<Vec<f64>> {
    Ok(PhiSchedule::new(result, bounds, &V0Bound::default())?.values(k_max))
}

/// `[x̂ − φ·1, x̂ + φ·1]`.
pub fn bounded_error_interval(x_hat: &DVector<f64>, phi: f64) -> Result<BoxSet> {
    if !(phi >= 0.0) {
        return Err(Error::InvalidArgument(format!("phi must be nonnegative, got {phi}")));
    }
    let r = DVector::from_element(x_hat.len(), phi);
    BoxSet::centered(x_hat, &r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::IntervalMatrix;
    use crate::model::ZeroNonlinearity;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn pendulum() -> (SystemModel, UncertaintyBounds) {
        let bounds = UncertaintyBounds {
            w_bar: dvector![0.006, 0.006],
            v_bar: dvector![0.01],
            x0_center: dvector![0.98, 0.02],
            x0_radius: dvector![0.1, 1.0],
        };
        (SystemModel::pendulum(0.065, 0.1), bounds)
    }

    fn linear(a: DMatrix<f64>, c: DMatrix<f64>) -> SystemModel {
        let (n, ny) = (a.nrows(), c.nrows());
        SystemModel::new(
            a,
            DMatrix::zeros(n, 0),
            c,
            DMatrix::identity(n, n),
            DMatrix::identity(ny, ny),
            Arc::new(ZeroNonlinearity { dim: n }),
            IntervalMatrix::point(DMatrix::zeros(n, n)),
        )
        .unwrap()
    }

    fn unit_bounds(n: usize, ny: usize) -> UncertaintyBounds {
        UncertaintyBounds {
            w_bar: DVector::from_element(n, 0.1),
            v_bar: DVector::from_element(ny, 0.1),
            x0_center: DVector::zeros(n),
            x0_radius: DVector::from_element(n, 1.0),
        }
    }

    /// Five-block form `[[Γ₁₁, …], [−aI, −bI], …, [P(A−LC), P, PD₁, −PLD₂, −P]]`
    /// built directly from `L`, with the `b·JᵀJ` term kept explicit.
    fn direct_form(
        model: &SystemModel,
        lambda: f64,
        j: &DMatrix<f64>,
        v: &DecisionValues,
        l: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let (n, nw, nv) = (model.nx(), model.nw(), model.nv());
        let dim = 3 * n + nw + nv;
        let mut m = DMatrix::zeros(dim, dim);
        let g11 = &v.p * (lambda - 1.0) + (j + j.transpose()) * v.a + j.transpose() * j * v.b;
        set_sym_block(&mut m, 0, 0, &g11);
        set_sym_block(&mut m, n, 0, &(-DMatrix::identity(n, n) * v.a));
        set_sym_block(&mut m, n, n, &(-DMatrix::identity(n, n) * v.b));
        set_sym_block(&mut m, 2 * n, 2 * n, &(-DMatrix::identity(nw, nw) * v.gamma));
        set_sym_block(&mut m, 2 * n + nw, 2 * n + nw, &(-DMatrix::identity(nv, nv) * v.gamma));
        let r = 2 * n + nw + nv;
        set_sym_block(&mut m, r, 0, &(&v.p * (model.a() - l * model.c())));
        set_sym_block(&mut m, r, n, &v.p);
        set_sym_block(&mut m, r, 2 * n, &(&v.p * model.d1()));
        set_sym_block(&mut m, r, 2 * n + nw, &(-(&v.p * l * model.d2())));
        set_sym_block(&mut m, r, r, &(-&v.p));
        m
    }

    /// `Ψ + Ξ` over `ζ = [e, Δf, w, v]`, assembled from the error dynamics.
    fn lyapunov_form(
        model: &SystemModel,
        lambda: f64,
        j: &DMatrix<f64>,
        v: &DecisionValues,
        l: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let (n, nw, nv) = (model.nx(), model.nw(), model.nv());
        // e⁺ = Ã·e + Δf + D₁·w − L·D₂·v
        let g = crate::zonotope::hcat(&[
            &(model.a() - l * model.c()),
            &DMatrix::identity(n, n),
            model.d1(),
            &(-(l * model.d2())),
        ]);
        let mut psi = g.transpose() * &v.p * &g;
        let mut xi = DMatrix::zeros(psi.nrows(), psi.ncols());
        let x11 = &v.p * (lambda - 1.0) + (j + j.transpose()) * v.a + j.transpose() * j * v.b;
        set_sym_block(&mut xi, 0, 0, &x11);
        set_sym_block(&mut xi, n, 0, &(-DMatrix::identity(n, n) * v.a));
        set_sym_block(&mut xi, n, n, &(-DMatrix::identity(n, n) * v.b));
        set_sym_block(&mut xi, 2 * n, 2 * n, &(-DMatrix::identity(nw, nw) * v.gamma));
        set_sym_block(&mut xi, 2 * n + nw, 2 * n + nw, &(-DMatrix::identity(nv, nv) * v.gamma));
        psi += xi;
        psi
    }

    #[test]
    fn pendulum_has_two_vertices() {
        let (m, _) = pendulum();
        let jb = m.jacobian_bounds();
        let v = enumerate_vertices(jb.lower(), jb.upper(), DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], dmatrix![0.0, 0.0; -0.065, 0.0]);
        assert_eq!(v[1], dmatrix![0.0, 0.0; 0.065, 0.0]);
    }

    #[test]
    fn degenerate_box_has_one_vertex() {
        let j = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(enumerate_vertices(&j, &j, 20).unwrap(), vec![j]);
    }

    #[test]
    fn two_free_entries_match_brute_force() {
        let lo = dmatrix![-1.0, 0.5; 0.0, 2.0];
        let hi = dmatrix![1.0, 0.5; 0.0, 3.0];
        let got = enumerate_vertices(&lo, &hi, 20).unwrap();
        let mut expected = Vec::new();
        for a in [-1.0, 1.0] {
            for d in [2.0, 3.0] {
                expected.push(dmatrix![a, 0.5; 0.0, d]);
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let lo = DMatrix::from_element(5, 5, -1.0);
        let hi = DMatrix::from_element(5, 5, 1.0);
        assert!(matches!(enumerate_vertices(&lo, &hi, 20), Err(Error::VertexExplosion { free: 25, cap: 20 })));
    }

    #[test]
    fn layout_round_trip() {
        let layout = DecisionLayout::new(3, 2);
        let x: Vec<f64> = (0..layout.len()).map(|i| i as f64 * 0.5 - 3.0).collect();
        assert_eq!(layout.pack(&layout.unpack(&x)), x);
    }

    #[test]
    fn zero_jacobian_leaves_lambda_p_minus_p() {
        let (m, _) = pendulum();
        let layout = DecisionLayout::for_model(&m);
        let x: Vec<f64> = (0..layout.len()).map(|i| 1.0 + i as f64).collect();
        let v = layout.unpack(&x);
        let mat = vertex_lmi_matrix(&m, 0.3, &DMatrix::zeros(2, 2), &v);
        assert!((mat.view((0, 0), (2, 2)) - (&v.p * 0.3 - &v.p)).amax() < 1e-12);
        assert_eq!(mat.view((9, 0), (2, 2)), DMatrix::<f64>::zeros(2, 2));
    }

    #[test]
    fn lambda_outside_unit_interval_rejected() {
        let (m, b) = pendulum();
        for l in [0.0, 1.0, 1.5, -0.1] {
            let err = synthesize(&m, &b, &SynthesisConfig::with_lambda(l)).unwrap_err();
            assert_eq!(err.to_string(), "invalid argument: lambda must be in (0,1)");
        }
    }

    #[test]
    fn pendulum_solution_satisfies_equivalent_forms() {
        let (m, b) = pendulum();
        let r = synthesize(&m, &b, &SynthesisConfig::default()).unwrap();
        let v = &r.decision;
        let jb = m.jacobian_bounds();
        for j in enumerate_vertices(jb.lower(), jb.upper(), 20).unwrap() {
            assert!(max_eig(&vertex_lmi_matrix(&m, r.lambda, &j, v)) < 0.0);
            let direct = direct_form(&m, r.lambda, &j, v, &r.gain);
            let lyap = lyapunov_form(&m, r.lambda, &j, v, &r.gain);
            // Schur complement of the trailing −P block
            let k = direct.nrows() - 2;
            let x = direct.view((0, 0), (k, k)).into_owned();
            let rr = direct.view((k, 0), (2, k)).into_owned();
            let schur = x + rr.transpose() * v.p.clone().try_inverse().unwrap() * rr;
            assert!((&schur - &lyap).amax() < 1e-6 * (1.0 + lyap.amax()), "{schur} vs {lyap}");
            assert!(max_eig(&direct) < 0.0);
            assert!(max_eig(&lyap) < 0.0);
        }
        assert!(min_eig(&bound_lmi_matrix(2, 2, 1, r.lambda, v)) > 0.0);
        assert!((r.mu - (r.mu_w() + r.mu_v())).abs() < 1e-12);
        assert!((&v.p * &r.gain - &v.w).amax() <= 1e-6 * (1.0 + v.w.amax()));
    }

    #[test]
    fn convex_combinations_of_vertices_stay_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lo = dmatrix![-0.05, 0.0; -0.065, -0.02];
        let hi = dmatrix![0.05, 0.0; 0.065, 0.02];
        let model = SystemModel::new(
            dmatrix![1.0, 0.065; 0.0, 1.0],
            DMatrix::zeros(2, 0),
            dmatrix![1.0, 0.0],
            DMatrix::identity(2, 2),
            dmatrix![0.1],
            Arc::new(ZeroNonlinearity { dim: 2 }),
            IntervalMatrix::new(lo.clone(), hi.clone()).unwrap(),
        )
        .unwrap();
        let (_, b) = pendulum();
        let r = synthesize(&model, &b, &SynthesisConfig::default()).unwrap();
        let vertices = enumerate_vertices(&lo, &hi, 20).unwrap();
        assert_eq!(vertices.len(), 8);
        for _ in 0..100 {
            let w: Vec<f64> = (0..vertices.len()).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = w.iter().sum();
            let j = vertices.iter().zip(&w).fold(DMatrix::zeros(2, 2), |acc, (v, t)| acc + v * (t / total));
            assert!(max_eig(&vertex_lmi_matrix(&model, r.lambda, &j, &r.decision)) < 0.0);
        }
    }

    #[test]
    fn bound_lmi_needs_mu_w_above_gamma() {
        let (m, _) = pendulum();
        let cfg = SynthesisConfig::default();
        let layout = DecisionLayout::for_model(&m);
        let bound = assemble_bound_lmi(&m, &cfg);
        let (gi, wi) = (layout.gamma_index(), layout.mu_w_index());
        let forced = LmiConstraint {
            matrix: AffineSymMatrix::from_affine_fn(layout.len(), |x| dmatrix![x[wi] - x[gi]]),
            sense: Definiteness::Negative,
            margin: 0.0,
        };
        let out = sdp::solve(&vec![0.0; layout.len()], &[bound, forced], &[], &cfg.solver).unwrap();
        assert!(matches!(out, SdpOutcome::Infeasible { .. }));
    }

    #[test]
    fn bound_lmi_feasible_for_large_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let g = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let p = &g * g.transpose() + DMatrix::identity(3, 3) * 0.1;
            let v = DecisionValues {
                p,
                w: DMatrix::zeros(3, 1),
                u: DMatrix::zeros(3, 3),
                a: 1.0,
                b: 1.0,
                gamma: 1.0,
                mu_w: 1e4,
                mu_v: 1e4,
            };
            assert!(min_eig(&bound_lmi_matrix(3, 2, 1, 0.5, &v)) > 0.0);
        }
    }

    #[test]
    fn stable_linear_model_is_feasible() {
        let a = dmatrix![0.5, 0.2; 0.0, -0.4];
        let m = linear(a, DMatrix::identity(2, 2));
        let r = synthesize(&m, &unit_bounds(2, 2), &SynthesisConfig::default()).unwrap();
        let closed = m.a() - &r.gain * m.c();
        let rho = closed.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(rho < 1.0, "spectral radius {rho}");
        assert!(r.mu.is_finite() && r.mu > 0.0);
    }

    #[test]
    fn unobservable_unstable_pair_is_infeasible() {
        let m = linear(DMatrix::identity(2, 2) * 2.0, DMatrix::zeros(1, 2));
        match synthesize(&m, &unit_bounds(2, 1), &SynthesisConfig::default()) {
            Err(Error::Infeasible(report)) => {
                assert_eq!(report.family, ConstraintFamily::VertexStability);
                assert_eq!(report.lambda, 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lambda_grid_keeps_smallest_mu() {
        let (m, b) = pendulum();
        let single = |l| synthesize(&m, &b, &SynthesisConfig::with_lambda(l)).unwrap().mu;
        let cfg = SynthesisConfig { lambda_grid: Some(vec![0.3, 0.5, 0.7]), ..SynthesisConfig::default() };
        let best = synthesize(&m, &b, &cfg).unwrap();
        let expected = [0.3, 0.5, 0.7].map(single).into_iter().fold(f64::INFINITY, f64::min);
        assert!((best.mu - expected).abs() <= 1e-9 * expected);
    }

    fn schedule(mu_w: f64, mu_v: f64, lambda: f64, v0: f64, b: &UncertaintyBounds) -> PhiSchedule {
        PhiSchedule {
            mu: mu_w + mu_v,
            lambda,
            v0,
            disturbance_term: mu_w * b.w_bar.norm_squared() + mu_v * b.v_bar.norm_squared(),
        }
    }

    #[test]
    fn phi_vanishes_without_uncertainty() {
        let mut b = unit_bounds(2, 1);
        b.w_bar.fill(0.0);
        b.v_bar.fill(0.0);
        let s = schedule(3.0, 4.0, 0.5, 0.0, &b);
        assert!(s.values(50).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn phi_is_monotone_with_closed_form_limit() {
        let (_, b) = pendulum();
        let s = schedule(15.7, 15.7, 0.5, 0.48, &b);
        let vals = s.values(1000);
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        assert!((vals[1000] - s.limit()).abs() < 1e-9);
        let expected = ((15.7 + 15.7) * (15.7 * 2.0 * 0.006f64.powi(2) + 15.7 * 1e-4)).sqrt();
        assert!((s.limit() - expected).abs() < 1e-12);
    }

    #[test]
    fn v0_rules() {
        let p = dmatrix![2.0, -1.0; -1.0, 1.0];
        let r = dvector![1.0, 1.0];
        // vertices (1,1): 1, (1,-1): 5
        assert_eq!(initial_lyapunov_value(&p, &r, &V0Bound::BoxVertices).unwrap(), 5.0);
        assert_eq!(initial_lyapunov_value(&p, &r, &V0Bound::RadiusVector).unwrap(), 1.0);
        let e0 = V0Bound::InitialError(dvector![0.5, 0.0]);
        assert_eq!(initial_lyapunov_value(&p, &r, &e0).unwrap(), 0.5);
        let big = DMatrix::<f64>::identity(13, 13) * 2.0;
        let rr = DVector::from_element(13, 1.0);
        assert!((initial_lyapunov_value(&big, &rr, &V0Bound::BoxVertices).unwrap() - 26.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_error_interval_examples() {
        let x = dvector![1.0, 0.0];
        let b = bounded_error_interval(&x, 1.15).unwrap();
        assert!((b.lower() - dvector![-0.15, -1.15]).amax() < 1e-15);
        assert!((b.upper() - dvector![2.15, 1.15]).amax() < 1e-15);
        assert_eq!(b.midpoint(), x);
        let d = bounded_error_interval(&x, 0.0).unwrap();
        assert_eq!((d.lower(), d.upper()), (&x, &x));
        assert!(bounded_error_interval(&x, -1.0).is_err());
    }
}
