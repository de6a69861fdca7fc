//! Interval scalars and matrices.
//!
//! Plain `f64` endpoint arithmetic without directed rounding. Enough to
//! enclose a Jacobian over a box and to turn an interval-matrix image of a
//! zonotope into a single enclosing zonotope.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zonotope::{hcat, BoxSet, Zonotope};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Panics if `lo > hi` or either endpoint is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn scale(self, s: f64) -> Interval {
        if s >= 0.0 {
            Interval { lo: self.lo * s, hi: self.hi * s }
        } else {
            Interval { lo: self.hi * s, hi: self.lo * s }
        }
    }

    /// Range of `sin` over the interval.
    pub fn sin(self) -> Interval {
        if self.width() >= TAU {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let (a, b) = (self.lo.sin(), self.hi.sin());
        let hi = if hits_critical_point(self, FRAC_PI_2) { 1.0 } else { a.max(b) };
        let lo = if hits_critical_point(self, -FRAC_PI_2) { -1.0 } else { a.min(b) };
        Interval { lo, hi }
    }

    /// Range of `cos` over the interval.
    pub fn cos(self) -> Interval {
        if self.width() >= TAU {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let hi = if hits_critical_point(self, 0.0) { 1.0 } else { a.max(b) };
        let lo = if hits_critical_point(self, PI) { -1.0 } else { a.min(b) };
        Interval { lo, hi }
    }
}

/// Whether `phase + 2kπ` lies in the interval for some integer `k`.
fn hits_critical_point(x: Interval, phase: f64) -> bool {
    let k_lo = ((x.lo - phase) / TAU).ceil();
    let k_hi = ((x.hi - phase) / TAU).floor();
    k_lo <= k_hi
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo + rhs.lo, hi: self.hi + rhs.hi }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo - rhs.hi, hi: self.hi - rhs.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        Interval {
            lo: p.iter().copied().fold(f64::INFINITY, f64::min),
            hi: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        self.scale(rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

/// Entrywise interval matrix `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalMatrix {
    lower: DMatrix<f64>,
    upper: DMatrix<f64>,
}

impl IntervalMatrix {
    pub fn new(lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        if lower.shape() != upper.shape() {
            return Err(Error::dims("IntervalMatrix::new", lower.shape(), upper.shape()));
        }
        if let Some((idx, _)) = lower.iter().zip(upper.iter()).enumerate().find(|(_, (l, u))| !(l <= u)) {
            let (i, j) = (idx % lower.nrows(), idx / lower.nrows());
            return Err(Error::InvalidArgument(format!("interval matrix entry ({i},{j}) has lower > upper")));
        }
        Ok(Self { lower, upper })
    }

    /// Degenerate interval matrix `[m, m]`.
    pub fn point(m: DMatrix<f64>) -> Self {
        Self { lower: m.clone(), upper: m }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Interval) -> Self {
        let mut lower = DMatrix::zeros(rows, cols);
        let mut upper = DMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let v = f(i, j);
                lower[(i, j)] = v.lo;
                upper[(i, j)] = v.hi;
            }
        }
        Self { lower, upper }
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lower.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        Interval { lo: self.lower[(i, j)], hi: self.upper[(i, j)] }
    }

    /// Midpoint matrix `(lower + upper) / 2`.
    pub fn center(&self) -> DMatrix<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    /// Radius matrix `(upper - lower) / 2`.
    pub fn radius(&self) -> DMatrix<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    /// Largest entry width; a diagnostic for enclosure tightness.
    pub fn max_width(&self) -> f64 {
        (&self.upper - &self.lower).max()
    }

    pub fn contains(&self, m: &DMatrix<f64>) -> bool {
        m.shape() == self.shape()
            && m.iter().zip(self.lower.iter().zip(self.upper.iter())).all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn is_subset_of(&self, other: &IntervalMatrix) -> bool {
        self.shape() == other.shape()
            && other.lower.iter().zip(self.lower.iter()).all(|(a, b)| a <= b)
            && self.upper.iter().zip(other.upper.iter()).all(|(a, b)| a <= b)
    }

    /// `[A]·B` for a real right factor: entry `(i, j)` is the interval sum of
    /// `[A(i, t)]·B(t, j)`.
    pub fn mul_real(&self, b: &DMatrix<f64>) -> Result<IntervalMatrix> {
        let (n, k) = self.shape();
        if b.nrows() != k {
            return Err(Error::dims("ivmat_mul_real", self.shape(), b.shape()));
        }
        let m = b.ncols();
        Ok(IntervalMatrix::from_fn(n, m, |i, j| {
            (0..k).fold(Interval::point(0.0), |acc, t| acc + self.get(i, t).scale(b[(t, j)]))
        }))
    }
}

/// Zonotope enclosing `p ⊕ [M]·B^m`: `⟨p, [Dᶜ, Dˢ]⟩` with `Dᶜ` the midpoint
/// matrix and `Dˢ = diag(‖Rᶜ(i,:)‖₁)` from the radius matrix.
pub fn zonotope_inclusion(p: &DVector<f64>, m: &IntervalMatrix) -> Result<Zonotope> {
    let (n, _) = m.shape();
    if p.len() != n {
        return Err(Error::dims("zonotope_inclusion", (p.len(), 1), m.shape()));
    }
    let dc = m.center();
    let rc = m.radius();
    let s = DVector::from_iterator(n, rc.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()));
    let ds = DMatrix::from_diagonal(&s);
    Zonotope::new(p.clone(), hcat(&[&dc, &ds]))
}

/// Interval enclosure of a Jacobian over a box.
pub trait JacobianEnclosure {
    fn jacobian_enclosure(&self, domain: &BoxSet) -> Result<IntervalMatrix>;
}

/// Encloses `{∂f/∂x(x) : x ∈ domain}` using the model's registered evaluator.
/// The domain is normally the interval hull of the current state zonotope.
pub fn jacobian_range<J: JacobianEnclosure + ?Sized>(f_jac: &J, domain: &BoxSet) -> Result<IntervalMatrix> {
    let n = domain.dim();
    let out =
        f_jac.jacobian_enclosure(domain).map_err(|e| Error::Jacobian(format!("over box of dimension {n}: {e}")))?;
    if out.shape() != (n, n) {
        return Err(Error::dims("jacobian_range", out.shape(), (n, n)));
    }
    Ok(out)
}
