//! Zonotope set algebra.
//!
//! A zonotope `⟨p, M⟩` is the set `{p + M·ξ : ξ ∈ [-1, 1]^m}`: an affine image of
//! the unit hypercube. It is closed under linear maps and Minkowski sums, which
//! is everything the error-set recursion needs, and its interval hull is a
//! row-wise 1-norm of the generator matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility;

/// Default absolute tolerance on the equality residual in [`Zonotope::contains_point`].
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dims("BoxSet::new", (lower.len(), 1), (upper.len(), 1)));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidArgument(format!(
                "box component {i} has lower {} > upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Box without the `lower <= upper` check. Used for fused boxes, where an
    /// inversion is a reportable event rather than a construction error.
    pub fn new_unchecked(lower: DVector<f64>, upper: DVector<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn centered(center: &DVector<f64>, radius: &DVector<f64>) -> Result<Self> {
        Self::new(center - radius, center + radius)
    }

    pub fn point(x: &DVector<f64>) -> Self {
        Self { lower: x.clone(), upper: x.clone() }
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn midpoint(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && (0..x.len()).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }

    /// `self ⊆ other`, componentwise.
    pub fn is_subset_of(&self, other: &BoxSet) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| other.lower[i] <= self.lower[i] && self.upper[i] <= other.upper[i])
    }

    /// Componentwise intersection. Components where the result is inverted are
    /// returned alongside; they are not clipped.
    pub fn intersect(&self, other: &BoxSet) -> (BoxSet, Vec<usize>) {
        let lower = self.lower.zip_map(&other.lower, f64::max);
        let upper = self.upper.zip_map(&other.upper, f64::min);
        let inverted = (0..lower.len()).filter(|&i| lower[i] > upper[i]).collect();
        (BoxSet { lower, upper }, inverted)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        if center.len() != generators.nrows() {
            return Err(Error::dims("Zonotope::new", (center.len(), 1), generators.shape()));
        }
        Ok(Self { center, generators })
    }

    /// `{center}`, a zonotope with no generators.
    pub fn singleton(center: DVector<f64>) -> Self {
        let n = center.len();
        Self { center, generators: DMatrix::zeros(n, 0) }
    }

    /// `⟨center, diag(radius)⟩`.
    pub fn from_box(center: DVector<f64>, radius: &DVector<f64>) -> Self {
        Self { center, generators: DMatrix::from_diagonal(radius) }
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Number of generator columns.
    pub fn order(&self) -> usize {
        self.generators.ncols()
    }

    /// `L·Z ⊕ z = ⟨L·p + z, L·M⟩`.
    pub fn affine_map(&self, l: &DMatrix<f64>, z: &DVector<f64>) -> Result<Zonotope> {
        if l.ncols() != self.dim() || l.nrows() != z.len() {
            return Err(Error::dims("affine_map", l.shape(), (self.dim(), z.len())));
        }
        Ok(Zonotope { center: l * &self.center + z, generators: l * &self.generators })
    }

    /// `⟨p₁ + p₂, [M₁ M₂]⟩`.
    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if self.dim() != other.dim() {
            return Err(Error::dims("minkowski_sum", self.generators.shape(), other.generators.shape()));
        }
        Ok(Zonotope { center: &self.center + &other.center, generators: hcat(&[&self.generators, &other.generators]) })
    }

    /// Radius of the interval hull: row-wise 1-norms of the generator matrix.
    pub fn hull_radius(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.generators.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()))
    }

    pub fn interval_hull(&self) -> BoxSet {
        let r = self.hull_radius();
        BoxSet { lower: &self.center - &r, upper: &self.center + &r }
    }

    /// Order reduction `↓_q`: keep the `q − n` generators with the largest
    /// Euclidean norm and enclose the rest in an axis-aligned box.
    ///
    /// Columns are sorted by descending norm with ties broken by original index,
    /// so zero columns always land in the enclosed tail. The result has exactly
    /// `q` columns when `m > q`; otherwise the zonotope is returned unchanged.
    pub fn reduce(&self, q: usize) -> Result<Zonotope> {
        let n = self.dim();
        if q <= n {
            return Err(Error::ReductionOrder { q, n });
        }
        let m = self.order();
        if m <= q {
            return Ok(self.clone());
        }
        let norms: Vec<f64> = self.generators.column_iter().map(|c| c.norm()).collect();
        let mut order: Vec<usize> = (0..m).collect();
        // stable sort keeps index order among equal norms
        order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

        let keep = q - n;
        let mut out = DMatrix::zeros(n, q);
        for (dst, &src) in order[..keep].iter().enumerate() {
            out.set_column(dst, &self.generators.column(src));
        }
        for &src in &order[keep..] {
            for i in 0..n {
                out[(i, keep + i)] += self.generators[(i, src)].abs();
            }
        }
        Ok(Zonotope { center: self.center.clone(), generators: out })
    }

    /// Exact membership test with the default residual tolerance.
    pub fn contains_point(&self, x: &DVector<f64>) -> bool {
        self.contains_point_with_tol(x, DEFAULT_FEASIBILITY_TOL)
    }

    /// Decides whether some `ξ ∈ [-1, 1]^m` satisfies `p + M·ξ = x` up to an
    /// absolute equality residual `tol` (infinity norm). Returns `false` on a
    /// dimension mismatch.
    pub fn contains_point_with_tol(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let d = x - &self.center;
        if self.order() == 0 {
            return d.amax() <= tol;
        }
        // cheap rejection through the hull
        let r = self.hull_radius();
        if (0..d.len()).any(|i| d[i].abs() > r[i] + tol) {
            return false;
        }
        let xi = feasibility::box_constrained_solution(&self.generators, &d);
        (&self.generators * xi - d).amax() <= tol
    }
}

/// Horizontal concatenation of matrices sharing a row count.
pub(crate) fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(b);
        c0 += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Zonotope {
        Zonotope::new(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn affine_identity() {
        let z = unit_square();
        let out = z.affine_map(&DMatrix::identity(2, 2), &dvector![0.0, 0.0]).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn affine_diagonal_scaling() {
        let out = unit_square().affine_map(&dmatrix![2.0, 0.0; 0.0, 3.0], &dvector![1.0, 1.0]).unwrap();
        assert_eq!(out.center(), &dvector![1.0, 1.0]);
        assert_eq!(out.generators(), &dmatrix![2.0, 0.0; 0.0, 3.0]);
    }

    #[test]
    fn affine_projection_matches_vertex_images() {
        let z = Zonotope::new(dvector![1.0, 2.0], DMatrix::identity(2, 2)).unwrap();
        let l = dmatrix![1.0, 1.0];
        let out = z.affine_map(&l, &dvector![0.0]).unwrap();
        assert_eq!(out.center(), &dvector![3.0]);
        assert_eq!(out.generators(), &dmatrix![1.0, 1.0]);

        // hull of the four vertex images
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s1 in [-1.0, 1.0] {
            for s2 in [-1.0, 1.0] {
                let v = &l * (z.center() + z.generators() * dvector![s1, s2]);
                lo = lo.min(v[0]);
                hi = hi.max(v[0]);
            }
        }
        let h = out.interval_hull();
        assert_eq!((h.lower()[0], h.upper()[0]), (lo, hi));
    }

    #[test]
    fn affine_rejects_bad_shapes() {
        let err = unit_square().affine_map(&DMatrix::identity(3, 3), &dvector![0.0, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn sum_with_singleton_translates() {
        let s = Zonotope::singleton(dvector![1.0, 1.0]);
        let out = unit_square().minkowski_sum(&s).unwrap();
        assert_eq!(out.center(), &dvector![1.0, 1.0]);
        assert_eq!(out.generators(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn sum_in_one_dimension_adds_radii() {
        let a = Zonotope::new(dvector![0.0], dmatrix![1.0]).unwrap();
        let b = Zonotope::new(dvector![0.0], dmatrix![2.0]).unwrap();
        let s = a.minkowski_sum(&b).unwrap();
        assert_eq!(s.generators(), &dmatrix![1.0, 2.0]);
        let h = s.interval_hull();
        assert_eq!((h.lower()[0], h.upper()[0]), (-3.0, 3.0));
    }

    #[test]
    fn sum_rejects_dimension_mismatch() {
        let a = Zonotope::singleton(dvector![0.0]);
        assert!(a.minkowski_sum(&unit_square()).is_err());
    }

    #[test]
    fn hull_examples() {
        let h = unit_square().interval_hull();
        assert_eq!(h.lower(), &dvector![-1.0, -1.0]);
        assert_eq!(h.upper(), &dvector![1.0, 1.0]);

        let z = Zonotope::new(dvector![1.0, 2.0], dmatrix![1.0, 0.5; 0.0, 0.5]).unwrap();
        let h = z.interval_hull();
        assert_eq!(h.lower(), &dvector![-0.5, 1.5]);
        assert_eq!(h.upper(), &dvector![2.5, 2.5]);

        let p = dvector![3.0, -4.0];
        let h = Zonotope::singleton(p.clone()).interval_hull();
        assert_eq!(h.lower(), &p);
        assert_eq!(h.upper(), &p);
    }

    #[test]
    fn reduce_boundary_contract() {
        let z = Zonotope::new(dvector![0.0, 0.0], dmatrix![1.0, 0.0, 0.1; 0.0, 1.0, 0.1]).unwrap();
        assert!(matches!(z.reduce(2), Err(Error::ReductionOrder { q: 2, n: 2 })));
        assert_eq!(z.reduce(3).unwrap(), z);
        assert_eq!(z.reduce(10).unwrap(), z);
    }

    #[test]
    fn reduce_sums_absolute_tail() {
        // norms: 3, 0.5, 2, 0.5 -> keep col0 (q - n = 1), box the rest
        let m = dmatrix![3.0, 0.5, 0.0, -0.5; 0.0, 0.0, -2.0, 0.0];
        let z = Zonotope::new(dvector![0.0, 0.0], m).unwrap();
        let r = z.reduce(3).unwrap();
        assert_eq!(r.generators(), &dmatrix![3.0, 1.0, 0.0; 0.0, 0.0, 2.0]);
    }

    #[test]
    fn reduce_tie_break_uses_original_index() {
        // norms 1, 1, 0, 1: the first unit column is kept, the zero column
        // and the later ties are boxed
        let m = dmatrix![1.0, 0.0, 0.0, -1.0; 0.0, 1.0, 0.0, 0.0];
        let z = Zonotope::new(dvector![0.0, 0.0], m).unwrap();
        let r = z.reduce(3).unwrap();
        assert_eq!(r.generators(), &dmatrix![1.0, 1.0, 0.0; 0.0, 0.0, 1.0]);
    }

    #[test]
    fn reduce_contains_sampled_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::from_fn(2, 10, |_, _| rng.gen_range(-1.0..1.0));
        let z = Zonotope::new(dvector![0.3, -0.2], m).unwrap();
        let r = z.reduce(4).unwrap();
        assert_eq!(r.order(), 4);
        for _ in 0..1000 {
            let xi = DVector::from_fn(10, |_, _| rng.gen_range(-1.0..=1.0));
            let x = z.center() + z.generators() * xi;
            assert!(r.contains_point(&x));
        }
    }

    #[test]
    fn contains_center_and_rejects_outside() {
        let z = unit_square();
        assert!(z.contains_point(&dvector![0.0, 0.0]));
        assert!(z.contains_point(&dvector![1.0, -1.0]));
        assert!(!z.contains_point_with_tol(&dvector![1.0001, 0.0], 1e-9));
        assert!(!z.contains_point(&dvector![0.0]));
    }

    #[test]
    fn contains_constructive_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = DMatrix::from_fn(3, 6, |_, _| rng.gen_range(-2.0..2.0));
            let c = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let z = Zonotope::new(c, m).unwrap();
            let xi = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..=1.0));
            let x = z.center() + z.generators() * xi;
            assert!(z.contains_point(&x));
        }
    }

    #[test]
    fn contains_rejects_point_outside_skewed_zonotope() {
        // parallelogram: hull contains (0.9, -0.9) but the set does not
        let z = Zonotope::new(dvector![0.0, 0.0], dmatrix![1.0, 0.0; 1.0, 0.1]).unwrap();
        assert!(z.interval_hull().contains(&dvector![0.9, -0.9]));
        assert!(!z.contains_point(&dvector![0.9, -0.9]));
    }

    #[test]
    fn fused_intersection_reports_inversion() {
        let a = BoxSet::new(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        let b = BoxSet::new(dvector![0.5, 2.0], dvector![2.0, 3.0]).unwrap();
        let (i, bad) = a.intersect(&b);
        assert_eq!(i.lower(), &dvector![0.5, 2.0]);
        assert_eq!(bad, vec![1]);
    }
}
