//! Dense phase-one simplex for `G·ξ = d`, `ξ ∈ [-1, 1]^m`.
//!
//! Used only to decide point membership in a zonotope. The tableau is small
//! (`n + m` rows), so a textbook implementation with Bland's rule is enough
//! and terminates on degenerate problems.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-12;

/// Returns a box-feasible `ξ` minimizing the l1 equality residual.
pub(crate) fn box_constrained_solution(g: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let (n, m) = g.shape();
    if m == 0 {
        return DVector::zeros(0);
    }

    // Shift to eta = xi + 1 in [0, 2]:  G eta = d + G 1,  eta + s = 2.
    let shifted = d + g * DVector::from_element(m, 1.0);
    let rows = n + m;
    // columns: eta (m) | s (m) | artificials (n) | rhs
    let cols = 2 * m + n + 1;
    let rhs = cols - 1;
    let mut t = DMatrix::<f64>::zeros(rows, cols);
    for i in 0..n {
        let sign = if shifted[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..m {
            t[(i, j)] = sign * g[(i, j)];
        }
        t[(i, 2 * m + i)] = 1.0;
        t[(i, rhs)] = sign * shifted[i];
    }
    for j in 0..m {
        let r = n + j;
        t[(r, j)] = 1.0;
        t[(r, m + j)] = 1.0;
        t[(r, rhs)] = 2.0;
    }
    let mut basis: Vec<usize> = (0..n).map(|i| 2 * m + i).chain((0..m).map(|j| m + j)).collect();

    // reduced costs of "minimize sum of artificials"
    let mut cost = DVector::<f64>::zeros(cols);
    for i in 0..n {
        for c in 0..cols {
            if c < 2 * m || c == rhs {
                cost[c] -= t[(i, c)];
            }
        }
    }

    let max_iter = 50 * rows * cols;
    for _ in 0..max_iter {
        // Bland: smallest index with negative reduced cost
        let Some(enter) = (0..rhs).find(|&c| cost[c] < -PIVOT_TOL) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let a = t[(r, enter)];
            if a > PIVOT_TOL {
                let ratio = t[(r, rhs)] / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, best)) => {
                        if ratio < best - PIVOT_TOL || (ratio <= best + PIVOT_TOL && basis[r] < basis[lr]) {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((pr, _)) = leave else {
            // phase one is bounded below by zero, so this only happens on round-off
            break;
        };
        let piv = t[(pr, enter)];
        for c in 0..cols {
            t[(pr, c)] /= piv;
        }
        for r in 0..rows {
            if r != pr {
                let f = t[(r, enter)];
                if f != 0.0 {
                    for c in 0..cols {
                        t[(r, c)] -= f * t[(pr, c)];
                    }
                }
            }
        }
        let f = cost[enter];
        for c in 0..cols {
            cost[c] -= f * t[(pr, c)];
        }
        basis[pr] = enter;
    }

    let mut xi = DVector::from_element(m, -1.0);
    for (r, &b) in basis.iter().enumerate() {
        if b < m {
            xi[b] = (t[(r, rhs)] - 1.0).clamp(-1.0, 1.0);
        }
    }
    xi
}
