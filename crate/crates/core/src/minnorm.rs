//! Minimum-norm point in the convex hull of a finite point set, via Wolfe's
//! active-set method.
//!
//! Deterministic given input order (argmin ties break toward the lowest
//! index). The affine subproblem is solved by normal equations on the Gram
//! matrix, with a small ridge when the system is singular.

use thiserror::Error;

use crate::linalg::{dot, norm, normalized};

/// Default tolerance for Wolfe's optimality criterion.
pub const DEFAULT_WOLFE_TOL: f64 = 1e-9;

/// Weights at or below this are treated as zero when pruning the active set.
const ZERO_WEIGHT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MinNormError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("dimension mismatch: point set has dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("direction has zero norm")]
    ZeroDirection,
}

/// Nonempty list of points sharing one dimension.
#[derive(Debug, Clone)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, MinNormError> {
        let dim = points.first().ok_or(MinNormError::EmptyPointSet)?.len();
        for p in &points {
            if p.len() != dim {
                return Err(MinNormError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
        }
        Ok(PointSet { points, dim })
    }

    pub fn push(&mut self, point: Vec<f64>) -> Result<(), MinNormError> {
        if point.len() != self.dim {
            return Err(MinNormError::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        self.points.push(point);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Minimum-norm point together with full-length simplex weights over the
/// input points (zero for points outside the final active set).
#[derive(Debug, Clone)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MinNormPoint {
    pub fn norm(&self) -> f64 {
        norm(&self.point)
    }
}

/// Active set carried between calls; lets the caller warm-start after
/// appending one point to the set.
#[derive(Debug, Clone, Default)]
pub struct WolfeState {
    active: Vec<usize>,
    weights: Vec<f64>,
}

/// Solves the affine relaxation `min ||sum_i a_i p_i|| s.t. sum_i a_i = 1`
/// over the given points via `G a = mu 1`, adding `ridge` to the diagonal.
#[allow(clippy::needless_range_loop)] // row elimination reads two rows at once
fn affine_min_norm(points: &[&[f64]], ridge: f64) -> Option<Vec<f64>> {
    let k = points.len();
    let mut gram = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = dot(points[i], points[j]);
            gram[i][j] = v;
            gram[j][i] = v;
        }
        gram[i][i] += ridge;
    }
    let mut rhs = vec![1.0; k];
    // Gaussian elimination with partial pivoting
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| gram[a][col].abs().total_cmp(&gram[b][col].abs()))
            .unwrap();
        if gram[pivot][col].abs() < 1e-13 * (1.0 + gram[col][col].abs()) {
            return None;
        }
        gram.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..k {
            let factor = gram[row][col] / gram[col][col];
            for c in col..k {
                gram[row][c] -= factor * gram[col][c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut y = vec![0.0; k];
    for row in (0..k).rev() {
        let mut v = rhs[row];
        for c in row + 1..k {
            v -= gram[row][c] * y[c];
        }
        y[row] = v / gram[row][row];
    }
    let sum: f64 = y.iter().sum();
    if !sum.is_finite() || sum.abs() < 1e-300 {
        return None;
    }
    Some(y.iter().map(|v| v / sum).collect())
}

fn combination(ps: &PointSet, active: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; ps.dim()];
    for (&i, &w) in active.iter().zip(weights) {
        for (xj, pj) in x.iter_mut().zip(ps.point(i)) {
            *xj += w * pj;
        }
    }
    x
}

/// Minimum-norm point of `conv(ps)` with a fresh active set.
pub fn wolfe_min_norm(ps: &PointSet, tol: f64) -> MinNormPoint {
    let mut state = WolfeState::default();
    wolfe_min_norm_warm(ps, tol, &mut state)
}

/// Minimum-norm point of `conv(ps)`, reusing `state` as the starting active
/// set when it is still consistent with `ps`.
pub fn wolfe_min_norm_warm(ps: &PointSet, tol: f64, state: &mut WolfeState) -> MinNormPoint {
    let m = ps.len();
    let state_ok = !state.active.is_empty()
        && state.active.iter().all(|&i| i < m)
        && state.active.len() == state.weights.len()
        && state.weights.iter().all(|&w| w >= 0.0)
        && (state.weights.iter().sum::<f64>() - 1.0).abs() < 1e-6;
    if !state_ok {
        // start from the shortest point, lowest index on ties
        let start = (0..m)
            .min_by(|&a, &b| norm(ps.point(a)).total_cmp(&norm(ps.point(b))))
            .unwrap();
        state.active = vec![start];
        state.weights = vec![1.0];
    }

    let max_major = 16 * m + 64;
    for _ in 0..max_major {
        // minor cycle: optimize over the current active set, dropping points
        // whose weight hits zero
        let max_minor = 2 * state.active.len() + 16;
        for _ in 0..max_minor {
            let pts: Vec<&[f64]> = state.active.iter().map(|&i| ps.point(i)).collect();
            let v = affine_min_norm(&pts, 0.0)
                .or_else(|| affine_min_norm(&pts, 1e-12))
                .or_else(|| affine_min_norm(&pts, 1e-8));
            let Some(v) = v else { break };
            if v.iter().all(|&vi| vi > ZERO_WEIGHT) {
                state.weights = v;
                break;
            }
            let mut theta = f64::INFINITY;
            for (wi, vi) in state.weights.iter().zip(&v) {
                if *vi <= ZERO_WEIGHT && wi - vi > 0.0 {
                    theta = theta.min(wi / (wi - vi));
                }
            }
            let theta = theta.clamp(0.0, 1.0);
            for (wi, vi) in state.weights.iter_mut().zip(&v) {
                *wi = (1.0 - theta) * *wi + theta * vi;
            }
            // prune zeros, keeping at least the heaviest point
            let keep: Vec<usize> = (0..state.active.len())
                .filter(|&i| state.weights[i] > ZERO_WEIGHT)
                .collect();
            if keep.is_empty() {
                let heaviest = (0..state.active.len())
                    .max_by(|&a, &b| state.weights[a].total_cmp(&state.weights[b]))
                    .unwrap();
                state.active = vec![state.active[heaviest]];
                state.weights = vec![1.0];
            } else if keep.len() < state.active.len() {
                state.active = keep.iter().map(|&i| state.active[i]).collect();
                state.weights = keep.iter().map(|&i| state.weights[i]).collect();
            }
            let total: f64 = state.weights.iter().sum();
            for w in &mut state.weights {
                *w /= total;
            }
        }

        let x = combination(ps, &state.active, &state.weights);
        let xx = dot(&x, &x);
        // Wolfe's criterion: <x, p_i> >= ||x||^2 - tol (1 + ||x||^2) for all i
        let mut best_i = 0;
        let mut best_v = f64::INFINITY;
        for i in 0..m {
            let v = dot(&x, ps.point(i));
            if v < best_v {
                best_v = v;
                best_i = i;
            }
        }
        if best_v >= xx - tol * (1.0 + xx) || state.active.contains(&best_i) {
            break;
        }
        state.active.push(best_i);
        state.weights.push(0.0);
    }

    let point = combination(ps, &state.active, &state.weights);
    let mut weights = vec![0.0; m];
    for (&i, &w) in state.active.iter().zip(&state.weights) {
        weights[i] += w;
    }
    MinNormPoint { point, weights }
}

/// Evaluates the dual lower bound `min_i <ghat, p_i>` at the normalized
/// candidate. At the true optimum this equals `||g_star||`, so
/// `||g_star|| - witness` is a one-sided optimality gap.
pub fn min_norm_lower_witness(ps: &PointSet, g_star: &[f64]) -> Result<f64, MinNormError> {
    if g_star.len() != ps.dim() {
        return Err(MinNormError::DimensionMismatch {
            expected: ps.dim(),
            got: g_star.len(),
        });
    }
    let ghat = normalized(g_star).ok_or(MinNormError::ZeroDirection)?;
    Ok(ps
        .points()
        .iter()
        .map(|p| dot(&ghat, p))
        .fold(f64::INFINITY, f64::min))
}
