//! Search region for the cutting-plane solver: a ball intersected with
//! accumulated halfspaces, plus hit-and-run sampling to estimate its center
//! of gravity.
//!
//! Bodies are immutable values; `cut` returns a new body. Exact centroid
//! computation is intractable, so the centroid is a seeded Markov-chain
//! estimate; the solver only needs it well inside the body.

use rand::Rng;
use thiserror::Error;

use crate::linalg::{self, dot, norm};

/// Chords shorter than this fraction of the radius count as degenerate.
const THIN_CHORD_FRACTION: f64 = 1e-12;
/// Consecutive degenerate chords before the body is declared empty.
const THIN_CHORD_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cut normal has zero norm")]
    ZeroNormal,
    #[error("point is not inside the body")]
    PointNotInterior,
    #[error("body has empty interior")]
    EmptyInterior,
    #[error("dimension mismatch: body has dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Halfspace `<normal, w> <= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Ball of a given radius around the origin intersected with halfspaces.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    dim: usize,
    radius: f64,
    halfspaces: Vec<Halfspace>,
}

impl ConvexBody {
    pub fn ball(dim: usize, radius: f64) -> Self {
        assert!(dim > 0 && radius > 0.0);
        ConvexBody {
            dim,
            radius,
            halfspaces: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// Exact membership test.
    pub fn membership(&self, w: &[f64]) -> bool {
        self.membership_tol(w, 0.0)
    }

    /// Membership with an additive slack on every constraint.
    pub fn membership_tol(&self, w: &[f64], tol: f64) -> bool {
        norm(w) <= self.radius + tol
            && self
                .halfspaces
                .iter()
                .all(|h| dot(&h.normal, w) <= h.offset + tol)
    }

    /// Intersects with the halfspace `<normal, w> >= <normal, point>` (the
    /// side the normal points into), keeping the original body unchanged.
    pub fn cut(&self, normal: &[f64], point: &[f64]) -> Result<ConvexBody, GeometryError> {
        if normal.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: normal.len(),
            });
        }
        if norm(normal) == 0.0 {
            return Err(GeometryError::ZeroNormal);
        }
        let mut body = self.clone();
        // rewrite <normal, w> >= b in the <= convention
        body.halfspaces.push(Halfspace {
            normal: linalg::scaled(normal, -1.0),
            offset: -dot(normal, point),
        });
        Ok(body)
    }

    /// Parameter interval of the line `origin + t * direction` inside the
    /// body, or `None` when the line misses it. `direction` need not be unit.
    pub fn line_interval(&self, origin: &[f64], direction: &[f64]) -> Option<(f64, f64)> {
        // ball: t^2 ||d||^2 + 2 t <o, d> + ||o||^2 - R^2 <= 0
        let dd = dot(direction, direction);
        if dd == 0.0 {
            return None;
        }
        let od = dot(origin, direction);
        let disc = od * od - dd * (dot(origin, origin) - self.radius * self.radius);
        if disc < 0.0 {
            return None;
        }
        let sqrt_disc = disc.sqrt();
        let mut lo = (-od - sqrt_disc) / dd;
        let mut hi = (-od + sqrt_disc) / dd;
        for h in &self.halfspaces {
            let ad = dot(&h.normal, direction);
            let slack = h.offset - dot(&h.normal, origin);
            if ad > 0.0 {
                hi = hi.min(slack / ad);
            } else if ad < 0.0 {
                lo = lo.max(slack / ad);
            } else if slack < 0.0 {
                return None;
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Maximal interval `[t_min, t_max]` with `w + t * direction` in the
    /// body, for an interior point `w` and a unit direction.
    pub fn chord(&self, w: &[f64], direction: &[f64]) -> Result<(f64, f64), GeometryError> {
        if !self.membership(w) {
            return Err(GeometryError::PointNotInterior);
        }
        self.line_interval(w, direction)
            .ok_or(GeometryError::PointNotInterior)
    }

    /// Midpoint of the body's slice of the ray `origin + t * direction`;
    /// used to restore a strictly interior point after a cut. `origin` need
    /// not be feasible.
    pub fn interior_point_on_line(&self, origin: &[f64], direction: &[f64]) -> Option<Vec<f64>> {
        let (lo, hi) = self.line_interval(origin, direction)?;
        if hi - lo < THIN_CHORD_FRACTION * self.radius {
            return None;
        }
        Some(linalg::add_scaled(origin, 0.5 * (lo + hi), direction))
    }
}

/// Sampling effort for [`estimate_centroid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPlan {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
}

impl SamplingPlan {
    /// Effort that keeps the centroid estimate well inside the body for the
    /// dimensions this solver targets.
    pub fn defaults(dim: usize) -> Self {
        SamplingPlan {
            n_samples: (2048 * dim).max(4096),
            burn_in: 50 * dim * dim,
            thinning: dim.max(1),
        }
    }
}

/// Centroid estimate with the chain's final state as a reusable feasible
/// point.
#[derive(Debug, Clone)]
pub struct CentroidEstimate {
    pub mu_hat: Vec<f64>,
    pub n_samples: usize,
    pub interior_point: Vec<f64>,
}

/// Estimates the center of gravity by averaging hit-and-run states started
/// from `start`, after `burn_in` steps and keeping every `thinning`-th
/// state. Deterministic given the generator state.
pub fn estimate_centroid<R: Rng + ?Sized>(
    body: &ConvexBody,
    start: &[f64],
    plan: &SamplingPlan,
    rng: &mut R,
) -> Result<CentroidEstimate, GeometryError> {
    assert!(plan.n_samples >= 1 && plan.thinning >= 1);
    if !body.membership(start) {
        return Err(GeometryError::EmptyInterior);
    }
    let dim = body.dim();
    let mut w = start.to_vec();
    let mut sum = vec![0.0; dim];
    let mut kept = 0usize;
    let mut thin_streak = 0usize;
    let total_steps = plan.burn_in + plan.n_samples * plan.thinning;
    for step in 0..total_steps {
        let dir = linalg::sample_unit_sphere(rng, dim);
        let (lo, hi) = body.chord(&w, &dir)?;
        if hi - lo < THIN_CHORD_FRACTION * body.radius() {
            thin_streak += 1;
            if thin_streak >= THIN_CHORD_LIMIT {
                return Err(GeometryError::EmptyInterior);
            }
            continue;
        }
        thin_streak = 0;
        let mut t = rng.random_range(lo..hi);
        let mut candidate = linalg::add_scaled(&w, t, &dir);
        // rounding can push a boundary draw just outside; shrink toward w
        let mut guard = 0;
        while !body.membership(&candidate) && guard < 64 {
            t *= 0.5;
            candidate = linalg::add_scaled(&w, t, &dir);
            guard += 1;
        }
        if guard == 64 {
            continue;
        }
        w = candidate;
        if step >= plan.burn_in && (step - plan.burn_in).is_multiple_of(plan.thinning) {
            for (s, wi) in sum.iter_mut().zip(&w) {
                *s += wi;
            }
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(GeometryError::EmptyInterior);
    }
    Ok(CentroidEstimate {
        mu_hat: linalg::scaled(&sum, 1.0 / kept as f64),
        n_samples: kept,
        interior_point: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_disk() -> ConvexBody {
        // unit disk restricted to w_1 >= 0
        ConvexBody::ball(2, 1.0)
            .cut(&[1.0, 0.0], &[0.0, 0.0])
            .unwrap()
    }

    #[test]
    fn cut_sign_convention() {
        let body = ConvexBody::ball(2, 2.0)
            .cut(&[1.0, 0.0], &[0.0, 0.0])
            .unwrap();
        assert!(body.membership(&[1.0, 0.0]));
        assert!(!body.membership(&[-0.1, 0.0]));
        assert!(body.membership(&[0.0, 1.5]));
        assert!(!body.membership(&[0.0, 2.5]));
    }

    #[test]
    fn zero_normal_is_rejected() {
        let body = ConvexBody::ball(2, 1.0);
        assert_eq!(
            body.cut(&[0.0, 0.0], &[0.0, 0.0]).unwrap_err(),
            GeometryError::ZeroNormal
        );
    }

    #[test]
    fn chord_examples() {
        let ball = ConvexBody::ball(2, 2.0);
        let (lo, hi) = ball.chord(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((lo + 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);

        let half = ball.cut(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let (lo, hi) = half.chord(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        let (lo, hi) = half.chord(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let expect = 3f64.sqrt();
        assert!((lo + expect).abs() < 1e-12 && (hi - expect).abs() < 1e-12);

        assert_eq!(
            half.chord(&[-1.0, 0.0], &[1.0, 0.0]).unwrap_err(),
            GeometryError::PointNotInterior
        );
    }

    #[test]
    fn chord_endpoints_bracket_the_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let body = half_disk();
        let r = body.radius();
        for _ in 0..500 {
            let w = loop {
                let c = [rng.random_range(0.0..0.9), rng.random_range(-0.9..0.9)];
                if body.membership(&c) {
                    break c;
                }
            };
            let dir = crate::linalg::sample_unit_sphere(&mut rng, 2);
            let (lo, hi) = body.chord(&w, &dir).unwrap();
            if hi - lo < 1e-6 {
                continue;
            }
            assert!(body.membership_tol(&linalg::add_scaled(&w, lo + 1e-9, &dir), 1e-15));
            assert!(body.membership_tol(&linalg::add_scaled(&w, hi - 1e-9, &dir), 1e-15));
            assert!(!body.membership(&linalg::add_scaled(&w, lo - 1e-6 * r, &dir)));
            assert!(!body.membership(&linalg::add_scaled(&w, hi + 1e-6 * r, &dir)));
        }
    }

    #[test]
    fn hit_and_run_states_stay_inside() {
        let body = half_disk();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = vec![0.5, 0.0];
        for _ in 0..2000 {
            let dir = crate::linalg::sample_unit_sphere(&mut rng, 2);
            let (lo, hi) = body.chord(&w, &dir).unwrap();
            let t = rng.random_range(lo..hi);
            let next = linalg::add_scaled(&w, t, &dir);
            if body.membership(&next) {
                w = next;
            }
            assert!(body.membership(&w));
        }
    }

    #[test]
    fn ball_centroid_is_near_zero() {
        let body = ConvexBody::ball(2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let plan = SamplingPlan {
            n_samples: 4096,
            ..SamplingPlan::defaults(2)
        };
        let est = estimate_centroid(&body, &[0.0, 0.0], &plan, &mut rng).unwrap();
        assert!(norm(&est.mu_hat) <= 0.05, "centroid {:?}", est.mu_hat);
        assert!(body.membership_tol(&est.mu_hat, 1e-12));
        assert!(body.membership(&est.interior_point));
    }

    #[test]
    fn three_dimensional_ball_centroid_is_near_zero() {
        let body = ConvexBody::ball(3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let plan = SamplingPlan {
            n_samples: 4096,
            ..SamplingPlan::defaults(3)
        };
        let est = estimate_centroid(&body, &[0.0; 3], &plan, &mut rng).unwrap();
        assert!(norm(&est.mu_hat) <= 0.05, "centroid {:?}", est.mu_hat);
    }

    #[test]
    fn half_disk_centroid_matches_analytic_value() {
        let body = half_disk();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let plan = SamplingPlan::defaults(2);
        let est = estimate_centroid(&body, &[0.5, 0.0], &plan, &mut rng).unwrap();
        let expect = 4.0 / (3.0 * std::f64::consts::PI);
        let err = linalg::dist(&est.mu_hat, &[expect, 0.0]);
        assert!(err <= 0.02, "centroid {:?}, err {err}", est.mu_hat);
    }

    #[test]
    fn empty_slab_is_detected() {
        // opposing cuts leave the measure-zero slice {w_1 = 0}
        let body = ConvexBody::ball(2, 2.0)
            .cut(&[1.0, 0.0], &[0.0, 0.0])
            .unwrap()
            .cut(&[-1.0, 0.0], &[0.0, 0.0])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let err = estimate_centroid(&body, &[0.0, 0.0], &SamplingPlan::defaults(2), &mut rng)
            .unwrap_err();
        assert_eq!(err, GeometryError::EmptyInterior);
    }

    #[test]
    fn infeasible_start_is_empty_interior() {
        let body = half_disk();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let err = estimate_centroid(&body, &[-0.5, 0.0], &SamplingPlan::defaults(2), &mut rng)
            .unwrap_err();
        assert_eq!(err, GeometryError::EmptyInterior);
    }

    #[test]
    fn interior_point_recovery_after_cut() {
        let body = ConvexBody::ball(2, 2.0);
        let cutting_normal = [0.0, 1.0];
        let cut_body = body.cut(&cutting_normal, &[0.0, 1.0]).unwrap();
        // old interior point violates the new halfspace
        assert!(!cut_body.membership(&[0.0, 0.0]));
        let recovered = cut_body
            .interior_point_on_line(&[0.0, 0.0], &cutting_normal)
            .unwrap();
        assert!(cut_body.membership(&recovered));
        let (lo, hi) = cut_body
            .line_interval(&[0.0, 0.0], &cutting_normal)
            .unwrap();
        assert!((recovered[1] - 0.5 * (lo + hi)).abs() < 1e-12);
    }

    #[test]
    fn estimate_error_decreases_with_more_samples() {
        let body = half_disk();
        let expect = [4.0 / (3.0 * std::f64::consts::PI), 0.0];
        let mut small_errs = Vec::new();
        let mut large_errs = Vec::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = SamplingPlan {
                n_samples: 1024,
                burn_in: 200,
                thinning: 2,
            };
            let est = estimate_centroid(&body, &[0.5, 0.0], &plan, &mut rng).unwrap();
            small_errs.push(linalg::dist(&est.mu_hat, &expect));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = SamplingPlan {
                n_samples: 16384,
                burn_in: 200,
                thinning: 2,
            };
            let est = estimate_centroid(&body, &[0.5, 0.0], &plan, &mut rng).unwrap();
            large_errs.push(linalg::dist(&est.mu_hat, &expect));
        }
        small_errs.sort_by(f64::total_cmp);
        large_errs.sort_by(f64::total_cmp);
        assert!(
            large_errs[10] < small_errs[10],
            "median error should shrink: {} vs {}",
            large_errs[10],
            small_errs[10]
        );
    }

    #[test]
    fn sampled_covariance_is_positive_definite_on_half_disk() {
        let body = half_disk();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut states = Vec::new();
        let mut w = vec![0.5, 0.0];
        for _ in 0..4000 {
            let dir = crate::linalg::sample_unit_sphere(&mut rng, 2);
            let (lo, hi) = body.chord(&w, &dir).unwrap();
            let t = rng.random_range(lo..hi);
            let next = linalg::add_scaled(&w, t, &dir);
            if body.membership(&next) {
                w = next;
            }
            states.push(w.clone());
        }
        let n = states.len() as f64;
        let mean: Vec<f64> = (0..2)
            .map(|i| states.iter().map(|s| s[i]).sum::<f64>() / n)
            .collect();
        let mut cov = [[0.0f64; 2]; 2];
        for s in &states {
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += (s[i] - mean[i]) * (s[j] - mean[j]) / n;
                }
            }
        }
        // eigenvalues of a symmetric 2x2
        let tr = cov[0][0] + cov[1][1];
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        assert!(l1 > 0.0 && l2 > 0.0, "eigenvalues {l1}, {l2}");
    }
}
