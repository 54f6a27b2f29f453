//! Property tests for the geometric primitives.

use nsopt_core::geometry::ConvexBody;
use nsopt_core::goldstein::project_origin_segment;
use nsopt_core::linalg::{add_scaled, dot, norm};
use nsopt_core::minnorm::{wolfe_min_norm, PointSet, DEFAULT_WOLFE_TOL};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 3)
}

proptest! {
    #[test]
    fn segment_projection_minimizes_over_the_grid(g in vec3(), u in vec3()) {
        let (z, lambda) = project_origin_segment(&g, &u);
        prop_assert!((0.0..=1.0).contains(&lambda));
        let zn = norm(&z);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let p: Vec<f64> = g.iter().zip(&u).map(|(a, b)| a + t * (b - a)).collect();
            prop_assert!(zn <= norm(&p) + 1e-12);
        }
    }

    #[test]
    fn wolfe_satisfies_its_optimality_criterion(
        pts in prop::collection::vec(vec3(), 1..8)
    ) {
        let set = PointSet::new(pts.clone()).unwrap();
        let sol = wolfe_min_norm(&set, DEFAULT_WOLFE_TOL);
        let xx = dot(&sol.point, &sol.point);
        for p in &pts {
            prop_assert!(dot(&sol.point, p) >= xx - 1e-6 * (1.0 + xx));
        }
        // weights reconstruct the point
        let sum: f64 = sol.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(sol.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn chords_bracket_the_boundary(
        wx in -0.7..0.7f64,
        wy in -0.7..0.7f64,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let body = ConvexBody::ball(2, 1.0).cut(&[1.0, 0.0], &[-0.8, 0.0]).unwrap();
        let w = [wx, wy];
        prop_assume!(body.membership(&w));
        let dir = [angle.cos(), angle.sin()];
        let (lo, hi) = body.chord(&w, &dir).unwrap();
        prop_assert!(lo <= 0.0 && 0.0 <= hi);
        prop_assert!(body.membership_tol(&add_scaled(&w, lo + 1e-9, &dir), 1e-15));
        prop_assert!(body.membership_tol(&add_scaled(&w, hi - 1e-9, &dir), 1e-15));
        prop_assert!(!body.membership(&add_scaled(&w, lo - 1e-6, &dir)));
        prop_assert!(!body.membership(&add_scaled(&w, hi + 1e-6, &dir)));
    }
}
