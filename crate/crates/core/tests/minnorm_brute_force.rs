//! Checks Wolfe's method against an independent brute-force oracle: dense
//! enumeration of simplex weight grids followed by coordinate-exchange
//! refinement (globally convergent here because the squared norm is convex
//! in the weights).

use nsopt_core::linalg::norm;
use nsopt_core::minnorm::{wolfe_min_norm, PointSet, DEFAULT_WOLFE_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn combination(points: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let d = points[0].len();
    let mut x = vec![0.0; d];
    for (wi, p) in w.iter().zip(points) {
        for j in 0..d {
            x[j] += wi * p[j];
        }
    }
    x
}

fn norm_at(points: &[Vec<f64>], w: &[f64]) -> f64 {
    norm(&combination(points, w))
}

/// Enumerates all weight vectors with entries `n_i / k`, `sum n_i = k`.
fn best_on_grid(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let m = points.len();
    let mut counts = vec![0usize; m];
    let mut best_w = vec![0.0; m];
    let mut best_val = f64::INFINITY;
    fn recurse(
        points: &[Vec<f64>],
        counts: &mut Vec<usize>,
        idx: usize,
        left: usize,
        k: usize,
        best_w: &mut Vec<f64>,
        best_val: &mut f64,
    ) {
        if idx + 1 == counts.len() {
            counts[idx] = left;
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
            let v = norm_at(points, &w);
            if v < *best_val {
                *best_val = v;
                *best_w = w;
            }
            return;
        }
        for c in 0..=left {
            counts[idx] = c;
            recurse(points, counts, idx + 1, left - c, k, best_w, best_val);
        }
    }
    recurse(points, &mut counts, 0, k, k, &mut best_w, &mut best_val);
    best_w
}

/// Halving-step exchange walk `w + s (e_i - e_j)`; each sweep tries every
/// ordered pair and keeps the best improvement.
fn refine(points: &[Vec<f64>], mut w: Vec<f64>, start_step: f64) -> Vec<f64> {
    let m = points.len();
    let mut step = start_step;
    let mut val = norm_at(points, &w);
    while step > 1e-9 {
        let mut improved = false;
        for i in 0..m {
            for j in 0..m {
                if i == j || w[j] < step {
                    continue;
                }
                let mut cand = w.clone();
                cand[i] += step;
                cand[j] -= step;
                let v = norm_at(points, &cand);
                if v < val - 1e-15 {
                    val = v;
                    w = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    w
}

fn brute_force_min_norm(points: &[Vec<f64>]) -> f64 {
    let m = points.len();
    let k = if m <= 3 { 1000 } else { 40 };
    let w = best_on_grid(points, k);
    let w = refine(points, w, 1.0 / k as f64);
    norm_at(points, &w)
}

#[test]
fn dense_grid_confirms_the_worked_example() {
    let points = vec![vec![3.0, 1.0], vec![1.0, 3.0], vec![2.0, 4.0]];
    let w = best_on_grid(&points, 1000);
    let grid_val = norm_at(&points, &w);
    let expect = 8f64.sqrt(); // ||(2, 2)||
    assert!((grid_val - expect).abs() < 1e-3, "grid value {grid_val}");

    let sol = wolfe_min_norm(&PointSet::new(points).unwrap(), DEFAULT_WOLFE_TOL);
    assert!((sol.norm() - expect).abs() < 1e-8);
}

#[test]
fn wolfe_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..200 {
        let d = rng.random_range(2..=3usize);
        let m = rng.random_range(1..=5usize);
        let shift: f64 = rng.random_range(-1.0..1.5);
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..d)
                    .map(|_| rng.random_range(-2.0..2.0) + shift)
                    .collect()
            })
            .collect();
        let reference = brute_force_min_norm(&points);
        let sol = wolfe_min_norm(&PointSet::new(points).unwrap(), DEFAULT_WOLFE_TOL);
        assert!(
            (sol.norm() - reference).abs() <= 1e-3,
            "case {case}: wolfe {} vs brute force {reference}",
            sol.norm()
        );
    }
}
