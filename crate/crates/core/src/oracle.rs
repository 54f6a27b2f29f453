//! First-order oracle abstraction and the built-in suite of Lipschitz test
//! functions.
//!
//! An oracle exposes function values everywhere and gradients at points of
//! differentiability; at a kink the gradient query reports
//! [`OracleError::DifferentiabilityFailure`] instead of silently picking a
//! subgradient. Resolution of kinks happens only in
//! [`eval_gradient_perturbed`], which retries at nearby random points.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, norm};

/// Retry cap for [`eval_gradient_perturbed`]. Failure sets have measure zero,
/// so one retry is almost surely enough; the cap guards pathological oracles.
pub const PERTURB_RETRY_CAP: usize = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("function is not differentiable at the queried point")]
    DifferentiabilityFailure,
    #[error(
        "no differentiable point found after {attempts} retries (perturbation radius {radius:e})"
    )]
    PersistentNondifferentiability { attempts: usize, radius: f64 },
    #[error("unknown test function `{0}`")]
    UnknownFunction(String),
    #[error("malformed parameters for `{name}`: {reason}")]
    MalformedParameters { name: &'static str, reason: String },
    #[error("dimension mismatch: oracle has dimension {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Region on which the declared Lipschitz constant is certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// Valid on all of R^d. Random test points are drawn from `[-2, 2]^d`.
    All,
    /// Certified on the closed Euclidean ball of this radius around 0.
    Ball { radius: f64 },
    /// Certified on the box `[-half_width, half_width]^d`.
    Box { half_width: f64 },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::All => true,
            Domain::Ball { radius } => norm(x) <= *radius,
            Domain::Box { half_width } => x.iter().all(|v| v.abs() <= *half_width),
        }
    }

    /// Uniform sample from the certification region (a default box for
    /// unbounded domains). Used by validation tests.
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::All => (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            Domain::Ball { radius } => linalg::scaled(&linalg::sample_unit_ball(rng, dim), *radius),
            Domain::Box { half_width } => (0..dim)
                .map(|_| rng.random_range(-half_width..*half_width))
                .collect(),
        }
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync;

struct OracleInner {
    name: String,
    dim: usize,
    lipschitz: f64,
    rho: Option<f64>,
    domain: Domain,
    known_minimum: Option<f64>,
    value_fn: Box<ValueFn>,
    gradient_fn: Box<GradientFn>,
    value_calls: AtomicU64,
    gradient_calls: AtomicU64,
}

/// Number of value/gradient queries made so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalCounts {
    pub value: u64,
    pub gradient: u64,
}

impl EvalCounts {
    pub fn total(&self) -> u64 {
        self.value + self.gradient
    }
}

/// Value/gradient access to an L-Lipschitz function. Evaluation is pure and
/// thread-safe; call counters are shared across clones.
#[derive(Clone)]
pub struct FunctionOracle {
    inner: Arc<OracleInner>,
}

impl std::fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionOracle")
            .field("name", &self.inner.name)
            .field("dim", &self.inner.dim)
            .field("lipschitz", &self.inner.lipschitz)
            .field("rho", &self.inner.rho)
            .finish()
    }
}

impl FunctionOracle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        lipschitz: f64,
        rho: Option<f64>,
        domain: Domain,
        known_minimum: Option<f64>,
        value_fn: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient_fn: impl Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        FunctionOracle {
            inner: Arc::new(OracleInner {
                name: name.into(),
                dim,
                lipschitz,
                rho,
                domain,
                known_minimum,
                value_fn: Box::new(value_fn),
                gradient_fn: Box::new(gradient_fn),
                value_calls: AtomicU64::new(0),
                gradient_calls: AtomicU64::new(0),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.inner.lipschitz
    }

    /// Weak-convexity modulus, when certified for this function.
    pub fn rho(&self) -> Option<f64> {
        self.inner.rho
    }

    pub fn domain(&self) -> &Domain {
        &self.inner.domain
    }

    /// Global minimum value when known (used for gap-based iteration budgets).
    pub fn known_minimum(&self) -> Option<f64> {
        self.inner.known_minimum
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.inner.dim, "point dimension mismatch");
        self.inner.value_calls.fetch_add(1, Ordering::Relaxed);
        (self.inner.value_fn)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, OracleError> {
        assert_eq!(x.len(), self.inner.dim, "point dimension mismatch");
        self.inner.gradient_calls.fetch_add(1, Ordering::Relaxed);
        (self.inner.gradient_fn)(x).ok_or(OracleError::DifferentiabilityFailure)
    }

    pub fn eval_counts(&self) -> EvalCounts {
        EvalCounts {
            value: self.inner.value_calls.load(Ordering::Relaxed),
            gradient: self.inner.gradient_calls.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counts(&self) {
        self.inner.value_calls.store(0, Ordering::Relaxed);
        self.inner.gradient_calls.store(0, Ordering::Relaxed);
    }
}

/// One affine piece `x -> <a, x> + b` of a max-affine function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Parameters of the built-in test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestFunctionSpec {
    /// `f(x) = sum_i |x_i|`, L = sqrt(d), convex.
    AbsSum { dim: usize },
    /// `f(x) = ||x||_2`, L = 1, convex.
    EuclidNorm { dim: usize },
    /// `f(x) = max_i (<a_i, x> + b_i)`, L = max_i ||a_i||, convex.
    MaxAffine { pieces: Vec<AffinePiece> },
    /// Nonsmooth Chebyshev-Rosenbrock
    /// `f(x) = (x_1 - 1)^2 / 4 + sum_{i<d} |x_{i+1} - 2 x_i^2 + 1|`,
    /// locally Lipschitz; L certified on the given box.
    ChebyNonsmoothRosenbrock { dim: usize, box_half_width: f64 },
    /// `f(x) = | ||x||^2 - 1 |`, 2-weakly convex; L certified on the given
    /// ball.
    Shell { dim: usize, ball_radius: f64 },
    /// `f(x) = <c, x>`, L = ||c||, unbounded below.
    Linear { c: Vec<f64> },
}

impl TestFunctionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TestFunctionSpec::AbsSum { .. } => "abs_sum",
            TestFunctionSpec::EuclidNorm { .. } => "euclid_norm",
            TestFunctionSpec::MaxAffine { .. } => "max_affine",
            TestFunctionSpec::ChebyNonsmoothRosenbrock { .. } => "cheby_nonsmooth_rosenbrock",
            TestFunctionSpec::Shell { .. } => "shell",
            TestFunctionSpec::Linear { .. } => "linear",
        }
    }

    /// Names accepted by configuration files, in `list-functions` order.
    pub fn builtin_names() -> &'static [&'static str] {
        &[
            "abs_sum",
            "euclid_norm",
            "max_affine",
            "cheby_nonsmooth_rosenbrock",
            "shell",
            "linear",
        ]
    }
}

fn check_dim(name: &'static str, dim: usize) -> Result<(), OracleError> {
    if dim == 0 {
        return Err(OracleError::MalformedParameters {
            name,
            reason: "dimension must be positive".into(),
        });
    }
    Ok(())
}

fn check_finite(name: &'static str, values: &[f64], what: &str) -> Result<(), OracleError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::MalformedParameters {
            name,
            reason: format!("{what} must be finite"),
        });
    }
    Ok(())
}

/// Instantiates a built-in test function with its certified Lipschitz
/// constant and, where available, weak-convexity modulus and minimum value.
pub fn make_test_function(spec: &TestFunctionSpec) -> Result<FunctionOracle, OracleError> {
    match spec {
        TestFunctionSpec::AbsSum { dim } => {
            check_dim("abs_sum", *dim)?;
            Ok(FunctionOracle::new(
                "abs_sum",
                *dim,
                (*dim as f64).sqrt(),
                Some(0.0),
                Domain::All,
                Some(0.0),
                |x: &[f64]| x.iter().map(|v| v.abs()).sum(),
                |x: &[f64]| {
                    if x.contains(&0.0) {
                        None
                    } else {
                        Some(x.iter().map(|&v| v.signum()).collect())
                    }
                },
            ))
        }
        TestFunctionSpec::EuclidNorm { dim } => {
            check_dim("euclid_norm", *dim)?;
            Ok(FunctionOracle::new(
                "euclid_norm",
                *dim,
                1.0,
                Some(0.0),
                Domain::All,
                Some(0.0),
                |x: &[f64]| norm(x),
                |x: &[f64]| {
                    let n = norm(x);
                    if n == 0.0 {
                        None
                    } else {
                        Some(linalg::scaled(x, 1.0 / n))
                    }
                },
            ))
        }
        TestFunctionSpec::MaxAffine { pieces } => {
            if pieces.is_empty() {
                return Err(OracleError::MalformedParameters {
                    name: "max_affine",
                    reason: "at least one affine piece is required".into(),
                });
            }
            let dim = pieces[0].a.len();
            check_dim("max_affine", dim)?;
            for p in pieces {
                if p.a.len() != dim {
                    return Err(OracleError::MalformedParameters {
                        name: "max_affine",
                        reason: format!(
                            "piece dimension {} differs from first piece ({dim})",
                            p.a.len()
                        ),
                    });
                }
                check_finite("max_affine", &p.a, "piece coefficients")?;
                check_finite("max_affine", &[p.b], "piece offsets")?;
            }
            let lipschitz = pieces.iter().map(|p| norm(&p.a)).fold(0.0, f64::max);
            let pieces_v = pieces.clone();
            let pieces_g = pieces.clone();
            Ok(FunctionOracle::new(
                "max_affine",
                dim,
                lipschitz,
                Some(0.0),
                Domain::All,
                None,
                move |x: &[f64]| {
                    pieces_v
                        .iter()
                        .map(|p| linalg::dot(&p.a, x) + p.b)
                        .fold(f64::NEG_INFINITY, f64::max)
                },
                move |x: &[f64]| {
                    let vals: Vec<f64> = pieces_g
                        .iter()
                        .map(|p| linalg::dot(&p.a, x) + p.b)
                        .collect();
                    let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    // exact tie between distinct maximizers = kink
                    let top: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] == best).collect();
                    if top.len() > 1 && top.windows(2).any(|w| pieces_g[w[0]].a != pieces_g[w[1]].a)
                    {
                        None
                    } else {
                        Some(pieces_g[top[0]].a.clone())
                    }
                },
            ))
        }
        TestFunctionSpec::ChebyNonsmoothRosenbrock {
            dim,
            box_half_width,
        } => {
            check_dim("cheby_nonsmooth_rosenbrock", *dim)?;
            if !box_half_width.is_finite() || *box_half_width <= 0.0 {
                return Err(OracleError::MalformedParameters {
                    name: "cheby_nonsmooth_rosenbrock",
                    reason: "box half-width must be positive and finite".into(),
                });
            }
            let b = *box_half_width;
            let d = *dim;
            // Coordinate-wise gradient bounds on the box:
            //   |g_1| <= (b+1)/2 + 4b, |g_j| <= 1 + 4b (1 < j < d), |g_d| <= 1.
            let lipschitz = if d == 1 {
                0.5 * (b + 1.0)
            } else {
                let g1 = 0.5 * (b + 1.0) + 4.0 * b;
                let gmid = 1.0 + 4.0 * b;
                (g1 * g1 + (d as f64 - 2.0) * gmid * gmid + 1.0).sqrt()
            };
            Ok(FunctionOracle::new(
                "cheby_nonsmooth_rosenbrock",
                d,
                lipschitz,
                Some(4.0),
                Domain::Box { half_width: b },
                Some(0.0),
                |x: &[f64]| {
                    let mut f = 0.25 * (x[0] - 1.0) * (x[0] - 1.0);
                    for i in 0..x.len() - 1 {
                        f += (x[i + 1] - 2.0 * x[i] * x[i] + 1.0).abs();
                    }
                    f
                },
                |x: &[f64]| {
                    let d = x.len();
                    let mut g = vec![0.0; d];
                    g[0] = 0.5 * (x[0] - 1.0);
                    for i in 0..d - 1 {
                        let q = x[i + 1] - 2.0 * x[i] * x[i] + 1.0;
                        if q == 0.0 {
                            return None;
                        }
                        let s = q.signum();
                        g[i] -= 4.0 * x[i] * s;
                        g[i + 1] += s;
                    }
                    Some(g)
                },
            ))
        }
        TestFunctionSpec::Shell { dim, ball_radius } => {
            check_dim("shell", *dim)?;
            if !ball_radius.is_finite() || *ball_radius <= 0.0 {
                return Err(OracleError::MalformedParameters {
                    name: "shell",
                    reason: "ball radius must be positive and finite".into(),
                });
            }
            let radius = *ball_radius;
            Ok(FunctionOracle::new(
                "shell",
                *dim,
                2.0 * radius,
                Some(2.0),
                Domain::Ball { radius },
                Some(0.0),
                |x: &[f64]| (linalg::dot(x, x) - 1.0).abs(),
                |x: &[f64]| {
                    let q = linalg::dot(x, x) - 1.0;
                    if q == 0.0 {
                        None
                    } else {
                        Some(linalg::scaled(x, 2.0 * q.signum()))
                    }
                },
            ))
        }
        TestFunctionSpec::Linear { c } => {
            check_dim("linear", c.len())?;
            check_finite("linear", c, "coefficients")?;
            let c_v = c.clone();
            let c_g = c.clone();
            Ok(FunctionOracle::new(
                "linear",
                c.len(),
                norm(c),
                Some(0.0),
                Domain::All,
                None,
                move |x: &[f64]| linalg::dot(&c_v, x),
                move |_x: &[f64]| Some(c_g.clone()),
            ))
        }
    }
}

/// Gradient together with the (possibly perturbed) point it was taken at.
#[derive(Debug, Clone)]
pub struct PerturbedGradient {
    pub gradient: Vec<f64>,
    pub point: Vec<f64>,
    /// Gradient queries spent, including failed attempts.
    pub attempts: usize,
}

/// Default perturbation radius, `2^-40 * max(1, ||x||)`.
pub fn default_perturb_radius(x: &[f64]) -> f64 {
    2f64.powi(-40) * norm(x).max(1.0)
}

/// Evaluates the gradient at `x`, retrying at uniform points of
/// `B_perturb_radius(x)` while the oracle reports a kink. Fails with
/// [`OracleError::PersistentNondifferentiability`] after
/// [`PERTURB_RETRY_CAP`] retries.
pub fn eval_gradient_perturbed<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    x: &[f64],
    rng: &mut R,
    perturb_radius: f64,
) -> Result<PerturbedGradient, OracleError> {
    assert!(perturb_radius >= 0.0, "perturbation radius must be >= 0");
    if let Ok(gradient) = oracle.gradient(x) {
        return Ok(PerturbedGradient {
            gradient,
            point: x.to_vec(),
            attempts: 1,
        });
    }
    for attempt in 0..PERTURB_RETRY_CAP {
        if perturb_radius == 0.0 {
            break;
        }
        let offset = linalg::sample_unit_ball(rng, x.len());
        let point = linalg::add_scaled(x, perturb_radius, &offset);
        if let Ok(gradient) = oracle.gradient(&point) {
            return Ok(PerturbedGradient {
                gradient,
                point,
                attempts: attempt + 2,
            });
        }
    }
    Err(OracleError::PersistentNondifferentiability {
        attempts: PERTURB_RETRY_CAP + 1,
        radius: perturb_radius,
    })
}

/// Central-difference check of the analytic gradient at a smooth point.
/// Returns the maximum absolute deviation over coordinates.
pub fn check_gradient_fd(
    oracle: &FunctionOracle,
    x: &[f64],
    step: f64,
) -> Result<f64, OracleError> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let grad = oracle.gradient(x)?;
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = oracle.value(&xp);
        xp[i] = x[i] - step;
        let fm = oracle.value(&xp);
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * step);
        worst = worst.max((fd - grad[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn builtins() -> Vec<FunctionOracle> {
        vec![
            make_test_function(&TestFunctionSpec::AbsSum { dim: 2 }).unwrap(),
            make_test_function(&TestFunctionSpec::EuclidNorm { dim: 3 }).unwrap(),
            make_test_function(&TestFunctionSpec::MaxAffine {
                pieces: vec![
                    AffinePiece {
                        a: vec![1.0, 0.5],
                        b: -0.3,
                    },
                    AffinePiece {
                        a: vec![-0.7, 0.2],
                        b: 0.1,
                    },
                    AffinePiece {
                        a: vec![0.0, -1.0],
                        b: 0.0,
                    },
                ],
            })
            .unwrap(),
            make_test_function(&TestFunctionSpec::ChebyNonsmoothRosenbrock {
                dim: 2,
                box_half_width: 2.0,
            })
            .unwrap(),
            make_test_function(&TestFunctionSpec::Shell {
                dim: 2,
                ball_radius: 2.0,
            })
            .unwrap(),
            make_test_function(&TestFunctionSpec::Linear { c: vec![1.0, 0.0] }).unwrap(),
        ]
    }

    #[test]
    fn linear_has_constant_gradient() {
        let f = make_test_function(&TestFunctionSpec::Linear { c: vec![1.0, 0.0] }).unwrap();
        assert_eq!(f.lipschitz(), 1.0);
        for x in [[0.0, 0.0], [3.0, -4.0], [1e6, 2.0]] {
            assert_eq!(f.gradient(&x).unwrap(), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn abs_sum_lipschitz_and_kinks() {
        let f = make_test_function(&TestFunctionSpec::AbsSum { dim: 2 }).unwrap();
        assert!((f.lipschitz() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.gradient(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(f.gradient(&[-0.5, 2.0]).unwrap(), vec![-1.0, 1.0]);
        // fails exactly on the axes
        assert!(f.gradient(&[0.0, 1.0]).is_err());
        assert!(f.gradient(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn shell_constants_on_radius_two_ball() {
        let f = make_test_function(&TestFunctionSpec::Shell {
            dim: 2,
            ball_radius: 2.0,
        })
        .unwrap();
        assert_eq!(f.lipschitz(), 4.0);
        assert_eq!(f.rho(), Some(2.0));
        // brute-force gradient-norm maximization over a grid of the ball
        let mut best = 0.0f64;
        let n = 200;
        for i in 0..=n {
            for j in 0..=n {
                let x = [
                    -2.0 + 4.0 * i as f64 / n as f64,
                    -2.0 + 4.0 * j as f64 / n as f64,
                ];
                if norm(&x) <= 2.0 {
                    if let Ok(g) = f.gradient(&x) {
                        best = best.max(norm(&g));
                    }
                }
            }
        }
        assert!(best <= 4.0 + 1e-12);
        assert!(best > 3.9, "max gradient norm {best} should approach 4");
    }

    #[test]
    fn shell_weak_convexity_modulus_holds_on_segments() {
        // f + (rho/2)||.||^2 must be convex along random segments.
        let f = make_test_function(&TestFunctionSpec::Shell {
            dim: 2,
            ball_radius: 2.0,
        })
        .unwrap();
        let rho = f.rho().unwrap();
        let reg = |x: &[f64]| f.value(x) + 0.5 * rho * linalg::dot(x, x);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let x = f.domain().sample(2, &mut rng);
            let y = f.domain().sample(2, &mut rng);
            let t: f64 = rng.random();
            let mid = linalg::add_scaled(&linalg::scaled(&x, t), 1.0 - t, &y);
            assert!(reg(&mid) <= t * reg(&x) + (1.0 - t) * reg(&y) + 1e-9);
        }
    }

    #[test]
    fn malformed_parameters_are_rejected() {
        assert!(matches!(
            make_test_function(&TestFunctionSpec::MaxAffine { pieces: vec![] }),
            Err(OracleError::MalformedParameters { .. })
        ));
        assert!(matches!(
            make_test_function(&TestFunctionSpec::AbsSum { dim: 0 }),
            Err(OracleError::MalformedParameters { .. })
        ));
        assert!(matches!(
            make_test_function(&TestFunctionSpec::Shell {
                dim: 2,
                ball_radius: -1.0
            }),
            Err(OracleError::MalformedParameters { .. })
        ));
        assert!(matches!(
            make_test_function(&TestFunctionSpec::MaxAffine {
                pieces: vec![
                    AffinePiece {
                        a: vec![1.0],
                        b: 0.0
                    },
                    AffinePiece {
                        a: vec![1.0, 2.0],
                        b: 0.0
                    }
                ]
            }),
            Err(OracleError::MalformedParameters { .. })
        ));
    }

    #[test]
    fn perturbed_eval_at_smooth_point_returns_the_point() {
        let f = make_test_function(&TestFunctionSpec::AbsSum { dim: 2 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pg = eval_gradient_perturbed(&f, &[1.0, 1.0], &mut rng, 1e-9).unwrap();
        assert_eq!(pg.gradient, vec![1.0, 1.0]);
        assert_eq!(pg.point, vec![1.0, 1.0]);
        assert_eq!(pg.attempts, 1);
    }

    #[test]
    fn perturbed_eval_resolves_kink() {
        let f = make_test_function(&TestFunctionSpec::AbsSum { dim: 2 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pg = eval_gradient_perturbed(&f, &[0.0, 0.0], &mut rng, 1e-9).unwrap();
        assert!(pg.point != vec![0.0, 0.0]);
        assert!(pg.gradient.iter().all(|g| g.abs() == 1.0));
        assert!(linalg::dist(&pg.point, &[0.0, 0.0]) <= 1e-9);
    }

    #[test]
    fn perturbed_eval_with_zero_radius_fails_at_kink() {
        let f = make_test_function(&TestFunctionSpec::AbsSum { dim: 1 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = eval_gradient_perturbed(&f, &[0.0], &mut rng, 0.0).unwrap_err();
        assert!(matches!(
            err,
            OracleError::PersistentNondifferentiability { .. }
        ));
    }

    #[test]
    fn finite_difference_examples() {
        let euclid = make_test_function(&TestFunctionSpec::EuclidNorm { dim: 2 }).unwrap();
        let dev = check_gradient_fd(&euclid, &[3.0, 4.0], 1e-5).unwrap();
        assert!(dev <= 1e-6, "euclid deviation {dev}");

        let linear = make_test_function(&TestFunctionSpec::Linear { c: vec![1.0, 0.0] }).unwrap();
        let dev = check_gradient_fd(&linear, &[0.3, -2.0], 1e-3).unwrap();
        assert!(dev <= 1e-10, "linear deviation {dev}");

        let ma = make_test_function(&TestFunctionSpec::MaxAffine {
            pieces: vec![
                AffinePiece {
                    a: vec![1.0, 0.0],
                    b: 0.0,
                },
                AffinePiece {
                    a: vec![0.0, 1.0],
                    b: 0.0,
                },
            ],
        })
        .unwrap();
        // (2, 0.5): active piece is the first, tie distance 1.5 > step
        let dev = check_gradient_fd(&ma, &[2.0, 0.5], 1e-4).unwrap();
        assert!(dev <= 1e-6, "max_affine deviation {dev}");
    }

    #[test]
    fn lipschitz_property_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in builtins() {
            let l = f.lipschitz();
            for _ in 0..1000 {
                let x = f.domain().sample(f.dim(), &mut rng);
                let y = f.domain().sample(f.dim(), &mut rng);
                let lhs = (f.value(&x) - f.value(&y)).abs();
                assert!(
                    lhs <= l * linalg::dist(&x, &y),
                    "{}: |f(x)-f(y)| = {lhs} exceeds L*dist",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn gradient_norm_bounded_by_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for f in builtins() {
            for _ in 0..1000 {
                let x = f.domain().sample(f.dim(), &mut rng);
                if let Ok(g) = f.gradient(&x) {
                    assert!(
                        norm(&g) <= f.lipschitz() + 1e-12,
                        "{}: gradient norm {} > L = {}",
                        f.name(),
                        norm(&g),
                        f.lipschitz()
                    );
                }
            }
        }
    }

    #[test]
    fn gradients_almost_never_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in builtins() {
            let mut failures = 0;
            for _ in 0..10_000 {
                let x = f.domain().sample(f.dim(), &mut rng);
                if f.gradient(&x).is_err() {
                    failures += 1;
                }
            }
            assert_eq!(failures, 0, "{}: random points hit the kink set", f.name());
        }
    }

    /// The difference stencil must not straddle a kink (smoothness in
    /// `B_step(x)` is the caller's obligation for `check_gradient_fd`).
    fn stencil_clear_of_kinks(f: &FunctionOracle, x: &[f64], step: f64) -> bool {
        let margin = 4.0 * step;
        match f.name() {
            "abs_sum" => x.iter().all(|v| v.abs() > margin),
            "euclid_norm" => norm(x) > margin,
            "linear" => true,
            "shell" => (linalg::dot(x, x) - 1.0).abs() > margin * (2.0 * norm(x) + 1.0),
            "cheby_nonsmooth_rosenbrock" => {
                let slope = 1.0 + 4.0 * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (0..x.len() - 1)
                    .all(|i| (x[i + 1] - 2.0 * x[i] * x[i] + 1.0).abs() > margin * slope)
            }
            "max_affine" => {
                // piecewise-constant gradient: the whole stencil must sit on
                // one piece
                let Ok(g0) = f.gradient(x) else { return false };
                let mut xp = x.to_vec();
                for i in 0..x.len() {
                    for s in [-margin, margin] {
                        xp[i] = x[i] + s;
                        if f.gradient(&xp).map(|g| g != g0).unwrap_or(true) {
                            return false;
                        }
                        xp[i] = x[i];
                    }
                }
                true
            }
            _ => false,
        }
    }

    #[test]
    fn finite_difference_agreement_at_random_smooth_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for f in builtins() {
            let mut checked = 0;
            for _ in 0..300 {
                let x = f.domain().sample(f.dim(), &mut rng);
                let step = 1e-6 * norm(&x).max(1.0);
                if !stencil_clear_of_kinks(&f, &x, step) {
                    continue;
                }
                let dev = check_gradient_fd(&f, &x, step).unwrap();
                assert!(dev <= 1e-4, "{}: fd deviation {dev} at {x:?}", f.name());
                checked += 1;
            }
            assert!(checked >= 200, "{}: only {checked} smooth points", f.name());
        }
    }

    #[test]
    fn eval_counters_track_queries() {
        let f = make_test_function(&TestFunctionSpec::AbsSum { dim: 2 }).unwrap();
        f.reset_counts();
        f.value(&[1.0, 2.0]);
        f.value(&[0.5, 0.5]);
        let _ = f.gradient(&[1.0, 1.0]);
        let counts = f.eval_counts();
        assert_eq!(counts.value, 2);
        assert_eq!(counts.gradient, 1);
        assert_eq!(counts.total(), 3);
    }
}
