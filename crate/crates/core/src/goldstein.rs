//! Goldstein-subdifferential data model: solver parameters, witnessed
//! subgradient estimates, descent predicates, and verifiable stationarity
//! certificates.
//!
//! An estimate keeps every gradient that entered its convex combination,
//! together with the point it was taken at and its accumulated weight, so the
//! claim `g \in conv(grad f(B_delta(x)))` can be re-checked from raw oracle
//! calls at any time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, dot, norm};
use crate::oracle::FunctionOracle;

/// Tolerance for simplex-weight and witness-ball checks.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Per-coordinate tolerance when re-deriving gradients and combinations.
pub const RECOMPUTE_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum GoldsteinError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("direction has zero norm")]
    ZeroDirection,
}

/// Violations reported by [`verify_certificate`], each naming the broken
/// invariant.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateViolation {
    #[error(
        "witness {index} lies at distance {distance} from the center, outside delta = {delta}"
    )]
    WitnessOutsideBall {
        index: usize,
        distance: f64,
        delta: f64,
    },
    #[error("witness weights are not on the simplex (sum = {sum}, min = {min})")]
    WeightsNotSimplex { sum: f64, min: f64 },
    #[error("stored vector differs from the witness combination (max coordinate deviation {deviation:e})")]
    CombinationMismatch { deviation: f64 },
    #[error("stored gradient of witness {index} does not match a fresh evaluation (max deviation {deviation:e})")]
    GradientMismatch { index: usize, deviation: f64 },
    #[error("stored norm bound {stored} does not match the recomputed norm {actual}")]
    NormBoundMismatch { stored: f64, actual: f64 },
}

/// Parameters shared by every solver: ball radius `delta`, stationarity
/// target `epsilon`, failure probability `gamma`, the Lipschitz constant,
/// and an optional weak-convexity modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldsteinParams {
    pub delta: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub rho: Option<f64>,
}

impl GoldsteinParams {
    pub fn new(
        delta: f64,
        epsilon: f64,
        gamma: f64,
        lipschitz: f64,
    ) -> Result<Self, GoldsteinError> {
        let params = GoldsteinParams {
            delta,
            epsilon,
            gamma,
            lipschitz,
            rho: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn validate(&self) -> Result<(), GoldsteinError> {
        let positive = [
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("lipschitz", self.lipschitz),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(GoldsteinError::InvalidParams {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(GoldsteinError::InvalidParams {
                field: "gamma",
                reason: format!("must lie in (0, 1), got {}", self.gamma),
            });
        }
        if let Some(rho) = self.rho {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(GoldsteinError::InvalidParams {
                    field: "rho",
                    reason: format!("must be nonnegative and finite, got {rho}"),
                });
            }
        }
        Ok(())
    }
}

/// One gradient that entered the convex combination: where it was taken,
/// what it was, and its current weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub gradient: Vec<f64>,
    pub weight: f64,
}

/// A vector in the delta-ball subdifferential at `center`, written as an
/// explicit convex combination of witnessed gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientEstimate {
    pub center: Vec<f64>,
    /// The estimate itself; equals the weighted sum of witness gradients up
    /// to accumulation tolerance.
    pub combination: Vec<f64>,
    pub witnesses: Vec<Witness>,
}

impl SubgradientEstimate {
    /// Single-witness estimate with weight one.
    pub fn from_single(center: Vec<f64>, point: Vec<f64>, gradient: Vec<f64>) -> Self {
        SubgradientEstimate {
            center,
            combination: gradient.clone(),
            witnesses: vec![Witness {
                point,
                gradient,
                weight: 1.0,
            }],
        }
    }

    /// Builds an estimate from a full weight vector over witnessed gradients,
    /// dropping exact-zero weights.
    pub fn from_weights(
        center: Vec<f64>,
        combination: Vec<f64>,
        witnesses: impl IntoIterator<Item = Witness>,
    ) -> Self {
        SubgradientEstimate {
            center,
            combination,
            witnesses: witnesses.into_iter().filter(|w| w.weight != 0.0).collect(),
        }
    }

    /// Moves the estimate to `(1-lambda) * g + lambda * u`, carrying the
    /// existing witness weights forward.
    pub fn blend(&mut self, lambda: f64, point: Vec<f64>, gradient: Vec<f64>) {
        debug_assert!((0.0..=1.0).contains(&lambda));
        for w in &mut self.witnesses {
            w.weight *= 1.0 - lambda;
        }
        self.combination = linalg::add_scaled(
            &linalg::scaled(&self.combination, 1.0 - lambda),
            lambda,
            &gradient,
        );
        self.witnesses.push(Witness {
            point,
            gradient,
            weight: lambda,
        });
    }

    pub fn norm(&self) -> f64 {
        norm(&self.combination)
    }
}

/// A checkable claim that `center` is (delta, epsilon)-stationary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityCertificate {
    pub estimate: SubgradientEstimate,
    pub norm_bound: f64,
    pub params: GoldsteinParams,
}

impl StationarityCertificate {
    pub fn new(estimate: SubgradientEstimate, params: GoldsteinParams) -> Self {
        let norm_bound = estimate.norm();
        StationarityCertificate {
            estimate,
            norm_bound,
            params,
        }
    }
}

/// Minimal-norm point of the segment `[g, u]`: returns `(z, lambda)` with
/// `z = g + lambda (u - g)` and `lambda` clamped to `[0, 1]`.
pub fn project_origin_segment(g: &[f64], u: &[f64]) -> (Vec<f64>, f64) {
    debug_assert_eq!(g.len(), u.len());
    let diff = linalg::sub(u, g);
    let denom = dot(&diff, &diff);
    if denom == 0.0 {
        return (g.to_vec(), 0.0);
    }
    let lambda = (-dot(g, &diff) / denom).clamp(0.0, 1.0);
    (linalg::add_scaled(g, lambda, &diff), lambda)
}

/// Result of a descent predicate: whether the threshold was met, and the
/// value at the stepped point (the single extra evaluation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentCheck {
    pub accepted: bool,
    pub f_step: f64,
}

fn step_value(
    oracle: &FunctionOracle,
    x: &[f64],
    g: &[f64],
    delta: f64,
) -> Result<f64, GoldsteinError> {
    let ghat = linalg::normalized(g).ok_or(GoldsteinError::ZeroDirection)?;
    Ok(oracle.value(&linalg::add_scaled(x, -delta, &ghat)))
}

/// Norm-proportional descent test:
/// `f(x - delta * ghat) <= f(x) - (delta / 4) ||g||`.
/// `fx` is the cached value of `f(x)`; exactly one new evaluation is spent.
pub fn descent_quarter(
    oracle: &FunctionOracle,
    x: &[f64],
    fx: f64,
    g: &[f64],
    delta: f64,
) -> Result<DescentCheck, GoldsteinError> {
    let f_step = step_value(oracle, x, g, delta)?;
    Ok(DescentCheck {
        accepted: f_step <= fx - 0.25 * delta * norm(g),
        f_step,
    })
}

/// Fixed-threshold descent test: `f(x - delta * ghat) <= f(x) - delta * epsilon / 3`.
pub fn descent_third(
    oracle: &FunctionOracle,
    x: &[f64],
    fx: f64,
    g: &[f64],
    delta: f64,
    epsilon: f64,
) -> Result<DescentCheck, GoldsteinError> {
    let f_step = step_value(oracle, x, g, delta)?;
    Ok(DescentCheck {
        accepted: f_step <= fx - delta * epsilon / 3.0,
        f_step,
    })
}

/// Re-derives a certificate from raw oracle calls: simplex weights, witness
/// ball membership, fresh gradient evaluations, the stored combination, and
/// the stored norm bound. Returns `Ok(true)` when everything checks out and
/// the norm bound is at most `epsilon`; a broken structural invariant is an
/// error naming the violation.
pub fn verify_certificate(
    oracle: &FunctionOracle,
    cert: &StationarityCertificate,
) -> Result<bool, CertificateViolation> {
    let est = &cert.estimate;
    let sum: f64 = est.witnesses.iter().map(|w| w.weight).sum();
    let min = est
        .witnesses
        .iter()
        .map(|w| w.weight)
        .fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > STRUCTURE_TOL || min < -STRUCTURE_TOL {
        return Err(CertificateViolation::WeightsNotSimplex { sum, min });
    }

    for (index, w) in est.witnesses.iter().enumerate() {
        let distance = linalg::dist(&w.point, &est.center);
        if distance > cert.params.delta + STRUCTURE_TOL {
            return Err(CertificateViolation::WitnessOutsideBall {
                index,
                distance,
                delta: cert.params.delta,
            });
        }
    }

    for (index, w) in est.witnesses.iter().enumerate() {
        match oracle.gradient(&w.point) {
            Ok(fresh) => {
                let deviation = fresh
                    .iter()
                    .zip(&w.gradient)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if deviation > RECOMPUTE_TOL {
                    return Err(CertificateViolation::GradientMismatch { index, deviation });
                }
            }
            Err(_) => {
                return Err(CertificateViolation::GradientMismatch {
                    index,
                    deviation: f64::INFINITY,
                });
            }
        }
    }

    let mut recombined = vec![0.0; est.center.len()];
    for w in &est.witnesses {
        for (r, gi) in recombined.iter_mut().zip(&w.gradient) {
            *r += w.weight * gi;
        }
    }
    let deviation = recombined
        .iter()
        .zip(&est.combination)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if deviation > RECOMPUTE_TOL {
        return Err(CertificateViolation::CombinationMismatch { deviation });
    }

    let actual = est.norm();
    if (actual - cert.norm_bound).abs() > STRUCTURE_TOL {
        return Err(CertificateViolation::NormBoundMismatch {
            stored: cert.norm_bound,
            actual,
        });
    }

    Ok(cert.norm_bound <= cert.params.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_test_function, TestFunctionSpec};

    fn abs1() -> FunctionOracle {
        make_test_function(&TestFunctionSpec::AbsSum { dim: 1 }).unwrap()
    }

    #[test]
    fn segment_projection_examples() {
        let (z, lambda) = project_origin_segment(&[1.0, 0.0], &[-1.0, 0.0]);
        assert_eq!(z, vec![0.0, 0.0]);
        assert_eq!(lambda, 0.5);

        let (z, lambda) = project_origin_segment(&[3.0, 4.0], &[3.0, 4.0]);
        assert_eq!(z, vec![3.0, 4.0]);
        assert_eq!(lambda, 0.0);

        // endpoint optimum: min over the segment [(2,0), (1,1)] is (1,1)
        let (z, lambda) = project_origin_segment(&[2.0, 0.0], &[1.0, 1.0]);
        assert_eq!(lambda, 1.0);
        assert_eq!(z, vec![1.0, 1.0]);
    }

    #[test]
    fn segment_projection_never_beats_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let g: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (z, _) = project_origin_segment(&g, &u);
            let zn = norm(&z);
            assert!(zn <= norm(&g) + 1e-12);
            assert!(zn <= norm(&u) + 1e-12);
            for i in 0..=100 {
                let t = i as f64 / 100.0;
                let p = linalg::add_scaled(&g, t, &linalg::sub(&u, &g));
                assert!(zn <= norm(&p) + 1e-12);
            }
        }
    }

    #[test]
    fn descent_quarter_examples() {
        let linear = make_test_function(&TestFunctionSpec::Linear { c: vec![1.0, 0.0] }).unwrap();
        let x = [0.0, 0.0];
        let fx = linear.value(&x);
        let chk = descent_quarter(&linear, &x, fx, &[1.0, 0.0], 1.0).unwrap();
        assert!(chk.accepted);
        assert_eq!(chk.f_step, -1.0);

        let abs = abs1();
        let chk = descent_quarter(&abs, &[0.0], 0.0, &[1.0], 1.0).unwrap();
        assert!(!chk.accepted); // f(-1) = 1 > f(0) - 1/4

        let euclid = make_test_function(&TestFunctionSpec::EuclidNorm { dim: 2 }).unwrap();
        let x = [2.0, 0.0];
        let chk = descent_quarter(&euclid, &x, 2.0, &[1.0, 0.0], 1.0).unwrap();
        assert!(chk.accepted); // f(1,0) = 1 <= 2 - 0.25
    }

    #[test]
    fn descent_third_examples() {
        let abs = abs1();
        let chk = descent_third(&abs, &[1.0], 1.0, &[1.0], 0.5, 1.0).unwrap();
        assert!(chk.accepted); // f(0.5) = 0.5 <= 1 - 1/6

        let chk = descent_third(&abs, &[0.1], 0.1, &[1.0], 1.0, 1.0).unwrap();
        assert!(!chk.accepted); // f(-0.9) = 0.9 > 0.1 - 1/3

        // decrease along a linear function with ||c|| = eps/4 is below eps/3
        let eps = 0.4;
        let linear = make_test_function(&TestFunctionSpec::Linear {
            c: vec![eps / 4.0, 0.0],
        })
        .unwrap();
        let x = [0.7, -0.2];
        let fx = linear.value(&x);
        let chk = descent_third(&linear, &x, fx, &[eps / 4.0, 0.0], 1.0, eps).unwrap();
        assert!(!chk.accepted);
    }

    #[test]
    fn zero_direction_is_rejected() {
        let abs = abs1();
        assert_eq!(
            descent_quarter(&abs, &[1.0], 1.0, &[0.0], 1.0).unwrap_err(),
            GoldsteinError::ZeroDirection
        );
        assert_eq!(
            descent_third(&abs, &[1.0], 1.0, &[0.0], 1.0, 0.5).unwrap_err(),
            GoldsteinError::ZeroDirection
        );
    }

    #[test]
    fn quarter_descent_implies_third_when_norm_is_large() {
        // descent_quarter with ||g|| >= 4 eps / 3 implies descent_third
        use rand::{Rng, SeedableRng};
        let abs = make_test_function(&TestFunctionSpec::AbsSum { dim: 2 }).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (delta, eps) = (0.3, 0.6);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
            if norm(&g) < 4.0 * eps / 3.0 {
                continue;
            }
            let fx = abs.value(&x);
            let quarter = descent_quarter(&abs, &x, fx, &g, delta).unwrap();
            let third = descent_third(&abs, &x, fx, &g, delta, eps).unwrap();
            if quarter.accepted {
                assert!(third.accepted);
            }
        }
    }

    fn symmetric_cert(delta: f64, epsilon: f64, weights: (f64, f64)) -> StationarityCertificate {
        let estimate = SubgradientEstimate {
            center: vec![0.0],
            combination: vec![-weights.0 + weights.1 * 1.0],
            witnesses: vec![
                Witness {
                    point: vec![-delta / 2.0],
                    gradient: vec![-1.0],
                    weight: weights.0,
                },
                Witness {
                    point: vec![delta / 2.0],
                    gradient: vec![1.0],
                    weight: weights.1,
                },
            ],
        };
        StationarityCertificate::new(
            estimate,
            GoldsteinParams::new(delta, epsilon, 0.01, 1.0).unwrap(),
        )
    }

    #[test]
    fn certificate_verifies_at_symmetric_kink() {
        let cert = symmetric_cert(0.2, 1e-6, (0.5, 0.5));
        assert_eq!(verify_certificate(&abs1(), &cert), Ok(true));
    }

    #[test]
    fn certificate_rejects_bad_weights() {
        let cert = symmetric_cert(0.2, 0.5, (0.7, 0.5));
        assert!(matches!(
            verify_certificate(&abs1(), &cert),
            Err(CertificateViolation::WeightsNotSimplex { .. })
        ));
    }

    #[test]
    fn certificate_rejects_witness_outside_ball() {
        let mut cert = symmetric_cert(0.2, 0.5, (0.5, 0.5));
        cert.estimate.witnesses[1].point = vec![0.4]; // 2 delta away
        assert!(matches!(
            verify_certificate(&abs1(), &cert),
            Err(CertificateViolation::WitnessOutsideBall { index: 1, .. })
        ));
    }

    #[test]
    fn certificate_rejects_tampered_gradient_and_norm() {
        let mut cert = symmetric_cert(0.2, 0.5, (0.5, 0.5));
        cert.estimate.witnesses[0].gradient = vec![1.0];
        assert!(matches!(
            verify_certificate(&abs1(), &cert),
            Err(CertificateViolation::GradientMismatch { index: 0, .. })
        ));

        let mut cert = symmetric_cert(0.2, 0.5, (0.5, 0.5));
        cert.norm_bound = 0.4;
        assert!(matches!(
            verify_certificate(&abs1(), &cert),
            Err(CertificateViolation::NormBoundMismatch { .. })
        ));
    }

    #[test]
    fn certificate_norm_above_epsilon_is_not_stationary() {
        // structurally valid, but the combination norm exceeds epsilon
        let oracle = abs1();
        let estimate = SubgradientEstimate::from_single(vec![1.0], vec![1.0], vec![1.0]);
        let cert = StationarityCertificate::new(
            estimate,
            GoldsteinParams::new(0.1, 0.05, 0.01, 1.0).unwrap(),
        );
        assert_eq!(verify_certificate(&oracle, &cert), Ok(false));
    }

    #[test]
    fn blend_keeps_weights_on_simplex() {
        let mut est = SubgradientEstimate::from_single(vec![0.0], vec![0.3], vec![1.0]);
        est.blend(0.25, vec![-0.1], vec![-1.0]);
        est.blend(0.5, vec![0.2], vec![1.0]);
        let sum: f64 = est.witnesses.iter().map(|w| w.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let expect = 0.75 * 0.5 * 1.0 + -(0.25 * 0.5) + 0.5 * 1.0;
        assert!((est.combination[0] - expect).abs() < 1e-12);
    }
}
