//! Brute-force stationarity certification by inner approximation: gradients
//! sampled in the delta-ball span a polytope inside the ball
//! subdifferential, so a small min-norm point over them is a proof of
//! (delta, epsilon)-stationarity. The converse does not hold — a large
//! min-norm value disproves nothing.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use nsopt_core::goldstein::{
    verify_certificate, GoldsteinParams, StationarityCertificate, SubgradientEstimate, Witness,
};
use nsopt_core::linalg;
use nsopt_core::minnorm::{wolfe_min_norm, PointSet, DEFAULT_WOLFE_TOL};
use nsopt_core::oracle::{eval_gradient_perturbed, FunctionOracle, OracleError};

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("point dimension {got} does not match the function dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Default sample count: 32 per dimension.
pub fn default_sample_count(dim: usize) -> usize {
    32 * dim
}

/// Outcome of one certification attempt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyReport {
    pub schema_version: u32,
    pub x: Vec<f64>,
    /// Gradients sampled in the delta-ball.
    pub samples: usize,
    /// Min-norm value over the sampled-gradient hull.
    pub hull_min_norm: f64,
    /// One-sided verdict: `true` proves stationarity, `false` proves nothing.
    pub certified: bool,
    pub certificate: Option<StationarityCertificate>,
}

/// Samples `m` gradients uniformly in the delta-ball around `x` and runs the
/// min-norm solver over their hull. Certifies when the value is at most
/// epsilon, assembling a witnessed certificate from the hull weights.
pub fn certify_stationarity<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    x: &[f64],
    params: &GoldsteinParams,
    m: usize,
    rng: &mut R,
) -> Result<CertifyReport, CertifyError> {
    if m == 0 {
        return Err(CertifyError::NoSamples);
    }
    if x.len() != oracle.dim() {
        return Err(CertifyError::DimensionMismatch {
            expected: oracle.dim(),
            got: x.len(),
        });
    }
    let ball_shrink = 1.0 - 2f64.powi(-20);
    let kink_radius = params.delta * 2f64.powi(-40);
    let mut witnesses = Vec::with_capacity(m);
    let mut gradients = Vec::with_capacity(m);
    for _ in 0..m {
        let point = linalg::add_scaled(
            x,
            params.delta * ball_shrink,
            &linalg::sample_unit_ball(rng, x.len()),
        );
        let pg = eval_gradient_perturbed(oracle, &point, rng, kink_radius)?;
        gradients.push(pg.gradient.clone());
        witnesses.push((pg.point, pg.gradient));
    }
    let set = PointSet::new(gradients).expect("at least one gradient");
    let sol = wolfe_min_norm(&set, DEFAULT_WOLFE_TOL);
    let hull_min_norm = sol.norm();
    let certified = hull_min_norm <= params.epsilon;
    let certificate = certified.then(|| {
        let estimate = SubgradientEstimate::from_weights(
            x.to_vec(),
            sol.point.clone(),
            witnesses
                .iter()
                .zip(&sol.weights)
                .map(|((point, gradient), &weight)| Witness {
                    point: point.clone(),
                    gradient: gradient.clone(),
                    weight,
                }),
        );
        let cert = StationarityCertificate::new(estimate, params.clone());
        debug_assert_eq!(verify_certificate(oracle, &cert), Ok(true));
        cert
    });
    Ok(CertifyReport {
        schema_version: 1,
        x: x.to_vec(),
        samples: m,
        hull_min_norm,
        certified,
        certificate,
    })
}
