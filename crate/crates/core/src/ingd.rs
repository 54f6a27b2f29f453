//! Interpolated normalized gradient descent: a perturbed approximate
//! min-norm inner loop and the outer descent loop driving it.
//!
//! The inner loop maintains a witnessed convex combination of gradients
//! sampled in the delta-ball and stops when it either certifies a small
//! norm, finds a direction with norm-proportional decrease, or exhausts its
//! iteration budget (a low-probability event surfaced to the caller).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goldstein::{
    descent_quarter, project_origin_segment, GoldsteinError, GoldsteinParams,
    StationarityCertificate, SubgradientEstimate,
};
use crate::linalg::{self, norm};
use crate::oracle::{eval_gradient_perturbed, FunctionOracle, OracleError};

#[derive(Debug, Error)]
pub enum IngdError {
    #[error("direction has zero norm")]
    ZeroDirection,
    #[error("gradient norm {norm} exceeds the declared Lipschitz constant {lipschitz}")]
    NormExceedsL { norm: f64, lipschitz: f64 },
    #[error(transparent)]
    Params(#[from] GoldsteinError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Inner-loop iteration budget sufficient for termination with probability
/// `1 - gamma`: `ceil(64 L^2 / eps^2) * ceil(2 ln(1/gamma) / ln 4)`.
pub fn minnorm_iter_budget(lipschitz: f64, epsilon: f64, gamma: f64) -> usize {
    let blocks = (2.0 * (1.0 / gamma).ln() / 4f64.ln()).ceil().max(1.0);
    let per_block = (64.0 * lipschitz * lipschitz / (epsilon * epsilon)).ceil();
    (per_block * blocks) as usize
}

/// Outer-loop budget `ceil(4 Delta / (delta * eps))` for a gap `Delta`.
pub fn ingd_outer_budget(gap: f64, delta: f64, epsilon: f64) -> usize {
    (4.0 * gap / (delta * epsilon)).ceil().max(1.0) as usize
}

/// End-to-end evaluation budget for a full run:
/// `ceil(4 Delta/(delta eps)) * ceil(64 L^2/eps^2) * ceil(2 ln(4 Delta/(gamma delta eps)) / ln 4)`.
pub fn ingd_total_eval_budget(
    gap: f64,
    delta: f64,
    epsilon: f64,
    gamma: f64,
    lipschitz: f64,
) -> u64 {
    let outer = (4.0 * gap / (delta * epsilon)).ceil().max(1.0);
    let inner = (64.0 * lipschitz * lipschitz / (epsilon * epsilon)).ceil();
    let log_term = (2.0 * (4.0 * gap / (gamma * delta * epsilon)).ln() / 4f64.ln())
        .ceil()
        .max(1.0);
    (outer * inner * log_term) as u64
}

/// Configuration of one inner min-norm call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinNormConfig {
    pub params: GoldsteinParams,
    pub max_inner_iters: usize,
    /// Fraction of the admissible perturbation radius to use, in (0, 1).
    pub r_fraction: f64,
}

impl MinNormConfig {
    pub fn new(params: GoldsteinParams) -> Self {
        let max_inner_iters = minnorm_iter_budget(params.lipschitz, params.epsilon, params.gamma);
        MinNormConfig {
            params,
            max_inner_iters,
            r_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), GoldsteinError> {
        self.params.validate()?;
        if self.max_inner_iters == 0 {
            return Err(GoldsteinError::InvalidParams {
                field: "max_inner_iters",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.r_fraction > 0.0 && self.r_fraction < 1.0) {
            return Err(GoldsteinError::InvalidParams {
                field: "r_fraction",
                reason: format!("must lie in (0, 1), got {}", self.r_fraction),
            });
        }
        Ok(())
    }
}

/// Admissible gradient-space perturbation radius at the current trial
/// vector: `r_fraction * ||g|| * sqrt(1 - (1 - ||g||^2 / (128 L^2))^2)`,
/// strictly inside the open admissible interval.
pub fn perturbation_radius(g: &[f64], lipschitz: f64, r_fraction: f64) -> Result<f64, IngdError> {
    let gn = norm(g);
    if gn == 0.0 {
        return Err(IngdError::ZeroDirection);
    }
    if gn > lipschitz * (1.0 + 1e-9) {
        return Err(IngdError::NormExceedsL {
            norm: gn,
            lipschitz,
        });
    }
    let s = 1.0 - gn * gn / (128.0 * lipschitz * lipschitz);
    Ok(r_fraction * gn * (1.0 - s * s).max(0.0).sqrt())
}

/// How an inner min-norm call ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinNormOutcome {
    /// The direction gives a decrease of at least `delta/4 * ||g||`.
    Descent,
    /// `||g|| <= epsilon`: the estimate certifies near-stationarity.
    SmallNorm,
    /// Iteration budget hit (probability at most gamma).
    BudgetExhausted,
}

impl MinNormOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            MinNormOutcome::Descent => "descent",
            MinNormOutcome::SmallNorm => "small_norm",
            MinNormOutcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// Result of one inner min-norm call, with evaluation accounting.
#[derive(Debug, Clone)]
pub struct MinNormResult {
    pub estimate: SubgradientEstimate,
    pub outcome: MinNormOutcome,
    /// `f(x)` as evaluated on entry.
    pub f_center: f64,
    /// `f(x - delta * ghat)` from the accepting descent check.
    pub f_step: Option<f64>,
    /// Completed inner iterations.
    pub inner_iters: usize,
    pub value_evals: u64,
    pub grad_evals: u64,
    /// `||g_k||` for `k = 0..=inner_iters`.
    pub inner_norms: Vec<f64>,
}

/// Approximate min-norm element of the delta-ball subdifferential at `x`.
///
/// The first trial vector is a gradient at a uniform point of `B_delta(x)`;
/// each iteration spends exactly one value evaluation (the descent test
/// against the cached `f(x)`) and one gradient evaluation (at a uniform
/// point of the perturbed segment).
pub fn min_norm<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    x: &[f64],
    cfg: &MinNormConfig,
    rng: &mut R,
) -> Result<MinNormResult, IngdError> {
    cfg.validate()?;
    let delta = cfg.params.delta;
    let epsilon = cfg.params.epsilon;
    // keep sampled witnesses strictly inside the ball even after kink
    // perturbation
    let ball_shrink = 1.0 - 2f64.powi(-20);
    let kink_radius = delta * 2f64.powi(-40);

    let mut value_evals = 0u64;
    let mut grad_evals = 0u64;
    let f_center = oracle.value(x);
    value_evals += 1;

    let seed_point = linalg::add_scaled(
        x,
        delta * ball_shrink,
        &linalg::sample_unit_ball(rng, x.len()),
    );
    let pg = eval_gradient_perturbed(oracle, &seed_point, rng, kink_radius)?;
    grad_evals += pg.attempts as u64;
    let mut estimate = SubgradientEstimate::from_single(x.to_vec(), pg.point, pg.gradient);
    let mut inner_norms = vec![estimate.norm()];

    for k in 0..cfg.max_inner_iters {
        let gn = estimate.norm();
        if gn <= epsilon {
            return Ok(MinNormResult {
                estimate,
                outcome: MinNormOutcome::SmallNorm,
                f_center,
                f_step: None,
                inner_iters: k,
                value_evals,
                grad_evals,
                inner_norms,
            });
        }
        let check = descent_quarter(oracle, x, f_center, &estimate.combination, delta).map_err(
            |e| match e {
                GoldsteinError::ZeroDirection => IngdError::ZeroDirection,
                other => IngdError::Params(other),
            },
        )?;
        value_evals += 1;
        if check.accepted {
            return Ok(MinNormResult {
                estimate,
                outcome: MinNormOutcome::Descent,
                f_center,
                f_step: Some(check.f_step),
                inner_iters: k,
                value_evals,
                grad_evals,
                inner_norms,
            });
        }

        // perturb the trial vector, then sample a gradient on the segment
        // toward the perturbed direction
        let r = perturbation_radius(&estimate.combination, cfg.params.lipschitz, cfg.r_fraction)?;
        let zeta = linalg::add_scaled(
            &estimate.combination,
            r,
            &linalg::sample_unit_ball(rng, x.len()),
        );
        // r < ||g||, so zeta stays away from zero
        let zeta_hat = linalg::normalized(&zeta).expect("perturbed trial vector is nonzero");
        let t: f64 = rng.random::<f64>() * ball_shrink;
        let y = linalg::add_scaled(x, -t * delta, &zeta_hat);
        let pg = eval_gradient_perturbed(oracle, &y, rng, kink_radius)?;
        grad_evals += pg.attempts as u64;

        let (z, lambda) = project_origin_segment(&estimate.combination, &pg.gradient);
        estimate.blend(lambda, pg.point, pg.gradient);
        estimate.combination = z;
        inner_norms.push(estimate.norm());
    }

    Ok(MinNormResult {
        estimate,
        outcome: MinNormOutcome::BudgetExhausted,
        f_center,
        f_step: None,
        inner_iters: cfg.max_inner_iters,
        value_evals,
        grad_evals,
        inner_norms,
    })
}

/// One outer iteration of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub g_norm: f64,
    pub inner_iters: usize,
    pub value_evals: u64,
    pub grad_evals: u64,
    pub outcome: MinNormOutcome,
}

/// Per-iteration log of a run, plus terminal flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<OuterRecord>,
    /// An inner call hit its iteration budget; the run was aborted there.
    pub inner_budget_exhausted: bool,
    /// The outer budget ran out before a certificate was found.
    pub outer_budget_exhausted: bool,
}

impl RunTrace {
    pub fn total_value_evals(&self) -> u64 {
        self.records.iter().map(|r| r.value_evals).sum()
    }

    pub fn total_grad_evals(&self) -> u64 {
        self.records.iter().map(|r| r.grad_evals).sum()
    }

    pub fn total_inner_iters(&self) -> usize {
        self.records.iter().map(|r| r.inner_iters).sum()
    }
}

/// Completed run: final iterate, trace, and certificate when one was found.
#[derive(Debug, Clone)]
pub struct IngdRun {
    pub x_final: Vec<f64>,
    pub trace: RunTrace,
    pub certificate: Option<StationarityCertificate>,
    /// Inner-loop norm trajectory of the first outer iteration.
    pub first_inner_norms: Vec<f64>,
}

/// Runs normalized descent steps `x <- x - delta * ghat` until the inner
/// loop certifies a small norm, a budget runs out, or `t_budget` outer
/// iterations complete.
pub fn ingd_run<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    x0: &[f64],
    cfg: &MinNormConfig,
    t_budget: usize,
    rng: &mut R,
) -> Result<IngdRun, IngdError> {
    assert!(t_budget >= 1, "outer budget must be at least 1");
    let mut x = x0.to_vec();
    let mut trace = RunTrace::default();
    let mut certificate = None;
    let mut first_inner_norms = Vec::new();

    for t in 0..t_budget {
        let res = min_norm(oracle, &x, cfg, rng)?;
        if t == 0 {
            first_inner_norms = res.inner_norms.clone();
        }
        trace.records.push(OuterRecord {
            t,
            x: x.clone(),
            f: res.f_center,
            g_norm: res.estimate.norm(),
            inner_iters: res.inner_iters,
            value_evals: res.value_evals,
            grad_evals: res.grad_evals,
            outcome: res.outcome,
        });
        match res.outcome {
            MinNormOutcome::Descent => {
                let ghat = linalg::normalized(&res.estimate.combination)
                    .ok_or(IngdError::ZeroDirection)?;
                x = linalg::add_scaled(&x, -cfg.params.delta, &ghat);
            }
            MinNormOutcome::SmallNorm => {
                certificate = Some(StationarityCertificate::new(
                    res.estimate,
                    cfg.params.clone(),
                ));
                break;
            }
            MinNormOutcome::BudgetExhausted => {
                trace.inner_budget_exhausted = true;
                break;
            }
        }
    }
    if certificate.is_none() && !trace.inner_budget_exhausted {
        trace.outer_budget_exhausted = true;
    }

    Ok(IngdRun {
        x_final: x,
        trace,
        certificate,
        first_inner_norms,
    })
}
