//! Cutting-plane search for an approximate min-norm element of the
//! delta-ball subdifferential, driven by an inner-product oracle.
//!
//! A direction that fails the fixed-threshold descent test yields, through
//! segment sampling (Lipschitz case) or interval bisection (weakly convex
//! case), a subgradient `u` with `<u, ghat> <= eps/2`. Such a `u` separates
//! the current query from the normalized min-norm element, so each oracle
//! answer cuts the search region; the convex hull of the answers
//! simultaneously drives the termination test.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{estimate_centroid, ConvexBody, GeometryError, SamplingPlan};
use crate::goldstein::{
    descent_third, GoldsteinError, GoldsteinParams, StationarityCertificate, SubgradientEstimate,
    Witness,
};
use crate::linalg::{self, dot, norm};
use crate::minnorm::{wolfe_min_norm_warm, PointSet, WolfeState, DEFAULT_WOLFE_TOL};
use crate::oracle::{eval_gradient_perturbed, FunctionOracle, OracleError};

#[derive(Debug, Error)]
pub enum CuttingPlaneError {
    #[error("direction has zero norm")]
    ZeroDirection,
    #[error("weakly convex oracle requires a declared rho")]
    RhoAbsent,
    #[error("inner-product oracle exhausted its sample budget of {budget}")]
    OracleBudgetExhausted { budget: usize },
    #[error("oracle call cap reached after {calls} calls (cap {cap}, iteration {iteration})")]
    CallCapExceeded {
        calls: usize,
        cap: usize,
        iteration: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Params(#[from] GoldsteinError),
}

/// Which inner-product oracle backs the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CgVariant {
    Lipschitz,
    WeaklyConvex,
}

/// A direction query: the segment `[x, x - delta * ghat]` the oracle probes.
#[derive(Debug, Clone)]
pub struct OracleQuery {
    pub center: Vec<f64>,
    pub direction: Vec<f64>,
    pub unit_direction: Vec<f64>,
    pub segment_end: Vec<f64>,
    pub delta: f64,
}

impl OracleQuery {
    pub fn new(center: &[f64], direction: &[f64], delta: f64) -> Result<Self, CuttingPlaneError> {
        let unit_direction =
            linalg::normalized(direction).ok_or(CuttingPlaneError::ZeroDirection)?;
        let segment_end = linalg::add_scaled(center, -delta, &unit_direction);
        Ok(OracleQuery {
            center: center.to_vec(),
            direction: direction.to_vec(),
            unit_direction,
            segment_end,
            delta,
        })
    }
}

/// Oracle answer: a subgradient, the point it was taken at, and the
/// evaluations spent producing it.
#[derive(Debug, Clone)]
pub struct IpOracleAnswer {
    pub vector: Vec<f64>,
    pub witness: Vec<f64>,
    pub value_evals: u64,
    pub grad_evals: u64,
}

/// Sample budget of the Lipschitz inner-product oracle:
/// `ceil(36 L / eps) * ceil(ln(1/gamma) / ln 4)`.
pub fn ip_oracle_sample_budget(lipschitz: f64, epsilon: f64, gamma: f64) -> usize {
    let per_block = (36.0 * lipschitz / epsilon).ceil().max(1.0);
    let blocks = ((1.0 / gamma).ln() / 4f64.ln()).ceil().max(1.0);
    (per_block * blocks) as usize
}

/// Randomized inner-product oracle for Lipschitz functions: samples
/// gradients at uniform points of the query segment until one has
/// `<grad, ghat> <= eps / 2`.
///
/// The caller must have checked that the direction fails the descent test;
/// under that precondition each sample succeeds with probability at least
/// `eps / (12 L)`.
pub fn ip_oracle_lipschitz<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    query: &OracleQuery,
    params: &GoldsteinParams,
    rng: &mut R,
) -> Result<IpOracleAnswer, CuttingPlaneError> {
    let budget = ip_oracle_sample_budget(params.lipschitz, params.epsilon, params.gamma);
    let kink_radius = params.delta * 2f64.powi(-40);
    let mut grad_evals = 0u64;
    for _ in 0..budget {
        let t: f64 = rng.random();
        let z = linalg::add_scaled(&query.center, -t * query.delta, &query.unit_direction);
        let pg = eval_gradient_perturbed(oracle, &z, rng, kink_radius)?;
        grad_evals += pg.attempts as u64;
        if dot(&pg.gradient, &query.unit_direction) <= params.epsilon / 2.0 {
            return Ok(IpOracleAnswer {
                vector: pg.gradient,
                witness: pg.point,
                value_evals: 0,
                grad_evals,
            });
        }
    }
    Err(CuttingPlaneError::OracleBudgetExhausted { budget })
}

/// Deterministic inner-product oracle for rho-weakly convex functions:
/// bisects `[0, 1]` keeping the half whose mean directional derivative is
/// smaller (three value evaluations per halving), stopping once the interval
/// is shorter than `eps / (6 delta rho)`.
///
/// Returns the gradient at the right interval endpoint: weak convexity lets
/// the directional derivative exceed the interval mean by at most
/// `rho * delta * (b - a)`, which the stopping width caps at `eps / 6`, so
/// the answer satisfies `<grad, ghat> <= eps/3 + eps/6 = eps/2`.
pub fn ip_oracle_weakly_convex<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    query: &OracleQuery,
    params: &GoldsteinParams,
    rng: &mut R,
) -> Result<IpOracleAnswer, CuttingPlaneError> {
    let rho = params.rho.ok_or(CuttingPlaneError::RhoAbsent)?;
    let delta = query.delta;
    let threshold = if rho > 0.0 {
        params.epsilon / (6.0 * delta * rho)
    } else {
        f64::INFINITY
    };
    let point_at = |t: f64| linalg::add_scaled(&query.center, -t * delta, &query.unit_direction);

    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut value_evals = 0u64;
    let mut rounds = 0;
    while b - a > threshold && rounds < 128 {
        let mid = 0.5 * (a + b);
        let fa = oracle.value(&point_at(a));
        let fm = oracle.value(&point_at(mid));
        let fb = oracle.value(&point_at(b));
        value_evals += 3;
        if fa - fm <= fm - fb {
            b = mid;
        } else {
            a = mid;
        }
        rounds += 1;
    }

    let z_bar = point_at(b);
    let pg = eval_gradient_perturbed(oracle, &z_bar, rng, delta * 2f64.powi(-40))?;
    Ok(IpOracleAnswer {
        vector: pg.gradient,
        witness: pg.point,
        value_evals,
        grad_evals: pg.attempts as u64,
    })
}

/// Oracle-call budget of one cutting-plane search:
/// `ceil(8 d ln(8 L / eps))`.
pub fn cg_oracle_call_budget(dim: usize, lipschitz: f64, epsilon: f64) -> usize {
    (8.0 * dim as f64 * (8.0 * lipschitz / epsilon).ln())
        .ceil()
        .max(1.0) as usize
}

/// Outer-loop budget `ceil(3 Delta / (delta * eps))`: each accepted step
/// decreases `f` by at least `delta * eps / 3`.
pub fn cg_outer_budget(gap: f64, delta: f64, epsilon: f64) -> usize {
    (3.0 * gap / (delta * epsilon)).ceil().max(1.0) as usize
}

/// One retained subgradient and the point it came from.
#[derive(Debug, Clone)]
pub struct HullPoint {
    pub gradient: Vec<f64>,
    pub witness: Vec<f64>,
}

/// Search state: the current region, the hull of oracle answers, and
/// evaluation accounting.
#[derive(Debug, Clone)]
pub struct CgState {
    pub body: ConvexBody,
    pub hull: Vec<HullPoint>,
    pub iterations: usize,
    pub oracle_calls: usize,
    /// Oracle calls went past the nominal budget into the slack allowance.
    pub slack_used: bool,
    pub centroid_samples: usize,
    pub value_evals: u64,
    pub grad_evals: u64,
    pub interior_point: Vec<f64>,
    /// Hull min-norm value at each iteration (nonincreasing).
    pub hull_min_norms: Vec<f64>,
    /// Weakly convex variant was requested without a declared rho.
    pub fell_back_to_lipschitz: bool,
}

/// How one cutting-plane search ended.
#[derive(Debug, Clone)]
pub enum CgOutcome {
    /// Direction satisfying the fixed-threshold descent test (unnormalized).
    DescentDirection { direction: Vec<f64>, f_step: f64 },
    /// The hull min-norm fell to `eps` or below; certificate attached.
    SmallNorm {
        certificate: StationarityCertificate,
    },
}

/// Slack added to the nominal oracle-call budget before aborting.
fn call_cap(dim: usize, base: usize) -> usize {
    base + 2 * dim
}

/// Cutting-plane search for a descent direction or a small-norm certificate
/// at `x`.
pub fn min_norm_cg<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    x: &[f64],
    params: &GoldsteinParams,
    variant: CgVariant,
    rng: &mut R,
) -> Result<(CgOutcome, CgState), CuttingPlaneError> {
    params.validate()?;
    let dim = oracle.dim();
    assert_eq!(x.len(), dim, "point dimension mismatch");
    let delta = params.delta;
    let epsilon = params.epsilon;
    let lipschitz = params.lipschitz;

    let fell_back = variant == CgVariant::WeaklyConvex && params.rho.is_none();
    let effective_variant = if fell_back {
        CgVariant::Lipschitz
    } else {
        variant
    };

    let budget_base = cg_oracle_call_budget(dim, lipschitz, epsilon);
    let cap = call_cap(dim, budget_base);
    let trial_radius = 0.5 * epsilon / (32.0 * dim as f64 * lipschitz);
    let plan = SamplingPlan::defaults(dim);

    let mut state = CgState {
        body: ConvexBody::ball(dim, 2.0),
        hull: Vec::new(),
        iterations: 0,
        oracle_calls: 0,
        slack_used: false,
        centroid_samples: 0,
        value_evals: 0,
        grad_evals: 0,
        interior_point: vec![0.0; dim],
        hull_min_norms: Vec::new(),
        fell_back_to_lipschitz: fell_back,
    };

    let fx = oracle.value(x);
    state.value_evals += 1;
    let pg = eval_gradient_perturbed(oracle, x, rng, delta * 2f64.powi(-40))?;
    state.grad_evals += pg.attempts as u64;
    state.hull.push(HullPoint {
        gradient: pg.gradient,
        witness: pg.point,
    });

    let mut hull_points =
        PointSet::new(vec![state.hull[0].gradient.clone()]).expect("hull starts with one gradient");
    let mut wolfe_state = WolfeState::default();

    loop {
        state.iterations += 1;
        let sol = wolfe_min_norm_warm(&hull_points, DEFAULT_WOLFE_TOL, &mut wolfe_state);
        let hull_norm = sol.norm();
        state.hull_min_norms.push(hull_norm);
        if hull_norm <= epsilon {
            let witnesses = state
                .hull
                .iter()
                .zip(&sol.weights)
                .map(|(hp, &w)| Witness {
                    point: hp.witness.clone(),
                    gradient: hp.gradient.clone(),
                    weight: w,
                })
                .collect::<Vec<_>>();
            let estimate =
                SubgradientEstimate::from_weights(x.to_vec(), sol.point.clone(), witnesses);
            let certificate = StationarityCertificate::new(estimate, params.clone());
            return Ok((CgOutcome::SmallNorm { certificate }, state));
        }

        let centroid = estimate_centroid(&state.body, &state.interior_point, &plan, rng)?;
        state.centroid_samples += centroid.n_samples;
        state.interior_point = centroid.interior_point.clone();
        let region_center = centroid.mu_hat;

        // a centroid at the origin leaves the direction undefined; fall
        // through to the perturbed trial
        if norm(&region_center) >= 1e-9 {
            let check = descent_third(oracle, x, fx, &region_center, delta, epsilon)?;
            state.value_evals += 1;
            if check.accepted {
                return Ok((
                    CgOutcome::DescentDirection {
                        direction: region_center,
                        f_step: check.f_step,
                    },
                    state,
                ));
            }
        }

        let trial = loop {
            let candidate = linalg::add_scaled(
                &region_center,
                trial_radius,
                &linalg::sample_unit_ball(rng, dim),
            );
            if norm(&candidate) > 0.0 {
                break candidate;
            }
        };
        let check = descent_third(oracle, x, fx, &trial, delta, epsilon)?;
        state.value_evals += 1;
        if check.accepted {
            return Ok((
                CgOutcome::DescentDirection {
                    direction: trial,
                    f_step: check.f_step,
                },
                state,
            ));
        }

        if state.oracle_calls >= cap {
            return Err(CuttingPlaneError::CallCapExceeded {
                calls: state.oracle_calls,
                cap,
                iteration: state.iterations,
            });
        }
        let query = OracleQuery::new(x, &trial, delta)?;
        let answer = match effective_variant {
            CgVariant::Lipschitz => ip_oracle_lipschitz(oracle, &query, params, rng)?,
            CgVariant::WeaklyConvex => ip_oracle_weakly_convex(oracle, &query, params, rng)?,
        };
        state.oracle_calls += 1;
        if state.oracle_calls > budget_base {
            state.slack_used = true;
        }
        state.value_evals += answer.value_evals;
        state.grad_evals += answer.grad_evals;

        let new_body = state.body.cut(&answer.vector, &trial)?;
        if !new_body.membership(&state.interior_point) {
            // walk from the centroid along the kept side's normal
            let dir = linalg::normalized(&answer.vector).ok_or(CuttingPlaneError::ZeroDirection)?;
            state.interior_point = new_body
                .interior_point_on_line(&region_center, &dir)
                .ok_or(GeometryError::EmptyInterior)?;
        }
        state.body = new_body;
        hull_points
            .push(answer.vector.clone())
            .expect("gradient dimension matches the hull");
        state.hull.push(HullPoint {
            gradient: answer.vector,
            witness: answer.witness,
        });
    }
}

/// One outer iteration of a cutting-plane descent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CgOuterRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub f: f64,
    /// Norm of the raw (unnormalized) direction or hull combination.
    pub direction_norm: f64,
    pub cg_iters: usize,
    pub oracle_calls: usize,
    pub centroid_samples: usize,
    pub value_evals: u64,
    pub grad_evals: u64,
    pub outcome: CgStepOutcome,
    pub slack_used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CgStepOutcome {
    Descent,
    SmallNorm,
    BudgetExhausted,
}

impl CgStepOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            CgStepOutcome::Descent => "descent",
            CgStepOutcome::SmallNorm => "small_norm",
            CgStepOutcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// Completed cutting-plane run.
#[derive(Debug, Clone)]
pub struct CgRun {
    pub x_final: Vec<f64>,
    pub records: Vec<CgOuterRecord>,
    pub certificate: Option<StationarityCertificate>,
    /// A search aborted on its oracle budget; the run stopped there.
    pub budget_exhausted: bool,
    /// The outer budget ran out before a certificate was found.
    pub outer_budget_exhausted: bool,
    pub fell_back_to_lipschitz: bool,
}

/// Runs normalized descent steps driven by [`min_norm_cg`] until it
/// certifies a small norm, a budget runs out, or `t_budget` outer
/// iterations complete.
pub fn cg_descent_run<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    x0: &[f64],
    params: &GoldsteinParams,
    variant: CgVariant,
    t_budget: usize,
    rng: &mut R,
) -> Result<CgRun, CuttingPlaneError> {
    assert!(t_budget >= 1, "outer budget must be at least 1");
    let mut x = x0.to_vec();
    let mut records = Vec::new();
    let mut certificate = None;
    let mut budget_exhausted = false;
    let mut fell_back = false;

    for t in 0..t_budget {
        let f_here = oracle.value(&x);
        match min_norm_cg(oracle, &x, params, variant, rng) {
            Ok((outcome, state)) => {
                fell_back |= state.fell_back_to_lipschitz;
                match outcome {
                    CgOutcome::DescentDirection { direction, f_step } => {
                        records.push(CgOuterRecord {
                            t,
                            x: x.clone(),
                            f: f_here,
                            direction_norm: norm(&direction),
                            cg_iters: state.iterations,
                            oracle_calls: state.oracle_calls,
                            centroid_samples: state.centroid_samples,
                            value_evals: state.value_evals + 1,
                            grad_evals: state.grad_evals,
                            outcome: CgStepOutcome::Descent,
                            slack_used: state.slack_used,
                        });
                        let ghat = linalg::normalized(&direction)
                            .ok_or(CuttingPlaneError::ZeroDirection)?;
                        x = linalg::add_scaled(&x, -params.delta, &ghat);
                        debug_assert!(f_step <= f_here - params.delta * params.epsilon / 3.0);
                    }
                    CgOutcome::SmallNorm { certificate: cert } => {
                        records.push(CgOuterRecord {
                            t,
                            x: x.clone(),
                            f: f_here,
                            direction_norm: cert.norm_bound,
                            cg_iters: state.iterations,
                            oracle_calls: state.oracle_calls,
                            centroid_samples: state.centroid_samples,
                            value_evals: state.value_evals + 1,
                            grad_evals: state.grad_evals,
                            outcome: CgStepOutcome::SmallNorm,
                            slack_used: state.slack_used,
                        });
                        certificate = Some(cert);
                        break;
                    }
                }
            }
            Err(err @ CuttingPlaneError::CallCapExceeded { .. })
            | Err(err @ CuttingPlaneError::OracleBudgetExhausted { .. }) => {
                let (calls, slack) = match &err {
                    CuttingPlaneError::CallCapExceeded { calls, .. } => (*calls, true),
                    _ => (0, false),
                };
                records.push(CgOuterRecord {
                    t,
                    x: x.clone(),
                    f: f_here,
                    direction_norm: f64::NAN,
                    cg_iters: 0,
                    oracle_calls: calls,
                    centroid_samples: 0,
                    value_evals: 1,
                    grad_evals: 0,
                    outcome: CgStepOutcome::BudgetExhausted,
                    slack_used: slack,
                });
                budget_exhausted = true;
                break;
            }
            Err(other) => return Err(other),
        }
    }

    let outer_budget_exhausted = certificate.is_none() && !budget_exhausted;
    Ok(CgRun {
        x_final: x,
        records,
        certificate,
        budget_exhausted,
        outer_budget_exhausted,
        fell_back_to_lipschitz: fell_back,
    })
}
