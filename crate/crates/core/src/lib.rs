//! Solvers for finding (delta, epsilon)-stationary points of nonsmooth,
//! nonconvex Lipschitz functions.
//!
//! A point `x` is (delta, epsilon)-stationary when the convex hull of
//! gradients taken in the delta-ball around `x` contains a vector of norm at
//! most epsilon. The crate provides:
//!
//! - [`oracle`]: the first-order oracle abstraction and a built-in suite of
//!   Lipschitz test functions with certified constants;
//! - [`goldstein`]: witnessed subgradient estimates, descent predicates, and
//!   machine-checkable stationarity certificates;
//! - [`ingd`]: interpolated normalized gradient descent, whose inner loop
//!   shrinks a trial vector by projecting the origin onto gradient segments;
//! - [`minnorm`]: Wolfe's active-set method for the minimum-norm point of a
//!   convex hull;
//! - [`geometry`]: the cutting-plane search region (ball plus halfspaces)
//!   and hit-and-run centroid estimation;
//! - [`cutting_plane`]: a center-of-gravity cutting-plane solver that is
//!   faster in low dimensions, with randomized (Lipschitz) and bisection
//!   (weakly convex) inner-product oracles.
//!
//! All randomness flows through caller-provided generators, so every run is
//! reproducible from its seed.
//!
//! ```
//! use nsopt_core::goldstein::{verify_certificate, GoldsteinParams};
//! use nsopt_core::ingd::{ingd_run, MinNormConfig};
//! use nsopt_core::oracle::{make_test_function, TestFunctionSpec};
//! use rand::SeedableRng;
//!
//! let oracle = make_test_function(&TestFunctionSpec::AbsSum { dim: 2 }).unwrap();
//! let params = GoldsteinParams::new(0.1, 0.1, 0.01, oracle.lipschitz()).unwrap();
//! let cfg = MinNormConfig::new(params);
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//!
//! let run = ingd_run(&oracle, &[1.0, 1.0], &cfg, 800, &mut rng).unwrap();
//! let cert = run.certificate.expect("the kink at the origin certifies");
//! assert_eq!(verify_certificate(&oracle, &cert), Ok(true));
//! assert!(cert.norm_bound <= 0.1);
//! ```

pub mod cutting_plane;
pub mod geometry;
pub mod goldstein;
pub mod ingd;
pub mod linalg;
pub mod minnorm;
pub mod oracle;

pub use cutting_plane::{
    cg_descent_run, cg_oracle_call_budget, cg_outer_budget, ip_oracle_lipschitz,
    ip_oracle_weakly_convex, min_norm_cg, CgOutcome, CgRun, CgState, CgVariant, CuttingPlaneError,
    OracleQuery,
};
pub use geometry::{estimate_centroid, CentroidEstimate, ConvexBody, GeometryError, SamplingPlan};
pub use goldstein::{
    descent_quarter, descent_third, project_origin_segment, verify_certificate,
    CertificateViolation, GoldsteinError, GoldsteinParams, StationarityCertificate,
    SubgradientEstimate, Witness,
};
pub use ingd::{
    ingd_outer_budget, ingd_run, ingd_total_eval_budget, min_norm, minnorm_iter_budget,
    perturbation_radius, IngdError, IngdRun, MinNormConfig, MinNormOutcome, MinNormResult,
    RunTrace,
};
pub use minnorm::{
    min_norm_lower_witness, wolfe_min_norm, wolfe_min_norm_warm, MinNormError, MinNormPoint,
    PointSet, WolfeState,
};
pub use oracle::{
    check_gradient_fd, default_perturb_radius, eval_gradient_perturbed, make_test_function,
    AffinePiece, Domain, EvalCounts, FunctionOracle, OracleError, PerturbedGradient,
    TestFunctionSpec,
};
