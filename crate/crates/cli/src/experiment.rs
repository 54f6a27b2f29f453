//! Seeded experiment runs with CSV traces and JSON summaries.
//!
//! One run = one (config, seed) pair; seeds execute in a parallel worker
//! pool, each owning its generator and output files. Artifacts are
//! deterministic per (config, seed): repeating a run reproduces the CSV
//! byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use nsopt_core::cutting_plane::{cg_descent_run, cg_outer_budget, CgRun, CgVariant};
use nsopt_core::goldstein::{verify_certificate, GoldsteinParams, StationarityCertificate};
use nsopt_core::ingd::{ingd_outer_budget, ingd_run, IngdRun, MinNormConfig};
use nsopt_core::oracle::FunctionOracle;

use crate::config::{Algorithm, ConfigError, ExperimentConfig};

/// Bumped whenever the CSV columns or JSON fields change.
pub const SCHEMA_VERSION: u32 = 1;

/// CSV header for descent runs of the inner min-norm algorithm.
pub const INGD_CSV_HEADER: &str = "t,k_total,f,g_norm,value_evals,grad_evals,outcome";
/// CSV header for cutting-plane runs (three extra columns).
pub const CG_CSV_HEADER: &str =
    "t,k_total,f,g_norm,value_evals,grad_evals,outcome,cg_iters,oracle_calls,centroid_samples";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

/// Function gap used in budget formulas; estimated when the minimum is not
/// declared.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GapInfo {
    pub value: f64,
    pub estimated: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunFlags {
    pub inner_budget_exhausted: bool,
    pub outer_budget_exhausted: bool,
    pub slack_used: bool,
    pub fallback_lipschitz: bool,
}

/// Everything validation needs from one run, serialized next to its CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub function: String,
    pub dim: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub params: GoldsteinParams,
    pub x0: Vec<f64>,
    pub outer_budget: usize,
    pub outcome: String,
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub value_evals: u64,
    pub grad_evals: u64,
    pub oracle_calls: u64,
    pub gap: GapInfo,
    pub flags: RunFlags,
    /// Inner iterations of each min-norm call (descent runs only).
    pub minnorm_inner_iters: Vec<usize>,
    /// Inner-loop norm trajectory of the first outer iteration.
    pub first_minnorm_inner_norms: Option<Vec<f64>>,
    /// Oracle calls of each cutting-plane search (cutting-plane runs only).
    pub cg_oracle_calls: Vec<usize>,
    pub certificate: Option<StationarityCertificate>,
    pub certificate_verified: Option<bool>,
    pub csv_rows: usize,
    pub wall_time_ms: u128,
}

/// Artifact paths and summary of one completed seed.
#[derive(Debug, Clone)]
pub struct SeedArtifacts {
    pub seed: u64,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub summary: RunSummary,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub artifacts: Vec<SeedArtifacts>,
    pub failures: Vec<(u64, String)>,
}

fn resolve_gap(oracle: &FunctionOracle, f0: f64, best_seen: f64) -> GapInfo {
    match oracle.known_minimum() {
        Some(min) => GapInfo {
            value: f0 - min,
            estimated: false,
        },
        None => GapInfo {
            value: f0 - best_seen,
            estimated: true,
        },
    }
}

fn ingd_csv(run: &IngdRun) -> String {
    let mut out = String::from(INGD_CSV_HEADER);
    out.push('\n');
    let (mut k_total, mut value_evals, mut grad_evals) = (0usize, 0u64, 0u64);
    for rec in &run.trace.records {
        k_total += rec.inner_iters;
        value_evals += rec.value_evals;
        grad_evals += rec.grad_evals;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            rec.t,
            k_total,
            rec.f,
            rec.g_norm,
            value_evals,
            grad_evals,
            rec.outcome.as_str()
        );
    }
    out
}

fn cg_csv(run: &CgRun) -> String {
    let mut out = String::from(CG_CSV_HEADER);
    out.push('\n');
    let (mut k_total, mut value_evals, mut grad_evals) = (0usize, 0u64, 0u64);
    for rec in &run.records {
        k_total += rec.cg_iters;
        value_evals += rec.value_evals;
        grad_evals += rec.grad_evals;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            rec.t,
            k_total,
            rec.f,
            rec.direction_norm,
            value_evals,
            grad_evals,
            rec.outcome.as_str(),
            rec.cg_iters,
            rec.oracle_calls,
            rec.centroid_samples
        );
    }
    out
}

fn run_one_seed(
    cfg: &ExperimentConfig,
    oracle: &FunctionOracle,
    seed: u64,
) -> Result<(String, RunSummary), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    oracle.reset_counts();
    let f0 = oracle.value(&cfg.x0);

    let summary_base = |outcome: String,
                        x_final: Vec<f64>,
                        f_final: f64,
                        gap: GapInfo,
                        outer_budget: usize,
                        flags: RunFlags,
                        certificate: Option<StationarityCertificate>,
                        csv_rows: usize| {
        let verified = certificate
            .as_ref()
            .map(|c| verify_certificate(oracle, c) == Ok(true));
        let counts = oracle.eval_counts();
        RunSummary {
            schema_version: SCHEMA_VERSION,
            function: oracle.name().to_string(),
            dim: oracle.dim(),
            algorithm: cfg.algorithm,
            seed,
            params: cfg.params.clone(),
            x0: cfg.x0.clone(),
            outer_budget,
            outcome,
            x_final,
            f_final,
            value_evals: counts.value,
            grad_evals: counts.gradient,
            oracle_calls: 0,
            gap,
            flags,
            minnorm_inner_iters: Vec::new(),
            first_minnorm_inner_norms: None,
            cg_oracle_calls: Vec::new(),
            certificate,
            certificate_verified: verified,
            csv_rows,
            wall_time_ms: start.elapsed().as_millis(),
        }
    };

    match cfg.algorithm {
        Algorithm::Ingd => {
            let minnorm_cfg = MinNormConfig::new(cfg.params.clone());
            let outer_budget = cfg.outer_budget.unwrap_or_else(|| {
                let gap = f0 - oracle.known_minimum().unwrap_or(0.0);
                ingd_outer_budget(gap.max(0.0), cfg.params.delta, cfg.params.epsilon)
            });
            let run = ingd_run(oracle, &cfg.x0, &minnorm_cfg, outer_budget, &mut rng)
                .map_err(|e| e.to_string())?;
            let csv = ingd_csv(&run);
            let f_final = run.trace.records.last().map(|r| r.f).unwrap_or(f0);
            let best_seen = run.trace.records.iter().map(|r| r.f).fold(f0, f64::min);
            let outcome = if run.certificate.is_some() {
                "certificate"
            } else if run.trace.inner_budget_exhausted {
                "inner_budget_exhausted"
            } else {
                "outer_budget_exhausted"
            };
            let flags = RunFlags {
                inner_budget_exhausted: run.trace.inner_budget_exhausted,
                outer_budget_exhausted: run.trace.outer_budget_exhausted,
                ..RunFlags::default()
            };
            let mut summary = summary_base(
                outcome.to_string(),
                run.x_final.clone(),
                f_final,
                resolve_gap(oracle, f0, best_seen),
                outer_budget,
                flags,
                run.certificate.clone(),
                run.trace.records.len(),
            );
            summary.minnorm_inner_iters = run.trace.records.iter().map(|r| r.inner_iters).collect();
            summary.first_minnorm_inner_norms = Some(run.first_inner_norms.clone());
            Ok((csv, summary))
        }
        Algorithm::MinnormCgLipschitz | Algorithm::MinnormCgWeaklyConvex => {
            let variant = if cfg.algorithm == Algorithm::MinnormCgLipschitz {
                CgVariant::Lipschitz
            } else {
                CgVariant::WeaklyConvex
            };
            let outer_budget = cfg.outer_budget.unwrap_or_else(|| {
                let gap = f0 - oracle.known_minimum().unwrap_or(0.0);
                cg_outer_budget(gap.max(0.0), cfg.params.delta, cfg.params.epsilon)
            });
            let run = cg_descent_run(
                oracle,
                &cfg.x0,
                &cfg.params,
                variant,
                outer_budget,
                &mut rng,
            )
            .map_err(|e| e.to_string())?;
            let csv = cg_csv(&run);
            let f_final = run.records.last().map(|r| r.f).unwrap_or(f0);
            let best_seen = run.records.iter().map(|r| r.f).fold(f0, f64::min);
            let outcome = if run.certificate.is_some() {
                "certificate"
            } else if run.budget_exhausted {
                "oracle_budget_exhausted"
            } else {
                "outer_budget_exhausted"
            };
            let flags = RunFlags {
                inner_budget_exhausted: run.budget_exhausted,
                outer_budget_exhausted: run.outer_budget_exhausted,
                slack_used: run.records.iter().any(|r| r.slack_used),
                fallback_lipschitz: run.fell_back_to_lipschitz,
            };
            let oracle_calls: u64 = run.records.iter().map(|r| r.oracle_calls as u64).sum();
            let mut summary = summary_base(
                outcome.to_string(),
                run.x_final.clone(),
                f_final,
                resolve_gap(oracle, f0, best_seen),
                outer_budget,
                flags,
                run.certificate.clone(),
                run.records.len(),
            );
            summary.oracle_calls = oracle_calls;
            summary.cg_oracle_calls = run.records.iter().map(|r| r.oracle_calls).collect();
            Ok((csv, summary))
        }
    }
}

/// Runs every seed of the experiment, writing `<label>_seed<seed>.csv` and
/// `.json` into the output directory. Failed seeds are collected, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    fs::create_dir_all(&cfg.output_dir).map_err(|source| HarnessError::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;

    let results: Vec<Result<SeedArtifacts, (u64, String)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            // one oracle per worker: eval counters are per-run
            let oracle = cfg.oracle().map_err(|e| (seed, e.to_string()))?;
            let (csv, summary) = run_one_seed(cfg, &oracle, seed).map_err(|e| (seed, e))?;
            let csv_path = cfg
                .output_dir
                .join(format!("{}_seed{}.csv", cfg.label, seed));
            let json_path = cfg
                .output_dir
                .join(format!("{}_seed{}.json", cfg.label, seed));
            fs::write(&csv_path, &csv).map_err(|e| (seed, e.to_string()))?;
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            fs::write(&json_path, json).map_err(|e| (seed, e.to_string()))?;
            Ok(SeedArtifacts {
                seed,
                csv_path,
                json_path,
                summary,
            })
        })
        .collect();

    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(a) => artifacts.push(a),
            Err(f) => failures.push(f),
        }
    }
    artifacts.sort_by_key(|a| a.seed);
    Ok(ExperimentReport {
        artifacts,
        failures,
    })
}
