//! Post-hoc validation of iteration and evaluation bounds over a directory
//! of run artifacts.
//!
//! Four checks: (a) the fraction of inner min-norm calls finishing within
//! the iteration budget, (b) decay of the inner-loop squared norms at fixed
//! checkpoints, (c) the per-search oracle-call cap of the cutting-plane
//! solver, and (d) the end-to-end evaluation budget of descent runs.
//! Statistical checks allow three standard errors of slack and report
//! UNDERPOWERED when a standard error cannot be estimated.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use nsopt_core::cutting_plane::cg_oracle_call_budget;
use nsopt_core::ingd::{ingd_total_eval_budget, minnorm_iter_budget};

use crate::config::Algorithm;
use crate::experiment::RunSummary;

pub const DECAY_CHECKPOINTS: [usize; 4] = [1, 4, 16, 64];

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("no run summaries found under {0}")]
    MissingTraces(PathBuf),
    #[error("trace {path} is truncated: CSV has {got} data rows, summary says {expected}")]
    TruncatedTrace {
        path: PathBuf,
        got: usize,
        expected: usize,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    BadSummary { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Underpowered,
    Skipped,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Underpowered => "UNDERPOWERED",
            CheckStatus::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub status: CheckStatus,
    pub details: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateReport {
    pub runs: usize,
    pub checks: Vec<CheckRow>,
}

impl ValidateReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| {
            matches!(
                c.status,
                CheckStatus::Pass | CheckStatus::Underpowered | CheckStatus::Skipped
            )
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!("validated {} runs\n", self.runs);
        for c in &self.checks {
            out.push_str(&format!(
                "{:<14} {:<28} {}\n",
                c.status.as_str(),
                c.name,
                c.details
            ));
        }
        out
    }
}

fn load_summaries(dir: &Path) -> Result<Vec<(PathBuf, RunSummary)>, ValidateError> {
    let entries = fs::read_dir(dir).map_err(|source| ValidateError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|source| ValidateError::Io {
            path: path.clone(),
            source,
        })?;
        let summary: RunSummary =
            serde_json::from_str(&text).map_err(|e| ValidateError::BadSummary {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        // integrity: the CSV next to the summary must hold every row
        let csv_path = path.with_extension("csv");
        if !csv_path.exists() {
            return Err(ValidateError::MissingTraces(csv_path));
        }
        let csv = fs::read_to_string(&csv_path).map_err(|source| ValidateError::Io {
            path: csv_path.clone(),
            source,
        })?;
        let got = csv.lines().count().saturating_sub(1);
        if got != summary.csv_rows {
            return Err(ValidateError::TruncatedTrace {
                path: csv_path,
                got,
                expected: summary.csv_rows,
            });
        }
        out.push((path, summary));
    }
    if out.is_empty() {
        return Err(ValidateError::MissingTraces(dir.to_path_buf()));
    }
    Ok(out)
}

fn mean_and_se(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    Some((mean, (var / n as f64).sqrt()))
}

fn check_inner_termination(summaries: &[&RunSummary]) -> CheckRow {
    let name = "minnorm-termination".to_string();
    let mut total = 0usize;
    let mut within = 0usize;
    let mut gamma = None;
    for s in summaries {
        let budget = minnorm_iter_budget(s.params.lipschitz, s.params.epsilon, s.params.gamma);
        gamma.get_or_insert(s.params.gamma);
        for &iters in &s.minnorm_inner_iters {
            total += 1;
            if iters < budget {
                within += 1;
            }
        }
    }
    if total == 0 {
        return CheckRow {
            name,
            status: CheckStatus::Skipped,
            details: "no inner min-norm calls recorded".into(),
        };
    }
    if total < 2 {
        return CheckRow {
            name,
            status: CheckStatus::Underpowered,
            details: format!("{total} call(s): standard error undefined"),
        };
    }
    let p = within as f64 / total as f64;
    let se = (p * (1.0 - p) / total as f64).sqrt();
    let gamma = gamma.unwrap_or(0.01);
    let threshold = 1.0 - gamma - 3.0 * se;
    CheckRow {
        name,
        status: if p >= threshold {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        details: format!("{within}/{total} within budget (p = {p:.4}, need >= {threshold:.4})"),
    }
}

fn check_inner_decay(summaries: &[&RunSummary]) -> CheckRow {
    let name = "minnorm-decay".to_string();
    let with_norms: Vec<&&RunSummary> = summaries
        .iter()
        .filter(|s| s.first_minnorm_inner_norms.is_some())
        .collect();
    if with_norms.is_empty() {
        return CheckRow {
            name,
            status: CheckStatus::Skipped,
            details: "no inner-loop trajectories recorded".into(),
        };
    }
    if with_norms.len() < 2 {
        return CheckRow {
            name,
            status: CheckStatus::Underpowered,
            details: "one trajectory: standard error undefined".into(),
        };
    }
    let lipschitz = with_norms[0].params.lipschitz;
    let mut details = String::new();
    let mut pass = true;
    for &k in &DECAY_CHECKPOINTS {
        let values: Vec<f64> = with_norms
            .iter()
            .map(|s| {
                let norms = s.first_minnorm_inner_norms.as_ref().unwrap();
                let running = s.minnorm_inner_iters.first().copied().unwrap_or(0) > k;
                if running && k < norms.len() {
                    norms[k] * norms[k]
                } else {
                    0.0
                }
            })
            .collect();
        let (mean, se) = mean_and_se(&values).expect("two or more trajectories");
        let bound = 16.0 * lipschitz * lipschitz / (16.0 + k as f64) + 3.0 * se;
        if mean > bound {
            pass = false;
        }
        details.push_str(&format!("k={k}: {mean:.4}<={bound:.4} "));
    }
    CheckRow {
        name,
        status: if pass {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        details,
    }
}

fn check_cg_call_cap(summaries: &[&RunSummary]) -> CheckRow {
    let name = "cg-oracle-call-cap".to_string();
    let mut total = 0usize;
    let mut worst: Option<(usize, usize)> = None;
    let mut violations = 0usize;
    for s in summaries {
        let cap = cg_oracle_call_budget(s.dim, s.params.lipschitz, s.params.epsilon) + 2 * s.dim;
        for &calls in &s.cg_oracle_calls {
            total += 1;
            if calls > cap {
                violations += 1;
            }
            if worst.map(|(w, _)| calls > w).unwrap_or(true) {
                worst = Some((calls, cap));
            }
        }
    }
    if total == 0 {
        return CheckRow {
            name,
            status: CheckStatus::Skipped,
            details: "no cutting-plane searches recorded".into(),
        };
    }
    let (worst_calls, cap) = worst.unwrap();
    CheckRow {
        name,
        status: if violations == 0 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        details: format!(
            "{total} searches, worst {worst_calls} calls (cap {cap}), {violations} over"
        ),
    }
}

fn check_total_evals(summaries: &[&RunSummary]) -> CheckRow {
    let name = "ingd-total-evaluations".to_string();
    let mut total = 0usize;
    let mut violations = 0usize;
    let mut estimated = 0usize;
    for s in summaries {
        let budget = ingd_total_eval_budget(
            s.gap.value.max(f64::MIN_POSITIVE),
            s.params.delta,
            s.params.epsilon,
            s.params.gamma,
            s.params.lipschitz,
        );
        total += 1;
        if s.gap.estimated {
            estimated += 1;
        }
        if s.value_evals + s.grad_evals > budget {
            violations += 1;
        }
    }
    if total == 0 {
        return CheckRow {
            name,
            status: CheckStatus::Skipped,
            details: "no descent runs recorded".into(),
        };
    }
    let mut details = format!("{total} runs, {violations} over budget");
    if estimated > 0 {
        details.push_str(&format!(" ({estimated} with ESTIMATED gap)"));
    }
    CheckRow {
        name,
        status: if violations == 0 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        details,
    }
}

/// Validates every run artifact under `dir`.
pub fn validate_bounds(dir: &Path) -> Result<ValidateReport, ValidateError> {
    let summaries = load_summaries(dir)?;
    let ingd: Vec<&RunSummary> = summaries
        .iter()
        .map(|(_, s)| s)
        .filter(|s| s.algorithm == Algorithm::Ingd)
        .collect();
    let cg: Vec<&RunSummary> = summaries
        .iter()
        .map(|(_, s)| s)
        .filter(|s| {
            matches!(
                s.algorithm,
                Algorithm::MinnormCgLipschitz | Algorithm::MinnormCgWeaklyConvex
            )
        })
        .collect();

    let checks = vec![
        check_inner_termination(&ingd),
        check_inner_decay(&ingd),
        check_cg_call_cap(&cg),
        check_total_evals(&ingd),
    ];
    Ok(ValidateReport {
        runs: summaries.len(),
        checks,
    })
}
