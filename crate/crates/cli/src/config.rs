//! Plain-text experiment configuration.
//!
//! The format is line-based key/value pairs grouped into `[section]`
//! headers; `#` starts a comment and keys may repeat (used for the affine
//! pieces of `max_affine`). See the repository README for the full grammar.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use nsopt_core::goldstein::GoldsteinParams;
use nsopt_core::oracle::{make_test_function, AffinePiece, FunctionOracle, TestFunctionSpec};

/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "NSOPT_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    MalformedLine { line: usize, text: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("[{section}] is missing key `{key}`")]
    MissingKey {
        section: &'static str,
        key: &'static str,
    },
    #[error("[{section}] {key}: {reason}")]
    InvalidValue {
        section: &'static str,
        key: String,
        reason: String,
    },
    #[error("unknown test function `{0}` (see `list-functions`)")]
    UnknownFunction(String),
    #[error("unknown algorithm `{0}` (expected ingd, minnorm_cg_lipschitz, or minnorm_cg_weakly_convex)")]
    UnknownAlgorithm(String),
}

/// Raw sectioned key/value pairs, preserving order and repeats.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: Vec<(String, String, String)>, // (section, key, value)
}

impl RawConfig {
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(s, k, _)| s == section && k == key)
            .map(|(_, _, v)| v.as_str())
    }

    pub fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(s, k, _)| s == section && k == key)
            .map(|(_, _, v)| v.as_str())
            .collect()
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.entries.iter().any(|(s, _, _)| s == section)
    }
}

pub fn parse_config(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut section = String::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ConfigError::MalformedLine {
                line: line_no,
                text: line.to_string(),
            })?;
            section = name.trim().to_string();
            // a bare section header is enough to make the section exist
            raw.entries
                .push((section.clone(), String::new(), String::new()));
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::MalformedLine {
            line: line_no,
            text: line.to_string(),
        })?;
        raw.entries.push((
            section.clone(),
            key.trim().to_string(),
            value.trim().to_string(),
        ));
    }
    Ok(raw)
}

fn parse_f64(section: &'static str, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::InvalidValue {
        section,
        key: key.to_string(),
        reason: format!("`{value}` is not a number"),
    })
}

fn parse_usize(section: &'static str, key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse::<usize>()
        .map_err(|_| ConfigError::InvalidValue {
            section,
            key: key.to_string(),
            reason: format!("`{value}` is not a nonnegative integer"),
        })
}

fn parse_vector(section: &'static str, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let items: Result<Vec<f64>, _> = value
        .split_whitespace()
        .map(|tok| tok.parse::<f64>())
        .collect();
    let v = items.map_err(|_| ConfigError::InvalidValue {
        section,
        key: key.to_string(),
        reason: format!("`{value}` is not a space-separated list of numbers"),
    })?;
    if v.is_empty() {
        return Err(ConfigError::InvalidValue {
            section,
            key: key.to_string(),
            reason: "empty vector".into(),
        });
    }
    Ok(v)
}

/// Builds the test-function spec from the `[function]` section.
pub fn function_spec_from_config(raw: &RawConfig) -> Result<TestFunctionSpec, ConfigError> {
    if !raw.has_section("function") {
        return Err(ConfigError::MissingSection("function"));
    }
    let name = raw.get("function", "name").ok_or(ConfigError::MissingKey {
        section: "function",
        key: "name",
    })?;
    let dim = || -> Result<usize, ConfigError> {
        let v = raw.get("function", "dim").ok_or(ConfigError::MissingKey {
            section: "function",
            key: "dim",
        })?;
        parse_usize("function", "dim", v)
    };
    match name {
        "abs_sum" => Ok(TestFunctionSpec::AbsSum { dim: dim()? }),
        "euclid_norm" => Ok(TestFunctionSpec::EuclidNorm { dim: dim()? }),
        "max_affine" => {
            let mut pieces = Vec::new();
            for value in raw.get_all("function", "piece") {
                let nums = parse_vector("function", "piece", value)?;
                if nums.len() < 2 {
                    return Err(ConfigError::InvalidValue {
                        section: "function",
                        key: "piece".into(),
                        reason: "needs at least one coefficient and an offset".into(),
                    });
                }
                let (a, b) = nums.split_at(nums.len() - 1);
                pieces.push(AffinePiece {
                    a: a.to_vec(),
                    b: b[0],
                });
            }
            if pieces.is_empty() {
                return Err(ConfigError::MissingKey {
                    section: "function",
                    key: "piece",
                });
            }
            Ok(TestFunctionSpec::MaxAffine { pieces })
        }
        "cheby_nonsmooth_rosenbrock" => {
            let width = raw
                .get("function", "box_half_width")
                .map(|v| parse_f64("function", "box_half_width", v))
                .transpose()?
                .unwrap_or(2.0);
            Ok(TestFunctionSpec::ChebyNonsmoothRosenbrock {
                dim: dim()?,
                box_half_width: width,
            })
        }
        "shell" => {
            let radius = raw
                .get("function", "ball_radius")
                .map(|v| parse_f64("function", "ball_radius", v))
                .transpose()?
                .unwrap_or(2.0);
            Ok(TestFunctionSpec::Shell {
                dim: dim()?,
                ball_radius: radius,
            })
        }
        "linear" => {
            let c = raw.get("function", "c").ok_or(ConfigError::MissingKey {
                section: "function",
                key: "c",
            })?;
            Ok(TestFunctionSpec::Linear {
                c: parse_vector("function", "c", c)?,
            })
        }
        other => Err(ConfigError::UnknownFunction(other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ingd,
    MinnormCgLipschitz,
    MinnormCgWeaklyConvex,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Ingd => "ingd",
            Algorithm::MinnormCgLipschitz => "minnorm_cg_lipschitz",
            Algorithm::MinnormCgWeaklyConvex => "minnorm_cg_weakly_convex",
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        match text {
            "ingd" => Ok(Algorithm::Ingd),
            "minnorm_cg_lipschitz" => Ok(Algorithm::MinnormCgLipschitz),
            "minnorm_cg_weakly_convex" => Ok(Algorithm::MinnormCgWeaklyConvex),
            other => Err(ConfigError::UnknownAlgorithm(other.to_string())),
        }
    }
}

/// Fully resolved experiment: oracle constants merged with overrides,
/// seeds expanded, output paths fixed.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: TestFunctionSpec,
    pub algorithm: Algorithm,
    pub params: GoldsteinParams,
    pub x0: Vec<f64>,
    /// Outer iteration budget; `None` derives it from the function gap.
    pub outer_budget: Option<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// File prefix for per-seed artifacts.
    pub label: String,
}

impl ExperimentConfig {
    pub fn oracle(&self) -> Result<FunctionOracle, ConfigError> {
        make_test_function(&self.spec).map_err(|e| ConfigError::InvalidValue {
            section: "function",
            key: "name".into(),
            reason: e.to_string(),
        })
    }
}

fn parse_seeds(value: &str) -> Result<Vec<u64>, ConfigError> {
    let invalid = |reason: String| ConfigError::InvalidValue {
        section: "run",
        key: "seeds".into(),
        reason,
    };
    let mut seeds = Vec::new();
    for tok in value.split_whitespace() {
        if let Some((lo, hi)) = tok.split_once("..") {
            let lo: u64 = lo
                .parse()
                .map_err(|_| invalid(format!("bad range start `{lo}`")))?;
            let hi: u64 = hi
                .parse()
                .map_err(|_| invalid(format!("bad range end `{hi}`")))?;
            if hi <= lo {
                return Err(invalid(format!("empty range `{tok}`")));
            }
            seeds.extend(lo..hi);
        } else {
            seeds.push(
                tok.parse()
                    .map_err(|_| invalid(format!("bad seed `{tok}`")))?,
            );
        }
    }
    if seeds.is_empty() {
        return Err(invalid("at least one seed is required".into()));
    }
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(invalid("duplicate seeds".into()));
    }
    Ok(seeds)
}

/// Resolves a raw config into a validated experiment.
pub fn experiment_from_config(raw: &RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let spec = function_spec_from_config(raw)?;
    let oracle = make_test_function(&spec).map_err(|e| ConfigError::InvalidValue {
        section: "function",
        key: "name".into(),
        reason: e.to_string(),
    })?;

    if !raw.has_section("params") {
        return Err(ConfigError::MissingSection("params"));
    }
    let need = |key: &'static str| -> Result<f64, ConfigError> {
        let v = raw.get("params", key).ok_or(ConfigError::MissingKey {
            section: "params",
            key,
        })?;
        parse_f64("params", key, v)
    };
    let delta = need("delta")?;
    let epsilon = need("epsilon")?;
    let gamma = need("gamma")?;
    let lipschitz = match raw.get("params", "lipschitz") {
        Some(v) => parse_f64("params", "lipschitz", v)?,
        None => oracle.lipschitz(),
    };
    let rho = match raw.get("params", "rho") {
        Some(v) => Some(parse_f64("params", "rho", v)?),
        None => oracle.rho(),
    };
    let mut params = GoldsteinParams::new(delta, epsilon, gamma, lipschitz).map_err(|e| {
        ConfigError::InvalidValue {
            section: "params",
            key: "delta/epsilon/gamma/lipschitz".into(),
            reason: e.to_string(),
        }
    })?;
    if let Some(rho) = rho {
        params = params.with_rho(rho);
    }
    params.validate().map_err(|e| ConfigError::InvalidValue {
        section: "params",
        key: "rho".into(),
        reason: e.to_string(),
    })?;

    if !raw.has_section("run") {
        return Err(ConfigError::MissingSection("run"));
    }
    let algorithm =
        Algorithm::parse(raw.get("run", "algorithm").ok_or(ConfigError::MissingKey {
            section: "run",
            key: "algorithm",
        })?)?;
    let x0 = parse_vector(
        "run",
        "x0",
        raw.get("run", "x0").ok_or(ConfigError::MissingKey {
            section: "run",
            key: "x0",
        })?,
    )?;
    if x0.len() != oracle.dim() {
        return Err(ConfigError::InvalidValue {
            section: "run",
            key: "x0".into(),
            reason: format!(
                "dimension {} does not match the function dimension {}",
                x0.len(),
                oracle.dim()
            ),
        });
    }
    let seeds = parse_seeds(raw.get("run", "seeds").ok_or(ConfigError::MissingKey {
        section: "run",
        key: "seeds",
    })?)?;
    let outer_budget = raw
        .get("run", "T")
        .map(|v| parse_usize("run", "T", v))
        .transpose()?;
    if let Some(t) = outer_budget {
        if t == 0 {
            return Err(ConfigError::InvalidValue {
                section: "run",
                key: "T".into(),
                reason: "must be at least 1".into(),
            });
        }
    }
    if outer_budget.is_none() && oracle.known_minimum().is_none() {
        return Err(ConfigError::InvalidValue {
            section: "run",
            key: "T".into(),
            reason: format!(
                "required: `{}` has no known minimum to derive an outer budget from",
                oracle.name()
            ),
        });
    }
    let output_dir = raw
        .get("run", "output_dir")
        .map(PathBuf::from)
        .or_else(|| std::env::var(OUTPUT_DIR_ENV).ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nsopt-out"));
    let label = raw
        .get("run", "label")
        .map(str::to_string)
        .unwrap_or_else(|| format!("{}_{}", oracle.name(), algorithm.as_str()));

    Ok(ExperimentConfig {
        spec,
        algorithm,
        params,
        x0,
        outer_budget,
        seeds,
        output_dir,
        label,
    })
}
