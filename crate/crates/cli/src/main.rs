//! Command-line harness: `run` executes a seeded experiment from a config
//! file, `certify` brute-force checks a point, `validate` replays bound
//! checks over recorded artifacts, and `list-functions` shows the built-in
//! test suite.
//!
//! Exit codes: 0 on success, 1 for invalid configuration or arguments,
//! 2 when individual seeds failed or a validation check did not pass.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nsopt_cli::{
    certify_stationarity, default_sample_count, experiment_from_config, parse_config,
    run_experiment, validate_bounds,
};
use nsopt_core::oracle::{make_test_function, TestFunctionSpec};

#[derive(Parser)]
#[command(
    name = "nsopt",
    about = "Find (delta, epsilon)-stationary points of nonsmooth Lipschitz functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment described by a config file.
    Run {
        /// Path to the plain-text config (see the README for the grammar).
        config: PathBuf,
    },
    /// Brute-force certify stationarity of a point under a config's
    /// function and parameters.
    Certify {
        /// Config file providing the `[function]` and `[params]` sections.
        config: PathBuf,
        /// Point to certify, comma-separated: `--point 0.1,-0.2`.
        #[arg(long)]
        point: String,
        /// Gradient samples to draw (default: 32 per dimension).
        #[arg(long)]
        samples: Option<usize>,
        /// Seed for the sampling generator.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check recorded runs against the iteration and evaluation bounds.
    Validate {
        /// Directory of run artifacts produced by `run`.
        dir: PathBuf,
    },
    /// List the built-in test functions.
    ListFunctions,
}

fn cmd_run(config: PathBuf) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(&config)
        .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
    let raw = parse_config(&text).map_err(|e| e.to_string())?;
    let cfg = experiment_from_config(&raw).map_err(|e| e.to_string())?;
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    for a in &report.artifacts {
        println!(
            "seed {:>4}: {:<24} f_final = {:<12} evals = {:<8} -> {}",
            a.seed,
            a.summary.outcome,
            a.summary.f_final,
            a.summary.value_evals + a.summary.grad_evals,
            a.csv_path.display()
        );
    }
    if report.failures.is_empty() {
        println!(
            "{} seed(s) completed, artifacts in {}",
            report.artifacts.len(),
            cfg.output_dir.display()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        for (seed, err) in &report.failures {
            eprintln!("seed {seed} failed: {err}");
        }
        Ok(ExitCode::from(2))
    }
}

fn cmd_certify(
    config: PathBuf,
    point: String,
    samples: Option<usize>,
    seed: u64,
) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(&config)
        .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
    let raw = parse_config(&text).map_err(|e| e.to_string())?;
    let cfg = experiment_from_config(&raw).map_err(|e| e.to_string())?;
    let oracle = cfg.oracle().map_err(|e| e.to_string())?;
    let x: Vec<f64> = point
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("--point: `{point}` is not a comma-separated vector"))?;
    let m = samples.unwrap_or_else(|| default_sample_count(oracle.dim()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report =
        certify_stationarity(&oracle, &x, &cfg.params, m, &mut rng).map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(dir: PathBuf) -> Result<ExitCode, String> {
    let report = validate_bounds(&dir).map_err(|e| e.to_string())?;
    print!("{}", report.render());
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_list_functions() -> ExitCode {
    let rows = [
        ("abs_sum", "dim", "sum_i |x_i|; L = sqrt(d), rho = 0"),
        ("euclid_norm", "dim", "||x||_2; L = 1, rho = 0"),
        (
            "max_affine",
            "piece (repeatable: coefficients then offset)",
            "max_i <a_i, x> + b_i; L = max ||a_i||, rho = 0",
        ),
        (
            "cheby_nonsmooth_rosenbrock",
            "dim, box_half_width (default 2)",
            "(x_1 - 1)^2/4 + sum |x_{i+1} - 2 x_i^2 + 1|; L certified on the box, rho = 4",
        ),
        (
            "shell",
            "dim, ball_radius (default 2)",
            "| ||x||^2 - 1 |; L = 2 R on the ball, rho = 2",
        ),
        ("linear", "c (coefficients)", "<c, x>; L = ||c||, rho = 0"),
    ];
    println!("{:<28} {:<44} definition", "name", "parameters");
    for (name, params, def) in rows {
        println!("{name:<28} {params:<44} {def}");
    }
    // constructing each built-in keeps the listing honest
    for spec in [
        TestFunctionSpec::AbsSum { dim: 2 },
        TestFunctionSpec::EuclidNorm { dim: 2 },
        TestFunctionSpec::Shell {
            dim: 2,
            ball_radius: 2.0,
        },
    ] {
        let _ = make_test_function(&spec).expect("built-in constructs");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Certify {
            config,
            point,
            samples,
            seed,
        } => cmd_certify(config, point, samples, seed),
        Command::Validate { dir } => cmd_validate(dir),
        Command::ListFunctions => return cmd_list_functions(),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
