mod config;

use clap::{Parser, Subcommand};
use config::{parse_dyadic_range, parse_int_range, ConfigError, RunConfig};
use kdv_flex::io::{self, IoError};
use kdv_flex::lp::LpFilter;
use kdv_flex::norms::{lp_norm, NormError};
use kdv_flex::scheme::{iterate_each, IterationState, SchemeError};
use kdv_flex::slabs::SlabProfile;
use kdv_flex::verify::lemmas::{lemma_suite, LemmaError};
use kdv_flex::verify::scaling::{scaling_suite, ScalingError, ScalingInputs};
use kdv_flex::verify::weak::weak_residual;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_EXHAUSTED: u8 = 4;

#[derive(Parser)]
#[command(name = "kdv-flex", version, about = "Convex-integration iterates for stationary KdV on the torus")]
struct Cli {
    /// Flat TOML file with RunConfig keys; KDVFLEX_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the iteration, checkpointing and certifying every stage.
    Iterate {
        #[arg(long)]
        q_max: Option<usize>,
        /// Base amplitude A in u_0 = A sin(2πx).
        #[arg(long = "A")]
        amplitude: Option<f64>,
        #[arg(long)]
        lambda_max: Option<u64>,
    },
    /// Randomized lemma suite.
    Lemmas {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Log-log sweeps of slab norms and error parts.
    Scaling {
        /// `a..b` (powers of two from a to b) or a comma list.
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Weak-form residuals of a saved checkpoint.
    Residual {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `a..b` or a comma list of test frequencies.
        #[arg(long)]
        test_freqs: Option<String>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Lemma(#[from] LemmaError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Scheme(SchemeError::InvalidParams(_))
            | CliError::Scaling(ScalingError::InsufficientGrid(_))
            | CliError::Io(IoError::MissingCheckpoint(_)) => EXIT_CONFIG,
            CliError::Scheme(SchemeError::Exhausted { .. }) => EXIT_EXHAUSTED,
            _ => 1,
        }
    }
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    AllPass,
    Failed(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::AllPass) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(what)) => {
            eprintln!("check failed: {what}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            let code = e.exit_code();
            match &e {
                CliError::Scheme(SchemeError::Exhausted { .. }) => eprintln!("exhausted: {e}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match cli.cmd {
        Cmd::Iterate { q_max, amplitude, lambda_max } => {
            cfg.q_max = q_max.unwrap_or(cfg.q_max);
            cfg.amplitude = amplitude.unwrap_or(cfg.amplitude);
            cfg.lambda_max = lambda_max.unwrap_or(cfg.lambda_max);
            cmd_iterate(&cfg)
        }
        Cmd::Lemmas { seed } => {
            cfg.seed = seed.unwrap_or(cfg.seed);
            cmd_lemmas(&cfg)
        }
        Cmd::Scaling { lambda, epsilon } => {
            if let Some(l) = lambda {
                cfg.lambdas = parse_dyadic_range(&l)?;
            }
            cfg.epsilon = epsilon.unwrap_or(cfg.epsilon);
            cmd_scaling(&cfg)
        }
        Cmd::Residual { checkpoint, test_freqs } => {
            if let Some(t) = test_freqs {
                cfg.test_freqs = parse_int_range(&t)?;
            }
            cmd_residual(&cfg, &checkpoint)
        }
    }
}

const SUMMARY_HEADER: [&str; 7] = ["q", "lambda", "epsilon", "sigma", "e_hs", "w_l2", "w_l1"];

fn summary_row(state: &IterationState) -> Result<Vec<f64>, CliError> {
    let (w_l2, w_l1) = match &state.stage {
        Some(st) => (st.w_l2, st.w_l1),
        None => (state.u.coeff_l2_sq().sqrt(), lp_norm(&state.u, 1.0)?),
    };
    Ok(vec![state.q as f64, state.lambda as f64, state.epsilon, state.sigma as f64, state.e_norm, w_l2, w_l1])
}

fn cmd_iterate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let mut rows = Vec::new();
    let mut first_failure = None;
    iterate_each(&params, cfg.q_max, |state| -> Result<(), CliError> {
        let cert = state.certificates.last().expect("certified state");
        io::save_checkpoint(&cfg.out, state)?;
        io::write_json(&cfg.out.join(format!("certificate_q{}.json", state.q)), cert)?;
        rows.push(summary_row(state)?);
        io::write_table(&cfg.out.join("summary.csv"), &SUMMARY_HEADER, &rows)?;
        let status = match cert.first_failure() {
            None => "PASS".to_string(),
            Some(f) => {
                first_failure.get_or_insert_with(|| format!("q = {}: {f}", state.q));
                format!("FAIL ({f})")
            }
        };
        println!(
            "q={} lambda={} epsilon={:.6} sigma={} E_hs={:.6e} {status}",
            state.q, state.lambda, state.epsilon, state.sigma, state.e_norm
        );
        Ok(())
    })?;
    Ok(first_failure.map_or(Outcome::AllPass, Outcome::Failed))
}

fn cmd_lemmas(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let reports = lemma_suite(cfg.seed)?;
    io::write_json(&cfg.out.join(format!("lemmas_seed{}.json", cfg.seed)), &reports)?;
    for r in &reports {
        println!(
            "{:<28} {:>12.6e} {:?} {:<10.3e} {}",
            r.id,
            r.statistic,
            r.relation,
            r.threshold,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    Ok(if failed.is_empty() { Outcome::AllPass } else { Outcome::Failed(failed.join(", ")) })
}

fn cmd_scaling(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let (filter, profile) = (LpFilter::build(), SlabProfile::default());
    let inp = ScalingInputs {
        filter: &filter,
        profile: &profile,
        params: &params,
        lambdas: &cfg.lambdas,
        epsilon: cfg.epsilon,
    };
    let reports = scaling_suite(&inp)?;
    for r in &reports {
        let rows: Vec<Vec<f64>> = r.rows().iter().map(|row| row.to_vec()).collect();
        io::write_table(
            &cfg.out.join(format!("scaling_{}.csv", r.id)),
            &["lambda", "value", "log2_lambda", "log2_value"],
            &rows,
        )?;
        let fit = match (r.fitted_slope, r.predicted_slope) {
            (Some(f), Some(p)) => format!("slope {f:.4} vs {p:.4} ± {}", r.tolerance),
            _ => format!("{:?}", r.kind),
        };
        println!("{:<14} {fit:<32} {}", r.id, if r.pass { "PASS" } else { "FAIL" });
    }
    io::write_json(&cfg.out.join("scaling.json"), &reports)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    Ok(if failed.is_empty() { Outcome::AllPass } else { Outcome::Failed(failed.join(", ")) })
}

fn cmd_residual(cfg: &RunConfig, checkpoint: &Path) -> Result<Outcome, CliError> {
    let state = io::load_checkpoint(checkpoint)?;
    let res = weak_residual(&state.u, &state.e, cfg.s as f64, &cfg.test_freqs);
    io::write_json(&cfg.out.join(format!("residual_q{}.json", state.q)), &res)?;
    let mut failed = Vec::new();
    for r in &res {
        let ok = r.passes(cfg.weak_tol);
        println!("k={:<4} diff={:.3e} scale={:.3e} {}", r.k, r.diff, r.scale, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(format!("k = {}", r.k));
        }
    }
    Ok(if failed.is_empty() { Outcome::AllPass } else { Outcome::Failed(failed.join(", ")) })
}
