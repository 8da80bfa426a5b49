//! `spclab` command line: certify problem instances, evaluate one posterior
//! summary, sweep bound dominance, and run contraction-rate studies.
//!
//! Exit codes: 0 on success, 1 when a dominance sweep finds a violated
//! bound, 2 on invalid configuration or usage. Errors go to standard error
//! as `spclab: error[<code>] <message>`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use spclab_core::config::{ExperimentConfig, InstanceSpec};
use spclab_core::experiments::{
    run_dominance_sweep_scaled, run_rate_study, sweep_summary_json, write_sweep_files,
};
use spclab_core::posterior::{spc_closed, spc_monte_carlo, PosteriorSummary};
use spclab_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMINANCE_FAILURE: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;

#[derive(Parser)]
#[command(
    name = "spclab",
    about = "Posterior-contraction laboratory for Gaussian-prior inverse problems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the JSON configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Base path for output files (overrides `output_path` in the config).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the certified link constants for an instance spec.
    Certify {
        /// Path to an instance spec (or a full experiment config).
        #[arg(long)]
        config: PathBuf,
        /// Also write a plain-text matrix dump of C0, B, H.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Evaluate one posterior summary at a given (α, δ).
    Spc {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Check bias/spread/contraction bounds over the (α, δ) grid.
    BoundCheck {
        #[command(flatten)]
        common: ConfigArg,
        /// Multiply every bound by this factor before comparing; shrinking
        /// it below 1 verifies the sweep can fail.
        #[arg(long, default_value_t = 1.0)]
        bound_scale: f64,
    },
    /// Run a contraction-rate study over the δ grid.
    RateStudy {
        #[command(flatten)]
        common: ConfigArg,
    },
}

fn error_code(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) | Error::InvalidInput(_) | Error::Config(_) => "config",
        Error::Json(_) => "config",
        Error::Io(_) => "io",
        Error::OutOfRange(_) => "range",
        Error::Conditioning { .. } => "conditioning",
        Error::Numeric(_) => "numeric",
        Error::UnsupportedCase(_) => "unsupported-case",
        Error::HypothesisViolation(_) => "hypothesis",
        Error::BalanceFailure { .. } => "balance",
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("spclab: error[{}] {e}", error_code(e));
    EXIT_INVALID_CONFIG
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", path.display()))
    })
}

fn load_experiment(path: &Path, seed: Option<u64>, output: &Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_json(&read_text(path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(out) = output {
        cfg.output_path = Some(out.display().to_string());
    }
    Ok(cfg)
}

/// Instance specs are accepted bare or wrapped in a full experiment config.
fn load_instance_spec(path: &Path) -> Result<InstanceSpec, Error> {
    let text = read_text(path)?;
    if let Ok(spec) = serde_json::from_str::<InstanceSpec>(&text) {
        return Ok(spec);
    }
    let cfg: ExperimentConfig = serde_json::from_str(&text)?;
    Ok(cfg.instance)
}

fn cmd_certify(config: &Path, dump: Option<&Path>) -> Result<i32, Error> {
    let spec = load_instance_spec(config)?;
    let inst = spec.build()?;
    if let Some(path) = dump {
        let mut file = fs::File::create(path)?;
        inst.write_matrix_dump(&mut file)?;
    }
    let rel_commutator = inst.commutator_norm() / inst.h().matrix().norm();
    println!(
        "{}",
        serde_json::json!({
            "schema_version": 1,
            "dim": inst.dim(),
            "m": inst.link_m(),
            "M": inst.link_m_upper(),
            "commutator_relative": rel_commutator,
        })
    );
    Ok(EXIT_OK)
}

fn cmd_spc(common: &ConfigArg, alpha: f64, delta: f64) -> Result<i32, Error> {
    let cfg = load_experiment(&common.config, common.seed, &common.output)?;
    let inst = cfg.instance.build()?;
    let spec = cfg
        .smoothness
        .build_spec(&inst, cfg.instance.spectral_decay_a())?;
    let mut summary = spc_closed(&inst, &spec, alpha, delta)?;
    if cfg.n_mc > 0 {
        summary.mc = Some(spc_monte_carlo(
            &inst, &spec, alpha, delta, cfg.n_mc, cfg.seed,
        )?);
    }
    let text = format!("{}\n{}\n", PosteriorSummary::CSV_HEADER, summary.csv_row());
    print!("{text}");
    if let Some(base) = cfg.output_path.as_deref() {
        let path = Path::new(base).with_extension("csv");
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, text)?;
    }
    Ok(EXIT_OK)
}

fn cmd_bound_check(common: &ConfigArg, bound_scale: f64) -> Result<i32, Error> {
    let cfg = load_experiment(&common.config, common.seed, &common.output)?;
    let reports = run_dominance_sweep_scaled(&cfg, bound_scale)?;
    println!("{}", sweep_summary_json(&reports));
    if let Some(base) = cfg.output_path.as_deref() {
        write_sweep_files(&reports, Path::new(base))?;
    }
    if reports.iter().all(|r| r.dominated) {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_DOMINANCE_FAILURE)
    }
}

fn cmd_rate_study(common: &ConfigArg) -> Result<i32, Error> {
    let cfg = load_experiment(&common.config, common.seed, &common.output)?;
    let result = run_rate_study(&cfg)?;
    println!("{}", result.summary_json());
    if let Some(base) = cfg.output_path.as_deref() {
        result.write_files(Path::new(base))?;
    }
    Ok(EXIT_OK)
}

/// Run the CLI on the given argument list; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits; anything else is usage.
            let code = if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Certify { config, dump } => cmd_certify(config, dump.as_deref()),
        Command::Spc {
            common,
            alpha,
            delta,
        } => cmd_spc(common, *alpha, *delta),
        Command::BoundCheck {
            common,
            bound_scale,
        } => cmd_bound_check(common, *bound_scale),
        Command::RateStudy { common } => cmd_rate_study(common),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}
