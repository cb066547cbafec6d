//! `mpsenc`: encode probability densities as MPS, compile them to circuits,
//! and validate the sampled output.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpsenc::circuitgen::OriginPolicy;
use mpsenc::funcspace::{DistKind, DistributionSpec};
use mpsenc::pipeline::reproduce::{cmd_reproduce, ReproduceTarget};
use mpsenc::pipeline::{cmd_circuit, cmd_encode, cmd_validate, Builder, RunConfig, KS_ALPHA};
use mpsenc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mpsenc",
    version,
    about = "MPS-based quantum encoding of probability densities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the target MPS and write its entanglement profile.
    Encode(RunArgs),
    /// Compile the target into a layered circuit and export QASM/JSON.
    Circuit(RunArgs),
    /// Sample the circuit and report KL, KS, depth and CNOT count.
    Validate(RunArgs),
    /// Regenerate a figure or table sweep and check it.
    Reproduce {
        /// fig2, fig4, fig5, fig6, table1, table2 or all.
        target: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Flags override the matching fields of `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// normal, log_normal, levy, gamma, sin_test, exp_test or constant.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    /// σ, c, θ or the exponential mean.
    #[arg(long)]
    scale: Option<f64>,
    /// Gamma shape k.
    #[arg(long)]
    shape: Option<f64>,
    /// Support length; the grid covers [0, L).
    #[arg(short = 'L', long = "support")]
    support: Option<f64>,
    #[arg(short = 'n', long = "qubits")]
    n_qubits: Option<usize>,
    /// Build the MPS by tensor cross interpolation instead of SVD.
    #[arg(long)]
    tci: bool,
    #[arg(long)]
    max_rank: Option<usize>,
    /// TCI relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    layers: Option<usize>,
    /// scan, center, or a bond index.
    #[arg(long)]
    origin: Option<String>,
    #[arg(long)]
    eps_trunc: Option<f64>,
    #[arg(long)]
    chi_sim: Option<usize>,
    #[arg(long)]
    optimizer_evals: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    ks_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<DistKind> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| Error::Config(format!("unknown distribution {s:?}")))
}

fn parse_origin(s: &str) -> Result<OriginPolicy> {
    match s {
        "scan" => Ok(OriginPolicy::Scan),
        "center" => Ok(OriginPolicy::Center),
        _ => s.parse().map(OriginPolicy::Fixed).map_err(|_| {
            Error::Config(format!(
                "origin must be scan, center or a bond index, got {s:?}"
            ))
        }),
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
            None => {
                let kind = parse_kind(
                    self.dist
                        .as_deref()
                        .ok_or_else(|| Error::Config("--dist or --config is required".into()))?,
                )?;
                let n = self
                    .n_qubits
                    .ok_or_else(|| Error::Config("--qubits is required".into()))?;
                let scale = self
                    .scale
                    .ok_or_else(|| Error::Config("--scale is required".into()))?;
                let l = self
                    .support
                    .ok_or_else(|| Error::Config("--support is required".into()))?;
                RunConfig::new(DistributionSpec::new(kind, 0.0, scale, 1.0, l), n)
            }
        };
        let d = &mut cfg.distribution;
        if let Some(k) = &self.dist {
            d.kind = parse_kind(k)?;
        }
        if let Some(v) = self.mu {
            d.mu = v;
        }
        if let Some(v) = self.scale {
            d.scale = v;
        }
        if let Some(v) = self.shape {
            d.shape = v;
        }
        if let Some(v) = self.support {
            d.support_length = v;
        }
        if let Some(v) = self.n_qubits {
            cfg.n_qubits = v;
        }
        if self.tci {
            cfg.builder = Builder::Tci;
        }
        if let Some(v) = self.max_rank {
            cfg.tci.max_rank = v;
        }
        if let Some(v) = self.tol {
            cfg.tci.rel_tol = v;
        }
        if let Some(v) = self.layers {
            cfg.n_layers = v;
        }
        if let Some(o) = &self.origin {
            cfg.origin = parse_origin(o)?;
        }
        if let Some(v) = self.eps_trunc {
            cfg.eps_trunc = v;
        }
        if let Some(v) = self.chi_sim {
            cfg.chi_sim = v;
        }
        if let Some(v) = self.optimizer_evals {
            cfg.optimizer_evals = v;
        }
        if let Some(v) = self.shots {
            cfg.shots = v;
        }
        if let Some(v) = self.ks_samples {
            cfg.ks_samples = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
            cfg.tci.rng_seed = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Writes a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(v)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Encode(a) => {
            print_json(&cmd_encode(&a.resolve()?)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Circuit(a) => {
            print_json(&cmd_circuit(&a.resolve()?)?.1)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(a) => {
            let report = cmd_validate(&a.resolve()?)?;
            print_json(&report)?;
            Ok(if report.passes(KS_ALPHA) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Reproduce { target, out } => {
            let targets = if target == "all" {
                ReproduceTarget::ALL.to_vec()
            } else {
                vec![target.parse()?]
            };
            let mut ok = true;
            for t in targets {
                let report = cmd_reproduce(t, Some(&out))?;
                for c in &report.checks {
                    emit(&format!(
                        "{} {t} {}: {}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.detail
                    ))?;
                }
                ok &= report.passed();
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
