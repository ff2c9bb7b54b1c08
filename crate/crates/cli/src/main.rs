use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use hmlab_cli::config::ExperimentConfig;
use hmlab_cli::experiments::run_experiment;
use hmlab_core::domain::{build_domain, DomainKind};
use hmlab_core::field::{restrict_trace, SphereField};
use hmlab_core::io::{load_field, save_field};
use hmlab_core::minimizer::minimize;
use hmlab_core::singularity::{detect_singularities, singularities_csv};
use hmlab_core::trace_norms::{gagliardo_seminorm_p, make_trace, SeminormParams, TraceFamily};

/// Numerical laboratory for sphere-valued harmonic maps.
#[derive(Parser)]
#[command(name = "hmlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a domain grid and write it as a field file with constant values.
    BuildDomain {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimize the energy for the configured trace and save the field.
    Minimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Energy history CSV of the winning run.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Detect singularities of a stored field.
    Singular {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gagliardo seminorm (p-th power) of the trace of a stored field.
    Seminorm {
        #[arg(long = "trace-from")]
        trace_from: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        p: f64,
    },
    /// Run an experiment and write its CSV reports.
    Exp {
        experiment: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> hmlab_core::Result<ExitCode> {
    match cli.command {
        Command::BuildDomain { kind, n, out } => {
            let kind = DomainKind::parse(&kind)?;
            let grid = Arc::new(build_domain(kind, n)?);
            let field = SphereField::constant(grid, [0.0, 0.0, 1.0]);
            save_field(&field, &out)?;
            println!("wrote {} ({} nodes, {} surface vertices)",
                out.display(),
                field.grid.count_inside(),
                field.grid.surface.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Minimize {
            config,
            out,
            history,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let grid = cfg.build_grid()?;
            let family = cfg
                .family
                .as_ref()
                .map(|f| f.to_family())
                .unwrap_or(TraceFamily::Identity);
            let trace = make_trace(&family, grid.clone())?;
            let solver = cfg.solver.resolve(grid.h, cfg.seed);
            let outcome = minimize(grid, &trace, &solver)?;
            save_field(&outcome.field, &out)?;
            if let Some(hist) = history {
                std::fs::write(&hist, outcome.runs[outcome.best_run].history_csv())?;
            }
            let best = &outcome.runs[outcome.best_run];
            println!(
                "run {} of {}: energy {:.6e} after {} iterations (converged: {})",
                outcome.best_run + 1,
                outcome.runs.len(),
                best.final_energy,
                best.iterations,
                best.converged
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Singular { field, out } => {
            let f = load_field(&field)?;
            let params = hmlab_core::singularity::DetectorParams::default_for(f.grid.h);
            let points = detect_singularities(&f, &params);
            std::fs::write(&out, singularities_csv(&points))?;
            println!("{} singularities -> {}", points.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Seminorm { trace_from, s, p } => {
            let f = load_field(&trace_from)?;
            let trace = restrict_trace(&f)?;
            let params = SeminormParams::new(s, p)?;
            let value = gagliardo_seminorm_p(&trace, &params)?;
            println!("{value:.17e}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Exp {
            experiment,
            config,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let requested = hmlab_cli::config::ExperimentKind::parse(&experiment)?;
            if requested != cfg.experiment {
                return Err(hmlab_core::Error::InvalidParam(format!(
                    "config is for {}, command asked for {}",
                    cfg.experiment.name(),
                    requested.name()
                )));
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = dir.display().to_string();
            }
            let (report, singularities) = run_experiment(&cfg)?;
            let dir = PathBuf::from(&cfg.out_dir);
            report.write(&dir, &singularities)?;
            for v in &report.verdicts {
                println!(
                    "{}: {} ({})",
                    v.name,
                    if v.pass { "pass" } else { "FAIL" },
                    v.detail
                );
            }
            if report.all_pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
