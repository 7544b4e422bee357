use std::env;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use basin::config::PipelineConfig;
use basin::formats::ReportFile;
use basin::pipeline::{self, Route};

/// Data-driven region-of-attraction certification.
///
/// All verbs read the same JSON configuration; artifacts land in the
/// configured output directory and are stamped with the config hash.
#[derive(Parser)]
#[command(name = "basin", version, about)]
struct Cli {
    /// JSON configuration file.
    #[arg(short, long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Worker threads for the verifier (overrides BASIN_THREADS; default:
    /// all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RouteArg {
    /// PDE rows from the learned generator matrix.
    Operator,
    /// PDE rows from the extracted vector field.
    Direct,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Operator => Route::Operator,
            RouteArg::Direct => Route::Direct,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate snapshot trajectories of the configured system.
    Simulate,
    /// Learn the generator and extract the vector field from the dataset.
    Learn,
    /// Fit the Zubov/Lyapunov candidate over the solve domain.
    Solve {
        #[arg(long, value_enum, default_value_t = RouteArg::Operator)]
        route: RouteArg,
    },
    /// Certify a region of attraction; exit 0 certified, 2 refuted,
    /// 3 unknown.
    Certify {
        /// Also write the verifier box cover to cover.csv.
        #[arg(long)]
        dump_cover: bool,
    },
    /// Write V / V_P grids (contours.csv) and certified levels
    /// (levels.json).
    ExportContours {
        /// Grid resolution per axis (default: the configured value).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// All stages in order: simulate, learn, solve, certify,
    /// export-contours.
    Pipeline {
        #[arg(long, value_enum, default_value_t = RouteArg::Operator)]
        route: RouteArg,
        #[arg(long)]
        dump_cover: bool,
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let threads = flag.or_else(|| {
        env::var("BASIN_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = threads {
        if n > 0 {
            // Ignore the error when a pool already exists (tests).
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let cfg = PipelineConfig::load(&cli.config)?;
    match &cli.command {
        Command::Simulate => {
            let dataset = pipeline::run_simulate(&cfg)?;
            println!(
                "simulate: {} trajectories x {} snapshots -> {}",
                dataset.len(),
                dataset.snapshots_per_trajectory(),
                pipeline::dataset_csv_path(&cfg).display()
            );
            Ok(0)
        }
        Command::Learn => {
            let dataset = pipeline::load_dataset(&cfg)?;
            let model = pipeline::run_learn(&cfg, &dataset)?;
            let d = &model.generator.diagnostics;
            println!(
                "learn: {} observables, rank {} ({} truncated), rel residual {:.3e} -> {}",
                model.generator.dictionary.len(),
                d.rank,
                d.truncated,
                d.residual_rel,
                pipeline::model_path(&cfg).display()
            );
            Ok(0)
        }
        Command::Solve { route } => {
            let model = pipeline::load_model(&cfg)?;
            let candidate = pipeline::run_solve(&cfg, &model, (*route).into())?;
            println!(
                "solve: interior RMS {:.3e}, boundary RMS {:.3e} -> {}",
                candidate.fit_stats.interior_rms,
                candidate.fit_stats.boundary_rms,
                pipeline::candidate_path(&cfg).display()
            );
            Ok(0)
        }
        Command::Certify { dump_cover } => {
            let model = pipeline::load_model(&cfg)?;
            let candidate = pipeline::load_candidate(&cfg)?;
            let dataset = pipeline::load_dataset(&cfg)?;
            let (file, _) =
                pipeline::run_certify(&cfg, &model, &candidate, &dataset, *dump_cover)?;
            print_verdict(&file);
            Ok(file.exit_code())
        }
        Command::ExportContours { grid } => {
            let model = pipeline::load_model(&cfg)?;
            let candidate = pipeline::load_candidate(&cfg)?;
            let report = pipeline::load_report(&cfg)?;
            pipeline::run_export_contours(&cfg, &model, &candidate, &report, *grid)?;
            println!(
                "export-contours: {} -> {}",
                pipeline::contours_path(&cfg).display(),
                pipeline::levels_path(&cfg).display()
            );
            Ok(0)
        }
        Command::Pipeline {
            route,
            dump_cover,
            grid,
        } => {
            let file = pipeline::run_pipeline(&cfg, (*route).into(), *dump_cover, *grid)?;
            print_verdict(&file);
            Ok(file.exit_code())
        }
    }
}

fn print_verdict(file: &ReportFile) {
    if file.certified {
        println!(
            "certified: c = {:.6e}, c1 = {:.6e}, c2 = {:.6e} ({} boxes explored)",
            file.c, file.c1, file.c2, file.stats.boxes_explored
        );
        return;
    }
    let mut printed = false;
    for check in &file.checks {
        match check.verdict.kind.as_str() {
            "counterexample" => {
                println!(
                    "not certified: check `{}` found a counterexample at {:?} (value {:.6e})",
                    check.name,
                    check.verdict.point.as_deref().unwrap_or(&[]),
                    check.verdict.value.unwrap_or(f64::NAN)
                );
                printed = true;
            }
            "unknown" => {
                println!(
                    "not certified: check `{}` is inconclusive ({})",
                    check.name,
                    check.verdict.reason.as_deref().unwrap_or("unknown")
                );
                printed = true;
            }
            _ => {}
        }
    }
    if !printed {
        println!("not certified");
    }
}
