use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use simlearn::experiment::{
    emit_outputs, format_float, write_ilc_csv, write_similarity_csv, DemoExample, Experiment,
    ExperimentResults,
};
use simlearn::sweep::{run_sweep, SweepConfig};
use simlearn::{load_scenario, Error, Scenario};

#[derive(Parser)]
#[command(
    name = "simlearn",
    version,
    about = "Similarity analysis and experience transfer between LTV systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Similarity verdict and indexes for every host/guest pair in the tasks.
    Similarity(RunArgs),
    /// Gradient ILC on each task's guest system.
    Ilc(RunArgs),
    /// Guest ILC followed by transfer to the host, with all reports.
    Transfer(RunArgs),
    /// Full pipeline with a printed summary; defaults to built-in example 1.
    Demo(RunArgs),
    /// Randomized property sweep over small systems.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "example")]
    scenario: Option<PathBuf>,
    /// Built-in example scenario.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: Option<u8>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory; defaults to the scenario's `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override every tolerance (membership, similarity, experience).
    #[arg(long)]
    tol: Option<f64>,
    /// ILC learning gain.
    #[arg(long)]
    gamma: Option<f64>,
    /// ILC iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Transfer even when a pair has no common trajectory.
    #[arg(long)]
    allow_dissimilar: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write `sweep.csv` here as well.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    systems: usize,
    #[arg(long, default_value_t = 200)]
    pairs: usize,
}

impl RunArgs {
    fn scenario(&self, fallback: Option<DemoExample>) -> simlearn::Result<Scenario> {
        let mut scenario = match (&self.source.scenario, self.source.example, fallback) {
            (Some(path), _, _) => load_scenario(path)?,
            (None, Some(id), _) => DemoExample::from_id(id)?.scenario()?,
            (None, None, Some(example)) => example.scenario()?,
            (None, None, None) => {
                return Err(Error::InvalidParameter(
                    "one of --scenario or --example is required".into(),
                ))
            }
        };
        if let Some(tol) = self.tol {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "--tol must be finite and non-negative, got {tol}"
                )));
            }
            scenario.tolerances.membership = tol;
            scenario.tolerances.similarity = tol;
            scenario.tolerances.experience = tol;
        }
        if self.gamma.is_some() {
            scenario.ilc.gamma = self.gamma;
        }
        if let Some(n) = self.max_iters {
            scenario.ilc.max_iters = n;
        }
        scenario.allow_dissimilar |= self.allow_dissimilar;
        Ok(scenario)
    }

    fn out_dir(&self, scenario: &Scenario) -> PathBuf {
        self.out
            .clone()
            .or_else(|| scenario.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn create_dir(dir: &Path) -> simlearn::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn similarity(args: &RunArgs) -> simlearn::Result<()> {
    let scenario = args.scenario(None)?;
    let pairs = Experiment::new(&scenario)?.similarity()?;
    let dir = args.out_dir(&scenario);
    create_dir(&dir)?;
    write_similarity_csv(&pairs, &dir.join("similarity.csv"))?;
    for p in &pairs {
        println!(
            "{} -> {}: {} (residual {}, mean index {})",
            p.guest,
            p.host,
            if p.report.similar {
                "similar"
            } else {
                "not similar"
            },
            format_float(p.report.feasibility_residual),
            format_float(p.report.mean_index())
        );
    }
    Ok(())
}

fn ilc(args: &RunArgs) -> simlearn::Result<()> {
    let scenario = args.scenario(None)?;
    let runs = Experiment::new(&scenario)?.learn(&scenario.ilc)?;
    let dir = args.out_dir(&scenario);
    create_dir(&dir)?;
    for r in &runs {
        write_ilc_csv(&r.run, &dir.join(format!("ilc_{}.csv", r.task.name)))?;
        println!(
            "{}: {} iterations, converged {}, final error {}, rms {}",
            r.task.name,
            r.run.iterations,
            r.run.converged,
            format_float(r.run.final_error()),
            format_float(r.run.final_rms())
        );
    }
    Ok(())
}

fn full_run(args: &RunArgs, fallback: Option<DemoExample>) -> simlearn::Result<ExperimentResults> {
    let scenario = args.scenario(fallback)?;
    let results = Experiment::new(&scenario)?.run(&scenario.ilc)?;
    let dir = args.out_dir(&scenario);
    for path in emit_outputs(&results, &dir)? {
        info!("wrote {}", path.display());
    }
    Ok(results)
}

fn transfer(args: &RunArgs) -> simlearn::Result<()> {
    let results = full_run(args, None)?;
    for t in &results.tasks {
        println!(
            "{}: distance {}, host residual {}",
            t.task.name,
            format_float(t.transfer.distance),
            format_float(t.transfer.host_residual)
        );
    }
    Ok(())
}

fn demo(args: &RunArgs) -> simlearn::Result<()> {
    let results = full_run(args, Some(DemoExample::MultipleTasks))?;
    for p in &results.pairs {
        println!(
            "pair {} -> {}: {}, mean similarity index {}",
            p.guest,
            p.host,
            if p.report.similar {
                "similar"
            } else {
                "not similar"
            },
            format_float(p.report.mean_index())
        );
    }
    for t in &results.tasks {
        println!(
            "task {}: ILC rms {} after {} iterations, transfer distance {}",
            t.task.name,
            format_float(t.ilc.final_rms()),
            t.ilc.iterations,
            format_float(t.transfer.distance)
        );
    }
    Ok(())
}

/// Returns whether every check passed.
fn sweep(args: &SweepArgs) -> simlearn::Result<bool> {
    let config = SweepConfig {
        seed: args.seed,
        systems: args.systems,
        pairs: args.pairs,
        ..SweepConfig::default()
    };
    let summary = run_sweep(&config)?;
    for c in &summary.checks {
        println!(
            "[{}] {}: worst {:e} (threshold {:e})",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.threshold
        );
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let path = dir.join("sweep.csv");
        let csv_err = |source| Error::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["check", "worst", "threshold", "passed"])
            .map_err(csv_err)?;
        for c in &summary.checks {
            w.write_record([
                c.name.to_string(),
                format_float(c.worst),
                format_float(c.threshold),
                c.passed().to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(summary.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Similarity(a) => similarity(a).map(|_| true),
        Command::Ilc(a) => ilc(a).map(|_| true),
        Command::Transfer(a) => transfer(a).map(|_| true),
        Command::Demo(a) => demo(a).map(|_| true),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: sweep found property violations");
            ExitCode::from(simlearn::ErrorCategory::Numerical.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code())
        }
    }
}
