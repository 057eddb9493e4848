use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsde::config::RunSpec;
use gsde::dataset_io::save_csv;
use gsde::experiment::{load_data, numeric_failure, run_seeds, write_outputs};
use gsde::generate::{generate, DataKind, GenSpec};
use gsde::metrics::read_metrics;
use gsde::plotdata::{tidy_from_metrics, tidy_from_sweep, write_tidy};
use gsde::sweep::{run_sweep, write_sweep, SweepAxis};
use gsde::{GsdeError, Result};
use gsde_core::data::Shift;

/// Gradual source domain expansion experiments on synthetic data.
#[derive(Parser)]
#[command(name = "gsde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write source.csv and target.csv for a synthetic shift benchmark.
    Gen {
        #[arg(long, value_enum)]
        kind: DataKind,
        /// Samples per domain.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Moon noise or blob standard deviation.
        #[arg(long, default_value_t = 0.15)]
        noise: f64,
        /// Number of blob classes.
        #[arg(long, default_value_t = 3)]
        classes: usize,
        /// Target rotation in degrees.
        #[arg(long, default_value_t = 0.0)]
        shift_rot: f64,
        /// Target translation, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0])]
        shift_translate: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        shift_scale: f64,
        /// Extra Gaussian noise added to the target.
        #[arg(long, default_value_t = 0.0)]
        shift_noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment for every configured seed.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override, repeatable.
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// Output directory; existing files are never overwritten.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one ablation axis and write mean and standard deviation per point.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reshape metrics (and optionally a max-runs sweep) into long format.
    Plotdata {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create_new(path: &Path) -> Result<File> {
    OpenOptions::new().write(true).create_new(true).open(path).map_err(|e| GsdeError::io(path, e))
}

fn resolve_spec(config: Option<&Path>, overrides: &[String]) -> Result<RunSpec> {
    let mut spec = match config {
        Some(p) => RunSpec::load(p)?,
        None => RunSpec::default(),
    };
    for o in overrides {
        spec.apply_override(o)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen { kind, n, noise, classes, shift_rot, shift_translate, shift_scale, shift_noise, seed, out } => {
            let shift = Shift { rotation_deg: shift_rot, translation: shift_translate, scale: shift_scale, noise_sd: shift_noise };
            let (source, target) = generate(&GenSpec { kind, n, noise, classes, shift, seed })?;
            fs::create_dir_all(&out).map_err(|e| GsdeError::io(&out, e))?;
            save_csv(&source, &out.join("source.csv"))?;
            save_csv(&target, &out.join("target.csv"))?;
        }
        Command::Run { config, overrides, out } => {
            let spec = resolve_spec(config.as_deref(), &overrides)?;
            let (source, target) = load_data(&spec.data)?;
            let outcomes = run_seeds(&spec.experiment, &spec.seeds, &source, &target)?;
            let files = write_outputs(&out, &spec, &outcomes)?;
            for o in &outcomes {
                for r in &o.experiment.records {
                    eprintln!("seed {}: {r}", o.seed);
                }
            }
            if let Some(f) = numeric_failure(&outcomes) {
                return Err(GsdeError::Numeric(f));
            }
            eprintln!("wrote {}", files.summary.display());
        }
        Command::Sweep { axis, config, overrides, out } => {
            let spec = resolve_spec(config.as_deref(), &overrides)?;
            let (source, target) = load_data(&spec.data)?;
            let file = create_new(&out)?;
            let rows = run_sweep(axis, &spec.experiment, &spec.seeds, &source, &target)?;
            write_sweep(axis, &rows, file)?;
        }
        Command::Plotdata { metrics, sweep, out } => {
            let f = File::open(&metrics).map_err(|e| GsdeError::io(&metrics, e))?;
            let mut rows = tidy_from_metrics(&read_metrics(f, &metrics)?);
            if let Some(s) = sweep {
                let f = File::open(&s).map_err(|e| GsdeError::io(&s, e))?;
                rows.extend(tidy_from_sweep(f, &s)?);
            }
            write_tidy(&rows, create_new(&out)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
