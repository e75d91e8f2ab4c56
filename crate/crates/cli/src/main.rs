use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfsim::experiments::{self, Experiment, Options};
use cfsim::metrics::mse;
use cfsim::scenario::Scenario;
use cfsim::sensing::battery::fit_discharge_polynomial;
use cfsim::trajectory::{export_plot_columns, fixed6, Trajectory};
use cfsim::world::World;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "cfsim", version, about = "Deterministic multi-drone simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write one CSV per drone.
    Run {
        scenario: PathBuf,
        /// Override the scenario duration, in ticks.
        #[arg(long)]
        ticks: Option<u64>,
        /// Output directory for the CSV files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one of the built-in validation flights.
    Experiment {
        #[arg(value_parser = experiment_names())]
        name: String,
        /// Commanded speed in m/s (repeatable). Yaw steps turn at 180 deg/s per m/s.
        #[arg(long = "speed")]
        speeds: Vec<f64>,
        /// Initial battery charge fraction (repeatable).
        #[arg(long = "initial-charge")]
        charges: Vec<f64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Write the scenario of the single selected variant to this path
        /// instead of running it.
        #[arg(long)]
        emit_scenario: Option<PathBuf>,
        /// Shorten the hold after each position or yaw leg to 1 s.
        #[arg(long)]
        truncate_settle: bool,
        /// Worker threads for running variants (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Compare two trajectory CSVs.
    Metrics {
        #[arg(value_enum)]
        metric: Metric,
        a: PathBuf,
        b: PathBuf,
        /// Column to compare. `position` sums the MSE of x, y and z.
        #[arg(long)]
        column: String,
    },
    /// Least-squares cubic fit of a discharge curve from `time_s,charge` samples.
    FitBattery {
        samples: PathBuf,
        /// Maximum flight time; defaults to the last sample time.
        #[arg(long)]
        tmax: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Mse,
}

fn experiment_names() -> clap::builder::PossibleValuesParser {
    clap::builder::PossibleValuesParser::new(Experiment::ALL.map(Experiment::name))
}

enum Failure {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Runtime(m) => m,
        }
    }
}

fn input(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{context}: {err}"))
}

fn runtime(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{context}: {err}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            ticks,
            out,
        } => cmd_run(&scenario, ticks, &out),
        Command::Experiment {
            name,
            speeds,
            charges,
            out_dir,
            emit_scenario,
            truncate_settle,
            jobs,
        } => {
            let options = Options {
                speeds: (!speeds.is_empty()).then_some(speeds),
                initial_charges: (!charges.is_empty()).then_some(charges),
                truncate_settle,
            };
            cmd_experiment(&name, &options, &out_dir, emit_scenario.as_deref(), jobs)
        }
        Command::Metrics {
            metric: Metric::Mse,
            a,
            b,
            column,
        } => cmd_mse(&a, &b, &column),
        Command::FitBattery { samples, tmax } => cmd_fit_battery(&samples, tmax),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn write_trajectory(dir: &Path, name: &str, trajectory: &Trajectory) -> Result<(), Failure> {
    let path = dir.join(format!("{name}.csv"));
    let file = File::create(&path).map_err(|e| runtime(path.display(), e))?;
    trajectory
        .write_csv(BufWriter::new(file))
        .map_err(|e| runtime(path.display(), e))
}

fn cmd_run(path: &Path, ticks: Option<u64>, out: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| input(path.display(), e))?;
    let scenario = Scenario::load(&text).map_err(|e| input(path.display(), e))?;
    let mut world = World::new(&scenario).map_err(|e| input(path.display(), e))?;
    let trajectories = world.run(ticks.unwrap_or(scenario.ticks()));
    fs::create_dir_all(out).map_err(|e| runtime(out.display(), e))?;
    for t in &trajectories {
        write_trajectory(out, t.drone.as_str(), t)?;
        let summary = t.summarize(None);
        let last = t
            .rows
            .last()
            .expect("a run records at least the initial row");
        println!(
            "drone={} ticks={} final_x={} final_y={} final_z={} final_yaw={} peak_speed={} peak_yaw_rate={} final_charge={} time_to_empty={}",
            t.drone,
            last.tick,
            fixed6(last.position.x),
            fixed6(last.position.y),
            fixed6(last.position.z),
            fixed6(last.yaw),
            fixed6(summary.peak_speed),
            fixed6(summary.peak_yaw_rate),
            fixed6(last.charge),
            summary.time_to_empty.map_or_else(|| "none".to_string(), fixed6),
        );
    }
    Ok(())
}

fn cmd_experiment(
    name: &str,
    options: &Options,
    out_dir: &Path,
    emit: Option<&Path>,
    jobs: usize,
) -> Result<(), Failure> {
    let experiment = Experiment::parse(name).ok_or_else(|| {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        Failure::Usage(format!(
            "unknown experiment `{name}`; expected one of: {}",
            names.join(", ")
        ))
    })?;
    let variants =
        experiments::variants(experiment, options).map_err(|e| Failure::Usage(e.to_string()))?;

    if let Some(path) = emit {
        let [variant] = variants.as_slice() else {
            return Err(Failure::Usage(format!(
                "--emit-scenario needs exactly one variant, `{name}` has {}; pick one with --speed or --initial-charge",
                variants.len()
            )));
        };
        let text = variant
            .scenario
            .render()
            .map_err(|e| runtime("render", e))?;
        return fs::write(path, text).map_err(|e| runtime(path.display(), e));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| runtime("thread pool", e))?;
    let outcomes = pool.install(|| {
        variants
            .par_iter()
            .map(|v| v.run())
            .collect::<Result<Vec<_>, _>>()
    });
    let outcomes = outcomes.map_err(|e| runtime(name, e))?;

    fs::create_dir_all(out_dir).map_err(|e| runtime(out_dir.display(), e))?;
    for (variant, outcome) in variants.iter().zip(&outcomes) {
        let stem = format!("{name}-{}", variant.label);
        for t in &outcome.trajectories {
            write_trajectory(out_dir, &format!("{stem}-{}", t.drone), t)?;
        }
        for projection in experiment.projections() {
            let path = out_dir.join(format!("{stem}.{}.dat", projection.name()));
            let file = File::create(&path).map_err(|e| runtime(path.display(), e))?;
            export_plot_columns(&outcome.trajectories, *projection, BufWriter::new(file))
                .map_err(|e| runtime(path.display(), e))?;
        }
        for line in outcome.findings.lines() {
            println!("experiment={name} variant={} {line}", variant.label);
        }
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>), Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| input(path.display(), e))?;
    let headers = reader
        .headers()
        .map_err(|e| input(path.display(), e))?
        .clone();
    let rows = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| input(path.display(), e))?;
    Ok((headers, rows))
}

fn column(
    path: &Path,
    table: &(csv::StringRecord, Vec<csv::StringRecord>),
    name: &str,
) -> Result<Vec<f64>, Failure> {
    let (headers, rows) = table;
    let index = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| input(path.display(), format!("no column `{name}`")))?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.get(index)
                .and_then(|cell| cell.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    input(
                        path.display(),
                        format!("row {}: `{name}` is not a number", i + 2),
                    )
                })
        })
        .collect()
}

/// Six significant digits; zero prints as `0.000000`.
fn significant6(value: f64) -> String {
    if value == 0.0 {
        return "0.000000".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

fn cmd_mse(a: &Path, b: &Path, name: &str) -> Result<(), Failure> {
    let left = read_table(a)?;
    let right = read_table(b)?;
    let columns: &[&str] = if name == "position" {
        &["x", "y", "z"]
    } else {
        &[name]
    };
    let mut total = 0.0;
    for c in columns {
        let x = column(a, &left, c)?;
        let y = column(b, &right, c)?;
        total += mse(&x, &y).map_err(|e| input(format!("column `{c}`"), e))?;
    }
    println!("{}", significant6(total));
    Ok(())
}

fn cmd_fit_battery(path: &Path, tmax: Option<f64>) -> Result<(), Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| input(path.display(), e))?;
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| input(path.display(), e))?;
        let parsed: Option<(f64, f64)> = match (record.get(0), record.get(1)) {
            (Some(t), Some(p)) => t.trim().parse().ok().zip(p.trim().parse().ok()),
            _ => None,
        };
        match parsed {
            Some(sample) => samples.push(sample),
            // A non-numeric first line is a header.
            None if i == 0 => continue,
            None => {
                return Err(input(
                    path.display(),
                    format!("line {}: expected `time_s,charge`", i + 1),
                ))
            }
        }
    }
    let model = fit_discharge_polynomial(&samples, tmax).map_err(|e| input(path.display(), e))?;
    let [c0, c1, c2, c3] = model.coefficients();
    let observed: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let fitted: Vec<f64> = samples.iter().map(|s| model.eval(s.0)).collect();
    let residual = mse(&observed, &fitted).map_err(|e| input(path.display(), e))?;
    println!("c0={c0:.12e}");
    println!("c1={c1:.12e}");
    println!("c2={c2:.12e}");
    println!("c3={c3:.12e}");
    println!("t_max={}", fixed6(model.t_max()));
    println!("cutoff_charge={}", fixed6(model.cutoff_charge()));
    println!("mse={residual:.6e}");
    Ok(())
}
