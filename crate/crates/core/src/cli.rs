//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::sim::{self, RunMetrics, SeedMode, SweepAxis};

#[derive(Debug, Parser)]
#[command(name = "v2x-edge", version, about = "Offloading control simulator for mmWave V2X edge computing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one run and print its metrics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write the metrics as CSV here.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the per-slot trace as CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Repeat the run over values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// interference_temperature_db, lane_densities, arrival_rate or eta.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long, value_enum, default_value_t = SeedChoice::Common)]
        seed_mode: SeedChoice,
        /// Write the sweep CSV here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo check of the interference-cap rule.
    #[command(name = "validate-lemma2")]
    CheckCap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        /// Write the report here as well as to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the effective configuration and the quantities derived from it.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file layered over the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value, applied after the file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SeedChoice {
    /// Every point uses the base seed.
    Common,
    /// Every point derives its own seed from the base seed and its value.
    PerPoint,
}

impl From<SeedChoice> for SeedMode {
    fn from(c: SeedChoice) -> Self {
        match c {
            SeedChoice::Common => SeedMode::Common,
            SeedChoice::PerPoint => SeedMode::PerPoint,
        }
    }
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        for o in &self.overrides {
            s.apply_override(o)?;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        Ok(s)
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        match e {
            Error::Io(_) | Error::Csv(_) => 1,
            _ => EXIT_CONFIG,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

pub const METRICS_HEADER: [&str; 8] = [
    "slots",
    "seed",
    "avg_queue_tasks",
    "avg_energy_low_J",
    "avg_computing_time_s",
    "avg_offloaded_tasks",
    "third_quartile_queue",
    "last_quartile_queue",
];

fn write_metrics<W: Write>(out: W, m: &RunMetrics, seed: u64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    w.write_record([
        m.slots.to_string(),
        seed.to_string(),
        m.avg_queue_tasks.to_string(),
        m.avg_energy_low.to_string(),
        m.avg_computing_time.to_string(),
        m.avg_offloaded_tasks.to_string(),
        m.third_quartile_queue.to_string(),
        m.last_quartile_queue.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn summary(m: &RunMetrics) -> String {
    let mut s = format!(
        "slots: {}\naverage delayed tasks: {:.4}\naverage energy (lower-bound rate): {:.6} J\naverage computing time: {:.6} s\naverage offloaded tasks per slot: {:.4}\n",
        m.slots, m.avg_queue_tasks, m.avg_energy_low, m.avg_computing_time, m.avg_offloaded_tasks
    );
    if let Some(e) = m.avg_energy_realized {
        s.push_str(&format!("average energy (sampled interference): {e:.6} J\n"));
    }
    s.push_str(&format!(
        "backlog third/last quarter: {:.2} / {:.2} ({})\n",
        m.third_quartile_queue,
        m.last_quartile_queue,
        if m.is_stable() { "bounded" } else { "growing" }
    ));
    s
}

/// Runs a parsed command and returns the process exit status.
pub fn execute(cli: Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            common,
            output,
            trace,
        } => {
            let settings = common.settings()?;
            let mut config = settings.run_config()?;
            config.record_trace = trace.is_some();
            let m = sim::run(&config)?;
            if let Some(path) = output {
                write_metrics(create(&path)?, &m, config.seed)?;
            }
            if let (Some(path), Some(t)) = (trace, m.trace.as_ref()) {
                sim::write_trace(create(&path)?, t)?;
            }
            print!("{}", summary(&m));
            Ok(0)
        }
        Command::Sweep {
            common,
            axis,
            values,
            seed_mode,
            output,
        } => {
            let axis: SweepAxis = axis.parse()?;
            let config = common.settings()?.run_config()?;
            let points = sim::sweep(&config, axis, &values, seed_mode.into());
            match output {
                Some(path) => sim::write_sweep(create(&path)?, &points)?,
                None => sim::write_sweep(io::stdout().lock(), &points)?,
            }
            let mut failed = 0;
            for p in &points {
                if let Err(e) = &p.result {
                    failed += 1;
                    eprintln!("point {}: {e}", p.axis_value);
                }
            }
            if axis == SweepAxis::InterferenceTemperatureDb {
                let frontier: Vec<(f64, f64)> = points
                    .iter()
                    .filter_map(|p| p.result.as_ref().ok())
                    .map(|m| (m.avg_queue_tasks, m.avg_energy_low))
                    .collect();
                let inv = sim::frontier_inversions(&frontier);
                eprintln!(
                    "frontier inversions: {inv} (tradeoff {})",
                    if inv <= 1 { "monotone" } else { "not monotone" }
                );
            }
            if failed == points.len() {
                if let Some(Err(e)) = points.into_iter().next().map(|p| p.result) {
                    return Err(e);
                }
            }
            Ok(0)
        }
        Command::CheckCap {
            common,
            draws,
            output,
        } => {
            let config = common.settings()?.run_config()?;
            let scenario = config.scenario()?;
            let r = sim::check_interference_cap(&scenario, draws, config.road_half_length, config.seed)?;
            let report = format!(
                "draws: {}\ninterferer power (cap): {:e} W\ninterference temperature: {:e} W\nempirical Pr(I >= I_th): {:.6} (bound {} + 3 x {:.6})\nmean interference: {:e} W (+/- {:e})\nanalytic mean P*xi1*upsilon: {:e} W (relative error {:.4})\nresult: {}\n",
                r.draws,
                r.power,
                r.interference_temperature,
                r.exceed_probability,
                r.epsilon,
                r.probability_std_error,
                r.mean_interference,
                r.mean_std_error,
                r.analytic_mean,
                r.mean_relative_error(),
                if r.passed() { "PASS" } else { "FAIL" }
            );
            print!("{report}");
            if let Some(path) = output {
                create(&path)?.write_all(report.as_bytes())?;
            }
            Ok(if r.passed() { 0 } else { EXIT_VALIDATION })
        }
        Command::ShowConfig { common } => {
            print!("{}", common.settings()?.describe()?);
            Ok(0)
        }
    }
}
