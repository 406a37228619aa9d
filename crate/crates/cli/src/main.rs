//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use snapsense::detection::{sequence_from_events, DetectedEvent, SignalSet};
use snapsense::error::Error;
use snapsense::geometry::BeamProfile;
use snapsense::harness::{
    imperfection_mc, noise_sweep, run_scenario, score_against_truth, sigma_star, ScenarioConfig,
    ScenarioOutcome,
};
use snapsense::mechanics::{Direction, TransitionEvent};
use snapsense::sensing::{decouple_frame, CapacitorModel};
use snapsense::trace::{read_events_csv, write_events_csv, Trace};

#[derive(Parser)]
#[command(
    name = "snapsense",
    about = "Simulate a serial bistable metamaterial chain and recover its deployment sequence from capacitive sensor codes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario end to end and write trace, events and report.
    Simulate {
        /// Scenario config (JSON).
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Re-run detection on a trace CSV.
    Detect {
        /// Trace CSV produced by `simulate` (code columns preferred,
        /// capacitance columns used as fallback).
        trace: PathBuf,
        /// Ground-truth events CSV for scoring.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Scenario config supplying converter/coupling constants; defaults
        /// match the default simulation.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Sequence-recovery accuracy across capacitance noise levels.
    SweepNoise {
        config: PathBuf,
        /// Comma-separated noise sigmas (pF).
        #[arg(long, value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
        /// Seeds per sigma (>= 20).
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Write the table as JSON here instead of stdout only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo over imperfection draws.
    SweepImperfections {
        config: PathBuf,
        /// Number of draws.
        #[arg(long, required = true)]
        draws: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the beam midline profile as CSV (s_mm, B_mm).
    ExportGeometry {
        /// Sample count along the arclength parameter.
        #[arg(long, default_value_t = 181)]
        samples: usize,
        #[arg(long, default_value = "geometry.csv")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_config() { 1 } else { 2 })
        }
    }
}

fn dispatch(command: Command) -> snapsense::Result<()> {
    match command {
        Command::Simulate { config, out_dir } => simulate(&config, &out_dir),
        Command::Detect {
            trace,
            truth,
            config,
            out_dir,
        } => detect(&trace, truth.as_deref(), config.as_deref(), &out_dir),
        Command::SweepNoise {
            config,
            sigmas,
            seeds,
            out,
        } => sweep_noise(&config, &sigmas, seeds, out.as_deref()),
        Command::SweepImperfections { config, draws, out } => {
            sweep_imperfections(&config, draws, out.as_deref())
        }
        Command::ExportGeometry { samples, out } => export_geometry(samples, &out),
    }
}

fn load_config(path: &Path) -> snapsense::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> snapsense::Result<()> {
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

fn write_detected_csv(events: &[DetectedEvent], path: &Path) -> snapsense::Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "step,cell_id,magnitude")?;
    for e in events {
        writeln!(out, "{},{},{}", e.step, e.cell_id, e.magnitude)?;
    }
    Ok(())
}

fn write_outputs(outcome: &ScenarioOutcome, out_dir: &Path) -> snapsense::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    outcome.trace.write_csv_path(&out_dir.join("trace.csv"))?;
    let events = std::fs::File::create(out_dir.join("events.csv"))?;
    write_events_csv(&outcome.truth, events)?;
    write_detected_csv(&outcome.detected, &out_dir.join("detected.csv"))?;
    write_json(&outcome.report, &out_dir.join("report.json"))?;
    Ok(())
}

fn simulate(config_path: &Path, out_dir: &Path) -> snapsense::Result<()> {
    let config = load_config(config_path)?;
    let outcome = run_scenario(&config)?;
    write_outputs(&outcome, out_dir)?;
    let truth: Vec<usize> = outcome
        .truth
        .iter()
        .filter(|e| e.direction == Direction::Deploy)
        .map(|e| e.cell_id)
        .collect();
    let detected: Vec<usize> = outcome.detected.iter().map(|e| e.cell_id).collect();
    println!(
        "rows={} peak_force={:.3} N truth_deploys={:?} detected={:?} match={} ({:.2} s)",
        outcome.report.rows,
        outcome.report.peak_force_n,
        truth,
        detected,
        outcome.report.all_cycles_match,
        outcome.report.wall_seconds,
    );
    println!("outputs in {}", out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct DetectSummary {
    sequence: Vec<usize>,
    duplicate_cells: Vec<usize>,
    events: usize,
    score: Option<snapsense::detection::DetectionScore>,
}

fn detect(
    trace_path: &Path,
    truth_path: Option<&Path>,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> snapsense::Result<()> {
    let config = match config_path {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    let trace = Trace::read_csv_path(trace_path)?;
    let rows = trace.rows();
    if rows < 3 {
        return Err(Error::Argument("trace too short for detection".into()));
    }

    // prefer the digital outputs; fall back to the capacitance columns
    let channels: Vec<Vec<f64>> = if !trace.code.is_empty() {
        let mut channels = vec![Vec::with_capacity(rows); trace.code.len()];
        for (channel, codes) in trace.code.iter().enumerate() {
            for &code in codes {
                channels[channel]
                    .push(snapsense::acquisition::code_to_capacitance(&config.converter, code)?);
            }
        }
        channels
    } else if !trace.capacitance.is_empty() {
        trace.capacitance.clone()
    } else {
        return Err(Error::Argument(
            "trace has neither code nor capacitance columns".into(),
        ));
    };

    // undo the known channel coupling before the pipeline
    let model = CapacitorModel::uniform(
        config.plates,
        channels.len(),
        config.capacitor.rel_permittivity,
        config.capacitor.parasitic_pf,
        config.capacitor.coupling_alpha,
    )?;
    let mut decoupled = vec![Vec::with_capacity(rows); channels.len()];
    for row in 0..rows {
        let measured: Vec<f64> = channels.iter().map(|c| c[row]).collect();
        for (channel, value) in decouple_frame(&model, &measured)?.into_iter().enumerate() {
            decoupled[channel].push(value);
        }
    }

    let signals = SignalSet::new(decoupled, trace.displacement.clone())?;
    let detected = snapsense::detection::run_pipeline(&signals, &config.detection)?;

    let score = match truth_path {
        Some(path) => {
            let rows = read_events_csv(std::fs::File::open(path)?)?;
            let truth: Vec<TransitionEvent> = rows
                .iter()
                .map(|(step, cell_id, direction)| TransitionEvent {
                    cell_id: *cell_id,
                    direction: if direction == "COLLAPSE" {
                        Direction::Collapse
                    } else {
                        Direction::Deploy
                    },
                    displacement: 0.0,
                    force_before: 0.0,
                    step: *step,
                    energy_released: 0.0,
                })
                .collect();
            Some(score_against_truth(&detected, &truth))
        }
        None => None,
    };

    std::fs::create_dir_all(out_dir)?;
    write_detected_csv(&detected, &out_dir.join("detected.csv"))?;
    let summary = sequence_from_events(&detected);
    let summary = DetectSummary {
        sequence: summary.sequence,
        duplicate_cells: summary.duplicate_cells,
        events: detected.len(),
        score,
    };
    write_json(&summary, &out_dir.join("summary.json"))?;
    println!(
        "detected sequence {:?} ({} events){}",
        summary.sequence,
        summary.events,
        match summary.score {
            Some(s) => format!(
                " exact={} hit_rate={:.2} false_positives={}",
                s.exact_sequence, s.hit_rate, s.false_positives
            ),
            None => String::new(),
        }
    );
    Ok(())
}

fn sweep_noise(
    config_path: &Path,
    sigmas: &[f64],
    seeds: usize,
    out: Option<&Path>,
) -> snapsense::Result<()> {
    let config = load_config(config_path)?;
    let table = noise_sweep(&config, sigmas, seeds)?;
    println!("sigma_pF,accuracy,exact,total");
    for point in &table {
        println!(
            "{},{},{},{}",
            point.sigma_pf, point.accuracy, point.exact_runs, point.total_runs
        );
    }
    match sigma_star(&table, 0.95) {
        Some(sigma) => println!("sigma_star(95%) = {sigma} pF"),
        None => println!("sigma_star(95%) not reached within the sweep"),
    }
    if let Some(path) = out {
        write_json(&table, path)?;
    }
    Ok(())
}

fn sweep_imperfections(
    config_path: &Path,
    draws: usize,
    out: Option<&Path>,
) -> snapsense::Result<()> {
    let config = load_config(config_path)?;
    let table = imperfection_mc(&config, draws)?;
    println!("seed,truth,detected,match");
    for row in &table.rows {
        println!(
            "{},{:?},{:?},{}",
            row.seed, row.truth_sequence, row.detected_sequence, row.exact
        );
    }
    println!("match_rate = {}", table.match_rate);
    if let Some(path) = out {
        write_json(&table, path)?;
    }
    Ok(())
}

fn export_geometry(samples: usize, out: &Path) -> snapsense::Result<()> {
    let beam = BeamProfile::default();
    let points = beam.sample(samples)?;
    let mut file = std::fs::File::create(out)?;
    writeln!(file, "s_mm,B_mm")?;
    for (s, b) in points {
        writeln!(file, "{s},{b}")?;
    }
    println!("wrote {} samples to {}", samples, out.display());
    Ok(())
}
