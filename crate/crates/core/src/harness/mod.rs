//! Scenario configuration, end-to-end orchestration and sweeps.
//!
//! One JSON config fully determines a run: chain, sensors, converter,
//! detection, load program and a single seed. The seed feeds named
//! substreams ("imperfections", "noise"), so disabling one randomness source
//! never shifts another.

mod report;

pub use report::{CycleReport, RunReport, StrokeReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{acquire, code_to_capacitance, ConverterConfig};
use crate::detection::{
    run_pipeline, score_detection, sequence_from_events, DetectedEvent, DetectionConfig,
    SignalSet,
};
use crate::error::{Error, Result};
use crate::geometry::PlateGeometry;
use crate::mechanics::{
    run_load_program, CellParams, Direction, LoadProgram, TransitionEvent,
};
use crate::rngutil::{standard_normal, substream};
use crate::sensing::{decouple_frame, gap_from_displacement, sensor_frame_from, CapacitorModel};
use crate::trace::Trace;

/// Step window used when matching detections to truth events.
pub const SCORE_WINDOW_STEPS: usize = 5;

/// Chain description: explicit cells or a seeded random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChainSpec {
    Explicit {
        cells: Vec<CellSpec>,
    },
    Random {
        cells: usize,
        #[serde(default = "defaults::peak_force")]
        peak_force: f64,
        #[serde(default = "defaults::imperfection_sigma")]
        imperfection_sigma: f64,
    },
}

/// One explicit cell in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellSpec {
    pub peak_force: f64,
    pub imperfection: f64,
    pub unstable_fraction: f64,
    /// Defaults to the plate stroke when absent.
    pub stroke: Option<f64>,
}

impl Default for CellSpec {
    fn default() -> Self {
        Self {
            peak_force: defaults::peak_force(),
            imperfection: 0.0,
            unstable_fraction: crate::mechanics::DEFAULT_UNSTABLE_FRACTION,
            stroke: None,
        }
    }
}

/// Electrical sensor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacitorSpec {
    pub rel_permittivity: f64,
    pub parasitic_pf: f64,
    pub coupling_alpha: f64,
}

impl Default for CapacitorSpec {
    fn default() -> Self {
        Self {
            rel_permittivity: 1.0,
            parasitic_pf: 0.05,
            coupling_alpha: 0.02,
        }
    }
}

/// Load program kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadKind {
    /// One pull 0 -> x_max.
    SinglePull,
    /// `cycles` pull/return cycles.
    Cyclic { cycles: usize },
    /// Stay at X = 0 for `duration_s` seconds.
    Hold { duration_s: f64 },
}

/// Displacement program description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadSpec {
    #[serde(flatten)]
    pub kind: LoadKind,
    /// Stroke endpoint (mm).
    pub x_max: f64,
    /// Crosshead rate (mm/s).
    pub rate_mm_per_s: f64,
    /// Sample interval (s).
    pub dt_s: f64,
}

impl Default for LoadSpec {
    fn default() -> Self {
        Self {
            kind: LoadKind::SinglePull,
            x_max: 4.0 * crate::mechanics::DEFAULT_STROKE_MM + 2.0,
            rate_mm_per_s: 1.0,
            dt_s: 0.01,
        }
    }
}

impl LoadSpec {
    /// Displacement step per sample (mm).
    pub fn step_size(&self) -> f64 {
        self.rate_mm_per_s * self.dt_s
    }

    /// Solver steps per stroke.
    pub fn steps_per_stroke(&self) -> usize {
        (self.x_max / self.step_size()).ceil() as usize
    }
}

mod defaults {
    pub fn peak_force() -> f64 {
        crate::mechanics::DEFAULT_PEAK_FORCE_N
    }
    pub fn imperfection_sigma() -> f64 {
        0.05
    }
    pub fn seed() -> u64 {
        42
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub chain: ChainSpec,
    pub plates: PlateGeometry,
    pub capacitor: CapacitorSpec,
    pub converter: ConverterConfig,
    pub detection: DetectionConfig,
    pub load: LoadSpec,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            chain: ChainSpec::Random {
                cells: 4,
                peak_force: defaults::peak_force(),
                imperfection_sigma: defaults::imperfection_sigma(),
            },
            plates: PlateGeometry::default(),
            capacitor: CapacitorSpec::default(),
            converter: ConverterConfig::default(),
            detection: DetectionConfig::default(),
            load: LoadSpec::default(),
            seed: defaults::seed(),
        }
    }
}

impl ScenarioConfig {
    /// Reference four-cell scenario: explicit imperfections rank the
    /// effective peaks as cell2 < cell3 < cell1 < cell4, with the strongest
    /// cell near 7 N.
    pub fn replica() -> Self {
        let etas = [0.02, -0.06, -0.02, 0.06];
        Self {
            chain: ChainSpec::Explicit {
                cells: etas
                    .iter()
                    .map(|&imperfection| CellSpec {
                        imperfection,
                        ..Default::default()
                    })
                    .collect(),
            },
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.plates.validate()?;
        self.converter.validate()?;
        self.detection.validate()?;
        match &self.chain {
            ChainSpec::Explicit { cells } => {
                if cells.is_empty() {
                    return Err(Error::Config("chain has no cells".into()));
                }
            }
            ChainSpec::Random {
                cells,
                peak_force,
                imperfection_sigma,
            } => {
                if *cells == 0 {
                    return Err(Error::Config("chain has no cells".into()));
                }
                if !(*peak_force > 0.0) || !(*imperfection_sigma >= 0.0) {
                    return Err(Error::Config(format!(
                        "random chain needs peak_force > 0 and imperfection_sigma >= 0, got {peak_force} / {imperfection_sigma}"
                    )));
                }
            }
        }
        let spec = &self.capacitor;
        if !(spec.rel_permittivity >= 1.0)
            || !(spec.parasitic_pf >= 0.0)
            || !(0.0..=0.2).contains(&spec.coupling_alpha)
        {
            return Err(Error::Config(format!("bad capacitor spec: {spec:?}")));
        }
        if !(self.load.rate_mm_per_s > 0.0) || !(self.load.dt_s > 0.0) {
            return Err(Error::Config(format!(
                "load rate and dt must be positive: {:?}",
                self.load
            )));
        }
        if !(self.load.x_max >= 0.0) {
            return Err(Error::Config(format!("x_max must be >= 0, got {}", self.load.x_max)));
        }
        if let LoadKind::Cyclic { cycles } = self.load.kind {
            if cycles == 0 {
                return Err(Error::Config("cyclic load needs at least one cycle".into()));
            }
        }
        if let LoadKind::Hold { duration_s } = self.load.kind {
            if !(duration_s >= 0.0) {
                return Err(Error::Config(format!("hold duration must be >= 0, got {duration_s}")));
            }
        }
        // one converter frame per solver step
        let step_rate = 1.0 / self.load.dt_s;
        if (step_rate - self.converter.sample_rate_hz).abs() > 1e-6 * step_rate {
            return Err(Error::Config(format!(
                "converter sample rate ({} Hz) must match the solver step rate (1/dt = {} Hz)",
                self.converter.sample_rate_hz, step_rate
            )));
        }
        Ok(())
    }

    /// Resolve the chain spec into concrete cells; random chains draw their
    /// imperfections from the "imperfections" substream of `seed`.
    pub fn build_cells(&self) -> Result<Vec<CellParams>> {
        let stroke_default = self.plates.stroke();
        match &self.chain {
            ChainSpec::Explicit { cells } => cells
                .iter()
                .enumerate()
                .map(|(i, spec)| {
                    CellParams::new(
                        i + 1,
                        spec.stroke.unwrap_or(stroke_default),
                        spec.unstable_fraction,
                        spec.peak_force,
                        spec.imperfection,
                    )
                })
                .collect(),
            ChainSpec::Random {
                cells,
                peak_force,
                imperfection_sigma,
            } => {
                let mut rng = substream(self.seed, "imperfections");
                (1..=*cells)
                    .map(|id| {
                        let eta = imperfection_sigma * standard_normal(&mut rng);
                        CellParams::new(
                            id,
                            stroke_default,
                            crate::mechanics::DEFAULT_UNSTABLE_FRACTION,
                            *peak_force,
                            eta,
                        )
                    })
                    .collect()
            }
        }
    }

    fn capacitor_model(&self, channels: usize) -> Result<CapacitorModel> {
        CapacitorModel::uniform(
            self.plates,
            channels,
            self.capacitor.rel_permittivity,
            self.capacitor.parasitic_pf,
            self.capacitor.coupling_alpha,
        )
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub trace: Trace,
    pub truth: Vec<TransitionEvent>,
    pub detected: Vec<DetectedEvent>,
    pub report: RunReport,
}

/// Execute mechanics -> sensing -> acquisition -> detection for one config.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let started = std::time::Instant::now();
    config.validate()?;
    let cells = config.build_cells()?;
    let model = config.capacitor_model(cells.len())?;

    // mechanics
    let step = config.load.step_size();
    let (mut trace, truth) = match config.load.kind {
        LoadKind::SinglePull => {
            let program = LoadProgram::single_pull(config.load.x_max, step)?;
            let run = run_load_program(&cells, &program)?;
            (run.trace, run.events)
        }
        LoadKind::Cyclic { cycles } => {
            let program = LoadProgram::cyclic(config.load.x_max, cycles, step)?;
            let run = run_load_program(&cells, &program)?;
            (run.trace, run.events)
        }
        LoadKind::Hold { duration_s } => {
            let program = LoadProgram::new(Vec::new(), step)?;
            let run = run_load_program(&cells, &program)?;
            let mut trace = run.trace;
            let extra = (duration_s / config.load.dt_s).ceil() as usize;
            for _ in 0..extra {
                trace.displacement.push(trace.displacement[0]);
                trace.force.push(trace.force[0]);
                for column in trace.cell_displacement.iter_mut() {
                    let first = column[0];
                    column.push(first);
                }
            }
            (trace, run.events)
        }
    };

    // sensing: gaps and coupled capacitances per row
    let rows = trace.rows();
    let n = cells.len();
    trace.gap = vec![Vec::with_capacity(rows); n];
    trace.capacitance = vec![Vec::with_capacity(rows); n];
    for row in 0..rows {
        let displacements: Vec<f64> = (0..n).map(|c| trace.cell_displacement[c][row]).collect();
        for (c, &x) in displacements.iter().enumerate() {
            trace.gap[c].push(gap_from_displacement(&config.plates, x));
        }
        let frame = sensor_frame_from(&model, &displacements, row)?;
        for (c, &value) in frame.capacitance.iter().enumerate() {
            trace.capacitance[c].push(value);
        }
    }

    // acquisition: one code frame per row from the noise substream
    let mut noise = substream(config.seed, "noise");
    trace.code = vec![Vec::with_capacity(rows); n];
    for row in 0..rows {
        let frame = crate::sensing::SensorFrame {
            capacitance: (0..n).map(|c| trace.capacitance[c][row]).collect(),
            step: row,
        };
        let codes = acquire(&config.converter, &frame, &mut noise);
        for (c, &code) in codes.code.iter().enumerate() {
            trace.code[c].push(code);
        }
    }

    // detection: decode, undo the known coupling, run the pipeline
    let mut detected = Vec::new();
    let mut degenerate = Vec::new();
    if rows >= 3 {
        let mut estimated = vec![Vec::with_capacity(rows); n];
        for row in 0..rows {
            let measured: Vec<f64> = (0..n)
                .map(|c| code_to_capacitance(&config.converter, trace.code[c][row]))
                .collect::<Result<_>>()?;
            let ideal = decouple_frame(&model, &measured)?;
            for (c, value) in ideal.into_iter().enumerate() {
                estimated[c].push(value);
            }
        }
        let signals = SignalSet::new(estimated, trace.displacement.clone())?;
        match run_pipeline(&signals, &config.detection) {
            Ok(events) => detected = events,
            Err(Error::DegenerateChannels(ids)) => degenerate = ids,
            Err(other) => return Err(other),
        }
    }

    let mut report = report::build(config, &cells, &trace, &truth, &detected)?;
    report.degenerate_channels = degenerate;
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(ScenarioOutcome {
        trace,
        truth,
        detected,
        report,
    })
}

/// Sequence-recovery accuracy per noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub sigma_pf: f64,
    pub exact_runs: usize,
    pub total_runs: usize,
    pub accuracy: f64,
}

/// Accuracy of exact sequence recovery as a function of capacitance noise.
/// Each run re-seeds both substreams with `base seed + run index`.
pub fn noise_sweep(
    config: &ScenarioConfig,
    sigmas: &[f64],
    seeds_per_sigma: usize,
) -> Result<Vec<NoisePoint>> {
    if sigmas.is_empty() {
        return Ok(Vec::new());
    }
    if seeds_per_sigma < 20 {
        return Err(Error::Argument(format!(
            "noise sweep needs at least 20 seeds per sigma, got {seeds_per_sigma}"
        )));
    }
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..sigmas.len())
        .flat_map(|s| (0..seeds_per_sigma).map(move |k| (s, k)))
        .collect();
    let outcomes: Vec<(usize, bool)> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let mut run_config = config.clone();
            run_config.converter.noise_sigma_pf = sigmas[s];
            run_config.seed = config.seed.wrapping_add(k as u64);
            let outcome = run_scenario(&run_config)?;
            Ok((s, outcome.report.all_cycles_match))
        })
        .collect::<Result<_>>()?;
    let mut exact = vec![0usize; sigmas.len()];
    for (s, ok) in outcomes {
        if ok {
            exact[s] += 1;
        }
    }
    Ok(sigmas
        .iter()
        .zip(exact)
        .map(|(&sigma_pf, exact_runs)| NoisePoint {
            sigma_pf,
            exact_runs,
            total_runs: seeds_per_sigma,
            accuracy: exact_runs as f64 / seeds_per_sigma as f64,
        })
        .collect())
}

/// First sweep sigma whose accuracy drops below `floor`, if any.
pub fn sigma_star(points: &[NoisePoint], floor: f64) -> Option<f64> {
    points
        .iter()
        .find(|p| p.accuracy < floor)
        .map(|p| p.sigma_pf)
}

/// One imperfection draw of a Monte-Carlo batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub seed: u64,
    pub truth_sequence: Vec<usize>,
    pub detected_sequence: Vec<usize>,
    pub exact: bool,
}

/// Monte-Carlo batch over imperfection draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTable {
    pub rows: Vec<McRow>,
    pub match_rate: f64,
}

/// Run `draws` independent imperfection draws of a random-chain scenario and
/// compare detected against true deployment sequences.
pub fn imperfection_mc(config: &ScenarioConfig, draws: usize) -> Result<McTable> {
    if draws == 0 {
        return Err(Error::Argument("need at least one draw".into()));
    }
    if matches!(config.chain, ChainSpec::Explicit { .. }) {
        return Err(Error::Config(
            "imperfection sweep needs a random chain spec".into(),
        ));
    }
    config.validate()?;
    let rows: Vec<McRow> = (0..draws)
        .into_par_iter()
        .map(|draw| {
            let mut run_config = config.clone();
            run_config.seed = config.seed.wrapping_add(draw as u64);
            let outcome = run_scenario(&run_config)?;
            let truth_sequence: Vec<usize> = outcome
                .truth
                .iter()
                .filter(|e| e.direction == Direction::Deploy)
                .map(|e| e.cell_id)
                .collect();
            let detected_sequence = sequence_from_events(&outcome.detected).sequence;
            let exact = outcome.report.all_cycles_match;
            Ok(McRow {
                seed: run_config.seed,
                truth_sequence,
                detected_sequence,
                exact,
            })
        })
        .collect::<Result<_>>()?;
    let matches = rows.iter().filter(|r| r.exact).count();
    Ok(McTable {
        match_rate: matches as f64 / rows.len() as f64,
        rows,
    })
}

/// Score helper shared by the report and the CLI `detect` command.
pub fn score_against_truth(
    detected: &[DetectedEvent],
    truth: &[TransitionEvent],
) -> crate::detection::DetectionScore {
    score_detection(detected, truth, SCORE_WINDOW_STEPS)
}
