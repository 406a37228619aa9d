//! Per-run report assembly.

use serde::{Deserialize, Serialize};

use crate::detection::{DetectedEvent, DetectionScore, SequenceSummary};
use crate::error::Result;
use crate::mechanics::{CellParams, Direction, TransitionEvent};
use crate::trace::Trace;

use super::{score_against_truth, sequence_from_events, LoadKind, ScenarioConfig};

/// One stroke's truth and detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeReport {
    pub direction: Direction,
    pub truth_sequence: Vec<usize>,
    pub truth_steps: Vec<usize>,
    pub detected: SequenceSummary,
    pub detected_steps: Vec<usize>,
    pub exact_match: bool,
    pub score: DetectionScore,
}

/// One loading(/unloading) cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub index: usize,
    pub strokes: Vec<StrokeReport>,
    pub exact_match: bool,
    /// Net work input over the cycle, integral of F dX (mJ).
    pub work_mj: f64,
    /// Energy released by the cycle's snaps (mJ).
    pub dissipated_mj: f64,
}

/// Summary of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cells: usize,
    pub rows: usize,
    pub peak_force_n: f64,
    pub cycles: Vec<CycleReport>,
    /// Every stroke of every cycle matched its truth sequence.
    pub all_cycles_match: bool,
    /// Channels the detector had to skip as constant (noiseless holds).
    pub degenerate_channels: Vec<usize>,
    /// Not serialized: outputs stay byte-identical for identical seeds.
    #[serde(skip)]
    pub wall_seconds: f64,
}

pub(super) fn build(
    config: &ScenarioConfig,
    cells: &[CellParams],
    trace: &Trace,
    truth: &[TransitionEvent],
    detected: &[DetectedEvent],
) -> Result<RunReport> {
    let per_stroke = config.load.steps_per_stroke();
    // (first step, last step, direction) per stroke
    let strokes: Vec<(usize, usize, Direction)> = match config.load.kind {
        LoadKind::SinglePull => vec![(1, per_stroke, Direction::Deploy)],
        LoadKind::Cyclic { cycles } => (0..cycles)
            .flat_map(|k| {
                let base = 2 * k * per_stroke;
                [
                    (base + 1, base + per_stroke, Direction::Deploy),
                    (
                        base + per_stroke + 1,
                        base + 2 * per_stroke,
                        Direction::Collapse,
                    ),
                ]
            })
            .collect(),
        LoadKind::Hold { .. } => Vec::new(),
    };

    let strokes_per_cycle = match config.load.kind {
        LoadKind::Cyclic { .. } => 2,
        _ => 1,
    };

    let mut cycles = Vec::new();
    let mut all_match = true;
    for (cycle_index, window) in strokes.chunks(strokes_per_cycle).enumerate() {
        let mut stroke_reports = Vec::new();
        for &(first, last, direction) in window {
            let stroke_truth: Vec<TransitionEvent> = truth
                .iter()
                .filter(|e| e.step >= first && e.step <= last && e.direction == direction)
                .cloned()
                .collect();
            // detected peaks can straddle the snap row by one sample
            let stroke_detected: Vec<DetectedEvent> = detected
                .iter()
                .filter(|e| e.step + 1 >= first && e.step <= last)
                .cloned()
                .collect();
            let summary = sequence_from_events(&stroke_detected);
            let truth_sequence: Vec<usize> = stroke_truth.iter().map(|e| e.cell_id).collect();
            let exact_match = summary.sequence == truth_sequence && !summary.is_anomalous();
            all_match &= exact_match;
            stroke_reports.push(StrokeReport {
                direction,
                truth_steps: stroke_truth.iter().map(|e| e.step).collect(),
                truth_sequence,
                detected_steps: stroke_detected.iter().map(|e| e.step).collect(),
                detected: summary,
                exact_match,
                score: score_against_truth(&stroke_detected, &stroke_truth),
            });
        }

        let (first_row, last_row) = if window.is_empty() {
            (0, trace.rows().saturating_sub(1))
        } else {
            (window[0].0 - 1, window[window.len() - 1].1)
        };
        let mut work = 0.0;
        for j in first_row..last_row {
            work += 0.5
                * (trace.force[j] + trace.force[j + 1])
                * (trace.displacement[j + 1] - trace.displacement[j]);
        }
        let dissipated: f64 = truth
            .iter()
            .filter(|e| e.step > first_row && e.step <= last_row)
            .map(|e| e.energy_released)
            .sum();
        let exact_match = stroke_reports.iter().all(|s| s.exact_match);
        cycles.push(CycleReport {
            index: cycle_index,
            strokes: stroke_reports,
            exact_match,
            work_mj: work,
            dissipated_mj: dissipated,
        });
    }

    let peak_force_n = trace.force.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RunReport {
        cells: cells.len(),
        rows: trace.rows(),
        peak_force_n,
        cycles,
        all_cycles_match: all_match,
        degenerate_channels: Vec::new(),
        wall_seconds: 0.0,
    })
}
