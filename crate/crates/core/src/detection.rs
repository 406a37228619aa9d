//! Deployment-sequence recovery from per-channel capacitance signals.
//!
//! Pipeline order: normalize -> smooth -> derivative -> peak detection. Peaks
//! are searched in the deployment-oriented derivative: plates separate under
//! loading (capacitance falls) and close under unloading, so the expected
//! event polarity at each sample follows the sign of dX. Elastic rebound of
//! the non-snapping cells moves their capacitance the opposite way and is
//! rejected by polarity rather than by magnitude; within a refractory window
//! the strongest channel claims the event.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::TransitionEvent;

/// Per-channel sampled series plus the imposed displacement per step.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    /// One series per channel, equal lengths.
    pub channels: Vec<Vec<f64>>,
    /// Imposed displacement per step (mm).
    pub displacement: Vec<f64>,
}

impl SignalSet {
    pub fn new(channels: Vec<Vec<f64>>, displacement: Vec<f64>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Argument("signal set needs at least one channel".into()));
        }
        let len = channels[0].len();
        if len < 3 {
            return Err(Error::Argument(format!(
                "channels must hold at least 3 samples, got {len}"
            )));
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Argument("all channels must share one length".into()));
        }
        if displacement.len() != len {
            return Err(Error::Argument(format!(
                "displacement series has {} samples, channels have {len}",
                displacement.len()
            )));
        }
        Ok(Self {
            channels,
            displacement,
        })
    }

    pub fn len(&self) -> usize {
        self.displacement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacement.is_empty()
    }
}

/// Detection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    /// Moving-average window (samples, odd). 1 disables smoothing, which is
    /// the configuration that preserves single-sample snap steps best.
    pub smoothing_window: usize,
    /// Event threshold as a fraction of the per-stroke maximum derivative.
    pub prominence_threshold: f64,
    /// Minimum sample spacing between events; 0 means 2 * smoothing_window.
    pub refractory_gap: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            smoothing_window: 1,
            prominence_threshold: 0.3,
            refractory_gap: 0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "smoothing window must be odd and >= 1, got {}",
                self.smoothing_window
            )));
        }
        if !(self.prominence_threshold > 0.0 && self.prominence_threshold < 1.0) {
            return Err(Error::Config(format!(
                "prominence threshold must lie in (0, 1), got {}",
                self.prominence_threshold
            )));
        }
        Ok(())
    }

    pub fn effective_refractory(&self) -> usize {
        if self.refractory_gap == 0 {
            2 * self.smoothing_window
        } else {
            self.refractory_gap
        }
    }
}

/// One detected snap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    /// 1-based channel (= cell) index.
    pub cell_id: usize,
    /// Sample index of the derivative peak.
    pub step: usize,
    /// Peak height in normalized units per step.
    pub magnitude: f64,
}

/// Min-max normalize each channel to [0, 1].
///
/// Constant channels cannot be scaled; all offending channels are reported.
pub fn normalize(signals: &SignalSet) -> Result<SignalSet> {
    let mut degenerate = Vec::new();
    let mut channels = Vec::with_capacity(signals.channels.len());
    for (i, channel) in signals.channels.iter().enumerate() {
        let lo = channel.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = channel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if !(span > 0.0) {
            degenerate.push(i + 1);
            channels.push(channel.clone());
            continue;
        }
        channels.push(channel.iter().map(|v| (v - lo) / span).collect());
    }
    if !degenerate.is_empty() {
        return Err(Error::DegenerateChannels(degenerate));
    }
    SignalSet::new(channels, signals.displacement.clone())
}

/// Centered moving average with edge truncation.
pub fn smooth(signals: &SignalSet, window: usize) -> Result<SignalSet> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "smoothing window must be odd and >= 1, got {window}"
        )));
    }
    let len = signals.len();
    if window > len {
        return Err(Error::Argument(format!(
            "window {window} exceeds series length {len}"
        )));
    }
    if window == 1 {
        return Ok(signals.clone());
    }
    let half = window / 2;
    let channels = signals
        .channels
        .iter()
        .map(|channel| {
            (0..len)
                .map(|i| {
                    let from = i.saturating_sub(half);
                    let to = (i + half + 1).min(len);
                    channel[from..to].iter().sum::<f64>() / (to - from) as f64
                })
                .collect()
        })
        .collect();
    SignalSet::new(channels, signals.displacement.clone())
}

/// Per-step first derivative: central differences inside, one-sided at the
/// ends. Output length equals input length.
pub fn derivative(signals: &SignalSet) -> Result<SignalSet> {
    let len = signals.len();
    if len < 3 {
        return Err(Error::Argument(format!(
            "derivative needs at least 3 samples, got {len}"
        )));
    }
    let diff = |series: &[f64]| {
        let mut d = vec![0.0; len];
        d[0] = series[1] - series[0];
        d[len - 1] = series[len - 1] - series[len - 2];
        for i in 1..len - 1 {
            d[i] = 0.5 * (series[i + 1] - series[i - 1]);
        }
        d
    };
    let channels = signals.channels.iter().map(|c| diff(c)).collect();
    SignalSet::new(channels, signals.displacement.clone())
}

/// Find snap events in a differentiated signal set.
///
/// The series is split into strokes wherever the displacement direction
/// changes. Within each stroke, candidates are interior local maxima of the
/// deployment-oriented derivative above `threshold * stroke maximum`;
/// winner-takes-all suppression keeps the strongest channel within each
/// refractory window, ties going to the lower channel id.
pub fn detect_events(signals: &SignalSet, config: &DetectionConfig) -> Result<Vec<DetectedEvent>> {
    config.validate()?;
    let len = signals.len();
    let refractory = config.effective_refractory();

    // displacement direction per sample
    let x = &signals.displacement;
    let mut dir = vec![0i8; len];
    dir[0] = sign(x[1] - x[0]);
    dir[len - 1] = sign(x[len - 1] - x[len - 2]);
    for i in 1..len - 1 {
        dir[i] = sign(x[i + 1] - x[i - 1]);
    }

    // maximal runs of constant non-zero direction
    let mut strokes: Vec<(usize, usize, i8)> = Vec::new();
    let mut start = 0usize;
    while start < len {
        let s = dir[start];
        let mut end = start + 1;
        while end < len && dir[end] == s {
            end += 1;
        }
        if s != 0 {
            strokes.push((start, end, s));
        }
        start = end;
    }

    let mut events = Vec::new();
    for (from, to, stroke_dir) in strokes {
        // deployment-oriented derivative: positive when plates move the way
        // this stroke drives them
        let oriented = |channel: usize, i: usize| -> f64 {
            -(stroke_dir as f64) * signals.channels[channel][i]
        };
        let mut candidates: Vec<DetectedEvent> = Vec::new();
        let mut stroke_max = 0.0f64;
        let lo = from.max(1);
        let hi = to.min(len - 1);
        for channel in 0..signals.channels.len() {
            for i in lo..hi {
                let v = oriented(channel, i);
                if v > 0.0 && v >= oriented(channel, i - 1) && v > oriented(channel, i + 1) {
                    candidates.push(DetectedEvent {
                        cell_id: channel + 1,
                        step: i,
                        magnitude: v,
                    });
                    stroke_max = stroke_max.max(v);
                }
            }
        }
        let threshold = config.prominence_threshold * stroke_max;
        candidates.retain(|c| c.magnitude > threshold && c.magnitude > 0.0);
        // strongest first; ties to the lower channel, then the earlier step
        candidates.sort_by(|a, b| {
            b.magnitude
                .partial_cmp(&a.magnitude)
                .unwrap()
                .then(a.cell_id.cmp(&b.cell_id))
                .then(a.step.cmp(&b.step))
        });
        let mut picked: Vec<DetectedEvent> = Vec::new();
        for cand in candidates {
            if picked
                .iter()
                .all(|p| p.step.abs_diff(cand.step) >= refractory)
            {
                picked.push(cand);
            }
        }
        events.extend(picked);
    }
    events.sort_by_key(|e| e.step);
    Ok(events)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Full pipeline: normalize, smooth, differentiate, detect.
pub fn run_pipeline(raw: &SignalSet, config: &DetectionConfig) -> Result<Vec<DetectedEvent>> {
    let normalized = normalize(raw)?;
    let smoothed = smooth(&normalized, config.smoothing_window)?;
    let diff = derivative(&smoothed)?;
    detect_events(&diff, config)
}

/// Ordered cell ids plus duplicate-cell anomalies for one stroke's events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub sequence: Vec<usize>,
    /// Cells claimed more than once within the stroke; the sequence is kept
    /// as detected.
    pub duplicate_cells: Vec<usize>,
}

impl SequenceSummary {
    pub fn is_anomalous(&self) -> bool {
        !self.duplicate_cells.is_empty()
    }
}

/// Project one stroke's events onto cell ids in temporal order.
pub fn sequence_from_events(events: &[DetectedEvent]) -> SequenceSummary {
    let mut ordered = events.to_vec();
    ordered.sort_by_key(|e| e.step);
    let sequence: Vec<usize> = ordered.iter().map(|e| e.cell_id).collect();
    let mut duplicate_cells: Vec<usize> = Vec::new();
    for (i, &cell) in sequence.iter().enumerate() {
        if sequence[..i].contains(&cell) && !duplicate_cells.contains(&cell) {
            duplicate_cells.push(cell);
        }
    }
    SequenceSummary {
        sequence,
        duplicate_cells,
    }
}

/// Comparison of detected events against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    /// Detected cell order equals the true order exactly.
    pub exact_sequence: bool,
    /// Fraction of truth events matched by a detection on the same cell
    /// within the step window. 1.0 when there are no truth events.
    pub hit_rate: f64,
    /// Detections not matched to any truth event.
    pub false_positives: usize,
}

/// Score detections against truth with a one-to-one step-window matching.
pub fn score_detection(
    detected: &[DetectedEvent],
    truth: &[TransitionEvent],
    window: usize,
) -> DetectionScore {
    let mut det_order = detected.to_vec();
    det_order.sort_by_key(|e| e.step);
    let mut truth_order = truth.to_vec();
    truth_order.sort_by_key(|e| e.step);

    let detected_cells: Vec<usize> = det_order.iter().map(|e| e.cell_id).collect();
    let truth_cells: Vec<usize> = truth_order.iter().map(|e| e.cell_id).collect();
    let exact_sequence = detected_cells == truth_cells;

    let mut used = vec![false; det_order.len()];
    let mut hits = 0usize;
    for t in &truth_order {
        let best = det_order
            .iter()
            .enumerate()
            .filter(|(i, d)| {
                !used[*i] && d.cell_id == t.cell_id && d.step.abs_diff(t.step) <= window
            })
            .min_by_key(|(_, d)| d.step.abs_diff(t.step));
        if let Some((i, _)) = best {
            used[i] = true;
            hits += 1;
        }
    }
    let hit_rate = if truth_order.is_empty() {
        1.0
    } else {
        hits as f64 / truth_order.len() as f64
    };
    DetectionScore {
        exact_sequence,
        hit_rate,
        false_positives: used.iter().filter(|u| !**u).count(),
    }
}
