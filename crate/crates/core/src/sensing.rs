//! Parallel-plate capacitance model for the integrated cell sensors.

use crate::error::{Error, Result};
use crate::geometry::PlateGeometry;
use crate::mechanics::ChainState;

/// Vacuum permittivity (F/m), CODATA 2018.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Minimum effective gap (mm): the vinyl layer keeps the plates apart.
pub const MIN_GAP_MM: f64 = 0.1;

/// Electrical model of the sensor array.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitorModel {
    pub plates: PlateGeometry,
    /// Relative permittivity of the gap medium.
    pub rel_permittivity: f64,
    /// Additive per-channel offset (pF).
    pub parasitic_pf: f64,
    /// Channel mixing matrix; identity diagonal, small symmetric off-diagonal
    /// terms for mutual capacitance and wiring pickup.
    pub coupling: Vec<Vec<f64>>,
}

impl CapacitorModel {
    /// Model with a uniform off-diagonal coupling `alpha` for `channels`
    /// sensors.
    pub fn uniform(
        plates: PlateGeometry,
        channels: usize,
        rel_permittivity: f64,
        parasitic_pf: f64,
        alpha: f64,
    ) -> Result<Self> {
        let mut coupling = vec![vec![alpha; channels]; channels];
        for (i, row) in coupling.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let model = Self {
            plates,
            rel_permittivity,
            parasitic_pf,
            coupling,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.plates.validate()?;
        if !(self.rel_permittivity >= 1.0) {
            return Err(Error::Config(format!(
                "relative permittivity must be >= 1, got {}",
                self.rel_permittivity
            )));
        }
        if !(self.parasitic_pf >= 0.0) {
            return Err(Error::Config(format!(
                "parasitic capacitance must be >= 0, got {}",
                self.parasitic_pf
            )));
        }
        let n = self.coupling.len();
        for (i, row) in self.coupling.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config("coupling matrix must be square".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if i == j && v != 1.0 {
                    return Err(Error::Config(format!(
                        "coupling diagonal must be 1, got {v} at {i}"
                    )));
                }
                if i != j && !(0.0..=0.2).contains(&v) {
                    return Err(Error::Config(format!(
                        "off-diagonal coupling must lie in [0, 0.2], got {v} at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.coupling.len()
    }
}

/// Per-channel capacitance readings at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    /// Capacitance per channel (pF).
    pub capacitance: Vec<f64>,
    pub step: usize,
}

/// Plate gap for a cell elongation `x`, clamped at the vinyl floor.
pub fn gap_from_displacement(plates: &PlateGeometry, x: f64) -> f64 {
    (plates.gap_closed + x).max(MIN_GAP_MM)
}

/// Ideal parallel-plate capacitance at `gap` millimetres (pF).
pub fn plate_capacitance(model: &CapacitorModel, gap: f64) -> Result<f64> {
    if gap < MIN_GAP_MM - 1e-12 {
        return Err(Error::Domain(format!(
            "gap {gap} mm below the {MIN_GAP_MM} mm floor"
        )));
    }
    // eps0 * eps_r * (A mm^2 -> m^2) / (g mm -> m), expressed in pF
    Ok(VACUUM_PERMITTIVITY * self_area(model) / gap * 1e9)
}

fn self_area(model: &CapacitorModel) -> f64 {
    model.rel_permittivity * model.plates.area()
}

/// Coupled per-channel capacitances for a chain state.
pub fn sensor_frame(model: &CapacitorModel, state: &ChainState, step: usize) -> Result<SensorFrame> {
    sensor_frame_from(model, &state.cell_displacement, step)
}

/// Same as [`sensor_frame`] from a raw displacement vector.
pub fn sensor_frame_from(
    model: &CapacitorModel,
    displacements: &[f64],
    step: usize,
) -> Result<SensorFrame> {
    let n = model.channels();
    if displacements.len() != n {
        return Err(Error::Argument(format!(
            "{} cells but the coupling matrix has {} channels",
            displacements.len(),
            n
        )));
    }
    let ideal: Vec<f64> = displacements
        .iter()
        .map(|&x| plate_capacitance(model, gap_from_displacement(&model.plates, x)))
        .collect::<Result<_>>()?;
    let capacitance = model
        .coupling
        .iter()
        .map(|row| {
            row.iter().zip(&ideal).map(|(k, c)| k * c).sum::<f64>() + model.parasitic_pf
        })
        .collect();
    Ok(SensorFrame { capacitance, step })
}

/// Undo the coupling matrix and parasitic offset: recover the per-cell ideal
/// capacitances from measured channel values. Gaussian elimination with
/// partial pivoting; the default matrices are diagonally dominant.
pub fn decouple_frame(model: &CapacitorModel, measured: &[f64]) -> Result<Vec<f64>> {
    let n = model.channels();
    if measured.len() != n {
        return Err(Error::Argument(format!(
            "{} channel values for a {n}-channel model",
            measured.len()
        )));
    }
    let mut a: Vec<Vec<f64>> = model.coupling.clone();
    let mut b: Vec<f64> = measured.iter().map(|v| v - model.parasitic_pf).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::Config("coupling matrix is singular".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (head, tail) = a.split_at_mut(row);
            for (value, &pivot_value) in tail[0][col..].iter_mut().zip(&head[col][col..]) {
                *value -= f * pivot_value;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}
