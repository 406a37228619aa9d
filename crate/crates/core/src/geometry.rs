//! Cell and capacitor-plate geometry.
//!
//! Lengths are millimetres throughout; conversions to SI happen inside the
//! formulas that need them (see [`crate::sensing`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Curved-beam midline profile B(s) = (h/2)(1 - cos(2*pi*s/l)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProfile {
    /// Apex height h (mm).
    pub apex_height: f64,
    /// Wavelength parameter l (mm).
    pub wavelength: f64,
    /// End of the arclength parameter range (mm).
    pub arc_end: f64,
}

impl Default for BeamProfile {
    fn default() -> Self {
        Self {
            apex_height: 8.0,
            wavelength: 18.0,
            arc_end: 9.0,
        }
    }
}

impl BeamProfile {
    pub fn new(apex_height: f64, wavelength: f64, arc_end: f64) -> Result<Self> {
        let profile = Self {
            apex_height,
            wavelength,
            arc_end,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.apex_height > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::Config(format!(
                "beam profile needs positive h and l, got h={} l={}",
                self.apex_height, self.wavelength
            )));
        }
        if !(self.arc_end > 0.0 && self.arc_end <= self.wavelength) {
            return Err(Error::Config(format!(
                "arc_end must lie in (0, l], got {} with l={}",
                self.arc_end, self.wavelength
            )));
        }
        Ok(())
    }

    /// Profile height at arclength parameter `s`.
    pub fn height_at(&self, s: f64) -> Result<f64> {
        if !(0.0..=self.arc_end).contains(&s) {
            return Err(Error::Domain(format!(
                "s={} outside [0, {}]",
                s, self.arc_end
            )));
        }
        let phase = 2.0 * std::f64::consts::PI * s / self.wavelength;
        Ok(0.5 * self.apex_height * (1.0 - phase.cos()))
    }

    /// `n` uniformly spaced `(s, B(s))` samples over `[0, arc_end]`.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        if n < 2 {
            return Err(Error::Argument(format!("need at least 2 samples, got {n}")));
        }
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let s = self.arc_end * i as f64 / (n - 1) as f64;
            points.push((s, self.height_at(s)?));
        }
        Ok(points)
    }
}

/// One bistable cell's print geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub beam: BeamProfile,
    /// Out-of-plane depth (mm).
    pub thickness: f64,
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self {
            beam: BeamProfile::default(),
            thickness: 7.0,
        }
    }
}

impl CellGeometry {
    pub fn validate(&self) -> Result<()> {
        self.beam.validate()?;
        if !(self.thickness > 0.0) {
            return Err(Error::Config(format!(
                "cell thickness must be positive, got {}",
                self.thickness
            )));
        }
        Ok(())
    }
}

/// Parallel-plate capacitor geometry inside one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlateGeometry {
    /// Plate width (mm).
    pub width: f64,
    /// Plate height (mm).
    pub height: f64,
    /// Plate thickness (mm).
    pub plate_thickness: f64,
    /// Gap with the cell closed (mm).
    pub gap_closed: f64,
    /// Gap with the cell deployed (mm).
    pub gap_open: f64,
}

impl Default for PlateGeometry {
    fn default() -> Self {
        Self {
            width: 3.8,
            height: 7.3,
            plate_thickness: 0.4,
            gap_closed: 0.5,
            gap_open: 15.3,
        }
    }
}

impl PlateGeometry {
    pub fn new(
        width: f64,
        height: f64,
        plate_thickness: f64,
        gap_closed: f64,
        gap_open: f64,
    ) -> Result<Self> {
        let plates = Self {
            width,
            height,
            plate_thickness,
            gap_closed,
            gap_open,
        };
        plates.validate()?;
        Ok(plates)
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = self.width > 0.0
            && self.height > 0.0
            && self.plate_thickness > 0.0
            && self.gap_closed > 0.0
            && self.gap_open > 0.0;
        if !all_positive {
            return Err(Error::Config(format!("plate dimensions must be positive: {self:?}")));
        }
        if self.gap_open <= self.gap_closed {
            return Err(Error::Config(format!(
                "gap_open ({}) must exceed gap_closed ({})",
                self.gap_open, self.gap_closed
            )));
        }
        Ok(())
    }

    /// Plate area (mm^2).
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Travel between the two stable gaps (mm).
    pub fn stroke(&self) -> f64 {
        self.gap_open - self.gap_closed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_hits_known_points() {
        let beam = BeamProfile::default();
        assert_eq!(beam.height_at(0.0).unwrap(), 0.0);
        assert!((beam.height_at(4.5).unwrap() - 4.0).abs() < 1e-12);
        assert!((beam.height_at(9.0).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn profile_rejects_out_of_domain() {
        let beam = BeamProfile::default();
        assert!(beam.height_at(-0.1).is_err());
        assert!(beam.height_at(9.1).is_err());
    }

    #[test]
    fn sampling_endpoints_and_midpoint() {
        let beam = BeamProfile::default();
        let two = beam.sample(2).unwrap();
        assert_eq!(two[0], (0.0, 0.0));
        assert!((two[1].0 - 9.0).abs() < 1e-12 && (two[1].1 - 8.0).abs() < 1e-12);

        let three = beam.sample(3).unwrap();
        assert!((three[1].0 - 4.5).abs() < 1e-12);
        assert!((three[1].1 - 4.0).abs() < 1e-12);

        assert!(beam.sample(1).is_err());
    }

    #[test]
    fn sampled_heights_stay_in_band() {
        let beam = BeamProfile::default();
        for (s, b) in beam.sample(257).unwrap() {
            assert!((0.0..=8.0 + 1e-12).contains(&b), "B({s}) = {b}");
        }
    }

    #[test]
    fn profile_monotone_up_to_half_wavelength() {
        let beam = BeamProfile::default();
        let samples = beam.sample(1000).unwrap();
        for pair in samples.windows(2) {
            assert!(pair[1].1 >= pair[0].1 - 1e-12);
        }
        // s = l/2 reaches the full apex exactly
        let beam = BeamProfile::new(8.0, 18.0, 9.0).unwrap();
        assert!((beam.height_at(9.0).unwrap() - beam.apex_height).abs() < 1e-12);
    }

    #[test]
    fn cell_geometry_defaults_validate() {
        let cell = CellGeometry::default();
        assert!((cell.thickness - 7.0).abs() < 1e-12);
        cell.validate().unwrap();
        let thin = CellGeometry {
            thickness: 0.0,
            ..Default::default()
        };
        assert!(thin.validate().is_err());
    }

    #[test]
    fn stroke_from_gap_states() {
        let plates = PlateGeometry::default();
        assert!((plates.stroke() - 14.8).abs() < 1e-12);
        assert!((plates.area() - 27.74).abs() < 1e-12);

        let unit = PlateGeometry::new(3.8, 7.3, 0.4, 0.5, 1.5).unwrap();
        assert!((unit.stroke() - 1.0).abs() < 1e-12);

        assert!(PlateGeometry::new(3.8, 7.3, 0.4, 1.5, 0.5).is_err());
    }
}
