//! Reduced-order bistable cell law and the quasi-static chain solver.
//!
//! Each cell is modelled by a one-dimensional force law F(x) with stable
//! equilibria at x = 0 (closed) and x = stroke (deployed), an unstable
//! equilibrium at x = unstable_fraction * stroke, a force peak on the rising
//! closed branch and a shallow valley on the descending branch. The law is
//! piecewise, C1-continuous up to a negligible slope step at the valley knot,
//! and has a closed-form potential, so force/energy consistency is exact.
//!
//! Segments (t, s, u are the per-segment normalized coordinates):
//!   A  x <= x_peak         F = P * t(2 - t)                  parabolic rise,
//!                          extends to x < 0 as a stiffening compression tail
//!   B  x_peak < x <= z     F = P * cos(pi/2 * s)             descent to the
//!                          unstable zero at z = unstable_fraction * stroke
//!   C  z < x <= x_valley   F = -Fv * (1 - (1-s)^2 e^{k s})   slope-matched
//!                          approach to the valley floor
//!   D  x > x_valley        F = Fv * (-1 + sinh(L u)/sinh L)  flat valley
//!                          rising through zero exactly at x = stroke, then
//!                          stiffening
//!
//! Peak height P = peak_force * (1 + imperfection) and valley depth
//! Fv = VALLEY_RATIO * P scale with the cell's imperfection; the knot
//! positions depend only on geometry, so every cell snaps from the same
//! displacement regardless of its strength.

mod chain;
mod oracle;

pub use chain::{solve_chain, step_load, run_load_program, LoadProgram, LoadRun};
pub use oracle::{brute_force_equilibria, GridMinimum};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Peak position as a fraction of the stroke.
pub const PEAK_POS_FRAC: f64 = 0.2;
/// Valley position as a fraction of the stroke.
pub const VALLEY_POS_FRAC: f64 = 0.5;
/// Valley depth as a fraction of the effective peak force.
pub const VALLEY_RATIO: f64 = 0.15;
/// Sharpness of the open-branch rise (dimensionless sinh argument).
pub const OPEN_BRANCH_SHARPNESS: f64 = 10.0;

/// Default unstable-equilibrium fraction.
pub const DEFAULT_UNSTABLE_FRACTION: f64 = 0.4;
/// Default nominal peak force (N); puts the strongest default chain cell
/// near the 7 N envelope.
pub const DEFAULT_PEAK_FORCE_N: f64 = 6.6;
/// Default stroke, equal to the plate travel (mm).
pub const DEFAULT_STROKE_MM: f64 = 14.8;

/// Displacement tolerance for chain solves (mm).
pub const TOL_X: f64 = 1e-6;
/// Force tolerance for chain solves (N).
pub const TOL_F: f64 = 1e-6;
/// Iteration cap for bracketed solves.
pub const MAX_BISECTIONS: usize = 200;

/// One cell's reduced-order parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// 1-based cell index within the chain.
    pub id: usize,
    /// Distance between the two stable states (mm).
    pub stroke: f64,
    /// Unstable-equilibrium position as a fraction of the stroke.
    pub unstable_fraction: f64,
    /// Nominal peak force (N).
    pub peak_force: f64,
    /// Multiplicative strength perturbation; effective peak is
    /// peak_force * (1 + imperfection).
    pub imperfection: f64,
}

impl CellParams {
    pub fn new(
        id: usize,
        stroke: f64,
        unstable_fraction: f64,
        peak_force: f64,
        imperfection: f64,
    ) -> Result<Self> {
        let cell = Self {
            id,
            stroke,
            unstable_fraction,
            peak_force,
            imperfection,
        };
        cell.validate()?;
        Ok(cell)
    }

    /// Default-shaped cell with a given id and imperfection.
    pub fn with_imperfection(id: usize, imperfection: f64) -> Result<Self> {
        Self::new(
            id,
            DEFAULT_STROKE_MM,
            DEFAULT_UNSTABLE_FRACTION,
            DEFAULT_PEAK_FORCE_N,
            imperfection,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stroke > 0.0) {
            return Err(Error::Config(format!(
                "cell {}: stroke must be positive, got {}",
                self.id, self.stroke
            )));
        }
        if !(self.unstable_fraction > PEAK_POS_FRAC
            && self.unstable_fraction < VALLEY_POS_FRAC)
        {
            return Err(Error::Config(format!(
                "cell {}: unstable_fraction must lie in ({}, {}), got {}",
                self.id, PEAK_POS_FRAC, VALLEY_POS_FRAC, self.unstable_fraction
            )));
        }
        if !(self.peak_force > 0.0) || !(self.effective_peak() > 0.0) {
            return Err(Error::Config(format!(
                "cell {}: effective peak force must be positive (peak {}, imperfection {})",
                self.id, self.peak_force, self.imperfection
            )));
        }
        Ok(())
    }

    /// Peak force including the imperfection factor (N).
    pub fn effective_peak(&self) -> f64 {
        self.peak_force * (1.0 + self.imperfection)
    }

    /// Valley force, negative (N).
    pub fn valley_force(&self) -> f64 {
        -VALLEY_RATIO * self.effective_peak()
    }

    fn knots(&self) -> (f64, f64, f64) {
        (
            PEAK_POS_FRAC * self.stroke,
            self.unstable_fraction * self.stroke,
            VALLEY_POS_FRAC * self.stroke,
        )
    }

    /// Exponent of segment C, chosen so the slope matches segment B at the
    /// unstable zero: k = 2 - (pi/2)(v - beta) / ((beta - p) * rho).
    fn valley_exponent(&self) -> f64 {
        2.0 - std::f64::consts::FRAC_PI_2 * (VALLEY_POS_FRAC - self.unstable_fraction)
            / ((self.unstable_fraction - PEAK_POS_FRAC) * VALLEY_RATIO)
    }

    /// Restoring force at cell elongation `x` (N). Negative x compresses the
    /// closed cell.
    pub fn force(&self, x: f64) -> f64 {
        let (xp, z, xv) = self.knots();
        let peak = self.effective_peak();
        let fv = VALLEY_RATIO * peak;
        if x <= xp {
            let t = x / xp;
            peak * t * (2.0 - t)
        } else if x <= z {
            let s = (x - xp) / (z - xp);
            peak * (std::f64::consts::FRAC_PI_2 * s).cos()
        } else if x <= xv {
            let s = (x - z) / (xv - z);
            let k = self.valley_exponent();
            -fv * (1.0 - (1.0 - s).powi(2) * (k * s).exp())
        } else {
            let u = (x - xv) / (self.stroke - xv);
            let lam = OPEN_BRANCH_SHARPNESS;
            fv * ((lam * u).sinh() / lam.sinh() - 1.0)
        }
    }

    /// Elastic potential relative to the closed state (mJ = N*mm).
    pub fn energy(&self, x: f64) -> f64 {
        let (xp, z, xv) = self.knots();
        let peak = self.effective_peak();
        let fv = VALLEY_RATIO * peak;
        let k = self.valley_exponent();
        let lam = OPEN_BRANCH_SHARPNESS;

        // antiderivative of (1-s)^2 e^{k s} in s
        let c_int = |s: f64| {
            let r = 1.0 - s;
            (k * s).exp() * (r * r / k + 2.0 * r / (k * k) + 2.0 / (k * k * k))
        };

        let e_a = |x: f64| {
            let t = x / xp;
            peak * xp * (t * t - t * t * t / 3.0)
        };
        if x <= xp {
            return e_a(x);
        }
        let ea = e_a(xp);
        let e_b = |x: f64| {
            let s = (x - xp) / (z - xp);
            ea + peak * (z - xp) * std::f64::consts::FRAC_2_PI
                * (std::f64::consts::FRAC_PI_2 * s).sin()
        };
        if x <= z {
            return e_b(x);
        }
        let eb = e_b(z);
        let e_c = |x: f64| {
            let s = (x - z) / (xv - z);
            eb - fv * (xv - z) * (s - c_int(s) + c_int(0.0))
        };
        if x <= xv {
            return e_c(x);
        }
        let ec = e_c(xv);
        let u = (x - xv) / (self.stroke - xv);
        ec + fv * (self.stroke - xv) * (-u + ((lam * u).cosh() - 1.0) / (lam * lam.sinh()))
    }
}

/// Branch of the force-displacement curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Rising branch through the closed state (x <= x_peak).
    ClosedRising,
    /// Descending branch between the limit points; not a stable chain state.
    Unstable,
    /// Rising branch through the deployed state (x >= x_valley).
    OpenRising,
}

/// Limit points of one cell's curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchLimits {
    pub x_peak: f64,
    pub x_valley: f64,
    pub peak_force: f64,
    pub valley_force: f64,
}

/// Limit points; exact by construction of the law.
pub fn branch_limits(cell: &CellParams) -> BranchLimits {
    let (xp, _, xv) = cell.knots();
    BranchLimits {
        x_peak: xp,
        x_valley: xv,
        peak_force: cell.effective_peak(),
        valley_force: cell.valley_force(),
    }
}

/// Displacement on a monotone branch at force `f`.
///
/// Closed branch accepts any f <= peak; open branch any f >= valley.
pub fn invert_branch(cell: &CellParams, branch: Branch, f: f64) -> Result<f64> {
    let (xp, _, xv) = cell.knots();
    let peak = cell.effective_peak();
    let fv = VALLEY_RATIO * peak;
    match branch {
        Branch::Unstable => Err(Error::Argument(format!(
            "cell {}: the unstable branch has no admissible inverse",
            cell.id
        ))),
        Branch::ClosedRising => {
            if f > peak + TOL_F {
                return Err(Error::Range(format!(
                    "cell {}: force {} exceeds peak {}",
                    cell.id, f, peak
                )));
            }
            // F = P t(2-t) with t <= 1  =>  t = 1 - sqrt(1 - F/P)
            let t = 1.0 - (1.0 - (f / peak).min(1.0)).sqrt();
            Ok(t * xp)
        }
        Branch::OpenRising => {
            if f < -fv - TOL_F {
                return Err(Error::Range(format!(
                    "cell {}: force {} below valley {}",
                    cell.id,
                    f,
                    -fv
                )));
            }
            let lam = OPEN_BRANCH_SHARPNESS;
            let arg = lam.sinh() * (1.0 + (f / fv).max(-1.0));
            let u = arg.asinh() / lam;
            Ok(xv + u * (cell.stroke - xv))
        }
    }
}

/// State of the serial chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Imposed total displacement (mm).
    pub total_displacement: f64,
    /// Per-cell elongations (mm).
    pub cell_displacement: Vec<f64>,
    /// Branch each cell rests on.
    pub branch: Vec<Branch>,
    /// Common chain force (N).
    pub force: f64,
}

impl ChainState {
    /// Total stored elastic energy (mJ).
    pub fn total_energy(&self, cells: &[CellParams]) -> f64 {
        cells
            .iter()
            .zip(&self.cell_displacement)
            .map(|(c, &x)| c.energy(x))
            .sum()
    }
}

/// Direction of a snap event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Deploy,
    Collapse,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Deploy => write!(f, "DEPLOY"),
            Direction::Collapse => write!(f, "COLLAPSE"),
        }
    }
}

/// Ground-truth snap of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub cell_id: usize,
    pub direction: Direction,
    /// Imposed displacement at which the event fired (mm).
    pub displacement: f64,
    /// Chain force just before the jump: the limit force of the snapping
    /// cell (N).
    pub force_before: f64,
    pub step: usize,
    /// Energy released by the jump (mJ); includes the step's quadrature
    /// share, see [`step_load`].
    pub energy_released: f64,
}
