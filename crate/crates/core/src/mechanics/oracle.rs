//! Grid-based energy oracle, independent of the force-balance solver.
//!
//! Grids the constrained configuration space {x_i >= -0.2 * stroke_i,
//! sum x_i = X} and returns every grid-local minimum of the total elastic
//! energy. Used to cross-check [`super::solve_chain`] states.

use crate::error::{Error, Result};

use super::CellParams;

/// One local minimum of the gridded energy landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub displacements: Vec<f64>,
    pub energy: f64,
}

const MAX_GRID_POINTS: usize = 20_000_000;

/// Enumerate energy minima on the displacement simplex at total displacement
/// `x_total`, sampling `grid_n` points per free axis.
pub fn brute_force_equilibria(
    cells: &[CellParams],
    x_total: f64,
    grid_n: usize,
) -> Result<Vec<GridMinimum>> {
    if cells.is_empty() {
        return Err(Error::Argument("need at least one cell".into()));
    }
    if grid_n < 100 {
        return Err(Error::Argument(format!(
            "grid resolution must be at least 100, got {grid_n}"
        )));
    }
    let free = cells.len() - 1;
    if free > 0 && grid_n.pow(free as u32) > MAX_GRID_POINTS {
        return Err(Error::Resource(format!(
            "{grid_n}^{free} grid points exceed the {MAX_GRID_POINTS} budget"
        )));
    }

    let lows: Vec<f64> = cells.iter().map(|c| -0.2 * c.stroke).collect();
    if free == 0 {
        // the constraint pins the single cell
        return Ok(vec![GridMinimum {
            displacements: vec![x_total],
            energy: cells[0].energy(x_total),
        }]);
    }

    // per-axis ranges: everything the constraint and the floors allow
    let low_sum: f64 = lows.iter().sum();
    let highs: Vec<f64> = lows
        .iter()
        .map(|lo| x_total - (low_sum - lo))
        .collect();
    let coord = |axis: usize, i: usize| {
        lows[axis] + (highs[axis] - lows[axis]) * i as f64 / (grid_n - 1) as f64
    };

    // energy over the grid; points whose dependent coordinate violates its
    // floor are marked unusable
    let total_points = grid_n.pow(free as u32);
    let mut energy = vec![f64::INFINITY; total_points];
    let mut displacement_last = vec![0.0f64; total_points];
    let mut index = vec![0usize; free];
    for flat in 0..total_points {
        let mut rem = flat;
        for axis in (0..free).rev() {
            index[axis] = rem % grid_n;
            rem /= grid_n;
        }
        let mut sum = 0.0;
        let mut e = 0.0;
        for axis in 0..free {
            let x = coord(axis, index[axis]);
            sum += x;
            e += cells[axis].energy(x);
        }
        let x_last = x_total - sum;
        if x_last < lows[free] {
            continue;
        }
        displacement_last[flat] = x_last;
        energy[flat] = e + cells[free].energy(x_last);
    }

    // neighborhood test over all +-1 offsets
    let mut offsets: Vec<Vec<isize>> = vec![vec![]];
    for _ in 0..free {
        let mut next = Vec::new();
        for base in &offsets {
            for d in [-1isize, 0, 1] {
                let mut o = base.clone();
                o.push(d);
                next.push(o);
            }
        }
        offsets = next;
    }
    offsets.retain(|o| o.iter().any(|&d| d != 0));

    let mut minima = Vec::new();
    for flat in 0..total_points {
        if !energy[flat].is_finite() {
            continue;
        }
        let mut rem = flat;
        for axis in (0..free).rev() {
            index[axis] = rem % grid_n;
            rem /= grid_n;
        }
        let mut is_min = true;
        'offsets: for offset in &offsets {
            let mut neighbor = 0usize;
            for axis in 0..free {
                let i = index[axis] as isize + offset[axis];
                if i < 0 || i >= grid_n as isize {
                    continue 'offsets; // outside the grid counts as +inf
                }
                neighbor = neighbor * grid_n + i as usize;
            }
            if energy[neighbor] < energy[flat] {
                is_min = false;
                break;
            }
        }
        if is_min {
            let mut displacements: Vec<f64> =
                (0..free).map(|axis| coord(axis, index[axis])).collect();
            displacements.push(displacement_last[flat]);
            minima.push(GridMinimum {
                displacements,
                energy: energy[flat],
            });
        }
    }
    Ok(minima)
}
