//! Series force balance and displacement-controlled stepping.

use crate::error::{Error, Result};
use crate::trace::Trace;

use super::{
    invert_branch, Branch, CellParams, ChainState, Direction, TransitionEvent, MAX_BISECTIONS,
    TOL_X,
};

/// Displacement program: piecewise-linear ramps from X = 0 through `targets`,
/// discretized so no step exceeds `step_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    pub targets: Vec<f64>,
    pub step_size: f64,
}

impl LoadProgram {
    pub fn new(targets: Vec<f64>, step_size: f64) -> Result<Self> {
        if !(step_size > 0.0) {
            return Err(Error::Argument(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        if targets.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Argument(format!(
                "targets must be finite and non-negative: {targets:?}"
            )));
        }
        Ok(Self { targets, step_size })
    }

    /// Single pull 0 -> x_max.
    pub fn single_pull(x_max: f64, step_size: f64) -> Result<Self> {
        Self::new(vec![x_max], step_size)
    }

    /// `cycles` pull/return cycles 0 -> x_max -> 0.
    pub fn cyclic(x_max: f64, cycles: usize, step_size: f64) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::Argument("cyclic program needs at least one cycle".into()));
        }
        let mut targets = Vec::with_capacity(2 * cycles);
        for _ in 0..cycles {
            targets.push(x_max);
            targets.push(0.0);
        }
        Self::new(targets, step_size)
    }
}

/// Output of [`run_load_program`].
#[derive(Debug, Clone)]
pub struct LoadRun {
    pub trace: Trace,
    pub events: Vec<TransitionEvent>,
    pub final_state: ChainState,
    /// Total energy released across all snaps (mJ).
    pub dissipated: f64,
}

/// Sum of branch inverses at common force `f`.
fn chain_span(cells: &[CellParams], branches: &[Branch], f: f64) -> Result<f64> {
    let mut sum = 0.0;
    for (cell, &branch) in cells.iter().zip(branches) {
        sum += invert_branch(cell, branch, f)?;
    }
    Ok(sum)
}

/// Equilibrium of the chain at total displacement `x_total` under a fixed
/// branch assignment. Returns `None` when no common force within every
/// branch's admissible range reaches `x_total`.
pub fn solve_chain(
    cells: &[CellParams],
    branches: &[Branch],
    x_total: f64,
) -> Result<Option<ChainState>> {
    if cells.is_empty() || cells.len() != branches.len() {
        return Err(Error::Argument(format!(
            "chain of {} cells with {} branch labels",
            cells.len(),
            branches.len()
        )));
    }
    if branches.contains(&Branch::Unstable) {
        return Err(Error::Argument(
            "stable chain states use only the rising branches".into(),
        ));
    }

    let f_cap = cells
        .iter()
        .zip(branches)
        .filter(|(_, &b)| b == Branch::ClosedRising)
        .map(|(c, _)| c.effective_peak())
        .fold(f64::INFINITY, f64::min);
    let f_floor = cells
        .iter()
        .zip(branches)
        .filter(|(_, &b)| b == Branch::OpenRising)
        .map(|(c, _)| c.valley_force())
        .fold(f64::NEG_INFINITY, f64::max);
    if f_floor > f_cap {
        return Ok(None);
    }

    // upper bracket end
    let mut hi = if f_cap.is_finite() {
        if chain_span(cells, branches, f_cap)? < x_total - TOL_X {
            return Ok(None);
        }
        f_cap
    } else {
        let mut hi = 1.0;
        while chain_span(cells, branches, hi)? < x_total {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Internal("force bracket expansion diverged".into()));
            }
        }
        hi
    };
    // lower bracket end
    let mut lo = if f_floor.is_finite() {
        if chain_span(cells, branches, f_floor)? > x_total + TOL_X {
            return Ok(None);
        }
        f_floor
    } else {
        let mut lo = hi.min(0.0) - 1.0;
        while chain_span(cells, branches, lo)? > x_total {
            lo = 2.0 * lo - 1.0;
            if lo < -1e12 {
                return Err(Error::Internal("force bracket expansion diverged".into()));
            }
        }
        lo
    };

    let mut force = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        force = 0.5 * (lo + hi);
        let span = chain_span(cells, branches, force)?;
        if (span - x_total).abs() < 0.5 * TOL_X {
            break;
        }
        if span < x_total {
            lo = force;
        } else {
            hi = force;
        }
    }

    let cell_displacement: Vec<f64> = cells
        .iter()
        .zip(branches)
        .map(|(c, &b)| invert_branch(c, b, force))
        .collect::<Result<_>>()?;
    Ok(Some(ChainState {
        total_displacement: x_total,
        cell_displacement,
        branch: branches.to_vec(),
        force,
    }))
}

/// Advance the chain to `x_new`, snapping branches as limit points are
/// passed. Loading snaps the weakest closed cell open (DEPLOY); unloading
/// snaps the open cell with the highest valley force closed (COLLAPSE). Ties
/// go to the lowest cell id. Snap energy is charged against the step's work
/// balance, so each event carries the energy released by its jump up to one
/// step of quadrature error.
pub fn step_load(
    state: &ChainState,
    cells: &[CellParams],
    x_new: f64,
    step: usize,
) -> Result<(ChainState, Vec<TransitionEvent>)> {
    let loading = x_new >= state.total_displacement;
    let mut branches = state.branch.clone();
    let mut events: Vec<TransitionEvent> = Vec::new();

    let mut solved = None;
    for _attempt in 0..(2 * cells.len() + 2) {
        if let Some(next) = solve_chain(cells, &branches, x_new)? {
            solved = Some(next);
            break;
        }
        if loading {
            let snapping = cells
                .iter()
                .zip(branches.iter())
                .filter(|(_, &b)| b == Branch::ClosedRising)
                .map(|(c, _)| c)
                .min_by(|a, b| {
                    a.effective_peak()
                        .partial_cmp(&b.effective_peak())
                        .unwrap()
                        .then(a.id.cmp(&b.id))
                })
                .ok_or_else(|| {
                    Error::Internal(format!(
                        "no stable branch assignment reaches X = {x_new} mm; the chain is too \
                         short to hold one deployed cell quasi-statically"
                    ))
                })?;
            let idx = cells.iter().position(|c| c.id == snapping.id).unwrap();
            branches[idx] = Branch::OpenRising;
            events.push(TransitionEvent {
                cell_id: snapping.id,
                direction: Direction::Deploy,
                displacement: x_new,
                force_before: snapping.effective_peak(),
                step,
                energy_released: 0.0,
            });
        } else {
            let snapping = cells
                .iter()
                .zip(branches.iter())
                .filter(|(_, &b)| b == Branch::OpenRising)
                .map(|(c, _)| c)
                .max_by(|a, b| {
                    a.valley_force()
                        .partial_cmp(&b.valley_force())
                        .unwrap()
                        .then(b.id.cmp(&a.id))
                })
                .ok_or_else(|| {
                    Error::Internal(format!(
                        "no stable branch assignment reaches X = {x_new} mm on unloading"
                    ))
                })?;
            let idx = cells.iter().position(|c| c.id == snapping.id).unwrap();
            branches[idx] = Branch::ClosedRising;
            events.push(TransitionEvent {
                cell_id: snapping.id,
                direction: Direction::Collapse,
                displacement: x_new,
                force_before: snapping.valley_force(),
                step,
            energy_released: 0.0,
            });
        }
    }
    let next = solved.ok_or_else(|| {
        Error::Internal(format!(
            "chain did not stabilize after {} snaps at X = {x_new} mm",
            2 * cells.len() + 2
        ))
    })?;

    if !events.is_empty() {
        let work = 0.5 * (state.force + next.force) * (x_new - state.total_displacement);
        let released = state.total_energy(cells) + work - next.total_energy(cells);
        let share = released / events.len() as f64;
        for event in &mut events {
            event.energy_released = share;
        }
    }
    Ok((next, events))
}

/// Run the full displacement program from the closed rest state.
pub fn run_load_program(cells: &[CellParams], program: &LoadProgram) -> Result<LoadRun> {
    for cell in cells {
        cell.validate()?;
    }
    let branches = vec![Branch::ClosedRising; cells.len()];
    let mut state = solve_chain(cells, &branches, 0.0)?
        .ok_or_else(|| Error::Internal("rest state must be solvable".into()))?;

    let mut trace = Trace::with_cells(cells.len());
    let mut push_row = |s: &ChainState| {
        trace.displacement.push(s.total_displacement);
        trace.force.push(s.force);
        for (column, &x) in trace.cell_displacement.iter_mut().zip(&s.cell_displacement) {
            column.push(x);
        }
    };
    push_row(&state);

    let mut events = Vec::new();
    let mut dissipated = 0.0;
    let mut step = 0usize;
    let mut x_from = 0.0;
    for &target in &program.targets {
        let span = target - x_from;
        let n = ((span.abs() / program.step_size).ceil() as usize).max(if span == 0.0 {
            0
        } else {
            1
        });
        for j in 1..=n {
            step += 1;
            // multiplicative grid: stroke endpoints land exactly on the
            // targets and repeated strokes reuse identical f64 values
            let x = x_from + span * (j as f64 / n as f64);
            let (next, step_events) = step_load(&state, cells, x, step)?;
            dissipated += step_events.iter().map(|e| e.energy_released).sum::<f64>();
            events.extend(step_events);
            state = next;
            push_row(&state);
        }
        x_from = target;
    }

    Ok(LoadRun {
        trace,
        events,
        final_state: state,
        dissipated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::branch_limits;

    fn replica_cells() -> Vec<CellParams> {
        [0.02, -0.06, -0.02, 0.06]
            .iter()
            .enumerate()
            .map(|(i, &eta)| CellParams::with_imperfection(i + 1, eta).unwrap())
            .collect()
    }

    #[test]
    fn rest_state_is_trivial() {
        let cells = replica_cells();
        let branches = vec![Branch::ClosedRising; 4];
        let state = solve_chain(&cells, &branches, 0.0).unwrap().unwrap();
        assert!(state.force.abs() < 1e-6);
        for &x in &state.cell_displacement {
            assert!(x.abs() < 1e-6);
        }
    }

    #[test]
    fn fully_open_chain_at_full_stroke_is_relaxed() {
        let cells = replica_cells();
        let branches = vec![Branch::OpenRising; 4];
        let x_total: f64 = cells.iter().map(|c| c.stroke).sum();
        let state = solve_chain(&cells, &branches, x_total).unwrap().unwrap();
        assert!(state.force.abs() < 1e-6);
        for (cell, &x) in cells.iter().zip(&state.cell_displacement) {
            assert!((x - cell.stroke).abs() < 1e-5);
        }
    }

    #[test]
    fn identical_cells_split_evenly() {
        let cells = vec![
            CellParams::with_imperfection(1, 0.0).unwrap(),
            CellParams::with_imperfection(2, 0.0).unwrap(),
        ];
        let branches = vec![Branch::ClosedRising; 2];
        let state = solve_chain(&cells, &branches, 1.5).unwrap().unwrap();
        assert!((state.cell_displacement[0] - 0.75).abs() < 1e-6);
        assert!((state.cell_displacement[1] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn solve_chain_respects_residual_tolerances() {
        let cells = replica_cells();
        let branches = vec![
            Branch::OpenRising,
            Branch::ClosedRising,
            Branch::ClosedRising,
            Branch::ClosedRising,
        ];
        for x in [12.0, 14.0, 16.0, 20.0] {
            let state = solve_chain(&cells, &branches, x).unwrap().unwrap();
            let sum: f64 = state.cell_displacement.iter().sum();
            assert!((sum - x).abs() < TOL_X, "X residual {}", (sum - x).abs());
            for (cell, &xi) in cells.iter().zip(&state.cell_displacement) {
                assert!((cell.force(xi) - state.force).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn infeasible_when_past_the_weakest_peak() {
        let cells = replica_cells();
        let branches = vec![Branch::ClosedRising; 4];
        // all-closed span is capped by the weakest cell's peak
        let at_cap = solve_chain(&cells, &branches, 60.0).unwrap();
        assert!(at_cap.is_none());
    }

    #[test]
    fn unstable_assignment_is_rejected() {
        let cells = replica_cells();
        let mut branches = vec![Branch::ClosedRising; 4];
        branches[1] = Branch::Unstable;
        assert!(solve_chain(&cells, &branches, 1.0).is_err());
    }

    #[test]
    fn replica_pull_deploy_order() {
        let cells = replica_cells();
        let program = LoadProgram::single_pull(4.0 * 14.8 + 2.0, 0.01).unwrap();
        let run = run_load_program(&cells, &program).unwrap();
        let order: Vec<usize> = run
            .events
            .iter()
            .filter(|e| e.direction == Direction::Deploy)
            .map(|e| e.cell_id)
            .collect();
        assert_eq!(order, vec![2, 3, 1, 4]);
        assert_eq!(run.events.len(), 4);
        assert!(run.dissipated > 0.0);
    }

    #[test]
    fn identical_cells_snap_in_id_order() {
        let cells: Vec<CellParams> = (1..=4)
            .map(|id| CellParams::with_imperfection(id, 0.0).unwrap())
            .collect();
        let program = LoadProgram::single_pull(4.0 * 14.8 + 2.0, 0.02).unwrap();
        let run = run_load_program(&cells, &program).unwrap();
        let order: Vec<usize> = run.events.iter().map(|e| e.cell_id).collect();
        assert_eq!(order, vec![1, 2, 3, 4]);
    }

    #[test]
    fn no_motion_no_events() {
        let cells = replica_cells();
        let branches = vec![Branch::ClosedRising; 4];
        let state = solve_chain(&cells, &branches, 3.0).unwrap().unwrap();
        let (next, events) = step_load(&state, &cells, 3.0, 7).unwrap();
        assert!(events.is_empty());
        assert_eq!(next.force, state.force);
    }

    #[test]
    fn short_pull_stays_on_first_branch() {
        let cells = replica_cells();
        let program = LoadProgram::single_pull(4.0, 0.01).unwrap();
        let run = run_load_program(&cells, &program).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.trace.rows(), 401);
    }

    #[test]
    fn full_cycle_collapses_everything_back() {
        let cells = replica_cells();
        let program = LoadProgram::cyclic(4.0 * 14.8 + 2.0, 1, 0.01).unwrap();
        let run = run_load_program(&cells, &program).unwrap();
        let deploys: Vec<usize> = run
            .events
            .iter()
            .filter(|e| e.direction == Direction::Deploy)
            .map(|e| e.cell_id)
            .collect();
        let collapses: Vec<usize> = run
            .events
            .iter()
            .filter(|e| e.direction == Direction::Collapse)
            .map(|e| e.cell_id)
            .collect();
        assert_eq!(deploys, vec![2, 3, 1, 4]);
        assert_eq!(collapses, vec![2, 3, 1, 4]);
        assert_eq!(run.final_state.branch, vec![Branch::ClosedRising; 4]);
        // snap releases are all positive
        for e in &run.events {
            assert!(e.energy_released > 0.0, "event {e:?}");
        }
    }

    #[test]
    fn force_curve_has_one_downward_jump_per_deploy() {
        let cells = replica_cells();
        let program = LoadProgram::single_pull(4.0 * 14.8 + 2.0, 0.01).unwrap();
        let run = run_load_program(&cells, &program).unwrap();
        let mut jumps = 0;
        for pair in run.trace.force.windows(2) {
            if pair[1] - pair[0] < -1.0 {
                jumps += 1;
            }
        }
        assert_eq!(jumps, 4);

        let f = &run.trace.force;
        let maxima = (1..f.len() - 1)
            .filter(|&i| f[i] > f[i - 1] && f[i] >= f[i + 1])
            .count();
        assert_eq!(maxima, 4, "one force peak per deploy");
    }

    #[test]
    fn deploy_order_follows_effective_peaks_on_random_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let cells: Vec<CellParams> = (1..=4)
                .map(|id| {
                    let eta = 0.1 * (rng.random::<f64>() - 0.5);
                    CellParams::with_imperfection(id, eta).unwrap()
                })
                .collect();
            let mut expected: Vec<usize> = (1..=4).collect();
            expected.sort_by(|&a, &b| {
                cells[a - 1]
                    .effective_peak()
                    .partial_cmp(&cells[b - 1].effective_peak())
                    .unwrap()
            });
            let program = LoadProgram::single_pull(4.0 * 14.8 + 2.0, 0.02).unwrap();
            let run = run_load_program(&cells, &program).unwrap();
            let order: Vec<usize> = run.events.iter().map(|e| e.cell_id).collect();
            assert_eq!(order, expected);
        }
    }

    #[test]
    fn two_cell_chain_cannot_hold_one_deployed_cell() {
        // the deployed branch begins at half a stroke, which two cells cannot
        // span at the first snap; the stepper reports it instead of panicking
        let cells = vec![
            CellParams::with_imperfection(1, 0.0).unwrap(),
            CellParams::with_imperfection(2, 0.01).unwrap(),
        ];
        let program = LoadProgram::single_pull(2.0 * 14.8, 0.05).unwrap();
        let err = run_load_program(&cells, &program).unwrap_err();
        assert!(matches!(err, Error::Internal(_)), "got {err:?}");
    }

    #[test]
    fn snap_force_drop_lands_between_events() {
        let cells = replica_cells();
        let program = LoadProgram::single_pull(4.0 * 14.8 + 2.0, 0.01).unwrap();
        let run = run_load_program(&cells, &program).unwrap();
        for event in &run.events {
            let before = run.trace.force[event.step - 1];
            let after = run.trace.force[event.step];
            assert!(before > after, "force must drop at a deploy");
            assert!((before - event.force_before).abs() < 0.2);
        }
        let peaks = branch_limits(&cells[3]).peak_force;
        let max_f = run.trace.force.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max_f - peaks).abs() < 0.05);
    }
}
