//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line with the measured values (visible with `--nocapture`).
//!
//! Run with `cargo test -p snapsense --test acceptance`.

use snapsense::acquisition::{capacitance_to_code, code_to_capacitance, ConverterConfig};
use snapsense::detection::sequence_from_events;
use snapsense::geometry::PlateGeometry;
use snapsense::harness::{
    imperfection_mc, noise_sweep, run_scenario, sigma_star, ChainSpec, LoadKind, ScenarioConfig,
};
use snapsense::mechanics::{
    brute_force_equilibria, solve_chain, Branch, CellParams, Direction,
};
use snapsense::sensing::{plate_capacitance, CapacitorModel};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criterion 1: plate capacitance endpoints reproduce the reported
/// 0.50 pF / 0.01 pF values.
#[test]
fn criterion_1_capacitance_endpoints() {
    let model = CapacitorModel::uniform(PlateGeometry::default(), 1, 1.0, 0.0, 0.0).unwrap();
    let closed = plate_capacitance(&model, 0.5).unwrap();
    let open = plate_capacitance(&model, 15.3).unwrap();
    assert!(
        (0.486..=0.496).contains(&closed),
        "closed-gap capacitance {closed} pF outside [0.486, 0.496]"
    );
    assert!(
        (0.0159..=0.0163).contains(&open),
        "open-gap capacitance {open} pF outside [0.0159, 0.0163]"
    );
    assert_eq!((closed * 100.0).round() / 100.0, 0.49);
    assert_eq!((open * 100.0).round() / 100.0, 0.02);
    println!("[PASS] criterion 1: C(0.5 mm) = {closed:.6} pF, C(15.3 mm) = {open:.6} pF");
}

/// Criterion 2: the replica pull shows four downward force jumps with
/// ground-truth order [2,3,1,4], and the pipeline recovers that order from
/// the noisy sensor codes.
#[test]
fn criterion_2_four_peaks_and_sequence() {
    let config = ScenarioConfig::replica();
    assert_eq!(config.converter.noise_sigma_pf, 0.001);
    let outcome = run_scenario(&config).unwrap();

    let truth: Vec<usize> = outcome
        .truth
        .iter()
        .filter(|e| e.direction == Direction::Deploy)
        .map(|e| e.cell_id)
        .collect();
    assert_eq!(truth, vec![2, 3, 1, 4], "ground-truth deploy order");

    let mut jumps = 0;
    for pair in outcome.trace.force.windows(2) {
        if pair[1] - pair[0] < -1.0 {
            jumps += 1;
        }
    }
    assert_eq!(jumps, 4, "downward force jumps");

    let detected = sequence_from_events(&outcome.detected);
    assert_eq!(detected.sequence, vec![2, 3, 1, 4], "detected sequence");
    assert!(!detected.is_anomalous());
    println!(
        "[PASS] criterion 2: 4 force jumps, truth {:?}, detected {:?} from codes at sigma = 0.001 pF",
        truth, detected.sequence
    );
}

/// Criterion 3: the default calibration puts the maximum pull force within
/// +-20% of the 7 N envelope.
#[test]
fn criterion_3_peak_force_calibration() {
    let outcome = run_scenario(&ScenarioConfig::replica()).unwrap();
    let peak = outcome.report.peak_force_n;
    assert!(
        (5.6..=8.4).contains(&peak),
        "peak force {peak} N outside [5.6, 8.4]"
    );
    println!("[PASS] criterion 3: peak pull force = {peak:.3} N in [5.6, 8.4]");
}

/// Criterion 4: ten noiseless cycles give byte-identical per-cycle event
/// lists and perfectly overlapping hysteresis loops.
#[test]
fn criterion_4_cyclic_repeatability() {
    let mut config = ScenarioConfig::replica();
    config.load.kind = LoadKind::Cyclic { cycles: 10 };
    config.converter.noise_sigma_pf = 0.0;
    let outcome = run_scenario(&config).unwrap();

    let per_stroke = config.load.steps_per_stroke();
    let per_cycle = 2 * per_stroke;

    // per-cycle event lists, serialized with their in-cycle offsets
    let cycle_bytes: Vec<String> = (0..10)
        .map(|k| {
            let lo = k * per_cycle;
            let hi = (k + 1) * per_cycle;
            outcome
                .truth
                .iter()
                .filter(|e| e.step > lo && e.step <= hi)
                .map(|e| {
                    format!(
                        "{}:{}:{}:{}:{};",
                        e.step - lo,
                        e.cell_id,
                        e.direction,
                        e.displacement,
                        e.force_before
                    )
                })
                .collect::<String>()
        })
        .collect();
    for k in 1..10 {
        assert_eq!(cycle_bytes[k], cycle_bytes[0], "cycle {k} event list differs");
    }
    assert_eq!(cycle_bytes[0].matches(';').count(), 8, "8 events per cycle");

    // overlapping loops: identical force at identical in-cycle samples
    let mut worst: f64 = 0.0;
    for j in 1..=per_cycle {
        let reference = outcome.trace.force[j];
        for k in 1..10 {
            let dev = (outcome.trace.force[k * per_cycle + j] - reference).abs();
            worst = worst.max(dev);
        }
    }
    assert_eq!(worst, 0.0, "hysteresis loops deviate by {worst}");

    // detection is also cycle-stable
    let detected_per_cycle: Vec<Vec<(usize, usize)>> = (0..10)
        .map(|k| {
            let lo = k * per_cycle;
            let hi = (k + 1) * per_cycle;
            outcome
                .detected
                .iter()
                .filter(|e| e.step > lo && e.step <= hi)
                .map(|e| (e.step - lo, e.cell_id))
                .collect()
        })
        .collect();
    for k in 1..10 {
        assert_eq!(detected_per_cycle[k], detected_per_cycle[0]);
    }
    println!(
        "[PASS] criterion 4: 10 cycles byte-identical (8 events each), max force deviation = {worst}"
    );
}

/// Criterion 5: chain solver states coincide with energy-grid minima for
/// random two-cell configurations.
#[test]
fn criterion_5_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let assignments = [
        [Branch::ClosedRising, Branch::ClosedRising],
        [Branch::OpenRising, Branch::ClosedRising],
        [Branch::ClosedRising, Branch::OpenRising],
        [Branch::OpenRising, Branch::OpenRising],
    ];
    let grid_n = 400;
    let mut checked = 0;
    for _ in 0..20 {
        let stroke = 10.0 + 8.0 * rng.random::<f64>();
        let beta = 0.3 + 0.15 * rng.random::<f64>();
        let cells = [
            CellParams::new(1, stroke, beta, 3.0 + 5.0 * rng.random::<f64>(), 0.1 * (rng.random::<f64>() - 0.5)).unwrap(),
            CellParams::new(2, stroke, beta, 3.0 + 5.0 * rng.random::<f64>(), 0.1 * (rng.random::<f64>() - 0.5)).unwrap(),
        ];
        for level in 0..10 {
            let x_total = 0.2 * stroke + 1.8 * stroke * level as f64 / 9.0;
            // first feasible stable assignment at this displacement
            let state = assignments
                .iter()
                .find_map(|a| solve_chain(&cells, a, x_total).unwrap());
            let Some(state) = state else { continue };
            let minima = brute_force_equilibria(&cells, x_total, grid_n).unwrap();
            assert!(!minima.is_empty(), "no grid minima at X = {x_total}");

            let lo = -0.2 * stroke;
            let hi = x_total + 0.2 * stroke;
            let cell_width = (hi - lo) / (grid_n - 1) as f64;
            let closest = minima
                .iter()
                .min_by(|a, b| {
                    let da = (a.displacements[0] - state.cell_displacement[0]).abs();
                    let db = (b.displacements[0] - state.cell_displacement[0]).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let distance = (closest.displacements[0] - state.cell_displacement[0]).abs();
            assert!(
                distance <= 2.0 * cell_width,
                "solver x1 {} vs grid minimum {} ({} cells away)",
                state.cell_displacement[0],
                closest.displacements[0],
                distance / cell_width
            );

            // energy agreement within the grid's local variation around the minimum
            let solver_energy: f64 = cells
                .iter()
                .zip(&state.cell_displacement)
                .map(|(c, &x)| c.energy(x))
                .sum();
            let local_variation = {
                let x1 = closest.displacements[0];
                let e = |x: f64| cells[0].energy(x) + cells[1].energy(x_total - x);
                (e(x1 + cell_width) - e(x1))
                    .abs()
                    .max((e(x1 - cell_width) - e(x1)).abs())
            };
            assert!(
                (solver_energy - closest.energy).abs() <= local_variation.max(1e-9),
                "energy {} vs grid {} (local variation {})",
                solver_energy,
                closest.energy,
                local_variation
            );
            checked += 1;
        }
    }
    assert!(checked >= 150, "only {checked} feasible states checked");
    println!("[PASS] criterion 5: {checked} solver states matched grid minima (grid_n = {grid_n})");
}

/// Criterion 6: closed-form energy differentiates back to the force law at
/// 1000 random points per cell.
#[test]
fn criterion_6_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cells = [
        CellParams::with_imperfection(1, 0.02).unwrap(),
        CellParams::with_imperfection(2, -0.06).unwrap(),
        CellParams::with_imperfection(3, -0.02).unwrap(),
        CellParams::with_imperfection(4, 0.06).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for cell in &cells {
        let eps = 1e-4 * cell.stroke;
        let scale = cell.effective_peak();
        for _ in 0..1000 {
            let x = -0.2 * cell.stroke + 1.4 * cell.stroke * rng.random::<f64>();
            let fd = (cell.energy(x + eps) - cell.energy(x - eps)) / (2.0 * eps);
            let err = (fd - cell.force(x)).abs() / cell.force(x).abs().max(scale);
            worst = worst.max(err);
            assert!(err < 1e-6, "cell {} at x = {x}: scaled error {err}", cell.id);
        }
    }
    println!("[PASS] criterion 6: worst scaled gradient error = {worst:.3e} < 1e-6");
}

/// Criterion 7: converter code -> capacitance -> code roundtrips stay within
/// one code step for 1000 random capacitances.
#[test]
fn criterion_7_converter_roundtrip() {
    let config = ConverterConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0u32;
    for _ in 0..1000 {
        let c = 0.01 + 0.99 * rng.random::<f64>();
        let code = capacitance_to_code(&config, c);
        let c_back = code_to_capacitance(&config, code).unwrap();
        let code_back = capacitance_to_code(&config, c_back);
        let delta = code.abs_diff(code_back);
        worst = worst.max(delta);
        assert!(delta <= 1, "roundtrip at {c} pF drifted {delta} codes");
    }
    println!("[PASS] criterion 7: 1000 roundtrips within 1 LSB (worst = {worst})");
}

/// Criterion 8: 100 seeded imperfection draws recover the deployment
/// sequence exactly at the default noise; the noise sweep reports where
/// recovery degrades.
#[test]
fn criterion_8_monte_carlo_proprioception() {
    let config = ScenarioConfig {
        chain: ChainSpec::Random {
            cells: 4,
            peak_force: 6.6,
            imperfection_sigma: 0.05,
        },
        ..ScenarioConfig::default()
    };
    assert_eq!(config.capacitor.coupling_alpha, 0.02);
    assert_eq!(config.converter.noise_sigma_pf, 0.001);

    let table = imperfection_mc(&config, 100).unwrap();
    let failures: Vec<_> = table.rows.iter().filter(|r| !r.exact).collect();
    assert!(
        failures.is_empty(),
        "sequence recovery failed for draws: {failures:?}"
    );
    assert_eq!(table.match_rate, 1.0);

    // measured noise tolerance; the value is an output of the build
    let sigmas = [0.0, 0.0005, 0.001, 0.002, 0.005, 0.01, 0.02];
    let sweep = noise_sweep(&config, &sigmas, 20).unwrap();
    assert_eq!(sweep[0].accuracy, 1.0, "noiseless accuracy must be 1.0");
    let star = sigma_star(&sweep, 0.95);
    let sweep_text: Vec<String> = sweep
        .iter()
        .map(|p| format!("{}:{:.2}", p.sigma_pf, p.accuracy))
        .collect();
    println!(
        "[PASS] criterion 8: 100/100 draws exact at sigma = 0.001 pF; sweep [{}], sigma* = {:?} pF",
        sweep_text.join(", "),
        star
    );
}
