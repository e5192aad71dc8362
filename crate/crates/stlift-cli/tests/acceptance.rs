//! End-to-end acceptance suite. Every criterion prints a single PASS/FAIL
//! line with the measured quantities; the test fails if any criterion fails.

use std::process::Command;

use stlift_core::harness::{
    add_noise, gen_signals, run, trial_noise_seed, ExperimentSpec, Method, Mode, SolverSettings,
    SummaryRow,
};
use stlift_core::*;

struct Tally {
    lines: Vec<(String, bool, String)>,
}

impl Tally {
    fn new() -> Self {
        Tally { lines: Vec::new() }
    }

    fn record(&mut self, name: &str, passed: bool, detail: String) {
        println!(
            "criterion {name}: {} — {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
        self.lines.push((name.to_string(), passed, detail));
    }

    fn finish(self) {
        let failed: Vec<_> = self
            .lines
            .iter()
            .filter(|(_, ok, _)| !ok)
            .map(|(name, _, detail)| format!("{name}: {detail}"))
            .collect();
        assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
    }
}

fn sweep(n: usize, cells: Vec<(usize, usize)>, mode: Mode, seed: u64) -> Vec<SummaryRow> {
    let spec = ExperimentSpec {
        n,
        cells,
        trials: 20,
        seed,
        mode,
        noise_sigma: match mode {
            Mode::Noiseless => 0.0,
            Mode::Noisy => 0.2,
        },
        methods: vec![Method::GriffinLim, Method::Stlift],
        gl_max_iters: 1000,
        gl_inits: 10,
        solver: SolverSettings::default(),
        overlay_trials: vec![],
    };
    run(&spec).expect("sweep runs").rows
}

fn cell_value(rows: &[SummaryRow], m: usize, r: usize, method: Method) -> f64 {
    rows.iter()
        .find(|row| row.m == m && row.r == r && row.method == method)
        .map(|row| row.value)
        .expect("cell present")
}

/// Median relative error scored by the generating signal itself against the
/// corrupted targets. The metric measures fit to the corrupted data, so an
/// estimator can overfit below this value, but only by the slack the noise
/// leaves between the measurement count and the signal's degrees of freedom;
/// it is the natural reference scale for a cell.
fn noisy_floor(n: usize, cells: &[(usize, usize)], seed: u64) -> Vec<f64> {
    let signals = gen_signals(n, 20, seed);
    cells
        .iter()
        .enumerate()
        .map(|(cell_idx, &(m, r))| {
            let cfg = StftConfig::hann(m, r, n).unwrap();
            let rels: Vec<f64> = signals
                .iter()
                .enumerate()
                .map(|(trial, x)| {
                    let p = power_spec(&stft(x, &cfg).unwrap());
                    let noisy = add_noise(&p, 0.2, trial_noise_seed(seed, cell_idx, trial));
                    let target = noisy.sqrt();
                    let mag = magnitude_spec(&stft(x, &cfg).unwrap());
                    100.0 * objective(&mag, &target).unwrap() / noisy.total()
                })
                .collect();
            stlift_core::harness::median_lower(&rels)
        })
        .collect()
}

fn table_grid(n: usize) -> Vec<(usize, usize)> {
    let windows: &[usize] = if n == 16 {
        &[5, 7, 9, 11]
    } else {
        &[5, 7, 9, 11, 13, 15, 17, 19, 21]
    };
    windows
        .iter()
        .flat_map(|&m| stlift_core::harness::cola_hops(m).into_iter().map(move |r| (m, r)))
        .collect()
}

#[test]
fn acceptance() {
    let mut tally = Tally::new();
    let seed = 0u64;

    // 1. Noiseless n=16, R=1, M in {5,7,9,11}: >= 90% accuracy per cell.
    {
        let cells: Vec<(usize, usize)> = [5, 7, 9, 11].iter().map(|&m| (m, 1)).collect();
        let rows = sweep(16, cells.clone(), Mode::Noiseless, seed);
        let accs: Vec<(usize, f64)> = cells
            .iter()
            .map(|&(m, r)| (m, cell_value(&rows, m, r, Method::Stlift)))
            .collect();
        let passed = accs.iter().all(|&(_, a)| a >= 90.0);
        tally.record(
            "01 noiseless n=16 R=1",
            passed,
            format!("accuracy per window {accs:?} (accept >= 90 each)"),
        );
    }

    // 2. Noiseless n=32, hop <= 2 cells that are exactly recoverable:
    //    every (M, R<=2) except (5,2); >= 90% per cell.
    {
        let cells: Vec<(usize, usize)> = [5usize, 7, 9, 11, 13, 15, 17, 19, 21]
            .iter()
            .flat_map(|&m| [(m, 1), (m, 2)])
            .filter(|&(m, r)| !(m == 5 && r == 2))
            .collect();
        let rows = sweep(32, cells.clone(), Mode::Noiseless, seed);
        let accs: Vec<((usize, usize), f64)> = cells
            .iter()
            .map(|&(m, r)| ((m, r), cell_value(&rows, m, r, Method::Stlift)))
            .collect();
        let worst = accs
            .iter()
            .cloned()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let passed = worst.1 >= 90.0;
        tally.record(
            "02 noiseless n=32 R<=2",
            passed,
            format!("worst cell {:?} at {}% over {} cells (accept >= 90)", worst.0, worst.1, accs.len()),
        );
    }

    // 3. Noiseless separation at large hop: n=16, M=5, R=2.
    {
        let rows = sweep(16, vec![(5, 2)], Mode::Noiseless, seed);
        let sdp = cell_value(&rows, 5, 2, Method::Stlift);
        let gl = cell_value(&rows, 5, 2, Method::GriffinLim);
        tally.record(
            "03 noiseless n=16 M=5 R=2 separation",
            sdp - gl >= 30.0,
            format!("stlift {sdp}% vs griffin-lim {gl}% (accept gap >= 30 points)"),
        );
    }

    // 4. Noisy n=32, R=1, M in {5,7,9,11}: stlift median below griffin-lim in
    //    >= 3 of 4 cells, and below 1% in every cell. The printed floor is the
    //    generating signal's own median error against the same corrupted
    //    targets; where it sits above 1%, the 1% bar demands a fit to the
    //    corrupted data better than the true signal provides.
    {
        let cells: Vec<(usize, usize)> = [5, 7, 9, 11].iter().map(|&m| (m, 1)).collect();
        let rows = sweep(32, cells.clone(), Mode::Noisy, seed);
        let floors = noisy_floor(32, &cells, seed);
        let mut wins = 0;
        let mut under_bar = true;
        let mut detail = Vec::new();
        for (&(m, r), &floor) in cells.iter().zip(&floors) {
            let sdp = cell_value(&rows, m, r, Method::Stlift);
            let gl = cell_value(&rows, m, r, Method::GriffinLim);
            if sdp < gl {
                wins += 1;
            }
            if sdp >= 1.0 {
                under_bar = false;
            }
            detail.push(format!(
                "M={m}: stlift {sdp:.2}% gl {gl:.2}% floor {floor:.2}%"
            ));
        }
        tally.record(
            "04 noisy n=32 R=1",
            wins >= 3 && under_bar,
            format!("{} wins of 4 (accept >= 3), all cells < 1%: {under_bar}; {}", wins, detail.join("; ")),
        );
    }

    // 5. Noisy large-hop reversal: n=32, M=5, R=2 — griffin-lim ahead. A
    //    solver that returns the raw rank-1 extraction shows this reversal,
    //    but the local refinement that exact noiseless recovery at hop 2
    //    requires (criteria 2 and 3) also closes the gap in this cell.
    {
        let rows = sweep(32, vec![(5, 2)], Mode::Noisy, seed);
        let sdp = cell_value(&rows, 5, 2, Method::Stlift);
        let gl = cell_value(&rows, 5, 2, Method::GriffinLim);
        tally.record(
            "05 noisy n=32 M=5 R=2 reversal",
            gl < sdp,
            format!("griffin-lim {gl:.2}% vs stlift {sdp:.2}% (accept griffin-lim lower)"),
        );
    }

    // 6. STFT/ISTFT round trip on 100 draws from the reference grid.
    {
        let mut worst = 0.0f64;
        for &n in &[16usize, 32] {
            let grid = table_grid(n);
            for i in 0..50usize {
                let (m, r) = grid[i % grid.len()];
                let cfg = StftConfig::hann(m, r, n).unwrap();
                let x = gen_signals(n, 1, 1000 + i as u64 + n as u64).pop().unwrap();
                let back = ls_inverse(&stft(&x, &cfg).unwrap(), &cfg).unwrap();
                let err = x
                    .samples()
                    .iter()
                    .zip(back.samples())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(err);
            }
        }
        tally.record(
            "06 stft round trip",
            worst < 1e-10,
            format!("max inf-norm error {worst:.3e} over 100 draws (accept < 1e-10)"),
        );
    }

    // 7. Griffin-Lim monotone objective on 50 random instances.
    {
        let mut violations = 0;
        for i in 0..50u64 {
            let cfg = StftConfig::hann(7, 2, 16).unwrap();
            let x = gen_signals(16, 1, 2000 + i).pop().unwrap();
            let target = magnitude_spec(&stft(&x, &cfg).unwrap());
            let x0 = gen_signals(16, 1, 3000 + i).pop().unwrap();
            let res = griffin_lim(
                &target,
                &cfg,
                &x0,
                &GlConfig {
                    max_iters: 60,
                    ..GlConfig::default()
                },
            )
            .unwrap();
            if res
                .objective_trace
                .windows(2)
                .any(|w| w[1] > w[0] + 1e-12)
            {
                violations += 1;
            }
        }
        tally.record(
            "07 griffin-lim monotonicity",
            violations == 0,
            format!("{violations} of 50 traces increased (accept 0)"),
        );
    }

    // 8. Lift consistency: forward(xx^T) equals the power spectrogram.
    {
        let mut worst = 0.0f64;
        for i in 0..100u64 {
            let n = 16;
            let (m, r) = table_grid(n)[(i as usize) % table_grid(n).len()];
            let cfg = StftConfig::hann(m, r, n).unwrap();
            let op = FrameOperator::new(&cfg, n);
            let x = gen_signals(n, 1, 4000 + i).pop().unwrap();
            let fwd = op.forward(&LiftedMatrix::from_outer(x.samples()));
            let p = power_spec(&stft(&x, &cfg).unwrap());
            for (a, b) in fwd.iter().zip(p.values()) {
                worst = worst.max((a - b).abs());
            }
        }
        tally.record(
            "08 lift consistency",
            worst < 1e-9,
            format!("max |forward(xx^T) - |stft|^2| = {worst:.3e} (accept < 1e-9)"),
        );
    }

    // 9. Adjoint identity on 50 random (X, r) pairs.
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let n = 12;
            let cfg = StftConfig::hann(7, 2, n).unwrap();
            let op = FrameOperator::new(&cfg, n);
            let x = LiftedMatrix::from_matrix(nalgebra::DMatrix::from_fn(n, n, |_, _| {
                rng.gen::<f64>() - 0.5
            }));
            let r: Vec<f64> = (0..op.num_measurements())
                .map(|_| rng.gen::<f64>() - 0.5)
                .collect();
            let lhs: f64 = op.forward(&x).iter().zip(&r).map(|(f, ri)| f * ri).sum();
            let rhs = x.frobenius_dot(&op.adjoint(&r).unwrap());
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())));
        }
        tally.record(
            "09 adjoint identity",
            worst < 1e-10,
            format!("max relative discrepancy {worst:.3e} (accept < 1e-10)"),
        );
    }

    // 10. Gradient vs central finite differences, 20 directions.
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let n = 8;
        let cfg = StftConfig::hann(5, 2, n).unwrap();
        let op = FrameOperator::new(&cfg, n);
        let b: Vec<f64> = (0..op.num_measurements()).map(|_| rng.gen::<f64>()).collect();
        let lambda = 0.2;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let x = LiftedMatrix::from_matrix(nalgebra::DMatrix::from_fn(n, n, |_, _| {
                rng.gen::<f64>() - 0.5
            }));
            let dir = {
                let d = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
                (&d + d.transpose()) * 0.5
            };
            let grad = op.gradient(&x, &b, lambda).unwrap();
            let analytic = grad.matrix().iter().zip(dir.iter()).map(|(g, d)| g * d).sum::<f64>();
            let h = 1e-5;
            let eval = |t: f64| {
                op.objective(
                    &LiftedMatrix::from_matrix(x.matrix() + &dir * t),
                    &b,
                    lambda,
                )
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            worst = worst.max((fd - analytic).abs() / analytic.abs().max(1.0));
        }
        tally.record(
            "10 gradient check",
            worst < 1e-5,
            format!("max relative error {worst:.3e} (accept < 1e-5)"),
        );
    }

    // 11. PSD projection properties.
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut idem = 0.0f64;
        let mut min_eig = 0.0f64;
        for _ in 0..20 {
            let m = nalgebra::DMatrix::from_fn(6, 6, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let p = project_psd(&m).unwrap();
            let again = project_psd(p.matrix()).unwrap();
            idem = idem.max((p.matrix() - again.matrix()).norm());
            let eig = nalgebra::SymmetricEigen::new(p.matrix().clone());
            min_eig = min_eig.min(eig.eigenvalues.min());
        }
        // brute-force nearest-point spot check on 2x2 cases
        let mut brute_ok = true;
        for &(a, b, c) in &[(1.0, 2.0, -1.0), (-1.0, 0.5, -2.0), (0.0, 1.0, 0.0)] {
            let m = nalgebra::DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
            let p = project_psd(&m).unwrap();
            let dist = (&m - p.matrix()).norm();
            let steps = 60;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let f = |q: i32| -3.0 + 6.0 * q as f64 / steps as f64;
                        let l = nalgebra::DMatrix::from_row_slice(
                            2,
                            2,
                            &[f(i), 0.0, f(j), f(k)],
                        );
                        let cand = &l * l.transpose();
                        best = best.min((&m - cand).norm());
                    }
                }
            }
            if dist > best + 0.2 {
                brute_ok = false;
            }
        }
        tally.record(
            "11 psd projection",
            idem < 1e-12 && min_eig >= -1e-10 && brute_ok,
            format!(
                "idempotence gap {idem:.3e} (accept < 1e-12), min eigenvalue {min_eig:.3e} (accept >= -1e-10), 2x2 brute force {}",
                if brute_ok { "consistent" } else { "violated" }
            ),
        );
    }

    // 12. lambda_0 makes X = 0 a fixed point of the projected step.
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let n = 10;
            let cfg = StftConfig::hann(5, 2, n).unwrap();
            let op = FrameOperator::new(&cfg, n);
            let b: Vec<f64> = (0..op.num_measurements()).map(|_| rng.gen::<f64>()).collect();
            let adj = op.adjoint(&b).unwrap();
            let lambda0 =
                2.0 * nalgebra::SymmetricEigen::new(adj.matrix().clone()).eigenvalues.max();
            let zero = LiftedMatrix::zeros(n);
            let grad = op.gradient(&zero, &b, lambda0).unwrap();
            let stepped = project_psd(&(zero.matrix() - grad.matrix() * 1e-2)).unwrap();
            worst = worst.max(stepped.frobenius_norm());
        }
        tally.record(
            "12 lambda_0 fixed point",
            worst < 1e-12,
            format!("max ||X_1|| = {worst:.3e} over 20 sets (accept < 1e-12)"),
        );
    }

    // 13. Byte-identical CSV across runs and thread counts.
    {
        let bin = env!("CARGO_BIN_EXE_stlift");
        let run_bench = |threads: &str| -> Vec<u8> {
            let out = Command::new(bin)
                .args([
                    "--threads", threads, "bench", "noiseless", "--seed", "7", "--trials", "5",
                ])
                .output()
                .expect("bench run");
            assert!(out.status.success(), "bench exited nonzero");
            out.stdout
        };
        let a = run_bench("1");
        let b = run_bench("1");
        let c = run_bench("8");
        tally.record(
            "13 determinism",
            a == b && a == c,
            format!(
                "rerun identical: {}, 1-thread vs 8-thread identical: {}",
                a == b,
                a == c
            ),
        );
    }

    tally.finish();
}
