//! Projected gradient descent on the PSD cone with FISTA acceleration,
//! divergence-based step autotuning, and a decreasing-lambda continuation
//! path that stops at an approximately rank-1 solution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lifting::{FrameOperator, LiftedMatrix, MeasurementSet};
use crate::stft::{MagnitudeSpectrogram, PowerSpectrogram, Signal, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// Geometric search for the largest non-diverging step.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step: StepSize,
    /// Iteration budget per lambda level.
    pub max_iters: usize,
    /// Stop a level when the relative objective change falls below this.
    pub grad_tol: f64,
    pub lambda_decay: f64,
    /// sigma_2 / sigma_1 threshold for declaring the solution rank-1.
    pub rank1_tol: f64,
    /// Consecutive objective increases that count as divergence.
    pub divergence_window: usize,
    /// Budget for the continuation path.
    pub max_lambda_levels: usize,
    /// Iteration budget for the per-level signal-space polish.
    pub polish_iters: usize,
    /// Relative data residual below which a polished rank-1 candidate is
    /// accepted as the solution.
    pub polish_accept_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: StepSize::Auto,
            max_iters: 5000,
            grad_tol: 1e-9,
            lambda_decay: 0.5,
            rank1_tol: 1e-3,
            divergence_window: 10,
            max_lambda_levels: 60,
            polish_iters: 2000,
            polish_accept_rel: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    ConvergedRank1,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: LiftedMatrix,
    pub signal: Signal,
    /// sigma_2 / sigma_1 of the final iterate (0 when sigma_1 = 0).
    pub rank_ratio: f64,
    pub lambda_path: Vec<f64>,
    /// Penalized objective at the last lambda level.
    pub objective_final: f64,
    pub status: SolveStatus,
}

/// Nearest PSD matrix in Frobenius norm: symmetrize, eigendecompose, clamp
/// negative eigenvalues to zero.
pub fn project_psd(m: &DMatrix<f64>) -> Result<LiftedMatrix> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(LiftedMatrix::from_matrix(rebuilt))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Leading eigenpair factorization: `signal = sqrt(sigma_1) * v_1`, with the
/// sign fixed so the largest-magnitude component is positive.
pub fn extract_signal(x: &LiftedMatrix) -> (Signal, f64) {
    let eig = SymmetricEigen::new(x.matrix().clone());
    let n = x.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let sigma1 = eig.eigenvalues[order[0]].max(0.0);
    let sigma2 = if n > 1 {
        eig.eigenvalues[order[1]].max(0.0)
    } else {
        0.0
    };
    if sigma1 <= 0.0 {
        return (Signal::zeros(n), 0.0);
    }
    let v = eig.eigenvectors.column(order[0]);
    let lead = v
        .iter()
        .cloned()
        .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .unwrap();
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    let scale = sign * sigma1.sqrt();
    let samples = v.iter().map(|&vi| scale * vi).collect();
    (
        Signal::new(samples).expect("eigenvector entries are finite"),
        sigma2 / sigma1,
    )
}

#[derive(Debug)]
pub struct FistaOutcome {
    pub x: LiftedMatrix,
    pub objective_trace: Vec<f64>,
    pub diverged: bool,
}

/// FISTA on the PSD cone with a fixed step size.
///
/// Momentum safeguard: if no new best objective appears for
/// `divergence_window` iterations, the extrapolation is reset once
/// (Y = X, theta = 1); if the stall repeats with the objective still above
/// the best seen, the run is flagged as diverged. An unstable step shows up
/// either as monotone growth or as a projection-induced cycle, and both keep
/// the objective pinned above the best. Setting `accelerate = false` gives
/// plain projected gradient descent.
pub fn fista_solve(
    op: &FrameOperator,
    b: &[f64],
    lambda: f64,
    step: f64,
    cfg: &SolverConfig,
    x0: &LiftedMatrix,
    accelerate: bool,
) -> Result<FistaOutcome> {
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut theta = 1.0f64;
    let mut prev_obj = op.objective(&x, b, lambda);
    let mut best_obj = prev_obj;
    let mut trace = vec![prev_obj];
    let mut stall = 0usize;
    let mut restarted_since_best = false;
    let mut peak_obj = prev_obj;

    for _ in 0..cfg.max_iters {
        let grad = op.gradient(&y, b, lambda)?;
        let candidate = y.matrix() - grad.matrix() * step;
        let x_next = project_psd(&candidate)?;
        let obj = op.objective(&x_next, b, lambda);
        if !obj.is_finite() {
            return Ok(FistaOutcome {
                x: x_next,
                objective_trace: trace,
                diverged: true,
            });
        }

        if accelerate {
            let theta_next = 2.0 / (1.0 + (1.0 + 4.0 / (theta * theta)).sqrt());
            let beta = theta_next * (1.0 / theta - 1.0);
            y = LiftedMatrix::from_matrix(
                x_next.matrix() + (x_next.matrix() - x.matrix()) * beta,
            );
            theta = theta_next;
        } else {
            y = x_next.clone();
        }

        peak_obj = peak_obj.max(obj);
        if obj < best_obj - 1e-15 * best_obj.abs().max(1.0) {
            best_obj = obj;
            stall = 0;
            restarted_since_best = false;
            peak_obj = obj;
        } else {
            stall += 1;
        }
        if stall >= cfg.divergence_window {
            // Judge the peak over the stalled stretch, not the current value:
            // an unstable step often cycles, and the even-period low phase can
            // coincide with the check. The margin separates instability from
            // FISTA's small convergence ripple.
            let above_best = peak_obj > 10.0 * (best_obj + 1e-12);
            if above_best {
                if restarted_since_best && accelerate {
                    // Already dropped the momentum once; genuinely unstable.
                    trace.push(obj);
                    return Ok(FistaOutcome {
                        x: x_next,
                        objective_trace: trace,
                        diverged: true,
                    });
                }
                if !accelerate {
                    // Plain descent is monotone at a stable step.
                    trace.push(obj);
                    return Ok(FistaOutcome {
                        x: x_next,
                        objective_trace: trace,
                        diverged: true,
                    });
                }
                y = x_next.clone();
                theta = 1.0;
                restarted_since_best = true;
            }
            // Stall at the best value itself is plain convergence; let the
            // relative-change test finish the run.
            stall = 0;
            peak_obj = obj;
        }

        let rel_change = (prev_obj - obj).abs() / obj.abs().max(1.0);
        let done = obj <= prev_obj && rel_change < cfg.grad_tol;
        x = x_next;
        trace.push(obj);
        prev_obj = obj;
        if done {
            break;
        }
    }
    Ok(FistaOutcome {
        x,
        objective_trace: trace,
        diverged: false,
    })
}

/// Geometric step-size search: start at `1/(2*Lip)` with
/// `Lip = 2*sum ||a||^4`, keep doubling while a short plain-gradient probe
/// stays convergent, and return the last non-diverging step.
pub fn autotune_step(
    op: &FrameOperator,
    b: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
    x0: &LiftedMatrix,
) -> Result<f64> {
    let lip = op.lipschitz_bound();
    let t0 = if lip > 0.0 { 1.0 / (2.0 * lip) } else { 1.0 };
    let b_scale: f64 = b.iter().map(|v| v.abs()).sum();
    if b_scale == 0.0 {
        return Ok(t0);
    }
    // Probe from a point at the scale of the least-squares solution so the
    // stiff curvature directions are excited even when x0 = 0.
    let probe_start = if x0.frobenius_norm() > 0.0 {
        x0.clone()
    } else {
        let a = project_psd(op.adjoint(b)?.matrix())?;
        let fa = op.forward(&a);
        let denom: f64 = fa.iter().map(|v| v * v).sum();
        let scale = if denom > 0.0 {
            fa.iter().zip(b).map(|(f, bi)| f * bi).sum::<f64>() / denom
        } else {
            1.0
        };
        LiftedMatrix::from_matrix(a.matrix() * scale.max(0.0))
    };
    let probe_iters = (10 * cfg.divergence_window).max(100);
    let probe_cfg = SolverConfig {
        max_iters: probe_iters,
        grad_tol: 0.0,
        ..cfg.clone()
    };
    let diverges = |t: f64| -> Result<bool> {
        let out = fista_solve(op, b, lambda, t, &probe_cfg, &probe_start, false)?;
        if out.diverged {
            return Ok(true);
        }
        let first = out.objective_trace[0];
        let last = *out.objective_trace.last().unwrap();
        let peak = out
            .objective_trace
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(!last.is_finite()
            || last > first * (1.0 + 1e-9) + 1e-12
            || peak > 10.0 * (first + 1e-12))
    };
    let mut t = t0;
    for _ in 0..60 {
        let next = t * 2.0;
        if diverges(next)? {
            break;
        }
        t = next;
    }
    Ok(t)
}

/// Local refinement of an extracted signal: gradient descent with Armijo
/// backtracking on the measurement misfit `g(s) = ||F(s s^T) - b||^2`,
/// whose gradient is `4 * F*(F(s s^T) - b) s`. Returns the refined signal
/// and its final misfit.
///
/// The lifted iterate resolves the slow rank-deficient tail of the convex
/// program only sublinearly; once its leading eigenvector lands in the right
/// basin, descending the original quadratic objective snaps to the exact
/// solution in a handful of steps.
pub fn polish_signal(
    op: &FrameOperator,
    s0: &Signal,
    b: &[f64],
    max_iters: usize,
) -> Result<(Signal, f64)> {
    let misfit = |v: &DVector<f64>| -> f64 {
        let x = LiftedMatrix::from_outer(v.as_slice());
        op.forward(&x)
            .iter()
            .zip(b)
            .map(|(f, bi)| (f - bi) * (f - bi))
            .sum()
    };
    let mut s = DVector::from_row_slice(s0.samples());
    let mut f = misfit(&s);
    let mut t = 1e-3;
    for _ in 0..max_iters {
        let x = LiftedMatrix::from_outer(s.as_slice());
        let r: Vec<f64> = op
            .forward(&x)
            .iter()
            .zip(b)
            .map(|(fv, bi)| fv - bi)
            .collect();
        let g = op.adjoint(&r)?.matrix() * &s * 4.0;
        let g_sq = g.norm_squared();
        if g_sq < 1e-28 || f < 1e-26 {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &s - &g * t;
            let fc = misfit(&cand);
            if fc < f - 1e-4 * t * g_sq {
                s = cand;
                f = fc;
                t *= 2.0;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((
        Signal::new(s.as_slice().to_vec()).expect("descent iterates stay finite"),
        f,
    ))
}

fn zero_result(n: usize, lambda_path: Vec<f64>) -> SolveResult {
    SolveResult {
        x: LiftedMatrix::zeros(n),
        signal: Signal::zeros(n),
        rank_ratio: 0.0,
        lambda_path,
        objective_final: 0.0,
        status: SolveStatus::ConvergedRank1,
    }
}

/// Decreasing-lambda continuation for the trace-penalized program.
///
/// Starts at `lambda_0 = 2*lambda_max(adjoint(b))`, the smallest value for
/// which X = 0 is a fixed point of the projected gradient map, then shrinks
/// lambda geometrically with warm starts. A level counts as the solution
/// when sigma_2/sigma_1 <= rank1_tol and the data residual has stopped
/// improving across levels (a shrunk iterate can be trivially rank-1 early
/// in the path while the fit is still poor).
pub fn lambda_continuation(
    op: &FrameOperator,
    b: &MeasurementSet,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let n = op.dim();
    if b.len() != op.num_measurements() {
        return Err(Error::MeasurementLength {
            expected: op.num_measurements(),
            got: b.len(),
        });
    }
    let bv = b.values();
    let b_norm = bv.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(zero_result(n, vec![]));
    }

    let lambda0 = 2.0 * lambda_max(op.adjoint(bv)?.matrix()).max(0.0);
    if lambda0 == 0.0 {
        return Ok(zero_result(n, vec![]));
    }
    let mut lambda = lambda0 * cfg.lambda_decay;

    // Autotune at lambda = 0: the penalty shifts the gradient but not the
    // curvature, and the unpenalized probe reaches the scale where an
    // unstable step actually shows.
    let mut step = match cfg.step {
        StepSize::Fixed(t) => t,
        StepSize::Auto => autotune_step(op, bv, 0.0, cfg, &LiftedMatrix::zeros(n))?,
    };

    let mut x = LiftedMatrix::zeros(n);
    let mut lambda_path = Vec::new();
    let mut prev_rel_residual = 1.0f64;
    let mut last_objective = op.objective(&x, bv, lambda);

    // Best rank-1 candidate along the path: the last level's extraction is
    // not always the best one, since shrinking lambda past the noise level
    // spreads the iterate across eigendirections and degrades the rounding.
    let rank1_misfit = |s: &Signal| -> f64 {
        let xr = LiftedMatrix::from_outer(s.samples());
        op.forward(&xr)
            .iter()
            .zip(bv)
            .map(|(f, bi)| (f - bi) * (f - bi))
            .sum()
    };
    let mut best_signal = Signal::zeros(n);
    let mut best_misfit = f64::INFINITY;

    for _ in 0..cfg.max_lambda_levels {
        lambda_path.push(lambda);
        let mut outcome = fista_solve(op, bv, lambda, step, cfg, &x, true)?;
        let mut halvings = 0;
        while outcome.diverged && halvings < 10 {
            step *= 0.5;
            halvings += 1;
            outcome = fista_solve(op, bv, lambda, step, cfg, &x, true)?;
        }
        if outcome.diverged {
            let (signal, rank_ratio) = extract_signal(&outcome.x);
            let signal = if rank1_misfit(&signal) <= best_misfit {
                signal
            } else {
                best_signal
            };
            let signal = final_polish(op, signal, bv, cfg)?;
            return Ok(SolveResult {
                objective_final: *outcome.objective_trace.last().unwrap(),
                x: outcome.x,
                signal,
                rank_ratio,
                lambda_path,
                status: SolveStatus::Diverged,
            });
        }
        x = outcome.x;
        last_objective = *outcome.objective_trace.last().unwrap();

        let residual = op
            .forward(&x)
            .iter()
            .zip(bv)
            .map(|(f, bi)| (f - bi) * (f - bi))
            .sum::<f64>()
            .sqrt();
        let rel_residual = residual / b_norm;
        let (signal, rank_ratio) = extract_signal(&x);
        let misfit = rank1_misfit(&signal);
        if misfit < best_misfit {
            best_misfit = misfit;
            best_signal = signal.clone();
        }

        // Rounding step: refine the extraction against the data and accept it
        // outright when it fits essentially exactly. Gated on a small lifted
        // residual: noisy measurements keep the residual at the noise floor,
        // so recoverable instances are the only ones that pay for the polish.
        if cfg.polish_iters > 0
            && rel_residual <= 1e-3
            && signal.samples().iter().any(|&v| v != 0.0)
        {
            let (polished, mis) = polish_signal(op, &signal, bv, cfg.polish_iters)?;
            if mis.sqrt() <= cfg.polish_accept_rel * b_norm {
                let xr = LiftedMatrix::from_outer(polished.samples());
                return Ok(SolveResult {
                    objective_final: op.objective(&xr, bv, lambda),
                    x: xr,
                    signal: polished,
                    rank_ratio: 0.0,
                    lambda_path,
                    status: SolveStatus::ConvergedRank1,
                });
            }
        }
        let nonzero = x.trace() > 1e-12 * (1.0 + b_norm);
        let fit_plateaued = rel_residual <= 1e-12 || rel_residual >= 0.9 * prev_rel_residual;
        if nonzero && rank_ratio <= cfg.rank1_tol && fit_plateaued {
            let signal = final_polish(op, best_signal, bv, cfg)?;
            return Ok(SolveResult {
                x,
                signal,
                rank_ratio,
                lambda_path,
                objective_final: last_objective,
                status: SolveStatus::ConvergedRank1,
            });
        }
        prev_rel_residual = rel_residual;
        lambda *= cfg.lambda_decay;
    }

    let (_, rank_ratio) = extract_signal(&x);
    let signal = final_polish(op, best_signal, bv, cfg)?;
    Ok(SolveResult {
        x,
        signal,
        rank_ratio,
        lambda_path,
        objective_final: last_objective,
        status: SolveStatus::MaxIters,
    })
}

/// Descends the data misfit from the extracted signal; with a zero budget or
/// a zero extraction the signal passes through unchanged. The refinement can
/// only lower the misfit because it starts at the extraction itself.
fn final_polish(
    op: &FrameOperator,
    signal: Signal,
    bv: &[f64],
    cfg: &SolverConfig,
) -> Result<Signal> {
    if cfg.polish_iters == 0 || signal.samples().iter().all(|&v| v == 0.0) {
        return Ok(signal);
    }
    let (polished, _) = polish_signal(op, &signal, bv, cfg.polish_iters)?;
    Ok(polished)
}

/// Recovery from exact magnitude measurements: squares them into `b` and runs
/// the continuation; the equality-constrained program is approached through
/// the penalized one as lambda shrinks.
pub fn solve_noiseless(
    target_mag: &MagnitudeSpectrogram,
    cfg_stft: &StftConfig,
    cfg_solver: &SolverConfig,
) -> Result<SolveResult> {
    solve_from_power(&target_mag.squared(), cfg_stft, cfg_solver)
}

/// Runs the continuation on squared-magnitude measurements.
pub fn solve_from_power(
    power: &PowerSpectrogram,
    cfg_stft: &StftConfig,
    cfg_solver: &SolverConfig,
) -> Result<SolveResult> {
    let n = cfg_stft.signal_len();
    let op = FrameOperator::new(cfg_stft, n);
    let b = MeasurementSet::from_power(power);
    lambda_continuation(&op, &b, cfg_solver)
}
