//! Phase retrieval from magnitude spectrograms.
//!
//! The crate recovers a real signal from the magnitudes of its short-time
//! Fourier transform two ways: the classic Griffin-Lim alternating
//! projections, and a convex relaxation that lifts the signal to a positive
//! semidefinite matrix and minimizes a trace-penalized least-squares
//! objective by accelerated projected gradient descent. A benchmark harness
//! runs both on seeded random signals and reports recovery and
//! relative-error statistics.

pub mod error;
pub mod griffin_lim;
pub mod harness;
pub mod io;
pub mod lifting;
pub mod solver;
pub mod stft;

pub use error::{Error, Result};
pub use griffin_lim::{gl_step, griffin_lim, griffin_lim_multi, GlConfig, GlResult};
pub use lifting::{
    adjoint, build_sensing, forward, gradient_penalized, lipschitz_bound, objective_penalized,
    FrameOperator, LiftedMatrix, MeasurementSet, SensingOp,
};
pub use solver::{
    autotune_step, extract_signal, fista_solve, lambda_continuation, project_psd, solve_from_power,
    solve_noiseless, SolveResult, SolveStatus, SolverConfig, StepSize,
};
pub use stft::{
    check_cola, frame_centers, ls_inverse, magnitude_spec, make_hann, objective, power_spec, stft,
    ColaReport, ComplexSpectrogram, MagnitudeSpectrogram, PowerSpectrogram, Signal, StftConfig,
    Window,
};
