//! Griffin-Lim alternating projections: swap in the target magnitudes while
//! keeping the current phases, then least-squares resynthesize. The driver
//! runs several random initializations and keeps the best.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::Result;
use crate::stft::{
    ls_inverse, magnitude_spec, objective, stft, ComplexSpectrogram, MagnitudeSpectrogram, Signal,
    StftConfig,
};

#[derive(Debug, Clone)]
pub struct GlConfig {
    pub max_iters: usize,
    /// Stop when the objective change per iteration falls below this.
    pub objective_tol: f64,
    pub n_inits: usize,
    pub rng_seed: u64,
}

impl Default for GlConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            objective_tol: 1e-12,
            n_inits: 10,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlResult {
    pub signal: Signal,
    /// Magnitude-mismatch objective per iteration, starting at the initial guess.
    pub objective_trace: Vec<f64>,
    pub iterations_used: usize,
    pub init_index: usize,
}

impl GlResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::INFINITY)
    }
}

/// One Griffin-Lim iteration. Where the current coefficient is exactly zero
/// the phase factor is taken as 1.
pub fn gl_step(
    x: &Signal,
    target_mag: &MagnitudeSpectrogram,
    cfg: &StftConfig,
) -> Result<Signal> {
    let s = stft(x, cfg)?;
    let mut swapped = ComplexSpectrogram::zeros(s.frames(), s.fft_size());
    for m in 0..s.frames() {
        for k in 0..s.fft_size() {
            let c = s.at(m, k);
            let mag = c.norm();
            let phase = if mag == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                c / mag
            };
            *swapped.at_mut(m, k) = phase * target_mag.at(m, k);
        }
    }
    ls_inverse(&swapped, cfg)
}

/// Iterates `gl_step` from `x0` until the objective change drops below
/// `objective_tol` or the iteration budget runs out.
pub fn griffin_lim(
    target_mag: &MagnitudeSpectrogram,
    cfg: &StftConfig,
    x0: &Signal,
    gl_cfg: &GlConfig,
) -> Result<GlResult> {
    let mut x = x0.clone();
    let mut trace = vec![objective(&magnitude_spec(&stft(&x, cfg)?), target_mag)?];
    let mut iterations = 0;
    for _ in 0..gl_cfg.max_iters {
        x = gl_step(&x, target_mag, cfg)?;
        let obj = objective(&magnitude_spec(&stft(&x, cfg)?), target_mag)?;
        let prev = *trace.last().unwrap();
        trace.push(obj);
        iterations += 1;
        if (prev - obj).abs() < gl_cfg.objective_tol {
            break;
        }
    }
    Ok(GlResult {
        signal: x,
        objective_trace: trace,
        iterations_used: iterations,
        init_index: 0,
    })
}

fn random_init(n: usize, seed: u64, stream: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Signal::new((0..n).map(|_| rng.sample(StandardNormal)).collect())
        .expect("normal draws are finite")
}

/// Runs `n_inits` independent Griffin-Lim instances from i.i.d. standard
/// normal starting signals and returns the one with the lowest final
/// objective. Per-init RNG streams derive from (seed, init index), so the
/// result does not depend on scheduling.
pub fn griffin_lim_multi(
    target_mag: &MagnitudeSpectrogram,
    cfg: &StftConfig,
    gl_cfg: &GlConfig,
) -> Result<GlResult> {
    let n = cfg.signal_len();
    let results: Vec<GlResult> = (0..gl_cfg.n_inits)
        .into_par_iter()
        .map(|i| {
            let x0 = random_init(n, gl_cfg.rng_seed, i as u64);
            griffin_lim(target_mag, cfg, &x0, gl_cfg).map(|mut r| {
                r.init_index = i;
                r
            })
        })
        .collect::<Result<_>>()?;
    Ok(results
        .into_iter()
        .min_by(|a, b| {
            (a.final_objective(), a.init_index)
                .partial_cmp(&(b.final_objective(), b.init_index))
                .expect("objectives are finite")
        })
        .expect("n_inits >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::make_hann;
    use approx::assert_abs_diff_eq;

    fn toy_cfg() -> StftConfig {
        StftConfig::new(make_hann(5).unwrap(), 2, 16, 16).unwrap()
    }

    fn toy_signal() -> Signal {
        Signal::new((0..16).map(|i| ((i * i) as f64 * 0.17).sin()).collect()).unwrap()
    }

    #[test]
    fn fixed_point_when_magnitudes_match() {
        let cfg = toy_cfg();
        let x = toy_signal();
        let target = magnitude_spec(&stft(&x, &cfg).unwrap());
        let y = gl_step(&x, &target, &cfg).unwrap();
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_target_gives_zero_signal() {
        let cfg = toy_cfg();
        let target = MagnitudeSpectrogram::zeros(cfg.num_frames(), cfg.fft_size());
        let y = gl_step(&toy_signal(), &target, &cfg).unwrap();
        assert!(y.samples().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn single_step_never_increases_objective() {
        let cfg = toy_cfg();
        let target = magnitude_spec(&stft(&toy_signal(), &cfg).unwrap());
        for seed in 0..5u64 {
            let x0 = random_init(16, seed, 0);
            let before = objective(&magnitude_spec(&stft(&x0, &cfg).unwrap()), &target).unwrap();
            let x1 = gl_step(&x0, &target, &cfg).unwrap();
            let after = objective(&magnitude_spec(&stft(&x1, &cfg).unwrap()), &target).unwrap();
            assert!(after <= before + 1e-12, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn true_signal_converges_immediately() {
        let cfg = toy_cfg();
        let x = toy_signal();
        let target = magnitude_spec(&stft(&x, &cfg).unwrap());
        let res = griffin_lim(&target, &cfg, &x, &GlConfig::default()).unwrap();
        assert_eq!(res.iterations_used, 1);
        assert!(res.final_objective() < 1e-20);
    }

    #[test]
    fn trace_is_non_increasing() {
        let cfg = toy_cfg();
        let target = magnitude_spec(&stft(&toy_signal(), &cfg).unwrap());
        let x0 = random_init(16, 42, 0);
        let res = griffin_lim(&target, &cfg, &x0, &GlConfig::default()).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn multi_with_one_init_matches_first_stream() {
        let cfg = toy_cfg();
        let target = magnitude_spec(&stft(&toy_signal(), &cfg).unwrap());
        let gl_cfg = GlConfig {
            n_inits: 1,
            rng_seed: 7,
            ..GlConfig::default()
        };
        let multi = griffin_lim_multi(&target, &cfg, &gl_cfg).unwrap();
        let single = griffin_lim(&target, &cfg, &random_init(16, 7, 0), &gl_cfg).unwrap();
        assert_eq!(multi.signal.samples(), single.signal.samples());
    }

    #[test]
    fn multi_is_best_of_inits() {
        let cfg = toy_cfg();
        let target = magnitude_spec(&stft(&toy_signal(), &cfg).unwrap());
        let gl_cfg = GlConfig {
            n_inits: 4,
            rng_seed: 3,
            max_iters: 50,
            ..GlConfig::default()
        };
        let multi = griffin_lim_multi(&target, &cfg, &gl_cfg).unwrap();
        for i in 0..4 {
            let r = griffin_lim(&target, &cfg, &random_init(16, 3, i), &gl_cfg).unwrap();
            assert!(multi.final_objective() <= r.final_objective() + 1e-15);
        }
    }

    #[test]
    fn multi_is_deterministic() {
        let cfg = toy_cfg();
        let target = magnitude_spec(&stft(&toy_signal(), &cfg).unwrap());
        let gl_cfg = GlConfig {
            n_inits: 6,
            rng_seed: 11,
            max_iters: 30,
            ..GlConfig::default()
        };
        let a = griffin_lim_multi(&target, &cfg, &gl_cfg).unwrap();
        let b = griffin_lim_multi(&target, &cfg, &gl_cfg).unwrap();
        assert_eq!(a.signal.samples(), b.signal.samples());
        assert_eq!(a.init_index, b.init_index);
    }
}
