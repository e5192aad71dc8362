//! Short-time Fourier analysis: Hann windows, framing, forward STFT,
//! least-squares inverse, and the magnitude-mismatch objective.
//!
//! DFT convention: forward kernel `e^{-j2*pi*p*k/N}` with no normalization;
//! the inverse carries the `1/N` factor.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real-valued time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self { samples })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            samples: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Symmetric analysis window, taps indexed by `t` in `[-(M-1)/2, (M-1)/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    taps: Vec<f64>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Half-width `(M-1)/2`.
    pub fn half(&self) -> i64 {
        (self.taps.len() as i64 - 1) / 2
    }

    /// Tap value at signed offset `t`; zero outside the support.
    pub fn tap(&self, t: i64) -> f64 {
        let idx = t + self.half();
        if idx < 0 || idx >= self.taps.len() as i64 {
            0.0
        } else {
            self.taps[idx as usize]
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Symmetric Hann window of odd length `M`: `w(t) = 0.5*(1 + cos(2*pi*t/(M-1)))`.
/// Endpoints are exactly zero, the center tap exactly one.
pub fn make_hann(m: usize) -> Result<Window> {
    if m < 3 {
        return Err(Error::WindowTooShort(m));
    }
    if m.is_multiple_of(2) {
        return Err(Error::EvenWindow(m));
    }
    let half = (m as i64 - 1) / 2;
    let period = (m - 1) as f64;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|t| 0.5 * (1.0 + (2.0 * std::f64::consts::PI * t as f64 / period).cos()))
        .collect();
    // cos() at the endpoints and center is only approximate; pin them.
    taps[0] = 0.0;
    taps[m - 1] = 0.0;
    taps[half as usize] = 1.0;
    Ok(Window { taps })
}

/// All frame centers `c = m*R` whose window can touch a signal of length `n`.
///
/// Centers run from `-ceil(h/R)*R` through `ceil((n-1+h)/R)*R` with
/// `h = (M-1)/2`, so the frame grid extends past both edges until the window
/// clears the signal.
pub fn frame_centers(n: usize, window_len: usize, hop: usize) -> Vec<i64> {
    let h = (window_len as i64 - 1) / 2;
    let r = hop as i64;
    let m_min = -((h + r - 1) / r);
    let m_max = (n as i64 - 1 + h + r - 1) / r;
    (m_min..=m_max).map(|m| m * r).collect()
}

/// Result of the constant-overlap-add check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColaReport {
    pub holds: bool,
    pub constant: f64,
}

/// Checks whether `sum_m w(mR - p)` is constant over `p` (interior region,
/// tolerance 1e-10). For the Hann family this holds exactly when `R` divides
/// `M-1` and `R <= (M-1)/2`.
pub fn check_cola(window: &Window, hop: usize) -> ColaReport {
    if hop == 0 {
        return ColaReport {
            holds: false,
            constant: 0.0,
        };
    }
    let h = window.half();
    let r = hop as i64;
    // The overlap-add sum is periodic in p with period R; one residue class
    // per 0..R covers the interior.
    let sums: Vec<f64> = (0..r)
        .map(|p| {
            let m_lo = (p - h).div_euclid(r);
            let m_hi = (p + h).div_euclid(r);
            (m_lo..=m_hi).map(|m| window.tap(m * r - p)).sum()
        })
        .collect();
    let max = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let constant = sums.iter().sum::<f64>() / sums.len() as f64;
    ColaReport {
        holds: (max - min).abs() <= 1e-10 && constant > 0.0,
        constant,
    }
}

/// Analysis configuration: window, hop, FFT size, and the frame-center grid
/// for a fixed signal length.
#[derive(Debug, Clone)]
pub struct StftConfig {
    window: Window,
    hop: usize,
    fft_size: usize,
    signal_len: usize,
    frame_centers: Vec<i64>,
}

impl StftConfig {
    pub fn new(window: Window, hop: usize, fft_size: usize, signal_len: usize) -> Result<Self> {
        if hop == 0 {
            return Err(Error::ZeroHop);
        }
        if signal_len == 0 {
            return Err(Error::EmptySignal);
        }
        if fft_size < window.len() {
            return Err(Error::FftTooSmall {
                fft_size,
                window_len: window.len(),
            });
        }
        let centers = frame_centers(signal_len, window.len(), hop);
        let cfg = Self {
            window,
            hop,
            fft_size,
            signal_len,
            frame_centers: centers,
        };
        // Eq. (4)-style synthesis needs sum_m w^2(mR - p) > 0 at every sample.
        for (p, d) in cfg.overlap_weights().iter().enumerate() {
            if *d <= 1e-12 {
                return Err(Error::CoverageGap { sample: p });
            }
        }
        Ok(cfg)
    }

    /// Convenience constructor using the Hann window and `N = n` as in the
    /// reference experiments.
    pub fn hann(window_len: usize, hop: usize, signal_len: usize) -> Result<Self> {
        StftConfig::new(make_hann(window_len)?, hop, signal_len, signal_len)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn frame_centers(&self) -> &[i64] {
        &self.frame_centers
    }

    pub fn num_frames(&self) -> usize {
        self.frame_centers.len()
    }

    /// `sum_m w^2(mR - p)` for each sample `p`.
    fn overlap_weights(&self) -> Vec<f64> {
        let mut denom = vec![0.0; self.signal_len];
        for &c in &self.frame_centers {
            for (p, d) in denom.iter_mut().enumerate() {
                *d += self.window.tap(c - p as i64).powi(2);
            }
        }
        denom
    }

    /// In-range support samples `p` of the frame centered at `c`.
    pub fn frame_support(&self, center: i64) -> std::ops::Range<usize> {
        let h = self.window.half();
        let lo = (center - h).max(0) as usize;
        let hi_incl = center + h;
        if hi_incl < 0 {
            return 0..0;
        }
        let hi = (hi_incl as usize).min(self.signal_len.saturating_sub(1));
        if lo > hi {
            0..0
        } else {
            lo..hi + 1
        }
    }
}

/// T x N complex STFT coefficients, row-major in (frame, bin).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    fft_size: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn new(frames: usize, fft_size: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), frames * fft_size);
        Self {
            frames,
            fft_size,
            data,
        }
    }

    pub fn zeros(frames: usize, fft_size: usize) -> Self {
        Self {
            frames,
            fft_size,
            data: vec![Complex64::new(0.0, 0.0); frames * fft_size],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn at(&self, m: usize, k: usize) -> Complex64 {
        self.data[m * self.fft_size + k]
    }

    pub fn at_mut(&mut self, m: usize, k: usize) -> &mut Complex64 {
        &mut self.data[m * self.fft_size + k]
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.data[m * self.fft_size..(m + 1) * self.fft_size]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

macro_rules! real_grid {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            frames: usize,
            fft_size: usize,
            values: Vec<f64>,
        }

        impl $name {
            pub fn new(frames: usize, fft_size: usize, values: Vec<f64>) -> Self {
                assert_eq!(values.len(), frames * fft_size);
                Self {
                    frames,
                    fft_size,
                    values,
                }
            }

            pub fn zeros(frames: usize, fft_size: usize) -> Self {
                Self {
                    frames,
                    fft_size,
                    values: vec![0.0; frames * fft_size],
                }
            }

            pub fn frames(&self) -> usize {
                self.frames
            }

            pub fn fft_size(&self) -> usize {
                self.fft_size
            }

            pub fn at(&self, m: usize, k: usize) -> f64 {
                self.values[m * self.fft_size + k]
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }

            pub fn total(&self) -> f64 {
                self.values.iter().sum()
            }
        }
    };
}

real_grid!(
    PowerSpectrogram,
    "T x N nonnegative squared coefficient magnitudes."
);
real_grid!(MagnitudeSpectrogram, "T x N nonnegative coefficient magnitudes.");

impl PowerSpectrogram {
    /// Elementwise square root.
    pub fn sqrt(&self) -> MagnitudeSpectrogram {
        MagnitudeSpectrogram::new(
            self.frames,
            self.fft_size,
            self.values.iter().map(|v| v.max(0.0).sqrt()).collect(),
        )
    }
}

impl MagnitudeSpectrogram {
    /// Elementwise square.
    pub fn squared(&self) -> PowerSpectrogram {
        PowerSpectrogram::new(
            self.frames,
            self.fft_size,
            self.values.iter().map(|v| v * v).collect(),
        )
    }
}

/// Table of `e^{-j*2*pi*q/N}` powers, shared by forward and inverse transforms.
struct DftTable {
    n: usize,
    w: Vec<Complex64>,
}

impl DftTable {
    fn new(n: usize) -> Self {
        let w = (0..n)
            .map(|q| {
                let phi = -2.0 * std::f64::consts::PI * q as f64 / n as f64;
                Complex64::new(phi.cos(), phi.sin())
            })
            .collect();
        Self { n, w }
    }

    /// `e^{-j*2*pi*a*b/N}` for possibly negative `a`.
    fn fwd(&self, a: i64, b: usize) -> Complex64 {
        let idx = (a * b as i64).rem_euclid(self.n as i64) as usize;
        self.w[idx]
    }

    /// `e^{+j*2*pi*a*b/N}`.
    fn inv(&self, a: i64, b: usize) -> Complex64 {
        self.fwd(a, b).conj()
    }
}

/// Forward STFT: `coeffs[m][k] = sum_p w(mR - p) x(p) e^{-j*2*pi*p*k/N}`,
/// with `x` treated as zero outside `[0, n-1]`.
pub fn stft(x: &Signal, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    if x.len() != cfg.signal_len() {
        return Err(Error::SignalLength {
            expected: cfg.signal_len(),
            got: x.len(),
        });
    }
    let n_fft = cfg.fft_size();
    let table = DftTable::new(n_fft);
    let mut out = ComplexSpectrogram::zeros(cfg.num_frames(), n_fft);
    for (m, &c) in cfg.frame_centers().iter().enumerate() {
        // Windowed frame samples (p, w(c-p) * x(p)); everything else is zero.
        let support = cfg.frame_support(c);
        let frame: Vec<(i64, f64)> = support
            .map(|p| (p as i64, cfg.window().tap(c - p as i64) * x.samples()[p]))
            .collect();
        for k in 0..n_fft {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(p, v) in &frame {
                acc += table.fwd(p, k) * v;
            }
            *out.at_mut(m, k) = acc;
        }
    }
    Ok(out)
}

/// Elementwise squared magnitudes.
pub fn power_spec(s: &ComplexSpectrogram) -> PowerSpectrogram {
    PowerSpectrogram::new(
        s.frames(),
        s.fft_size(),
        s.data().iter().map(|c| c.norm_sqr()).collect(),
    )
}

/// Elementwise magnitudes.
pub fn magnitude_spec(s: &ComplexSpectrogram) -> MagnitudeSpectrogram {
    MagnitudeSpectrogram::new(
        s.frames(),
        s.fft_size(),
        s.data().iter().map(|c| c.norm()).collect(),
    )
}

/// Least-squares inverse STFT: per frame, the inverse DFT restricted to the
/// window support, then the overlap-add quotient
/// `x(p) = sum_m w(mR-p) xhat_m(p) / sum_m w^2(mR-p)`.
pub fn ls_inverse(s: &ComplexSpectrogram, cfg: &StftConfig) -> Result<Signal> {
    if s.frames() != cfg.num_frames() || s.fft_size() != cfg.fft_size() {
        return Err(Error::ShapeMismatch {
            frames: cfg.num_frames(),
            bins: cfg.fft_size(),
            got_frames: s.frames(),
            got_bins: s.fft_size(),
        });
    }
    let n = cfg.signal_len();
    let n_fft = cfg.fft_size();
    let table = DftTable::new(n_fft);
    let mut numer = vec![0.0; n];
    let denom = cfg.overlap_weights();
    for (m, &c) in cfg.frame_centers().iter().enumerate() {
        let row = s.row(m);
        for p in cfg.frame_support(c) {
            let w = cfg.window().tap(c - p as i64);
            if w == 0.0 {
                continue;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, coeff) in row.iter().enumerate() {
                acc += coeff * table.inv(p as i64, k);
            }
            numer[p] += w * acc.re / n_fft as f64;
        }
    }
    let samples = numer
        .iter()
        .zip(denom.iter())
        .enumerate()
        .map(|(p, (&num, &den))| {
            if den <= 1e-12 {
                Err(Error::CoverageGap { sample: p })
            } else {
                Ok(num / den)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Signal::new(samples)
}

/// Magnitude mismatch objective: `sum_{m,k} (|A[m][k]| - |B[m][k]|)^2`.
pub fn objective(a: &MagnitudeSpectrogram, b: &MagnitudeSpectrogram) -> Result<f64> {
    if a.frames() != b.frames() || a.fft_size() != b.fft_size() {
        return Err(Error::ShapeMismatch {
            frames: b.frames(),
            bins: b.fft_size(),
            got_frames: a.frames(),
            got_bins: a.fft_size(),
        });
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}
