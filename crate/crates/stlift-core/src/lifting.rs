//! Lifted measurement model: rank-1 sensing matrices `S_{k,m} = a a*` built
//! from windowed complex exponentials, the linear forward/adjoint maps on
//! symmetric matrices, and the trace-penalized least-squares objective with
//! its gradient.
//!
//! Everything stays in the real symmetric cone: for real symmetric `X`,
//! `tr(S X) = tr(Re(S) X)`, so atoms are applied support-block by
//! support-block and only the real part is accumulated.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stft::{PowerSpectrogram, StftConfig};

/// Real symmetric n x n matrix standing in for the outer product `x x^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix(DMatrix<f64>);

impl LiftedMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Wraps a matrix, symmetrizing it as `(M + M^T)/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let sym = (&m + m.transpose()) * 0.5;
        Self(sym)
    }

    /// Outer product `x x^T`.
    pub fn from_outer(x: &[f64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(x);
        Self(&v * v.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_dot(&self, other: &LiftedMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

/// One rank-1 measurement: the windowed complex exponential generating
/// `S_{k,m} = a a*`, stored over its in-range support only.
#[derive(Debug, Clone)]
pub struct SensingOp {
    pub frame_center: i64,
    pub freq_index: usize,
    /// Sample indices `p` covered by the window and inside `[0, n-1]`.
    pub support: Vec<usize>,
    /// `a(p) = w(mR - p) e^{+j*2*pi*p*k/N}` at the support positions.
    pub atom: Vec<Complex64>,
}

impl SensingOp {
    /// `tr(S_{k,m}) = ||a||^2`.
    pub fn trace(&self) -> f64 {
        self.atom.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Dense `Re(a a*)` embedded in an n x n matrix; test/debug scale only.
    pub fn dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for (i, &p) in self.support.iter().enumerate() {
            for (j, &q) in self.support.iter().enumerate() {
                m[(p, q)] = (self.atom[i] * self.atom[j].conj()).re;
            }
        }
        m
    }
}

/// One sensing op per (frame, bin) pair, row-major in (m, k): N*T total.
pub fn build_sensing(cfg: &StftConfig, n: usize) -> Vec<SensingOp> {
    let n_fft = cfg.fft_size();
    let mut ops = Vec::with_capacity(cfg.num_frames() * n_fft);
    for &c in cfg.frame_centers() {
        let support: Vec<usize> = cfg.frame_support(c).filter(|&p| p < n).collect();
        let weights: Vec<f64> = support
            .iter()
            .map(|&p| cfg.window().tap(c - p as i64))
            .collect();
        for k in 0..n_fft {
            let atom = support
                .iter()
                .zip(&weights)
                .map(|(&p, &w)| {
                    let phi = 2.0 * std::f64::consts::PI * (p * k) as f64 / n_fft as f64;
                    Complex64::new(w * phi.cos(), w * phi.sin())
                })
                .collect();
            ops.push(SensingOp {
                frame_center: c,
                freq_index: k,
                support: support.clone(),
                atom,
            });
        }
    }
    ops
}

/// Squared-magnitude measurements `b`, row-major in (m, k).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    frames: usize,
    fft_size: usize,
    values: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(frames: usize, fft_size: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), frames * fft_size);
        Self {
            frames,
            fft_size,
            values,
        }
    }

    pub fn from_power(p: &PowerSpectrogram) -> Self {
        Self {
            frames: p.frames(),
            fft_size: p.fft_size(),
            values: p.values().to_vec(),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `tr(S_{k,m} X) = a* X a` per op, computed on the support block only.
pub fn forward(x: &LiftedMatrix, ops: &[SensingOp]) -> Vec<f64> {
    let m = x.matrix();
    ops.iter()
        .map(|op| {
            let mut acc = 0.0;
            for (i, &p) in op.support.iter().enumerate() {
                for (j, &q) in op.support.iter().enumerate() {
                    acc += m[(p, q)] * (op.atom[i].conj() * op.atom[j]).re;
                }
            }
            acc
        })
        .collect()
}

/// `Re(sum r_{k,m} a a*)` accumulated support block by support block.
pub fn adjoint(r: &[f64], ops: &[SensingOp], n: usize) -> Result<LiftedMatrix> {
    if r.len() != ops.len() {
        return Err(Error::MeasurementLength {
            expected: ops.len(),
            got: r.len(),
        });
    }
    let mut out = DMatrix::zeros(n, n);
    for (op, &w) in ops.iter().zip(r) {
        for (i, &p) in op.support.iter().enumerate() {
            for (j, &q) in op.support.iter().enumerate() {
                out[(p, q)] += w * (op.atom[i] * op.atom[j].conj()).re;
            }
        }
    }
    Ok(LiftedMatrix(out))
}

/// `sum (tr(S X) - b)^2 + lambda * tr(X)`.
pub fn objective_penalized(x: &LiftedMatrix, b: &[f64], lambda: f64, ops: &[SensingOp]) -> f64 {
    let f = forward(x, ops);
    let residual: f64 = f.iter().zip(b).map(|(fi, bi)| (fi - bi) * (fi - bi)).sum();
    residual + lambda * x.trace()
}

/// `adjoint(2 (forward(X) - b)) + lambda I`, real symmetric.
pub fn gradient_penalized(
    x: &LiftedMatrix,
    b: &[f64],
    lambda: f64,
    ops: &[SensingOp],
) -> Result<LiftedMatrix> {
    let f = forward(x, ops);
    let r: Vec<f64> = f.iter().zip(b).map(|(fi, bi)| 2.0 * (fi - bi)).collect();
    let mut g = adjoint(&r, ops, x.dim())?;
    for i in 0..x.dim() {
        g.0[(i, i)] += lambda;
    }
    Ok(g)
}

/// Upper bound `2 * sum ||a_{k,m}||^4` on the curvature of the residual term.
pub fn lipschitz_bound(ops: &[SensingOp]) -> f64 {
    2.0 * ops.iter().map(|op| op.trace().powi(2)).sum::<f64>()
}

/// Measurement operator grouped by frame.
///
/// Within one frame all N atoms share the support and window weights and
/// differ only by the complex exponential, so `tr(S_{k,m} X)` over all k is a
/// cosine transform of the diagonal sums of the windowed support block
/// (O(M^2 + N*M) per frame instead of O(N*M^2)). The adjoint transposes the
/// same factorization. Values match the per-op `forward`/`adjoint` up to
/// summation order.
#[derive(Debug, Clone)]
pub struct FrameOperator {
    n: usize,
    fft_size: usize,
    frames: Vec<FrameBlock>,
    /// cos(2*pi*q/N) for q in 0..N.
    cos_table: Vec<f64>,
}

#[derive(Debug, Clone)]
struct FrameBlock {
    support: Vec<usize>,
    weights: Vec<f64>,
}

impl FrameOperator {
    pub fn new(cfg: &StftConfig, n: usize) -> Self {
        let frames = cfg
            .frame_centers()
            .iter()
            .map(|&c| {
                let support: Vec<usize> = cfg.frame_support(c).collect();
                let weights = support
                    .iter()
                    .map(|&p| cfg.window().tap(c - p as i64))
                    .collect();
                FrameBlock { support, weights }
            })
            .collect();
        let n_fft = cfg.fft_size();
        let cos_table = (0..n_fft)
            .map(|q| (2.0 * std::f64::consts::PI * q as f64 / n_fft as f64).cos())
            .collect();
        Self {
            n,
            fft_size: n_fft,
            frames,
            cos_table,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_measurements(&self) -> usize {
        self.frames.len() * self.fft_size
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    fn cos(&self, a: usize, b: usize) -> f64 {
        self.cos_table[(a * b) % self.fft_size]
    }

    pub fn forward(&self, x: &LiftedMatrix) -> Vec<f64> {
        let m = x.matrix();
        let mut out = Vec::with_capacity(self.num_measurements());
        for fr in &self.frames {
            let len = fr.support.len();
            // Diagonal sums of the windowed block: diag[d] = sum over |q-p|=d.
            let mut diag = vec![0.0; len.max(1)];
            for i in 0..len {
                let (p, wp) = (fr.support[i], fr.weights[i]);
                diag[0] += wp * wp * m[(p, p)];
                for j in i + 1..len {
                    let (q, wq) = (fr.support[j], fr.weights[j]);
                    diag[q - p] += 2.0 * wp * wq * m[(p, q)];
                }
            }
            for k in 0..self.fft_size {
                let mut acc = if len > 0 { diag[0] } else { 0.0 };
                for (d, &v) in diag.iter().enumerate().skip(1) {
                    acc += v * self.cos(k, d);
                }
                out.push(acc);
            }
        }
        out
    }

    pub fn adjoint(&self, r: &[f64]) -> Result<LiftedMatrix> {
        if r.len() != self.num_measurements() {
            return Err(Error::MeasurementLength {
                expected: self.num_measurements(),
                got: r.len(),
            });
        }
        let mut out = DMatrix::zeros(self.n, self.n);
        for (fi, fr) in self.frames.iter().enumerate() {
            let row = &r[fi * self.fft_size..(fi + 1) * self.fft_size];
            let len = fr.support.len();
            if len == 0 {
                continue;
            }
            // rho[d] = sum_k r_k cos(2*pi*k*d/N)
            let mut rho = vec![0.0; len];
            for (d, rho_d) in rho.iter_mut().enumerate() {
                *rho_d = row
                    .iter()
                    .enumerate()
                    .map(|(k, &rk)| rk * self.cos(k, d))
                    .sum();
            }
            for i in 0..len {
                let (p, wp) = (fr.support[i], fr.weights[i]);
                for j in 0..len {
                    let (q, wq) = (fr.support[j], fr.weights[j]);
                    out[(p, q)] += wp * wq * rho[q.abs_diff(p)];
                }
            }
        }
        Ok(LiftedMatrix(out))
    }

    pub fn objective(&self, x: &LiftedMatrix, b: &[f64], lambda: f64) -> f64 {
        let f = self.forward(x);
        let residual: f64 = f.iter().zip(b).map(|(fi, bi)| (fi - bi) * (fi - bi)).sum();
        residual + lambda * x.trace()
    }

    pub fn gradient(&self, x: &LiftedMatrix, b: &[f64], lambda: f64) -> Result<LiftedMatrix> {
        let f = self.forward(x);
        let r: Vec<f64> = f.iter().zip(b).map(|(fi, bi)| 2.0 * (fi - bi)).collect();
        let mut g = self.adjoint(&r)?;
        for i in 0..self.n {
            g.0[(i, i)] += lambda;
        }
        Ok(g)
    }

    /// Same bound as [`lipschitz_bound`]: `2 * sum_m N * (sum w^2)^2`.
    pub fn lipschitz_bound(&self) -> f64 {
        2.0 * self.fft_size as f64
            * self
                .frames
                .iter()
                .map(|fr| {
                    fr.weights
                        .iter()
                        .map(|w| w * w)
                        .sum::<f64>()
                        .powi(2)
                })
                .sum::<f64>()
    }
}
