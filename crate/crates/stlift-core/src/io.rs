//! File formats: plain-text and JSON signals, JSON spectrograms and
//! measurement sets, and JSON solve results.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::MeasurementSet;
use crate::solver::{SolveResult, SolveStatus};
use crate::stft::{ComplexSpectrogram, Signal};

#[derive(Debug, Serialize, Deserialize)]
struct SignalJson {
    n: usize,
    samples: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrogramJson {
    #[serde(rename = "T")]
    frames: usize,
    #[serde(rename = "N")]
    fft_size: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasurementJson {
    #[serde(rename = "T")]
    frames: usize,
    #[serde(rename = "N")]
    fft_size: usize,
    b: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveResultJson {
    pub n: usize,
    pub signal: Vec<f64>,
    pub rank_ratio: f64,
    pub lambda_path: Vec<f64>,
    pub objective_final: f64,
    pub status: String,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    Error::Json {
        path: path.display().to_string(),
        source: e,
    }
}

/// Reads a signal: `.json` files use `{"n": int, "samples": [...]}`,
/// anything else is one decimal sample per line.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let parsed: SignalJson = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
        if parsed.samples.len() != parsed.n {
            return Err(Error::Parse {
                path: path.display().to_string(),
                reason: format!(
                    "declared n={} but {} samples given",
                    parsed.n,
                    parsed.samples.len()
                ),
            });
        }
        Signal::new(parsed.samples)
    } else {
        let samples = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    reason: format!("'{l}': {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Signal::new(samples)
    }
}

pub fn write_signal_text(signal: &Signal, path: &Path) -> Result<()> {
    let mut out = String::new();
    for s in signal.samples() {
        out.push_str(&format!("{s}\n"));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn write_signal_json(signal: &Signal, path: &Path) -> Result<()> {
    let dto = SignalJson {
        n: signal.len(),
        samples: signal.samples().to_vec(),
    };
    let text = serde_json::to_string_pretty(&dto).map_err(|e| json_err(path, e))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn spectrogram_to_json(s: &ComplexSpectrogram) -> String {
    let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..s.frames())
            .map(|m| s.row(m).iter().map(f).collect())
            .collect()
    };
    let dto = SpectrogramJson {
        frames: s.frames(),
        fft_size: s.fft_size(),
        re: rows(|c| c.re),
        im: rows(|c| c.im),
    };
    serde_json::to_string(&dto).expect("spectrogram serialization is infallible")
}

pub fn write_spectrogram(s: &ComplexSpectrogram, path: &Path) -> Result<()> {
    std::fs::write(path, spectrogram_to_json(s)).map_err(|e| io_err(path, e))
}

pub fn read_spectrogram(path: &Path) -> Result<ComplexSpectrogram> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let dto: SpectrogramJson = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
    let bad_shape = |reason: &str| Error::Parse {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if dto.re.len() != dto.frames || dto.im.len() != dto.frames {
        return Err(bad_shape("re/im row count does not match T"));
    }
    let mut data = Vec::with_capacity(dto.frames * dto.fft_size);
    for (re_row, im_row) in dto.re.iter().zip(&dto.im) {
        if re_row.len() != dto.fft_size || im_row.len() != dto.fft_size {
            return Err(bad_shape("re/im column count does not match N"));
        }
        data.extend(
            re_row
                .iter()
                .zip(im_row)
                .map(|(&re, &im)| Complex64::new(re, im)),
        );
    }
    Ok(ComplexSpectrogram::new(dto.frames, dto.fft_size, data))
}

pub fn write_measurements(b: &MeasurementSet, path: &Path) -> Result<()> {
    let dto = MeasurementJson {
        frames: b.frames(),
        fft_size: b.fft_size(),
        b: b.values()
            .chunks(b.fft_size())
            .map(|row| row.to_vec())
            .collect(),
    };
    let text = serde_json::to_string(&dto).map_err(|e| json_err(path, e))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let dto: MeasurementJson = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
    let values: Vec<f64> = dto.b.into_iter().flatten().collect();
    if values.len() != dto.frames * dto.fft_size {
        return Err(Error::Parse {
            path: path.display().to_string(),
            reason: "b shape does not match T x N".to_string(),
        });
    }
    Ok(MeasurementSet::new(dto.frames, dto.fft_size, values))
}

pub fn solve_result_to_json(res: &SolveResult) -> SolveResultJson {
    SolveResultJson {
        n: res.signal.len(),
        signal: res.signal.samples().to_vec(),
        rank_ratio: res.rank_ratio,
        lambda_path: res.lambda_path.clone(),
        objective_final: res.objective_final,
        status: match res.status {
            SolveStatus::ConvergedRank1 => "converged-rank1",
            SolveStatus::MaxIters => "max-iters",
            SolveStatus::Diverged => "diverged",
        }
        .to_string(),
    }
}

pub fn write_solve_result(res: &SolveResult, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&solve_result_to_json(res)).map_err(|e| json_err(path, e))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
