//! Node spectra, regularized frequency responses, spectral envelopes and the
//! normalized amplitude/phase features used for clustering.

mod envelope;

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Vec2;
use crate::simulator::Trajectory;

pub use envelope::{savitzky_golay, spectral_envelope, amplitude_envelope, EnvelopeModes, SpectralMode, ENVELOPE_HALF_WINDOW};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("series is empty")]
    EmptySeries,
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("spectra have {a} and {b} bins")]
    LengthMismatch { a: usize, b: usize },
    #[error("division by zero at bin {bin}: reference is zero where the signal is not")]
    DivisionByZero { bin: usize },
    #[error("regularization must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("spectrum is identically zero")]
    DegenerateSpectrum,
    #[error("envelope order must be at least 1")]
    InvalidOrder,
    #[error("mode bin {bin} outside spectrum of {len} bins")]
    BinOutOfRange { bin: usize, len: usize },
    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// Scalar projection of a 2D series.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalarized {
    pub values: Vec<f64>,
    /// Unit principal axis the samples were projected on.
    pub axis: Vec2,
    /// Set when the total variance is below `1e-15`; `values` are then zero.
    pub zero_motion: bool,
}

/// Projects a 2D displacement series on its principal axis. The sign is
/// chosen so the first sample reaching half the peak magnitude is positive.
pub fn scalarize(series: &[Vec2]) -> Result<Scalarized, SpectralError> {
    if series.len() < 2 {
        return Err(SpectralError::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<Vec2>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for v in series {
        let d = v - mean;
        sxx += d[0] * d[0];
        sxy += d[0] * d[1];
        syy += d[1] * d[1];
    }
    let (sxx, sxy, syy) = (sxx / n, sxy / n, syy / n);
    if sxx + syy < 1e-15 {
        return Ok(Scalarized {
            values: vec![0.0; series.len()],
            axis: Vec2::new(1.0, 0.0),
            zero_motion: true,
        });
    }
    // Leading eigenvector of [[sxx, sxy], [sxy, syy]].
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let axis = Vec2::new(angle.cos(), angle.sin());
    let mut values: Vec<f64> = series.iter().map(|v| v.dot(&axis)).collect();
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let flip = values.iter().find(|v| v.abs() >= 0.5 * peak).is_some_and(|v| *v < 0.0);
    let axis = if flip {
        values.iter_mut().for_each(|v| *v = -*v);
        -axis
    } else {
        axis
    };
    Ok(Scalarized {
        values,
        axis,
        zero_motion: false,
    })
}

/// One-sided complex spectrum of a real series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SpectrumRecord", try_from = "SpectrumRecord")]
pub struct Spectrum {
    pub node: usize,
    /// Hz per bin.
    pub bin_hz: f64,
    /// Transform length after zero padding.
    pub fft_size: usize,
    /// Bins `0..=fft_size/2`.
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectrumRecord {
    node: usize,
    bin_hz: f64,
    fft_size: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<Spectrum> for SpectrumRecord {
    fn from(s: Spectrum) -> Self {
        SpectrumRecord {
            node: s.node,
            bin_hz: s.bin_hz,
            fft_size: s.fft_size,
            re: s.coeffs.iter().map(|c| c.re).collect(),
            im: s.coeffs.iter().map(|c| c.im).collect(),
        }
    }
}

impl TryFrom<SpectrumRecord> for Spectrum {
    type Error = String;
    fn try_from(r: SpectrumRecord) -> Result<Self, String> {
        if r.re.len() != r.im.len() {
            return Err(format!("re has {} entries, im has {}", r.re.len(), r.im.len()));
        }
        if r.re.len() != r.fft_size / 2 + 1 {
            return Err(format!("{} bins do not match fft_size {}", r.re.len(), r.fft_size));
        }
        Ok(Spectrum {
            node: r.node,
            bin_hz: r.bin_hz,
            fft_size: r.fft_size,
            coeffs: r.re.into_iter().zip(r.im).map(|(a, b)| Complex64::new(a, b)).collect(),
        })
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    pub fn power(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Signal energy recovered from the one-sided spectrum.
    pub fn parseval_energy(&self) -> f64 {
        let n = self.fft_size;
        let mut e = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let w = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            e += w * c.norm_sqr();
        }
        e / n as f64
    }

    /// Bin of largest magnitude, excluding DC.
    pub fn peak_bin(&self) -> Option<usize> {
        (1..self.len()).max_by(|&a, &b| self.coeffs[a].norm().total_cmp(&self.coeffs[b].norm()))
    }
}

pub fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect()
}

/// Windowed series zero-padded to the next power of two.
pub fn prepare_series(series: &[f64], window: Window) -> Vec<f64> {
    let size = series.len().next_power_of_two();
    let mut buf: Vec<f64> = match window {
        Window::None => series.to_vec(),
        Window::Hann => series.iter().zip(hann(series.len())).map(|(x, w)| x * w).collect(),
    };
    buf.resize(size, 0.0);
    buf
}

/// One-sided spectrum of `series`, zero-padded to a power of two.
pub fn fft_spectrum(series: &[f64], sample_rate_hz: f64, window: Window) -> Result<Spectrum, SpectralError> {
    if series.is_empty() {
        return Err(SpectralError::EmptySeries);
    }
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(SpectralError::InvalidSampleRate(sample_rate_hz));
    }
    let buf = prepare_series(series, window);
    let size = buf.len();
    let mut data: Vec<Complex64> = buf.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut data);
    data.truncate(size / 2 + 1);
    Ok(Spectrum {
        node: 0,
        bin_hz: sample_rate_hz / size as f64,
        fft_size: size,
        coeffs: data,
    })
}

/// Default regularization: `1e-3 · max |Y_root|`.
pub fn default_epsilon(root: &Spectrum) -> f64 {
    1e-3 * root.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()))
}

/// `Y · conj(Y_root) / (|Y_root|² + ε²)` per bin. With `ε = 0` a bin where
/// both spectra vanish yields zero.
pub fn frequency_response(y: &Spectrum, root: &Spectrum, eps: f64) -> Result<Spectrum, SpectralError> {
    if y.len() != root.len() {
        return Err(SpectralError::LengthMismatch { a: y.len(), b: root.len() });
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(SpectralError::InvalidEpsilon(eps));
    }
    let e2 = eps * eps;
    let mut coeffs = Vec::with_capacity(y.len());
    for (bin, (a, r)) in y.coeffs.iter().zip(&root.coeffs).enumerate() {
        let den = r.norm_sqr() + e2;
        if den == 0.0 {
            if a.norm_sqr() != 0.0 {
                return Err(SpectralError::DivisionByZero { bin });
            }
            coeffs.push(Complex64::new(0.0, 0.0));
        } else {
            coeffs.push(a * r.conj() / den);
        }
    }
    Ok(Spectrum {
        node: y.node,
        bin_hz: y.bin_hz,
        fft_size: y.fft_size,
        coeffs,
    })
}

/// Normalized amplitude over all bins and phase at the mode bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatures {
    pub node_id: usize,
    pub bin_hz: f64,
    pub amplitude_norm: Vec<f64>,
    pub mode_bins: Vec<usize>,
    pub phase: Vec<f64>,
}

/// Maps an angle to `(-π, π]`.
pub fn principal_phase(c: Complex64) -> f64 {
    let p = c.arg();
    if p <= -PI {
        p + 2.0 * PI
    } else {
        p
    }
}

pub fn extract_features(spec: &Spectrum, mode_bins: &[usize]) -> Result<SpectralFeatures, SpectralError> {
    let norm = spec.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(SpectralError::DegenerateSpectrum);
    }
    for &bin in mode_bins {
        if bin >= spec.len() {
            return Err(SpectralError::BinOutOfRange { bin, len: spec.len() });
        }
    }
    Ok(SpectralFeatures {
        node_id: spec.node,
        bin_hz: spec.bin_hz,
        amplitude_norm: spec.coeffs.iter().map(|c| c.norm() / norm).collect(),
        mode_bins: mode_bins.to_vec(),
        phase: mode_bins.iter().map(|&b| principal_phase(spec.coeffs[b])).collect(),
    })
}

/// Spectrum of every node of a trajectory after principal-axis projection,
/// with the zero-motion flag of each node.
pub fn trajectory_spectra(traj: &Trajectory, window: Window) -> Result<Vec<(Spectrum, bool)>, SpectralError> {
    (0..traj.node_count())
        .map(|i| {
            let s = scalarize(traj.node(i))?;
            let mut spec = fft_spectrum(&s.values, traj.sample_rate_hz, window)?;
            spec.node = i;
            Ok((spec, s.zero_motion))
        })
        .collect()
}
