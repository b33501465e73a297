use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{SpectralError, Spectrum};

/// Half-width, in bins, of the local polynomial fit behind the envelope; also
/// the radius used to snap envelope peaks to spectrum peaks.
pub const ENVELOPE_HALF_WINDOW: usize = 4;

const MAX_ITERATIONS: usize = 200;
const PROMINENCE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMode {
    pub bin: usize,
    pub frequency_hz: f64,
    /// Envelope amplitude at the mode.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeModes {
    pub bin_hz: f64,
    /// Natural-log amplitude envelope per bin.
    pub envelope: Vec<f64>,
    /// Ascending by bin.
    pub modes: Vec<SpectralMode>,
}

impl EnvelopeModes {
    pub fn mode_bins(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.bin).collect()
    }
}

fn sg_weights(left: usize, right: usize, degree: usize) -> Vec<f64> {
    let count = left + right + 1;
    let deg = degree.min(count - 1);
    let scale = left.max(right).max(1) as f64;
    let v = DMatrix::from_fn(count, deg + 1, |r, c| ((r as f64 - left as f64) / scale).powi(c as i32));
    let vt = v.transpose();
    let gram_inv = (&vt * &v).try_inverse().expect("Vandermonde on distinct nodes is full rank");
    let proj = gram_inv * vt;
    proj.row(0).iter().copied().collect()
}

/// Local least-squares polynomial smoothing with window `2h + 1`, truncated
/// at the edges.
pub fn savitzky_golay(values: &[f64], half_window: usize, degree: usize) -> Vec<f64> {
    let n = values.len();
    let mut cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    (0..n)
        .map(|i| {
            let left = i.min(half_window);
            let right = (n - 1 - i).min(half_window);
            let w = cache.entry((left, right)).or_insert_with(|| sg_weights(left, right, degree));
            w.iter().zip(&values[i - left..=i + right]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Height of each strict local maximum above the higher of its two bases.
fn prominence(env: &[f64], i: usize) -> f64 {
    let peak = env[i];
    let mut left_min = peak;
    for j in (0..i).rev() {
        if env[j] > peak {
            break;
        }
        left_min = left_min.min(env[j]);
    }
    let mut right_min = peak;
    for &v in &env[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Upper envelope of the log amplitudes and its prominent peaks.
///
/// The envelope is the fixed point of `E = max(L, SG(E))` where `L` is the
/// log amplitude (floored at `1e-9` of the peak) and `SG` a degree-`order`
/// local polynomial smoother. DC is excluded. Modes are strict local maxima
/// of `E` whose prominence reaches a tenth of its dynamic range, each moved
/// to the largest raw amplitude within the smoothing half-window.
pub fn amplitude_envelope(amps: &[f64], bin_hz: f64, order: usize) -> Result<EnvelopeModes, SpectralError> {
    if order == 0 {
        return Err(SpectralError::InvalidOrder);
    }
    let peak = amps.iter().skip(1).fold(0.0f64, |m, v| m.max(*v));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(SpectralError::DegenerateSpectrum);
    }
    let floor = 1e-9 * peak;
    let log: Vec<f64> = amps.iter().map(|a| a.max(floor).ln()).collect();
    let h = ENVELOPE_HALF_WINDOW.max(order.div_ceil(2) + 1);
    let raw = &log[1..];
    let mut env = raw.to_vec();
    for _ in 0..MAX_ITERATIONS {
        let smooth = savitzky_golay(&env, h, order);
        let mut change = 0.0f64;
        for ((e, s), l) in env.iter_mut().zip(&smooth).zip(raw) {
            let next = s.max(*l);
            change = change.max((next - *e).abs());
            *e = next;
        }
        if change < 1e-10 {
            break;
        }
    }

    let mut envelope = Vec::with_capacity(amps.len());
    envelope.push(log[0]);
    envelope.extend_from_slice(&env);

    let hi = env.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let lo = env.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let range = hi - lo;
    let mut modes: Vec<SpectralMode> = Vec::new();
    if range > 1e-9 && env.len() >= 3 {
        for i in 1..env.len() - 1 {
            if env[i] > env[i - 1] && env[i] > env[i + 1] && prominence(&env, i) >= PROMINENCE_FRACTION * range {
                // Offset by one for the skipped DC bin.
                let centre = i + 1;
                let from = centre.saturating_sub(h).max(1);
                let to = (centre + h).min(amps.len() - 1);
                let bin = (from..=to).fold(centre, |best, b| if amps[b] > amps[best] { b } else { best });
                if let Some(existing) = modes.iter_mut().find(|m| m.bin == bin) {
                    existing.height = existing.height.max(envelope[bin].exp());
                    continue;
                }
                modes.push(SpectralMode {
                    bin,
                    frequency_hz: bin as f64 * bin_hz,
                    height: envelope[bin].exp(),
                });
            }
        }
    }
    modes.sort_by_key(|m| m.bin);
    Ok(EnvelopeModes {
        bin_hz,
        envelope,
        modes,
    })
}

pub fn spectral_envelope(spec: &Spectrum, order: usize) -> Result<EnvelopeModes, SpectralError> {
    amplitude_envelope(&spec.amplitudes(), spec.bin_hz, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference scan: strict local maxima of the raw log amplitude whose
    /// prominence clears a tenth of its dynamic range.
    fn brute_force_peaks(amps: &[f64]) -> Vec<usize> {
        let log: Vec<f64> = amps[1..].iter().map(|a| a.ln()).collect();
        let range = log.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - log.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut out = Vec::new();
        for i in 1..log.len() - 1 {
            if log[i] > log[i - 1] && log[i] > log[i + 1] {
                let mut lmin = log[i];
                let mut j = i;
                while j > 0 && log[j - 1] <= log[i] {
                    j -= 1;
                    lmin = lmin.min(log[j]);
                }
                let mut rmin = log[i];
                let mut j = i;
                while j + 1 < log.len() && log[j + 1] <= log[i] {
                    j += 1;
                    rmin = rmin.min(log[j]);
                }
                if log[i] - lmin.max(rmin) >= 0.1 * range {
                    out.push(i + 1);
                }
            }
        }
        out
    }

    fn lorentz(n: usize, peaks: &[(f64, f64)]) -> Vec<f64> {
        (0..n)
            .map(|k| 1e-3 + peaks.iter().map(|&(c, a)| a / (1.0 + ((k as f64 - c) / 0.5).powi(2))).sum::<f64>())
            .collect()
    }

    #[test]
    fn polynomial_is_reproduced() {
        let xs: Vec<f64> = (0..30).map(|i| {
            let x = i as f64 * 0.1;
            1.0 - 2.0 * x + 0.5 * x.powi(3) - 0.1 * x.powi(5)
        }).collect();
        let s = savitzky_golay(&xs, 4, 5);
        for (a, b) in xs.iter().zip(&s) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_sharp_peak() {
        let amps = lorentz(200, &[(73.0, 5.0)]);
        let env = amplitude_envelope(&amps, 0.5, 5).unwrap();
        assert_eq!(env.mode_bins(), vec![73]);
        assert_eq!(brute_force_peaks(&amps), vec![73]);
        assert!((env.modes[0].frequency_hz - 36.5).abs() < 1e-12);
    }

    #[test]
    fn flat_spectrum_has_no_modes() {
        let env = amplitude_envelope(&[1.0; 64], 1.0, 5).unwrap();
        assert!(env.modes.is_empty());
    }

    #[test]
    fn zero_spectrum_is_degenerate() {
        assert_eq!(amplitude_envelope(&[0.0; 64], 1.0, 5), Err(SpectralError::DegenerateSpectrum));
        assert_eq!(amplitude_envelope(&[1.0; 64], 1.0, 0), Err(SpectralError::InvalidOrder));
    }

    #[test]
    fn two_peaks_with_deep_valley() {
        // 20 dB valley between peaks 8 bins apart.
        let amps = lorentz(128, &[(40.0, 1.0), (48.0, 0.6)]);
        let valley = amps[41..48].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(20.0 * (0.6 / valley).log10() >= 20.0);
        let env = amplitude_envelope(&amps, 1.0, 5).unwrap();
        assert_eq!(env.mode_bins(), brute_force_peaks(&amps));
        assert_eq!(env.mode_bins(), vec![40, 48]);
    }

    proptest! {
        #[test]
        fn separated_peaks_match_brute_force(
            centres in proptest::collection::btree_set(12usize..240, 1..5),
            heights in proptest::collection::vec(0.2f64..5.0, 5),
        ) {
            let centres: Vec<usize> = centres.into_iter().collect();
            prop_assume!(centres.windows(2).all(|w| w[1] - w[0] > 10));
            let peaks: Vec<(f64, f64)> = centres.iter().zip(&heights).map(|(&c, &a)| (c as f64, a)).collect();
            let amps = lorentz(256, &peaks);
            let env = amplitude_envelope(&amps, 1.0, 5).unwrap();
            prop_assert_eq!(env.mode_bins(), centres.clone());
            prop_assert_eq!(brute_force_peaks(&amps), centres);
            for (e, a) in env.envelope.iter().zip(&amps).skip(1) {
                prop_assert!(*e >= a.ln() - 1e-9);
            }
        }
    }
}
