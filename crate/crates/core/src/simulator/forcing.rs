use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::Vec2;

/// Prescribed displacement of the root anchor, one sample per period.
///
/// The anchor acceleration over `[kT, (k+1)T)` is the second difference
/// `(d[k+1] - 2 d[k] + d[k-1]) / T²` with `d[-1] = 0`, held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSignal {
    pub sample_rate_hz: f64,
    pub displacement: Vec<Vec2>,
}

impl ForcingSignal {
    pub fn new(sample_rate_hz: f64, displacement: Vec<Vec2>) -> Result<Self, SimError> {
        let f = Self {
            sample_rate_hz,
            displacement,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(SimError::InvalidForcing(format!("sample rate {} Hz", self.sample_rate_hz)));
        }
        if self.displacement.len() < 2 {
            return Err(SimError::InvalidForcing("need at least two samples".into()));
        }
        if self.displacement.iter().any(|d| !d.iter().all(|v| v.is_finite())) {
            return Err(SimError::InvalidForcing("non-finite displacement".into()));
        }
        if self.displacement[0] != Vec2::zeros() {
            return Err(SimError::InvalidForcing("displacement must start at zero".into()));
        }
        Ok(())
    }

    /// Anchor acceleration held over forcing interval `k`.
    pub fn interval_acceleration(&self, k: usize) -> Vec2 {
        let t = 1.0 / self.sample_rate_hz;
        let d = &self.displacement;
        let prev = if k == 0 { Vec2::zeros() } else { d[k - 1] };
        (d[k + 1] - d[k] * 2.0 + prev) / (t * t)
    }

    /// Number of whole intervals available.
    pub fn intervals(&self) -> usize {
        self.displacement.len() - 1
    }

    /// Same signal delayed by `samples` (zeros prepended, length kept).
    pub fn delayed(&self, samples: usize) -> Self {
        let n = self.displacement.len();
        let mut d = vec![Vec2::zeros(); samples.min(n)];
        d.extend_from_slice(&self.displacement[..n - samples.min(n)]);
        Self {
            sample_rate_hz: self.sample_rate_hz,
            displacement: d,
        }
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self, SimError> {
        if self.sample_rate_hz != other.sample_rate_hz || self.displacement.len() != other.displacement.len() {
            return Err(SimError::InvalidForcing("signals differ in rate or length".into()));
        }
        Ok(Self {
            sample_rate_hz: self.sample_rate_hz,
            displacement: self
                .displacement
                .iter()
                .zip(&other.displacement)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, SimError> {
        let f: Self = serde_json::from_str(s).map_err(|e| SimError::InvalidForcing(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Integration steps per forcing sample for step `dt`.
    pub(crate) fn steps_per_sample(&self, dt: f64) -> Result<usize, SimError> {
        let ratio = 1.0 / (self.sample_rate_hz * dt);
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-6 * r {
            return Err(SimError::ForcingRateMismatch {
                forcing_hz: self.sample_rate_hz,
                integration_hz: 1.0 / dt,
            });
        }
        Ok(r as usize)
    }
}
