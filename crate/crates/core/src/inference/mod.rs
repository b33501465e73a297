//! Recursive CRP-prior Gibbs clustering of node spectra and appearance
//! connectivity into a rooted tree.

mod crp;
mod gibbs;
mod likelihood;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::AppearanceError;
use crate::spectral::SpectralError;

pub use crp::{crp_log_prior, crp_log_prior_sequential};
pub use gibbs::{derive_seed, gibbs_cluster, joint_log_probability, ClusterAssignment};
pub use likelihood::{appearance_log_likelihood, circular_mean, motion_log_likelihood, LocalGraph};
pub use tree::{infer_tree, level_features, remove_root, select_subroot, InferredTree, LevelTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Appearance(#[from] AppearanceError),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("root {root} is not among the {n} nodes")]
    InvalidRoot { root: usize, n: usize },
    #[error("{what}: expected {expected} entries, got {got}")]
    SizeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("features of node {0} do not match the others in length")]
    RaggedFeatures(usize),
}

/// Tuning of the clustering model. Unset fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceParams {
    /// CRP concentration.
    pub crp_alpha: f64,
    /// Amplitude residual scale; infinity (`"inf"` in JSON) disables the amplitude term.
    #[serde(with = "scale_serde")]
    pub sigma_n: f64,
    /// Phase residual scale; infinity disables the phase term.
    #[serde(with = "scale_serde")]
    pub sigma_p: f64,
    /// Weight of each connected same-cluster pair.
    pub alpha_app: f64,
    /// Weight of each node connected to the current root.
    pub beta_app: f64,
    pub n_gibbs: usize,
    /// Absolute Wiener regularization; `None` scales with the root.
    pub epsilon: Option<f64>,
    /// Regularization as a fraction of `max |Y_root|` when `epsilon` is unset.
    pub epsilon_relative: f64,
    pub seed: u64,
    /// Independent chains per level; the best joint probability wins.
    pub restarts: usize,
    /// Lets same-cluster pairs connect through the root in the appearance term.
    pub root_in_pair_paths: bool,
    pub envelope_order: usize,
}

impl Default for InferenceParams {
    fn default() -> Self {
        Self {
            crp_alpha: 1.0,
            sigma_n: 0.1,
            sigma_p: 0.5,
            alpha_app: 1.0,
            beta_app: 1.0,
            n_gibbs: 20,
            epsilon: None,
            epsilon_relative: 1e-3,
            seed: 0,
            restarts: 1,
            root_in_pair_paths: false,
            envelope_order: 5,
        }
    }
}

impl InferenceParams {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: String| Err(InferenceError::InvalidParams(m));
        if !(self.crp_alpha > 0.0 && self.crp_alpha.is_finite()) {
            return bad(format!("crp_alpha must be positive, got {}", self.crp_alpha));
        }
        for (name, v) in [("sigma_n", self.sigma_n), ("sigma_p", self.sigma_p)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("alpha_app", self.alpha_app), ("beta_app", self.beta_app)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.n_gibbs == 0 {
            return bad("n_gibbs must be at least 1".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be finite and non-negative, got {e}"));
            }
        }
        if !(self.epsilon_relative >= 0.0 && self.epsilon_relative.is_finite()) {
            return bad(format!("epsilon_relative must be finite and non-negative, got {}", self.epsilon_relative));
        }
        if self.envelope_order == 0 {
            return bad("envelope_order must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn inv_sigma_n2(&self) -> f64 {
        1.0 / (self.sigma_n * self.sigma_n)
    }

    pub(crate) fn inv_sigma_p2(&self) -> f64 {
        1.0 / (self.sigma_p * self.sigma_p)
    }
}

/// A number, or the string `"inf"` for positive infinity.
mod scale_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_scale_round_trips() {
        let p: InferenceParams = serde_json::from_str(r#"{"sigma_n": "inf", "sigma_p": 2.0}"#).unwrap();
        assert_eq!(p.sigma_n, f64::INFINITY);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains(r#""sigma_n":"inf""#));
        assert_eq!(serde_json::from_str::<InferenceParams>(&json).unwrap(), p);
        assert!(serde_json::from_str::<InferenceParams>(r#"{"sigma_n": "big"}"#).is_err());
    }

    #[test]
    fn defaults_validate() {
        assert!(InferenceParams::default().validate().is_ok());
        let p: InferenceParams = serde_json::from_str(r#"{"sigma_n": 0.2}"#).unwrap();
        assert_eq!(p.sigma_n, 0.2);
        assert_eq!(p.n_gibbs, 20);
    }

    #[test]
    fn infinite_sigma_is_allowed() {
        let p = InferenceParams {
            sigma_n: f64::INFINITY,
            sigma_p: f64::INFINITY,
            ..Default::default()
        };
        assert!(p.validate().is_ok());
        assert_eq!(p.inv_sigma_n2(), 0.0);
    }

    #[test]
    fn bad_values_are_rejected() {
        for p in [
            InferenceParams { crp_alpha: 0.0, ..Default::default() },
            InferenceParams { sigma_p: -1.0, ..Default::default() },
            InferenceParams { n_gibbs: 0, ..Default::default() },
            InferenceParams { alpha_app: f64::NAN, ..Default::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }
}
