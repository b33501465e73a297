//! Recovering the branch hierarchy of a tree from the motion of its nodes.
//!
//! A tree is modelled as rigid beams joined by torsional springs. The
//! [`simulator`] integrates its nonlinear dynamics and computes modes, the
//! [`spectral`] module turns node trajectories into comparable spectra,
//! [`appearance`] derives connectivity from a contour image, and
//! [`inference`] clusters nodes level by level into a rooted tree that
//! [`metrics`] scores against ground truth.

pub mod appearance;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod simulator;
pub mod spectral;
pub mod synth;

use thiserror::Error;

pub use appearance::{AppearanceError, ConnectivityGraph, ContourMap, Keypoint};
pub use inference::{infer_tree, InferenceError, InferenceParams, InferredTree};
pub use metrics::{edit_distance, evaluate, parent_accuracy, EvalReport, MetricsError};
pub use model::{Branch, ModelError, TreeModel, Vec2};
pub use simulator::{modal_analysis, linearize, simulate, ForcingSignal, Mode, SimConfig, SimError, SimState, Trajectory};
pub use spectral::{SpectralError, SpectralFeatures, Spectrum, Window};
pub use synth::{synthesize, SynthConfig, SynthError, SynthTree};

/// Any error raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Appearance(#[from] AppearanceError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}
