use std::fmt::Debug;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use vibratree_core::inference::InferenceError;
use vibratree_core::metrics::MetricsError;
use vibratree_core::simulator::SimError;
use vibratree_core::spectral::SpectralError;
use vibratree_core::synth::SynthError;
use vibratree_core::{AppearanceError, ModelError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Core(#[from] vibratree_core::Error),
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

from_core!(ModelError, SimError, SpectralError, AppearanceError, InferenceError, MetricsError, SynthError);

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn parse(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Parse { path: path.display().to_string(), message: e.to_string() }
    }

    /// Error kind and process exit code.
    pub fn classify(&self) -> (String, i32) {
        use vibratree_core::Error as E;
        match self {
            CliError::Usage(_) => ("UsageError".into(), EXIT_INPUT),
            CliError::Io { .. } => ("IoError".into(), EXIT_INPUT),
            CliError::Parse { .. } => ("ParseError".into(), EXIT_INPUT),
            CliError::Core(e) => match e {
                E::Model(m) => model_kind(m),
                E::Sim(s) => sim_kind(s),
                E::Spectral(s) => spectral_kind(s),
                E::Appearance(a) => (variant(a), EXIT_INPUT),
                E::Inference(i) => inference_kind(i),
                E::Metrics(MetricsError::Parse(_)) => ("ParseError".into(), EXIT_INPUT),
                E::Metrics(m) => (variant(m), EXIT_INPUT),
                E::Synth(SynthError::Model(m)) => model_kind(m),
                E::Synth(s @ SynthError::UnstableDraw { .. }) => (variant(s), EXIT_NUMERIC),
                E::Synth(s) => (variant(s), EXIT_INPUT),
            },
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        let (kind, code) = self.classify();
        serde_json::to_string(&Report { error: &kind, message: self.to_string(), exit_code: code }).expect("plain struct")
    }
}

/// Name of an enum variant from its `Debug` form.
fn variant(e: &impl Debug) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or_default().to_string()
}

fn model_kind(e: &ModelError) -> (String, i32) {
    match e {
        ModelError::Parse(_) => ("ParseError".into(), EXIT_INPUT),
        ModelError::Io(_) => ("IoError".into(), EXIT_INPUT),
        other => (variant(other), EXIT_INPUT),
    }
}

fn sim_kind(e: &SimError) -> (String, i32) {
    match e {
        SimError::Model(m) => model_kind(m),
        SimError::Parse(_) => ("ParseError".into(), EXIT_INPUT),
        SimError::Io(_) => ("IoError".into(), EXIT_INPUT),
        SimError::SingularSystem
        | SimError::DegenerateEnergy(_)
        | SimError::NonFiniteState { .. }
        | SimError::NonPositiveMode { .. } => (variant(e), EXIT_NUMERIC),
        other => (variant(other), EXIT_INPUT),
    }
}

fn spectral_kind(e: &SpectralError) -> (String, i32) {
    match e {
        SpectralError::DivisionByZero { .. } | SpectralError::DegenerateSpectrum => (variant(e), EXIT_NUMERIC),
        other => (variant(other), EXIT_INPUT),
    }
}

fn inference_kind(e: &InferenceError) -> (String, i32) {
    match e {
        InferenceError::Spectral(s) => spectral_kind(s),
        other => (variant(other), EXIT_INPUT),
    }
}
