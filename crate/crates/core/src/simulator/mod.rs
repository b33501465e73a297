//! Nonlinear rigid-link tree dynamics, energy-rescaled time stepping,
//! linearization and modal analysis.

mod dynamics;
mod energy;
mod forcing;
mod linear;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, Vec2};

pub use dynamics::{
    accelerations, assemble_step_system, step, step_with, Accelerations, DynamicsSolver, Integrator, Kinematics,
    StepWorkspace,
};
pub use energy::{rescale_energy, total_energy};
pub use forcing::ForcingSignal;
pub use linear::{linearize, modal_analysis, LinearSystem, Mode};
pub use trajectory::{simulate, SimConfig, Trajectory, TrajectoryMeta};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step system is singular (degenerate configuration)")]
    SingularSystem,
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("state has {got} entries, model has {expected} branches")]
    StateMismatch { expected: usize, got: usize },
    #[error("energy cannot be rescaled: {0}")]
    DegenerateEnergy(String),
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("mode {index} has non-positive squared frequency {omega_sq:e} (statically unstable tree)")]
    NonPositiveMode { index: usize, omega_sq: f64 },
    #[error("forcing sample rate {forcing_hz} Hz is not an integer division of the integration rate {integration_hz} Hz")]
    ForcingRateMismatch { forcing_hz: f64, integration_hz: f64 },
    #[error("forcing has {got} samples, simulation needs {needed}")]
    ForcingTooShort { needed: usize, got: usize },
    #[error("invalid forcing: {0}")]
    InvalidForcing(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trajectory file: {0}")]
    Io(String),
    #[error("trajectory file: {0}")]
    Parse(String),
}

/// Kinematic state of the root anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AnchorState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
}

/// Deviation angles and rates of every branch at one instant.
///
/// `theta[i]` is the rotation of branch `i` relative to its parent, measured
/// from the static configuration; the absolute direction of branch `i` is its
/// rest angle plus the sum of `theta` along its root path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    #[serde(default)]
    pub anchor: AnchorState,
}

impl SimState {
    /// Equilibrium state of an `n`-branch tree.
    pub fn rest(n: usize) -> Self {
        Self {
            t: 0.0,
            theta: vec![0.0; n],
            theta_dot: vec![0.0; n],
            anchor: AnchorState::default(),
        }
    }

    pub fn new(theta: Vec<f64>, theta_dot: Vec<f64>) -> Self {
        Self {
            t: 0.0,
            theta,
            theta_dot,
            anchor: AnchorState::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.theta.iter().chain(&self.theta_dot).all(|v| v.is_finite())
            && self.anchor.pos.iter().chain(self.anchor.vel.iter()).all(|v| v.is_finite())
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<(), SimError> {
        for len in [self.theta.len(), self.theta_dot.len()] {
            if len != n {
                return Err(SimError::StateMismatch { expected: n, got: len });
            }
        }
        Ok(())
    }
}
