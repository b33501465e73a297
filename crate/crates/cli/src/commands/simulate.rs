use serde::{Deserialize, Serialize};
use vibratree_core::model::ModelFile;
use vibratree_core::synth::random_initial_state;
use vibratree_core::{simulate, ForcingSignal, SimConfig, SimState, TreeModel};

use super::read_json;
use crate::error::CliError;
use crate::manifest::Recorder;
use crate::{ModalArgs, Outcome, SimulateArgs};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";

/// Simulation settings as read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimulateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFile>,
    #[serde(flatten)]
    pub sim: SimConfig,
    /// Explicit initial deviations; overrides `init_amplitude`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_theta_dot: Option<Vec<f64>>,
    pub init_amplitude: f64,
}

/// Model from `--model`, else from the config.
pub(crate) fn resolve_model(
    model: Option<&std::path::Path>,
    config: Option<&SimulateConfig>,
    rec: &mut Recorder,
) -> Result<TreeModel, CliError> {
    match (model, config.and_then(|c| c.model.as_ref())) {
        (Some(path), _) => {
            rec.input(path)?;
            Ok(TreeModel::load(path)?)
        }
        (None, Some(m)) => Ok(TreeModel::new(m.gravity, m.branches.clone())?),
        (None, None) => Err(CliError::Usage("no model: pass --model or a config with a \"model\" entry".into())),
    }
}

pub(crate) fn load_config(path: Option<&std::path::Path>, rec: &mut Recorder) -> Result<Option<SimulateConfig>, CliError> {
    path.map(|p| {
        rec.input(p)?;
        read_json(p)
    })
    .transpose()
}

pub fn run(a: &SimulateArgs, args: &[String]) -> Result<Outcome, CliError> {
    let mut rec = Recorder::new("simulate", args, &a.out)?;
    let mut config = load_config(a.config.as_deref(), &mut rec)?.unwrap_or_default();
    let model = resolve_model(a.model.as_deref(), Some(&config), &mut rec)?;
    let n = model.len();

    let s = &mut config.sim;
    s.dt = a.dt.unwrap_or(s.dt);
    s.n_steps = a.steps.unwrap_or(s.n_steps);
    s.output_rate_hz = a.rate.unwrap_or(s.output_rate_hz);
    s.rescale_every = a.rescale_every.unwrap_or(s.rescale_every);
    if let Some(i) = a.integrator {
        s.integrator = i.into();
    }
    if let Some(v) = a.solver {
        s.solver = v.into();
    }
    if let Some(amp) = a.amplitude {
        config.init_amplitude = amp;
    }
    if !(config.init_amplitude >= 0.0 && config.init_amplitude.is_finite()) {
        return Err(CliError::Usage(format!("amplitude must be finite and non-negative, got {}", config.init_amplitude)));
    }

    let init = match &config.init_theta {
        Some(theta) => {
            let dot = config.init_theta_dot.clone().unwrap_or_else(|| vec![0.0; theta.len()]);
            SimState::new(theta.clone(), dot)
        }
        None if config.init_amplitude > 0.0 => random_initial_state(n, config.init_amplitude, a.seed),
        None => SimState::rest(n),
    };
    let forcing = match &a.forcing {
        Some(p) => {
            rec.input(p)?;
            Some(ForcingSignal::load(p)?)
        }
        None => None,
    };

    let traj = simulate(&model, &init, &config.sim, forcing.as_ref())?;
    let csv = rec.path(TRAJECTORY_FILE);
    traj.write_csv(&csv)?;
    rec.written(TRAJECTORY_FILE)?;
    let meta = vibratree_core::Trajectory::meta_path(&csv);
    rec.written(&meta.file_name().expect("file name").to_string_lossy())?;

    rec.config(&config);
    rec.seed(a.seed);
    let manifest = rec.finish()?;
    Ok(Outcome { stdout: format!("{}\n", csv.display()), manifest })
}

/// Shared with `modal`, which accepts the same config files.
pub(crate) fn modal_model(a: &ModalArgs, rec: &mut Recorder) -> Result<TreeModel, CliError> {
    let config = load_config(a.config.as_deref(), rec)?;
    resolve_model(a.model.as_deref(), config.as_ref(), rec)
}
