use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dynamics::{step_with, DynamicsSolver, Integrator, Kinematics};
use super::energy::{rescale_energy, total_energy};
use super::forcing::ForcingSignal;
use super::{SimError, SimState};
use crate::model::{static_positions, TreeModel, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub n_steps: usize,
    /// Rescale energy after every this many steps; 0 disables rescaling.
    /// Ignored when a forcing is present, since the anchor does work.
    pub rescale_every: usize,
    pub output_rate_hz: f64,
    pub integrator: Integrator,
    pub solver: DynamicsSolver,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            n_steps: 100_000,
            rescale_every: 1,
            output_rate_hz: 24.0,
            integrator: Integrator::ExplicitEuler,
            solver: DynamicsSolver::Assembled,
        }
    }
}

impl SimConfig {
    /// Integration steps per output sample, `round(1 / (dt · rate))`.
    pub fn decimation(&self) -> usize {
        ((1.0 / (self.dt * self.output_rate_hz)).round() as usize).max(1)
    }

    /// Sample rate actually written, `1 / (D · dt)`.
    pub fn effective_rate_hz(&self) -> f64 {
        1.0 / (self.decimation() as f64 * self.dt)
    }
}

/// Per-node tip displacement from the static configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_rate_hz: f64,
    pub source: String,
    pub times: Vec<f64>,
    /// `nodes[i][s]`: displacement of node `i` at sample `s`.
    pub nodes: Vec<Vec<Vec2>>,
    /// Anchor displacement per sample.
    pub anchor: Vec<Vec2>,
    /// `angles[i][s]`: deviation angle of branch `i`; empty when loaded from CSV.
    #[serde(default)]
    pub angles: Vec<Vec<f64>>,
    /// Absolute static position of every node; empty when unknown.
    #[serde(default)]
    pub rest_positions: Vec<Vec2>,
}

/// Sidecar metadata of a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub sample_rate_hz: f64,
    pub node_count: usize,
    pub source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rest_positions: Vec<Vec2>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &[Vec2] {
        &self.nodes[i]
    }

    /// Builds a trajectory from per-node series at a fixed rate.
    pub fn from_nodes(sample_rate_hz: f64, nodes: Vec<Vec<Vec2>>, source: impl Into<String>) -> Self {
        let len = nodes.first().map_or(0, Vec::len);
        Self {
            sample_rate_hz,
            source: source.into(),
            times: (0..len).map(|s| s as f64 / sample_rate_hz).collect(),
            nodes,
            anchor: vec![Vec2::zeros(); len],
            angles: Vec::new(),
            rest_positions: Vec::new(),
        }
    }

    /// Every sample multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for series in out.nodes.iter_mut().chain(std::iter::once(&mut out.anchor)) {
            series.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    pub fn meta(&self) -> TrajectoryMeta {
        TrajectoryMeta {
            sample_rate_hz: self.sample_rate_hz,
            node_count: self.node_count(),
            source: self.source.clone(),
            rest_positions: self.rest_positions.clone(),
        }
    }

    /// Sidecar path for a trajectory CSV: `x.csv` becomes `x.meta.json`.
    pub fn meta_path(csv: &Path) -> PathBuf {
        csv.with_extension("meta.json")
    }

    /// Writes `t,node0_x,node0_y,...,anchor_x,anchor_y` and the sidecar.
    /// `_x` is the vertical component, `_y` the horizontal one.
    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let io = |e: &dyn std::fmt::Display| SimError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
        let mut header = vec!["t".to_string()];
        for i in 0..self.node_count() {
            header.push(format!("node{i}_x"));
            header.push(format!("node{i}_y"));
        }
        header.push("anchor_x".into());
        header.push("anchor_y".into());
        w.write_record(&header).map_err(|e| io(&e))?;
        for s in 0..self.len() {
            let mut row = Vec::with_capacity(header.len());
            row.push(format!("{:e}", self.times[s]));
            for node in &self.nodes {
                row.push(format!("{:e}", node[s][0]));
                row.push(format!("{:e}", node[s][1]));
            }
            row.push(format!("{:e}", self.anchor[s][0]));
            row.push(format!("{:e}", self.anchor[s][1]));
            w.write_record(&row).map_err(|e| io(&e))?;
        }
        w.flush().map_err(|e| io(&e))?;
        let meta = serde_json::to_string_pretty(&self.meta()).expect("metadata serializes");
        std::fs::write(Self::meta_path(path), meta).map_err(|e| io(&e))?;
        Ok(())
    }

    /// Reads a trajectory CSV. The sample rate comes from the sidecar when
    /// present, otherwise from the first time step.
    pub fn read_csv(path: &Path) -> Result<Self, SimError> {
        let parse = |msg: String| SimError::Parse(format!("{}: {msg}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let header = r.headers().map_err(|e| parse(e.to_string()))?.clone();
        if header.get(0) != Some("t") {
            return Err(parse("first column must be t".into()));
        }
        let mut node_cols = Vec::new();
        let mut anchor_cols = None;
        let mut col = 1;
        while col < header.len() {
            let name = &header[col];
            if name == "anchor_x" {
                anchor_cols = Some(col);
                col += 2;
                continue;
            }
            let expected = format!("node{}_x", node_cols.len());
            if name != expected || header.get(col + 1) != Some(&format!("node{}_y", node_cols.len())[..]) {
                return Err(parse(format!("unexpected column {name:?}, wanted {expected:?}")));
            }
            node_cols.push(col);
            col += 2;
        }
        let mut times = Vec::new();
        let mut nodes = vec![Vec::new(); node_cols.len()];
        let mut anchor = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| parse(e.to_string()))?;
            let num = |c: usize| -> Result<f64, SimError> {
                rec.get(c)
                    .ok_or_else(|| parse(format!("row {} is short", line + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse(format!("row {}: {e}", line + 2)))
            };
            times.push(num(0)?);
            for (k, &c) in node_cols.iter().enumerate() {
                nodes[k].push(Vec2::new(num(c)?, num(c + 1)?));
            }
            anchor.push(match anchor_cols {
                Some(c) => Vec2::new(num(c)?, num(c + 1)?),
                None => Vec2::zeros(),
            });
        }
        let meta_path = Self::meta_path(path);
        let (rate, source, rest_positions) = if meta_path.exists() {
            let text = std::fs::read_to_string(&meta_path).map_err(|e| SimError::Io(format!("{}: {e}", meta_path.display())))?;
            let meta: TrajectoryMeta = serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?;
            if meta.node_count != nodes.len() {
                return Err(parse(format!("sidecar declares {} nodes, file has {}", meta.node_count, nodes.len())));
            }
            if !meta.rest_positions.is_empty() && meta.rest_positions.len() != nodes.len() {
                return Err(parse(format!("sidecar has {} rest positions for {} nodes", meta.rest_positions.len(), nodes.len())));
            }
            (meta.sample_rate_hz, meta.source, meta.rest_positions)
        } else if times.len() >= 2 && times[1] > times[0] {
            (1.0 / (times[1] - times[0]), path.display().to_string(), Vec::new())
        } else {
            return Err(parse("cannot determine sample rate".into()));
        };
        Ok(Self {
            sample_rate_hz: rate,
            source,
            times,
            nodes,
            anchor,
            angles: Vec::new(),
            rest_positions,
        })
    }
}

fn record(model: &TreeModel, state: &SimState, statics: &[Vec2], traj: &mut Trajectory) {
    let kin = Kinematics::new(model, state);
    traj.times.push(state.t);
    for i in 0..model.len() {
        traj.nodes[i].push(kin.tips[i] - statics[i]);
        traj.angles[i].push(state.theta[i]);
    }
    traj.anchor.push(state.anchor.pos);
}

/// Integrates from `init` and returns decimated node displacements.
///
/// With a forcing, the anchor follows the prescribed displacement and energy
/// rescaling is off.
pub fn simulate(
    model: &TreeModel,
    init: &SimState,
    config: &SimConfig,
    forcing: Option<&ForcingSignal>,
) -> Result<Trajectory, SimError> {
    let n = model.len();
    init.check_len(n)?;
    if !init.is_finite() {
        return Err(SimError::NonFiniteState { step: 0 });
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(SimError::InvalidTimeStep(config.dt));
    }
    if !(config.output_rate_hz > 0.0 && config.output_rate_hz.is_finite()) {
        return Err(SimError::InvalidConfig(format!("output rate {} Hz", config.output_rate_hz)));
    }
    let decim = config.decimation();
    let per_sample = match forcing {
        Some(f) => {
            f.validate()?;
            let d = f.steps_per_sample(config.dt)?;
            let needed = config.n_steps.div_ceil(d) + 1;
            if f.displacement.len() < needed {
                return Err(SimError::ForcingTooShort {
                    needed,
                    got: f.displacement.len(),
                });
            }
            d
        }
        None => 0,
    };

    let statics = static_positions(model).tips;
    let mut traj = Trajectory {
        sample_rate_hz: config.effective_rate_hz(),
        source: "simulate".into(),
        times: Vec::new(),
        nodes: vec![Vec::new(); n],
        anchor: Vec::new(),
        angles: vec![Vec::new(); n],
        rest_positions: statics.clone(),
    };
    let mut state = init.clone();
    let e0 = total_energy(model, &state);
    let rescale = forcing.is_none() && config.rescale_every > 0;
    record(model, &state, &statics, &mut traj);
    for s in 0..config.n_steps {
        if let Some(f) = forcing {
            state.anchor.acc = f.interval_acceleration(s / per_sample);
        }
        state = step_with(model, &state, config.dt, config.integrator, config.solver)?;
        // Fresh time from the step count keeps sample times exact.
        state.t = init.t + (s + 1) as f64 * config.dt;
        if rescale && (s + 1) % config.rescale_every == 0 {
            state = rescale_energy(model, &state, e0)?;
        }
        if !state.is_finite() {
            return Err(SimError::NonFiniteState { step: s + 1 });
        }
        if (s + 1) % decim == 0 {
            record(model, &state, &statics, &mut traj);
        }
    }
    Ok(traj)
}
