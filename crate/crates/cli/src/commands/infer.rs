use serde::{Deserialize, Serialize};
use vibratree_core::appearance::{augment_junctions, build_connectivity, read_keypoints, read_pgm};
use vibratree_core::spectral::trajectory_spectra;
use vibratree_core::{infer_tree, ConnectivityGraph, InferenceParams, Keypoint, Spectrum, Trajectory, Vec2, Window};

use super::{read_json, read_text};
use crate::error::CliError;
use crate::manifest::Recorder;
use crate::svg::tree_overlay;
use crate::{InferArgs, Outcome, SpectraFile};

/// Contents of `infer --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InferConfig {
    /// Window applied when spectra are computed from a trajectory.
    pub window: Window,
    #[serde(flatten)]
    pub params: InferenceParams,
}

/// Pixel coordinates (x right, y down) as vertical-up, horizontal.
fn pixel_position(k: &Keypoint) -> Vec2 {
    Vec2::new(-k.y, k.x)
}

fn keypoint_positions(mut pts: Vec<Keypoint>) -> Vec<Vec2> {
    pts.sort_by_key(|k| k.id);
    pts.iter().map(pixel_position).collect()
}

pub fn run(a: &InferArgs, args: &[String]) -> Result<Outcome, CliError> {
    let mut rec = Recorder::new("infer", args, &a.out)?;
    let mut config: InferConfig = match &a.config {
        Some(p) => {
            rec.input(p)?;
            read_json(p)?
        }
        None => InferConfig::default(),
    };
    if let Some(s) = a.seed {
        config.params.seed = s;
    }
    if let Some(e) = a.epsilon {
        config.params.epsilon = Some(e);
    }
    if let Some(r) = a.restarts {
        config.params.restarts = r;
    }
    if let Some(w) = a.window {
        config.window = w.into();
    }
    if a.appearance_only {
        config.params.sigma_n = f64::INFINITY;
        config.params.sigma_p = f64::INFINITY;
    }
    config.params.validate()?;

    let (spectra, mut positions): (Vec<Spectrum>, Vec<Vec2>) = match (&a.traj, &a.spectra) {
        (Some(t), _) => {
            rec.input(t)?;
            rec.input(&Trajectory::meta_path(t))?;
            let traj = Trajectory::read_csv(t)?;
            let s = trajectory_spectra(&traj, config.window)?.into_iter().map(|(s, _)| s).collect();
            (s, traj.rest_positions)
        }
        (None, Some(p)) => {
            rec.input(p)?;
            let file: SpectraFile = read_json(p)?;
            (file.spectra, file.positions)
        }
        (None, None) => return Err(CliError::Usage("pass --traj or --spectra".into())),
    };
    let n = spectra.len();

    let graph = match (&a.graph, &a.contour, &a.keypoints) {
        (Some(g), _, _) => {
            rec.input(g)?;
            Some(ConnectivityGraph::from_json_str(&read_text(g)?).map_err(|e| CliError::parse(g, e))?)
        }
        (None, Some(c), Some(k)) => {
            rec.input(c)?;
            rec.input(k)?;
            let map = read_pgm(c)?;
            let pts = read_keypoints(k)?;
            let g = build_connectivity(&map, &pts)?;
            positions = keypoint_positions(pts);
            Some(augment_junctions(&g, &positions)?)
        }
        _ => None,
    };
    if let Some(p) = &a.positions {
        rec.input(p)?;
        let pts = vibratree_core::appearance::parse_keypoints_csv(&read_text(p)?)?;
        positions = keypoint_positions(pts);
    }
    if positions.len() != n {
        return Err(CliError::Usage(format!(
            "{} node positions for {n} nodes; pass --positions, --keypoints or a trajectory with rest positions",
            positions.len()
        )));
    }

    let tree = infer_tree(&spectra, graph.as_ref(), &positions, a.root, &config.params)?;
    rec.write_json("tree.json", &tree)?;
    rec.write("tree.svg", tree_overlay(&positions, &tree.parent, graph.as_ref()).as_bytes())?;
    rec.config(&config);
    rec.seed(config.params.seed);
    let manifest = rec.finish()?;
    Ok(Outcome { stdout: format!("{}\n", serde_json::to_string(&tree.parent).expect("parents")), manifest })
}
