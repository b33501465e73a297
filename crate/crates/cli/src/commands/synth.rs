use serde::{Deserialize, Serialize};
use vibratree_core::synth::synthetic_connectivity;
use vibratree_core::{synthesize, SynthConfig, Vec2};

use crate::error::CliError;
use crate::manifest::Recorder;
use crate::{Outcome, SynthArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub parent: Vec<Option<usize>>,
    /// Static tip positions, vertical component first.
    pub positions: Vec<Vec2>,
    pub attempts: usize,
}

pub fn run(a: &SynthArgs, args: &[String]) -> Result<Outcome, CliError> {
    let mut rec = Recorder::new("synth", args, &a.out)?;
    let config = SynthConfig {
        levels: a.levels,
        branching: a.branching,
        seed: a.seed,
        stiffness_spread: a.stiffness_spread,
        max_nodes: a.max_nodes,
        gravity: a.gravity,
    };
    let tree = synthesize(&config)?;
    rec.write("model.json", tree.model.to_json_string().as_bytes())?;
    rec.write_json(
        "ground_truth.json",
        &GroundTruth { parent: tree.parent.clone(), positions: tree.positions.clone(), attempts: tree.attempts },
    )?;
    let graph = synthetic_connectivity(&tree, a.spurious_edges, a.seed);
    rec.write("connectivity.json", graph.to_json_string().as_bytes())?;
    rec.config(&serde_json::json!({ "synth": config, "spurious_edges": a.spurious_edges }));
    rec.seed(a.seed);
    let manifest = rec.finish()?;
    Ok(Outcome { stdout: format!("{} branches\n", tree.model.len()), manifest })
}
