//! Random stable trees with known structure for end-to-end tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::ConnectivityGraph;
use crate::model::{direction, static_positions, Branch, ModelError, TreeModel, Vec2};
use crate::simulator::{linearize, modal_analysis, SimState};

pub const MAX_ATTEMPTS: usize = 100;
const TRUNK_HZ: f64 = 4.0;
const BASE_HZ: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("no stable tree after {attempts} draws")]
    UnstableDraw { attempts: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Depth of the full tree; 1 is a lone trunk.
    pub levels: usize,
    /// Children per non-leaf branch.
    pub branching: usize,
    pub seed: u64,
    /// Stiffness ratio between consecutive siblings.
    pub stiffness_spread: f64,
    /// Keeps only the first nodes in breadth-first order.
    pub max_nodes: Option<usize>,
    pub gravity: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            branching: 2,
            seed: 0,
            stiffness_spread: 4.0,
            max_nodes: None,
            gravity: 9.81,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.branching == 0 && self.levels > 1 {
            return bad("branching must be at least 1".into());
        }
        if !(self.stiffness_spread >= 1.0 && self.stiffness_spread.is_finite()) {
            return bad(format!("stiffness_spread must be at least 1, got {}", self.stiffness_spread));
        }
        if self.max_nodes == Some(0) {
            return bad("max_nodes must be at least 1".into());
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return bad(format!("gravity must be finite and non-negative, got {}", self.gravity));
        }
        Ok(())
    }

    /// Node count of the generated tree.
    pub fn node_count(&self) -> usize {
        let mut total = 0usize;
        let mut width = 1usize;
        for _ in 0..self.levels {
            total = total.saturating_add(width);
            width = width.saturating_mul(self.branching);
        }
        self.max_nodes.map_or(total, |m| total.min(m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTree {
    pub model: TreeModel,
    /// Ground-truth parent of every node (the tip of each branch).
    pub parent: Vec<Option<usize>>,
    /// Static tip positions.
    pub positions: Vec<Vec2>,
    pub attempts: usize,
}

/// Draws a tree whose linearization has only positive modes.
///
/// Nodes are numbered breadth first. Each level halves the mass and
/// shortens the length by 0.7; siblings fan out within ±50° of their parent.
/// Each joint is sized so that its subtree, swinging rigidly, reaches a
/// target frequency on top of the static gravity moment of the subtree.
/// The target is inherited from the parent and multiplied by
/// `stiffness_spread^(j / 2d)` for the `j`-th sibling at depth `d`, so the
/// subtrees under the trunk occupy frequency bands a factor
/// `√stiffness_spread` apart and deeper splits stay inside their band.
pub fn synthesize(config: &SynthConfig) -> Result<SynthTree, SynthError> {
    config.validate()?;
    let n = config.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for attempt in 1..=MAX_ATTEMPTS {
        let branches = draw(config, n, &mut rng)?;
        let model = TreeModel::new(config.gravity, branches)?;
        let stable = linearize(&model).and_then(|sys| modal_analysis(&sys)).is_ok();
        if stable {
            let parent = (0..n).map(|i| model.parent(i)).collect();
            let positions = static_positions(&model).tips;
            return Ok(SynthTree { model, parent, positions, attempts: attempt });
        }
    }
    Err(SynthError::UnstableDraw { attempts: MAX_ATTEMPTS })
}

fn draw(config: &SynthConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Branch>, SynthError> {
    let b = config.branching;
    let mut jitter = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    // Geometry and target frequency first, stiffness once subtrees are known.
    let mut branches = vec![Branch::new(None, 4.0 * jitter(0.9, 1.1), jitter(0.9, 1.1), 1.0, jitter(-0.05, 0.05))];
    let mut target_hz = vec![TRUNK_HZ * jitter(0.95, 1.05)];
    let mut depth = vec![0usize];
    let mut next_parent = 0;
    while branches.len() < n {
        let p = next_parent;
        next_parent += 1;
        let d = depth[p] + 1;
        let pb = branches[p];
        for j in 0..b {
            if branches.len() == n {
                break;
            }
            let fan = if b == 1 { 0.0 } else { (j as f64 / (b - 1) as f64 - 0.5) * 2.0 * 50f64.to_radians() };
            let angle = pb.rest_angle + fan + jitter(-8.0, 8.0).to_radians();
            let length = pb.length * 0.7 * jitter(0.9, 1.1);
            let mass = pb.mass * 0.5 * jitter(0.9, 1.1);
            // Siblings scale their whole subtree, so every subtree keeps a
            // frequency band of its own.
            let inherited = if p == 0 { BASE_HZ } else { target_hz[p] };
            target_hz.push(inherited * config.stiffness_spread.powf(j as f64 / (2.0 * d as f64)) * jitter(0.95, 1.05));
            branches.push(Branch::new(Some(p), mass, length, 1.0, angle));
            depth.push(d);
        }
    }

    let model = TreeModel::new(config.gravity, branches.clone())?;
    let geo = static_positions(&model);
    for i in 0..n {
        let o = geo.joint(&model, i);
        let (mut inertia, mut lever) = (0.0, 0.0);
        for s in model.subtree(i) {
            let bs = model.branch(s);
            let c = geo.joint(&model, s) + direction(bs.rest_angle) * (0.5 * bs.length);
            let r = (c - o).norm();
            inertia += bs.mass * r * r + bs.inertia_center();
            lever += bs.mass * r;
        }
        let w = 2.0 * PI * target_hz[i];
        branches[i].stiffness = inertia * w * w + config.gravity * lever;
    }
    Ok(branches)
}

/// Tree edges plus up to `spurious` extra edges, each joining two nodes
/// whose branch segments cross in the static pose.
pub fn synthetic_connectivity(tree: &SynthTree, spurious: usize, seed: u64) -> ConnectivityGraph {
    let n = tree.parent.len();
    let mut g = ConnectivityGraph::new(n);
    for (i, p) in tree.parent.iter().enumerate() {
        if let Some(p) = p {
            g.add_edge(i, *p);
        }
    }
    if spurious == 0 {
        return g;
    }
    let geo = static_positions(&tree.model);
    let seg = |i: usize| (geo.joint(&tree.model, i), geo.tips[i]);
    let mut crossing = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !g.has_edge(i, j) && segments_cross(seg(i), seg(j)) {
                crossing.push((i, j));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..spurious.min(crossing.len()) {
        let k = rng.random_range(0..crossing.len());
        let (i, j) = crossing.swap_remove(k);
        g.add_edge(i, j);
    }
    g
}

fn segments_cross((a, b): (Vec2, Vec2), (c, d): (Vec2, Vec2)) -> bool {
    let orient = |p: Vec2, q: Vec2, r: Vec2| crate::model::cross(&(q - p), &(r - p));
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Uniform random deviations in `[-amplitude, amplitude]` at rest velocity.
pub fn random_initial_state(n: usize, amplitude: f64, seed: u64) -> SimState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = (0..n).map(|_| amplitude * (2.0 * rng.random::<f64>() - 1.0)).collect();
    SimState::new(theta, vec![0.0; n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let one = synthesize(&SynthConfig { levels: 1, ..Default::default() }).unwrap();
        assert_eq!(one.model.len(), 1);
        assert_eq!(one.parent, vec![None]);
        let seven = synthesize(&SynthConfig::default()).unwrap();
        assert_eq!(seven.model.len(), 7);
        assert_eq!(seven.parent, vec![None, Some(0), Some(0), Some(1), Some(1), Some(2), Some(2)]);
        let capped = synthesize(&SynthConfig { levels: 6, max_nodes: Some(50), ..Default::default() }).unwrap();
        assert_eq!(capped.model.len(), 50);
    }

    #[test]
    fn deterministic() {
        let c = SynthConfig { seed: 9, ..Default::default() };
        assert_eq!(synthesize(&c).unwrap(), synthesize(&c).unwrap());
    }

    #[test]
    fn every_draw_is_stable() {
        for seed in 0..20 {
            for (levels, branching) in [(2, 3), (3, 2), (4, 2)] {
                let t = synthesize(&SynthConfig { levels, branching, seed, ..Default::default() }).unwrap();
                let modes = modal_analysis(&linearize(&t.model).unwrap()).unwrap();
                assert!(modes.iter().all(|m| m.omega > 0.0));
                assert_eq!(crate::metrics::validate_parents(&t.parent), Ok(0));
            }
        }
    }

    #[test]
    fn sibling_stiffness_follows_spread() {
        let t = synthesize(&SynthConfig { levels: 2, stiffness_spread: 9.0, gravity: 0.0, ..Default::default() }).unwrap();
        let (a, b) = (t.model.branch(1), t.model.branch(2));
        let ratio = (b.stiffness / b.inertia_pivot()) / (a.stiffness / a.inertia_pivot());
        assert!(ratio > 9.0 * 0.8 && ratio < 9.0 * 1.25, "{ratio}");
    }

    #[test]
    fn bad_configs() {
        assert!(synthesize(&SynthConfig { levels: 0, ..Default::default() }).is_err());
        assert!(synthesize(&SynthConfig { stiffness_spread: 0.5, ..Default::default() }).is_err());
    }

    #[test]
    fn connectivity_contains_tree_edges() {
        let t = synthesize(&SynthConfig { levels: 4, ..Default::default() }).unwrap();
        let g = synthetic_connectivity(&t, 0, 1);
        assert_eq!(g.edge_count(), t.parent.len() - 1);
        let noisy = synthetic_connectivity(&t, 3, 1);
        assert!(noisy.edge_count() >= g.edge_count());
        for (i, p) in t.parent.iter().enumerate() {
            if let Some(p) = p {
                assert!(noisy.has_edge(i, *p));
            }
        }
    }

    #[test]
    fn crossing_test() {
        let v = |a: f64, b: f64| Vec2::new(a, b);
        assert!(segments_cross((v(0.0, 0.0), v(1.0, 1.0)), (v(0.0, 1.0), v(1.0, 0.0))));
        assert!(!segments_cross((v(0.0, 0.0), v(1.0, 0.0)), (v(0.0, 1.0), v(1.0, 1.0))));
    }
}
