//! Tree topology, per-branch physical parameters and the geometric
//! conventions every other module relies on.
//!
//! Axes: component 0 of a [`Vec2`] is vertical (up), component 1 is
//! horizontal. A branch direction at absolute angle `φ` from the vertical is
//! `n(φ) = (cos φ, sin φ)`. Node `i` is the tip of branch `i`; the base of the
//! root branch is the anchor.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Unit direction at absolute angle `phi` from the vertical.
#[inline]
pub fn direction(phi: f64) -> Vec2 {
    Vec2::new(phi.cos(), phi.sin())
}

/// Rotates `v` by +90 degrees in the (vertical, horizontal) frame, so that a
/// point at offset `v` from a pivot moves with velocity `omega * perp(v)`.
#[inline]
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v[1], v[0])
}

/// Planar cross product `a x b`, positive for rotations in the direction of
/// increasing angle.
#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("tree has no branches")]
    Empty,
    #[error("branch {0} is part of a parent cycle")]
    CycleDetected(usize),
    #[error("branch {0} is a second root")]
    MultipleRoots(usize),
    #[error("no root branch (every branch has a parent)")]
    NoRoot,
    #[error("branch {branch} refers to missing parent {parent}")]
    UnknownParent { branch: usize, parent: usize },
    #[error("branch {branch}: {param} must be strictly positive and finite, got {value}")]
    NonPositiveParameter {
        branch: usize,
        param: &'static str,
        value: f64,
    },
    #[error("branch {branch}: {param} must be finite, got {value}")]
    NonFinite {
        branch: usize,
        param: &'static str,
        value: f64,
    },
    #[error("gravity must be finite and non-negative, got {0}")]
    InvalidGravity(f64),
    #[error("model file: {0}")]
    Io(String),
    #[error("model file: {0}")]
    Parse(String),
}

/// One rigid uniform beam hinged to its parent through a torsional spring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub parent: Option<usize>,
    /// kg
    pub mass: f64,
    /// m
    pub length: f64,
    /// Torsional stiffness at the joint with the parent, N·m/rad.
    pub stiffness: f64,
    /// Absolute direction from the vertical in the static configuration, rad.
    pub rest_angle: f64,
}

impl Branch {
    pub fn new(parent: Option<usize>, mass: f64, length: f64, stiffness: f64, rest_angle: f64) -> Self {
        Self {
            parent,
            mass,
            length,
            stiffness,
            rest_angle,
        }
    }

    /// Moment of inertia about the center of mass, `m l² / 12`.
    pub fn inertia_center(&self) -> f64 {
        self.mass * self.length * self.length / 12.0
    }

    /// Moment of inertia about the pivot end, `m l² / 3`.
    pub fn inertia_pivot(&self) -> f64 {
        self.mass * self.length * self.length / 3.0
    }
}

/// `(I_center, I_pivot)` of a uniform beam.
pub fn moment_of_inertia(branch: &Branch) -> Result<(f64, f64), ModelError> {
    check_positive(0, "mass", branch.mass)?;
    check_positive(0, "length", branch.length)?;
    Ok((branch.inertia_center(), branch.inertia_pivot()))
}

fn check_positive(branch: usize, param: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveParameter { branch, param, value })
    }
}

/// Validates a raw branch list and returns the root id.
///
/// Checks, in order: physical parameters, parent references, cycles, and
/// the single-root condition.
pub fn validate_branches(branches: &[Branch]) -> Result<usize, ModelError> {
    if branches.is_empty() {
        return Err(ModelError::Empty);
    }
    let n = branches.len();
    for (i, b) in branches.iter().enumerate() {
        check_positive(i, "mass", b.mass)?;
        check_positive(i, "length", b.length)?;
        check_positive(i, "stiffness", b.stiffness)?;
        if !b.rest_angle.is_finite() {
            return Err(ModelError::NonFinite {
                branch: i,
                param: "rest_angle",
                value: b.rest_angle,
            });
        }
        if let Some(p) = b.parent {
            if p >= n {
                return Err(ModelError::UnknownParent { branch: i, parent: p });
            }
        }
    }

    // 0 = unvisited, 1 = on the current parent walk, 2 = known to reach a root
    let mut state = vec![0u8; n];
    for start in 0..n {
        let mut walk = Vec::new();
        let mut cur = start;
        loop {
            match state[cur] {
                2 => break,
                1 => return Err(ModelError::CycleDetected(cur)),
                _ => {}
            }
            state[cur] = 1;
            walk.push(cur);
            match branches[cur].parent {
                Some(p) => cur = p,
                None => break,
            }
        }
        for w in walk {
            state[w] = 2;
        }
    }

    let mut roots = branches.iter().enumerate().filter(|(_, b)| b.parent.is_none()).map(|(i, _)| i);
    let root = roots.next().ok_or(ModelError::NoRoot)?;
    if let Some(second) = roots.next() {
        return Err(ModelError::MultipleRoots(second));
    }
    Ok(root)
}

/// On-disk shape of a tree model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub gravity: f64,
    pub branches: Vec<Branch>,
}

/// A validated rooted tree of branches. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct TreeModel {
    gravity: f64,
    branches: Vec<Branch>,
    root: usize,
    children: Vec<Vec<usize>>,
    /// Parents before children (breadth first from the root).
    order: Vec<usize>,
    /// Joint torque carried by each spring in the static configuration.
    preload: Vec<f64>,
}

impl TryFrom<ModelFile> for TreeModel {
    type Error = ModelError;

    fn try_from(file: ModelFile) -> Result<Self, Self::Error> {
        TreeModel::new(file.gravity, file.branches)
    }
}

impl From<TreeModel> for ModelFile {
    fn from(model: TreeModel) -> Self {
        ModelFile {
            gravity: model.gravity,
            branches: model.branches,
        }
    }
}

impl TreeModel {
    pub fn new(gravity: f64, branches: Vec<Branch>) -> Result<Self, ModelError> {
        if !(gravity.is_finite() && gravity >= 0.0) {
            return Err(ModelError::InvalidGravity(gravity));
        }
        let root = validate_branches(&branches)?;
        let n = branches.len();
        let mut children = vec![Vec::new(); n];
        for (i, b) in branches.iter().enumerate() {
            if let Some(p) = b.parent {
                children[p].push(i);
            }
        }
        let mut order = Vec::with_capacity(n);
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let cur = order[head];
            head += 1;
            order.extend_from_slice(&children[cur]);
        }
        let mut model = TreeModel {
            gravity,
            branches,
            root,
            children,
            order,
            preload: vec![0.0; n],
        };
        model.preload = model.compute_preload();
        Ok(model)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Gravity acceleration vector (pointing down the vertical axis).
    pub fn gravity_vec(&self) -> Vec2 {
        Vec2::new(-self.gravity, 0.0)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, i: usize) -> &Branch {
        &self.branches[i]
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.branches[i].parent
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Branch ids with every parent listed before its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Branch ids from the root down to and including `i`.
    pub fn path(&self, i: usize) -> Vec<usize> {
        let mut path = vec![i];
        let mut cur = i;
        while let Some(p) = self.branches[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// True if `ancestor` lies on the root path of `i` (including `i` itself).
    pub fn is_on_path(&self, ancestor: usize, i: usize) -> bool {
        let mut cur = Some(i);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.branches[c].parent;
        }
        false
    }

    /// Branch ids of the subtree rooted at `i`, `i` first.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut head = 0;
        while head < out.len() {
            let cur = out[head];
            head += 1;
            out.extend_from_slice(&self.children[cur]);
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.branches.iter().map(|b| b.mass).sum()
    }

    /// Static spring torque at joint `i` (acting on branch `i`) that holds the
    /// tree in its rest configuration against gravity.
    pub fn preload(&self, i: usize) -> f64 {
        self.preload[i]
    }

    /// Tree over the subtree rooted at `i`, re-indexed densely in breadth-first
    /// order with the subtree root clamped at a fixed anchor. Returns the model
    /// and the original branch id of each new branch.
    pub fn detach_subtree(&self, i: usize) -> (TreeModel, Vec<usize>) {
        let ids = self.subtree(i);
        let mut new_index = vec![usize::MAX; self.len()];
        for (k, &b) in ids.iter().enumerate() {
            new_index[b] = k;
        }
        let branches = ids
            .iter()
            .map(|&b| {
                let mut br = self.branches[b];
                br.parent = if b == i { None } else { br.parent.map(|p| new_index[p]) };
                br
            })
            .collect();
        let model = TreeModel::new(self.gravity, branches).expect("subtree of a valid tree is valid");
        (model, ids)
    }

    fn compute_preload(&self) -> Vec<f64> {
        // Gravity torque about joint i of everything hanging from it, negated.
        let geom = static_positions(self);
        let g = self.gravity_vec();
        let mut preload = vec![0.0; self.len()];
        for &i in &self.order {
            let joint = geom.joint(self, i);
            let mut torque = 0.0;
            for b in self.subtree(i) {
                let com = geom.joint(self, b) + direction(self.branches[b].rest_angle) * (0.5 * self.branches[b].length);
                torque += cross(&(com - joint), &(g * self.branches[b].mass));
            }
            preload[i] = -torque;
        }
        preload
    }
}

/// Node positions in the static configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGeometry {
    /// Fixed base of the root branch.
    pub anchor: Vec2,
    /// Tip of each branch, indexed by branch id.
    pub tips: Vec<Vec2>,
}

impl NodeGeometry {
    /// Base (joint) of branch `i`.
    pub fn joint(&self, model: &TreeModel, i: usize) -> Vec2 {
        match model.parent(i) {
            Some(p) => self.tips[p],
            None => self.anchor,
        }
    }
}

/// Static tip positions: the sum of `l_j n(θ̂_j)` along each root path, with
/// the anchor at the origin.
pub fn static_positions(model: &TreeModel) -> NodeGeometry {
    let mut tips = vec![Vec2::zeros(); model.len()];
    for &i in model.topological_order() {
        let b = model.branch(i);
        let base = b.parent.map_or(Vec2::zeros(), |p| tips[p]);
        tips[i] = base + direction(b.rest_angle) * b.length;
    }
    NodeGeometry {
        anchor: Vec2::zeros(),
        tips,
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(parent: Option<usize>) -> Branch {
        Branch::new(parent, 1.0, 1.0, 1.0, 0.0)
    }

    #[test]
    fn chain_is_valid() {
        let branches = vec![unit(None), unit(Some(0)), unit(Some(1))];
        assert_eq!(validate_branches(&branches), Ok(0));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let branches = vec![unit(None), unit(Some(0)), unit(Some(2))];
        assert_eq!(validate_branches(&branches), Err(ModelError::CycleDetected(2)));
    }

    #[test]
    fn zero_mass_is_rejected() {
        let mut branches = vec![unit(None), unit(Some(0)), unit(Some(1))];
        branches[1].mass = 0.0;
        assert!(matches!(
            validate_branches(&branches),
            Err(ModelError::NonPositiveParameter { branch: 1, param: "mass", .. })
        ));
    }

    #[test]
    fn two_roots_are_rejected() {
        let branches = vec![unit(None), unit(None)];
        assert_eq!(validate_branches(&branches), Err(ModelError::MultipleRoots(1)));
    }

    #[test]
    fn missing_parent_is_rejected() {
        let branches = vec![unit(None), unit(Some(7))];
        assert!(matches!(validate_branches(&branches), Err(ModelError::UnknownParent { branch: 1, parent: 7 })));
    }

    #[test]
    fn static_positions_examples() {
        let single = TreeModel::new(0.0, vec![Branch::new(None, 1.0, 2.0, 1.0, 0.0)]).unwrap();
        assert_eq!(static_positions(&single).tips[0], Vec2::new(2.0, 0.0));

        let chain = TreeModel::new(0.0, vec![unit(None), unit(Some(0))]).unwrap();
        assert_eq!(static_positions(&chain).tips[1], Vec2::new(2.0, 0.0));

        let side = TreeModel::new(0.0, vec![Branch::new(None, 1.0, 1.0, 1.0, PI / 2.0)]).unwrap();
        let tip = static_positions(&side).tips[0];
        assert!((tip - Vec2::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn inertia_examples() {
        let (c, p) = moment_of_inertia(&Branch::new(None, 1.0, 1.0, 1.0, 0.0)).unwrap();
        assert!((c - 1.0 / 12.0).abs() < 1e-15 && (p - 1.0 / 3.0).abs() < 1e-15);
        let (c, p) = moment_of_inertia(&Branch::new(None, 3.0, 2.0, 1.0, 0.0)).unwrap();
        assert!((c - 1.0).abs() < 1e-15 && (p - 4.0).abs() < 1e-15);
        assert!(moment_of_inertia(&Branch::new(None, 1.0, 0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn model_file_roundtrip() {
        let json = r#"{"gravity": 9.81, "branches": [
            {"parent": null, "mass": 2.0, "length": 1.5, "stiffness": 400.0, "rest_angle": 0.0},
            {"parent": 0, "mass": 0.5, "length": 0.7, "stiffness": 30.0, "rest_angle": 0.4}
        ]}"#;
        let model = TreeModel::from_json_str(json).unwrap();
        assert_eq!(model.root(), 0);
        assert_eq!(model.children(0), &[1]);
        let back = TreeModel::from_json_str(&model.to_json_string()).unwrap();
        assert_eq!(back, model);
        assert!(TreeModel::from_json_str(r#"{"gravity": 1.0, "branches": []}"#).is_err());
    }

    #[test]
    fn preload_balances_leaning_branch() {
        // Gravity torque about the pivot of a leaning rod is m g (l/2) sin θ̂.
        let model = TreeModel::new(9.81, vec![Branch::new(None, 2.0, 1.0, 100.0, 0.3)]).unwrap();
        let expected = -(2.0 * 9.81 * 0.5 * 0.3f64.sin());
        assert!((model.preload(0) - expected).abs() < 1e-12);
    }

    /// Reference acceptor: walk parents with a step bound instead of coloring.
    fn oracle_accepts(parents: &[Option<usize>]) -> bool {
        let n = parents.len();
        if parents.iter().filter(|p| p.is_none()).count() != 1 {
            return false;
        }
        (0..n).all(|i| {
            let mut cur = i;
            for _ in 0..=n {
                match parents[cur] {
                    None => return true,
                    Some(p) if p < n => cur = p,
                    Some(_) => return false,
                }
            }
            false
        })
    }

    fn arb_parents() -> impl Strategy<Value = Vec<Option<usize>>> {
        (1usize..8).prop_flat_map(|n| proptest::collection::vec(proptest::option::weighted(0.85, 0..n + 1), n))
    }

    proptest! {
        #[test]
        fn validation_matches_reference(parents in arb_parents()) {
            let branches: Vec<Branch> = parents.iter().map(|&p| unit(p)).collect();
            prop_assert_eq!(validate_branches(&branches).is_ok(), oracle_accepts(&parents));
        }

        #[test]
        fn doubling_lengths_doubles_tips(angles in proptest::collection::vec(-1.0f64..1.0, 1..6), seed in 0u64..1000) {
            let n = angles.len();
            let branches: Vec<Branch> = (0..n)
                .map(|i| {
                    let parent = if i == 0 { None } else { Some((seed as usize + i * 7) % i) };
                    Branch::new(parent, 1.0, 0.5 + i as f64 * 0.1, 1.0, angles[i])
                })
                .collect();
            let doubled: Vec<Branch> = branches.iter().map(|b| Branch { length: 2.0 * b.length, ..*b }).collect();
            let a = static_positions(&TreeModel::new(0.0, branches).unwrap());
            let b = static_positions(&TreeModel::new(0.0, doubled).unwrap());
            for (p, q) in a.tips.iter().zip(&b.tips) {
                prop_assert!((p * 2.0 - q).norm() < 1e-12);
            }
        }

        #[test]
        fn reindexing_preserves_positions(angles in proptest::collection::vec(-1.0f64..1.0, 2..7), shift in 1usize..6) {
            // Chain-with-forks tree, then a relabeling by rotation of ids.
            let n = angles.len();
            let parents: Vec<Option<usize>> = (0..n).map(|i| if i == 0 { None } else { Some((i - 1) / 2) }).collect();
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let original: Vec<Branch> = (0..n).map(|i| Branch::new(parents[i], 1.0, 1.0 + i as f64 * 0.2, 1.0, angles[i])).collect();
            let mut relabeled = original.clone();
            for i in 0..n {
                let mut b = original[i];
                b.parent = b.parent.map(|p| perm[p]);
                relabeled[perm[i]] = b;
            }
            let a = static_positions(&TreeModel::new(0.0, original).unwrap());
            let b = static_positions(&TreeModel::new(0.0, relabeled).unwrap());
            for i in 0..n {
                prop_assert!((a.tips[i] - b.tips[perm[i]]).norm() < 1e-12);
            }
        }
    }
}
