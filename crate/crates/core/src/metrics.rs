//! Parent accuracy and edit distance between two rooted trees over the
//! same nodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("node sets differ: {0}")]
    MismatchedNodeSets(String),
    #[error("not a rooted tree: {0}")]
    InvalidTree(String),
    #[error("cannot parse parent array: {0}")]
    Parse(String),
}

/// Checks that `parent` describes one rooted tree and returns the root.
pub fn validate_parents(parent: &[Option<usize>]) -> Result<usize, MetricsError> {
    let n = parent.len();
    if n == 0 {
        return Err(MetricsError::InvalidTree("no nodes".into()));
    }
    let mut root = None;
    for (i, p) in parent.iter().enumerate() {
        match p {
            None if root.is_some() => return Err(MetricsError::InvalidTree(format!("nodes {} and {i} are both roots", root.unwrap()))),
            None => root = Some(i),
            Some(q) if *q >= n => return Err(MetricsError::InvalidTree(format!("node {i} has parent {q} out of range"))),
            Some(q) if *q == i => return Err(MetricsError::InvalidTree(format!("node {i} is its own parent"))),
            _ => {}
        }
    }
    let root = root.ok_or_else(|| MetricsError::InvalidTree("no root".into()))?;
    // 0 unvisited, 1 on the current walk, 2 reaches the root.
    let mut state = vec![0u8; n];
    state[root] = 2;
    for start in 0..n {
        let mut walk = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            walk.push(v);
            v = parent[v].expect("only the root lacks a parent");
        }
        if state[v] == 1 {
            return Err(MetricsError::InvalidTree(format!("cycle through node {v}")));
        }
        for w in walk {
            state[w] = 2;
        }
    }
    Ok(root)
}

fn check_pair(pred: &[Option<usize>], gt: &[Option<usize>]) -> Result<usize, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::MismatchedNodeSets(format!("{} predicted nodes, {} ground-truth nodes", pred.len(), gt.len())));
    }
    let (rp, rg) = (validate_parents(pred)?, validate_parents(gt)?);
    if rp != rg {
        return Err(MetricsError::MismatchedNodeSets(format!("predicted root {rp}, ground-truth root {rg}")));
    }
    Ok(rg)
}

fn mismatches(pred: &[Option<usize>], gt: &[Option<usize>]) -> usize {
    pred.iter().zip(gt).filter(|(a, b)| a != b).count()
}

/// Fraction of non-root nodes whose predicted parent is correct; 1 for a
/// lone root.
pub fn parent_accuracy(pred: &[Option<usize>], gt: &[Option<usize>]) -> Result<f64, MetricsError> {
    check_pair(pred, gt)?;
    let n = gt.len();
    if n == 1 {
        return Ok(1.0);
    }
    Ok((n - 1 - mismatches(pred, gt)) as f64 / (n - 1) as f64)
}

/// Fewest single-node parent reassignments turning `pred` into `gt`.
///
/// Every wrong parent needs one move, and moving nodes in breadth-first
/// order of `gt` keeps each intermediate a tree, so the count of wrong
/// parents is attained.
pub fn edit_distance(pred: &[Option<usize>], gt: &[Option<usize>]) -> Result<usize, MetricsError> {
    check_pair(pred, gt)?;
    Ok(mismatches(pred, gt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResult {
    pub node: usize,
    pub predicted: Option<usize>,
    pub truth: Option<usize>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub edit_distance: usize,
    pub n_nodes: usize,
    pub per_node: Vec<NodeResult>,
}

pub fn evaluate(pred: &[Option<usize>], gt: &[Option<usize>]) -> Result<EvalReport, MetricsError> {
    Ok(EvalReport {
        accuracy: parent_accuracy(pred, gt)?,
        edit_distance: edit_distance(pred, gt)?,
        n_nodes: gt.len(),
        per_node: pred
            .iter()
            .zip(gt)
            .enumerate()
            .map(|(node, (&predicted, &truth))| NodeResult { node, predicted, truth, correct: predicted == truth })
            .collect(),
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParentDoc {
    Bare(Vec<Option<usize>>),
    Wrapped { parent: Vec<Option<usize>> },
}

/// Reads `[null, 0, ...]` or any object with a `parent` array.
pub fn parse_parents(json: &str) -> Result<Vec<Option<usize>>, MetricsError> {
    match serde_json::from_str::<ParentDoc>(json) {
        Ok(ParentDoc::Bare(p)) | Ok(ParentDoc::Wrapped { parent: p }) => Ok(p),
        Err(e) => Err(MetricsError::Parse(e.to_string())),
    }
}
