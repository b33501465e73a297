//! Over-complete keypoint connectivity from a binary contour map.

mod closure;
mod connectivity;
mod io;
mod junctions;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use closure::{compute_closure, max_angular_gap, Closure, MAX_GAP_DEGREES};
pub use connectivity::{build_connectivity, build_connectivity_with_closures};
pub use io::{parse_keypoints_csv, parse_pgm, read_keypoints, read_pgm, write_pgm};
pub use junctions::{augment_junctions, JUNCTION_ANGLE_DEGREES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AppearanceError {
    #[error("contour map must have positive dimensions")]
    EmptyMap,
    #[error("keypoint {id} at ({x}, {y}) lies outside the {width}x{height} map")]
    OutOfBounds { id: usize, x: f64, y: f64, width: usize, height: usize },
    #[error("no contour pixels around keypoint {0}")]
    NoContourPixels(usize),
    #[error("keypoint ids must be a permutation of 0..{n}: {detail}")]
    InvalidKeypointIds { n: usize, detail: String },
    #[error("graph and point list disagree: {graph} nodes vs {points} points")]
    SizeMismatch { graph: usize, points: usize },
    #[error("edge ({0}, {1}) references a missing node")]
    InvalidEdge(usize, usize),
    #[error("contour file: {0}")]
    Pgm(String),
    #[error("keypoints file: {0}")]
    Keypoints(String),
    #[error("{0}")]
    Io(String),
}

/// Binary contour bitmap, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourMap {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

impl ContourMap {
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self, AppearanceError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(AppearanceError::EmptyMap);
        }
        Ok(Self { width, height, pixels })
    }

    pub fn blank(width: usize, height: usize) -> Result<Self, AppearanceError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.pixels[row * self.width + col] = on;
    }

    pub fn contour_count(&self) -> usize {
        self.pixels.iter().filter(|p| **p).count()
    }

    /// Length of the map diagonal, rounded up.
    pub fn diagonal(&self) -> usize {
        ((self.width * self.width + self.height * self.height) as f64).sqrt().ceil() as usize
    }

    /// Marks the pixels of a straight segment (Bresenham).
    pub fn draw_line(&mut self, (r0, c0): (i64, i64), (r1, c1): (i64, i64)) {
        let (dr, dc) = ((r1 - r0).abs(), -(c1 - c0).abs());
        let (sr, sc) = (if r0 < r1 { 1 } else { -1 }, if c0 < c1 { 1 } else { -1 });
        let (mut r, mut c, mut err) = (r0, c0, dr + dc);
        loop {
            if r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width {
                self.set(r as usize, c as usize, true);
            }
            if r == r1 && c == c1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dc {
                err += dc;
                r += sr;
            }
            if e2 <= dr {
                err += dr;
                c += sc;
            }
        }
    }
}

/// A keypoint in pixel coordinates: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Keypoint {
    pub fn new(id: usize, x: f64, y: f64) -> Self {
        Self { id, x, y }
    }

    /// Nearest pixel as `(row, col)`.
    pub fn pixel(&self) -> (usize, usize) {
        (self.y.round() as usize, self.x.round() as usize)
    }

    fn check_bounds(&self, map: &ContourMap) -> Result<(), AppearanceError> {
        let (r, c) = (self.y.round(), self.x.round());
        if !(r >= 0.0 && c >= 0.0 && (r as usize) < map.height() && (c as usize) < map.width()) {
            return Err(AppearanceError::OutOfBounds {
                id: self.id,
                x: self.x,
                y: self.y,
                width: map.width(),
                height: map.height(),
            });
        }
        Ok(())
    }
}

/// Checks that keypoint ids are exactly `0..n` and returns them sorted by id.
pub fn sorted_keypoints(points: &[Keypoint]) -> Result<Vec<Keypoint>, AppearanceError> {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.id);
    for (k, p) in sorted.iter().enumerate() {
        if p.id != k {
            return Err(AppearanceError::InvalidKeypointIds {
                n: points.len(),
                detail: format!("expected id {k}, found {}", p.id),
            });
        }
    }
    Ok(sorted)
}

/// Symmetric adjacency over node ids `0..n` with no self loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GraphRecord", try_from = "GraphRecord")]
pub struct ConnectivityGraph {
    neighbors: Vec<BTreeSet<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphRecord {
    node_count: usize,
    edges: Vec<[usize; 2]>,
}

impl From<ConnectivityGraph> for GraphRecord {
    fn from(g: ConnectivityGraph) -> Self {
        GraphRecord {
            node_count: g.len(),
            edges: g.edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }
}

impl TryFrom<GraphRecord> for ConnectivityGraph {
    type Error = AppearanceError;
    fn try_from(r: GraphRecord) -> Result<Self, AppearanceError> {
        ConnectivityGraph::from_edges(r.node_count, r.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl ConnectivityGraph {
    pub fn new(n: usize) -> Self {
        Self {
            neighbors: vec![BTreeSet::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::new(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, AppearanceError> {
        let mut g = Self::new(n);
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(AppearanceError::InvalidEdge(a, b));
            }
            g.add_edge(a, b);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Adds an undirected edge; self loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.neighbors[a].insert(b);
            self.neighbors[b].insert(a);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].contains(&b)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[i].iter().copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Edges `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, set) in self.neighbors.iter().enumerate() {
            out.extend(set.range(a + 1..).map(|&b| (a, b)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors
            .iter()
            .enumerate()
            .all(|(a, set)| !set.contains(&a) && set.iter().all(|&b| self.neighbors[b].contains(&a)))
    }

    pub fn from_json_str(s: &str) -> Result<Self, AppearanceError> {
        serde_json::from_str(s).map_err(|e| AppearanceError::Io(format!("graph file: {e}")))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_json_roundtrip() {
        let g = ConnectivityGraph::from_edges(4, [(0, 1), (3, 1), (2, 2)]).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (1, 3)]);
        let back = ConnectivityGraph::from_json_str(&g.to_json_string()).unwrap();
        assert_eq!(back, g);
        assert!(ConnectivityGraph::from_json_str(r#"{"node_count": 2, "edges": [[0, 5]]}"#).is_err());
    }

    #[test]
    fn keypoint_ids_must_be_dense() {
        let pts = vec![Keypoint::new(1, 0.0, 0.0), Keypoint::new(0, 1.0, 1.0)];
        assert_eq!(sorted_keypoints(&pts).unwrap()[0].id, 0);
        assert!(sorted_keypoints(&[Keypoint::new(2, 0.0, 0.0)]).is_err());
    }
}
