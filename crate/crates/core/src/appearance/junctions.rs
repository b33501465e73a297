use super::{AppearanceError, ConnectivityGraph};
use crate::model::Vec2;

pub const JUNCTION_ANGLE_DEGREES: f64 = 135.0;

/// For every node with four or more neighbors, links each pair of its
/// neighbors whose rays from the node open by at least 135°. Existing edges
/// are kept. Degrees are taken from the input graph.
pub fn augment_junctions(graph: &ConnectivityGraph, points: &[Vec2]) -> Result<ConnectivityGraph, AppearanceError> {
    if graph.len() != points.len() {
        return Err(AppearanceError::SizeMismatch {
            graph: graph.len(),
            points: points.len(),
        });
    }
    let threshold = JUNCTION_ANGLE_DEGREES.to_radians() - 1e-9;
    let mut out = graph.clone();
    for v in 0..graph.len() {
        if graph.degree(v) < 4 {
            continue;
        }
        let nbrs: Vec<usize> = graph.neighbors(v).collect();
        for (k, &a) in nbrs.iter().enumerate() {
            let da = points[a] - points[v];
            for &b in &nbrs[k + 1..] {
                let db = points[b] - points[v];
                let (na, nb) = (da.norm(), db.norm());
                if na == 0.0 || nb == 0.0 {
                    continue;
                }
                let angle = (da.dot(&db) / (na * nb)).clamp(-1.0, 1.0).acos();
                if angle >= threshold {
                    out.add_edge(a, b);
                }
            }
        }
    }
    Ok(out)
}
