use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::closure::{compute_closure, Closure};
use super::{sorted_keypoints, AppearanceError, ConnectivityGraph, ContourMap, Keypoint};

const UNCLAIMED: usize = usize::MAX;

fn neighbors8(map: &ContourMap, r: usize, c: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (-1i64..=1)
        .flat_map(|dr| (-1i64..=1).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| (dr, dc) != (0, 0))
        .filter_map(move |(dr, dc)| {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            (nr >= 0 && nc >= 0 && (nr as usize) < map.height() && (nc as usize) < map.width()).then(|| (nr as usize, nc as usize))
        })
}

/// Computes every closure, then runs [`build_connectivity_with_closures`].
pub fn build_connectivity(map: &ContourMap, points: &[Keypoint]) -> Result<ConnectivityGraph, AppearanceError> {
    let points = sorted_keypoints(points)?;
    let closures = points.iter().map(|p| compute_closure(map, p)).collect::<Result<Vec<_>, _>>()?;
    build_connectivity_with_closures(map, &points, &closures)
}

/// Simultaneous flood fill from all closures.
///
/// Each keypoint pixel and its closure members start at cost 0. A step
/// between 8-adjacent pixels costs 0 when both are contour pixels, else 1.
/// Pixels are claimed in order of (cost, Chebyshev distance to the owning
/// keypoint, row, column, owner id). Two keypoints are connected when their
/// claimed regions are 8-adjacent.
pub fn build_connectivity_with_closures(
    map: &ContourMap,
    points: &[Keypoint],
    closures: &[Closure],
) -> Result<ConnectivityGraph, AppearanceError> {
    let points = sorted_keypoints(points)?;
    for p in &points {
        p.check_bounds(map)?;
    }
    let centres: Vec<(usize, usize)> = points.iter().map(|p| p.pixel()).collect();
    let cheb = |owner: usize, (r, c): (usize, usize)| {
        let (pr, pc) = centres[owner];
        r.abs_diff(pr).max(c.abs_diff(pc))
    };

    let mut heap = BinaryHeap::new();
    for (owner, &centre) in centres.iter().enumerate() {
        heap.push(Reverse((0usize, 0usize, centre.0, centre.1, owner)));
    }
    for cl in closures {
        for &px in &cl.members {
            heap.push(Reverse((0, cheb(cl.keypoint, px), px.0, px.1, cl.keypoint)));
        }
    }

    let (w, h) = (map.width(), map.height());
    let mut owner_of = vec![UNCLAIMED; w * h];
    while let Some(Reverse((cost, _, r, c, owner))) = heap.pop() {
        if owner_of[r * w + c] != UNCLAIMED {
            continue;
        }
        owner_of[r * w + c] = owner;
        let here = map.get(r, c);
        for (nr, nc) in neighbors8(map, r, c) {
            if owner_of[nr * w + nc] == UNCLAIMED {
                let step = usize::from(!(here && map.get(nr, nc)));
                heap.push(Reverse((cost + step, cheb(owner, (nr, nc)), nr, nc, owner)));
            }
        }
    }

    let mut graph = ConnectivityGraph::new(points.len());
    if points.is_empty() {
        return Ok(graph);
    }
    for r in 0..h {
        for c in 0..w {
            let a = owner_of[r * w + c];
            for (nr, nc) in neighbors8(map, r, c) {
                let b = owner_of[nr * w + nc];
                if a != b {
                    graph.add_edge(a, b);
                }
            }
        }
    }
    Ok(graph)
}
