use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{AppearanceError, ContourMap, Keypoint};

pub const MAX_GAP_DEGREES: f64 = 30.0;

/// Contour pixels around a keypoint that enclose it angularly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Closure {
    pub keypoint: usize,
    pub radius: usize,
    /// `(row, col)` of every contour pixel within `radius`, excluding the
    /// keypoint pixel, ascending.
    pub members: Vec<(usize, usize)>,
    /// False when no radius brings the largest gap down to the limit; the
    /// radius is then the smallest one minimizing the gap.
    pub closed: bool,
    /// Largest cyclic gap between adjacent rays at `radius`, radians.
    pub max_gap: f64,
}

/// Largest cyclic gap between sorted ray angles; `2π` for fewer than two rays.
pub fn max_angular_gap(angles: &mut [f64]) -> f64 {
    if angles.len() < 2 {
        return 2.0 * PI;
    }
    angles.sort_by(f64::total_cmp);
    let mut gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}

struct Candidate {
    d2: usize,
    angle: f64,
    pixel: (usize, usize),
}

fn gap_within(cands: &[Candidate], r: usize) -> f64 {
    let limit = r * r;
    let mut angles: Vec<f64> = cands.iter().take_while(|c| c.d2 <= limit).map(|c| c.angle).collect();
    max_angular_gap(&mut angles)
}

/// Smallest integer radius at which the rays from the keypoint to all
/// contour pixels within that Euclidean radius leave no gap above 30°.
///
/// The largest gap can only shrink as the radius grows, so the radius is
/// found by bisection over `1..=diagonal`.
pub fn compute_closure(map: &ContourMap, point: &Keypoint) -> Result<Closure, AppearanceError> {
    point.check_bounds(map)?;
    let (pr, pc) = point.pixel();
    let mut cands = Vec::new();
    for r in 0..map.height() {
        for c in 0..map.width() {
            if map.get(r, c) && (r, c) != (pr, pc) {
                let (dy, dx) = (r as f64 - pr as f64, c as f64 - pc as f64);
                let d2 = (r.abs_diff(pr)).pow(2) + (c.abs_diff(pc)).pow(2);
                cands.push(Candidate {
                    d2,
                    angle: dy.atan2(dx),
                    pixel: (r, c),
                });
            }
        }
    }
    if cands.is_empty() {
        return Err(AppearanceError::NoContourPixels(point.id));
    }
    cands.sort_by_key(|c| c.d2);
    let limit = MAX_GAP_DEGREES.to_radians() + 1e-12;
    let diag = map.diagonal();
    let best_gap = gap_within(&cands, diag);
    let (target, closed) = if best_gap <= limit { (limit, true) } else { (best_gap, false) };

    // Smallest r in [1, diag] with gap(r) <= target.
    let (mut lo, mut hi) = (1usize, diag);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if gap_within(&cands, mid) <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let radius = lo;
    let mut members: Vec<(usize, usize)> = cands.iter().take_while(|c| c.d2 <= radius * radius).map(|c| c.pixel).collect();
    members.sort_unstable();
    Ok(Closure {
        keypoint: point.id,
        radius,
        members,
        closed,
        max_gap: gap_within(&cands, radius),
    })
}
