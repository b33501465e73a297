use serde::{Deserialize, Serialize};

use super::gibbs::{derive_seed, gibbs_cluster};
use super::likelihood::LocalGraph;
use super::{InferenceError, InferenceParams};
use crate::appearance::ConnectivityGraph;
use crate::model::Vec2;
use crate::spectral::{
    amplitude_envelope, extract_features, frequency_response, SpectralError, SpectralFeatures, Spectrum,
};

/// One recursion step: the nodes clustered under `root` and the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub root: usize,
    pub nodes: Vec<usize>,
    /// Global node ids per cluster.
    pub clusters: Vec<Vec<usize>>,
    /// Subroot of each cluster, attached to `root`.
    pub subroots: Vec<usize>,
    pub mode_bins: Vec<usize>,
    pub log_joint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredTree {
    pub parent: Vec<Option<usize>>,
    pub trace: Vec<LevelTrace>,
}

impl InferredTree {
    pub fn root(&self) -> Option<usize> {
        self.parent.iter().position(|p| p.is_none())
    }
}

/// Frequency response of a node relative to the current root.
pub fn remove_root(y: &Spectrum, root: &Spectrum, eps: f64) -> Result<Spectrum, SpectralError> {
    frequency_response(y, root, eps)
}

/// Cluster member closest to the root position; ties go to the smaller id.
pub fn select_subroot(cluster: &[usize], root_position: Vec2, positions: &[Vec2]) -> Result<usize, InferenceError> {
    let mut best: Option<(f64, usize)> = None;
    for &i in cluster {
        let p = positions.get(i).ok_or(InferenceError::SizeMismatch {
            what: "positions",
            expected: i + 1,
            got: positions.len(),
        })?;
        let d = (p - root_position).norm();
        best = match best {
            Some((bd, bi)) if bd < d || (bd == d && bi < i) => Some((bd, bi)),
            _ => Some((d, i)),
        };
    }
    best.map(|(_, i)| i).ok_or(InferenceError::EmptyCluster)
}

/// Features of `nodes` relative to `root`, with the mode bins shared by the
/// level taken from the envelope of their mean normalized amplitude.
///
/// A root without motion leaves the raw spectra in place. A node whose
/// response vanishes gets zero amplitude and zero phases.
pub fn level_features(
    spectra: &[Spectrum],
    nodes: &[usize],
    root: usize,
    params: &InferenceParams,
) -> Result<(Vec<SpectralFeatures>, Vec<usize>), InferenceError> {
    let yr = &spectra[root];
    let eps = params.epsilon.unwrap_or_else(|| params.epsilon_relative * yr.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm())));
    let root_moves = yr.coeffs.iter().any(|c| c.norm_sqr() > 0.0);
    let responses: Vec<Spectrum> = nodes
        .iter()
        .map(|&i| if root_moves { remove_root(&spectra[i], yr, eps) } else { Ok(spectra[i].clone()) })
        .collect::<Result<_, _>>()?;

    let bins = yr.len();
    let mut normalized: Vec<Option<SpectralFeatures>> = Vec::with_capacity(nodes.len());
    let mut mean = vec![0.0; bins];
    for r in &responses {
        match extract_features(r, &[]) {
            Ok(f) => {
                for (m, v) in mean.iter_mut().zip(&f.amplitude_norm) {
                    *m += v;
                }
                normalized.push(Some(f));
            }
            Err(SpectralError::DegenerateSpectrum) => normalized.push(None),
            Err(e) => return Err(e.into()),
        }
    }
    mean.iter_mut().for_each(|m| *m /= nodes.len() as f64);
    let mode_bins = match amplitude_envelope(&mean, yr.bin_hz, params.envelope_order) {
        Ok(env) => env.mode_bins(),
        Err(SpectralError::DegenerateSpectrum) => Vec::new(),
        Err(e) => return Err(e.into()),
    };

    let features = responses
        .iter()
        .zip(normalized)
        .map(|(r, f)| match f {
            Some(_) => extract_features(r, &mode_bins).map_err(InferenceError::from),
            None => Ok(SpectralFeatures {
                node_id: r.node,
                bin_hz: r.bin_hz,
                amplitude_norm: vec![0.0; bins],
                mode_bins: mode_bins.clone(),
                phase: vec![0.0; mode_bins.len()],
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((features, mode_bins))
}

/// Recovers a rooted tree by recursive clustering.
///
/// At each level the nodes below `root` are clustered by their response
/// relative to it; the member of each cluster nearest the root becomes its
/// child, and the cluster is handled again under that subroot. A level that
/// stays in one cluster attaches all its nodes to the root.
pub fn infer_tree(
    spectra: &[Spectrum],
    graph: Option<&ConnectivityGraph>,
    positions: &[Vec2],
    root: usize,
    params: &InferenceParams,
) -> Result<InferredTree, InferenceError> {
    params.validate()?;
    let n = spectra.len();
    if n == 0 {
        return Err(InferenceError::EmptyCluster);
    }
    if root >= n {
        return Err(InferenceError::InvalidRoot { root, n });
    }
    if positions.len() != n {
        return Err(InferenceError::SizeMismatch { what: "positions", expected: n, got: positions.len() });
    }
    if let Some(g) = graph {
        if g.len() != n {
            return Err(InferenceError::SizeMismatch { what: "connectivity graph", expected: n, got: g.len() });
        }
    }
    let bins = spectra[0].len();
    for s in spectra {
        if s.len() != bins {
            return Err(SpectralError::LengthMismatch { a: bins, b: s.len() }.into());
        }
    }

    let mut parent = vec![None; n];
    let mut trace = Vec::new();
    let mut stack = vec![(root, (0..n).filter(|&i| i != root).collect::<Vec<_>>())];
    while let Some((r, nodes)) = stack.pop() {
        match nodes.len() {
            0 => continue,
            1 => {
                parent[nodes[0]] = Some(r);
                continue;
            }
            _ => {}
        }
        let (features, mode_bins) = level_features(spectra, &nodes, r, params)?;
        let local = LocalGraph::new(graph, &nodes, r);
        let level_params = InferenceParams { seed: derive_seed(params.seed, r as u64), ..params.clone() };
        let assignment = gibbs_cluster(&features, &local, &level_params)?;
        let clusters: Vec<Vec<usize>> =
            (0..assignment.clusters).map(|k| assignment.members(k).into_iter().map(|i| nodes[i]).collect()).collect();

        let mut subroots = Vec::new();
        if clusters.len() == 1 {
            for &i in &nodes {
                parent[i] = Some(r);
            }
        } else {
            // Pushed in reverse so clusters are expanded in label order.
            let mut children = Vec::new();
            for c in &clusters {
                let s = select_subroot(c, positions[r], positions)?;
                parent[s] = Some(r);
                subroots.push(s);
                children.push((s, c.iter().copied().filter(|&i| i != s).collect::<Vec<_>>()));
            }
            stack.extend(children.into_iter().rev());
        }
        trace.push(LevelTrace {
            root: r,
            nodes,
            clusters,
            subroots,
            mode_bins,
            log_joint: assignment.log_joint,
        });
    }
    Ok(InferredTree { parent, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn spec(node: usize, coeffs: Vec<Complex64>) -> Spectrum {
        Spectrum { node, bin_hz: 1.0, fft_size: 2 * (coeffs.len() - 1), coeffs }
    }

    fn tones(node: usize, bins: usize, peaks: &[(usize, f64)]) -> Spectrum {
        let mut c = vec![Complex64::new(1e-4, 0.0); bins];
        for &(b, a) in peaks {
            c[b] = Complex64::new(a, 0.0);
        }
        spec(node, c)
    }

    #[test]
    fn identical_node_gives_unit_response() {
        let y = tones(1, 9, &[(2, 1.0), (5, 0.3)]);
        let r = remove_root(&y, &y, 0.0).unwrap();
        for c in &r.coeffs {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn regularized_response_is_bounded() {
        let y = spec(0, vec![Complex64::new(2.0, 1.0); 3]);
        let root = spec(1, vec![Complex64::new(1.0, 0.0), Complex64::new(1e-9, 0.0), Complex64::new(0.5, 0.5)]);
        let eps = 0.1;
        let r = remove_root(&y, &root, eps).unwrap();
        assert!(r.coeffs[1].norm() <= y.coeffs[1].norm() * root.coeffs[1].norm() / (eps * eps) + 1e-15);
    }

    #[test]
    fn subroot_selection() {
        let pos = vec![Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0), Vec2::new(0.0, -1.0)];
        let origin = Vec2::new(0.0, 0.0);
        assert_eq!(select_subroot(&[1, 2, 3], origin, &pos).unwrap(), 2);
        assert_eq!(select_subroot(&[3], origin, &pos).unwrap(), 3);
        assert_eq!(select_subroot(&[4, 2], origin, &pos).unwrap(), 2);
        assert_eq!(select_subroot(&[], origin, &pos), Err(InferenceError::EmptyCluster));
    }

    #[test]
    fn root_and_leaf() {
        let s = vec![tones(0, 17, &[(3, 1.0)]), tones(1, 17, &[(3, 2.0), (9, 1.0)])];
        let pos = vec![Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        let t = infer_tree(&s, None, &pos, 0, &InferenceParams::default()).unwrap();
        assert_eq!(t.parent, vec![None, Some(0)]);
    }

    #[test]
    fn two_groups_become_two_subtrees() {
        // Root excites everything at bin 4; two groups add their own tones.
        let bins = 65;
        let mut s = vec![tones(0, bins, &[(4, 1.0)])];
        let mut pos = vec![Vec2::new(0.0, 0.0)];
        for i in 1..=6 {
            let own = if i <= 3 { 20 } else { 40 };
            s.push(tones(i, bins, &[(4, 1.0), (own, 0.5 + 0.01 * i as f64)]));
            let side = if i <= 3 { 1.0 } else { -1.0 };
            pos.push(Vec2::new(i as f64, side * i as f64));
        }
        let p = InferenceParams { alpha_app: 0.0, beta_app: 0.0, seed: 5, ..Default::default() };
        let t = infer_tree(&s, None, &pos, 0, &p).unwrap();
        let lvl = &t.trace[0];
        assert_eq!(lvl.clusters.len(), 2);
        assert_eq!(t.parent[1], Some(0));
        assert_eq!(t.parent[4], Some(0));
        for i in [2, 3] {
            assert!(t.parent[i].is_some_and(|p| p <= 3 && p != 0));
        }
        for i in [5, 6] {
            assert!(t.parent[i].is_some_and(|p| p >= 4));
        }
        assert_eq!(t.root(), Some(0));
    }

    #[test]
    fn motionless_root_uses_raw_spectra() {
        let bins = 33;
        let zero = spec(0, vec![Complex64::new(0.0, 0.0); bins]);
        let s = vec![zero, tones(1, bins, &[(5, 1.0)]), tones(2, bins, &[(5, 1.0)])];
        let (f, bins_found) = level_features(&s, &[1, 2], 0, &InferenceParams::default()).unwrap();
        assert_eq!(bins_found, vec![5]);
        assert_eq!(f[0].amplitude_norm, f[1].amplitude_norm);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = vec![tones(0, 9, &[(2, 1.0)])];
        let p = InferenceParams::default();
        assert_eq!(infer_tree(&s, None, &[Vec2::zeros()], 1, &p), Err(InferenceError::InvalidRoot { root: 1, n: 1 }));
        assert!(matches!(infer_tree(&s, None, &[], 0, &p), Err(InferenceError::SizeMismatch { .. })));
        assert_eq!(infer_tree(&s, None, &[Vec2::zeros()], 0, &p).unwrap().parent, vec![None]);
    }
}
