use std::collections::VecDeque;

use super::InferenceParams;
use crate::appearance::ConnectivityGraph;
use crate::model::wrap_angle;
use crate::spectral::SpectralFeatures;

/// Mean direction of a set of angles; 0 when the resultant vanishes.
pub fn circular_mean(angles: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for a in angles {
        s += a.sin();
        c += a.cos();
    }
    if s.abs() < 1e-300 && c.abs() < 1e-300 {
        0.0
    } else {
        s.atan2(c)
    }
}

/// Cluster-mean residual log-likelihood of the spectral features:
/// `Σ_i [-‖Yⁿ_i - Cⁿ‖²/σ_n² - Σ wrap(Yᵖ_i - Cᵖ)²/σ_p²]`.
pub fn motion_log_likelihood(features: &[SpectralFeatures], z: &[usize], params: &InferenceParams) -> f64 {
    let k = z.iter().copied().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..z.len()).filter(|&i| z[i] == c).collect();
            motion_score(features, &members, params)
        })
        .sum()
}

pub(crate) fn motion_score(features: &[SpectralFeatures], members: &[usize], params: &InferenceParams) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let dim = features[members[0]].amplitude_norm.len();
    let mut mean = vec![0.0; dim];
    for &i in members {
        for (m, v) in mean.iter_mut().zip(&features[i].amplitude_norm) {
            *m += v;
        }
    }
    let n = members.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let mut amp = 0.0;
    for &i in members {
        amp += features[i].amplitude_norm.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    -params.inv_sigma_n2() * amp - params.inv_sigma_p2() * phase_residual(features, members, None)
}

/// Σ over members (and `extra`) of squared wrapped deviations from the
/// per-mode circular means.
pub(crate) fn phase_residual(features: &[SpectralFeatures], members: &[usize], extra: Option<usize>) -> f64 {
    let all = || members.iter().copied().chain(extra);
    let Some(first) = all().next() else { return 0.0 };
    let modes = features[first].phase.len();
    let mut total = 0.0;
    for m in 0..modes {
        let centre = circular_mean(all().map(|i| features[i].phase[m]));
        total += all().map(|i| wrap_angle(features[i].phase[m] - centre).powi(2)).sum::<f64>();
    }
    total
}

/// Connectivity restricted to the nodes of one recursion level, in local
/// indices, with adjacency to the current root kept separately.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    pub adj: Vec<Vec<usize>>,
    pub touches_root: Vec<bool>,
}

impl LocalGraph {
    /// `nodes` are global ids in local order; `root` is the global root id.
    pub fn new(graph: Option<&ConnectivityGraph>, nodes: &[usize], root: usize) -> Self {
        let n = nodes.len();
        let mut adj = vec![Vec::new(); n];
        let mut touches_root = vec![false; n];
        if let Some(g) = graph {
            let mut local = vec![usize::MAX; g.len()];
            for (k, &v) in nodes.iter().enumerate() {
                local[v] = k;
            }
            for (k, &v) in nodes.iter().enumerate() {
                for w in g.neighbors(v) {
                    if w == root {
                        touches_root[k] = true;
                    } else if local[w] != usize::MAX {
                        adj[k].push(local[w]);
                    }
                }
            }
        }
        Self { adj, touches_root }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            touches_root: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn has_edges(&self) -> bool {
        self.adj.iter().any(|a| !a.is_empty()) || self.touches_root.iter().any(|t| *t)
    }
}

/// Appearance score of one cluster: `α` per connected member pair plus `β`
/// per member connected to the root, with paths confined to the cluster
/// (and the root, where admitted).
pub(crate) fn appearance_score(g: &LocalGraph, members: &[usize], extra: Option<usize>, params: &InferenceParams) -> f64 {
    if (params.alpha_app == 0.0 && params.beta_app == 0.0) || !g.has_edges() {
        return 0.0;
    }
    let n = g.len();
    let mut in_set = vec![false; n];
    for i in members.iter().copied().chain(extra) {
        in_set[i] = true;
    }
    let size = in_set.iter().filter(|b| **b).count();

    // Components of the member-induced subgraph.
    let mut comp = vec![usize::MAX; n];
    let mut comp_sizes = Vec::new();
    let mut comp_root = Vec::new();
    let mut queue = VecDeque::new();
    for s in 0..n {
        if !in_set[s] || comp[s] != usize::MAX {
            continue;
        }
        let id = comp_sizes.len();
        comp[s] = id;
        queue.push_back(s);
        let (mut count, mut touches) = (0usize, false);
        while let Some(v) = queue.pop_front() {
            count += 1;
            touches |= g.touches_root[v];
            for &w in &g.adj[v] {
                if in_set[w] && comp[w] == usize::MAX {
                    comp[w] = id;
                    queue.push_back(w);
                }
            }
        }
        comp_sizes.push(count);
        comp_root.push(touches);
    }

    let rooted: usize = comp_sizes.iter().zip(&comp_root).filter(|(_, t)| **t).map(|(s, _)| *s).sum();
    let pairs: usize = if params.root_in_pair_paths {
        // Every rooted component merges through the root.
        let unrooted: usize = comp_sizes.iter().zip(&comp_root).filter(|(_, t)| !**t).map(|(s, _)| s * (s - 1) / 2).sum();
        unrooted + rooted * rooted.saturating_sub(1) / 2
    } else {
        comp_sizes.iter().map(|s| s * (s - 1) / 2).sum()
    };
    debug_assert!(rooted <= size);
    params.alpha_app * pairs as f64 + params.beta_app * rooted as f64
}

/// Appearance log-likelihood summed over clusters of `z`.
pub fn appearance_log_likelihood(g: &LocalGraph, z: &[usize], params: &InferenceParams) -> f64 {
    let k = z.iter().copied().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..z.len()).filter(|&i| z[i] == c).collect();
            appearance_score(g, &members, None, params)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(amp: Vec<f64>, phase: Vec<f64>) -> SpectralFeatures {
        SpectralFeatures {
            node_id: 0,
            bin_hz: 1.0,
            amplitude_norm: amp,
            mode_bins: vec![0; phase.len()],
            phase,
        }
    }

    #[test]
    fn identical_members_score_zero() {
        let f = vec![feat(vec![0.6, 0.8], vec![0.3]); 3];
        assert!(motion_log_likelihood(&f, &[0, 0, 0], &InferenceParams::default()).abs() < 1e-15);
    }

    #[test]
    fn one_deviating_amplitude() {
        // Singleton clusters have zero residual; one cluster of two nodes
        // differing by d has residual 2 (d/2)² = d²/2.
        let f = vec![feat(vec![1.0, 0.0], vec![]), feat(vec![0.8, 0.0], vec![])];
        let p = InferenceParams::default();
        let ll = motion_log_likelihood(&f, &[0, 0], &p);
        assert!((ll + 0.5 * 0.04 / 0.01).abs() < 1e-12);
        let half = InferenceParams { sigma_n: 0.05, ..p };
        assert!((motion_log_likelihood(&f, &[0, 0], &half) - 4.0 * ll).abs() < 1e-12);
    }

    #[test]
    fn phase_wraps_across_pi() {
        let f = vec![feat(vec![1.0], vec![3.1]), feat(vec![1.0], vec![-3.1])];
        let p = InferenceParams { sigma_p: 1.0, ..Default::default() };
        let ll = motion_log_likelihood(&f, &[0, 0], &p);
        let gap = 2.0 * std::f64::consts::PI - 6.2;
        assert!((ll + 2.0 * (gap / 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn complete_and_empty_graphs() {
        let n = 5;
        let nodes: Vec<usize> = (1..=n).collect();
        let p = InferenceParams { alpha_app: 0.7, beta_app: 0.3, ..Default::default() };
        let full = LocalGraph::new(Some(&ConnectivityGraph::complete(n + 1)), &nodes, 0);
        let z = vec![0; n];
        assert!((appearance_log_likelihood(&full, &z, &p) - (0.7 * 10.0 + 0.3 * 5.0)).abs() < 1e-12);
        let empty = LocalGraph::new(Some(&ConnectivityGraph::new(n + 1)), &nodes, 0);
        assert_eq!(appearance_log_likelihood(&empty, &z, &p), 0.0);
    }

    #[test]
    fn path_through_other_cluster_does_not_count() {
        // 1 - 2 - 3 with 2 in another cluster.
        let g = ConnectivityGraph::from_edges(4, [(1, 2), (2, 3)]).unwrap();
        let local = LocalGraph::new(Some(&g), &[1, 2, 3], 0);
        let p = InferenceParams { alpha_app: 1.0, beta_app: 0.0, ..Default::default() };
        assert_eq!(appearance_log_likelihood(&local, &[0, 1, 0], &p), 0.0);
        assert_eq!(appearance_log_likelihood(&local, &[0, 0, 0], &p), 3.0);
    }

    #[test]
    fn root_admission_flag() {
        // 1 - root - 2, both in one cluster.
        let g = ConnectivityGraph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let local = LocalGraph::new(Some(&g), &[1, 2], 0);
        let p = InferenceParams { alpha_app: 1.0, beta_app: 0.5, ..Default::default() };
        assert_eq!(appearance_log_likelihood(&local, &[0, 0], &p), 1.0);
        let via_root = InferenceParams { root_in_pair_paths: true, ..p };
        assert_eq!(appearance_log_likelihood(&local, &[0, 0], &via_root), 2.0);
    }
}
