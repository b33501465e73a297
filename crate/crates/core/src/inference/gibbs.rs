use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crp::{crp_log_prior, crp_log_prior_counts, ln_factorial_minus_one};
use super::likelihood::{appearance_score, circular_mean, motion_log_likelihood, phase_residual, LocalGraph};
use super::{InferenceError, InferenceParams};
use crate::spectral::SpectralFeatures;

/// Result of clustering one recursion level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Dense labels, numbered by first appearance.
    pub z: Vec<usize>,
    pub clusters: usize,
    pub log_joint: f64,
    /// Arithmetic mean of member amplitudes per cluster.
    pub amplitude_means: Vec<Vec<f64>>,
    /// Circular mean of member phases per cluster.
    pub phase_means: Vec<Vec<f64>>,
    /// Seed of the chain that produced this assignment.
    pub seed: u64,
}

impl ClusterAssignment {
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.z.len()).filter(|&i| self.z[i] == k).collect()
    }
}

/// Independent seed for stream `k` of a base seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut x = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k.wrapping_add(1)));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// CRP prior plus motion and appearance log-likelihoods of `z`.
pub fn joint_log_probability(features: &[SpectralFeatures], graph: &LocalGraph, z: &[usize], params: &InferenceParams) -> f64 {
    let k = z.iter().copied().max().map_or(0, |m| m + 1);
    let app: f64 = (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..z.len()).filter(|&i| z[i] == c).collect();
            appearance_score(graph, &members, None, params)
        })
        .sum();
    crp_log_prior(z, params.crp_alpha) + motion_log_likelihood(features, z, params) + app
}

struct Cluster {
    members: Vec<usize>,
    sum: Vec<f64>,
    sum_norm2: f64,
    sq: f64,
    score: f64,
}

struct Chain<'a> {
    features: &'a [SpectralFeatures],
    graph: &'a LocalGraph,
    params: &'a InferenceParams,
    norms2: Vec<f64>,
}

impl Chain<'_> {
    fn dot(&self, sum: &[f64], i: usize) -> f64 {
        sum.iter().zip(&self.features[i].amplitude_norm).map(|(a, b)| a * b).sum()
    }

    fn score_parts(&self, count: usize, sq: f64, sum_norm2: f64, members: &[usize], extra: Option<usize>) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let amp = (sq - sum_norm2 / count as f64).max(0.0);
        let mut s = -self.params.inv_sigma_n2() * amp;
        if self.params.inv_sigma_p2() != 0.0 {
            s -= self.params.inv_sigma_p2() * phase_residual(self.features, members, extra);
        }
        s + appearance_score(self.graph, members, extra, self.params)
    }

    fn rescore(&self, c: &mut Cluster) {
        c.sum_norm2 = c.sum.iter().map(|v| v * v).sum();
        c.score = self.score_parts(c.members.len(), c.sq, c.sum_norm2, &c.members, None);
    }

    fn score_with(&self, c: &Cluster, i: usize) -> f64 {
        let n2 = c.sum_norm2 + 2.0 * self.dot(&c.sum, i) + self.norms2[i];
        self.score_parts(c.members.len() + 1, c.sq + self.norms2[i], n2, &c.members, Some(i))
    }

    fn singleton(&self, i: usize) -> Cluster {
        let mut c = Cluster {
            members: vec![i],
            sum: self.features[i].amplitude_norm.clone(),
            sum_norm2: 0.0,
            sq: self.norms2[i],
            score: 0.0,
        };
        self.rescore(&mut c);
        c
    }

    fn joint(&self, clusters: &[Cluster]) -> f64 {
        let counts: Vec<usize> = clusters.iter().map(|c| c.members.len()).collect();
        crp_log_prior_counts(&counts, self.params.crp_alpha) + clusters.iter().map(|c| c.score).sum::<f64>()
    }

    fn run(&self, seed: u64) -> (f64, Vec<usize>) {
        let n = self.features.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.features[0].amplitude_norm.len();
        let mut all = Cluster {
            members: (0..n).collect(),
            sum: vec![0.0; dim],
            sum_norm2: 0.0,
            sq: self.norms2.iter().sum(),
            score: 0.0,
        };
        for f in self.features {
            for (s, v) in all.sum.iter_mut().zip(&f.amplitude_norm) {
                *s += v;
            }
        }
        self.rescore(&mut all);
        let mut clusters = vec![all];
        let mut z = vec![0usize; n];
        let mut best = (self.joint(&clusters), z.clone());
        let ln_alpha = self.params.crp_alpha.ln();
        let mut logw = Vec::new();

        for _ in 0..self.params.n_gibbs {
            for i in 0..n {
                // Take i out of its cluster.
                let c = z[i];
                {
                    let cl = &mut clusters[c];
                    cl.members.retain(|&m| m != i);
                    cl.sq -= self.norms2[i];
                    for (s, v) in cl.sum.iter_mut().zip(&self.features[i].amplitude_norm) {
                        *s -= v;
                    }
                }
                if clusters[c].members.is_empty() {
                    clusters.swap_remove(c);
                    if c < clusters.len() {
                        for &m in &clusters[c].members {
                            z[m] = c;
                        }
                    }
                } else {
                    let mut cl = std::mem::replace(
                        &mut clusters[c],
                        Cluster { members: Vec::new(), sum: Vec::new(), sum_norm2: 0.0, sq: 0.0, score: 0.0 },
                    );
                    self.rescore(&mut cl);
                    clusters[c] = cl;
                }

                // Conditional over existing clusters and one new cluster.
                logw.clear();
                let mut with_scores = Vec::with_capacity(clusters.len());
                for cl in &clusters {
                    let s = self.score_with(cl, i);
                    with_scores.push(s);
                    logw.push((cl.members.len() as f64).ln() + s - cl.score);
                }
                let single = self.singleton(i);
                logw.push(ln_alpha + single.score);
                let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = logw.iter().map(|w| (w - top).exp()).sum();
                let u: f64 = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = logw.len() - 1;
                for (k, w) in logw.iter().enumerate() {
                    acc += (w - top).exp();
                    if u < acc {
                        pick = k;
                        break;
                    }
                }

                if pick == clusters.len() {
                    z[i] = clusters.len();
                    clusters.push(single);
                } else {
                    let cl = &mut clusters[pick];
                    cl.sum_norm2 += 2.0 * self.dot(&cl.sum, i) + self.norms2[i];
                    for (s, v) in cl.sum.iter_mut().zip(&self.features[i].amplitude_norm) {
                        *s += v;
                    }
                    cl.sq += self.norms2[i];
                    let pos = cl.members.partition_point(|&m| m < i);
                    cl.members.insert(pos, i);
                    cl.score = with_scores[pick];
                    z[i] = pick;
                }

                let joint = self.joint(&clusters);
                if joint > best.0 {
                    best = (joint, z.clone());
                }
            }
            self.split_pass(&mut clusters, &mut z, &mut rng);
            self.merge_pass(&mut clusters, &mut z, &mut rng);
            let joint = self.joint(&clusters);
            if joint > best.0 {
                best = (joint, z.clone());
            }
        }
        best
    }

    fn cluster_of(&self, members: Vec<usize>) -> Cluster {
        let dim = self.features[0].amplitude_norm.len();
        let mut c = Cluster { sum: vec![0.0; dim], sum_norm2: 0.0, sq: 0.0, score: 0.0, members };
        for &i in &c.members {
            c.sq += self.norms2[i];
            for (s, v) in c.sum.iter_mut().zip(&self.features[i].amplitude_norm) {
                *s += v;
            }
        }
        self.rescore(&mut c);
        c
    }

    /// Offers every cluster of two or more members a split, built by seeding
    /// two halves with random members and placing the rest greedily, and
    /// samples it against staying whole by the change in joint.
    fn split_pass(&self, clusters: &mut Vec<Cluster>, z: &mut [usize], rng: &mut ChaCha8Rng) {
        let ln_alpha = self.params.crp_alpha.ln();
        let count = clusters.len();
        for c in 0..count {
            let members = clusters[c].members.clone();
            let m = members.len();
            if m < 2 {
                continue;
            }
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            let mut order: Vec<usize> = (0..m).filter(|&k| k != a && k != b).collect();
            for k in (1..order.len()).rev() {
                order.swap(k, rng.random_range(0..=k));
            }
            let mut left = self.cluster_of(vec![members[a]]);
            let mut right = self.cluster_of(vec![members[b]]);
            for k in order {
                let i = members[k];
                let gain_left = (left.members.len() as f64).ln() + self.score_with(&left, i) - left.score;
                let gain_right = (right.members.len() as f64).ln() + self.score_with(&right, i) - right.score;
                let side = if gain_left >= gain_right { &mut left } else { &mut right };
                let mut grown = side.members.clone();
                grown.push(i);
                grown.sort_unstable();
                *side = self.cluster_of(grown);
            }
            let (nl, nr) = (left.members.len(), right.members.len());
            let prior = ln_alpha + ln_factorial_minus_one(nl) + ln_factorial_minus_one(nr) - ln_factorial_minus_one(m);
            let delta = prior + left.score + right.score - clusters[c].score;
            // P(split) = e^Δ / (1 + e^Δ)
            let p_split = 1.0 / (1.0 + (-delta).exp());
            if rng.random::<f64>() < p_split {
                let new_label = clusters.len();
                for &i in &right.members {
                    z[i] = new_label;
                }
                clusters[c] = left;
                clusters.push(right);
            }
        }
    }

    /// Offers every cluster a move of all its members into one other
    /// cluster, sampled against staying put by the change in joint.
    fn merge_pass(&self, clusters: &mut Vec<Cluster>, z: &mut [usize], rng: &mut ChaCha8Rng) {
        let ln_alpha = self.params.crp_alpha.ln();
        let mut c = 0;
        while c < clusters.len() {
            let mut logw = vec![0.0];
            let mut merged = Vec::new();
            for k in 0..clusters.len() {
                if k == c {
                    continue;
                }
                let (a, b) = (&clusters[c], &clusters[k]);
                let sum: Vec<f64> = a.sum.iter().zip(&b.sum).map(|(x, y)| x + y).collect();
                let mut members = a.members.clone();
                members.extend_from_slice(&b.members);
                members.sort_unstable();
                let mut m = Cluster { members, sum, sum_norm2: 0.0, sq: a.sq + b.sq, score: 0.0 };
                self.rescore(&mut m);
                let (na, nb) = (a.members.len(), b.members.len());
                let prior = ln_factorial_minus_one(na + nb) - ln_factorial_minus_one(na) - ln_factorial_minus_one(nb) - ln_alpha;
                logw.push(prior + m.score - a.score - b.score);
                merged.push((k, m));
            }
            let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logw.iter().map(|w| (w - top).exp()).sum();
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = logw.len() - 1;
            for (j, w) in logw.iter().enumerate() {
                acc += (w - top).exp();
                if u < acc {
                    pick = j;
                    break;
                }
            }
            if pick == 0 {
                c += 1;
                continue;
            }
            let (k, m) = merged.swap_remove(pick - 1);
            for &i in &m.members {
                z[i] = k;
            }
            clusters[k] = m;
            clusters.swap_remove(c);
            if c < clusters.len() {
                for &i in &clusters[c].members {
                    z[i] = c;
                }
            }
        }
    }
}

fn dense(z: &[usize]) -> Vec<usize> {
    let mut map: Vec<usize> = Vec::new();
    z.iter()
        .map(|l| match map.iter().position(|m| m == l) {
            Some(p) => p,
            None => {
                map.push(*l);
                map.len() - 1
            }
        })
        .collect()
}

/// Gibbs sampling over cluster labels, starting from a single cluster.
///
/// Each sweep resamples every label from its conditional, proportional to
/// the cluster size (or the concentration, for a new cluster) times the
/// change in likelihood. The best joint assignment seen over all restarts
/// is returned; ties go to the earlier restart.
pub fn gibbs_cluster(
    features: &[SpectralFeatures],
    graph: &LocalGraph,
    params: &InferenceParams,
) -> Result<ClusterAssignment, InferenceError> {
    params.validate()?;
    let n = features.len();
    if n == 0 {
        return Err(InferenceError::EmptyCluster);
    }
    if graph.len() != n {
        return Err(InferenceError::SizeMismatch {
            what: "appearance graph",
            expected: n,
            got: graph.len(),
        });
    }
    let (dim, modes) = (features[0].amplitude_norm.len(), features[0].phase.len());
    for (i, f) in features.iter().enumerate() {
        if f.amplitude_norm.len() != dim || f.phase.len() != modes {
            return Err(InferenceError::RaggedFeatures(i));
        }
    }
    let chain = Chain {
        features,
        graph,
        params,
        norms2: features.iter().map(|f| f.amplitude_norm.iter().map(|v| v * v).sum()).collect(),
    };
    let seeds: Vec<u64> = (0..params.restarts as u64).map(|k| derive_seed(params.seed, k)).collect();
    let runs: Vec<(f64, Vec<usize>)> = if seeds.len() > 1 {
        seeds.par_iter().map(|&s| chain.run(s)).collect()
    } else {
        seeds.iter().map(|&s| chain.run(s)).collect()
    };
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.0 > runs[best].0 {
            best = k;
        }
    }
    let z = dense(&runs[best].1);
    let clusters = z.iter().copied().max().map_or(0, |m| m + 1);
    let mut amplitude_means = vec![vec![0.0; dim]; clusters];
    let mut counts = vec![0usize; clusters];
    for (i, f) in features.iter().enumerate() {
        counts[z[i]] += 1;
        for (m, v) in amplitude_means[z[i]].iter_mut().zip(&f.amplitude_norm) {
            *m += v;
        }
    }
    for (m, c) in amplitude_means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= *c as f64);
    }
    let phase_means = (0..clusters)
        .map(|k| (0..modes).map(|m| circular_mean((0..n).filter(|&i| z[i] == k).map(|i| features[i].phase[m]))).collect())
        .collect();
    Ok(ClusterAssignment {
        log_joint: joint_log_probability(features, graph, &z, params),
        z,
        clusters,
        amplitude_means,
        phase_means,
        seed: seeds[best],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(amp: Vec<f64>) -> SpectralFeatures {
        SpectralFeatures {
            node_id: 0,
            bin_hz: 1.0,
            amplitude_norm: amp,
            mode_bins: vec![],
            phase: vec![],
        }
    }

    #[test]
    fn single_node_is_one_cluster() {
        let f = vec![feat(vec![1.0, 0.0])];
        let a = gibbs_cluster(&f, &LocalGraph::empty(1), &InferenceParams::default()).unwrap();
        assert_eq!(a.z, vec![0]);
        assert_eq!(a.clusters, 1);
    }

    #[test]
    fn separated_groups_split() {
        let mut f = Vec::new();
        for k in 0..6 {
            let jitter = 0.001 * k as f64;
            f.push(feat(vec![1.0 - jitter, jitter, 0.0]));
            f.push(feat(vec![0.0, jitter, 1.0 - jitter]));
        }
        let p = InferenceParams { alpha_app: 0.0, beta_app: 0.0, seed: 7, ..Default::default() };
        let a = gibbs_cluster(&f, &LocalGraph::empty(12), &p).unwrap();
        assert_eq!(a.clusters, 2);
        for k in 0..6 {
            assert_eq!(a.z[2 * k], a.z[0]);
            assert_eq!(a.z[2 * k + 1], a.z[1]);
        }
    }

    #[test]
    fn cached_joint_matches_direct_evaluation() {
        let f: Vec<SpectralFeatures> = (0..9)
            .map(|i| {
                let t = i as f64 * 0.4;
                SpectralFeatures {
                    node_id: i,
                    bin_hz: 1.0,
                    amplitude_norm: vec![t.cos().abs(), t.sin().abs()],
                    mode_bins: vec![1, 2],
                    phase: vec![t.sin() * 3.0, (2.0 * t).cos()],
                }
            })
            .collect();
        let p = InferenceParams { sigma_n: 0.3, seed: 3, ..Default::default() };
        let g = LocalGraph { adj: (0..9).map(|i| if i + 1 < 9 { vec![i + 1] } else { vec![] }).collect(), touches_root: vec![true; 9] };
        // symmetric adjacency for the chain 0-1-...-8
        let mut g = g;
        for i in 1..9 {
            g.adj[i].push(i - 1);
        }
        let a = gibbs_cluster(&f, &g, &p).unwrap();
        let chain = Chain { features: &f, graph: &g, params: &p, norms2: f.iter().map(|x| x.amplitude_norm.iter().map(|v| v * v).sum()).collect() };
        let (cached, z) = chain.run(derive_seed(3, 0));
        assert!((cached - joint_log_probability(&f, &g, &z, &p)).abs() < 1e-9);
        assert!((a.log_joint - cached).abs() < 1e-9);
        let initial = joint_log_probability(&f, &g, &vec![0; 9], &p);
        assert!(a.log_joint >= initial - 1e-12);
    }

    #[test]
    fn seeds_are_deterministic() {
        let f: Vec<SpectralFeatures> = (0..10).map(|i| feat(vec![(i % 3) as f64, 1.0])).collect();
        let p = InferenceParams { seed: 11, restarts: 3, ..Default::default() };
        let a = gibbs_cluster(&f, &LocalGraph::empty(10), &p).unwrap();
        let b = gibbs_cluster(&f, &LocalGraph::empty(10), &p).unwrap();
        assert_eq!(a, b);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn separated_groups_across_seeds() {
        use rand::Rng;
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut f = Vec::new();
            let mut truth = Vec::new();
            for g in 0..2 {
                for _ in 0..8 {
                    let mut a = vec![0.0; 4];
                    a[2 * g] = 0.8;
                    a[2 * g + 1] = 0.6;
                    for v in &mut a {
                        *v += 0.03 * (rng.random::<f64>() - 0.5);
                    }
                    f.push(feat(a));
                    truth.push(g);
                }
            }
            let p = InferenceParams { alpha_app: 0.0, beta_app: 0.0, seed, ..Default::default() };
            let a = gibbs_cluster(&f, &LocalGraph::empty(16), &p).unwrap();
            if a.clusters == 2 && (0..16).all(|i| (a.z[i] == a.z[0]) == (truth[i] == truth[0])) {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}/100");
    }
}
