//! Shared inputs for the benchmarks.

use vibratree_core::simulator::{DynamicsSolver, Integrator};
use vibratree_core::spectral::trajectory_spectra;
use vibratree_core::synth::random_initial_state;
use vibratree_core::{simulate, synthesize, ContourMap, Keypoint, SimConfig, Spectrum, SynthConfig, SynthTree, Trajectory, Window};

/// Synthetic tree with `levels` levels, the trunk included.
pub fn tree(levels: usize, seed: u64) -> SynthTree {
    synthesize(&SynthConfig { levels, seed, max_nodes: Some(64), ..Default::default() }).expect("synthetic tree")
}

/// Free vibration of `tree`, `samples` samples at about 24 Hz.
pub fn free_vibration(tree: &SynthTree, samples: usize) -> Trajectory {
    let config = SimConfig {
        dt: 1e-3,
        n_steps: 42 * (samples - 1),
        rescale_every: 0,
        output_rate_hz: 1.0 / 42e-3,
        integrator: Integrator::SymplecticEuler,
        solver: DynamicsSolver::Recursive,
    };
    let init = random_initial_state(tree.model.len(), 0.01, 1);
    simulate(&tree.model, &init, &config, None).expect("simulation")
}

pub fn spectra(traj: &Trajectory) -> Vec<Spectrum> {
    trajectory_spectra(traj, Window::None).expect("spectra").into_iter().map(|(s, _)| s).collect()
}

/// Comb of `teeth` vertical strokes hanging from a horizontal bar, with a
/// keypoint at the foot of each tooth and one at each bar end.
pub fn comb(size: usize, teeth: usize) -> (ContourMap, Vec<Keypoint>) {
    let mut map = ContourMap::blank(size, size).expect("map");
    let bar = size / 4;
    for c in 2..size - 2 {
        map.set(bar, c, true);
    }
    let mut points = vec![
        Keypoint { id: 0, x: 2.0, y: bar as f64 },
        Keypoint { id: 1, x: (size - 3) as f64, y: bar as f64 },
    ];
    for t in 0..teeth {
        let c = 4 + t * (size - 8) / teeth.max(1);
        for r in bar..size - 4 {
            map.set(r, c, true);
        }
        points.push(Keypoint { id: points.len(), x: c as f64, y: (size - 5) as f64 });
    }
    (map, points)
}
