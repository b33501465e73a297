use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use vibratree_core::simulator::{accelerations, rescale_energy, step_with, total_energy, DynamicsSolver, Integrator};
use vibratree_core::model::static_positions;
use vibratree_core::synth::random_initial_state;
use vibratree_core::{linearize, modal_analysis, simulate, synthesize, Branch, SimConfig, SimState, SynthConfig, TreeModel, Vec2};

/// Natural frequencies of two collinear uniform rods without gravity, from
/// the kinetic energy written in absolute angles.
fn two_rod_omegas(m1: f64, l1: f64, k1: f64, m2: f64, l2: f64, k2: f64) -> (f64, f64) {
    let m_abs = DMatrix::from_row_slice(2, 2, &[
        m1 * l1 * l1 / 3.0 + m2 * l1 * l1,
        m2 * l1 * l2 / 2.0,
        m2 * l1 * l2 / 2.0,
        m2 * l2 * l2 / 3.0,
    ]);
    // Relative angles map to absolute ones by a running sum.
    let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    let m = p.transpose() * m_abs * p;
    // det(K - w² M) = 0 as a quadratic in w².
    let a = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let b = -(k1 * m[(1, 1)] + k2 * m[(0, 0)]);
    let c = k1 * k2;
    let disc = (b * b - 4.0 * a * c).sqrt();
    (((-b - disc) / (2.0 * a)).sqrt(), ((-b + disc) / (2.0 * a)).sqrt())
}

#[test]
fn two_rod_modes_match_closed_form() {
    let (m1, l1, k1, m2, l2, k2) = (2.0, 1.2, 40.0, 0.7, 0.8, 5.0);
    let model = TreeModel::new(0.0, vec![Branch::new(None, m1, l1, k1, 0.0), Branch::new(Some(0), m2, l2, k2, 0.0)]).unwrap();
    let modes = modal_analysis(&linearize(&model).unwrap()).unwrap();
    let (w1, w2) = two_rod_omegas(m1, l1, k1, m2, l2, k2);
    assert!((modes[0].omega - w1).abs() < 1e-9 * w1, "{} vs {w1}", modes[0].omega);
    assert!((modes[1].omega - w2).abs() < 1e-9 * w2, "{} vs {w2}", modes[1].omega);
}

#[test]
fn upward_anchor_acceleration_acts_as_extra_gravity() {
    // Upright rest pose so no spring preload depends on gravity.
    let mut branches = synthesize(&SynthConfig { seed: 4, ..Default::default() }).unwrap().model.branches().to_vec();
    for b in &mut branches {
        b.rest_angle = 0.0;
    }
    let a = 2.5;
    let forced = TreeModel::new(9.81, branches.clone()).unwrap();
    let heavier = TreeModel::new(9.81 + a, branches).unwrap();
    let n = forced.len();
    let mut state = random_initial_state(n, 0.3, 11);
    state.theta_dot = (0..n).map(|i| 0.2 * (i as f64 - 3.0)).collect();
    let plain = state.clone();
    state.anchor.acc = Vec2::new(a, 0.0);
    for solver in [DynamicsSolver::Assembled, DynamicsSolver::Recursive] {
        let got = accelerations(&forced, &state, solver).unwrap().theta_ddot;
        let want = accelerations(&heavier, &plain, solver).unwrap().theta_ddot;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10 * (1.0 + w.abs()), "{solver:?}: {g} vs {w}");
        }
    }
}

#[test]
fn anchor_acceleration_rotates_with_the_tree() {
    let mut branches = synthesize(&SynthConfig { seed: 6, ..Default::default() }).unwrap().model.branches().to_vec();
    let upright = TreeModel::new(0.0, branches.clone()).unwrap();
    // Rest angles are absolute, so every branch turns.
    for b in &mut branches {
        b.rest_angle += std::f64::consts::FRAC_PI_2;
    }
    let turned = TreeModel::new(0.0, branches).unwrap();
    let rotate = |v: Vec2| {
        let axis = |m: &TreeModel| static_positions(m).tips[0].normalize();
        let (u, t) = (axis(&upright), axis(&turned));
        let (c, s) = (u.dot(&t), u[0] * t[1] - u[1] * t[0]);
        Vec2::new(c * v[0] - s * v[1], s * v[0] + c * v[1])
    };
    let n = upright.len();
    let mut a = random_initial_state(n, 0.3, 12);
    a.theta_dot = (0..n).map(|i| 0.1 * i as f64 - 0.2).collect();
    let mut b = a.clone();
    a.anchor.acc = Vec2::new(1.5, -0.8);
    b.anchor.acc = rotate(a.anchor.acc);
    for solver in [DynamicsSolver::Assembled, DynamicsSolver::Recursive] {
        let got = accelerations(&turned, &b, solver).unwrap().theta_ddot;
        let want = accelerations(&upright, &a, solver).unwrap().theta_ddot;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10 * (1.0 + w.abs()), "{solver:?}: {g} vs {w}");
        }
    }
}

#[test]
fn single_rod_frequency() {
    let model = TreeModel::new(0.0, vec![Branch::new(None, 1.0, 1.0, 3.0, 0.0)]).unwrap();
    let modes = modal_analysis(&linearize(&model).unwrap()).unwrap();
    assert_eq!(modes.len(), 1);
    assert!((modes[0].omega - 3.0).abs() < 1e-12);
    assert!((modes[0].frequency_hz - 3.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn modes_are_sorted_and_unit_norm() {
    for seed in 0..10 {
        let t = synthesize(&SynthConfig { levels: 3, seed, ..Default::default() }).unwrap();
        let modes = modal_analysis(&linearize(&t.model).unwrap()).unwrap();
        assert_eq!(modes.len(), 7);
        for w in modes.windows(2) {
            assert!(w[0].omega <= w[1].omega);
        }
        for m in &modes {
            let norm: f64 = m.shape.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn rescaled_explicit_euler_holds_energy() {
    let t = synthesize(&SynthConfig { levels: 2, seed: 3, ..Default::default() }).unwrap();
    let mut state = random_initial_state(3, 0.02, 1);
    let e0 = total_energy(&t.model, &state);
    for _ in 0..5000 {
        state = step_with(&t.model, &state, 1e-4, Integrator::ExplicitEuler, DynamicsSolver::Assembled).unwrap();
        state = rescale_energy(&t.model, &state, e0).unwrap();
        let e = total_energy(&t.model, &state);
        assert!((e - e0).abs() <= 1e-9 * e0.abs(), "{e} vs {e0}");
    }
}

#[test]
fn symplectic_euler_energy_stays_bounded() {
    let t = synthesize(&SynthConfig { levels: 3, seed: 5, ..Default::default() }).unwrap();
    let init = random_initial_state(7, 0.02, 2);
    let e0 = total_energy(&t.model, &init);
    let rest = total_energy(&t.model, &SimState::rest(7));
    let mut state = init;
    let mut worst: f64 = 0.0;
    for _ in 0..20_000 {
        state = step_with(&t.model, &state, 1e-3, Integrator::SymplecticEuler, DynamicsSolver::Recursive).unwrap();
        worst = worst.max(((total_energy(&t.model, &state) - e0) / (e0 - rest)).abs());
    }
    assert!(worst < 0.05, "relative drift of the oscillation energy {worst}");
}

#[test]
fn free_vibration_returns_rest_angles() {
    let t = synthesize(&SynthConfig { levels: 2, seed: 11, ..Default::default() }).unwrap();
    let config = SimConfig { n_steps: 2000, rescale_every: 1, ..Default::default() };
    let traj = simulate(&t.model, &SimState::rest(3), &config, None).unwrap();
    assert!(traj.nodes.iter().flatten().all(|d| d.norm() < 1e-12));
    assert_eq!(traj.rest_positions, t.positions);
}

fn arb_stable_tree() -> impl Strategy<Value = TreeModel> {
    (1usize..=3, 1usize..=3, any::<u64>(), 1usize..=8).prop_map(|(levels, branching, seed, cap)| {
        synthesize(&SynthConfig { levels, branching, seed, max_nodes: Some(cap), ..Default::default() })
            .unwrap()
            .model
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn small_angles_follow_the_linear_system(model in arb_stable_tree(), seed in any::<u64>()) {
        let n = model.len();
        let state = random_initial_state(n, 1e-4, seed);
        let lin = linearize(&model).unwrap();
        let theta = DVector::from_vec(state.theta.clone());
        let expected = -lin.m.clone().lu().solve(&(&lin.k * theta)).unwrap();
        for solver in [DynamicsSolver::Assembled, DynamicsSolver::Recursive] {
            let got = DVector::from_vec(accelerations(&model, &state, solver).unwrap().theta_ddot);
            let rel = (&got - &expected).norm() / expected.norm();
            prop_assert!(rel <= 1e-3, "relative error {rel}");
        }
    }

    #[test]
    fn solvers_agree_at_large_angles(model in arb_stable_tree(), seed in any::<u64>()) {
        let n = model.len();
        let mut state = random_initial_state(n, 0.5, seed);
        state.theta_dot = random_initial_state(n, 2.0, seed ^ 1).theta;
        let a = accelerations(&model, &state, DynamicsSolver::Assembled).unwrap().theta_ddot;
        let b = accelerations(&model, &state, DynamicsSolver::Recursive).unwrap().theta_ddot;
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }
}
