use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{direction, perp, static_positions, TreeModel};

/// Small-angle system `M θ̈ + K θ = 0` and its image `N ÿ + L y = 0` over the
/// stacked tip displacements `y = J θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub m: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Tip Jacobian, rows `(2i, 2i+1)` for node `i`.
    pub jacobian: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// rad/s
    pub omega: f64,
    pub frequency_hz: f64,
    /// Unit-norm shape over branch deviation angles.
    pub shape: Vec<f64>,
}

/// Linearizes the dynamics about the static configuration.
pub fn linearize(model: &TreeModel) -> Result<LinearSystem, SimError> {
    let n = model.len();
    let geom = static_positions(model);
    let g = model.gravity();
    let com = |b: usize| geom.joint(model, b) + direction(model.branch(b).rest_angle) * (0.5 * model.branch(b).length);
    let paths: Vec<Vec<usize>> = (0..n).map(|i| model.path(i)).collect();

    let mut m = DMatrix::zeros(n, n);
    for b in 0..n {
        let br = model.branch(b);
        let c = com(b);
        for &q in &paths[b] {
            let dq = c - geom.joint(model, q);
            for &r in &paths[b] {
                let dr = c - geom.joint(model, r);
                m[(q, r)] += br.mass * dq.dot(&dr) + br.inertia_center();
            }
        }
    }

    // Hessian of Σ m_b g h_b: each segment j on the path of b contributes
    // -w l_j cos θ̂_j for every pair q, r on the path of j.
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = model.branch(i).stiffness;
    }
    if g != 0.0 {
        for b in 0..n {
            let mb = model.branch(b).mass;
            for &j in &paths[b] {
                let bj = model.branch(j);
                let w = if j == b { 0.5 } else { 1.0 };
                let term = mb * g * w * bj.length * bj.rest_angle.cos();
                for &q in &paths[j] {
                    for &r in &paths[j] {
                        k[(q, r)] -= term;
                    }
                }
            }
        }
    }

    let mut jac = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        for &q in &paths[i] {
            let d = perp(&(geom.tips[i] - geom.joint(model, q)));
            jac[(2 * i, q)] = d[0];
            jac[(2 * i + 1, q)] = d[1];
        }
    }
    let jtj = jac.transpose() * &jac;
    let jtj_inv = jtj.try_inverse().ok_or(SimError::SingularSystem)?;
    let pinv = jtj_inv * jac.transpose();
    let n_mat = pinv.transpose() * &m * &pinv;
    let l_mat = pinv.transpose() * &k * &pinv;

    if m.clone().cholesky().is_none() {
        return Err(SimError::SingularSystem);
    }
    Ok(LinearSystem {
        m,
        k,
        jacobian: jac,
        n: n_mat,
        l: l_mat,
    })
}

/// Solves `K v = ω² M v`. Modes ascend in frequency; each shape has unit
/// norm and a positive first nonzero entry.
pub fn modal_analysis(sys: &LinearSystem) -> Result<Vec<Mode>, SimError> {
    let chol = sys.m.clone().cholesky().ok_or(SimError::SingularSystem)?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().ok_or(SimError::SingularSystem)?;
    let a = &l_inv * &sys.k * l_inv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut modes = Vec::with_capacity(order.len());
    for (index, &idx) in order.iter().enumerate() {
        let w2 = eig.eigenvalues[idx];
        if w2 < 1e-10 {
            return Err(SimError::NonPositiveMode { index, omega_sq: w2 });
        }
        let v = l_inv.transpose() * eig.eigenvectors.column(idx);
        let norm = v.norm();
        let mut shape: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let scale = shape.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if let Some(first) = shape.iter().find(|x| x.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                shape.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let omega = w2.sqrt();
        modes.push(Mode {
            omega,
            frequency_hz: omega / (2.0 * std::f64::consts::PI),
            shape,
        });
    }
    Ok(modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Branch;
    use crate::simulator::{accelerations, DynamicsSolver, SimState};
    use nalgebra::DVector;
    use proptest::prelude::*;

    #[test]
    fn rod_without_gravity() {
        let model = TreeModel::new(0.0, vec![Branch::new(None, 1.0, 1.0, 3.0, 0.0)]).unwrap();
        let sys = linearize(&model).unwrap();
        assert!((sys.m[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((sys.k[(0, 0)] - 3.0).abs() < 1e-15);
        let modes = modal_analysis(&sys).unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].omega - 3.0).abs() < 1e-12);
        assert_eq!(modes[0].shape, vec![1.0]);
    }

    #[test]
    fn gravity_softens_upright_rod() {
        let model = TreeModel::new(9.81, vec![Branch::new(None, 2.0, 1.5, 40.0, 0.0)]).unwrap();
        let sys = linearize(&model).unwrap();
        assert!((sys.k[(0, 0)] - (40.0 - 2.0 * 9.81 * 1.5 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn buckling_rod_has_no_positive_mode() {
        let model = TreeModel::new(9.81, vec![Branch::new(None, 1.0, 1.0, 1.0, 0.0)]).unwrap();
        let sys = linearize(&model).unwrap();
        assert!(matches!(modal_analysis(&sys), Err(SimError::NonPositiveMode { index: 0, .. })));
    }

    #[test]
    fn tip_image_recovers_angles() {
        let model = TreeModel::new(
            0.0,
            vec![Branch::new(None, 1.0, 1.0, 10.0, 0.0), Branch::new(Some(0), 1.0, 1.0, 5.0, 0.7)],
        )
        .unwrap();
        let sys = linearize(&model).unwrap();
        // N, L map tip motion back to the angle dynamics: Jᵀ N J = M.
        let back = sys.jacobian.transpose() * &sys.n * &sys.jacobian;
        assert!((back - &sys.m).norm() < 1e-12);
    }

    fn chain(ks: &[f64], ms: &[f64]) -> TreeModel {
        let branches = ks
            .iter()
            .zip(ms)
            .enumerate()
            .map(|(i, (&k, &m))| Branch::new(if i == 0 { None } else { Some(i - 1) }, m, 0.5, k, 0.0))
            .collect();
        TreeModel::new(9.81, branches).unwrap()
    }

    proptest! {
        #[test]
        fn stiff_chain_stiffness_is_spd(ks in proptest::collection::vec(200.0f64..500.0, 1..6), m in 0.1f64..1.0) {
            let ms = vec![m; ks.len()];
            let sys = linearize(&chain(&ks, &ms)).unwrap();
            prop_assert!((&sys.k - sys.k.transpose()).norm() < 1e-12);
            prop_assert!(sys.k.clone().cholesky().is_some());
        }

        #[test]
        fn matches_nonlinear_near_rest(
            n in 1usize..6,
            angles in proptest::collection::vec(-0.6f64..0.6, 6),
            th in proptest::collection::vec(-1e-4f64..1e-4, 6),
        ) {
            let branches: Vec<Branch> = (0..n)
                .map(|i| Branch::new(if i == 0 { None } else { Some((i - 1) / 2) }, 0.5, 0.6, 60.0, angles[i]))
                .collect();
            let model = TreeModel::new(9.81, branches).unwrap();
            let sys = linearize(&model).unwrap();
            let theta = DVector::from_column_slice(&th[..n]);
            let lin = -sys.m.clone().lu().solve(&(&sys.k * &theta)).unwrap();
            let acc = accelerations(&model, &SimState::new(th[..n].to_vec(), vec![0.0; n]), DynamicsSolver::Assembled).unwrap();
            let nl = DVector::from_vec(acc.theta_ddot);
            prop_assert!((&nl - &lin).norm() <= 1e-3 * lin.norm());
        }
    }
}
