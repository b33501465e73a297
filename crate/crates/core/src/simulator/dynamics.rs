use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AnchorState, SimError, SimState};
use crate::model::{cross, direction, perp, TreeModel, Vec2};

/// How joint accelerations are obtained from a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsSolver {
    /// One dense linear system over all intermediate unknowns.
    #[default]
    Assembled,
    /// Eliminates forces and accelerations by recursion over the tree and
    /// solves only for the joint accelerations.
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// `θ += θ̇ dt` then `θ̇ += θ̈ dt`, both from the old state.
    #[default]
    ExplicitEuler,
    /// `θ̇ += θ̈ dt` then `θ += θ̇_new dt`.
    SymplecticEuler,
}

/// Positions, directions and rates of every branch for one state.
#[derive(Debug, Clone)]
pub struct Kinematics {
    /// Absolute direction of each branch from the vertical.
    pub phi: Vec<f64>,
    /// Absolute angular velocity of each branch.
    pub omega: Vec<f64>,
    /// Unit direction of each branch.
    pub u: Vec<Vec2>,
    /// Base point of each branch.
    pub joints: Vec<Vec2>,
    /// Tip of each branch.
    pub tips: Vec<Vec2>,
    /// Velocity of each branch base.
    pub joint_vel: Vec<Vec2>,
}

impl Kinematics {
    pub fn new(model: &TreeModel, state: &SimState) -> Self {
        let n = model.len();
        let mut k = Kinematics {
            phi: vec![0.0; n],
            omega: vec![0.0; n],
            u: vec![Vec2::zeros(); n],
            joints: vec![Vec2::zeros(); n],
            tips: vec![Vec2::zeros(); n],
            joint_vel: vec![Vec2::zeros(); n],
        };
        for &i in model.topological_order() {
            let b = model.branch(i);
            let (phi0, omega0, base, base_vel) = match b.parent {
                Some(p) => (k.phi[p] - model.branch(p).rest_angle, k.omega[p], k.tips[p], {
                    let h = k.tips[p] - k.joints[p];
                    k.joint_vel[p] + perp(&h) * k.omega[p]
                }),
                None => (0.0, 0.0, state.anchor.pos, state.anchor.vel),
            };
            k.phi[i] = b.rest_angle + phi0 + state.theta[i];
            k.omega[i] = omega0 + state.theta_dot[i];
            k.u[i] = direction(k.phi[i]);
            k.joints[i] = base;
            k.tips[i] = base + k.u[i] * b.length;
            k.joint_vel[i] = base_vel;
        }
        k
    }

    /// Center of mass of branch `i`.
    pub fn com(&self, model: &TreeModel, i: usize) -> Vec2 {
        self.joints[i] + self.u[i] * (0.5 * model.branch(i).length)
    }

    /// Velocity of the center of mass of branch `i`.
    pub fn com_vel(&self, model: &TreeModel, i: usize) -> Vec2 {
        self.joint_vel[i] + perp(&self.u[i]) * (0.5 * model.branch(i).length * self.omega[i])
    }
}

/// Every acceleration-level quantity of one dynamics solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Accelerations {
    pub theta_ddot: Vec<f64>,
    /// Force each branch exerts on its parent (or on the anchor).
    pub r: Vec<Vec2>,
    /// Center-of-mass acceleration.
    pub a: Vec<Vec2>,
    /// Acceleration of each branch base.
    pub a_o: Vec<Vec2>,
    pub omega_dot: Vec<f64>,
}

/// Dense linear system `A u = b` over `u = [θ̈; r; a; a_o; ω̇]`.
///
/// Row blocks: translation (2n), rotation about the center of mass (n),
/// center-of-mass acceleration (2n), base acceleration chain (2n) and
/// angular-acceleration accumulation (n).
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    pub n: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl StepWorkspace {
    fn th(&self, i: usize) -> usize {
        i
    }
    fn r(&self, i: usize, c: usize) -> usize {
        self.n + 2 * i + c
    }
    fn acc(&self, i: usize, c: usize) -> usize {
        3 * self.n + 2 * i + c
    }
    fn ao(&self, i: usize, c: usize) -> usize {
        5 * self.n + 2 * i + c
    }
    fn wd(&self, i: usize) -> usize {
        7 * self.n + i
    }

    pub fn dim(&self) -> usize {
        8 * self.n
    }

    pub fn solve(&self) -> Result<Accelerations, SimError> {
        let lu = self.a.clone().lu();
        let u = lu.solve(&self.b).ok_or(SimError::SingularSystem)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(SimError::SingularSystem);
        }
        let n = self.n;
        let v2 = |f: &dyn Fn(usize, usize) -> usize, i: usize| Vec2::new(u[f(i, 0)], u[f(i, 1)]);
        Ok(Accelerations {
            theta_ddot: (0..n).map(|i| u[self.th(i)]).collect(),
            r: (0..n).map(|i| v2(&|i, c| self.r(i, c), i)).collect(),
            a: (0..n).map(|i| v2(&|i, c| self.acc(i, c), i)).collect(),
            a_o: (0..n).map(|i| v2(&|i, c| self.ao(i, c), i)).collect(),
            omega_dot: (0..n).map(|i| u[self.wd(i)]).collect(),
        })
    }
}

fn joint_torque(model: &TreeModel, state: &SimState, i: usize) -> f64 {
    -model.branch(i).stiffness * state.theta[i] + model.preload(i)
}

/// Builds the full Newton–Euler system for the state.
pub fn assemble_step_system(model: &TreeModel, state: &SimState) -> Result<StepWorkspace, SimError> {
    let n = model.len();
    state.check_len(n)?;
    let kin = Kinematics::new(model, state);
    let g = model.gravity_vec();
    let mut ws = StepWorkspace {
        n,
        a: DMatrix::zeros(8 * n, 8 * n),
        b: DVector::zeros(8 * n),
    };
    let mut row = 0;
    for i in 0..n {
        let br = model.branch(i);
        let x = kin.u[i] * (0.5 * br.length);
        let w = kin.omega[i];

        // m a_i + r_i - Σ r_c = m g
        for c in 0..2 {
            let (ra, rr) = (ws.acc(i, c), ws.r(i, c));
            ws.a[(row, ra)] = br.mass;
            ws.a[(row, rr)] = 1.0;
            for &ch in model.children(i) {
                let rc = ws.r(ch, c);
                ws.a[(row, rc)] = -1.0;
            }
            ws.b[row] = br.mass * g[c];
            row += 1;
        }

        // I ω̇ - x × (r_i + Σ r_c) = τ_i - Σ τ_c
        let wd = ws.wd(i);
        ws.a[(row, wd)] = br.inertia_center();
        let add_cross = |ws: &mut StepWorkspace, j: usize| {
            // x × r = x0 r1 - x1 r0
            let (c0, c1) = (ws.r(j, 0), ws.r(j, 1));
            ws.a[(row, c0)] += x[1];
            ws.a[(row, c1)] -= x[0];
        };
        add_cross(&mut ws, i);
        for &ch in model.children(i) {
            add_cross(&mut ws, ch);
        }
        let mut rhs = joint_torque(model, state, i);
        for &ch in model.children(i) {
            rhs -= joint_torque(model, state, ch);
        }
        ws.b[row] = rhs;
        row += 1;

        // a_i - a_o,i - ω̇ perp(x) = -ω² x
        let px = perp(&x);
        for c in 0..2 {
            let (ra, ro) = (ws.acc(i, c), ws.ao(i, c));
            ws.a[(row, ra)] = 1.0;
            ws.a[(row, ro)] = -1.0;
            ws.a[(row, wd)] = -px[c];
            ws.b[row] = -w * w * x[c];
            row += 1;
        }

        // base acceleration from the parent's base, or the anchor
        match br.parent {
            Some(p) => {
                let hp = kin.u[p] * model.branch(p).length;
                let wp = kin.omega[p];
                let php = perp(&hp);
                for c in 0..2 {
                    let (ro, rp, wdp) = (ws.ao(i, c), ws.ao(p, c), ws.wd(p));
                    ws.a[(row, ro)] = 1.0;
                    ws.a[(row, rp)] = -1.0;
                    ws.a[(row, wdp)] = -php[c];
                    ws.b[row] = -wp * wp * hp[c];
                    row += 1;
                }
            }
            None => {
                for c in 0..2 {
                    let ro = ws.ao(i, c);
                    ws.a[(row, ro)] = 1.0;
                    ws.b[row] = state.anchor.acc[c];
                    row += 1;
                }
            }
        }
        // ω̇_i = Σ_path θ̈
        ws.a[(row, wd)] = 1.0;
        for j in model.path(i) {
            let tj = ws.th(j);
            ws.a[(row, tj)] = -1.0;
        }
        row += 1;
    }
    debug_assert_eq!(row, 8 * n);
    Ok(ws)
}

/// Rotation residuals for given joint accelerations; affine in `theta_ddot`.
fn rotation_residual(model: &TreeModel, state: &SimState, kin: &Kinematics, theta_ddot: &[f64], out: &mut Accelerations) -> Vec<f64> {
    let n = model.len();
    let g = model.gravity_vec();
    let order = model.topological_order();
    for &i in order {
        let br = model.branch(i);
        let (wd0, ao) = match br.parent {
            Some(p) => {
                let hp = kin.u[p] * model.branch(p).length;
                let wp = kin.omega[p];
                (out.omega_dot[p], out.a_o[p] + perp(&hp) * out.omega_dot[p] - hp * (wp * wp))
            }
            None => (0.0, state.anchor.acc),
        };
        out.omega_dot[i] = wd0 + theta_ddot[i];
        out.a_o[i] = ao;
        let x = kin.u[i] * (0.5 * br.length);
        let w = kin.omega[i];
        out.a[i] = ao + perp(&x) * out.omega_dot[i] - x * (w * w);
    }
    let mut res = vec![0.0; n];
    for &i in order.iter().rev() {
        let br = model.branch(i);
        let mut rc_sum = Vec2::zeros();
        let mut tau = joint_torque(model, state, i);
        for &c in model.children(i) {
            rc_sum += out.r[c];
            tau -= joint_torque(model, state, c);
        }
        out.r[i] = (g - out.a[i]) * br.mass + rc_sum;
        let x = kin.u[i] * (0.5 * br.length);
        res[i] = br.inertia_center() * out.omega_dot[i] - cross(&x, &(out.r[i] + rc_sum)) - tau;
    }
    res
}

fn recursive_accelerations(model: &TreeModel, state: &SimState) -> Result<Accelerations, SimError> {
    let n = model.len();
    let kin = Kinematics::new(model, state);
    let mut acc = Accelerations {
        theta_ddot: vec![0.0; n],
        r: vec![Vec2::zeros(); n],
        a: vec![Vec2::zeros(); n],
        a_o: vec![Vec2::zeros(); n],
        omega_dot: vec![0.0; n],
    };
    let mut probe = vec![0.0; n];
    let r0 = rotation_residual(model, state, &kin, &probe, &mut acc);
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        probe[j] = 1.0;
        let rj = rotation_residual(model, state, &kin, &probe, &mut acc);
        probe[j] = 0.0;
        for i in 0..n {
            h[(i, j)] = rj[i] - r0[i];
        }
    }
    let rhs = DVector::from_iterator(n, r0.iter().map(|v| -v));
    let sol = h.lu().solve(&rhs).ok_or(SimError::SingularSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(SimError::SingularSystem);
    }
    let theta_ddot: Vec<f64> = sol.iter().copied().collect();
    rotation_residual(model, state, &kin, &theta_ddot, &mut acc);
    acc.theta_ddot = theta_ddot;
    Ok(acc)
}

/// Solves the dynamics at `state` with the chosen route.
pub fn accelerations(model: &TreeModel, state: &SimState, solver: DynamicsSolver) -> Result<Accelerations, SimError> {
    state.check_len(model.len())?;
    match solver {
        DynamicsSolver::Assembled => assemble_step_system(model, state)?.solve(),
        DynamicsSolver::Recursive => recursive_accelerations(model, state),
    }
}

/// One explicit Euler step with the assembled solver. The anchor is held.
pub fn step(model: &TreeModel, state: &SimState, dt: f64) -> Result<SimState, SimError> {
    step_with(model, state, dt, Integrator::ExplicitEuler, DynamicsSolver::Assembled)
}

/// One step with a constant anchor acceleration (`state.anchor.acc`) over
/// the step; the anchor position and velocity are advanced exactly.
pub fn step_with(
    model: &TreeModel,
    state: &SimState,
    dt: f64,
    integrator: Integrator,
    solver: DynamicsSolver,
) -> Result<SimState, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidTimeStep(dt));
    }
    let acc = accelerations(model, state, solver)?;
    let mut next = state.clone();
    next.t = state.t + dt;
    match integrator {
        Integrator::ExplicitEuler => {
            for i in 0..model.len() {
                next.theta[i] = state.theta[i] + state.theta_dot[i] * dt;
                next.theta_dot[i] = state.theta_dot[i] + acc.theta_ddot[i] * dt;
            }
        }
        Integrator::SymplecticEuler => {
            for i in 0..model.len() {
                next.theta_dot[i] = state.theta_dot[i] + acc.theta_ddot[i] * dt;
                next.theta[i] = state.theta[i] + next.theta_dot[i] * dt;
            }
        }
    }
    let an = &state.anchor;
    next.anchor = AnchorState {
        pos: an.pos + an.vel * dt + an.acc * (0.5 * dt * dt),
        vel: an.vel + an.acc * dt,
        acc: an.acc,
    };
    Ok(next)
}
