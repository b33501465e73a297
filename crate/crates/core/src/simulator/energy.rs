use super::dynamics::Kinematics;
use super::{SimError, SimState};
use crate::model::TreeModel;

/// Kinetic plus elastic plus gravitational energy.
///
/// The elastic term of joint `i` is `½ k θ² - τ0 θ`, where `τ0` is the static
/// spring preload; it reduces to `½ k θ²` whenever the preload vanishes
/// (upright trees or zero gravity). Heights are measured along the vertical
/// axis from the origin.
pub fn total_energy(model: &TreeModel, state: &SimState) -> f64 {
    let kin = Kinematics::new(model, state);
    let g = model.gravity();
    let mut e = 0.0;
    for i in 0..model.len() {
        let b = model.branch(i);
        let v = kin.com_vel(model, i);
        let th = state.theta[i];
        e += 0.5 * b.mass * v.norm_squared()
            + 0.5 * b.inertia_center() * kin.omega[i] * kin.omega[i]
            + 0.5 * b.stiffness * th * th
            - model.preload(i) * th
            + b.mass * g * kin.com(model, i)[0];
    }
    e
}

fn scaled(state: &SimState, s: f64) -> SimState {
    let mut out = state.clone();
    out.theta.iter_mut().for_each(|v| *v *= s);
    out.theta_dot.iter_mut().for_each(|v| *v *= s);
    out
}

/// Scales the deviation `(θ, θ̇)` by a single factor `s ∈ [0, 1)` so that the
/// total energy returns to `e0`. States at or below `e0` are returned as is.
pub fn rescale_energy(model: &TreeModel, state: &SimState, e0: f64) -> Result<SimState, SimError> {
    state.check_len(model.len())?;
    let e1 = total_energy(model, state);
    if e1 <= e0 {
        return Ok(state.clone());
    }
    if state.theta.iter().chain(&state.theta_dot).all(|v| *v == 0.0) {
        return Err(SimError::DegenerateEnergy(format!(
            "state has no deviation but energy {e1:e} exceeds target {e0:e}"
        )));
    }
    let f = |s: f64| total_energy(model, &scaled(state, s)) - e0;

    // Bracket the root from just below s = 1 outward.
    let (mut hi, mut f_hi) = (1.0, e1 - e0);
    let mut delta: f64 = 1e-6;
    let (lo, f_lo) = loop {
        let cand = (1.0 - delta).max(0.0);
        let fc = f(cand);
        if fc <= 0.0 {
            break (cand, fc);
        }
        if cand == 0.0 {
            return Err(SimError::DegenerateEnergy(format!(
                "energy at zero deviation {:e} exceeds target {e0:e}",
                fc + e0
            )));
        }
        hi = cand;
        f_hi = fc;
        delta *= 10.0;
    };
    if f_lo == 0.0 {
        return Ok(scaled(state, lo));
    }
    let (mut a, mut fa, mut b, mut fb) = (lo, f_lo, hi, f_hi);

    // Illinois false position on [a, b] with f(a) < 0 < f(b).
    let tol = 1e-13 * e0.abs().max(1e-300);
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc.abs() <= tol || (b - a).abs() <= 4.0 * f64::EPSILON {
            return Ok(scaled(state, if fc <= 0.0 { c } else { a }));
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(scaled(state, a))
}
