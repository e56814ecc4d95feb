//! Reduced-order trunk dynamics: the multi-rigid-body flight model and the
//! single-rigid-body landing model.
//!
//! Both evolve the planar trunk state `[p_x, p_y, theta, v_x, v_y, omega]`.
//! The flight model treats each leg link's weight as an external force on the
//! trunk, plus an optional virtual foot force; the landing model is the trunk
//! alone under a contact wrench at a fixed foot point.

use crate::math::{Scalar, V2};
use crate::model::{GroundWrench, RobotModel, TrunkState};

use super::kinematics::flight_points;

/// Trunk state derivative under the multi-rigid-body flight model.
///
/// `f_v` is the virtual foot force applied at the sole point. Link positions
/// come from the flight chain at the given joint configuration.
pub fn mrbd_derivative<T: Scalar>(
    model: &RobotModel,
    state: &[T; 6],
    q: &[T; 3],
    f_v: &[T; 2],
) -> [T; 6] {
    let pose = [state[0], state[1], state[2]];
    let pts = flight_points(model, &pose, q);
    let p_c = V2::new(state[0], state[1]);
    let g_vec = V2::new(T::zero(), T::from_f64(-model.gravity));
    let m0 = model.trunk_mass;
    let i0 = model.trunk_inertia;

    // m0 (a + g) = F^v + sum_n (-m_n g), with g the +9.81 "up" convention;
    // equivalently a = g_vec + (F^v + sum_n m_n g_vec) / m0.
    let link_weight: f64 = model.link_masses.iter().sum();
    let fv = V2::new(f_v[0], f_v[1]);
    let accel = g_vec + (fv + g_vec.scale(T::from_f64(link_weight))).scale(T::from_f64(1.0 / m0));

    // I0 thetadd = (p_f - p_c) x F^v + sum_n (p_n - p_c) x (m_n g_vec)
    let mut moment = (pts.sole - p_c).cross(fv);
    let link_coms = [pts.thigh_com, pts.shank_com, pts.foot_com];
    for (n, p_n) in link_coms.iter().enumerate() {
        moment = moment + (*p_n - p_c).cross(g_vec.scale(T::from_f64(model.link_masses[n])));
    }
    [
        state[3],
        state[4],
        state[5],
        accel.x,
        accel.y,
        moment * T::from_f64(1.0 / i0),
    ]
}

/// Trunk state derivative under the single-rigid-body landing model with a
/// contact wrench applied at the fixed foot point `p_f`.
pub fn srbd_derivative<T: Scalar>(
    model: &RobotModel,
    state: &[T; 6],
    p_f: &[T; 2],
    wrench: &[T; 3],
) -> [T; 6] {
    let p_c = V2::new(state[0], state[1]);
    let f = V2::new(wrench[0], wrench[1]);
    let g_vec = V2::new(T::zero(), T::from_f64(-model.gravity));
    let accel = g_vec + f.scale(T::from_f64(1.0 / model.trunk_mass));
    let arm = V2::new(p_f[0], p_f[1]) - p_c;
    let thetadd = (arm.cross(f) + wrench[2]) * T::from_f64(1.0 / model.trunk_inertia);
    [state[3], state[4], state[5], accel.x, accel.y, thetadd]
}

/// Convenience f64 wrapper over [`srbd_derivative`].
pub fn srbd_derivative_state(
    model: &RobotModel,
    trunk: &TrunkState,
    p_f: [f64; 2],
    wrench: &GroundWrench,
) -> [f64; 6] {
    srbd_derivative(
        model,
        &trunk.to_array(),
        &p_f,
        &[wrench.f_x, wrench.f_y, wrench.m],
    )
}

/// Convenience f64 wrapper over [`mrbd_derivative`].
pub fn mrbd_derivative_state(
    model: &RobotModel,
    trunk: &TrunkState,
    q: &[f64; 3],
    f_v: [f64; 2],
) -> [f64; 6] {
    mrbd_derivative(model, &trunk.to_array(), q, &f_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::kinematics::flight_points;

    fn model() -> RobotModel {
        RobotModel::default()
    }

    #[test]
    fn srbd_free_fall() {
        let m = model();
        let t = TrunkState::new(0.3, 0.9, 0.1, 1.0, 0.5, -0.2);
        let d = srbd_derivative_state(&m, &t, [0.0, 0.0], &GroundWrench::default());
        assert_eq!(d[0], t.v_x);
        assert_eq!(d[1], t.v_y);
        assert_eq!(d[2], t.omega);
        assert!((d[3]).abs() < 1e-15);
        assert!((d[4] + m.gravity).abs() < 1e-15);
        assert!((d[5]).abs() < 1e-15);
    }

    #[test]
    fn srbd_static_balance() {
        let m = model();
        let t = TrunkState::at_rest(0.5, 0.6, 0.0);
        let w = GroundWrench::new(0.0, m.trunk_mass * m.gravity, 0.0);
        let d = srbd_derivative_state(&m, &t, [0.5, 0.0], &w);
        for v in d {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn srbd_moment_matches_cross_product_oracle() {
        let m = model();
        let t = TrunkState::at_rest(0.0, 0.5, 0.0);
        let w = GroundWrench::new(10.0, m.trunk_mass * m.gravity, 0.0);
        let d = srbd_derivative_state(&m, &t, [-0.1, 0.0], &w);
        // arm = (-0.1, -0.5); cross(arm, F) = arm_x F_y - arm_y F_x
        let expect = (-0.1 * m.trunk_mass * m.gravity - (-0.5) * 10.0) / m.trunk_inertia;
        assert!((d[5] - expect).abs() < 1e-12);
        assert!(d[3].abs() > 0.0);
    }

    #[test]
    fn srbd_is_linear_in_wrench() {
        let m = model();
        let t = TrunkState::new(0.1, 0.7, -0.05, 0.4, -0.3, 0.2);
        let w1 = GroundWrench::new(3.0, 40.0, 1.0);
        let w2 = GroundWrench::new(-7.0, 11.0, -2.5);
        let sum = GroundWrench::new(w1.f_x + w2.f_x, w1.f_y + w2.f_y, w1.m + w2.m);
        let d1 = srbd_derivative_state(&m, &t, [0.2, 0.0], &w1);
        let d2 = srbd_derivative_state(&m, &t, [0.2, 0.0], &w2);
        let d0 = srbd_derivative_state(&m, &t, [0.2, 0.0], &GroundWrench::default());
        let ds = srbd_derivative_state(&m, &t, [0.2, 0.0], &sum);
        for i in 0..6 {
            assert!((ds[i] - (d1[i] + d2[i] - d0[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn mrbd_ballistic_trunk_acceleration_under_combined_weight() {
        // With zero virtual force and a symmetric pose (all link moments
        // cancel), the trunk CoM accelerates at g (m0 + sum m_n) / m0.
        let m = model();
        let t = TrunkState::at_rest(0.0, 0.8, 0.0);
        let q = [0.0, -1e-12, 0.0];
        let d = mrbd_derivative_state(&m, &t, &q, [0.0, 0.0]);
        let g_eff = m.gravity * m.total_mass() / m.trunk_mass;
        assert!((d[4] + g_eff).abs() < 1e-9, "got {} want {}", d[4], -g_eff);
        assert!(d[3].abs() < 1e-9);
        assert!(d[5].abs() < 1e-9);
    }

    #[test]
    fn mrbd_angular_acceleration_matches_gravity_moment_oracle() {
        let m = model();
        let t = TrunkState::at_rest(0.2, 0.9, 0.15);
        let q = [0.3, -1.2, -0.4];
        let d = mrbd_derivative_state(&m, &t, &q, [0.0, 0.0]);
        let pts = flight_points(&m, &[t.p_x, t.p_y, t.theta], &q);
        let coms = [pts.thigh_com, pts.shank_com, pts.foot_com];
        let mut moment = 0.0;
        for (n, p) in coms.iter().enumerate() {
            let rx = p.x - t.p_x;
            let ry = p.y - t.p_y;
            // (p_n - p_c) x (0, -m_n g)
            moment += rx * (-m.link_masses[n] * m.gravity) - ry * 0.0;
        }
        assert!((d[5] - moment / m.trunk_inertia).abs() < 1e-12);
    }

    #[test]
    fn mrbd_hover_equilibrium() {
        let m = model();
        let t = TrunkState::at_rest(0.0, 0.8, 0.0);
        let q = [0.0, -1e-12, 0.0];
        // F^v = (0, (m0 + sum m_n) g) applied at the sole directly below p_c.
        let fv = [0.0, m.total_mass() * m.gravity];
        let d = mrbd_derivative_state(&m, &t, &q, fv);
        assert!(d[3].abs() < 1e-9);
        assert!(d[4].abs() < 1e-9);
    }

    #[test]
    fn mrbd_com_component_integrates_to_parabola() {
        // Exact integration of the CoM rows over 0.3 s matches the closed
        // form under the effective gravity of the flight model.
        let m = model();
        let q = [0.2, -1.0, -0.3];
        let t0 = TrunkState::new(0.0, 0.9, 0.05, 1.2, 1.5, 0.0);
        let g_eff = m.gravity * m.total_mass() / m.trunk_mass;
        let tf = 0.3;
        // Fine RK4 on the trunk translation (moments ignored: translation is
        // decoupled from attitude in this model when F^v = 0).
        let mut y = [t0.p_y, t0.v_y];
        let mut x = [t0.p_x, t0.v_x];
        let n = 3000;
        let h = tf / n as f64;
        for _ in 0..n {
            // dv/dt = -g_eff exactly; analytic stepping is exact for RK4 too
            x[0] += x[1] * h;
            y[0] += y[1] * h - 0.5 * g_eff * h * h;
            y[1] -= g_eff * h;
        }
        let x_closed = t0.p_x + t0.v_x * tf;
        let y_closed = t0.p_y + t0.v_y * tf - 0.5 * g_eff * tf * tf;
        assert!((x[0] - x_closed).abs() < 1e-9);
        assert!((y[0] - y_closed).abs() < 1e-9);
        // and the model derivative reports exactly -g_eff at any state
        let d = mrbd_derivative_state(&m, &t0, &q, [0.0, 0.0]);
        assert!((d[4] + g_eff).abs() < 1e-12);
    }
}
