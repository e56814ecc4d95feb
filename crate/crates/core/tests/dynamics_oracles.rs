//! Independent oracles for the stance-pendulum dynamics.
//!
//! Nothing here reuses the closed-form Lagrangian path under test: the
//! Newton-Euler recursion works point-by-point on the chain, the gravity
//! oracle differentiates link potentials numerically, and the energy check
//! integrates the unforced pendulum.

use hopper_core::dynamics::{bias, energy, forward_dynamics, mass_matrix, symplectic_step};
use hopper_core::model::{RobotModel, FOOT, SHANK, THIGH};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn model() -> RobotModel {
    RobotModel::default()
}

fn random_q(rng: &mut StdRng) -> [f64; 3] {
    [
        rng.gen_range(-1.2..1.2),
        rng.gen_range(-2.5..-0.1),
        rng.gen_range(-1.5..0.8),
    ]
}

/// Planar rigid-link helper for the Newton-Euler pass.
#[derive(Clone, Copy)]
struct PointKin {
    p: [f64; 2],
    v: [f64; 2],
    a: [f64; 2],
}

fn advance(from: &PointKin, dist: f64, phi: f64, w: f64, al: f64) -> PointKin {
    let u = [-phi.sin(), phi.cos()];
    let du = [-phi.cos(), -phi.sin()];
    PointKin {
        p: [from.p[0] + dist * u[0], from.p[1] + dist * u[1]],
        v: [from.v[0] + dist * w * du[0], from.v[1] + dist * w * du[1]],
        a: [
            from.a[0] + dist * (al * du[0] - w * w * u[0]),
            from.a[1] + dist * (al * du[1] - w * w * u[1]),
        ],
    }
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Newton-Euler inverse dynamics of the stance chain: joint torques that
/// produce the given accelerations.
fn newton_euler_id(m: &RobotModel, q: &[f64; 3], qd: &[f64; 3], qdd: &[f64; 3]) -> [f64; 3] {
    let g = [0.0, -m.gravity];
    // absolute angles and their rates/accels: phi = S q
    let phi = [q[0], q[0] - q[1], q[0] - q[1] + q[2]];
    let w = [qd[0], qd[0] - qd[1], qd[0] - qd[1] + qd[2]];
    let al = [qdd[0], qdd[0] - qdd[1], qdd[0] - qdd[1] + qdd[2]];

    let ankle = PointKin {
        p: [0.0, m.link_lengths[FOOT]],
        v: [0.0; 2],
        a: [0.0; 2],
    };
    let a_sh = m.link_lengths[SHANK] - m.link_com_offsets[SHANK];
    let a_th = m.link_lengths[THIGH] - m.link_com_offsets[THIGH];
    let shank_com = advance(&ankle, a_sh, phi[0], w[0], al[0]);
    let knee = advance(&ankle, m.link_lengths[SHANK], phi[0], w[0], al[0]);
    let thigh_com = advance(&knee, a_th, phi[1], w[1], al[1]);
    let hip = advance(&knee, m.link_lengths[THIGH], phi[1], w[1], al[1]);
    let trunk_com = advance(&hip, m.trunk_com_offset, phi[2], w[2], al[2]);

    let masses = [m.link_masses[SHANK], m.link_masses[THIGH], m.trunk_mass];
    let inertias = [
        m.link_inertias[SHANK],
        m.link_inertias[THIGH],
        m.trunk_inertia,
    ];

    // Trunk: only the hip acts on it.
    let f_hip = [
        masses[2] * (trunk_com.a[0] - g[0]),
        masses[2] * (trunk_com.a[1] - g[1]),
    ];
    let r_hip = [hip.p[0] - trunk_com.p[0], hip.p[1] - trunk_com.p[1]];
    let tau2 = inertias[2] * al[2] - cross(r_hip, f_hip);

    // Thigh: shank pushes at the knee, trunk reacts at the hip.
    let f_knee = [
        masses[1] * (thigh_com.a[0] - g[0]) + f_hip[0],
        masses[1] * (thigh_com.a[1] - g[1]) + f_hip[1],
    ];
    let r_knee_th = [knee.p[0] - thigh_com.p[0], knee.p[1] - thigh_com.p[1]];
    let r_hip_th = [hip.p[0] - thigh_com.p[0], hip.p[1] - thigh_com.p[1]];
    let tau1 = -(inertias[1] * al[1]) - tau2 + cross(r_knee_th, f_knee) - cross(r_hip_th, f_hip);

    // Shank: foot pushes at the ankle, thigh reacts at the knee.
    let f_ankle = [
        masses[0] * (shank_com.a[0] - g[0]) + f_knee[0],
        masses[0] * (shank_com.a[1] - g[1]) + f_knee[1],
    ];
    let r_ankle_sh = [ankle.p[0] - shank_com.p[0], ankle.p[1] - shank_com.p[1]];
    let r_knee_sh = [knee.p[0] - shank_com.p[0], knee.p[1] - shank_com.p[1]];
    let tau0 =
        inertias[0] * al[0] - tau1 - cross(r_ankle_sh, f_ankle) + cross(r_knee_sh, f_knee);

    [tau0, tau1, tau2]
}

#[test]
fn forward_dynamics_matches_newton_euler_on_random_states() {
    let m = model();
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..100 {
        let q = random_q(&mut rng);
        let qd = [
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        ];
        let tau = [
            rng.gen_range(-30.0..30.0),
            rng.gen_range(-60.0..60.0),
            rng.gen_range(-30.0..30.0),
        ];
        let qdd = forward_dynamics(&m, &q, &qd, &tau);
        let tau_ne = newton_euler_id(&m, &q, &qd, &qdd);
        for i in 0..3 {
            assert!(
                (tau_ne[i] - tau[i]).abs() < 1e-8,
                "joint {i}: NE {} vs applied {}",
                tau_ne[i],
                tau[i]
            );
        }
    }
}

#[test]
fn mass_matrix_symmetric_positive_definite_on_random_states() {
    let m = model();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..1000 {
        let q = [
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        ];
        let h = mass_matrix(&m, &q);
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[i][j] - h[j][i]).abs() < 1e-12);
            }
        }
        let hm = nalgebra::Matrix3::from_fn(|i, j| h[i][j]);
        let eig = hm.symmetric_eigenvalues();
        for k in 0..3 {
            assert!(eig[k] > 0.0, "eigenvalue {} at q = {:?}", eig[k], q);
        }
    }
}

#[test]
fn static_bias_matches_per_link_gravity_oracle() {
    // Potential energy of each moving body, differentiated numerically.
    let m = model();
    let heights = |q: &[f64; 3]| -> f64 {
        let phi = [q[0], q[0] - q[1], q[0] - q[1] + q[2]];
        let a_sh = m.link_lengths[SHANK] - m.link_com_offsets[SHANK];
        let a_th = m.link_lengths[THIGH] - m.link_com_offsets[THIGH];
        let y_sh = a_sh * phi[0].cos();
        let y_th = m.link_lengths[SHANK] * phi[0].cos() + a_th * phi[1].cos();
        let y_tr = m.link_lengths[SHANK] * phi[0].cos()
            + m.link_lengths[THIGH] * phi[1].cos()
            + m.trunk_com_offset * phi[2].cos();
        m.gravity
            * (m.link_masses[SHANK] * y_sh + m.link_masses[THIGH] * y_th + m.trunk_mass * y_tr)
    };
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..100 {
        let q = random_q(&mut rng);
        let b = bias(&m, &q, &[0.0; 3]);
        let h = 1e-6;
        for j in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[j] += h;
            qm[j] -= h;
            let dv = (heights(&qp) - heights(&qm)) / (2.0 * h);
            assert!(
                (b[j] - dv).abs() < 1e-6,
                "joint {j}: bias {} vs dV {}",
                b[j],
                dv
            );
        }
    }
}

/// Maximum energy drift of the unforced pendulum over 1 s at dt = 1e-5.
///
/// The configuration swings about the hanging equilibrium so the motion stays
/// bounded; a sign error in the Coriolis terms would pump energy secularly
/// and fail the tolerance regardless of amplitude.
fn swing_drift(m: &RobotModel, dq: [f64; 3], dqd: [f64; 3]) -> f64 {
    let mut q = [std::f64::consts::PI + dq[0], dq[1], dq[2]];
    let mut qd = dqd;
    let e0 = energy(m, &q, &qd);
    let dt = 1e-5;
    let mut max_drift: f64 = 0.0;
    for _ in 0..100_000 {
        symplectic_step(m, &mut q, &mut qd, &[0.0; 3], dt);
        max_drift = max_drift.max((energy(m, &q, &qd) - e0).abs());
    }
    max_drift
}

#[test]
fn unforced_energy_drift_below_tolerance() {
    let m = model();
    let drift = swing_drift(&m, [0.05, -0.04, 0.03], [0.05, 0.03, -0.05]);
    assert!(drift <= 1e-4, "energy drift {drift} J over 1 s");
}
