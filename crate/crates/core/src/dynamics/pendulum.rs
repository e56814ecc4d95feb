//! Fixed-base 3-link inverted pendulum dynamics for the stance phase.
//!
//! The chain runs foot (static base) -> ankle -> shank -> knee -> thigh ->
//! hip -> trunk. Joint coordinates are `[ankle, knee, hip]`; the mapping to
//! absolute link angles `[phi_shank, phi_thigh, theta_trunk]` is the constant
//! matrix [`S_JOINT_TO_ABS`].
//!
//! The Lagrangian has the classic chain structure: with each body CoM at
//! `p_i = sum_a c[i][a] * u(phi_a)` (u the unit link direction), the kinetic
//! energy couples angles only through `A[a][b] * cos(phi_a - phi_b)` with
//! constant `A[a][b] = sum_i m_i c[i][a] c[i][b]`, and gravity enters through
//! `G[a] = sum_i m_i c[i][a]`.

use crate::math::{Scalar, solve_spd3};
use crate::model::{RobotModel, SHANK, THIGH};

/// Joint-to-absolute angle map: `[phi_shank, phi_thigh, theta] = S q`.
pub const S_JOINT_TO_ABS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [1.0, -1.0, 0.0], [1.0, -1.0, 1.0]];

/// Constant coefficients of the stance chain, derived from the robot model.
#[derive(Debug, Clone)]
pub struct StanceCoeffs {
    /// `c[body][angle]`: lever of absolute angle `angle` in body `body`'s CoM.
    /// Bodies ordered shank, thigh, trunk; angles phi_shank, phi_thigh, theta.
    pub c: [[f64; 3]; 3],
    pub masses: [f64; 3],
    pub inertias: [f64; 3],
    /// `A[a][b] = sum_i m_i c[i][a] c[i][b]`.
    pub a: [[f64; 3]; 3],
    /// `G[a] = sum_i m_i c[i][a]`.
    pub g_lever: [f64; 3],
}

impl StanceCoeffs {
    pub fn new(model: &RobotModel) -> Self {
        let l_sh = model.link_lengths[SHANK];
        let l_th = model.link_lengths[THIGH];
        // CoM offsets are measured from the proximal joint of the leg chain
        // seen from the trunk (knee for the shank, hip for the thigh), so the
        // stance pivot distances are the complements.
        let a_sh = l_sh - model.link_com_offsets[SHANK];
        let a_th = l_th - model.link_com_offsets[THIGH];
        let a_tr = model.trunk_com_offset;
        let c = [
            [a_sh, 0.0, 0.0],
            [l_sh, a_th, 0.0],
            [l_sh, l_th, a_tr],
        ];
        let masses = [
            model.link_masses[SHANK],
            model.link_masses[THIGH],
            model.trunk_mass,
        ];
        let inertias = [
            model.link_inertias[SHANK],
            model.link_inertias[THIGH],
            model.trunk_inertia,
        ];
        let mut a = [[0.0; 3]; 3];
        let mut g_lever = [0.0; 3];
        for i in 0..3 {
            for row in 0..3 {
                g_lever[row] += masses[i] * c[i][row];
                for col in 0..3 {
                    a[row][col] += masses[i] * c[i][row] * c[i][col];
                }
            }
        }
        StanceCoeffs {
            c,
            masses,
            inertias,
            a,
            g_lever,
        }
    }
}

#[inline]
fn abs_angles<T: Scalar>(q: &[T; 3]) -> [T; 3] {
    [q[0], q[0] - q[1], q[0] - q[1] + q[2]]
}

#[inline]
fn abs_rates<T: Scalar>(qd: &[T; 3]) -> [T; 3] {
    [qd[0], qd[0] - qd[1], qd[0] - qd[1] + qd[2]]
}

/// Mass matrix `H(q)` of the stance pendulum in joint coordinates.
pub fn mass_matrix<T: Scalar>(model: &RobotModel, q: &[T; 3]) -> [[T; 3]; 3] {
    let cf = StanceCoeffs::new(model);
    mass_matrix_with(&cf, q)
}

pub fn mass_matrix_with<T: Scalar>(cf: &StanceCoeffs, q: &[T; 3]) -> [[T; 3]; 3] {
    let phi = abs_angles(q);
    // M_abs[a][b] = A[a][b] cos(phi_a - phi_b) + delta_ab I_a
    let mut m_abs = [[T::zero(); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m_abs[a][b] = (phi[a] - phi[b]).cos() * T::from_f64(cf.a[a][b]);
        }
        m_abs[a][a] = m_abs[a][a] + T::from_f64(cf.inertias[a]);
    }
    // H = S^T M_abs S with constant S.
    let s = &S_JOINT_TO_ABS;
    let mut h = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = T::zero();
            for a in 0..3 {
                for b in 0..3 {
                    if s[a][i] != 0.0 && s[b][j] != 0.0 {
                        acc = acc + m_abs[a][b] * T::from_f64(s[a][i] * s[b][j]);
                    }
                }
            }
            h[i][j] = acc;
        }
    }
    h
}

/// Bias vector `C(q, qd)`: Coriolis, centrifugal, and gravity torques.
/// At `qd = 0` this is the pure gravity (holding) torque.
pub fn bias<T: Scalar>(model: &RobotModel, q: &[T; 3], qd: &[T; 3]) -> [T; 3] {
    let cf = StanceCoeffs::new(model);
    bias_with(&cf, model.gravity, q, qd)
}

pub fn bias_with<T: Scalar>(cf: &StanceCoeffs, gravity: f64, q: &[T; 3], qd: &[T; 3]) -> [T; 3] {
    let phi = abs_angles(q);
    let phid = abs_rates(qd);
    let mut c_abs = [T::zero(); 3];
    for a in 0..3 {
        let mut acc = T::zero();
        for b in 0..3 {
            acc = acc + (phi[a] - phi[b]).sin() * phid[b] * phid[b] * T::from_f64(cf.a[a][b]);
        }
        // gravity holding torque: +dV/dphi_a with V = g * G_a cos(phi_a)
        acc = acc - phi[a].sin() * T::from_f64(gravity * cf.g_lever[a]);
        c_abs[a] = acc;
    }
    let s = &S_JOINT_TO_ABS;
    let mut out = [T::zero(); 3];
    for j in 0..3 {
        let mut acc = T::zero();
        for a in 0..3 {
            if s[a][j] != 0.0 {
                acc = acc + c_abs[a] * T::from_f64(s[a][j]);
            }
        }
        out[j] = acc;
    }
    out
}

/// Joint accelerations from `H qdd = tau - C`.
pub fn forward_dynamics<T: Scalar>(
    model: &RobotModel,
    q: &[T; 3],
    qd: &[T; 3],
    tau: &[T; 3],
) -> [T; 3] {
    let h = mass_matrix(model, q);
    let c = bias(model, q, qd);
    let rhs = [tau[0] - c[0], tau[1] - c[1], tau[2] - c[2]];
    solve_spd3(&h, &rhs)
}

/// Total mechanical energy of the stance pendulum (kinetic plus gravity
/// potential, zero level at the ankle).
pub fn energy(model: &RobotModel, q: &[f64; 3], qd: &[f64; 3]) -> f64 {
    let cf = StanceCoeffs::new(model);
    let h = mass_matrix_with(&cf, q);
    let mut t = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            t += 0.5 * qd[i] * h[i][j] * qd[j];
        }
    }
    let phi = abs_angles(q);
    let mut v = 0.0;
    for a in 0..3 {
        v += model.gravity * cf.g_lever[a] * phi[a].cos();
    }
    t + v
}

/// One symplectic-Euler step of the unforced/forced pendulum.
pub fn symplectic_step(
    model: &RobotModel,
    q: &mut [f64; 3],
    qd: &mut [f64; 3],
    tau: &[f64; 3],
    dt: f64,
) {
    let qdd = forward_dynamics(model, q, qd, tau);
    for i in 0..3 {
        qd[i] += qdd[i] * dt;
        q[i] += qd[i] * dt;
    }
}
