//! Forward kinematics, Jacobians, and inverse kinematics of the planar chain.
//!
//! Two chain traversals are used: the stance chain (foot flat on the ground,
//! built upward from the ankle) and the flight chain (legs hanging from the
//! trunk pose). Both share the same joint conventions and agree wherever a
//! configuration is reachable by both.

use crate::math::{link_dir, link_dir_d, sole_dir, solve3, det3, Scalar, V2};
use crate::model::{GroundWrench, PendulumState, RobotModel, TrunkState, FOOT, SHANK, THIGH};
use thiserror::Error;

use super::pendulum::{self, S_JOINT_TO_ABS};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("singular configuration: straight knee (|q1| too small) makes the leg Jacobian rank-deficient")]
    Singular,
}

/// World-frame points and CoM of the stance chain (ankle above the origin,
/// foot flat on the ground at height 0).
#[derive(Debug, Clone, Copy)]
pub struct StancePoints<T> {
    pub toe: V2<T>,
    pub heel: V2<T>,
    pub ankle: V2<T>,
    pub knee: V2<T>,
    pub hip: V2<T>,
    pub trunk_com: V2<T>,
    pub thigh_com: V2<T>,
    pub shank_com: V2<T>,
    pub foot_com: V2<T>,
    /// Whole-robot CoM (trunk + all links, foot included).
    pub total_com: V2<T>,
}

/// Stance forward kinematics for the chain points, generic over the scalar.
pub fn stance_points<T: Scalar>(model: &RobotModel, q: &[T; 3]) -> StancePoints<T> {
    let phi_sh = q[0];
    let phi_th = q[0] - q[1];
    let theta = q[0] - q[1] + q[2];
    let ankle = V2::new(T::zero(), T::from_f64(model.link_lengths[FOOT]));
    let knee = ankle + link_dir(phi_sh).scale(T::from_f64(model.link_lengths[SHANK]));
    let hip = knee + link_dir(phi_th).scale(T::from_f64(model.link_lengths[THIGH]));
    let trunk_com = hip + link_dir(theta).scale(T::from_f64(model.trunk_com_offset));
    let shank_com = ankle
        + link_dir(phi_sh).scale(T::from_f64(
            model.link_lengths[SHANK] - model.link_com_offsets[SHANK],
        ));
    let thigh_com = knee
        + link_dir(phi_th).scale(T::from_f64(
            model.link_lengths[THIGH] - model.link_com_offsets[THIGH],
        ));
    let foot_com = V2::new(
        T::zero(),
        T::from_f64(model.link_lengths[FOOT] - model.link_com_offsets[FOOT]),
    );
    let toe = V2::new(T::from_f64(model.toe_length), T::zero());
    let heel = V2::new(T::from_f64(-model.heel_length), T::zero());
    let inv_m = T::from_f64(1.0 / model.total_mass());
    let total_com = (trunk_com.scale(T::from_f64(model.trunk_mass))
        + thigh_com.scale(T::from_f64(model.link_masses[THIGH]))
        + shank_com.scale(T::from_f64(model.link_masses[SHANK]))
        + foot_com.scale(T::from_f64(model.link_masses[FOOT])))
    .scale(inv_m);
    StancePoints {
        toe,
        heel,
        ankle,
        knee,
        hip,
        trunk_com,
        thigh_com,
        shank_com,
        foot_com,
        total_com,
    }
}

/// Trunk pose `(p_x, p_y, theta)` from the stance chain.
pub fn trunk_pose<T: Scalar>(model: &RobotModel, q: &[T; 3]) -> [T; 3] {
    let pts = stance_points(model, q);
    [pts.trunk_com.x, pts.trunk_com.y, q[0] - q[1] + q[2]]
}

/// Jacobian of the trunk pose `(p_x, p_y, theta)` with respect to the joints.
pub fn trunk_jacobian<T: Scalar>(model: &RobotModel, q: &[T; 3]) -> [[T; 3]; 3] {
    // p_c = ankle + L_sh u(phi_sh) + L_th u(phi_th) + a_tr u(theta)
    let levers = [
        model.link_lengths[SHANK],
        model.link_lengths[THIGH],
        model.trunk_com_offset,
    ];
    pose_jacobian_from_levers(q, &levers)
}

fn pose_jacobian_from_levers<T: Scalar>(q: &[T; 3], levers: &[f64; 3]) -> [[T; 3]; 3] {
    let phi = [q[0], q[0] - q[1], q[0] - q[1] + q[2]];
    let mut j = [[T::zero(); 3]; 3];
    for a in 0..3 {
        let d = link_dir_d(phi[a]).scale(T::from_f64(levers[a]));
        for col in 0..3 {
            let s = S_JOINT_TO_ABS[a][col];
            if s != 0.0 {
                j[0][col] = j[0][col] + d.x * T::from_f64(s);
                j[1][col] = j[1][col] + d.y * T::from_f64(s);
            }
        }
    }
    for col in 0..3 {
        j[2][col] = T::from_f64(S_JOINT_TO_ABS[2][col]);
    }
    j
}

/// Stance trunk state: pose from FK, velocity from the analytic Jacobian.
pub fn fk_trunk(model: &RobotModel, q: &[f64; 3], qd: &[f64; 3]) -> TrunkState {
    let pose = trunk_pose(model, q);
    let j = trunk_jacobian(model, q);
    let mut vel = [0.0; 3];
    for r in 0..3 {
        for c in 0..3 {
            vel[r] += j[r][c] * qd[c];
        }
    }
    TrunkState::new(pose[0], pose[1], pose[2], vel[0], vel[1], vel[2])
}

/// Generic stance trunk state as a 6-array (for transcription use).
pub fn fk_trunk_state<T: Scalar>(model: &RobotModel, q: &[T; 3], qd: &[T; 3]) -> [T; 6] {
    let pose = trunk_pose(model, q);
    let j = trunk_jacobian(model, q);
    let mut vel = [T::zero(); 3];
    for r in 0..3 {
        for c in 0..3 {
            vel[r] = vel[r] + j[r][c] * qd[c];
        }
    }
    [pose[0], pose[1], pose[2], vel[0], vel[1], vel[2]]
}

/// Horizontal position of the whole-robot CoM in stance (support-region check).
pub fn stance_com_x<T: Scalar>(model: &RobotModel, q: &[T; 3]) -> T {
    stance_points(model, q).total_com.x
}

/// Contact Jacobian of the stance chain.
///
/// Rows map joint rates to (whole-robot CoM x rate, CoM y rate, trunk pitch
/// rate). Its transpose maps the contact wrench, expressed at the contact
/// point, to joint torques; because gravity's generalized force is exactly
/// total weight through the CoM rows, statics reproduce `F_y = M g`.
pub fn contact_jacobian<T: Scalar>(model: &RobotModel, q: &[T; 3]) -> [[T; 3]; 3] {
    // CoM = (1/M) sum_i m_i p_i, so the translation rows reuse the gravity
    // levers G_a of the pendulum: d(CoM)/dq = (1/M) sum_a G_a u'(phi_a) S[a][:].
    let cf = pendulum::StanceCoeffs::new(model);
    let inv_m = 1.0 / model.total_mass();
    let levers = [
        cf.g_lever[0] * inv_m,
        cf.g_lever[1] * inv_m,
        cf.g_lever[2] * inv_m,
    ];
    pose_jacobian_from_levers(q, &levers)
}

/// Result of the contact-Jacobian factorization used for wrench maps.
#[derive(Debug, Clone, Copy)]
pub struct ContactJacobian {
    pub j: [[f64; 3]; 3],
    pub det: f64,
    /// Raised near the straight-knee singularity (|det| < 1e-8).
    pub singular: bool,
}

pub fn contact_jacobian_checked(model: &RobotModel, q: &[f64; 3]) -> ContactJacobian {
    let j = contact_jacobian(model, q);
    let det = det3(&j);
    ContactJacobian {
        j,
        det,
        singular: det.abs() < 1e-8,
    }
}

/// Virtual ground-reaction wrench transmitted through the stance leg:
/// `[F; M] = (J_c^T)^{-1} tau`.
pub fn virtual_grfm(
    model: &RobotModel,
    q: &[f64; 3],
    tau: &[f64; 3],
) -> Result<GroundWrench, KinematicsError> {
    let cj = contact_jacobian_checked(model, q);
    if cj.singular {
        return Err(KinematicsError::Singular);
    }
    let mut jt = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            jt[r][c] = cj.j[c][r];
        }
    }
    let w = solve3(&jt, tau).ok_or(KinematicsError::Singular)?;
    Ok(GroundWrench::new(w[0], w[1], w[2]))
}

/// World-frame points of the flight chain: legs hanging from the trunk pose.
#[derive(Debug, Clone, Copy)]
pub struct FlightPoints<T> {
    pub hip: V2<T>,
    pub knee: V2<T>,
    pub ankle: V2<T>,
    /// Sole center: ankle projected along the foot link.
    pub sole: V2<T>,
    pub toe: V2<T>,
    pub heel: V2<T>,
    pub thigh_com: V2<T>,
    pub shank_com: V2<T>,
    pub foot_com: V2<T>,
    pub trunk_com: V2<T>,
    pub total_com: V2<T>,
}

/// Flight forward kinematics from a trunk pose `(p_x, p_y, theta)`.
pub fn flight_points<T: Scalar>(model: &RobotModel, pose: &[T; 3], q: &[T; 3]) -> FlightPoints<T> {
    let trunk_com = V2::new(pose[0], pose[1]);
    let theta = pose[2];
    let phi_th = theta - q[2];
    let phi_sh = phi_th + q[1];
    let phi_ft = phi_sh - q[0];
    let hip = trunk_com - link_dir(theta).scale(T::from_f64(model.trunk_com_offset));
    let knee = hip - link_dir(phi_th).scale(T::from_f64(model.link_lengths[THIGH]));
    let thigh_com = hip - link_dir(phi_th).scale(T::from_f64(model.link_com_offsets[THIGH]));
    let ankle = knee - link_dir(phi_sh).scale(T::from_f64(model.link_lengths[SHANK]));
    let shank_com = knee - link_dir(phi_sh).scale(T::from_f64(model.link_com_offsets[SHANK]));
    let sole = ankle - link_dir(phi_ft).scale(T::from_f64(model.link_lengths[FOOT]));
    let foot_com = ankle - link_dir(phi_ft).scale(T::from_f64(model.link_com_offsets[FOOT]));
    let toe = sole + sole_dir(phi_ft).scale(T::from_f64(model.toe_length));
    let heel = sole - sole_dir(phi_ft).scale(T::from_f64(model.heel_length));
    let inv_m = T::from_f64(1.0 / model.total_mass());
    let total_com = (trunk_com.scale(T::from_f64(model.trunk_mass))
        + thigh_com.scale(T::from_f64(model.link_masses[THIGH]))
        + shank_com.scale(T::from_f64(model.link_masses[SHANK]))
        + foot_com.scale(T::from_f64(model.link_masses[FOOT])))
    .scale(inv_m);
    FlightPoints {
        hip,
        knee,
        ankle,
        sole,
        toe,
        heel,
        thigh_com,
        shank_com,
        foot_com,
        trunk_com,
        total_com,
    }
}

/// Inverse-kinematics result for the landing joint reference.
#[derive(Debug, Clone, Copy)]
pub struct IkSolution {
    pub state: PendulumState,
    /// Target was out of reach and the hip was pulled back to the reach limit.
    pub clamped: bool,
    /// Position residual `|FK(q) - target|` after clamping (zero in reach).
    pub residual: f64,
}

/// Solve the stance chain joints that place the trunk at `trunk` with the
/// foot flat at sole position `p_f` (world frame). Picks the bent-knee branch
/// (`q1 < 0`).
pub fn landing_joint_reference(
    model: &RobotModel,
    trunk: &TrunkState,
    p_f: [f64; 2],
) -> Result<IkSolution, KinematicsError> {
    let ankle = [p_f[0], p_f[1] + model.link_lengths[FOOT]];
    let hip_target = [
        trunk.p_x + model.trunk_com_offset * trunk.theta.sin(),
        trunk.p_y - model.trunk_com_offset * trunk.theta.cos(),
    ];
    let l_sh = model.link_lengths[SHANK];
    let l_th = model.link_lengths[THIGH];
    let mut d = [hip_target[0] - ankle[0], hip_target[1] - ankle[1]];
    let mut rho = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let reach = 0.9995 * (l_sh + l_th);
    let min_reach = 1.02 * (l_sh - l_th).abs().max(1e-6);
    let mut clamped = false;
    let mut residual = 0.0;
    if rho > reach {
        let s = reach / rho;
        residual = rho - reach;
        d = [d[0] * s, d[1] * s];
        rho = reach;
        clamped = true;
    } else if rho < min_reach {
        if rho < 1e-12 {
            return Err(KinematicsError::Singular);
        }
        let s = min_reach / rho;
        residual = min_reach - rho;
        d = [d[0] * s, d[1] * s];
        rho = min_reach;
        clamped = true;
    }
    // Link direction of d: u(alpha) = (-sin, cos).
    let alpha = f64::atan2(-d[0], d[1]);
    let cos_beta = ((l_sh * l_sh + rho * rho - l_th * l_th) / (2.0 * l_sh * rho)).clamp(-1.0, 1.0);
    let beta = cos_beta.acos();
    // Two elbow branches; pick the one with a bent (negative) knee.
    let mut best: Option<PendulumState> = None;
    for phi_sh in [alpha + beta, alpha - beta] {
        let knee = [ankle[0] - l_sh * phi_sh.sin(), ankle[1] + l_sh * phi_sh.cos()];
        let e = [d[0] + ankle[0] - knee[0], d[1] + ankle[1] - knee[1]];
        let phi_th = f64::atan2(-e[0], e[1]);
        let q1 = phi_sh - phi_th;
        if q1 < -1e-9 {
            let q0 = phi_sh;
            let q2 = trunk.theta - phi_th;
            best = Some(PendulumState::new([q0, q1, q2], [0.0; 3]));
            break;
        }
    }
    let mut state = best.ok_or(KinematicsError::Singular)?;
    // Joint rates from the trunk velocity through the trunk Jacobian.
    let j = trunk_jacobian(model, &state.q);
    let mut jm = [[0.0; 3]; 3];
    for r in 0..3 {
        jm[r] = j[r];
    }
    match solve3(&jm, &[trunk.v_x, trunk.v_y, trunk.omega]) {
        Some(qd) => state.qd = qd,
        None => {
            if clamped {
                state.qd = [0.0; 3];
            } else {
                return Err(KinematicsError::Singular);
            }
        }
    }
    Ok(IkSolution {
        state,
        clamped,
        residual,
    })
}
