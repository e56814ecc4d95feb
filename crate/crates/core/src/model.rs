//! Robot parameters and the shared planar state types.
//!
//! The planar model lumps both legs into one sagittal chain: link masses and
//! inertias are the combined values of the mirrored pair. Four bodies make up
//! the robot: trunk, thigh, shank, foot. Joint order everywhere is
//! `[ankle q0, knee q1, hip q2]`, counter-clockwise positive, zero at the
//! fully extended vertical configuration. The natural knee bend is negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of the thigh in the per-link arrays.
pub const THIGH: usize = 0;
/// Index of the shank in the per-link arrays.
pub const SHANK: usize = 1;
/// Index of the foot in the per-link arrays.
pub const FOOT: usize = 2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid robot model: field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("failed to read robot model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse robot model JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Physical constants of the planar biped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    /// Trunk mass (kg), both hip clusters included.
    pub trunk_mass: f64,
    /// Trunk moment of inertia about its own CoM (kg m^2).
    pub trunk_inertia: f64,
    /// Distance from the hip joint to the trunk CoM along the trunk axis (m).
    pub trunk_com_offset: f64,
    /// Lumped link masses `[thigh, shank, foot]` (kg).
    pub link_masses: [f64; 3],
    /// Link inertias about their own CoM `[thigh, shank, foot]` (kg m^2).
    pub link_inertias: [f64; 3],
    /// Link lengths `[thigh, shank, foot]` (m); the foot length is the
    /// ankle height above the sole.
    pub link_lengths: [f64; 3],
    /// CoM offset from the proximal (hip/knee/ankle) joint along each link (m).
    pub link_com_offsets: [f64; 3],
    /// Toe extent forward of the ankle projection (m).
    pub toe_length: f64,
    /// Heel extent behind the ankle projection (m).
    pub heel_length: f64,
    /// Standing height of the robot (m), informational.
    pub total_height: f64,
    /// Motor torque limit (N m); the knee joint limit is geared up.
    pub tau_max: f64,
    /// Motor speed limit (rad/s); the knee joint limit is geared down.
    pub qdot_max: f64,
    /// Per-motor power limit (W).
    pub power_max: f64,
    /// Motor efficiency used in the power model (1.0 = ideal).
    pub motor_efficiency: f64,
    /// Knee gear ratio (joint torque = ratio x motor torque).
    pub knee_gear_ratio: f64,
    /// Ground friction coefficient.
    pub friction_mu: f64,
    /// Gravity magnitude (m/s^2).
    pub gravity: f64,
    /// Joint angle lower bounds `[ankle, knee, hip]` (rad).
    pub q_min: [f64; 3],
    /// Joint angle upper bounds `[ankle, knee, hip]` (rad).
    pub q_max: [f64; 3],
}

impl Default for RobotModel {
    fn default() -> Self {
        RobotModel {
            trunk_mass: 12.8,
            trunk_inertia: 0.15,
            trunk_com_offset: 0.12,
            link_masses: [0.55, 0.40, 0.25],
            link_inertias: [2.2e-3, 1.6e-3, 5.0e-4],
            link_lengths: [0.22, 0.22, 0.05],
            link_com_offsets: [0.11, 0.11, 0.025],
            toe_length: 0.09,
            heel_length: 0.06,
            total_height: 0.70,
            tau_max: 33.5,
            qdot_max: 21.0,
            power_max: 400.0,
            motor_efficiency: 1.0,
            knee_gear_ratio: 2.0,
            friction_mu: 0.5,
            gravity: 9.81,
            q_min: [-1.4, -2.8, -2.8],
            q_max: [1.4, -0.03, 1.0],
        }
    }
}

impl RobotModel {
    /// Total robot mass: trunk plus all lumped links.
    pub fn total_mass(&self) -> f64 {
        self.trunk_mass + self.link_masses.iter().sum::<f64>()
    }

    /// Joint-level torque limits `[ankle, knee, hip]`; the knee is geared.
    pub fn joint_torque_limits(&self) -> [f64; 3] {
        [
            self.tau_max,
            self.tau_max * self.knee_gear_ratio,
            self.tau_max,
        ]
    }

    /// Joint-level speed limits `[ankle, knee, hip]`; the knee is geared.
    pub fn joint_speed_limits(&self) -> [f64; 3] {
        [
            self.qdot_max,
            self.qdot_max / self.knee_gear_ratio,
            self.qdot_max,
        ]
    }

    /// Mechanical motor power for one joint. The knee gearing cancels in the
    /// torque-speed product, so the joint-level product applies to every motor.
    pub fn motor_power(&self, tau_joint: f64, qd_joint: f64) -> f64 {
        (tau_joint * qd_joint).abs() / self.motor_efficiency
    }

    /// Trunk CoM height above the sole at full vertical extension.
    pub fn stand_height(&self) -> f64 {
        self.link_lengths[FOOT]
            + self.link_lengths[SHANK]
            + self.link_lengths[THIGH]
            + self.trunk_com_offset
    }

    /// Maximum ankle-to-hip distance (straight leg).
    pub fn leg_reach(&self) -> f64 {
        self.link_lengths[SHANK] + self.link_lengths[THIGH]
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let model: RobotModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self, ModelError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Check the physical invariants, reporting the offending field path.
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |field: &str, reason: &str| {
            Err(ModelError::Invalid {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        let names = ["thigh", "shank", "foot"];
        if !(self.trunk_mass > 0.0) {
            return err("trunk_mass", "must be strictly positive");
        }
        if !(self.trunk_inertia > 0.0) {
            return err("trunk_inertia", "must be strictly positive");
        }
        if !(self.trunk_com_offset > 0.0) {
            return err("trunk_com_offset", "must be strictly positive");
        }
        for i in 0..3 {
            if !(self.link_masses[i] > 0.0) {
                return err(&format!("link_masses[{}]", names[i]), "must be strictly positive");
            }
            if !(self.link_inertias[i] > 0.0) {
                return err(&format!("link_inertias[{}]", names[i]), "must be strictly positive");
            }
            if !(self.link_lengths[i] > 0.0) {
                return err(&format!("link_lengths[{}]", names[i]), "must be strictly positive");
            }
            if !(self.link_com_offsets[i] > 0.0 && self.link_com_offsets[i] <= self.link_lengths[i])
            {
                return err(
                    &format!("link_com_offsets[{}]", names[i]),
                    "must lie within (0, link length]",
                );
            }
            if !(self.q_min[i] < self.q_max[i]) {
                return err(&format!("q_min[{i}]"), "must be below q_max");
            }
        }
        if !(self.toe_length > 0.0) {
            return err("toe_length", "must be strictly positive");
        }
        if !(self.heel_length > 0.0) {
            return err("heel_length", "must be strictly positive");
        }
        if !(self.total_height > 0.0) {
            return err("total_height", "must be strictly positive");
        }
        if !(self.tau_max > 0.0) {
            return err("tau_max", "must be strictly positive");
        }
        if !(self.qdot_max > 0.0) {
            return err("qdot_max", "must be strictly positive");
        }
        if !(self.power_max > 0.0) {
            return err("power_max", "must be strictly positive");
        }
        if !(self.motor_efficiency > 0.0 && self.motor_efficiency <= 1.0) {
            return err("motor_efficiency", "must lie within (0, 1]");
        }
        if !(self.knee_gear_ratio >= 1.0) {
            return err("knee_gear_ratio", "must be at least 1");
        }
        if !(self.friction_mu > 0.0) {
            return err("friction_mu", "must be strictly positive");
        }
        if !(self.gravity > 0.0) {
            return err("gravity", "must be strictly positive");
        }
        Ok(())
    }
}

/// Joint-space state of the stance chain: `[ankle, knee, hip]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub q: [f64; 3],
    pub qd: [f64; 3],
}

impl PendulumState {
    pub fn new(q: [f64; 3], qd: [f64; 3]) -> Self {
        PendulumState { q, qd }
    }

    pub fn zero() -> Self {
        PendulumState {
            q: [0.0; 3],
            qd: [0.0; 3],
        }
    }
}

/// Planar trunk CoM state: position, pitch, and their rates.
///
/// Pitch is counter-clockwise positive (a forward lean toward +x is negative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrunkState {
    pub p_x: f64,
    pub p_y: f64,
    pub theta: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub omega: f64,
}

impl TrunkState {
    pub fn new(p_x: f64, p_y: f64, theta: f64, v_x: f64, v_y: f64, omega: f64) -> Self {
        TrunkState {
            p_x,
            p_y,
            theta,
            v_x,
            v_y,
            omega,
        }
    }

    pub fn at_rest(p_x: f64, p_y: f64, theta: f64) -> Self {
        TrunkState::new(p_x, p_y, theta, 0.0, 0.0, 0.0)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.p_x, self.p_y, self.theta, self.v_x, self.v_y, self.omega,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        TrunkState::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Planar contact wrench at the stance contact point: force plus the
/// sagittal moment about that point (counter-clockwise positive).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundWrench {
    pub f_x: f64,
    pub f_y: f64,
    pub m: f64,
}

impl GroundWrench {
    pub fn new(f_x: f64, f_y: f64, m: f64) -> Self {
        GroundWrench { f_x, f_y, m }
    }

    /// Largest violation of the contact-phase wrench conditions: unilateral
    /// normal force, friction cone, and the line-foot moment bounds.
    pub fn cone_violation(&self, mu: f64, toe_length: f64, heel_length: f64) -> f64 {
        let mut v: f64 = -self.f_y;
        v = v.max(self.f_x.abs() - mu * self.f_y);
        v = v.max(self.m - toe_length * self.f_y);
        v = v.max(-heel_length * self.f_y - self.m);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid_and_sums_to_total_mass() {
        let m = RobotModel::default();
        m.validate().unwrap();
        assert!((m.total_mass() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn knee_gearing_doubles_torque_and_halves_speed() {
        let m = RobotModel::default();
        assert!((m.joint_torque_limits()[1] - 67.0).abs() < 1e-12);
        assert!((m.joint_speed_limits()[1] - 10.5).abs() < 1e-12);
        assert!((m.joint_torque_limits()[0] - 33.5).abs() < 1e-12);
        assert!((m.joint_speed_limits()[2] - 21.0).abs() < 1e-12);
    }

    #[test]
    fn knee_motor_power_equals_joint_product() {
        // The gear ratio cancels: (tau/r) * (qd*r) == tau * qd.
        let m = RobotModel::default();
        let tau_joint = 40.0;
        let qd_joint = 5.0;
        let motor = (tau_joint / m.knee_gear_ratio) * (qd_joint * m.knee_gear_ratio);
        assert!((m.motor_power(tau_joint, qd_joint) - motor.abs()).abs() < 1e-12);
    }

    #[test]
    fn loader_reports_field_path() {
        let mut m = RobotModel::default();
        m.link_masses[1] = -0.1;
        let s = serde_json::to_string(&m).unwrap();
        let e = RobotModel::from_json_str(&s).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("link_masses[shank]"), "got: {msg}");
    }

    #[test]
    fn loader_round_trips_default() {
        let m = RobotModel::default();
        let s = serde_json::to_string_pretty(&m).unwrap();
        let m2 = RobotModel::from_json_str(&s).unwrap();
        assert!((m2.total_mass() - m.total_mass()).abs() < 1e-15);
        assert_eq!(m2.q_min, m.q_min);
    }

    #[test]
    fn wrench_cone_violation_detects_each_face() {
        let ok = GroundWrench::new(10.0, 100.0, 2.0);
        assert!(ok.cone_violation(0.5, 0.09, 0.06) <= 0.0);
        assert!(GroundWrench::new(0.0, -1.0, 0.0).cone_violation(0.5, 0.09, 0.06) > 0.0);
        assert!(GroundWrench::new(60.0, 100.0, 0.0).cone_violation(0.5, 0.09, 0.06) > 0.0);
        assert!(GroundWrench::new(0.0, 100.0, 9.5).cone_violation(0.5, 0.09, 0.06) > 0.0);
        assert!(GroundWrench::new(0.0, 100.0, -6.5).cone_violation(0.5, 0.09, 0.06) > 0.0);
    }
}
