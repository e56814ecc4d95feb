//! Robot dynamics: stance pendulum, kinematics, and reduced trunk models.

pub mod kinematics;
pub mod pendulum;
pub mod reduced;

pub use kinematics::{
    contact_jacobian, contact_jacobian_checked, fk_trunk, fk_trunk_state, flight_points,
    landing_joint_reference, stance_com_x, stance_points, trunk_jacobian, trunk_pose,
    virtual_grfm, ContactJacobian, FlightPoints, IkSolution, KinematicsError, StancePoints,
};
pub use pendulum::{bias, energy, forward_dynamics, mass_matrix, symplectic_step, StanceCoeffs};
pub use reduced::{
    mrbd_derivative, mrbd_derivative_state, srbd_derivative, srbd_derivative_state,
};
