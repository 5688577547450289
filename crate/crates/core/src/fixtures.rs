//! Robot descriptions shipped with the crate.

pub const PENDULUM: &str = include_str!("../fixtures/pendulum.urdf");
pub const THREE_R: &str = include_str!("../fixtures/three_r.urdf");
pub const PUMA_6R: &str = include_str!("../fixtures/puma6r.urdf");
pub const FIVE_BAR: &str = include_str!("../fixtures/five_bar.urdf");

/// Pendulum arm mass (kg) and pivot-to-center distance (m).
pub const PENDULUM_MASS: f64 = 2.0;
pub const PENDULUM_LENGTH: f64 = 0.5;
/// Pendulum inertia about the swing axis through its center of mass.
pub const PENDULUM_IYY: f64 = 0.002;
