use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Kinematic state of one drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    /// World frame, metres.
    pub position: Vec3,
    /// Degrees in `(-180, 180]`.
    pub yaw: f64,
    /// World frame, m/s.
    pub velocity: Vec3,
    /// deg/s, counter-clockwise positive.
    pub yaw_rate: f64,
    /// Battery charge fraction in `[0, 1]`.
    pub charge: f64,
}

impl DroneState {
    pub fn at_rest(position: Vec3, yaw: f64, charge: f64) -> Self {
        Self {
            position,
            yaw,
            velocity: Vec3::zeros(),
            yaw_rate: 0.0,
            charge,
        }
    }

    /// A drone with an empty battery cannot stay airborne.
    pub fn is_grounded(&self) -> bool {
        self.charge <= 0.0
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

impl Default for DroneState {
    fn default() -> Self {
        Self::at_rest(Vec3::zeros(), 0.0, 1.0)
    }
}
