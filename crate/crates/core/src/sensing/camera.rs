//! Forward-facing pinhole camera that reports light sources as pixel
//! coordinates.
//!
//! Only detection is modelled: each visible source maps to one `(u, v)` cell
//! of a 320×320 plane, `u` growing to the right and `v` downwards. There is
//! no image, no occlusion, and no intensity.

use serde::{Deserialize, Serialize};

use crate::control::world_to_body;
use crate::entity::EntityId;
use crate::sensing::led::Rgb;
use crate::Vec3;

/// Side length of the square detection plane, pixels.
pub const RESOLUTION: u16 = 320;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Full field-of-view angle, degrees. The same on both axes.
    pub aperture: f64,
    /// Camera heading relative to the body x axis, degrees.
    pub mount_yaw_offset: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            aperture: 50.0,
            mount_yaw_offset: 0.0,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.aperture > 0.0 && self.aperture < 180.0) {
            return Err(format!(
                "aperture must be in (0, 180), got {}",
                self.aperture
            ));
        }
        if !self.mount_yaw_offset.is_finite() {
            return Err("mount_yaw_offset must be finite".into());
        }
        Ok(())
    }
}

/// Where the camera is and which way it looks (heading only; the drone is
/// modelled level).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Detection {
    pub u: u16,
    pub v: u16,
    pub color: Rgb,
    pub source: EntityId,
}

/// Projects `source` onto the detection plane.
///
/// The source is visible when both its horizontal and vertical view angles
/// are within ±aperture/2, boundary included. The pixel is
/// `floor((tan θ / tan(aperture/2) + 1) · 160)` clamped to `[0, 319]`.
pub fn project_light(
    pose: &CameraPose,
    source: &Vec3,
    config: &CameraConfig,
) -> Option<(u16, u16)> {
    let local = world_to_body(&(source - pose.position), pose.yaw);
    let forward = local.x;
    if forward <= 0.0 {
        return None;
    }
    let right = -local.y;
    let down = -local.z;
    let half = 0.5 * config.aperture;
    let visible = |offset: f64| offset.atan2(forward).to_degrees().abs() <= half;
    if !(visible(right) && visible(down)) {
        return None;
    }
    let half_tan = half.to_radians().tan();
    let to_pixel = |offset: f64| {
        let scaled = ((offset / forward) / half_tan + 1.0) * f64::from(RESOLUTION / 2);
        scaled.floor().clamp(0.0, f64::from(RESOLUTION - 1)) as u16
    };
    Some((to_pixel(right), to_pixel(down)))
}
