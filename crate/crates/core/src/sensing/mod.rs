//! Onboard devices: LED, camera, range-and-bearing radio and battery.

pub mod battery;
pub mod camera;
pub mod led;
pub mod rab;

pub use battery::BatteryModel;
pub use camera::{project_light, CameraConfig, CameraPose, Detection};
pub use led::{LedState, Light, Rgb};
pub use rab::{RabConfig, RabReading};
