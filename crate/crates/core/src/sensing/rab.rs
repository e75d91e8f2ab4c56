//! Range-and-bearing broadcast messaging.

use serde::{Deserialize, Serialize};

use crate::angle::wrap_degrees;
use crate::control::world_to_body;
use crate::entity::EntityId;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabConfig {
    /// Maximum delivery distance of this drone's messages, metres. 0 means
    /// unlimited.
    pub range: f64,
    /// Largest payload this drone may send, bytes.
    pub payload_max: usize,
    /// When set, broadcast this payload every tick.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beacon: Option<Vec<u8>>,
}

impl Default for RabConfig {
    fn default() -> Self {
        Self {
            range: 3.0,
            payload_max: 10,
            beacon: None,
        }
    }
}

impl RabConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.range.is_finite() && self.range >= 0.0) {
            return Err(format!("range must be >= 0, got {}", self.range));
        }
        if self.payload_max < 1 {
            return Err("payload_max must be >= 1".into());
        }
        if let Some(beacon) = &self.beacon {
            if beacon.len() > self.payload_max {
                return Err(format!(
                    "beacon of {} bytes exceeds payload_max {}",
                    beacon.len(),
                    self.payload_max
                ));
            }
        }
        Ok(())
    }

    pub fn reaches(&self, distance: f64) -> bool {
        self.range == 0.0 || distance <= self.range
    }
}

/// One received message, as seen by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct RabReading {
    /// Metres.
    pub range: f64,
    /// Degrees in `(-180, 180]`, receiver body frame, counter-clockwise from x.
    pub horizontal_bearing: f64,
    /// Elevation, degrees in `[-90, 90]`.
    pub vertical_bearing: f64,
    pub payload: Vec<u8>,
    pub sender: EntityId,
}

/// Range and bearings of `sender` as measured by a receiver at
/// `receiver`/`receiver_yaw`. `None` when the two coincide.
pub fn measure(receiver: &Vec3, receiver_yaw: f64, sender: &Vec3) -> Option<(f64, f64, f64)> {
    let offset = sender - receiver;
    let range = offset.norm();
    if range == 0.0 {
        return None;
    }
    let local = world_to_body(&offset, receiver_yaw);
    let horizontal = wrap_degrees(local.y.atan2(local.x).to_degrees());
    let vertical = offset.z.atan2(offset.x.hypot(offset.y)).to_degrees();
    Some((range, horizontal, vertical))
}
