use serde::{Deserialize, Serialize};

use crate::entity::EntityId;
use crate::Vec3;

/// 8-bit RGB colour.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const RED: Rgb = Rgb(255, 0, 0);
    pub const GREEN: Rgb = Rgb(0, 255, 0);
    pub const BLUE: Rgb = Rgb(0, 0, 255);
}

/// The drone's bottom RGB LED.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedState {
    pub color: Rgb,
    #[serde(default)]
    pub on: bool,
}

impl LedState {
    pub fn lit(color: Rgb) -> Self {
        Self { color, on: true }
    }
}

/// A static light source in the arena.
#[derive(Debug, Clone, PartialEq)]
pub struct Light {
    pub id: EntityId,
    pub position: Vec3,
    pub color: Rgb,
}
