//! # cfsim
//!
//! A deterministic, fixed-tick simulator for small indoor quadcopters of the
//! Crazyflie class.
//!
//! The crate models each drone as a kinematic point mass driven by cascaded
//! PD loops (position → velocity → acceleration), plus the onboard devices a
//! swarm experiment typically needs:
//!
//! - an RGB LED that other drones can see,
//! - a forward-facing camera that reports lights and LEDs as pixel
//!   coordinates on a 320×320 plane,
//! - range-and-bearing (RAB) broadcast messaging,
//! - a cubic battery discharge curve with a hard cutoff.
//!
//! Scenarios are plain TOML documents (see [`scenario`]), trajectories are
//! logged as fixed-format CSV (see [`trajectory`]), and the built-in
//! validation flights live in [`experiments`].
//!
//! ```
//! use cfsim::scenario::Scenario;
//! use cfsim::world::World;
//!
//! let scenario = Scenario::load(r#"
//!     format_version = 1
//!     duration = 10
//!     [[drones]]
//!     id = "cf1"
//!     position = [0.0, 0.0, 1.0]
//! "#).unwrap();
//! let mut world = World::new(&scenario).unwrap();
//! let trajectories = world.run(10);
//! assert_eq!(trajectories[0].rows.len(), 11);
//! ```

pub mod angle;
pub mod clock;
pub mod control;
pub mod entity;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod scenario;
pub mod script;
pub mod sensing;
pub mod state;
pub mod trajectory;
pub mod world;

pub use error::{Error, Result};

/// World-frame vectors are right-handed: x forward at yaw 0, y left, z up.
pub type Vec3 = nalgebra::Vector3<f64>;
