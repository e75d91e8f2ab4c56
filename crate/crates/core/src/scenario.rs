//! Scenario documents.
//!
//! A scenario is a TOML file describing the arena, the drones with their
//! devices, static lights and per-drone command scripts:
//!
//! ```toml
//! format_version = 1
//! dt = 0.1
//! duration = 200          # ticks
//!
//! [[drones]]
//! id = "cf1"
//! position = [0.0, 0.0, 1.0]
//! yaw = 0.0
//! camera = {}             # default camera
//! rab = { range = 3.0 }
//!
//! [[lights]]
//! id = "beacon"
//! position = [2.0, 0.0, 1.0]
//! color = [255, 0, 0]
//!
//! [[script]]
//! drone = "cf1"
//! tick = 0
//! command = { kind = "velocity", linear = [0.0, 0.5, 0.0] }
//! until = { position = [0.0, 1.0, 1.0] }
//! ```
//!
//! Unknown keys are rejected. Every field except `format_version`,
//! `duration`, `drones[].id` and `drones[].position` has a default.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::DEFAULT_DT;
use crate::control::{ControllerLimits, Gains};
use crate::entity::EntityId;
use crate::error::{Error, Result};
use crate::script::ScriptEntry;
use crate::sensing::battery::{DEFAULT_COEFFICIENTS, DEFAULT_T_MAX};
use crate::sensing::{BatteryModel, CameraConfig, LedState, RabConfig, Rgb};
use crate::Vec3;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Number of ticks to simulate.
    pub duration: i64,
    #[serde(default)]
    pub arena: Arena,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Noise>,
    #[serde(default)]
    pub drones: Vec<DroneSpec>,
    #[serde(default)]
    pub lights: Vec<LightSpec>,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

/// Axis-aligned flight volume. Drones are clamped to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub min: Vec3,
    pub max: Vec3,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            min: Vec3::new(-1.5, -1.5, 0.0),
            max: Vec3::new(1.5, 1.5, 3.0),
        }
    }
}

impl Arena {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Optional Gaussian position noise added after each kinematics update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    pub seed: u64,
    /// Standard deviation per axis, metres.
    pub position_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneSpec {
    pub id: EntityId,
    pub position: Vec3,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "full_charge")]
    pub charge: f64,
    #[serde(default)]
    pub gains: Gains,
    #[serde(default)]
    pub limits: ControllerLimits,
    #[serde(default)]
    pub battery: BatterySpec,
    #[serde(default)]
    pub led: LedState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rab: Option<RabConfig>,
}

fn full_charge() -> f64 {
    1.0
}

impl DroneSpec {
    pub fn new(id: impl Into<EntityId>, position: Vec3) -> Self {
        Self {
            id: id.into(),
            position,
            yaw: 0.0,
            charge: 1.0,
            gains: Gains::default(),
            limits: ControllerLimits::default(),
            battery: BatterySpec::default(),
            led: LedState::default(),
            camera: None,
            rab: None,
        }
    }
}

/// Discharge curve `P(t) = c0 + c1·t + c2·t² + c3·t³` for `t` in seconds of
/// hover; `load_factor` scales how fast the drone moves along it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySpec {
    pub coefficients: [f64; 4],
    pub t_max: f64,
    pub load_factor: f64,
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self {
            coefficients: DEFAULT_COEFFICIENTS,
            t_max: DEFAULT_T_MAX,
            load_factor: 1.0,
        }
    }
}

impl BatterySpec {
    pub fn model(&self) -> Result<BatteryModel> {
        BatteryModel::new(self.coefficients, self.t_max, self.load_factor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSpec {
    /// Defaults to `light<index>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<EntityId>,
    pub position: Vec3,
    pub color: Rgb,
}

impl LightSpec {
    pub fn resolved_id(&self, index: usize) -> EntityId {
        self.id
            .clone()
            .unwrap_or_else(|| EntityId::new(format!("light{index}")))
    }
}

impl Scenario {
    pub fn new(duration: i64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            dt: DEFAULT_DT,
            duration,
            arena: Arena::default(),
            noise: None,
            drones: Vec::new(),
            lights: Vec::new(),
            script: Vec::new(),
        }
    }

    /// Parses and validates a scenario document.
    pub fn load(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|span| line_of(text, span.start)),
            message: e.message().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::load(&std::fs::read_to_string(path)?)
    }

    /// Serialises to TOML. `Scenario::load(&s.render()?)` gives back `s`.
    pub fn render(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Domain(e.to_string()))
    }

    /// Number of ticks as an unsigned count. Only meaningful after
    /// [`validate`](Self::validate).
    pub fn ticks(&self) -> u64 {
        self.duration.max(0) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::config(
                "format_version",
                format!(
                    "unsupported version {}, expected {FORMAT_VERSION}",
                    self.format_version
                ),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.duration < 0 {
            return Err(Error::config(
                "duration",
                format!("must be >= 0, got {}", self.duration),
            ));
        }
        let arena = &self.arena;
        if !(finite(&arena.min) && finite(&arena.max)) {
            return Err(Error::config("arena", "bounds must be finite"));
        }
        if (0..3).any(|i| arena.min[i] >= arena.max[i]) {
            return Err(Error::config(
                "arena",
                "min must be below max on every axis",
            ));
        }
        if let Some(noise) = &self.noise {
            if !(noise.position_sigma.is_finite() && noise.position_sigma >= 0.0) {
                return Err(Error::config("noise.position_sigma", "must be >= 0"));
            }
        }

        let mut ids = BTreeSet::new();
        for (i, drone) in self.drones.iter().enumerate() {
            self.validate_drone(i, drone)?;
            if !ids.insert(drone.id.clone()) {
                return Err(Error::config(
                    format!("drones[{i}].id"),
                    format!("duplicate id `{}`", drone.id),
                ));
            }
        }
        for (i, light) in self.lights.iter().enumerate() {
            if !finite(&light.position) {
                return Err(Error::config(
                    format!("lights[{i}].position"),
                    "must be finite",
                ));
            }
            let id = light.resolved_id(i);
            if id.as_str().is_empty() {
                return Err(Error::config(
                    format!("lights[{i}].id"),
                    "must not be empty",
                ));
            }
            if !ids.insert(id.clone()) {
                return Err(Error::config(
                    format!("lights[{i}].id"),
                    format!("duplicate id `{id}`"),
                ));
            }
        }

        let mut last_tick = BTreeMap::new();
        for (i, entry) in self.script.iter().enumerate() {
            let path = |field: &str| format!("script[{i}].{field}");
            if !self.drones.iter().any(|d| d.id == entry.drone) {
                return Err(Error::config(
                    path("drone"),
                    format!("unknown drone `{}`", entry.drone),
                ));
            }
            if let Some(&prev) = last_tick.get(&entry.drone) {
                if entry.tick < prev {
                    return Err(Error::config(
                        path("tick"),
                        format!(
                            "ticks must not decrease per drone ({} after {prev})",
                            entry.tick
                        ),
                    ));
                }
            }
            last_tick.insert(entry.drone.clone(), entry.tick);
            if let Some(command) = &entry.command {
                if !command.is_finite() {
                    return Err(Error::config(path("command"), "values must be finite"));
                }
            }
            if let Some(until) = &entry.until {
                if entry.command.is_none() {
                    return Err(Error::config(path("until"), "requires a command"));
                }
                if until.position.is_none() && until.yaw.is_none() {
                    return Err(Error::config(path("until"), "needs a position or a yaw"));
                }
                if until.position.is_some_and(|p| !finite(&p))
                    || until.yaw.is_some_and(|y| !y.is_finite())
                {
                    return Err(Error::config(path("until"), "targets must be finite"));
                }
                if !(until.tolerance > 0.0 && until.yaw_tolerance > 0.0) {
                    return Err(Error::config(path("until"), "tolerances must be > 0"));
                }
            }
        }
        Ok(())
    }

    fn validate_drone(&self, i: usize, drone: &DroneSpec) -> Result<()> {
        let path = |field: &str| format!("drones[{i}].{field}");
        if drone.id.as_str().is_empty() {
            return Err(Error::config(path("id"), "must not be empty"));
        }
        if !finite(&drone.position) {
            return Err(Error::config(path("position"), "must be finite"));
        }
        if !self.arena.contains(&drone.position) {
            return Err(Error::config(path("position"), "outside the arena"));
        }
        if !drone.yaw.is_finite() {
            return Err(Error::config(path("yaw"), "must be finite"));
        }
        if !(0.0..=1.0).contains(&drone.charge) {
            return Err(Error::config(
                path("charge"),
                format!("must be in [0, 1], got {}", drone.charge),
            ));
        }
        let gains = [
            ("gains.velocity", &drone.gains.velocity),
            ("gains.yaw_rate", &drone.gains.yaw_rate),
            ("gains.position", &drone.gains.position),
            ("gains.yaw", &drone.gains.yaw),
        ];
        for (field, g) in gains {
            g.validate(self.dt)
                .map_err(|m| Error::config(path(field), m))?;
        }
        drone.limits.validate().map_err(|(field, value)| {
            Error::config(
                path(&format!("limits.{field}")),
                format!("must be > 0, got {value}"),
            )
        })?;
        let model = drone
            .battery
            .model()
            .map_err(|e| Error::config(path("battery"), e.to_string()))?;
        if !model.is_normalized() {
            return Err(Error::config(
                path("battery.coefficients"),
                "P(0) must be 1",
            ));
        }
        if let Some(camera) = &drone.camera {
            camera
                .validate()
                .map_err(|m| Error::config(path("camera"), m))?;
        }
        if let Some(rab) = &drone.rab {
            rab.validate().map_err(|m| Error::config(path("rab"), m))?;
        }
        Ok(())
    }
}

fn finite(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}
