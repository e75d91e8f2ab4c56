//! Per-drone command scripts.
//!
//! A script is an ordered list of entries. An entry becomes due at its
//! `tick` and is activated as soon as the previous entry is finished:
//! entries without an `until` condition finish immediately (the next due
//! entry supersedes them), entries with one finish when the condition is
//! met, followed by an optional dwell. Between a finished entry and the next
//! activation the drone holds position (zero world velocity).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::angle::yaw_error;
use crate::control::{body_to_world, Command, CommandKind, Frame, LoopMemory};
use crate::entity::EntityId;
use crate::sensing::LedState;
use crate::state::DroneState;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub drone: EntityId,
    /// Earliest tick at which this entry may activate.
    #[serde(default)]
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<Arrival>,
    /// Ticks to hold after `until` is met before the next entry may start.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dwell: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub led: Option<LedState>,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl ScriptEntry {
    pub fn at(drone: impl Into<EntityId>, tick: u64, command: Command) -> Self {
        Self {
            drone: drone.into(),
            tick,
            command: Some(command),
            until: None,
            dwell: 0,
            led: None,
        }
    }

    pub fn until(mut self, arrival: Arrival) -> Self {
        self.until = Some(arrival);
        self
    }

    pub fn dwell(mut self, ticks: u64) -> Self {
        self.dwell = ticks;
        self
    }
}

/// Completion condition of a script entry.
///
/// With a velocity command the condition also counts as met once the drone
/// has passed the target (moved beyond the plane through the target normal
/// to the commanded velocity, or crossed the target yaw), so a fast drone
/// cannot skip over a small tolerance window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrival {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
    /// Metres.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Degrees.
    #[serde(default = "default_yaw_tolerance")]
    pub yaw_tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_yaw_tolerance() -> f64 {
    1.0
}

impl Arrival {
    pub fn at_position(position: Vec3) -> Self {
        Self {
            position: Some(position),
            yaw: None,
            tolerance: default_tolerance(),
            yaw_tolerance: default_yaw_tolerance(),
        }
    }

    pub fn at_yaw(yaw: f64) -> Self {
        Self {
            position: None,
            yaw: Some(yaw),
            tolerance: default_tolerance(),
            yaw_tolerance: default_yaw_tolerance(),
        }
    }

    pub fn reached(&self, state: &DroneState, command: &Command) -> bool {
        let moving = command.kind == CommandKind::Velocity;
        let position_ok = self.position.is_none_or(|target| {
            let remaining = target - state.position;
            if remaining.norm() <= self.tolerance {
                return true;
            }
            let heading = match command.frame {
                Frame::Body => body_to_world(&command.linear, state.yaw),
                Frame::World => command.linear,
            };
            moving && heading.norm() > 0.0 && heading.dot(&remaining) <= 0.0
        });
        let yaw_ok = self.yaw.is_none_or(|target| {
            let err = yaw_error(target, state.yaw);
            err.abs() <= self.yaw_tolerance
                || (moving && err.abs() < 90.0 && err * command.angular < 0.0)
        });
        position_ok && yaw_ok
    }
}

/// Runtime state of one drone's script.
#[derive(Debug, Clone)]
pub struct Pilot {
    entries: Arc<[ScriptEntry]>,
    next: usize,
    active: Command,
    until: Option<Arrival>,
    dwell: u64,
    hold_until: Option<u64>,
}

/// What the pilot wants changed this tick besides the command.
#[derive(Debug, Default)]
pub struct PilotEffects {
    pub led: Option<LedState>,
}

impl Pilot {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries: entries.into(),
            next: 0,
            active: Command::hold(),
            until: None,
            dwell: 0,
            hold_until: None,
        }
    }

    pub fn command(&self) -> &Command {
        &self.active
    }

    /// Replaces the active command directly, dropping any pending condition.
    pub fn override_command(
        &mut self,
        command: Command,
        state: &DroneState,
        memory: &mut LoopMemory,
    ) {
        self.active = command.anchored(state);
        self.until = None;
        self.hold_until = None;
        memory.reset_position();
    }

    pub fn is_finished(&self) -> bool {
        self.next >= self.entries.len() && self.until.is_none() && self.hold_until.is_none()
    }

    /// Applies completions and due entries for `tick`.
    pub fn advance(
        &mut self,
        tick: u64,
        state: &DroneState,
        memory: &mut LoopMemory,
    ) -> PilotEffects {
        let mut effects = PilotEffects::default();
        loop {
            if let Some(until) = self.until {
                if !until.reached(state, &self.active) {
                    break;
                }
                self.until = None;
                self.active = Command::hold();
                memory.reset_position();
                if self.dwell > 0 {
                    self.hold_until = Some(tick + self.dwell);
                }
            }
            if let Some(end) = self.hold_until {
                if tick < end {
                    break;
                }
                self.hold_until = None;
            }
            let Some(entry) = self.entries.get(self.next) else {
                break;
            };
            if entry.tick > tick {
                break;
            }
            self.next += 1;
            if let Some(command) = entry.command {
                self.active = command.anchored(state);
                memory.reset_position();
            }
            self.until = entry.until;
            self.dwell = entry.dwell;
            if entry.led.is_some() {
                effects.led = entry.led;
            }
        }
        effects
    }
}
