//! Flight control: velocity and position PD loops, saturation, and the
//! kinematic integrator.
//!
//! The drone is a kinematic point mass with a yaw angle. A velocity command
//! is tracked directly by the velocity loop; a position command is turned
//! into a velocity setpoint by the position loop first, so both modes share
//! the same acceleration limits.
//!
//! All PD loops use the error difference per tick as their derivative term,
//! `kd · (e_k − e_{k−1}) / dt`. The first tick after a loop is (re)armed uses
//! `e_{k−1} = e_k`, so a fresh setpoint causes no derivative kick.

use serde::{Deserialize, Serialize};

use crate::angle::{wrap_degrees, yaw_error};
use crate::state::DroneState;
use crate::Vec3;

/// Proportional and derivative gains of one loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    /// 1/s.
    pub kp: f64,
    /// Dimensionless; scales the per-tick error difference divided by dt.
    pub kd: f64,
}

impl PdGains {
    pub const fn new(kp: f64, kd: f64) -> Self {
        Self { kp, kd }
    }

    /// Checks `kp > 0`, `kd ≥ 0` and that the closed discrete loop
    /// `e[k+1] = (1 − kp·dt − kd)·e[k] + kd·e[k−1]` is stable at `dt`.
    pub fn validate(&self, dt: f64) -> Result<(), String> {
        if !(self.kp.is_finite() && self.kp > 0.0) {
            return Err(format!("kp must be > 0, got {}", self.kp));
        }
        if !(self.kd.is_finite() && self.kd >= 0.0) {
            return Err(format!("kd must be >= 0, got {}", self.kd));
        }
        // Jury conditions for z² − (1 − kp·dt − kd)·z − kd.
        if self.kd >= 1.0 || self.kp * dt + 2.0 * self.kd >= 2.0 {
            return Err(format!(
                "loop with kp={} kd={} is unstable at dt={dt}",
                self.kp, self.kd
            ));
        }
        Ok(())
    }
}

/// Gains for the four loops of one drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    /// Linear velocity loop. `kp = 10` with `kd = 0` is deadbeat at the default
    /// 10 Hz tick: an unsaturated velocity error is removed in one tick.
    pub velocity: PdGains,
    /// Yaw-rate loop. Deliberately softer than the linear loop, so a fast
    /// yaw command approaches its rate asymptotically.
    pub yaw_rate: PdGains,
    pub position: PdGains,
    pub yaw: PdGains,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            velocity: PdGains::new(10.0, 0.0),
            yaw_rate: PdGains::new(5.0, 0.1),
            position: PdGains::new(1.5, 0.1),
            yaw: PdGains::new(1.5, 0.1),
        }
    }
}

/// Saturation limits applied by the controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerLimits {
    /// m/s, applied to every velocity setpoint and to the resulting velocity.
    pub max_linear_speed: f64,
    /// deg/s, position mode only. In velocity mode the commanded rate is the
    /// only limit.
    pub max_yaw_rate: f64,
    /// m/s², norm of the commanded acceleration.
    pub max_linear_accel: f64,
    /// deg/s².
    pub max_yaw_accel: f64,
}

impl Default for ControllerLimits {
    fn default() -> Self {
        Self {
            max_linear_speed: 10.0,
            max_yaw_rate: 90.0,
            max_linear_accel: 8.0,
            max_yaw_accel: 720.0,
        }
    }
}

impl ControllerLimits {
    pub fn validate(&self) -> Result<(), (&'static str, f64)> {
        for (name, value) in [
            ("max_linear_speed", self.max_linear_speed),
            ("max_yaw_rate", self.max_yaw_rate),
            ("max_linear_accel", self.max_linear_accel),
            ("max_yaw_accel", self.max_yaw_accel),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err((name, value));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Velocity,
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Relative to the drone: rotated by its yaw, and for position commands
    /// offset from its current pose.
    Body,
    #[default]
    World,
}

/// A setpoint for one drone.
///
/// For `Velocity`, `linear` is m/s and `angular` deg/s. For `Position`,
/// `linear` is metres and `angular` a target yaw in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Command {
    pub kind: CommandKind,
    #[serde(default)]
    pub frame: Frame,
    #[serde(default = "Vec3::zeros")]
    pub linear: Vec3,
    #[serde(default)]
    pub angular: f64,
}

impl Command {
    pub fn velocity(frame: Frame, linear: Vec3, yaw_rate: f64) -> Self {
        Self {
            kind: CommandKind::Velocity,
            frame,
            linear,
            angular: yaw_rate,
        }
    }

    pub fn position(frame: Frame, linear: Vec3, yaw: f64) -> Self {
        Self {
            kind: CommandKind::Position,
            frame,
            linear,
            angular: yaw,
        }
    }

    /// Zero world velocity: hover in place.
    pub fn hold() -> Self {
        Self::velocity(Frame::World, Vec3::zeros(), 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().all(|c| c.is_finite()) && self.angular.is_finite()
    }

    /// Pins a body-relative position command to the pose it was issued from,
    /// producing the equivalent world-frame command. Other commands are
    /// returned unchanged.
    pub fn anchored(self, pose: &DroneState) -> Self {
        match (self.kind, self.frame) {
            (CommandKind::Position, Frame::Body) => Self::position(
                Frame::World,
                pose.position + body_to_world(&self.linear, pose.yaw),
                wrap_degrees(pose.yaw + self.angular),
            ),
            _ => self,
        }
    }
}

/// Previous-tick errors of the PD loops of one drone.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LoopMemory {
    pub velocity_error: Option<Vec3>,
    pub yaw_rate_error: Option<f64>,
    pub position_error: Option<Vec3>,
    pub yaw_error: Option<f64>,
}

impl LoopMemory {
    /// Re-arms the position loops; called when a new target is activated.
    pub fn reset_position(&mut self) {
        self.position_error = None;
        self.yaw_error = None;
    }
}

/// World-frame velocity and yaw-rate setpoint for the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySetpoint {
    pub linear: Vec3,
    pub yaw_rate: f64,
}

/// Rotates a body-frame vector into the world frame about the vertical axis.
pub fn body_to_world(v: &Vec3, yaw_deg: f64) -> Vec3 {
    let (sin, cos) = yaw_deg.to_radians().sin_cos();
    Vec3::new(cos * v.x - sin * v.y, sin * v.x + cos * v.y, v.z)
}

/// Inverse of [`body_to_world`].
pub fn world_to_body(v: &Vec3, yaw_deg: f64) -> Vec3 {
    body_to_world(v, -yaw_deg)
}

/// Scales `v` down to magnitude `vmax` if it is longer; direction is kept.
pub fn saturate(v: &Vec3, vmax: f64) -> Vec3 {
    let norm = v.norm();
    if norm <= vmax {
        *v
    } else {
        v * (vmax / norm)
    }
}

fn clamp_abs(x: f64, limit: f64) -> f64 {
    x.clamp(-limit, limit)
}

fn pd_vec(gains: &PdGains, error: Vec3, previous: &mut Option<Vec3>, dt: f64) -> Vec3 {
    let prev = previous.replace(error).unwrap_or(error);
    error * gains.kp + (error - prev) * (gains.kd / dt)
}

fn pd_scalar(gains: &PdGains, error: f64, previous: &mut Option<f64>, dt: f64) -> f64 {
    let prev = previous.replace(error).unwrap_or(error);
    gains.kp * error + gains.kd * (error - prev) / dt
}

/// Inner loop: drives velocity and yaw rate towards a world-frame setpoint.
///
/// The linear setpoint is saturated at `max_linear_speed`, the PD output is
/// clamped to the acceleration limits, and the new velocity is saturated
/// again. `yaw_rate_cap`, when given, bounds both the yaw-rate setpoint and
/// the resulting yaw rate.
pub fn track_velocity(
    state: &DroneState,
    setpoint: &VelocitySetpoint,
    yaw_rate_cap: Option<f64>,
    memory: &mut LoopMemory,
    gains: &Gains,
    limits: &ControllerLimits,
    dt: f64,
) -> (Vec3, f64) {
    let desired = saturate(&setpoint.linear, limits.max_linear_speed);
    let accel = pd_vec(
        &gains.velocity,
        desired - state.velocity,
        &mut memory.velocity_error,
        dt,
    );
    let accel = saturate(&accel, limits.max_linear_accel);
    let velocity = saturate(&(state.velocity + accel * dt), limits.max_linear_speed);

    let desired_rate = match yaw_rate_cap {
        Some(cap) => clamp_abs(setpoint.yaw_rate, cap),
        None => setpoint.yaw_rate,
    };
    let yaw_accel = pd_scalar(
        &gains.yaw_rate,
        desired_rate - state.yaw_rate,
        &mut memory.yaw_rate_error,
        dt,
    );
    let yaw_accel = clamp_abs(yaw_accel, limits.max_yaw_accel);
    let mut yaw_rate = state.yaw_rate + yaw_accel * dt;
    if let Some(cap) = yaw_rate_cap {
        yaw_rate = clamp_abs(yaw_rate, cap);
    }
    (velocity, yaw_rate)
}

/// One tick of the velocity controller for a velocity command.
///
/// Body-frame commands are rotated by the current yaw every tick.
pub fn velocity_control_step(
    state: &DroneState,
    cmd: &Command,
    memory: &mut LoopMemory,
    gains: &Gains,
    limits: &ControllerLimits,
    dt: f64,
) -> (Vec3, f64) {
    debug_assert_eq!(cmd.kind, CommandKind::Velocity);
    let linear = match cmd.frame {
        Frame::Body => body_to_world(&cmd.linear, state.yaw),
        Frame::World => cmd.linear,
    };
    let setpoint = VelocitySetpoint {
        linear,
        yaw_rate: cmd.angular,
    };
    track_velocity(state, &setpoint, None, memory, gains, limits, dt)
}

/// One tick of the position controller: turns a position/yaw target into a
/// velocity setpoint for [`track_velocity`].
///
/// A body-frame command is interpreted relative to `state`; callers that
/// need a fixed target across ticks should [`Command::anchored`] it once.
pub fn position_control_step(
    state: &DroneState,
    cmd: &Command,
    memory: &mut LoopMemory,
    gains: &Gains,
    limits: &ControllerLimits,
    dt: f64,
) -> VelocitySetpoint {
    debug_assert_eq!(cmd.kind, CommandKind::Position);
    let target = cmd.anchored(state);
    let error = target.linear - state.position;
    let raw = pd_vec(&gains.position, error, &mut memory.position_error, dt);
    let linear = saturate(&raw, limits.max_linear_speed);

    let yaw_err = yaw_error(target.angular, state.yaw);
    let raw_rate = pd_scalar(&gains.yaw, yaw_err, &mut memory.yaw_error, dt);
    VelocitySetpoint {
        linear,
        yaw_rate: clamp_abs(raw_rate, limits.max_yaw_rate),
    }
}

/// Full controller tick for either command kind: returns the new velocity
/// and yaw rate.
pub fn control_step(
    state: &DroneState,
    cmd: &Command,
    memory: &mut LoopMemory,
    gains: &Gains,
    limits: &ControllerLimits,
    dt: f64,
) -> (Vec3, f64) {
    match cmd.kind {
        CommandKind::Velocity => velocity_control_step(state, cmd, memory, gains, limits, dt),
        CommandKind::Position => {
            let setpoint = position_control_step(state, cmd, memory, gains, limits, dt);
            track_velocity(
                state,
                &setpoint,
                Some(limits.max_yaw_rate),
                memory,
                gains,
                limits,
                dt,
            )
        }
    }
}

/// Semi-implicit Euler: the new velocity moves the drone this tick.
///
/// Altitude is floored at the ground (z = 0); a drone pushed into the ground
/// loses its downward velocity.
pub fn integrate(state: &DroneState, velocity: Vec3, yaw_rate: f64, dt: f64) -> DroneState {
    let mut next = *state;
    next.velocity = velocity;
    next.yaw_rate = yaw_rate;
    next.position = state.position + velocity * dt;
    next.yaw = wrap_degrees(state.yaw + yaw_rate * dt);
    if next.position.z < 0.0 {
        next.position.z = 0.0;
        next.velocity.z = next.velocity.z.max(0.0);
    }
    next
}
