//! Built-in validation flights.
//!
//! Each experiment expands into one or more [`Variant`]s (for instance one
//! per commanded speed). A variant carries a complete [`Scenario`], so it
//! can be exported and replayed with the generic scenario runner, plus the
//! bookkeeping needed to evaluate the flight.

use crate::angle::yaw_error;
use crate::control::{Command, Frame};
use crate::error::{Error, Result};
use crate::scenario::{Arena, DroneSpec, LightSpec, Scenario};
use crate::script::{Arrival, ScriptEntry};
use crate::sensing::{CameraConfig, Detection, Rgb};
use crate::trajectory::{fixed6, Projection, Trajectory};
use crate::world::World;
use crate::Vec3;

pub const DEFAULT_SPEEDS: [f64; 3] = [0.25, 0.5, 1.0];
pub const DEFAULT_CHARGES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
/// Distances flown by `position-legs`, metres.
pub const POSITION_LEGS: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 25.0, 50.0];
/// Relative turns of `yaw-legs`, degrees.
pub const YAW_LEGS: [f64; 3] = [180.0, -135.0, 45.0];
/// `yaw-steps` turns at this many deg/s per unit of `--speed`, so the
/// default speeds give 45, 90 and 180 deg/s.
pub const YAW_RATE_PER_SPEED: f64 = 180.0;
/// Hold time after the nominal travel time of a leg, seconds.
pub const SETTLE: f64 = 5.0;
pub const TRUNCATED_SETTLE: f64 = 1.0;
/// Depth and lateral offset of the calibration lights, metres.
pub const CALIBRATION_DEPTH: f64 = 2.0;
pub const CALIBRATION_OFFSET: f64 = 0.9326;

const DRONE: &str = "cf1";
const DWELL_TICKS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Line2d,
    Line3d,
    AltitudeSteps,
    YawSteps,
    PositionLegs,
    YawLegs,
    Battery,
    CameraCalibration,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Line2d,
        Experiment::Line3d,
        Experiment::AltitudeSteps,
        Experiment::YawSteps,
        Experiment::PositionLegs,
        Experiment::YawLegs,
        Experiment::Battery,
        Experiment::CameraCalibration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Line2d => "line2d",
            Experiment::Line3d => "line3d",
            Experiment::AltitudeSteps => "altitude-steps",
            Experiment::YawSteps => "yaw-steps",
            Experiment::PositionLegs => "position-legs",
            Experiment::YawLegs => "yaw-legs",
            Experiment::Battery => "battery",
            Experiment::CameraCalibration => "camera-calibration",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    /// Plot views worth exporting for this experiment.
    pub fn projections(self) -> &'static [Projection] {
        match self {
            Experiment::Line2d => &[Projection::Xy, Projection::TimeSpeed],
            Experiment::Line3d => &[Projection::Xy, Projection::Xz, Projection::TimeSpeed],
            Experiment::AltitudeSteps => &[Projection::TimeZ, Projection::TimeSpeed],
            Experiment::YawSteps => &[Projection::TimeYaw, Projection::TimeYawRate],
            Experiment::PositionLegs => &[Projection::TimeX, Projection::TimeSpeed],
            Experiment::YawLegs => &[Projection::TimeYaw, Projection::TimeYawRate],
            Experiment::Battery => &[Projection::TimeCharge],
            Experiment::CameraCalibration => &[Projection::Xy],
        }
    }

    fn uses_speed(self) -> bool {
        matches!(
            self,
            Experiment::Line2d
                | Experiment::Line3d
                | Experiment::AltitudeSteps
                | Experiment::YawSteps
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Commanded speeds, m/s. `None` means [`DEFAULT_SPEEDS`].
    pub speeds: Option<Vec<f64>>,
    /// Initial charges for `battery`. `None` means [`DEFAULT_CHARGES`].
    pub initial_charges: Option<Vec<f64>>,
    /// Use [`TRUNCATED_SETTLE`] instead of [`SETTLE`] for the leg
    /// experiments.
    pub truncate_settle: bool,
}

#[derive(Debug, Clone)]
enum Plan {
    Speed { commanded: f64, home: Vec3 },
    YawRate { commanded: f64 },
    Legs { desired: Vec<f64>, ends: Vec<u64> },
    YawLegs { desired: Vec<f64>, ends: Vec<u64> },
    Battery { initial: f64 },
    Camera,
}

#[derive(Debug, Clone)]
pub struct Variant {
    pub experiment: Experiment,
    /// Short name such as `speed-0.25`; `default` for single-variant
    /// experiments.
    pub label: String,
    pub scenario: Scenario,
    plan: Plan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub desired: f64,
    pub measured: f64,
    /// `|desired - measured|`.
    pub error: f64,
    /// Peak linear speed (m/s) or yaw rate (deg/s) during the leg.
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationHit {
    pub light: String,
    pub detection: Option<Detection>,
    /// Whether the light is still detected after moving it 1 m sideways.
    pub visible_when_moved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Findings {
    Speed {
        commanded: f64,
        peak: f64,
        final_error: f64,
    },
    YawRate {
        commanded: f64,
        peak: f64,
    },
    Legs(Vec<Leg>),
    YawLegs(Vec<Leg>),
    Battery {
        initial: f64,
        time_to_empty: Option<f64>,
        expected: f64,
        trace_mse: f64,
    },
    Camera {
        total: usize,
        hits: Vec<CalibrationHit>,
    },
}

impl Findings {
    /// `key=value` report lines.
    pub fn lines(&self) -> Vec<String> {
        match self {
            Findings::Speed {
                commanded,
                peak,
                final_error,
            } => vec![format!(
                "commanded_speed={} peak_speed={} error={} final_position_error={}",
                fixed6(*commanded),
                fixed6(*peak),
                fixed6((commanded - peak).abs()),
                fixed6(*final_error)
            )],
            Findings::YawRate { commanded, peak } => vec![format!(
                "commanded_yaw_rate={} peak_yaw_rate={} error={}",
                fixed6(*commanded),
                fixed6(*peak),
                fixed6((commanded - peak).abs())
            )],
            Findings::Legs(legs) => legs
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    format!(
                        "leg={} desired_m={} measured_m={} error_m={} error_pct={} peak_speed={}",
                        i + 1,
                        fixed6(l.desired),
                        fixed6(l.measured),
                        fixed6(l.error),
                        fixed6(100.0 * l.error / l.desired.abs()),
                        fixed6(l.peak)
                    )
                })
                .collect(),
            Findings::YawLegs(legs) => legs
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    format!(
                        "leg={} desired_deg={} measured_deg={} error_deg={} peak_yaw_rate={}",
                        i + 1,
                        fixed6(l.desired),
                        fixed6(l.measured),
                        fixed6(l.error),
                        fixed6(l.peak)
                    )
                })
                .collect(),
            Findings::Battery {
                initial,
                time_to_empty,
                expected,
                trace_mse,
            } => vec![format!(
                "initial_charge={} time_to_empty_s={} expected_s={} trace_mse={:.3e}",
                fixed6(*initial),
                time_to_empty.map_or_else(|| "never".to_string(), fixed6),
                fixed6(*expected),
                trace_mse
            )],
            Findings::Camera { total, hits } => {
                let mut lines = vec![format!("detections={total}")];
                for h in hits {
                    let pixel = h
                        .detection
                        .as_ref()
                        .map_or_else(|| "none".to_string(), |d| format!("u={} v={}", d.u, d.v));
                    lines.push(format!(
                        "light={} {pixel} visible_when_moved={}",
                        h.light, h.visible_when_moved
                    ));
                }
                lines
            }
        }
    }
}

pub struct Outcome {
    pub trajectories: Vec<Trajectory>,
    pub findings: Findings,
}

/// Expands `experiment` into its variants.
pub fn variants(experiment: Experiment, options: &Options) -> Result<Vec<Variant>> {
    let speeds = options
        .speeds
        .clone()
        .unwrap_or_else(|| DEFAULT_SPEEDS.to_vec());
    if experiment.uses_speed() {
        if speeds.is_empty() {
            return Err(Error::Domain("at least one speed is required".into()));
        }
        if let Some(bad) = speeds
            .iter()
            .find(|s| !(s.is_finite() && **s > 0.0 && **s <= 10.0))
        {
            return Err(Error::Domain(format!(
                "speed must be in (0, 10] m/s, got {bad}"
            )));
        }
    }
    let settle = if options.truncate_settle {
        TRUNCATED_SETTLE
    } else {
        SETTLE
    };
    let per_speed = |build: fn(f64) -> (Scenario, Plan)| -> Vec<Variant> {
        speeds
            .iter()
            .map(|&s| {
                let (scenario, plan) = build(s);
                Variant {
                    experiment,
                    label: format!("speed-{s:.2}"),
                    scenario,
                    plan,
                }
            })
            .collect()
    };
    let single = |(scenario, plan): (Scenario, Plan)| {
        vec![Variant {
            experiment,
            label: "default".into(),
            scenario,
            plan,
        }]
    };
    Ok(match experiment {
        Experiment::Line2d => per_speed(line2d),
        Experiment::Line3d => per_speed(line3d),
        Experiment::AltitudeSteps => per_speed(altitude_steps),
        Experiment::YawSteps => per_speed(yaw_steps),
        Experiment::PositionLegs => single(position_legs(settle)),
        Experiment::YawLegs => single(yaw_legs(settle)),
        Experiment::CameraCalibration => single(camera_calibration()),
        Experiment::Battery => {
            let charges = options
                .initial_charges
                .clone()
                .unwrap_or_else(|| DEFAULT_CHARGES.to_vec());
            if charges.is_empty() {
                return Err(Error::Domain(
                    "at least one initial charge is required".into(),
                ));
            }
            charges
                .iter()
                .map(|&c| {
                    if !(0.0..=1.0).contains(&c) {
                        return Err(Error::Domain(format!(
                            "initial charge must be in [0, 1], got {c}"
                        )));
                    }
                    let (scenario, plan) = battery(c)?;
                    Ok(Variant {
                        experiment,
                        label: format!("charge-{c:.2}"),
                        scenario,
                        plan,
                    })
                })
                .collect::<Result<_>>()?
        }
    })
}

fn seconds_to_ticks(seconds: f64) -> u64 {
    (seconds / crate::clock::DEFAULT_DT).round() as u64
}

fn velocity_leg(velocity: Vec3, yaw_rate: f64, until: Arrival) -> ScriptEntry {
    ScriptEntry::at(
        DRONE,
        0,
        Command::velocity(Frame::World, velocity, yaw_rate),
    )
    .until(until)
    .dwell(DWELL_TICKS)
}

fn single_drone(duration: u64, start: Vec3, script: Vec<ScriptEntry>) -> Scenario {
    let mut scenario = Scenario::new(duration as i64);
    scenario.drones.push(DroneSpec::new(DRONE, start));
    scenario.script = script;
    scenario
}

/// Velocity legs visiting `waypoints` in order at `speed` per axis.
fn waypoint_flight(start: Vec3, waypoints: &[Vec3], speed: f64) -> Scenario {
    let mut script = Vec::new();
    let mut from = start;
    let mut seconds = 2.0;
    for &to in waypoints {
        let delta = to - from;
        let velocity = delta.map(|c| speed * c.signum() * f64::from(c.abs() > 1e-12));
        script.push(velocity_leg(velocity, 0.0, Arrival::at_position(to)));
        seconds += delta.amax() / speed + 1.0 + DWELL_TICKS as f64 * crate::clock::DEFAULT_DT;
        from = to;
    }
    single_drone(seconds_to_ticks(seconds), start, script)
}

fn line2d(speed: f64) -> (Scenario, Plan) {
    let home = Vec3::new(0.0, 0.0, 1.0);
    let waypoints = [
        Vec3::new(0.0, 1.0, 1.0),
        home,
        Vec3::new(1.0, 0.0, 1.0),
        home,
    ];
    let scenario = waypoint_flight(home, &waypoints, speed);
    (
        scenario,
        Plan::Speed {
            commanded: speed,
            home,
        },
    )
}

fn line3d(speed: f64) -> (Scenario, Plan) {
    let start = Vec3::new(-0.5, -0.5, 0.5);
    let scenario = waypoint_flight(start, &[Vec3::new(0.5, 0.5, 1.5), start], speed);
    (
        scenario,
        Plan::Speed {
            commanded: speed * 3f64.sqrt(),
            home: start,
        },
    )
}

fn altitude_steps(speed: f64) -> (Scenario, Plan) {
    let start = Vec3::new(0.0, 0.0, 0.5);
    let levels = [1.0, 1.5, 1.0, 0.5];
    let waypoints: Vec<Vec3> = levels.iter().map(|&z| Vec3::new(0.0, 0.0, z)).collect();
    let scenario = waypoint_flight(start, &waypoints, speed);
    (
        scenario,
        Plan::Speed {
            commanded: speed,
            home: start,
        },
    )
}

fn yaw_steps(speed: f64) -> (Scenario, Plan) {
    let rate = speed * YAW_RATE_PER_SPEED;
    let start = Vec3::new(0.0, 0.0, 1.0);
    let script = vec![
        velocity_leg(Vec3::zeros(), rate, Arrival::at_yaw(180.0)),
        velocity_leg(Vec3::zeros(), -rate, Arrival::at_yaw(0.0)),
    ];
    let seconds = 2.0 * (180.0 / rate + 1.0 + DWELL_TICKS as f64 * crate::clock::DEFAULT_DT) + 2.0;
    let scenario = single_drone(seconds_to_ticks(seconds), start, script);
    (scenario, Plan::YawRate { commanded: rate })
}

fn timed_legs(legs: impl Iterator<Item = (Command, f64)>) -> (Vec<ScriptEntry>, Vec<u64>) {
    let mut script = Vec::new();
    let mut ends = Vec::new();
    let mut tick = 0;
    for (command, seconds) in legs {
        script.push(ScriptEntry::at(DRONE, tick, command));
        tick += seconds_to_ticks(seconds);
        ends.push(tick);
    }
    (script, ends)
}

fn position_legs(settle: f64) -> (Scenario, Plan) {
    let start = Vec3::new(0.0, 0.0, 1.0);
    let mut x = 0.0;
    let legs = POSITION_LEGS.iter().map(|&d| {
        x += d;
        (
            Command::position(Frame::World, Vec3::new(x, 0.0, 1.0), 0.0),
            d / 10.0 + settle,
        )
    });
    let (script, ends) = timed_legs(legs);
    let mut scenario = single_drone(*ends.last().expect("legs are non-empty"), start, script);
    let total: f64 = POSITION_LEGS.iter().sum();
    scenario.arena = Arena {
        min: Vec3::new(-2.0, -2.0, 0.0),
        max: Vec3::new(total + 5.0, 2.0, 3.0),
    };
    (
        scenario,
        Plan::Legs {
            desired: POSITION_LEGS.to_vec(),
            ends,
        },
    )
}

fn yaw_legs(settle: f64) -> (Scenario, Plan) {
    let start = Vec3::new(0.0, 0.0, 1.0);
    let legs = YAW_LEGS.iter().map(|&a| {
        (
            Command::position(Frame::Body, Vec3::zeros(), a),
            a.abs() / 90.0 + settle,
        )
    });
    let (script, ends) = timed_legs(legs);
    let scenario = single_drone(*ends.last().expect("legs are non-empty"), start, script);
    (
        scenario,
        Plan::YawLegs {
            desired: YAW_LEGS.to_vec(),
            ends,
        },
    )
}

fn battery(initial: f64) -> Result<(Scenario, Plan)> {
    let start = Vec3::new(0.0, 0.0, 1.0);
    let mut scenario = single_drone(0, start, Vec::new());
    scenario.drones[0].charge = initial;
    let model = scenario.drones[0].battery.model()?;
    let seconds = model.time_to_empty(initial)?;
    scenario.duration = (seconds / scenario.dt).ceil() as i64 + 10;
    Ok((scenario, Plan::Battery { initial }))
}

/// The four calibration lights: red left, green top, blue right, white
/// bottom, as seen from the camera.
pub fn calibration_lights(camera_height: f64) -> Vec<LightSpec> {
    let d = CALIBRATION_DEPTH;
    let o = CALIBRATION_OFFSET;
    let h = camera_height;
    [
        ("red", Vec3::new(d, o, h), Rgb::RED),
        ("green", Vec3::new(d, 0.0, h + o), Rgb::GREEN),
        ("blue", Vec3::new(d, -o, h), Rgb::BLUE),
        ("white", Vec3::new(d, 0.0, h - o), Rgb::WHITE),
    ]
    .into_iter()
    .map(|(id, position, color)| LightSpec {
        id: Some(id.into()),
        position,
        color,
    })
    .collect()
}

fn camera_calibration() -> (Scenario, Plan) {
    let height = 1.5;
    let mut scenario = single_drone(1, Vec3::new(0.0, 0.0, height), Vec::new());
    scenario.drones[0].camera = Some(CameraConfig::default());
    scenario.lights = calibration_lights(height);
    (scenario, Plan::Camera)
}

impl Variant {
    pub fn run(&self) -> Result<Outcome> {
        let mut world = World::new(&self.scenario)?;
        let trajectories = world.run(self.scenario.ticks());
        let findings = self.evaluate(&trajectories)?;
        Ok(Outcome {
            trajectories,
            findings,
        })
    }

    fn evaluate(&self, trajectories: &[Trajectory]) -> Result<Findings> {
        let rows = &trajectories[0].rows;
        Ok(match &self.plan {
            Plan::Speed { commanded, home } => {
                let summary = trajectories[0].summarize(Some(home));
                Findings::Speed {
                    commanded: *commanded,
                    peak: summary.peak_speed,
                    final_error: summary.final_position_error.unwrap_or(0.0),
                }
            }
            Plan::YawRate { commanded } => Findings::YawRate {
                commanded: *commanded,
                peak: trajectories[0].summarize(None).peak_yaw_rate,
            },
            Plan::Legs { desired, ends } => {
                let mut legs = Vec::new();
                let mut begin = 0usize;
                for (&d, &end) in desired.iter().zip(ends) {
                    let end = end as usize;
                    let measured = rows[end].position.x - rows[begin].position.x;
                    let peak = rows[begin..=end]
                        .iter()
                        .map(|r| r.velocity.norm())
                        .fold(0.0, f64::max);
                    legs.push(Leg {
                        desired: d,
                        measured,
                        error: (d - measured).abs(),
                        peak,
                    });
                    begin = end;
                }
                Findings::Legs(legs)
            }
            Plan::YawLegs { desired, ends } => {
                let mut legs = Vec::new();
                let mut begin = 0usize;
                for (&d, &end) in desired.iter().zip(ends) {
                    let end = end as usize;
                    let window = &rows[begin..=end];
                    let measured: f64 = window
                        .windows(2)
                        .map(|w| yaw_error(w[1].yaw, w[0].yaw))
                        .sum();
                    let peak = window.iter().map(|r| r.yaw_rate.abs()).fold(0.0, f64::max);
                    legs.push(Leg {
                        desired: d,
                        measured,
                        error: (d - measured).abs(),
                        peak,
                    });
                    begin = end;
                }
                Findings::YawLegs(legs)
            }
            Plan::Battery { initial } => {
                let spec = &self.scenario.drones[0].battery;
                let model = spec.model()?;
                let dt = self.scenario.dt;
                let t0 = model.time_at_charge(*initial);
                let direct: Vec<f64> = (0..rows.len())
                    .map(|k| {
                        let t = t0 + k as f64 * dt * model.load_factor();
                        if k == 0 {
                            *initial
                        } else if t >= model.t_max() {
                            0.0
                        } else {
                            model.eval(t)
                        }
                    })
                    .collect();
                let simulated: Vec<f64> = rows.iter().map(|r| r.charge).collect();
                Findings::Battery {
                    initial: *initial,
                    time_to_empty: trajectories[0].summarize(None).time_to_empty,
                    expected: model.time_to_empty(*initial)?,
                    trace_mse: crate::metrics::mse(&simulated, &direct)?,
                }
            }
            Plan::Camera => {
                let world = World::new(&self.scenario)?;
                let seen = world.camera_capture(DRONE)?;
                let mut hits = Vec::new();
                for (i, light) in self.scenario.lights.iter().enumerate() {
                    let id = light.resolved_id(i);
                    let detection = seen.iter().find(|d| d.source == id).cloned();
                    let mut moved = self.scenario.clone();
                    moved.lights[i].position.y = 1.0;
                    moved.lights[i].position.z = self.scenario.drones[0].position.z;
                    let visible_when_moved = World::new(&moved)?
                        .camera_capture(DRONE)?
                        .iter()
                        .any(|d| d.source == id);
                    hits.push(CalibrationHit {
                        light: id.to_string(),
                        detection,
                        visible_when_moved,
                    });
                }
                Findings::Camera {
                    total: seen.len(),
                    hits,
                }
            }
        })
    }
}
