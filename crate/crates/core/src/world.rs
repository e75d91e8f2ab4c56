//! The simulated world and its fixed-order tick.
//!
//! Each [`World::step`] runs six phases over all drones in scenario order:
//!
//! 1. controllers: scripts advance, PD loops produce new velocities;
//! 2. kinematics: integration, optional noise, arena clamping;
//! 3. battery: discharge, grounding of empty drones;
//! 4. media: staged LED changes become visible, queued RAB messages are
//!    delivered to the inboxes read after this step;
//! 5. sensors: cameras sample lights and lit LEDs;
//! 6. the clock advances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::clock::SimClock;
use crate::control::{control_step, Command, ControllerLimits, Gains, LoopMemory};
use crate::entity::EntityId;
use crate::error::{Error, Result};
use crate::scenario::{Arena, Scenario};
use crate::script::{Pilot, ScriptEntry};
use crate::sensing::camera::project_light;
use crate::sensing::rab::measure;
use crate::sensing::{
    BatteryModel, CameraConfig, CameraPose, Detection, LedState, Light, RabConfig, RabReading, Rgb,
};
use crate::state::DroneState;
use crate::trajectory::{Trajectory, TrajectoryRow};
use crate::Vec3;

#[derive(Debug, Clone)]
struct Drone {
    id: EntityId,
    state: DroneState,
    gains: Gains,
    limits: ControllerLimits,
    battery: BatteryModel,
    camera: Option<CameraConfig>,
    rab: Option<RabConfig>,
    memory: LoopMemory,
    pilot: Pilot,
    led: LedState,
    staged_led: Option<LedState>,
    outbox: Vec<Vec<u8>>,
    inbox: Vec<RabReading>,
    detections: Vec<Detection>,
}

#[derive(Debug, Clone)]
struct NoiseSource {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

#[derive(Debug, Clone)]
pub struct World {
    clock: SimClock,
    arena: Arena,
    drones: Vec<Drone>,
    lights: Vec<Light>,
    noise: Option<NoiseSource>,
}

impl World {
    /// Builds the world at tick 0 with every drone at its initial pose.
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let clock = SimClock::new(scenario.dt).ok_or_else(|| Error::config("dt", "must be > 0"))?;
        let mut drones = Vec::with_capacity(scenario.drones.len());
        for spec in &scenario.drones {
            let script: Vec<ScriptEntry> = scenario
                .script
                .iter()
                .filter(|e| e.drone == spec.id)
                .cloned()
                .collect();
            drones.push(Drone {
                id: spec.id.clone(),
                state: DroneState::at_rest(
                    spec.position,
                    crate::angle::wrap_degrees(spec.yaw),
                    spec.charge,
                ),
                gains: spec.gains,
                limits: spec.limits,
                battery: spec.battery.model()?,
                camera: spec.camera,
                rab: spec.rab.clone(),
                memory: LoopMemory::default(),
                pilot: Pilot::new(script),
                led: spec.led,
                staged_led: None,
                outbox: Vec::new(),
                inbox: Vec::new(),
                detections: Vec::new(),
            });
        }
        let lights = scenario
            .lights
            .iter()
            .enumerate()
            .map(|(i, l)| Light {
                id: l.resolved_id(i),
                position: l.position,
                color: l.color,
            })
            .collect();
        let noise = match scenario.noise {
            Some(n) if n.position_sigma > 0.0 => Some(NoiseSource {
                rng: ChaCha8Rng::seed_from_u64(n.seed),
                normal: Normal::new(0.0, n.position_sigma)
                    .map_err(|e| Error::config("noise", e.to_string()))?,
            }),
            _ => None,
        };
        let mut world = Self {
            clock,
            arena: scenario.arena,
            drones,
            lights,
            noise,
        };
        world.sample_cameras();
        Ok(world)
    }

    pub fn tick(&self) -> u64 {
        self.clock.tick()
    }

    pub fn time(&self) -> f64 {
        self.clock.time()
    }

    pub fn dt(&self) -> f64 {
        self.clock.dt()
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn lights(&self) -> &[Light] {
        &self.lights
    }

    pub fn drone_ids(&self) -> impl Iterator<Item = &EntityId> {
        self.drones.iter().map(|d| &d.id)
    }

    pub fn state(&self, id: &str) -> Result<&DroneState> {
        Ok(&self.drone(id)?.state)
    }

    /// The LED as other drones currently see it.
    pub fn led(&self, id: &str) -> Result<LedState> {
        Ok(self.drone(id)?.led)
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.drones
            .iter()
            .position(|d| d.id.as_str() == id)
            .ok_or_else(|| Error::UnknownDrone(id.to_string()))
    }

    fn drone(&self, id: &str) -> Result<&Drone> {
        Ok(&self.drones[self.index(id)?])
    }

    fn drone_mut(&mut self, id: &str) -> Result<&mut Drone> {
        let i = self.index(id)?;
        Ok(&mut self.drones[i])
    }

    /// Replaces the drone's active command; the script continues with its
    /// next entry when that becomes due.
    pub fn set_command(&mut self, id: &str, command: Command) -> Result<()> {
        if !command.is_finite() {
            return Err(Error::Domain("command values must be finite".into()));
        }
        let drone = self.drone_mut(id)?;
        drone
            .pilot
            .override_command(command, &drone.state, &mut drone.memory);
        Ok(())
    }

    pub fn command(&self, id: &str) -> Result<Command> {
        Ok(*self.drone(id)?.pilot.command())
    }

    /// Stages an LED change; cameras see it from the next step on.
    pub fn set_led(&mut self, id: &str, color: Rgb, on: bool) -> Result<()> {
        self.drone_mut(id)?.staged_led = Some(LedState { color, on });
        Ok(())
    }

    /// Queues a broadcast for delivery during the next step.
    pub fn rab_send(&mut self, id: &str, payload: &[u8]) -> Result<()> {
        let drone = self.drone_mut(id)?;
        let Some(rab) = &drone.rab else {
            return Err(Error::MissingCapability {
                drone: id.to_string(),
                capability: "range-and-bearing device",
            });
        };
        if payload.len() > rab.payload_max {
            return Err(Error::PayloadTooLarge {
                len: payload.len(),
                max: rab.payload_max,
            });
        }
        drone.outbox.push(payload.to_vec());
        Ok(())
    }

    /// Messages delivered during the last step, ordered by sender.
    pub fn rab_read(&self, id: &str) -> Result<&[RabReading]> {
        Ok(&self.drone(id)?.inbox)
    }

    /// Detections sampled at the end of the last step.
    pub fn detections(&self, id: &str) -> Result<&[Detection]> {
        Ok(&self.drone(id)?.detections)
    }

    /// Samples the drone's camera against the current world without
    /// changing it.
    pub fn camera_capture(&self, id: &str) -> Result<Vec<Detection>> {
        let i = self.index(id)?;
        let config = self.drones[i]
            .camera
            .ok_or_else(|| Error::MissingCapability {
                drone: id.to_string(),
                capability: "camera",
            })?;
        Ok(self.capture(i, &config))
    }

    fn capture(&self, index: usize, config: &CameraConfig) -> Vec<Detection> {
        let me = &self.drones[index];
        let pose = CameraPose {
            position: me.state.position,
            yaw: me.state.yaw + config.mount_yaw_offset,
        };
        let lights = self.lights.iter().map(|l| (&l.id, l.position, l.color));
        let leds = self
            .drones
            .iter()
            .enumerate()
            .filter(|(j, d)| *j != index && d.led.on)
            .map(|(_, d)| (&d.id, d.state.position, d.led.color));
        let mut found: Vec<Detection> = lights
            .chain(leds)
            .filter_map(|(source, position, color)| {
                project_light(&pose, &position, config).map(|(u, v)| Detection {
                    u,
                    v,
                    color,
                    source: source.clone(),
                })
            })
            .collect();
        found.sort_by(|a, b| (a.u, a.v, &a.source).cmp(&(b.u, b.v, &b.source)));
        found
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) {
        let tick = self.clock.tick();
        let dt = self.clock.dt();

        for d in &mut self.drones {
            if d.state.is_grounded() {
                continue;
            }
            let effects = d.pilot.advance(tick, &d.state, &mut d.memory);
            if let Some(led) = effects.led {
                d.staged_led = Some(led);
            }
            let (velocity, yaw_rate) = control_step(
                &d.state,
                d.pilot.command(),
                &mut d.memory,
                &d.gains,
                &d.limits,
                dt,
            );
            d.state.velocity = velocity;
            d.state.yaw_rate = yaw_rate;
        }

        for d in &mut self.drones {
            if d.state.is_grounded() {
                continue;
            }
            let mut next =
                crate::control::integrate(&d.state, d.state.velocity, d.state.yaw_rate, dt);
            if let Some(noise) = &mut self.noise {
                for axis in 0..3 {
                    next.position[axis] += noise.normal.sample(&mut noise.rng);
                }
            }
            clamp_to_arena(&self.arena, &mut next);
            d.state = next;
        }

        let ground = self.arena.min.z.max(0.0);
        for d in &mut self.drones {
            // The charge is kept in [0, 1] and dt > 0, so this cannot fail.
            d.state.charge = d.battery.next_charge(d.state.charge, dt).unwrap_or(0.0);
            if d.state.is_grounded() {
                d.state.position.z = ground;
                d.state.velocity = Vec3::zeros();
                d.state.yaw_rate = 0.0;
            }
        }

        for d in &mut self.drones {
            if let Some(led) = d.staged_led.take() {
                d.led = led;
            }
        }
        self.deliver_messages();

        self.sample_cameras();
        self.clock.advance();
    }

    fn deliver_messages(&mut self) {
        let broadcasts: Vec<(usize, Vec<Vec<u8>>)> = self
            .drones
            .iter_mut()
            .enumerate()
            .filter_map(|(i, d)| {
                let rab = d.rab.as_ref()?;
                let mut messages = std::mem::take(&mut d.outbox);
                if let Some(beacon) = &rab.beacon {
                    messages.push(beacon.clone());
                }
                Some((i, messages))
            })
            .collect();
        for r in 0..self.drones.len() {
            let mut inbox = Vec::new();
            if self.drones[r].rab.is_some() {
                let receiver = &self.drones[r].state;
                for (s, messages) in &broadcasts {
                    if *s == r || messages.is_empty() {
                        continue;
                    }
                    let sender = &self.drones[*s];
                    let range_limit = sender.rab.as_ref().expect("broadcasters have a device");
                    let Some((range, horizontal, vertical)) =
                        measure(&receiver.position, receiver.yaw, &sender.state.position)
                    else {
                        continue;
                    };
                    if !range_limit.reaches(range) {
                        continue;
                    }
                    for payload in messages {
                        inbox.push(RabReading {
                            range,
                            horizontal_bearing: horizontal,
                            vertical_bearing: vertical,
                            payload: payload.clone(),
                            sender: sender.id.clone(),
                        });
                    }
                }
                inbox.sort_by(|a, b| a.sender.cmp(&b.sender));
            }
            self.drones[r].inbox = inbox;
        }
    }

    fn sample_cameras(&mut self) {
        for i in 0..self.drones.len() {
            let detections = match self.drones[i].camera {
                Some(config) => self.capture(i, &config),
                None => Vec::new(),
            };
            self.drones[i].detections = detections;
        }
    }

    /// Current state of every drone as trajectory rows.
    fn record(&self, out: &mut [Trajectory]) {
        let tick = self.clock.tick();
        let time = self.clock.time();
        for (t, d) in out.iter_mut().zip(&self.drones) {
            t.rows.push(TrajectoryRow::from_state(tick, time, &d.state));
        }
    }

    /// Steps `ticks` times, returning one trajectory per drone with the
    /// starting row plus one row per step.
    pub fn run(&mut self, ticks: u64) -> Vec<Trajectory> {
        let mut out: Vec<Trajectory> = self
            .drones
            .iter()
            .map(|d| {
                let mut t = Trajectory::new(d.id.clone());
                t.rows.reserve(ticks as usize + 1);
                t
            })
            .collect();
        self.record(&mut out);
        for _ in 0..ticks {
            self.step();
            self.record(&mut out);
        }
        out
    }
}

/// Builds a world from `scenario` and runs it for its full duration.
pub fn simulate(scenario: &Scenario) -> Result<Vec<Trajectory>> {
    let mut world = World::new(scenario)?;
    Ok(world.run(scenario.ticks()))
}

fn clamp_to_arena(arena: &Arena, state: &mut DroneState) {
    for axis in 0..3 {
        let p = state.position[axis];
        if p < arena.min[axis] {
            state.position[axis] = arena.min[axis];
            state.velocity[axis] = state.velocity[axis].max(0.0);
        } else if p > arena.max[axis] {
            state.position[axis] = arena.max[axis];
            state.velocity[axis] = state.velocity[axis].min(0.0);
        }
    }
}
