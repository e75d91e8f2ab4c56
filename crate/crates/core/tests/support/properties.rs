//! Randomised invariants shared by the property tests and the acceptance
//! harness. Each check runs `cases` generated inputs from a fixed seed and
//! returns the first counterexample as text.

use cfsim::angle::wrap_degrees;
use cfsim::control::{
    body_to_world, control_step, saturate, velocity_control_step, Command, ControllerLimits, Frame,
    Gains, LoopMemory, PdGains,
};
use cfsim::metrics::mse;
use cfsim::scenario::{Arena, BatterySpec, DroneSpec, LightSpec, Noise, Scenario};
use cfsim::script::{Arrival, ScriptEntry};
use cfsim::sensing::{BatteryModel, CameraConfig, LedState, RabConfig, Rgb};
use cfsim::state::DroneState;
use cfsim::world::World;
use cfsim::Vec3;
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn vec3(lo: f64, hi: f64) -> impl Strategy<Value = Vec3> {
    (lo..hi, lo..hi, lo..hi).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn in_arena() -> impl Strategy<Value = Vec3> {
    (-1.5..1.5, -1.5..1.5, 0.0..3.0).prop_map(|(x, y, z): (f64, f64, f64)| Vec3::new(x, y, z))
}

fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_degrees(a - b).abs()
}

/// `saturate` never exceeds the limit, keeps the direction, and leaves
/// vectors under the limit untouched.
pub fn saturation_preserves_direction(cases: u32) -> Result<(), String> {
    check(cases, (vec3(-100.0, 100.0), 0.01..50.0f64), |(v, vmax)| {
        let s = saturate(&v, vmax);
        prop_assert!(
            s.norm() <= vmax * (1.0 + 1e-12),
            "|s| = {} > {vmax}",
            s.norm()
        );
        if v.norm() <= vmax {
            prop_assert_eq!(s, v);
        } else {
            prop_assert!((s.norm() - vmax).abs() <= 1e-12 * vmax);
            let cross = s.cross(&v).norm() / (s.norm() * v.norm());
            prop_assert!(cross <= 1e-12, "not parallel: {cross}");
            prop_assert!(s.dot(&v) > 0.0);
        }
        Ok(())
    })
}

/// A body-frame command produces the same control output as its world-frame
/// equivalent at the issuing pose.
pub fn frame_equivalence(cases: u32) -> Result<(), String> {
    let inputs = (
        -180.0..180.0f64,
        vec3(-3.0, 3.0),
        vec3(-1.5, 1.5),
        vec3(-5.0, 5.0),
        -200.0..200.0f64,
        any::<bool>(),
    );
    check(
        cases,
        inputs,
        |(yaw, velocity, position, command, angular, positional)| {
            let mut state = DroneState::at_rest(position + Vec3::new(0.0, 0.0, 1.5), yaw, 1.0);
            state.velocity = velocity;
            let gains = Gains::default();
            let limits = ControllerLimits::default();
            let (body, world) = if positional {
                (
                    Command::position(Frame::Body, command, angular),
                    Command::position(
                        Frame::World,
                        state.position + body_to_world(&command, yaw),
                        wrap_degrees(yaw + angular),
                    ),
                )
            } else {
                (
                    Command::velocity(Frame::Body, command, angular),
                    Command::velocity(Frame::World, body_to_world(&command, yaw), angular),
                )
            };
            let step = |cmd: &Command| {
                let mut memory = LoopMemory::default();
                if positional {
                    control_step(&state, cmd, &mut memory, &gains, &limits, 0.1)
                } else {
                    velocity_control_step(&state, cmd, &mut memory, &gains, &limits, 0.1)
                }
            };
            let (v_body, w_body) = step(&body);
            let (v_world, w_world) = step(&world);
            prop_assert!((v_body - v_world).norm() <= 1e-9, "{v_body} vs {v_world}");
            prop_assert!((w_body - w_world).abs() <= 1e-9, "{w_body} vs {w_world}");
            Ok(())
        },
    )
}

/// Readings delivered through the world match the closed-form range,
/// azimuth and elevation.
pub fn rab_geometry(cases: u32) -> Result<(), String> {
    let inputs = (
        in_arena(),
        in_arena(),
        -180.0..180.0f64,
        vec(any::<u8>(), 1..=10),
    );
    check(cases, inputs, |(receiver, sender, yaw, payload)| {
        let offset = sender - receiver;
        prop_assume!(offset.norm() > 1e-6);
        let mut scenario = Scenario::new(1);
        let unlimited = RabConfig {
            range: 0.0,
            ..RabConfig::default()
        };
        let mut rx = DroneSpec::new("rx", receiver);
        rx.yaw = yaw;
        rx.rab = Some(unlimited.clone());
        let mut tx = DroneSpec::new("tx", sender);
        tx.rab = Some(unlimited);
        scenario.drones = vec![rx, tx];
        let mut world = World::new(&scenario).map_err(|e| TestCaseError::fail(e.to_string()))?;
        world.rab_send("tx", &payload).unwrap();
        world.step();
        let inbox = world.rab_read("rx").unwrap();
        prop_assert_eq!(inbox.len(), 1);
        let reading = &inbox[0];
        let range = (offset.x * offset.x + offset.y * offset.y + offset.z * offset.z).sqrt();
        let azimuth = offset.y.atan2(offset.x).to_degrees() - yaw;
        let elevation = (offset.z / range).asin().to_degrees();
        prop_assert!((reading.range - range).abs() <= 1e-9);
        prop_assert!(angle_diff(reading.horizontal_bearing, azimuth) <= 1e-9);
        prop_assert!((reading.vertical_bearing - elevation).abs() <= 1e-9);
        prop_assert!(reading.horizontal_bearing > -180.0 && reading.horizontal_bearing <= 180.0);
        prop_assert_eq!(&reading.payload, &payload);
        Ok(())
    })
}

/// Newton inversion of the curve, independent of the library's bisection.
pub fn newton_time_at(model: &BatteryModel, charge: f64) -> f64 {
    let [c0, c1, c2, c3] = model.coefficients();
    let p = |t: f64| c0 + t * (c1 + t * (c2 + t * c3));
    let dp = |t: f64| c1 + t * (2.0 * c2 + t * 3.0 * c3);
    let mut t = model.t_max() * (1.0 - charge) / (1.0 - model.cutoff_charge());
    for _ in 0..100 {
        let step = (p(t) - charge) / dp(t);
        t = (t - step).clamp(0.0, model.t_max());
        if step.abs() < 1e-14 {
            break;
        }
    }
    t
}

/// Repeated discharge steps from `c0` land on `P(t(c0) + k·dt)`.
pub fn battery_composition(cases: u32) -> Result<(), String> {
    let model = BatteryModel::default();
    let cutoff = model.cutoff_charge();
    let inputs = (cutoff + 1e-3..=1.0f64, 1usize..400, 0.01..0.5f64);
    check(cases, inputs, |(c0, k, dt)| {
        let t0 = newton_time_at(&model, c0);
        let t = t0 + k as f64 * dt;
        prop_assume!((t - model.t_max()).abs() > 1e-6);
        let expected = if t >= model.t_max() {
            0.0
        } else {
            model.eval(t)
        };
        let mut charge = c0;
        for _ in 0..k {
            charge = model.next_charge(charge, dt).unwrap();
        }
        prop_assert!(
            (charge - expected).abs() <= 1e-9,
            "c0={c0} k={k} dt={dt}: {charge} vs {expected}"
        );
        Ok(())
    })
}

/// The library MSE agrees with a straightforward reverse-order loop.
pub fn mse_matches_naive(cases: u32) -> Result<(), String> {
    let series = (1usize..200).prop_flat_map(|n| (vec(-1e3..1e3f64, n), vec(-1e3..1e3f64, n)));
    check(cases, series, |(a, b)| {
        let mut sum = 0.0;
        for i in (0..a.len()).rev() {
            let d = a[i] - b[i];
            sum += d * d;
        }
        let naive = sum / a.len() as f64;
        let got = mse(&a, &b).unwrap();
        let scale = naive.abs().max(f64::MIN_POSITIVE);
        prop_assert!((got - naive).abs() / scale <= 1e-12, "{got} vs {naive}");
        Ok(())
    })
}

fn pd(kp_hi: f64, kd_hi: f64) -> impl Strategy<Value = PdGains> {
    (0.1..kp_hi, 0.0..kd_hi).prop_map(|(kp, kd)| PdGains::new(kp, kd))
}

fn drone(index: usize) -> impl Strategy<Value = DroneSpec> {
    let pose = (in_arena(), -180.0..=180.0f64, 0.0..=1.0f64);
    let gains = (pd(5.0, 0.2), pd(5.0, 0.2), pd(5.0, 0.2), pd(5.0, 0.2)).prop_map(
        |(velocity, yaw_rate, position, yaw)| Gains {
            velocity,
            yaw_rate,
            position,
            yaw,
        },
    );
    let limits =
        (0.1..20.0f64, 1.0..360.0f64, 0.1..20.0f64, 1.0..2000.0f64).prop_map(|(s, r, a, ya)| {
            ControllerLimits {
                max_linear_speed: s,
                max_yaw_rate: r,
                max_linear_accel: a,
                max_yaw_accel: ya,
            }
        });
    let led = (any::<(u8, u8, u8)>(), any::<bool>()).prop_map(|((r, g, b), on)| LedState {
        color: Rgb(r, g, b),
        on,
    });
    let camera = proptest::option::of((1.0..179.0f64, -180.0..180.0f64).prop_map(
        |(aperture, mount_yaw_offset)| CameraConfig {
            aperture,
            mount_yaw_offset,
        },
    ));
    let rab = proptest::option::of(
        (
            0.0..10.0f64,
            1usize..20,
            proptest::option::of(vec(any::<u8>(), 0..=1)),
        )
            .prop_map(|(range, payload_max, beacon)| RabConfig {
                range,
                payload_max,
                beacon,
            }),
    );
    let load = 0.1..3.0f64;
    (pose, gains, limits, led, camera, rab, load).prop_map(
        move |((position, yaw, charge), gains, limits, led, camera, rab, load_factor)| DroneSpec {
            id: format!("d{index}").into(),
            position,
            yaw,
            charge,
            gains,
            limits,
            battery: BatterySpec {
                load_factor,
                ..BatterySpec::default()
            },
            led,
            camera,
            rab,
        },
    )
}

fn command() -> impl Strategy<Value = Command> {
    (
        any::<bool>(),
        any::<bool>(),
        vec3(-2.0, 2.0),
        -180.0..180.0f64,
    )
        .prop_map(|(velocity, body, linear, angular)| {
            let frame = if body { Frame::Body } else { Frame::World };
            if velocity {
                Command::velocity(frame, linear, angular)
            } else {
                Command::position(frame, linear, angular)
            }
        })
}

fn arrival() -> impl Strategy<Value = Arrival> {
    (
        proptest::option::of(in_arena()),
        proptest::option::of(-180.0..180.0f64),
        0.01..1.0f64,
        0.1..10.0f64,
    )
        .prop_filter("needs a target", |(p, y, _, _)| p.is_some() || y.is_some())
        .prop_map(|(position, yaw, tolerance, yaw_tolerance)| Arrival {
            position,
            yaw,
            tolerance,
            yaw_tolerance,
        })
}

fn scenario() -> impl Strategy<Value = Scenario> {
    let drones = (1usize..4).prop_flat_map(|n| (0..n).map(drone).collect::<Vec<_>>());
    let lights = vec(
        (
            proptest::option::of("[a-z]{1,6}"),
            vec3(-5.0, 5.0),
            any::<(u8, u8, u8)>(),
        ),
        0..3,
    );
    let script = vec(
        (
            0usize..4,
            0u64..500,
            proptest::option::of(command()),
            proptest::option::of(arrival()),
            0u64..30,
            proptest::option::of(any::<(u8, u8, u8)>()),
        ),
        0..6,
    );
    let globals = (
        0.01..0.1f64,
        0i64..5000,
        proptest::option::of((any::<u64>(), 0.0..0.1f64)),
    );
    (drones, lights, script, globals).prop_map(|(drones, lights, script, (dt, duration, noise))| {
        let mut s = Scenario::new(duration);
        s.dt = dt;
        s.noise = noise.map(|(seed, position_sigma)| Noise {
            seed,
            position_sigma,
        });
        s.arena = Arena::default();
        s.lights = lights
            .into_iter()
            .enumerate()
            .map(|(i, (id, position, (r, g, b)))| LightSpec {
                id: id.map(|name| format!("lamp-{name}{i}").into()),
                position,
                color: Rgb(r, g, b),
            })
            .collect();
        let mut entries: Vec<ScriptEntry> = script
            .into_iter()
            .map(|(who, tick, command, until, dwell, led)| ScriptEntry {
                drone: drones[who % drones.len()].id.clone(),
                tick,
                until: command.and(until),
                command,
                dwell,
                led: led.map(|(r, g, b)| LedState::lit(Rgb(r, g, b))),
            })
            .collect();
        entries.sort_by_key(|e| e.tick);
        s.script = entries;
        s.drones = drones;
        s
    })
}

/// Rendering a valid scenario and loading it back gives the same scenario.
pub fn scenario_round_trip(cases: u32) -> Result<(), String> {
    check(cases, scenario(), |s| {
        s.validate().map_err(|e| {
            TestCaseError::fail(format!("generator produced invalid scenario: {e}"))
        })?;
        let text = s.render().map_err(|e| TestCaseError::fail(e.to_string()))?;
        let back =
            Scenario::load(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, s);
        Ok(())
    })
}
