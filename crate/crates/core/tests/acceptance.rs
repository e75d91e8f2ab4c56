//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.


use std::path::PathBuf;
use std::time::{Duration, Instant};

use cfsim::experiments::{self, Experiment, Findings, Options};
use cfsim::scenario::Scenario;
use cfsim::sensing::battery::fit_discharge_polynomial;
use cfsim::sensing::BatteryModel;
use cfsim::world::World;

type Check = Result<String, String>;

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn shipped_scenarios() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .expect("scenarios directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths
}

fn run_to_csv(scenario: &Scenario) -> Vec<String> {
    let mut world = World::new(scenario).expect("valid scenario");
    world
        .run(scenario.ticks())
        .iter()
        .map(|t| t.to_csv_string())
        .collect()
}

fn findings(experiment: Experiment, options: &Options) -> Result<Vec<(String, Findings)>, String> {
    experiments::variants(experiment, options)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|v| {
            Ok((
                v.label.clone(),
                v.run().map_err(|e| e.to_string())?.findings,
            ))
        })
        .collect()
}

fn determinism(limit: Duration) -> Check {
    let mut slowest = Duration::ZERO;
    let mut names = Vec::new();
    for path in shipped_scenarios() {
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        let scenario = Scenario::load_file(&path).map_err(|e| format!("{name}: {e}"))?;
        let started = Instant::now();
        let first = run_to_csv(&scenario);
        let elapsed = started.elapsed();
        let second = run_to_csv(&scenario);
        if first != second {
            return Err(format!("{name}: runs differ"));
        }
        if elapsed >= limit {
            return Err(format!("{name}: {:.3} s per run", elapsed.as_secs_f64()));
        }
        slowest = slowest.max(elapsed);
        names.push(name);
    }
    Ok(format!(
        "{} scenarios byte-identical ({}), slowest run {:.3} s",
        names.len(),
        names.join(", "),
        slowest.as_secs_f64()
    ))
}

fn speed_saturation() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for experiment in [
        Experiment::AltitudeSteps,
        Experiment::Line2d,
        Experiment::Line3d,
    ] {
        for (label, f) in findings(experiment, &Options::default())? {
            let Findings::Speed {
                commanded, peak, ..
            } = f
            else {
                return Err(format!("{}: unexpected findings", experiment.name()));
            };
            let err = (peak - commanded).abs();
            if err > 1e-6 {
                return Err(format!(
                    "{} {label}: peak {peak:.9} vs commanded {commanded:.9}",
                    experiment.name()
                ));
            }
            worst = worst.max(err);
            count += 1;
        }
    }
    Ok(format!(
        "{count} legs, worst |peak - commanded| = {worst:.2e} m/s"
    ))
}

fn yaw_under_reach() -> Check {
    let mut report = Vec::new();
    for (_, f) in findings(Experiment::YawSteps, &Options::default())? {
        let Findings::YawRate { commanded, peak } = f else {
            return Err("unexpected findings".into());
        };
        let ok = if commanded == 45.0 {
            (peak - 45.0).abs() <= 0.5
        } else if commanded == 90.0 {
            (89.0..90.5).contains(&peak)
        } else if commanded == 180.0 {
            (150.0..180.0).contains(&peak)
        } else {
            return Err(format!("unexpected commanded rate {commanded}"));
        };
        if !ok {
            return Err(format!("commanded {commanded} deg/s, peak {peak:.4}"));
        }
        report.push(format!("{commanded:.0}->{peak:.3}"));
    }
    Ok(format!("peak yaw rates {}", report.join(", ")))
}

fn position_legs() -> Check {
    let (_, f) = findings(Experiment::PositionLegs, &Options::default())?
        .pop()
        .ok_or("no variant")?;
    let Findings::Legs(legs) = f else {
        return Err("unexpected findings".into());
    };
    if legs.len() != 6 {
        return Err(format!("{} legs", legs.len()));
    }
    let mut worst_pct: f64 = 0.0;
    for leg in &legs {
        let pct = 100.0 * leg.error / leg.desired;
        worst_pct = worst_pct.max(pct);
        if pct >= 1.0 {
            return Err(format!("{} m leg: error {:.4} m", leg.desired, leg.error));
        }
        if leg.desired <= 2.0 && leg.error >= 0.01 {
            return Err(format!(
                "{} m leg: error {:.4} m >= 1 cm",
                leg.desired, leg.error
            ));
        }
        if leg.desired >= 25.0 && (leg.peak - 10.0).abs() > 1e-6 {
            return Err(format!("{} m leg: peak speed {:.9}", leg.desired, leg.peak));
        }
    }
    Ok(format!(
        "errors (m) {}; worst {worst_pct:.3}%; peaks on 25/50 m legs {:.6}/{:.6} m/s",
        legs.iter()
            .map(|l| format!("{:.4}", l.error))
            .collect::<Vec<_>>()
            .join("/"),
        legs[4].peak,
        legs[5].peak
    ))
}

fn yaw_legs() -> Check {
    let variant = experiments::variants(Experiment::YawLegs, &Options::default())
        .map_err(|e| e.to_string())?
        .pop()
        .ok_or("no variant")?;
    let outcome = variant.run().map_err(|e| e.to_string())?;
    let Findings::YawLegs(legs) = outcome.findings else {
        return Err("unexpected findings".into());
    };
    for leg in &legs {
        if leg.error >= 0.5 {
            return Err(format!("{} deg leg: error {:.4}", leg.desired, leg.error));
        }
    }
    let peak = outcome.trajectories[0]
        .rows
        .iter()
        .map(|r| r.yaw_rate.abs())
        .fold(0.0, f64::max);
    if peak >= 90.0 {
        return Err(format!("peak yaw rate {peak:.6} reached the cap"));
    }
    Ok(format!(
        "errors (deg) {}; peak yaw rate {peak:.4} deg/s",
        legs.iter()
            .map(|l| format!("{:.4}", l.error))
            .collect::<Vec<_>>()
            .join("/")
    ))
}

fn battery() -> Check {
    let model = BatteryModel::default();
    let options = Options::default();
    let mut report = Vec::new();
    for variant in
        experiments::variants(Experiment::Battery, &options).map_err(|e| e.to_string())?
    {
        let dt = variant.scenario.dt;
        let c0 = variant.scenario.drones[0].charge;
        let t0 = if c0 <= model.cutoff_charge() {
            model.t_max()
        } else {
            properties::newton_time_at(&model, c0)
        };
        let expected = model.t_max() - t0;
        let outcome = variant.run().map_err(|e| e.to_string())?;
        let rows = &outcome.trajectories[0].rows;
        let empty_at = rows
            .iter()
            .find(|r| r.charge == 0.0)
            .map(|r| r.time)
            .ok_or_else(|| format!("charge {c0}: never depleted"))?;
        if (empty_at - expected).abs() > dt + 1e-9 {
            return Err(format!(
                "charge {c0}: empty at {empty_at:.3} s, expected {expected:.3} s"
            ));
        }
        if c0 == 1.0 && (empty_at - 427.21).abs() > dt + 1e-9 {
            return Err(format!("full charge empty at {empty_at:.3} s"));
        }
        let mut sum = 0.0;
        for (k, row) in rows.iter().enumerate() {
            let t = t0 + k as f64 * dt;
            let direct = if k == 0 {
                c0
            } else if t >= model.t_max() {
                0.0
            } else {
                model.eval(t)
            };
            sum += (row.charge - direct).powi(2);
        }
        let trace_mse = sum / rows.len() as f64;
        if trace_mse >= 1e-9 {
            return Err(format!("charge {c0}: trace MSE {trace_mse:.3e}"));
        }
        report.push(format!("{c0:.2}->{empty_at:.1}s"));
    }

    // Synthesize samples from a known monotone cubic and recover it.
    let truth = [1.0, -2.5e-3, 1.1e-6, -3.0e-9];
    let t_max = 300.0;
    let samples: Vec<(f64, f64)> = (0..=300)
        .map(|i| {
            let t = f64::from(i);
            (t, truth[0] + t * (truth[1] + t * (truth[2] + t * truth[3])))
        })
        .collect();
    let fitted = fit_discharge_polynomial(&samples, Some(t_max)).map_err(|e| e.to_string())?;
    let worst = fitted
        .coefficients()
        .iter()
        .zip(truth)
        .map(|(got, want)| ((got - want) / want).abs())
        .fold(0.0, f64::max);
    if worst >= 1e-9 {
        return Err(format!("fit relative error {worst:.3e}"));
    }
    Ok(format!(
        "time to empty {}; fit relative error {worst:.1e}",
        report.join(", ")
    ))
}

fn camera_calibration() -> Check {
    let (_, f) = findings(Experiment::CameraCalibration, &Options::default())?
        .pop()
        .ok_or("no variant")?;
    let Findings::Camera { total, hits } = f else {
        return Err("unexpected findings".into());
    };
    if total != 4 {
        return Err(format!("{total} detections"));
    }
    let reference = [
        ("red", 0, 159),
        ("green", 160, 0),
        ("blue", 319, 159),
        ("white", 160, 318),
    ];
    let mut report = Vec::new();
    for (light, u, v) in reference {
        let hit = hits
            .iter()
            .find(|h| h.light == light)
            .ok_or(format!("no {light} light"))?;
        let d = hit
            .detection
            .as_ref()
            .ok_or(format!("{light} not detected"))?;
        if (i32::from(d.u) - u).abs() > 1 || (i32::from(d.v) - v).abs() > 1 {
            return Err(format!(
                "{light} at ({}, {}), reference ({u}, {v})",
                d.u, d.v
            ));
        }
        if hit.visible_when_moved {
            return Err(format!("{light} still detected at 1 m lateral offset"));
        }
        report.push(format!("{light}=({},{})", d.u, d.v));
    }
    Ok(format!("{}; all dropped when moved", report.join(" ")))
}

type Suite = (&'static str, fn(u32) -> Result<(), String>);

fn property_suites() -> Check {
    let cases = 1000;
    let suites: [Suite; 6] = [
        ("saturation", properties::saturation_preserves_direction),
        ("frames", properties::frame_equivalence),
        ("rab", properties::rab_geometry),
        ("battery", properties::battery_composition),
        ("mse", properties::mse_matches_naive),
        ("round-trip", properties::scenario_round_trip),
    ];
    for (name, suite) in suites {
        suite(cases).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} suites x {cases} cases", suites.len()))
}

fn throughput(limit: Duration) -> Check {
    let scenario =
        Scenario::load_file(scenarios_dir().join("swarm10.toml")).map_err(|e| e.to_string())?;
    let drones = scenario.drones.len();
    let cameras = scenario
        .drones
        .iter()
        .filter(|d| d.camera.is_some())
        .count();
    let radios = scenario.drones.iter().filter(|d| d.rab.is_some()).count();
    if drones != 10 || cameras != 10 || radios != 10 || scenario.ticks() != 10_000 {
        return Err("swarm10 is not a 10-drone 10000-tick scenario with cameras and RAB".into());
    }
    let started = Instant::now();
    let mut world = World::new(&scenario).map_err(|e| e.to_string())?;
    let trajectories = world.run(scenario.ticks());
    let elapsed = started.elapsed();
    let rows: usize = trajectories.iter().map(|t| t.rows.len()).sum();
    if elapsed >= limit {
        return Err(format!("{:.3} s", elapsed.as_secs_f64()));
    }
    Ok(format!("{rows} rows in {:.3} s", elapsed.as_secs_f64()))
}

type Criterion = (u32, &'static str, Duration, Box<dyn FnOnce() -> Check>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            1,
            "determinism",
            Duration::from_secs(1),
            Box::new(|| determinism(Duration::from_secs(1))),
        ),
        (
            2,
            "speed saturation",
            Duration::from_secs(5),
            Box::new(speed_saturation),
        ),
        (
            3,
            "yaw under-reach",
            Duration::from_secs(5),
            Box::new(yaw_under_reach),
        ),
        (
            4,
            "position legs",
            Duration::from_secs(10),
            Box::new(position_legs),
        ),
        (5, "yaw legs", Duration::from_secs(5), Box::new(yaw_legs)),
        (
            6,
            "battery depletion",
            Duration::from_secs(10),
            Box::new(battery),
        ),
        (
            7,
            "camera calibration",
            Duration::from_secs(1),
            Box::new(camera_calibration),
        ),
        (
            8,
            "property suites",
            Duration::from_secs(30),
            Box::new(property_suites),
        ),
        (
            9,
            "throughput",
            Duration::from_secs(5),
            Box::new(|| throughput(Duration::from_secs(5))),
        ),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        // Criterion 1 bounds each run, not the whole check.
        let over_time = id != 1 && elapsed >= limit;
        let (verdict, detail) = match result {
            Ok(_) if over_time => (
                "FAIL",
                format!(
                    "took {:.3} s, limit {} s",
                    elapsed.as_secs_f64(),
                    limit.as_secs()
                ),
            ),
            Ok(detail) => ("PASS", detail),
            Err(detail) => ("FAIL", detail),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {id} {verdict} {name}: {detail} [{:.3} s]",
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
