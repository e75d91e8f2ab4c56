//! Recorded drone trajectories and their CSV / plot-column output.

use std::fmt::Write as _;
use std::io::Write;

use crate::entity::EntityId;
use crate::error::{Error, Result};
use crate::state::DroneState;
use crate::Vec3;

pub const CSV_HEADER: &str = "tick,time_s,id,x,y,z,yaw_deg,vx,vy,vz,yaw_rate_deg_s,charge";

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub time: f64,
    pub position: Vec3,
    pub yaw: f64,
    pub velocity: Vec3,
    pub yaw_rate: f64,
    pub charge: f64,
}

impl TrajectoryRow {
    pub fn from_state(tick: u64, time: f64, state: &DroneState) -> Self {
        Self {
            tick,
            time,
            position: state.position,
            yaw: state.yaw,
            velocity: state.velocity,
            yaw_rate: state.yaw_rate,
            charge: state.charge,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub drone: EntityId,
    pub rows: Vec<TrajectoryRow>,
}

/// Peak values and end-of-run figures of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub peak_speed: f64,
    pub peak_yaw_rate: f64,
    /// Distance from the final position to the target, if one was given.
    pub final_position_error: Option<f64>,
    /// Time of the first row with zero charge.
    pub time_to_empty: Option<f64>,
}

/// Six decimals, with negative zero printed as zero.
pub fn fixed6(value: f64) -> String {
    let mut text = String::with_capacity(16);
    push_fixed6(&mut text, value);
    text
}

fn push_fixed6(out: &mut String, value: f64) {
    let start = out.len();
    let _ = write!(out, "{value:.6}");
    if &out[start..] == "-0.000000" {
        out.remove(start);
    }
}

impl Trajectory {
    pub fn new(drone: EntityId) -> Self {
        Self {
            drone,
            rows: Vec::new(),
        }
    }

    /// Writes the header and one LF-terminated line per row.
    pub fn write_csv(&self, mut sink: impl Write) -> Result<()> {
        let mut out = String::with_capacity(96 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},", r.tick);
            push_fixed6(&mut out, r.time);
            let _ = write!(out, ",{}", self.drone);
            for value in [
                r.position.x,
                r.position.y,
                r.position.z,
                r.yaw,
                r.velocity.x,
                r.velocity.y,
                r.velocity.z,
                r.yaw_rate,
                r.charge,
            ] {
                out.push(',');
                push_fixed6(&mut out, value);
            }
            out.push('\n');
        }
        sink.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn summarize(&self, target: Option<&Vec3>) -> Summary {
        let peak_speed = self
            .rows
            .iter()
            .map(|r| r.velocity.norm())
            .fold(0.0, f64::max);
        let peak_yaw_rate = self
            .rows
            .iter()
            .map(|r| r.yaw_rate.abs())
            .fold(0.0, f64::max);
        let final_position_error = match (target, self.rows.last()) {
            (Some(t), Some(last)) => Some((t - last.position).norm()),
            _ => None,
        };
        let time_to_empty = self.rows.iter().find(|r| r.charge <= 0.0).map(|r| r.time);
        Summary {
            peak_speed,
            peak_yaw_rate,
            final_position_error,
            time_to_empty,
        }
    }
}

/// Two-column views of a trajectory for plotting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Xy,
    Xz,
    TimeX,
    TimeZ,
    TimeYaw,
    TimeSpeed,
    TimeYawRate,
    TimeCharge,
}

impl Projection {
    pub const ALL: [Projection; 8] = [
        Projection::Xy,
        Projection::Xz,
        Projection::TimeX,
        Projection::TimeZ,
        Projection::TimeYaw,
        Projection::TimeSpeed,
        Projection::TimeYawRate,
        Projection::TimeCharge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Projection::Xy => "xy",
            Projection::Xz => "xz",
            Projection::TimeX => "time-x",
            Projection::TimeZ => "time-z",
            Projection::TimeYaw => "time-yaw",
            Projection::TimeSpeed => "time-speed",
            Projection::TimeYawRate => "time-yaw-rate",
            Projection::TimeCharge => "time-charge",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    fn columns(self, r: &TrajectoryRow) -> (f64, f64) {
        match self {
            Projection::Xy => (r.position.x, r.position.y),
            Projection::Xz => (r.position.x, r.position.z),
            Projection::TimeX => (r.time, r.position.x),
            Projection::TimeZ => (r.time, r.position.z),
            Projection::TimeYaw => (r.time, r.yaw),
            Projection::TimeSpeed => (r.time, r.velocity.norm()),
            Projection::TimeYawRate => (r.time, r.yaw_rate),
            Projection::TimeCharge => (r.time, r.charge),
        }
    }
}

/// Writes whitespace-separated columns, one block per trajectory, blocks
/// separated by a blank line and headed by a `# <drone>` comment.
pub fn export_plot_columns(
    trajectories: &[Trajectory],
    projection: Projection,
    mut sink: impl Write,
) -> Result<()> {
    if trajectories.is_empty() {
        return Err(Error::Empty);
    }
    let mut out = String::new();
    for (i, t) in trajectories.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "# {}", t.drone);
        for r in &t.rows {
            let (a, b) = projection.columns(r);
            let _ = writeln!(out, "{} {}", fixed6(a), fixed6(b));
        }
    }
    sink.write_all(out.as_bytes())?;
    Ok(())
}
