//! Cubic battery discharge model.
//!
//! Charge is a strictly decreasing cubic `P(t) = c0 + c1·t + c2·t² + c3·t³`
//! of flight time on `[0, t_max]`. Stepping the battery does not integrate a
//! current; it inverts the curve to recover where on it the present charge
//! sits, advances that time by `dt`, and reads the curve again. Once the
//! inverted time reaches `t_max` the charge drops straight to zero, since the
//! remaining energy can no longer keep the drone in the air.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Flight time from full charge to cutoff, seconds.
pub const DEFAULT_T_MAX: f64 = 427.21;

/// Default curve: the cubic with `P(0) = 1`, `P(t_max) = 0.30`,
/// `P'(0) = −0.0030 /s` and `P'(t_max) = −0.0050 /s`. Strictly decreasing on
/// `[0, t_max]`; its shallowest slope is about −3.9e-4 /s near t = 183 s.
pub const DEFAULT_COEFFICIENTS: [f64; 4] = [
    1.0,
    -0.003,
    1.424_214_023_272_369_8e-5,
    -2.587_784_213_770_773e-8,
];

/// Upper bound on bisection halvings. `t_max / 2^60` is far below the
/// resolution at which a charge value can still distinguish two times.
const MAX_BISECTIONS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryModel {
    coefficients: [f64; 4],
    t_max: f64,
    cutoff_charge: f64,
    load_factor: f64,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self::new(DEFAULT_COEFFICIENTS, DEFAULT_T_MAX, 1.0).expect("default battery curve is valid")
    }
}

impl BatteryModel {
    /// Builds a model and checks that the curve is usable: finite
    /// coefficients, positive `t_max` and load factor, strictly decreasing on
    /// `[0, t_max]`, and non-negative at `t_max`.
    ///
    /// `P(0) = 1` is not enforced here because fitted curves are reported raw;
    /// see [`BatteryModel::is_normalized`].
    pub fn new(coefficients: [f64; 4], t_max: f64, load_factor: f64) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Battery("coefficients must be finite".into()));
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::Battery(format!("t_max must be > 0, got {t_max}")));
        }
        if !(load_factor.is_finite() && load_factor > 0.0) {
            return Err(Error::Battery(format!(
                "load_factor must be > 0, got {load_factor}"
            )));
        }
        if let Some((from, to)) = monotonicity_violation(&coefficients, t_max) {
            return Err(Error::NonMonotone { from, to });
        }
        let cutoff_charge = horner(&coefficients, t_max);
        if cutoff_charge < 0.0 {
            return Err(Error::Battery(format!(
                "curve crosses zero before t_max (P(t_max) = {cutoff_charge})"
            )));
        }
        Ok(Self {
            coefficients,
            t_max,
            cutoff_charge,
            load_factor,
        })
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.coefficients
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `P(t_max)`: the lowest charge at which the drone still flies.
    pub fn cutoff_charge(&self) -> f64 {
        self.cutoff_charge
    }

    pub fn load_factor(&self) -> f64 {
        self.load_factor
    }

    pub fn with_load_factor(self, load_factor: f64) -> Result<Self> {
        Self::new(self.coefficients, self.t_max, load_factor)
    }

    /// True when the curve starts at full charge (`|P(0) − 1| ≤ 1e-9`).
    pub fn is_normalized(&self) -> bool {
        (self.coefficients[0] - 1.0).abs() <= 1e-9
    }

    pub fn eval(&self, t: f64) -> f64 {
        horner(&self.coefficients, t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let [_, c1, c2, c3] = self.coefficients;
        c1 + t * (2.0 * c2 + t * 3.0 * c3)
    }

    /// Flight time at which the curve passes through `charge`, by bisection
    /// on `[0, t_max]`. Charges above `P(0)` map to 0 and charges at or
    /// below the cutoff map to `t_max`.
    pub fn time_at_charge(&self, charge: f64) -> f64 {
        if charge >= self.eval(0.0) {
            return 0.0;
        }
        if charge <= self.cutoff_charge {
            return self.t_max;
        }
        let (mut lo, mut hi) = (0.0, self.t_max);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) > charge {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Advances the battery by `dt` seconds of flight.
    pub fn next_charge(&self, current: f64, dt: f64) -> Result<f64> {
        check_charge(current)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
        }
        if current == 0.0 {
            return Ok(0.0);
        }
        let t = self.time_at_charge(current);
        if t >= self.t_max {
            return Ok(0.0);
        }
        let t = t + dt * self.load_factor;
        if t >= self.t_max {
            return Ok(0.0);
        }
        Ok(self.eval(t).max(0.0))
    }

    /// Remaining flight time from `charge`, seconds.
    pub fn time_to_empty(&self, charge: f64) -> Result<f64> {
        check_charge(charge)?;
        if charge <= self.cutoff_charge {
            return Ok(0.0);
        }
        Ok(self.t_max - self.time_at_charge(charge))
    }
}

fn check_charge(charge: f64) -> Result<()> {
    if (0.0..=1.0).contains(&charge) {
        Ok(())
    } else {
        Err(Error::Domain(format!("charge {charge} is outside [0, 1]")))
    }
}

fn horner(c: &[f64; 4], t: f64) -> f64 {
    c[0] + t * (c[1] + t * (c[2] + t * c[3]))
}

/// First sub-interval of `[0, t_max]` on which `P'(t) ≥ 0`, if any.
pub fn monotonicity_violation(coefficients: &[f64; 4], t_max: f64) -> Option<(f64, f64)> {
    let [_, c1, c2, c3] = *coefficients;
    // P'(t) = a·t² + b·t + c
    let (a, b, c) = (3.0 * c3, 2.0 * c2, c1);
    let clip = |lo: f64, hi: f64| {
        let (lo, hi) = (lo.max(0.0), hi.min(t_max));
        (lo <= hi).then_some((lo, hi))
    };
    let interval = if a == 0.0 {
        if b == 0.0 {
            (c >= 0.0).then_some((0.0, t_max))
        } else {
            let root = -c / b;
            if b > 0.0 {
                clip(root, f64::INFINITY)
            } else {
                clip(f64::NEG_INFINITY, root)
            }
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            (a > 0.0).then_some((0.0, t_max))
        } else {
            let sq = disc.sqrt();
            let (r1, r2) = {
                let x1 = (-b - sq) / (2.0 * a);
                let x2 = (-b + sq) / (2.0 * a);
                (x1.min(x2), x1.max(x2))
            };
            if a > 0.0 {
                clip(f64::NEG_INFINITY, r1).or_else(|| clip(r2, f64::INFINITY))
            } else {
                clip(r1, r2)
            }
        }
    };
    interval.or_else(|| sampled_violation(coefficients, t_max))
}

// Catches curves that are analytically decreasing but flat in floating point.
fn sampled_violation(coefficients: &[f64; 4], t_max: f64) -> Option<(f64, f64)> {
    const SAMPLES: usize = 1000;
    let mut prev = horner(coefficients, 0.0);
    for i in 1..=SAMPLES {
        let t = t_max * i as f64 / SAMPLES as f64;
        let value = horner(coefficients, t);
        if value >= prev {
            return Some((t_max * (i - 1) as f64 / SAMPLES as f64, t));
        }
        prev = value;
    }
    None
}

/// Least-squares cubic through `(t, charge)` samples.
///
/// `t_max` defaults to the largest sample time. The fit is reported as is:
/// no rescaling makes `P(0) = 1`, so the model may fail validation.
pub fn fit_discharge_polynomial(
    samples: &[(f64, f64)],
    t_max: Option<f64>,
) -> Result<BatteryModel> {
    if samples
        .iter()
        .any(|(t, c)| !t.is_finite() || !c.is_finite())
    {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let mut times: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 4 {
        return Err(Error::Underdetermined {
            distinct: times.len(),
        });
    }
    let t_max = t_max.unwrap_or(*times.last().unwrap());

    // Fit in t/scale to keep the Vandermonde matrix well conditioned.
    let scale = times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let design = DMatrix::from_fn(samples.len(), 4, |row, col| {
        (samples[row].0 / scale).powi(col as i32)
    });
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|(_, c)| *c));
    let scaled = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Battery(format!("least-squares solve failed: {e}")))?;
    let mut coefficients = [0.0; 4];
    for (k, c) in coefficients.iter_mut().enumerate() {
        *c = scaled[k] / scale.powi(k as i32);
    }
    BatteryModel::new(coefficients, t_max, 1.0)
}
