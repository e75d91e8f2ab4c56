//! Degree-based angle helpers.

/// Wraps an angle in degrees into `(-180, 180]`.
///
/// An input of exactly -180 maps to +180, which is also what breaks the tie
/// for a half-turn yaw error: the controller turns counter-clockwise.
pub fn wrap_degrees(angle: f64) -> f64 {
    let wrapped = (angle + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped <= -180.0 {
        wrapped + 360.0
    } else {
        wrapped
    }
}

/// Signed shortest rotation from `from` to `to`, in `(-180, 180]`.
pub fn yaw_error(to: f64, from: f64) -> f64 {
    wrap_degrees(to - from)
}
