//! Every optical sign convention in one place.
//!
//! * Jones vectors are written in the linear basis `(|H>, |V>)` internally
//!   and exposed in the circular basis `(|L>, |R>)` with
//!   `|L> = (|H> + i|V>) / sqrt 2` and `|R> = (|H> - i|V>) / sqrt 2`.
//! * A wave plate with retardance `delta` and fast axis at angle `phi` from
//!   `H` is `R(-phi) diag(1, e^{i delta}) R(phi)` in the linear basis, with
//!   `R(phi) = [[cos phi, sin phi], [-sin phi, cos phi]]`: the slow axis
//!   picks up `e^{+i delta}`.
//! * Coin basis: `|up> = |L>`, `|down> = |R>`.
//! * A q-plate of charge `q` maps `|m, L> -> |m + 2q, R>` and
//!   `|m, R> -> |m - 2q, L>`, with no extra phase.
//! * Walker site `i` after `t` units is carried by OAM `m = 2(i - 1) - t`.

use std::f64::consts::{FRAC_PI_2, PI};

/// Retardance of a quarter-wave plate.
pub const QWP_RETARDANCE: f64 = FRAC_PI_2;

/// Retardance of a half-wave plate.
pub const HWP_RETARDANCE: f64 = PI;

/// Fast-axis orientations are periodic with this period.
pub const ANGLE_PERIOD: f64 = PI;

/// Angles in plan files are rounded to this resolution.
pub const ANGLE_RESOLUTION: f64 = 1e-10;

/// Charge of the q-plate in every unit.
pub const UNIT_Q: f64 = 0.5;

/// OAM quantum number carrying site `site` after `layer` units.
pub fn site_to_oam(site: i64, layer: usize) -> i64 {
    2 * (site - 1) - layer as i64
}

/// Inverse of [`site_to_oam`]; `None` when `m` has the wrong parity.
pub fn oam_to_site(m: i64, layer: usize) -> Option<i64> {
    let s = m + layer as i64;
    (s % 2 == 0).then_some(s / 2 + 1)
}
