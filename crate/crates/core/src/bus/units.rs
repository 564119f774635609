use std::f64::consts::TAU;

pub const TICKS_PER_REV: f64 = 4096.0;

/// Nearest position tick; multi-turn positions are signed.
pub fn rad_to_ticks(rad: f64) -> i32 {
    (rad * TICKS_PER_REV / TAU).round() as i32
}

pub fn ticks_to_rad(ticks: i32) -> f64 {
    ticks as f64 * TAU / TICKS_PER_REV
}

/// Quantize an angle onto the position grid.
pub fn quantize_rad(rad: f64) -> f64 {
    ticks_to_rad(rad_to_ticks(rad))
}
