//! Assist-fraction schedule and the torso assist force it scales.

use serde::{Deserialize, Serialize};

/// Plateau schedule for the assist fraction λ and the force it scales.
///
/// λ stays at 1.0 until `start_step`, then drops by `decrement` at every
/// further `step_interval` steps until it reaches zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSchedule {
    pub start_step: u64,
    pub step_interval: u64,
    pub decrement: f64,
    /// Fraction of body weight supported at λ = 1.
    pub assist_weight_fraction: f64,
    /// Forward tilt of the assist force away from vertical, degrees.
    pub tilt_deg: f64,
    pub gravity: f64,
    /// When false λ is identically zero (the no-curriculum baseline).
    pub enabled: bool,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        CurriculumSchedule {
            start_step: 500_000,
            step_interval: 100_000,
            decrement: 0.2,
            assist_weight_fraction: 0.5,
            tilt_deg: 5.0,
            gravity: 9.81,
            enabled: true,
        }
    }
}

impl CurriculumSchedule {
    /// Divides both breakpoints by `factor` (desk-scale runs). The plateau
    /// values are unchanged.
    pub fn compressed(mut self, factor: u64) -> Self {
        let factor = factor.max(1);
        self.start_step /= factor;
        self.step_interval = (self.step_interval / factor).max(1);
        self
    }

    pub fn disabled(mut self) -> Self {
        self.enabled = false;
        self
    }

    /// Training step at which λ first reaches zero.
    pub fn zero_step(&self) -> u64 {
        let drops = (1.0 / self.decrement).round() as u64;
        self.start_step + drops * self.step_interval
    }
}

/// λ(t) = max(0, 1 − decrement · max(0, ⌊(t − start)/interval⌋)).
///
/// Evaluated with integer floor division, so λ only takes the plateau
/// values 1.0, 0.8, …, 0.0 for the default schedule.
pub fn lambda_at(t: u64, sched: &CurriculumSchedule) -> f64 {
    if !sched.enabled {
        return 0.0;
    }
    if t < sched.start_step {
        return 1.0;
    }
    let drops = (t - sched.start_step) / sched.step_interval;
    // Count drops in integer space first so 1 − 5·0.2 lands on exactly 0.
    let levels = (1.0 / sched.decrement).round() as u64;
    if drops >= levels {
        return 0.0;
    }
    let remaining = levels - drops;
    (remaining as f64 / levels as f64).clamp(0.0, 1.0)
}

/// Force on the torso, newtons, in world axes (x, y horizontal, z up).
///
/// Magnitude λ·f·m·g; direction tilted forward from vertical by the
/// schedule's tilt angle toward the heading (cos θ, sin θ).
pub fn assist_force(mass: f64, heading: f64, lambda: f64, sched: &CurriculumSchedule) -> [f64; 3] {
    let lambda = lambda.clamp(0.0, 1.0);
    if lambda == 0.0 {
        return [0.0; 3];
    }
    let magnitude = lambda * sched.assist_weight_fraction * mass * sched.gravity;
    let tilt = sched.tilt_deg.to_radians();
    let horizontal = magnitude * tilt.sin();
    [
        horizontal * heading.cos(),
        horizontal * heading.sin(),
        magnitude * tilt.cos(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent piecewise evaluation: walk the plateaus.
    fn lambda_by_plateau(t: u64) -> f64 {
        let plateaus = [
            (0u64, 500_000u64, 1.0),
            (500_000, 600_000, 1.0),
            (600_000, 700_000, 0.8),
            (700_000, 800_000, 0.6),
            (800_000, 900_000, 0.4),
            (900_000, 1_000_000, 0.2),
        ];
        plateaus
            .iter()
            .find(|(lo, hi, _)| t >= *lo && t < *hi)
            .map_or(0.0, |p| p.2)
    }

    #[test]
    fn golden_values() {
        let s = CurriculumSchedule::default();
        assert_eq!(lambda_at(0, &s), 1.0);
        assert_eq!(lambda_at(499_999, &s), 1.0);
        assert_eq!(lambda_at(600_000, &s), 0.8);
        assert_eq!(lambda_at(750_000, &s), 0.6);
        assert_eq!(lambda_at(1_000_000, &s), 0.0);
        assert_eq!(lambda_at(5_000_000, &s), 0.0);
        assert_eq!(s.zero_step(), 1_000_000);
    }

    #[test]
    fn matches_plateau_table() {
        let s = CurriculumSchedule::default();
        for t in (0..=1_200_000).step_by(10_000) {
            assert_eq!(lambda_at(t, &s), lambda_by_plateau(t), "t={t}");
        }
    }

    #[test]
    fn compression_divides_breakpoints() {
        let s = CurriculumSchedule::default().compressed(50);
        assert_eq!(s.start_step, 10_000);
        assert_eq!(s.step_interval, 2_000);
        assert_eq!(lambda_at(9_999, &s), 1.0);
        assert_eq!(lambda_at(12_000, &s), 0.8);
        assert_eq!(lambda_at(20_000, &s), 0.0);
    }

    #[test]
    fn disabled_is_zero() {
        let s = CurriculumSchedule::default().disabled();
        assert_eq!(lambda_at(0, &s), 0.0);
    }

    #[test]
    fn assist_force_example() {
        let s = CurriculumSchedule::default();
        let f = assist_force(10.0, 0.0, 1.0, &s);
        let mag = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
        assert!((mag - 49.05).abs() < 1e-9);
        // Unit direction from an independent evaluation of sin/cos 5°.
        let dir = [f[0] / mag, f[1] / mag, f[2] / mag];
        assert!((dir[0] - 0.087_155_742_747_658_17).abs() < 1e-12);
        assert_eq!(dir[1], 0.0);
        assert!((dir[2] - 0.996_194_698_091_745_5).abs() < 1e-12);
        assert_eq!(assist_force(10.0, 0.3, 0.0, &s), [0.0; 3]);
    }

    #[test]
    fn heading_rotates_horizontal_component() {
        let s = CurriculumSchedule::default();
        let base = assist_force(10.0, 0.0, 1.0, &s);
        let theta = std::f64::consts::FRAC_PI_2;
        let rotated = assist_force(10.0, theta, 1.0, &s);
        // Rotation-matrix oracle about z.
        let expect = [
            theta.cos() * base[0] - theta.sin() * base[1],
            theta.sin() * base[0] + theta.cos() * base[1],
            base[2],
        ];
        for i in 0..3 {
            assert!((rotated[i] - expect[i]).abs() < 1e-12);
        }
    }
}
