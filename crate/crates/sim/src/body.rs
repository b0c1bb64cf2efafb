//! Toy planar biped.
//!
//! The robot is a point-mass torso on a rigid stance leg pivoting about a
//! point foot, plus a massless swing leg that is placed when a step is
//! triggered. Four actuators drive it:
//!
//! | index | actuator            | range after scaling           |
//! |-------|---------------------|-------------------------------|
//! | 0     | ankle lean target   | ±`max_lean_target` rad        |
//! | 1     | swing placement     | ±`max_step_angle` rad         |
//! | 2     | step trigger        | step when > 0                 |
//! | 3     | push-off            | 0..`pushoff_max` m/s at lift-off |
//!
//! The ankle is a saturating spring plus a damper. Its stiffness is below
//! the gravitational toppling stiffness `m g L`, so without assist the
//! robot falls unless the policy balances it.

use serde::{Deserialize, Serialize};

use crate::curriculum::{assist_force, CurriculumSchedule};

pub const ACTION_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyParams {
    pub mass: f64,
    pub leg_length: f64,
    /// Ankle spring stiffness as a fraction of `m g L`.
    pub ankle_stiffness: f64,
    /// Ankle damping, N·m·s/rad.
    pub ankle_damping: f64,
    /// Spring torque limit as a fraction of `m g L`.
    pub ankle_torque_limit: f64,
    pub max_lean_target: f64,
    pub max_step_angle: f64,
    pub pushoff_max: f64,
    /// Minimum ticks of stance before the next lift-off.
    pub min_step_ticks: u32,
    /// Step-trigger activation needed to lift off.
    pub step_threshold: f64,
    /// Duration of a swing, ticks. Placement is read at touchdown.
    pub swing_ticks: u32,
    /// Fraction of tangential velocity kept across a foot strike.
    pub impact_restitution: f64,
    /// Torso pitch beyond which the robot counts as fallen, rad.
    pub fall_threshold: f64,
    /// Coulomb friction coefficient at the stance foot.
    pub friction: f64,
    /// Maximum yaw rate when tracking a commanded heading, rad/s.
    pub turn_rate: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        BodyParams {
            mass: 10.0,
            leg_length: 0.6,
            ankle_stiffness: 0.9,
            ankle_damping: 3.0,
            ankle_torque_limit: 0.4,
            max_lean_target: 0.3,
            max_step_angle: 0.5,
            pushoff_max: 0.4,
            min_step_ticks: 6,
            step_threshold: 0.8,
            swing_ticks: 12,
            impact_restitution: 0.95,
            fall_threshold: 0.6,
            friction: 0.8,
            turn_rate: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotBody {
    pub mass: f64,
    /// Yaw about vertical, normalized to (−π, π].
    pub heading: f64,
    /// Stance foot position on the ground plane.
    pub foot: [f64; 2],
    /// Ground height under the stance foot.
    pub foot_z: f64,
    /// Stance-leg lean from vertical, positive forward along the heading. This
    /// is also the torso pitch: the torso is rigid on the stance leg.
    pub lean: f64,
    pub lean_rate: f64,
    pub ticks_since_step: u32,
    /// Remaining swing ticks while a step is in flight.
    pub swing: Option<u32>,
    pub steps_taken: u32,
    /// Last applied (clamped) action.
    pub actuators: [f64; ACTION_DIM],
    pub upright: bool,
    pub slipped: bool,
}

/// Outcome of one physics tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TickInfo {
    pub stepped: bool,
    pub forward_velocity: f64,
    pub effort: f64,
}

impl RobotBody {
    pub fn standing(params: &BodyParams, foot: [f64; 2], heading: f64) -> Self {
        RobotBody {
            mass: params.mass,
            heading: normalize_angle(heading),
            foot,
            foot_z: 0.0,
            lean: 0.0,
            lean_rate: 0.0,
            ticks_since_step: params.min_step_ticks,
            swing: None,
            steps_taken: 0,
            actuators: [0.0; ACTION_DIM],
            upright: true,
            slipped: false,
        }
    }

    pub fn forward(&self) -> [f64; 2] {
        [self.heading.cos(), self.heading.sin()]
    }

    /// Torso (centre of mass) position: planar x, y and height z.
    pub fn torso(&self, params: &BodyParams) -> [f64; 3] {
        let f = self.forward();
        let reach = params.leg_length * self.lean.sin();
        [
            self.foot[0] + reach * f[0],
            self.foot[1] + reach * f[1],
            self.foot_z + params.leg_length * self.lean.cos(),
        ]
    }

    /// Horizontal torso velocity along the heading, m/s.
    pub fn forward_velocity(&self, params: &BodyParams) -> f64 {
        params.leg_length * self.lean.cos() * self.lean_rate
    }

    pub fn pitch(&self) -> f64 {
        self.lean
    }

    /// Kinetic + gravitational + ankle-spring energy, with a zero lean target.
    pub fn mechanical_energy(&self, params: &BodyParams, gravity: f64) -> f64 {
        let l = params.leg_length;
        let kinetic = 0.5 * self.mass * l * l * self.lean_rate * self.lean_rate;
        let potential = self.mass * gravity * l * self.lean.cos();
        kinetic + potential + spring_potential(self.lean, params, self.mass, gravity)
    }

    /// Advances one fixed step of length `dt` under `action` and the assist
    /// fraction `lambda`.
    pub fn tick(
        &mut self,
        params: &BodyParams,
        sched: &CurriculumSchedule,
        lambda: f64,
        action: &[f64; ACTION_DIM],
        dt: f64,
    ) -> TickInfo {
        let a = action.map(|x| if x.is_finite() { x.clamp(-1.0, 1.0) } else { 0.0 });
        self.actuators = a;
        let mut info = TickInfo::default();
        let g = sched.gravity;
        let m = self.mass;
        let l = params.leg_length;

        let mut stepped = false;
        self.ticks_since_step = self.ticks_since_step.saturating_add(1);
        match self.swing {
            Some(remaining) if remaining <= 1 => {
                self.swing = None;
                self.touch_down(params, a[1] * params.max_step_angle);
                stepped = true;
            }
            Some(remaining) => self.swing = Some(remaining - 1),
            None if a[2] > params.step_threshold && self.ticks_since_step >= params.min_step_ticks => {
                self.swing = Some(params.swing_ticks.max(1));
                self.lean_rate += a[3].max(0.0) * params.pushoff_max / l;
            }
            None => {}
        }

        // Assist force projected into the sagittal plane.
        let force = assist_force(m, self.heading, lambda, sched);
        let fwd = self.forward();
        let f_forward = force[0] * fwd[0] + force[1] * fwd[1];
        let f_up = force[2];
        let g_eff = g - f_up / m;

        let target = a[0] * params.max_lean_target;
        let spring = spring_torque(self.lean - target, params, m, g);
        let torque = spring + params.ankle_damping * self.lean_rate;

        let (s, c) = self.lean.sin_cos();
        let accel = (g_eff / l) * s + f_forward / (m * l) * c - torque / (m * l * l);

        // Ground reaction from the torso acceleration; slip when it leaves the
        // friction cone or the foot unloads.
        let rate = self.lean_rate;
        let ax = l * (c * accel - s * rate * rate);
        let az = -l * (s * accel + c * rate * rate);
        let grf_x = m * ax - f_forward;
        let grf_z = m * (az + g) - f_up;
        if grf_z <= 0.0 || grf_x.abs() > params.friction * grf_z {
            self.slipped = true;
        }

        self.lean_rate += accel * dt;
        self.lean += self.lean_rate * dt;
        self.upright = !self.slipped && self.lean.abs() < params.fall_threshold;

        info.stepped = stepped;
        info.forward_velocity = self.forward_velocity(params);
        info.effort = a.iter().map(|x| x * x).sum();
        info
    }

    fn touch_down(&mut self, params: &BodyParams, placement: f64) {
        let l = params.leg_length;
        let fwd = self.forward();
        let torso = self.torso(params);
        let new_lean = -placement;
        let reach = l * placement.sin();
        self.foot = [torso[0] + reach * fwd[0], torso[1] + reach * fwd[1]];
        let rate = self.lean_rate * (self.lean - new_lean).cos() * params.impact_restitution;
        self.lean = new_lean;
        self.lean_rate = rate;
        self.ticks_since_step = 0;
        self.steps_taken += 1;
    }

    /// Turns toward `target` heading at most `turn_rate · dt`.
    pub fn turn_toward(&mut self, target: f64, params: &BodyParams, dt: f64) {
        let diff = normalize_angle(target - self.heading);
        let max = params.turn_rate * dt;
        self.heading = normalize_angle(self.heading + diff.clamp(-max, max));
    }
}

fn spring_torque(deflection: f64, params: &BodyParams, mass: f64, gravity: f64) -> f64 {
    let mgl = mass * gravity * params.leg_length;
    let limit = params.ankle_torque_limit * mgl;
    (params.ankle_stiffness * mgl * deflection).clamp(-limit, limit)
}

/// Potential of the saturating ankle spring (zero target).
fn spring_potential(lean: f64, params: &BodyParams, mass: f64, gravity: f64) -> f64 {
    let mgl = mass * gravity * params.leg_length;
    let k = params.ankle_stiffness * mgl;
    let limit = params.ankle_torque_limit * mgl;
    let knee = limit / k;
    let x = lean.abs();
    if x <= knee {
        0.5 * k * x * x
    } else {
        0.5 * k * knee * knee + limit * (x - knee)
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if !a.is_finite() {
        return 0.0;
    }
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1.0 / 60.0;

    #[test]
    fn angle_normalization() {
        use std::f64::consts::PI;
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_angle(0.25), 0.25);
    }

    #[test]
    fn full_assist_holds_zero_action_upright() {
        let p = BodyParams::default();
        let s = CurriculumSchedule::default();
        let mut body = RobotBody::standing(&p, [0.0, 0.0], 0.0);
        body.lean = 0.05;
        for i in 0..2000 {
            body.tick(&p, &s, 1.0, &[0.0; ACTION_DIM], DT);
            assert!(body.upright, "fell at tick {i}, lean {}", body.lean);
        }
    }

    #[test]
    fn no_assist_zero_action_falls() {
        let p = BodyParams::default();
        let s = CurriculumSchedule::default();
        let mut body = RobotBody::standing(&p, [0.0, 0.0], 0.0);
        body.lean = 0.02;
        let fell = (0..600).any(|_| {
            body.tick(&p, &s, 0.0, &[0.0; ACTION_DIM], DT);
            !body.upright
        });
        assert!(fell);
    }

    #[test]
    fn energy_is_non_increasing_without_assist() {
        let p = BodyParams::default();
        let s = CurriculumSchedule::default();
        let mut body = RobotBody::standing(&p, [0.0, 0.0], 0.0);
        body.lean = 0.01;
        body.lean_rate = 0.2;
        let mut prev = body.mechanical_energy(&p, s.gravity);
        while body.upright {
            body.tick(&p, &s, 0.0, &[0.0; ACTION_DIM], DT);
            let e = body.mechanical_energy(&p, s.gravity);
            // Semi-implicit Euler tolerance: O(dt²) per tick relative to m g L.
            assert!(e <= prev + 1e-3 * p.mass * s.gravity * p.leg_length * DT * DT * 100.0, "{prev} -> {e}");
            prev = e;
        }
    }

    #[test]
    fn step_moves_foot_forward_and_resets_lean() {
        let p = BodyParams::default();
        let s = CurriculumSchedule::default();
        let mut body = RobotBody::standing(&p, [0.0, 0.0], 0.0);
        body.lean = 0.2;
        body.lean_rate = 1.0;
        body.tick(&p, &s, 1.0, &[0.0, 0.4, 1.0, 0.0], DT);
        assert!(body.swing.is_some());
        for _ in 1..p.swing_ticks {
            body.tick(&p, &s, 1.0, &[0.0, 0.4, 0.0, 0.0], DT);
        }
        let torso_before = body.torso(&p);
        body.tick(&p, &s, 1.0, &[0.0, 0.4, 0.0, 0.0], DT);
        assert_eq!(body.steps_taken, 1);
        assert!(body.foot[0] > torso_before[0]);
        assert!(body.lean < 0.0);
    }
}
