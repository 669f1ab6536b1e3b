//! Planar unicycle kinematics inside a bounded arena.

use serde::{Deserialize, Serialize};

use super::SimError;

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (theta + std::f64::consts::PI).rem_euclid(two_pi);
    if wrapped == 0.0 {
        std::f64::consts::PI
    } else {
        wrapped - std::f64::consts::PI
    }
}

/// Planar pose; `theta` is kept normalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn distance_to(&self, target: [f64; 2]) -> f64 {
        (target[0] - self.x).hypot(target[1] - self.y)
    }

    pub fn bearing_to(&self, target: [f64; 2]) -> f64 {
        (target[1] - self.y).atan2(target[0] - self.x)
    }
}

/// The workspace: an 8 m x 9 m floor (height is carried for completeness
/// but unused by the planar model). Positions are clamped to the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Arena {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            width: 8.0,
            depth: 9.0,
            height: 5.0,
        }
    }
}

impl Arena {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.depth).contains(&y)
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(0.0, self.width), y.clamp(0.0, self.depth))
    }
}

/// A differential-drive robot reduced to the unicycle model: linear speed
/// `v` and angular speed `w` drive `(x, y, theta)`. The robot holds its
/// last command between deliveries.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleRobot {
    pub robot_id: String,
    pub pose: Pose,
    pub v: f64,
    pub w: f64,
    pub v_max: f64,
    pub w_max: f64,
    /// Subject id of whoever published the command currently applied.
    pub last_cmd_publisher: String,
}

impl UnicycleRobot {
    pub fn new(robot_id: impl Into<String>, pose: Pose, v_max: f64, w_max: f64) -> Self {
        Self {
            robot_id: robot_id.into(),
            pose,
            v: 0.0,
            w: 0.0,
            v_max,
            w_max,
            last_cmd_publisher: String::new(),
        }
    }

    /// Install a command, clamping it to the actuator limits.
    pub fn apply_command(&mut self, v: f64, w: f64, publisher: &str) -> Result<(), SimError> {
        if !v.is_finite() || !w.is_finite() {
            return Err(SimError::NonFinite("velocity command"));
        }
        self.v = v.clamp(-self.v_max, self.v_max);
        self.w = w.clamp(-self.w_max, self.w_max);
        self.last_cmd_publisher = publisher.to_string();
        Ok(())
    }

    /// Integrate one step of the current command:
    /// `x += v cos(theta) dt`, `y += v sin(theta) dt`, `theta += w dt`,
    /// normalized and clamped to the arena.
    pub fn step(&mut self, arena: &Arena, dt: f64) -> Result<Pose, SimError> {
        self.step_with(self.v, self.w, arena, dt)
    }

    /// Integrate one step of an explicit `(v, w)` command.
    pub fn step_with(&mut self, v: f64, w: f64, arena: &Arena, dt: f64) -> Result<Pose, SimError> {
        if !(dt > 0.0) {
            return Err(SimError::NonPositive("dt"));
        }
        if !v.is_finite() || !w.is_finite() || !dt.is_finite() {
            return Err(SimError::NonFinite("kinematic step"));
        }
        let v = v.clamp(-self.v_max, self.v_max);
        let w = w.clamp(-self.w_max, self.w_max);
        let x = self.pose.x + v * self.pose.theta.cos() * dt;
        let y = self.pose.y + v * self.pose.theta.sin() * dt;
        let theta = normalize_angle(self.pose.theta + w * dt);
        let (x, y) = arena.clamp(x, y);
        self.pose = Pose { x, y, theta };
        Ok(self.pose)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn robot(pose: Pose) -> UnicycleRobot {
        UnicycleRobot::new("r", pose, 0.31, 1.9)
    }

    #[test]
    fn zero_command_leaves_pose_unchanged() {
        let mut r = robot(Pose::new(2.0, 3.0, 0.7));
        let before = r.pose;
        r.step_with(0.0, 0.0, &Arena::default(), 0.1).unwrap();
        assert_eq!(r.pose, before);
    }

    #[test]
    fn axis_aligned_integration() {
        let mut r = UnicycleRobot::new("r", Pose::new(0.0, 0.0, 0.0), 2.0, 4.0);
        let pose = r.step_with(1.0, 0.0, &Arena::default(), 0.1).unwrap();
        assert!((pose.x - 0.1).abs() < 1e-12);
        assert_eq!(pose.y, 0.0);
        assert_eq!(pose.theta, 0.0);
    }

    #[test]
    fn pure_rotation_half_second_at_pi() {
        // theta = w * dt = pi * 0.5 = pi/2, closed form.
        let mut r = UnicycleRobot::new("r", Pose::new(0.0, 0.0, 0.0), 2.0, 4.0);
        let pose = r
            .step_with(0.0, std::f64::consts::PI, &Arena::default(), 0.5)
            .unwrap();
        assert!((pose.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(pose.x, 0.0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut r = robot(Pose::new(0.0, 0.0, 0.0));
        assert!(r.step_with(f64::NAN, 0.0, &Arena::default(), 0.1).is_err());
        assert!(r.apply_command(0.0, f64::INFINITY, "u").is_err());
        assert!(r.step_with(0.1, 0.0, &Arena::default(), 0.0).is_err());
    }

    #[test]
    fn positions_clamp_to_arena() {
        let arena = Arena::default();
        let mut r = UnicycleRobot::new("r", Pose::new(7.99, 1.0, 0.0), 10.0, 1.0);
        for _ in 0..100 {
            r.step_with(10.0, 0.0, &arena, 0.1).unwrap();
        }
        assert_eq!(r.pose.x, arena.width);
    }

    #[test]
    fn commands_clamp_to_limits() {
        let mut r = robot(Pose::new(0.0, 0.0, 0.0));
        r.apply_command(5.0, -12.0, "salma").unwrap();
        assert_eq!(r.v, 0.31);
        assert_eq!(r.w, -1.9);
        assert_eq!(r.last_cmd_publisher, "salma");
    }

    #[test]
    fn angle_normalization_lands_in_half_open_interval() {
        for k in -10..=10 {
            let theta = 0.9 + k as f64 * 2.0 * std::f64::consts::PI;
            assert!((normalize_angle(theta) - 0.9).abs() < 1e-9);
        }
        assert_eq!(normalize_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(normalize_angle(-std::f64::consts::PI), std::f64::consts::PI);
    }
}
