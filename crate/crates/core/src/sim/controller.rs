//! Proportional waypoint controller and delayed feedback plumbing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::kinematics::{normalize_angle, Arena, Pose, UnicycleRobot};
use super::SimError;

/// Controller parameters. Defaults suit a Turtlebot-class platform driven
/// through a ~300 ms feedback loop: slow enough to stay stable, fast enough
/// to reach waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    pub k_lin: f64,
    pub k_ang: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub arrival_radius: f64,
    pub command_rate_hz: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_lin: 0.8,
            k_ang: 2.0,
            v_max: 0.31,
            w_max: 1.9,
            arrival_radius: 0.1,
            command_rate_hz: 50.0,
        }
    }
}

/// Drives a robot through an ordered waypoint list with a proportional law:
///
/// * heading error `e = atan2(dy, dx) - theta`, normalized
/// * `w = clamp(k_ang * e)`
/// * `v = clamp(k_lin * distance) * max(0, cos e)` — forward speed fades
///   out as the heading error grows so the robot turns in place instead of
///   driving away from the target
///
/// The waypoint index only advances once the (possibly delayed) pose puts
/// the robot inside the arrival radius of the current target.
#[derive(Debug, Clone)]
pub struct WaypointController {
    pub owner: String,
    pub robot_id: String,
    waypoints: Vec<[f64; 2]>,
    next: usize,
    gains: ControllerGains,
}

impl WaypointController {
    pub fn new(
        owner: impl Into<String>,
        robot_id: impl Into<String>,
        waypoints: Vec<[f64; 2]>,
        gains: ControllerGains,
    ) -> Self {
        Self {
            owner: owner.into(),
            robot_id: robot_id.into(),
            waypoints,
            next: 0,
            gains,
        }
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn waypoints(&self) -> &[[f64; 2]] {
        &self.waypoints
    }

    /// Index of the waypoint currently targeted.
    pub fn next_index(&self) -> usize {
        self.next
    }

    pub fn is_complete(&self) -> bool {
        self.next >= self.waypoints.len()
    }

    /// One control step from the given pose feedback. Returns `(v, w)`;
    /// zero once the waypoint list is exhausted.
    pub fn control_step(&mut self, pose: &Pose) -> (f64, f64) {
        while let Some(&target) = self.waypoints.get(self.next) {
            if pose.distance_to(target) <= self.gains.arrival_radius {
                self.next += 1;
            } else {
                break;
            }
        }
        let Some(&target) = self.waypoints.get(self.next) else {
            return (0.0, 0.0);
        };
        let distance = pose.distance_to(target);
        let heading_error = normalize_angle(pose.bearing_to(target) - pose.theta);
        let w = (self.gains.k_ang * heading_error).clamp(-self.gains.w_max, self.gains.w_max);
        let v = (self.gains.k_lin * distance).clamp(0.0, self.gains.v_max)
            * heading_error.cos().max(0.0);
        (v, w)
    }
}

/// FIFO channel that releases items `delay_ms` after entry, in entry order.
#[derive(Debug, Clone)]
pub struct DelayedChannel<T> {
    delay_ms: f64,
    queue: VecDeque<(f64, T)>,
}

impl<T> DelayedChannel<T> {
    pub fn new(delay_ms: f64) -> Self {
        Self {
            delay_ms,
            queue: VecDeque::new(),
        }
    }

    pub fn push(&mut self, now_ms: f64, item: T) {
        self.queue.push_back((now_ms + self.delay_ms, item));
    }

    /// Items whose delay has elapsed by `now_ms`.
    pub fn pop_ready(&mut self, now_ms: f64) -> Vec<T> {
        let mut out = Vec::new();
        while self.queue.front().is_some_and(|(due, _)| *due <= now_ms) {
            out.push(self.queue.pop_front().unwrap().1);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Ledger-free closed loop: controller and robot wired through
/// [`DelayedChannel`]s. Used to check controller convergence independently
/// of the transaction pipeline, and handy for gain tuning.
pub fn simulate_direct(
    start: Pose,
    waypoints: Vec<[f64; 2]>,
    gains: ControllerGains,
    feedback_delay_ms: f64,
    command_delay_ms: f64,
    dt: f64,
    max_s: f64,
) -> Result<Vec<(f64, Pose)>, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositive("dt"));
    }
    let arena = Arena::default();
    let mut robot = UnicycleRobot::new("r", start, gains.v_max, gains.w_max);
    let mut controller = WaypointController::new("u", "r", waypoints, gains);
    let mut feedback: DelayedChannel<Pose> = DelayedChannel::new(feedback_delay_ms);
    let mut commands: DelayedChannel<(f64, f64)> = DelayedChannel::new(command_delay_ms);
    let mut believed: Option<Pose> = None;
    let mut trajectory = Vec::new();

    let steps = (max_s / dt).ceil() as usize;
    for k in 0..steps {
        let t_ms = k as f64 * dt * 1000.0;
        feedback.push(t_ms, robot.pose);
        if let Some(pose) = feedback.pop_ready(t_ms).pop() {
            believed = Some(pose);
        }
        if let Some(pose) = believed {
            let (v, w) = controller.control_step(&pose);
            commands.push(t_ms, (v, w));
        }
        if let Some((v, w)) = commands.pop_ready(t_ms).pop() {
            robot.apply_command(v, w, "u")?;
        }
        robot.step(&arena, dt)?;
        trajectory.push((t_ms, robot.pose));
        if controller.is_complete() {
            break;
        }
    }
    Ok(trajectory)
}
