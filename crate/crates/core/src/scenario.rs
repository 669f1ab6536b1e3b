//! Declarative scenario description: organizations, users, robots, tasks,
//! load profiles and ledger parameters.
//!
//! A [`Scenario`] fully determines a run: all randomness (key generation,
//! anything seeded) flows from its single `seed`. The struct serializes to
//! a flat TOML document, which is the on-disk scenario format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::AttributeName;
use crate::contract::OperationMode;
use crate::ledger::OrderingConfig;
use crate::sim::{Arena, ControllerGains, Pose};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {}", problems.join("; "))]
    Invalid { problems: Vec<String> },
    #[error("scenario run failed: {0}")]
    Run(String),
}

/// Whether the contract's conflict-resolution gate is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gating {
    On,
    Off,
}

impl Gating {
    pub fn is_on(self) -> bool {
        matches!(self, Gating::On)
    }
}

impl std::str::FromStr for Gating {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "on" => Ok(Gating::On),
            "off" => Ok(Gating::Off),
            other => Err(format!("gating must be \"on\" or \"off\", got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgSpec {
    pub name: String,
    /// Subject id of the organization's administrator.
    pub admin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: String,
    pub org: String,
    pub attributes: Vec<AttributeName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub name: String,
    pub mode: OperationMode,
    pub required_attribute: AttributeName,
    pub initial_pose: Pose,
}

/// A task `T = (user, robot, waypoints)`; the robot must traverse the
/// waypoints in order once the user is granted access.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub user: String,
    pub robot: String,
    pub waypoints: Vec<[f64; 2]>,
    /// When the user starts pursuing the task on the virtual clock.
    #[serde(default)]
    pub start_ms: f64,
}

/// A headless publisher for throughput experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub user: String,
    pub robot: String,
    pub rate_hz: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub start_ms: f64,
}

/// The synthetic localization service: publishes every mobile robot's true
/// pose on an open-mode service asset at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSpec {
    /// Name of the open-mode service asset poses are published on.
    pub robot: String,
    pub rate_hz: f64,
}

impl Default for LocalizationSpec {
    fn default() -> Self {
        Self {
            robot: "optitrack".to_string(),
            rate_hz: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub gating: Gating,
    pub duration_s: f64,
    #[serde(default)]
    pub arena: Arena,
    pub organizations: Vec<OrgSpec>,
    pub users: Vec<UserSpec>,
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub load: Vec<LoadSpec>,
    #[serde(default)]
    pub ledger: OrderingConfig,
    #[serde(default)]
    pub controller: ControllerGains,
    #[serde(default)]
    pub localization: Option<LocalizationSpec>,
}

impl Scenario {
    /// Validate cross-references and numeric ranges, collecting every
    /// offending field rather than stopping at the first.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        let check_unique = |names: Vec<&str>, what: &str, problems: &mut Vec<String>| {
            let mut seen = std::collections::BTreeSet::new();
            for n in names {
                if !seen.insert(n) {
                    problems.push(format!("duplicate {what} {n:?}"));
                }
            }
        };
        check_unique(
            self.organizations.iter().map(|o| o.name.as_str()).collect(),
            "organization",
            &mut problems,
        );
        check_unique(self.users.iter().map(|u| u.id.as_str()).collect(), "user", &mut problems);
        check_unique(
            self.robots.iter().map(|r| r.name.as_str()).collect(),
            "robot",
            &mut problems,
        );

        if self.organizations.is_empty() {
            problems.push("organizations must be non-empty".into());
        }
        if !(self.duration_s > 0.0) {
            problems.push("duration_s must be > 0".into());
        }
        if let Err(e) = self.ledger.validate() {
            problems.push(e);
        }

        let org_exists = |name: &str| self.organizations.iter().any(|o| o.name == name);
        let user_exists = |id: &str| self.users.iter().any(|u| u.id == id);
        let robot_of = |name: &str| self.robots.iter().find(|r| r.name == name);

        for user in &self.users {
            if !org_exists(&user.org) {
                problems.push(format!("user {:?} references unknown org {:?}", user.id, user.org));
            }
        }
        for robot in &self.robots {
            // Robot names double as attribute names (pose-access gating,
            // conventional required attributes), so they share the pattern.
            if AttributeName::new(robot.name.as_str()).is_err() {
                problems.push(format!(
                    "robot name {:?} must match [a-z0-9_.-]+",
                    robot.name
                ));
            }
            let p = &robot.initial_pose;
            if !self.arena.contains(p.x, p.y) {
                problems.push(format!(
                    "robot {:?} initial pose ({}, {}) outside the {}x{} arena",
                    robot.name, p.x, p.y, self.arena.width, self.arena.depth
                ));
            }
        }
        for (i, task) in self.tasks.iter().enumerate() {
            if !user_exists(&task.user) {
                problems.push(format!("task {i} references unknown user {:?}", task.user));
            }
            match robot_of(&task.robot) {
                None => problems.push(format!("task {i} references unknown robot {:?}", task.robot)),
                Some(r) if r.mode != OperationMode::Exclusive => {
                    problems.push(format!("task {i} targets non-exclusive robot {:?}", task.robot))
                }
                Some(_) => {}
            }
            if task.waypoints.is_empty() {
                problems.push(format!("task {i} has no waypoints"));
            }
            for wp in &task.waypoints {
                if !self.arena.contains(wp[0], wp[1]) {
                    problems.push(format!("task {i} waypoint ({}, {}) outside arena", wp[0], wp[1]));
                }
            }
        }
        for (i, load) in self.load.iter().enumerate() {
            if !user_exists(&load.user) {
                problems.push(format!("load {i} references unknown user {:?}", load.user));
            }
            if robot_of(&load.robot).is_none() {
                problems.push(format!("load {i} references unknown robot {:?}", load.robot));
            }
            if !(load.rate_hz > 0.0) {
                problems.push(format!("load {i} rate_hz must be > 0"));
            }
            if !(load.duration_s > 0.0) {
                problems.push(format!("load {i} duration_s must be > 0"));
            }
        }
        if let Some(loc) = &self.localization {
            if !(loc.rate_hz > 0.0) {
                problems.push("localization.rate_hz must be > 0".into());
            }
            match robot_of(&loc.robot) {
                None => problems.push(format!(
                    "localization references unknown robot {:?}",
                    loc.robot
                )),
                Some(r) if r.mode != OperationMode::Open => problems.push(format!(
                    "localization service {:?} must be an open-mode asset",
                    loc.robot
                )),
                Some(_) => {}
            }
        }
        if !self.tasks.is_empty() && self.localization.is_none() {
            problems.push("tasks require a localization service for pose feedback".into());
        }
        if !(self.controller.command_rate_hz > 0.0) {
            problems.push("controller.command_rate_hz must be > 0".into());
        }
        if !(self.controller.arrival_radius > 0.0) {
            problems.push("controller.arrival_radius must be > 0".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid { problems })
        }
    }
}

/// Canned scenarios used by tests, the benchmark suite and `corral run`
/// demos.
pub mod fixtures {
    use super::*;

    /// Two users, one exclusive robot, two three-waypoint tasks inside the
    /// 8 m x 9 m arena. The second task arrives while the first is running,
    /// so with gating on the robot finishes task A before starting task B;
    /// with gating off both command streams interleave.
    pub fn two_task(gating: Gating) -> Scenario {
        Scenario {
            seed: 42,
            gating,
            duration_s: 120.0,
            arena: Arena::default(),
            organizations: vec![
                OrgSpec {
                    name: "Org1".into(),
                    admin: "admin1".into(),
                },
                OrgSpec {
                    name: "Org2".into(),
                    admin: "admin2".into(),
                },
            ],
            users: vec![
                UserSpec {
                    id: "salma".into(),
                    org: "Org1".into(),
                    attributes: vec![
                        "turtlebot4".parse().unwrap(),
                        "husky".parse().unwrap(),
                        "optitrack".parse().unwrap(),
                    ],
                },
                UserSpec {
                    id: "farhad".into(),
                    org: "Org1".into(),
                    attributes: vec!["turtlebot4".parse().unwrap(), "optitrack".parse().unwrap()],
                },
            ],
            robots: vec![
                RobotSpec {
                    name: "turtlebot4".into(),
                    mode: OperationMode::Exclusive,
                    required_attribute: "turtlebot4".parse().unwrap(),
                    initial_pose: Pose::new(1.0, 1.0, 0.0),
                },
                RobotSpec {
                    name: "optitrack".into(),
                    mode: OperationMode::Open,
                    required_attribute: "optitrack-publisher".parse().unwrap(),
                    initial_pose: Pose::new(0.0, 0.0, 0.0),
                },
            ],
            tasks: vec![
                Task {
                    user: "salma".into(),
                    robot: "turtlebot4".into(),
                    waypoints: vec![[3.0, 2.0], [5.0, 3.0], [7.0, 4.0]],
                    start_ms: 1500.0,
                },
                Task {
                    user: "farhad".into(),
                    robot: "turtlebot4".into(),
                    waypoints: vec![[6.0, 6.0], [4.0, 7.0], [2.0, 8.0]],
                    start_ms: 6000.0,
                },
            ],
            load: vec![],
            ledger: OrderingConfig::default(),
            controller: ControllerGains::default(),
            localization: Some(LocalizationSpec::default()),
        }
    }

    /// Single-user single-task variant of [`two_task`]; useful to show that
    /// gating is a no-op without contention.
    pub fn single_task(gating: Gating) -> Scenario {
        let mut scenario = two_task(gating);
        scenario.tasks.truncate(1);
        scenario.duration_s = 60.0;
        scenario
    }
}
