//! Kinematic multi-robot harness.
//!
//! [`run_scenario`] advances a single virtual clock in fixed control-period
//! ticks. Per tick, in order: the ledger pipeline is driven forward,
//! committed messages are delivered, the localization service publishes
//! poses, task controllers act (acquire / command / release), load
//! publishers fire, and robot kinematics integrate one step. The round-robin
//! order is fixed, so identical scenarios and seeds produce bit-identical
//! results.
//!
//! Command and feedback paths both traverse the broker, so every control
//! loop sees the ledger's commit latency.

mod controller;
mod kinematics;
mod metrics;

pub use controller::{simulate_direct, ControllerGains, DelayedChannel, WaypointController};
pub use kinematics::{normalize_angle, Arena, Pose, UnicycleRobot};
pub use metrics::{
    latency_csv, linear_slope, percentile, trajectory_csv, visits_csv, yaw_metrics, LatencyRecord,
    TrajectorySample, VisitRecord, YawMetrics,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::broker::{self, Subscription};
use crate::contract::{
    robot_key, OperationMode, RobotContract, RobotDescriptor, FN_ACQUIRE, FN_RELEASE, FN_SET,
    FN_SETUP,
};
use crate::identity::{AttributeName, CaKeyring, Certificate, CertificateAuthority};
use crate::ledger::{SimLedger, TxId, TxStatus};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("user {0:?} lacks the attribute required to subscribe to poses")]
    PoseAccessDenied(String),
}

/// Velocity command payload carried through the broker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmdMsg {
    pub v: f64,
    pub w: f64,
}

impl CmdMsg {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("command serializes")
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        serde_json::from_slice(bytes).ok()
    }
}

/// Pose sample payload published by the localization service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub robot: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PoseMsg {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("pose serializes")
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        serde_json::from_slice(bytes).ok()
    }
}

/// Synthetic motion-capture service: publishes every tracked robot's true
/// pose on an open-mode service asset at a fixed rate, through the broker
/// and therefore subject to ledger latency.
pub struct LocalizationService {
    service_asset: String,
    cert: Certificate,
    period_ms: f64,
    next_ms: f64,
}

impl LocalizationService {
    pub fn new(service_asset: impl Into<String>, cert: Certificate, rate_hz: f64) -> Result<Self, SimError> {
        if !(rate_hz > 0.0) {
            return Err(SimError::NonPositive("localization rate"));
        }
        Ok(Self {
            service_asset: service_asset.into(),
            cert,
            period_ms: 1000.0 / rate_hz,
            next_ms: 0.0,
        })
    }

    /// Publish one pose sample per robot when due at `now_ms`; a stale
    /// sample is dropped rather than caught up. Rejections (e.g. the
    /// service asset not yet committed during warm-up) are swallowed.
    pub fn tick(&mut self, ledger: &mut SimLedger, robots: &[&UnicycleRobot], now_ms: f64) {
        if self.next_ms > now_ms {
            return;
        }
        for robot in robots {
            let msg = PoseMsg {
                robot: robot.robot_id.clone(),
                x: robot.pose.x,
                y: robot.pose.y,
                theta: robot.pose.theta,
            };
            let _ = broker::publish(ledger, &self.cert, &self.service_asset, &msg.encode(), now_ms);
        }
        while self.next_ms <= now_ms {
            self.next_ms += self.period_ms;
        }
    }
}

/// Subscribe to the localization stream. Pose access is attribute-gated:
/// the subscriber must hold the attribute named after the service asset.
pub fn subscribe_poses(
    ledger: &mut SimLedger,
    subscriber: &Certificate,
    service_asset: &str,
) -> Result<Subscription, SimError> {
    let attr = AttributeName::new(service_asset)
        .map_err(|_| SimError::PoseAccessDenied(subscriber.subject_id.clone()))?;
    if !subscriber.has_attribute(&attr) {
        return Err(SimError::PoseAccessDenied(subscriber.subject_id.clone()));
    }
    broker::subscribe(ledger, service_asset)
        .map_err(|_| SimError::PoseAccessDenied(subscriber.subject_id.clone()))
}

/// Aggregate verdicts of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    /// Command deliveries per second over the run.
    pub delivered_hz: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    /// True iff tasks visited all waypoints in declared task order.
    pub waypoint_order_ok: bool,
    /// Population variance of the yaw rate, per driven robot.
    pub yaw_rate_variance: Vec<(String, f64)>,
}

/// Everything captured during a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub trajectories: Vec<TrajectorySample>,
    /// One record per committed message (commands and poses).
    pub latencies: Vec<LatencyRecord>,
    pub visits: Vec<VisitRecord>,
    /// Command deliveries bucketed per virtual second.
    pub delivered_per_second: Vec<(u64, usize)>,
    pub block_log: String,
    pub summary: ScenarioSummary,
}

impl ScenarioResult {
    /// Pose-feedback round-trip latencies (localization messages only).
    pub fn pose_latencies(&self, service_asset: &str) -> Vec<f64> {
        self.latencies
            .iter()
            .filter(|r| r.robot_id == service_asset)
            .map(|r| r.latency_ms())
            .collect()
    }

    /// Command round-trip latencies (everything but the service asset).
    pub fn command_latencies(&self, service_asset: &str) -> Vec<f64> {
        self.latencies
            .iter()
            .filter(|r| r.robot_id != service_asset)
            .map(|r| r.latency_ms())
            .collect()
    }
}

// Acquisition starts this far ahead of a task's start time so the grant
// round trip is usually paid before operation is due to begin.
const ACQUIRE_LEAD_MS: f64 = 1000.0;
// Back-off between acquisition attempts while the robot is held.
const ACQUIRE_RETRY_MS: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum OpState {
    Waiting,
    AcquirePending(TxId),
    Backoff(f64),
    Operating,
    ReleasePending(TxId),
    Done,
}

struct TaskRunner {
    cert: Certificate,
    controller: WaypointController,
    state: OpState,
    start_ms: f64,
    gated: bool,
    believed: Option<Pose>,
    pose_sub: Option<Subscription>,
    wants_poses: bool,
    sent_final_stop: bool,
}

impl TaskRunner {
    fn robot_id(&self) -> &str {
        &self.controller.robot_id
    }

    fn submit_acquire(&mut self, ledger: &mut SimLedger, t: f64) {
        let args = vec![self.robot_id().to_string()];
        self.state = match ledger.submit(FN_ACQUIRE, args, &self.cert, t) {
            Ok(tx) => OpState::AcquirePending(tx),
            // Asset not committed yet or transient rejection: retry later.
            Err(_) => OpState::Backoff(t + ACQUIRE_RETRY_MS),
        };
    }

    fn step(&mut self, ledger: &mut SimLedger, t: f64) {
        match self.state {
            OpState::Waiting => {
                if self.gated {
                    if t >= self.start_ms - ACQUIRE_LEAD_MS {
                        self.submit_acquire(ledger, t);
                    }
                } else if t >= self.start_ms {
                    self.state = OpState::Operating;
                }
            }
            OpState::AcquirePending(tx) => {
                let record = ledger.record(tx);
                match record.status {
                    TxStatus::Simulated => {
                        // A simulated "false" is a definitive denial; only
                        // a "true" needs to await commit validation.
                        if record.response.as_deref() == Some(b"false") {
                            self.state = OpState::Backoff(t + ACQUIRE_RETRY_MS);
                        }
                    }
                    TxStatus::Committed => {
                        if record.response.as_deref() == Some(b"true") {
                            self.state = OpState::Operating;
                        } else {
                            self.state = OpState::Backoff(t + ACQUIRE_RETRY_MS);
                        }
                    }
                    TxStatus::Invalidated => {
                        // Lost the race against a concurrent acquire.
                        self.state = OpState::Backoff(t + ACQUIRE_RETRY_MS);
                    }
                    TxStatus::Rejected => {
                        self.state = OpState::Backoff(t + ACQUIRE_RETRY_MS);
                    }
                }
            }
            OpState::Backoff(until) => {
                if t >= until {
                    self.submit_acquire(ledger, t);
                }
            }
            OpState::Operating => {
                if t < self.start_ms {
                    return;
                }
                if self.controller.is_complete() {
                    if !self.sent_final_stop {
                        // Park the robot before handing it back.
                        let stop = CmdMsg { v: 0.0, w: 0.0 }.encode();
                        let _ = broker::publish(ledger, &self.cert, &self.robot_id().to_string(), &stop, t);
                        self.sent_final_stop = true;
                    }
                    if self.gated {
                        let args = vec![self.robot_id().to_string()];
                        self.state = match ledger.submit(FN_RELEASE, args, &self.cert, t) {
                            Ok(tx) => OpState::ReleasePending(tx),
                            Err(_) => OpState::Done,
                        };
                    } else {
                        self.state = OpState::Done;
                    }
                    return;
                }
                let Some(pose) = self.believed else { return };
                let (v, w) = self.controller.control_step(&pose);
                if !self.controller.is_complete() {
                    let cmd = CmdMsg { v, w }.encode();
                    let _ = broker::publish(ledger, &self.cert, &self.robot_id().to_string(), &cmd, t);
                }
            }
            OpState::ReleasePending(tx) => match ledger.record(tx).status {
                TxStatus::Simulated => {}
                TxStatus::Committed | TxStatus::Rejected => self.state = OpState::Done,
                TxStatus::Invalidated => {
                    let args = vec![self.robot_id().to_string()];
                    self.state = match ledger.submit(FN_RELEASE, args, &self.cert, t) {
                        Ok(tx) => OpState::ReleasePending(tx),
                        Err(_) => OpState::Done,
                    };
                }
            },
            OpState::Done => {}
        }
    }
}

struct LoadRunner {
    cert: Certificate,
    robot_id: String,
    period_ms: f64,
    next_ms: f64,
    end_ms: f64,
}

impl LoadRunner {
    fn step(&mut self, ledger: &mut SimLedger, t: f64) {
        while self.next_ms <= t && self.next_ms < self.end_ms {
            let payload = CmdMsg { v: 0.0, w: 0.0 }.encode();
            let _ = broker::publish(ledger, &self.cert, &self.robot_id, &payload, self.next_ms.max(t));
            self.next_ms += self.period_ms;
        }
    }
}

/// Run a validated scenario to completion and collect its metrics.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult, ScenarioError> {
    scenario.validate()?;

    // Identities: one CA per organization, all registered with the ledger.
    let mut keyring = CaKeyring::new();
    let mut cas = BTreeMap::new();
    for org in &scenario.organizations {
        let ca = CertificateAuthority::from_seed(&org.name, scenario.seed)
            .map_err(|e| ScenarioError::Run(e.to_string()))?;
        keyring.register_ca(&ca);
        cas.insert(org.name.clone(), ca);
    }
    let issue = |org: &str, subject: &str, attrs: Vec<String>| -> Result<Certificate, ScenarioError> {
        cas.get(org)
            .ok_or_else(|| ScenarioError::Run(format!("no CA for {org:?}")))?
            .issue(subject, attrs.iter().map(|s| s.as_str()))
            .map_err(|e| ScenarioError::Run(e.to_string()))
    };

    let admin_org = &scenario.organizations[0];
    let admin_cert = issue(&admin_org.name, &admin_org.admin, vec!["admin".into()])?;
    let mut user_certs = BTreeMap::new();
    for user in &scenario.users {
        let attrs = user.attributes.iter().map(|a| a.as_str().to_string()).collect();
        user_certs.insert(user.id.clone(), issue(&user.org, &user.id, attrs)?);
    }

    let contract = RobotContract::gated(scenario.gating.is_on()).with_admin_org(&admin_org.name);
    let mut ledger = SimLedger::new(Box::new(contract), keyring, scenario.ledger);

    // Robot assets. Driven (exclusive) robots get kinematics; open-mode
    // assets are pure services.
    let descriptors: Vec<RobotDescriptor> = scenario
        .robots
        .iter()
        .map(|r| match r.mode {
            OperationMode::Exclusive => RobotDescriptor {
                name: r.name.clone(),
                sub_topic: format!("/{}/cmd_vel", r.name),
                pub_topic: format!("/{}/odom", r.name),
                mode: r.mode,
                required_attribute: r.required_attribute.clone(),
            },
            _ => RobotDescriptor {
                name: r.name.clone(),
                sub_topic: String::new(),
                pub_topic: format!("/{}/poses", r.name),
                mode: r.mode,
                required_attribute: r.required_attribute.clone(),
            },
        })
        .collect();
    let setup_json = serde_json::to_string(&descriptors).expect("descriptors serialize");
    ledger
        .submit(FN_SETUP, vec![setup_json], &admin_cert, 0.0)
        .map_err(|e| ScenarioError::Run(format!("setup failed: {e}")))?;

    let mut robots: Vec<UnicycleRobot> = scenario
        .robots
        .iter()
        .filter(|r| r.mode == OperationMode::Exclusive)
        .map(|r| {
            UnicycleRobot::new(
                r.name.clone(),
                r.initial_pose,
                scenario.controller.v_max,
                scenario.controller.w_max,
            )
        })
        .collect();
    let mut cmd_subs: Vec<Option<Subscription>> = robots.iter().map(|_| None).collect();

    // The localization service holds the publish attribute of its asset.
    let mut localization = match &scenario.localization {
        Some(spec) => {
            let asset = scenario
                .robots
                .iter()
                .find(|r| r.name == spec.robot)
                .expect("validated localization asset");
            let service_org = scenario
                .organizations
                .last()
                .expect("validated organizations")
                .name
                .clone();
            let cert = issue(
                &service_org,
                &format!("{}-svc", spec.robot),
                vec![asset.required_attribute.as_str().to_string()],
            )?;
            Some(
                LocalizationService::new(spec.robot.clone(), cert, spec.rate_hz)
                    .map_err(|e| ScenarioError::Run(e.to_string()))?,
            )
        }
        None => None,
    };
    let service_asset = scenario
        .localization
        .as_ref()
        .map(|l| l.robot.clone())
        .unwrap_or_default();

    let mut tasks: Vec<TaskRunner> = scenario
        .tasks
        .iter()
        .map(|task| {
            let user = scenario.users.iter().find(|u| u.id == task.user).expect("validated user");
            let wants_poses = scenario
                .localization
                .as_ref()
                .map(|l| {
                    AttributeName::new(l.robot.as_str())
                        .map(|attr| user.attributes.contains(&attr))
                        .unwrap_or(false)
                })
                .unwrap_or(false);
            TaskRunner {
                cert: user_certs[&task.user].clone(),
                controller: WaypointController::new(
                    task.user.clone(),
                    task.robot.clone(),
                    task.waypoints.clone(),
                    scenario.controller,
                ),
                state: OpState::Waiting,
                start_ms: task.start_ms,
                gated: scenario.gating.is_on(),
                believed: None,
                pose_sub: None,
                wants_poses,
                sent_final_stop: false,
            }
        })
        .collect();

    let mut loads: Vec<LoadRunner> = scenario
        .load
        .iter()
        .map(|l| LoadRunner {
            cert: user_certs[&l.user].clone(),
            robot_id: l.robot.clone(),
            period_ms: 1000.0 / l.rate_hz,
            next_ms: l.start_ms,
            end_ms: l.start_ms + l.duration_s * 1000.0,
        })
        .collect();

    let dt_ms = 1000.0 / scenario.controller.command_rate_hz;
    let dt_s = dt_ms / 1000.0;
    let ticks = (scenario.duration_s * 1000.0 / dt_ms).ceil() as u64;

    let mut trajectories = Vec::new();
    let mut visited: Vec<Vec<Option<VisitRecord>>> = scenario
        .tasks
        .iter()
        .map(|t| vec![None; t.waypoints.len()])
        .collect();
    let mut delivered_per_second: BTreeMap<u64, usize> = BTreeMap::new();

    for k in 0..ticks {
        let t = k as f64 * dt_ms;
        ledger.advance_to(t);

        // Attach subscriptions once the assets exist.
        for (robot, sub) in robots.iter().zip(cmd_subs.iter_mut()) {
            if sub.is_none() && ledger.read_state(&robot_key(&robot.robot_id)).is_some() {
                *sub = broker::subscribe(&mut ledger, &robot.robot_id).ok();
            }
        }
        if !service_asset.is_empty() && ledger.read_state(&robot_key(&service_asset)).is_some() {
            for task in tasks.iter_mut() {
                if task.pose_sub.is_none() && task.wants_poses {
                    task.pose_sub = subscribe_poses(&mut ledger, &task.cert, &service_asset).ok();
                }
            }
        }

        // Deliver pose feedback to controllers.
        for task in tasks.iter_mut() {
            if let Some(sub) = &task.pose_sub {
                for msg in broker::poll(&mut ledger, sub) {
                    if let Some(pose) = PoseMsg::decode(&msg.payload) {
                        if pose.robot == task.robot_id() {
                            task.believed = Some(Pose::new(pose.x, pose.y, pose.theta));
                        }
                    }
                }
            }
        }

        // Deliver committed commands to robots, in commit order.
        for (robot, sub) in robots.iter_mut().zip(cmd_subs.iter()) {
            if let Some(sub) = sub {
                for msg in broker::poll(&mut ledger, sub) {
                    if let Some(cmd) = CmdMsg::decode(&msg.payload) {
                        let _ = robot.apply_command(cmd.v, cmd.w, &msg.publisher);
                        *delivered_per_second.entry((msg.deliver_ms / 1000.0) as u64).or_default() += 1;
                    }
                }
            }
        }

        // Sense before acting: localization first keeps pose latency flat.
        if let Some(loc) = localization.as_mut() {
            let tracked: Vec<&UnicycleRobot> = robots.iter().collect();
            loc.tick(&mut ledger, &tracked, t);
        }
        for task in tasks.iter_mut() {
            task.step(&mut ledger, t);
        }
        for load in loads.iter_mut() {
            load.step(&mut ledger, t);
        }

        // Integrate kinematics and record.
        for robot in robots.iter_mut() {
            robot
                .step(&scenario.arena, dt_s)
                .map_err(|e| ScenarioError::Run(e.to_string()))?;
            trajectories.push(TrajectorySample {
                t_ms: t,
                robot_id: robot.robot_id.clone(),
                pose: robot.pose,
                last_cmd_publisher: robot.last_cmd_publisher.clone(),
            });
        }

        // Waypoint visits are judged on true poses, first entry only.
        for (task_index, task) in scenario.tasks.iter().enumerate() {
            let Some(robot) = robots.iter().find(|r| r.robot_id == task.robot) else {
                continue;
            };
            for (wp_index, wp) in task.waypoints.iter().enumerate() {
                if visited[task_index][wp_index].is_none() {
                    let error = robot.pose.distance_to(*wp);
                    if error <= scenario.controller.arrival_radius {
                        visited[task_index][wp_index] = Some(VisitRecord {
                            task_index,
                            waypoint_index: wp_index,
                            t_ms: t,
                            error_m: error,
                        });
                    }
                }
            }
        }
    }

    // Let in-flight transactions finish for complete logs and latency data.
    ledger.drain();

    let mut visits: Vec<VisitRecord> = visited.into_iter().flatten().flatten().collect();
    visits.sort_by(|a, b| a.t_ms.partial_cmp(&b.t_ms).expect("finite times"));

    let latencies: Vec<LatencyRecord> = ledger
        .records()
        .iter()
        .filter(|r| r.function == FN_SET && r.status == TxStatus::Committed)
        .map(|r| LatencyRecord {
            tx_id: r.tx_id.to_string(),
            robot_id: r.args.first().cloned().unwrap_or_default(),
            publisher: r.submitter.subject_id.clone(),
            publish_ms: r.submit_ms,
            commit_ms: r.commit_ms.expect("committed"),
        })
        .collect();

    let waypoint_order_ok = {
        let expected: Vec<(usize, usize)> = scenario
            .tasks
            .iter()
            .enumerate()
            .flat_map(|(i, t)| (0..t.waypoints.len()).map(move |j| (i, j)))
            .collect();
        let actual: Vec<(usize, usize)> =
            visits.iter().map(|v| (v.task_index, v.waypoint_index)).collect();
        actual == expected
    };

    let mut yaw_rate_variance = Vec::new();
    for robot in &robots {
        let samples: Vec<(f64, f64)> = trajectories
            .iter()
            .filter(|s| s.robot_id == robot.robot_id)
            .map(|s| (s.t_ms, s.pose.theta))
            .collect();
        if samples.len() >= 2 {
            let m = yaw_metrics(&samples).map_err(|e| ScenarioError::Run(e.to_string()))?;
            yaw_rate_variance.push((robot.robot_id.clone(), m.rate_variance));
        }
    }

    let mut command_latencies: Vec<f64> = latencies
        .iter()
        .filter(|r| r.robot_id != service_asset)
        .map(|r| r.latency_ms())
        .collect();
    command_latencies.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let summary = ScenarioSummary {
        delivered_hz: command_latencies.len() as f64 / scenario.duration_s,
        p50_ms: percentile(&command_latencies, 50.0),
        p95_ms: percentile(&command_latencies, 95.0),
        p99_ms: percentile(&command_latencies, 99.0),
        waypoint_order_ok,
        yaw_rate_variance,
    };

    Ok(ScenarioResult {
        trajectories,
        latencies,
        visits,
        delivered_per_second: delivered_per_second.into_iter().collect(),
        block_log: ledger.export_block_log(),
        summary,
    })
}
