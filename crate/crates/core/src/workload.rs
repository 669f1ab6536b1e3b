//! Randomized contention workloads and attack schedules.
//!
//! These drive the full ledger pipeline with interleaved acquire / release /
//! publish submissions so that many transactions are in flight at once and
//! commit validation has real conflicts to resolve. The run returns the
//! complete transaction history and final state; correctness judgments
//! (serial-replay equivalence, mutual exclusion) live with the callers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::contract::{
    OperationMode, RobotContract, RobotDescriptor, FN_ACQUIRE, FN_RELEASE, FN_SET, FN_SETUP,
};
use crate::identity::{CaKeyring, Certificate, CertificateAuthority};
use crate::ledger::{OrderingConfig, SimLedger, TransactionRecord, WorldState};
use crate::par;

/// Shape of a randomized contention workload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionConfig {
    pub users: usize,
    pub robots: usize,
    pub submissions: usize,
    pub seed: u64,
}

impl Default for ContentionConfig {
    fn default() -> Self {
        Self {
            users: 10,
            robots: 5,
            submissions: 1000,
            seed: 0,
        }
    }
}

/// Full history of one contention run.
pub struct ContentionRun {
    pub final_state: WorldState,
    pub records: Vec<TransactionRecord>,
    /// Names of the exclusive-mode robots in the fleet.
    pub exclusive_robots: Vec<String>,
}

fn robot_name(i: usize) -> String {
    format!("rb{i}")
}

/// Run a randomized interleaved acquire/release/set workload through the
/// ledger. Users hold random attribute subsets; submissions are spread over
/// virtual time with many transactions in flight, and rejected submissions
/// (missing attribute, unauthorized publish, bad timing) are part of the
/// workload.
pub fn run_contention(cfg: &ContentionConfig) -> ContentionRun {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    let ca = CertificateAuthority::from_seed("Org1", cfg.seed).expect("valid org");
    let mut keyring = CaKeyring::new();
    keyring.register_ca(&ca);
    let admin = ca.issue("admin1", ["admin"]).expect("admin cert");

    // Mostly exclusive robots, a few open services.
    let descriptors: Vec<RobotDescriptor> = (0..cfg.robots)
        .map(|i| {
            let name = robot_name(i);
            let mode = if i % 5 == 4 { OperationMode::Open } else { OperationMode::Exclusive };
            RobotDescriptor {
                name: name.clone(),
                sub_topic: format!("/{name}/cmd_vel"),
                pub_topic: format!("/{name}/odom"),
                mode,
                required_attribute: name.parse().expect("robot names are attributes"),
            }
        })
        .collect();
    let exclusive_robots: Vec<String> = descriptors
        .iter()
        .filter(|d| d.mode == OperationMode::Exclusive)
        .map(|d| d.name.clone())
        .collect();

    let users: Vec<Certificate> = (0..cfg.users)
        .map(|u| {
            let attrs: Vec<String> = (0..cfg.robots)
                .filter(|_| rng.gen_bool(0.6))
                .map(robot_name)
                .collect();
            ca.issue(&format!("user{u}"), attrs.iter().map(|s| s.as_str()))
                .expect("user cert")
        })
        .collect();

    let mut ledger = SimLedger::new(
        Box::new(RobotContract::new()),
        keyring,
        OrderingConfig::default(),
    );
    let setup = serde_json::to_string(&descriptors).expect("descriptors serialize");
    ledger.submit(FN_SETUP, vec![setup], &admin, 0.0).expect("setup accepted");

    let mut t = 0.0;
    for _ in 0..cfg.submissions {
        t += rng.gen_range(0.0..25.0);
        ledger.advance_to(t);
        let user = &users[rng.gen_range(0..users.len())];
        let robot = robot_name(rng.gen_range(0..cfg.robots));
        let roll: f64 = rng.gen();
        let result = if roll < 0.4 {
            ledger.submit(FN_ACQUIRE, vec![robot], user, t)
        } else if roll < 0.65 {
            ledger.submit(FN_RELEASE, vec![robot], user, t)
        } else {
            use base64::Engine as _;
            let payload = base64::engine::general_purpose::STANDARD.encode([rng.gen::<u8>()]);
            ledger.submit(FN_SET, vec![robot, payload], user, t)
        };
        let _ = result; // rejections are expected workload
    }
    ledger.drain();

    ContentionRun {
        final_state: ledger.state().clone(),
        records: ledger.records().to_vec(),
        exclusive_robots,
    }
}

/// Run [`run_contention`] for many seeds, in parallel when enabled.
pub fn run_contention_batch(base: ContentionConfig, seeds: impl IntoIterator<Item = u64>) -> Vec<ContentionRun> {
    let configs: Vec<ContentionConfig> = seeds.into_iter().map(|seed| ContentionConfig { seed, ..base }).collect();
    par::map_collect(configs, |cfg| run_contention(&cfg))
}

/// Sequential twin of [`run_contention_batch`] for lane comparisons.
pub fn run_contention_batch_seq(base: ContentionConfig, seeds: impl IntoIterator<Item = u64>) -> Vec<ContentionRun> {
    let configs: Vec<ContentionConfig> = seeds.into_iter().map(|seed| ContentionConfig { seed, ..base }).collect();
    par::map_collect_seq(configs, |cfg| run_contention(&cfg))
}

/// Outcome of one attacker publish attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackAttempt {
    pub t_ms: f64,
    /// Error message returned at submission, if any.
    pub rejection: Option<String>,
}

/// History of a scripted operator session with an interleaved attacker.
pub struct AttackRun {
    pub final_state: WorldState,
    pub records: Vec<TransactionRecord>,
    pub attacker: String,
    pub attempts: Vec<AttackAttempt>,
    /// Publishers of every message delivered to a subscriber on the robot.
    pub delivered_publishers: Vec<String>,
}

/// One legitimate operator works `rb0` (acquire, publish bursts, release,
/// repeat) while an attacker — holding the robot's attribute but never the
/// operatorship — fires `set` at random times. With `with_attacker` false
/// the identical schedule runs minus the attacker, which pins down what the
/// attacker is allowed to change: nothing.
pub fn run_attack_schedule(seed: u64, with_attacker: bool) -> AttackRun {
    use base64::Engine as _;
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_mul(2654435761).wrapping_add(17));

    let ca = CertificateAuthority::from_seed("Org1", seed).expect("valid org");
    let mut keyring = CaKeyring::new();
    keyring.register_ca(&ca);
    let admin = ca.issue("admin1", ["admin"]).expect("admin cert");
    let operator = ca.issue("operator", ["rb0"]).expect("operator cert");
    let attacker = ca.issue("attacker", ["rb0"]).expect("attacker cert");

    let mut ledger = SimLedger::new(
        Box::new(RobotContract::new()),
        keyring,
        OrderingConfig::default(),
    );
    let descriptor = RobotDescriptor::mobile("rb0").expect("descriptor");
    let setup = serde_json::to_string(&vec![descriptor]).expect("serializes");
    ledger.submit(FN_SETUP, vec![setup], &admin, 0.0).expect("setup accepted");
    ledger.advance_to(400.0);
    let sub = crate::broker::subscribe(&mut ledger, "rb0").ok();

    // Pre-generate the full schedule so the attacker-free run is identical
    // except for the attacker's own submissions.
    enum Step {
        Acquire(f64),
        Publish(f64),
        Release(f64),
        Attack(f64),
    }
    let mut schedule = Vec::new();
    let mut t = 500.0;
    for _ in 0..rng.gen_range(3..6) {
        schedule.push(Step::Acquire(t));
        t += 400.0;
        for _ in 0..rng.gen_range(5..30) {
            schedule.push(Step::Publish(t));
            t += rng.gen_range(15.0..40.0);
        }
        schedule.push(Step::Release(t));
        t += 400.0;
    }
    let end = t + 500.0;
    let mut attack_t = rng.gen_range(400.0..800.0);
    while attack_t < end {
        schedule.push(Step::Attack(attack_t));
        attack_t += rng.gen_range(20.0..200.0);
    }
    schedule.sort_by(|a, b| {
        let ta = match a {
            Step::Acquire(t) | Step::Publish(t) | Step::Release(t) | Step::Attack(t) => t,
        };
        let tb = match b {
            Step::Acquire(t) | Step::Publish(t) | Step::Release(t) | Step::Attack(t) => t,
        };
        ta.partial_cmp(tb).expect("finite schedule")
    });

    let payload = base64::engine::general_purpose::STANDARD.encode(b"cmd");
    let mut attempts = Vec::new();
    for step in schedule {
        match step {
            Step::Acquire(t) => {
                ledger.advance_to(t);
                let _ = ledger.submit(FN_ACQUIRE, vec!["rb0".into()], &operator, t);
            }
            Step::Publish(t) => {
                ledger.advance_to(t);
                let _ = ledger.submit(FN_SET, vec!["rb0".into(), payload.clone()], &operator, t);
            }
            Step::Release(t) => {
                ledger.advance_to(t);
                let _ = ledger.submit(FN_RELEASE, vec!["rb0".into()], &operator, t);
            }
            Step::Attack(t) => {
                if !with_attacker {
                    continue;
                }
                ledger.advance_to(t);
                let rejection = ledger
                    .submit(FN_SET, vec!["rb0".into(), payload.clone()], &attacker, t)
                    .err()
                    .map(|e| e.to_string());
                attempts.push(AttackAttempt { t_ms: t, rejection });
            }
        }
    }
    ledger.drain();

    let delivered_publishers = sub
        .map(|sub| {
            crate::broker::poll(&mut ledger, &sub)
                .into_iter()
                .map(|m| m.publisher)
                .collect()
        })
        .unwrap_or_default();

    AttackRun {
        final_state: ledger.state().clone(),
        records: ledger.records().to_vec(),
        attacker: "attacker".to_string(),
        attempts,
        delivered_publishers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::TxStatus;

    #[test]
    fn contention_runs_are_deterministic_per_seed() {
        let cfg = ContentionConfig {
            users: 4,
            robots: 3,
            submissions: 120,
            seed: 11,
        };
        let a = run_contention(&cfg);
        let b = run_contention(&cfg);
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.records.len(), b.records.len());
    }

    #[test]
    fn batch_matches_individual_runs() {
        let base = ContentionConfig {
            users: 3,
            robots: 2,
            submissions: 60,
            seed: 0,
        };
        let batch = run_contention_batch(base, 0..4);
        for (i, run) in batch.iter().enumerate() {
            let solo = run_contention(&ContentionConfig { seed: i as u64, ..base });
            assert_eq!(run.final_state, solo.final_state);
        }
    }

    #[test]
    fn workloads_actually_produce_invalidations() {
        // The whole point of the workload: concurrent conflicting
        // submissions that force commit-time invalidation.
        let mut any_invalidated = false;
        for seed in 0..5 {
            let run = run_contention(&ContentionConfig {
                users: 6,
                robots: 2,
                submissions: 300,
                seed,
            });
            any_invalidated |= run
                .records
                .iter()
                .any(|r| r.status == TxStatus::Invalidated);
        }
        assert!(any_invalidated, "no conflicts generated across seeds");
    }

    #[test]
    fn attack_attempts_are_all_rejected() {
        let run = run_attack_schedule(3, true);
        assert!(!run.attempts.is_empty());
        for attempt in &run.attempts {
            let msg = attempt.rejection.as_deref().expect("attack must be rejected");
            assert!(msg.contains("Client not authorized"));
        }
        assert!(run.delivered_publishers.iter().all(|p| p == "operator"));
    }
}
