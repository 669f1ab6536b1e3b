//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! Every tolerance is pinned here, in code. The criteria cover mutual
//! exclusion under contention, acquisition-algorithm fidelity, the two
//! calibrated throughput operating points (50 Hz stable, ~70 Hz
//! saturation), ordinal trajectory and yaw findings, unauthorized-publish
//! rejection, certificate integrity under mutation, and feedback-delay
//! fidelity.

mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use corral_core::contract::{
    robot_key, OperationMode, RobotAsset, RobotContract, FN_ACQUIRE, FN_RELEASE,
};
use corral_core::identity::{attribute_set, CaKeyring, Certificate, CertificateAuthority, ClientIdentity};
use corral_core::ledger::{Contract, TxContext, TxStatus, WorldState};
use corral_core::loadgen::{run_profile, windowed_p99, LoadProfile};
use corral_core::par;
use corral_core::scenario::{fixtures, Gating};
use corral_core::sim::run_scenario;
use corral_core::workload::{run_attack_schedule, run_contention_batch, ContentionConfig};
use corral_core::ScenarioResult;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn verdict(number: u32, name: &str, failures: Vec<String>) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("acceptance {number} ({name}): {status}");
    assert!(failures.is_empty(), "criterion {number} failed:\n{}", failures.join("\n"));
}

fn gated_fixture() -> &'static ScenarioResult {
    static RESULT: OnceLock<ScenarioResult> = OnceLock::new();
    RESULT.get_or_init(|| run_scenario(&fixtures::two_task(Gating::On)).expect("gated fixture runs"))
}

fn ungated_fixture() -> &'static ScenarioResult {
    static RESULT: OnceLock<ScenarioResult> = OnceLock::new();
    RESULT.get_or_init(|| run_scenario(&fixtures::two_task(Gating::Off)).expect("ungated fixture runs"))
}

#[test]
fn criterion_1_mutual_exclusion_under_contention() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let seeds: Vec<u64> = (0..100).collect();
    let runs = run_contention_batch(
        ContentionConfig {
            users: 10,
            robots: 5,
            submissions: 1000,
            seed: 0,
        },
        seeds.clone(),
    );

    for (seed, run) in seeds.iter().zip(&runs) {
        // Replay the committed history one transaction at a time and check
        // the holder state machine after every step: an exclusive robot may
        // gain a second operator only after a release.
        let committed = common::committed_in_commit_order(&run.records);
        let mut holder: BTreeMap<String, String> = BTreeMap::new();
        for record in &committed {
            let granted = record.response.as_deref() == Some(b"true");
            let robot = record.args.first().cloned().unwrap_or_default();
            if !run.exclusive_robots.contains(&robot) {
                continue;
            }
            if record.function == FN_ACQUIRE && granted {
                if let Some(existing) = holder.get(&robot) {
                    failures.push(format!(
                        "seed {seed}: {} granted {robot} to {} while {existing} held it",
                        record.tx_id, record.submitter.subject_id
                    ));
                }
                holder.insert(robot, record.submitter.subject_id.clone());
            } else if record.function == FN_RELEASE {
                holder.remove(&robot);
            }
        }

        // Final state must equal a serial replay of exactly the committed
        // transactions in commit order.
        let oracle_state = common::serial_replay(&RobotContract::new(), &committed);
        if oracle_state != run.final_state {
            failures.push(format!("seed {seed}: final state diverges from serial replay"));
        }
        common::assert_operator_invariants(&run.final_state);

        // Exactly one winner among conflicting grants: acquires that were
        // simulated as "true" against the same robot version, and reached
        // ordering, must commit exactly once.
        let mut winners: BTreeMap<(String, Option<u64>), usize> = BTreeMap::new();
        for record in &run.records {
            if record.function != FN_ACQUIRE
                || record.status == TxStatus::Rejected
                || record.response.as_deref() != Some(b"true")
            {
                continue;
            }
            let robot = record.args[0].clone();
            if !run.exclusive_robots.contains(&robot) {
                continue;
            }
            let version = record
                .read_set
                .iter()
                .find(|(k, _)| *k == robot_key(&robot))
                .and_then(|(_, v)| *v);
            let committed_now = usize::from(record.status == TxStatus::Committed);
            *winners.entry((robot, version)).or_insert(0) += committed_now;
        }
        for ((robot, version), count) in winners {
            if count > 1 {
                failures.push(format!(
                    "seed {seed}: {count} acquires of {robot} committed against version {version:?}"
                ));
            }
        }
    }

    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 60.0 {
        failures.push(format!("runtime {elapsed:?} exceeds 60 s"));
    }
    verdict(1, "mutual exclusion under contention", failures);
}

#[test]
fn criterion_2_acquisition_algorithm_fidelity() {
    let mut failures = Vec::new();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let attribute_pool = ["turtlebot4", "husky", "optitrack", "drone", "arm"];
    let users = ["salma", "farhad", "lena", "omar"];

    let contract = RobotContract::new();
    for case in 0..10_000 {
        let required = attribute_pool[rng.gen_range(0..attribute_pool.len())];
        let operator = if rng.gen_bool(0.5) {
            users[rng.gen_range(0..users.len())].to_string()
        } else {
            String::new()
        };
        let robot = RobotAsset {
            name: "rb".into(),
            sub_topic: "/rb/cmd_vel".into(),
            pub_topic: "/rb/odom".into(),
            under_op: !operator.is_empty(),
            operator,
            mode: OperationMode::Exclusive,
            required_attribute: required.parse().unwrap(),
        };
        let caller_attrs: Vec<&str> = attribute_pool
            .iter()
            .filter(|_| rng.gen_bool(0.4))
            .copied()
            .collect();
        let caller = ClientIdentity {
            subject_id: users[rng.gen_range(0..users.len())].to_string(),
            org_id: "Org1".into(),
            attributes: attribute_set(caller_attrs).unwrap(),
        };

        let (expected_granted, expected_robot) = common::acquire_reference(&robot, &caller);

        let mut state = WorldState::new();
        state.put(robot_key("rb"), serde_json::to_vec(&robot).unwrap());
        let mut ctx = TxContext::new(&state, &caller, 0.0);
        let response = contract
            .invoke(&mut ctx, FN_ACQUIRE, &["rb".to_string()])
            .expect("acquire on existing robot never errors");
        let granted = response == b"true";
        let (_, writes) = ctx.into_sets();
        let post_robot: RobotAsset = match writes.as_slice() {
            [] => robot.clone(),
            [corral_core::ledger::WriteOp::Put { key, value }] if key == &robot_key("rb") => {
                serde_json::from_slice(value).unwrap()
            }
            other => {
                failures.push(format!("case {case}: unexpected write set {other:?}"));
                continue;
            }
        };

        if granted != expected_granted || post_robot != expected_robot {
            failures.push(format!(
                "case {case}: implementation ({granted}, {post_robot:?}) != reference ({expected_granted}, {expected_robot:?})"
            ));
            if failures.len() > 5 {
                break;
            }
        }
    }
    verdict(2, "acquisition algorithm fidelity", failures);
}

#[test]
fn criterion_3_conflict_resolution_throughput() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let rows = par::map_collect(
        vec![LoadProfile::new(50.0, 1, true), LoadProfile::new(50.0, 2, false)],
        |p| (p, run_profile(&p)),
    );

    let (_, gated) = &rows[0];
    if (gated.delivered_hz - 50.0).abs() > 2.5 {
        failures.push(format!("gated delivered {} Hz, want 50 +/- 2.5", gated.delivered_hz));
    }
    // Bounded latency: windowed p99 after a 5 s warm-up must not increase.
    let gated_detail = run_profile_latency_series(&LoadProfile::new(50.0, 1, true));
    let p99s = windowed_p99(&gated_detail, 5000.0, 5000.0);
    for pair in p99s.windows(2) {
        if pair[1] > pair[0] + 1e-6 {
            failures.push(format!("gated p99 trend increased: {:?}", p99s.clone()));
            break;
        }
    }

    let (_, ungated) = &rows[1];
    if (ungated.delivered_hz - 70.0).abs() > 5.0 {
        failures.push(format!("ungated delivered {} Hz, want 70 +/- 5", ungated.delivered_hz));
    }
    if ungated.latency_slope <= 0.0 {
        failures.push(format!("ungated latency slope {} not > 0", ungated.latency_slope));
    }

    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 10.0 {
        failures.push(format!("runtime {elapsed:?} exceeds 10 s"));
    }
    verdict(3, "conflict-resolution throughput", failures);
}

/// Delivery latencies of a profile as `(time since start, latency)` pairs.
fn run_profile_latency_series(profile: &LoadProfile) -> Vec<(f64, f64)> {
    // run_profile already measures aggregates; for the windowed trend we
    // need the raw series, so run the same profile and pull the records.
    use corral_core::broker;
    use corral_core::contract::{RobotDescriptor, FN_SETUP};
    use corral_core::ledger::{OrderingConfig, SimLedger};

    let ca = CertificateAuthority::from_seed("Org1", profile.seed).unwrap();
    let mut keyring = CaKeyring::new();
    keyring.register_ca(&ca);
    let admin = ca.issue("admin1", ["admin"]).unwrap();
    let publisher = ca.issue("pub0", ["turtlebot4"]).unwrap();
    let mut ledger = SimLedger::new(
        Box::new(RobotContract::gated(profile.gated)),
        keyring,
        OrderingConfig::default(),
    );
    let setup = serde_json::to_string(&vec![RobotDescriptor::mobile("turtlebot4").unwrap()]).unwrap();
    ledger.submit(FN_SETUP, vec![setup], &admin, 0.0).unwrap();
    ledger.drain();
    ledger
        .submit(FN_ACQUIRE, vec!["turtlebot4".into()], &publisher, ledger.now_ms())
        .unwrap();
    ledger.drain();
    let start = ledger.now_ms();
    let period = 1000.0 / profile.rate_hz;
    for k in 0..(profile.duration_s * profile.rate_hz) as usize {
        let t = start + k as f64 * period;
        ledger.advance_to(t);
        let _ = broker::publish(&mut ledger, &publisher, "turtlebot4", b"m", t);
    }
    ledger.drain();
    ledger
        .records()
        .iter()
        .filter(|r| r.function == "set" && r.status == TxStatus::Committed)
        .map(|r| {
            let commit = r.commit_ms.unwrap();
            (commit - start, commit - r.submit_ms)
        })
        .collect()
}

#[test]
fn criterion_4_sequential_task_execution() {
    let mut failures = Vec::new();

    let gated = gated_fixture();
    let expected: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)];
    let actual: Vec<(usize, usize)> = gated.visits.iter().map(|v| (v.task_index, v.waypoint_index)).collect();
    if actual != expected {
        failures.push(format!("gated visit order {actual:?}, want {expected:?}"));
    }
    for visit in &gated.visits {
        if visit.error_m > 0.1 {
            failures.push(format!(
                "gated visit task {} wp {} error {} m > 0.1",
                visit.task_index, visit.waypoint_index, visit.error_m
            ));
        }
    }

    let ungated = ungated_fixture();
    let actual: Vec<(usize, usize)> = ungated.visits.iter().map(|v| (v.task_index, v.waypoint_index)).collect();
    if actual == expected {
        failures.push("ungated run preserved waypoint order; expected an inversion or omission".into());
    }

    // Deterministic under the fixture seed.
    let rerun = run_scenario(&fixtures::two_task(Gating::On)).expect("rerun");
    if &rerun != gated {
        failures.push("gated rerun with identical seed diverged".into());
    }

    verdict(4, "sequential task execution", failures);
}

#[test]
fn criterion_5_yaw_disturbance() {
    let mut failures = Vec::new();
    let gated = gated_fixture().summary.yaw_rate_variance[0].1;
    let ungated = ungated_fixture().summary.yaw_rate_variance[0].1;
    if !(ungated >= 2.0 * gated) {
        failures.push(format!(
            "ungated yaw-rate variance {ungated} not >= 2 x gated {gated}"
        ));
    }
    verdict(5, "yaw disturbance", failures);
}

#[test]
fn criterion_6_unauthorized_publish_rejection() {
    let mut failures = Vec::new();
    for seed in 0..20 {
        let with_attacker = run_attack_schedule(seed, true);
        let baseline = run_attack_schedule(seed, false);

        if with_attacker.attempts.is_empty() {
            failures.push(format!("seed {seed}: schedule produced no attacks"));
        }
        for attempt in &with_attacker.attempts {
            match &attempt.rejection {
                Some(message) if message.contains("Client not authorized") => {}
                Some(message) => failures.push(format!(
                    "seed {seed}: attack at {} rejected with wrong message {message:?}",
                    attempt.t_ms
                )),
                None => failures.push(format!(
                    "seed {seed}: attack at {} was accepted",
                    attempt.t_ms
                )),
            }
        }
        if with_attacker
            .delivered_publishers
            .iter()
            .any(|p| p == &with_attacker.attacker)
        {
            failures.push(format!("seed {seed}: attacker message was delivered"));
        }
        if with_attacker.final_state != baseline.final_state {
            failures.push(format!("seed {seed}: attacker mutated state"));
        }
    }
    verdict(6, "unauthorized publish rejection", failures);
}

#[test]
fn criterion_7_certificate_integrity() {
    let mut failures = Vec::new();

    let ca = CertificateAuthority::from_seed("Org1", 7).unwrap();
    let other_ca = CertificateAuthority::from_seed("Org2", 7).unwrap();
    let mut keyring = CaKeyring::new();
    keyring.register_ca(&ca);
    keyring.register_ca(&other_ca);

    let certs: Vec<Certificate> = vec![
        ca.issue("salma", ["turtlebot4", "husky", "optitrack"]).unwrap(),
        ca.issue("farhad", ["turtlebot4"]).unwrap(),
        ca.issue("admin1", ["admin"]).unwrap(),
        ca.issue("nobody", Vec::<&str>::new()).unwrap(),
    ];
    for (i, cert) in certs.iter().enumerate() {
        if !keyring.verify(cert) {
            failures.push(format!("unmutated certificate {i} failed verification"));
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(7777);
    let cases: Vec<(usize, usize, u8)> = (0..10_000)
        .map(|_| {
            let which = rng.gen_range(0..certs.len());
            let bytes = certs[which].to_bytes();
            let pos = rng.gen_range(0..bytes.len());
            let delta = rng.gen_range(1..=255u8);
            (which, pos, delta)
        })
        .collect();

    let survivors: Vec<String> = par::map_collect(cases, |(which, pos, delta)| {
        let mut bytes = certs[which].to_bytes();
        bytes[pos] = bytes[pos].wrapping_add(delta);
        let verified = Certificate::from_bytes(&bytes)
            .map(|cert| keyring.verify(&cert))
            .unwrap_or(false);
        if verified {
            Some(format!("mutation at byte {pos} (+{delta}) of certificate {which} still verifies"))
        } else {
            None
        }
    })
    .into_iter()
    .flatten()
    .collect();
    failures.extend(survivors);

    verdict(7, "certificate integrity", failures);
}

#[test]
fn criterion_8_feedback_delay_fidelity() {
    let mut failures = Vec::new();
    let result = gated_fixture();
    let mut poses = result.pose_latencies("optitrack");
    if poses.is_empty() {
        failures.push("no pose messages committed".into());
    } else {
        poses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = poses[poses.len() / 2];
        if (median - 300.0).abs() > 20.0 {
            failures.push(format!("pose feedback median {median} ms outside 300 +/- 20"));
        }
    }
    verdict(8, "feedback-delay fidelity", failures);
}
