//! Throughput / latency load profiles and the bench matrix.
//!
//! A [`LoadProfile`] drives one or more publishers at a fixed rate against
//! a single robot for a window of virtual time, then measures what a
//! subscriber saw: delivered rate, latency percentiles, and the latency
//! trend across the run. Profiles are independent, so the matrix fans out
//! through [`crate::par`].

use crate::broker;
use crate::contract::{RobotContract, RobotDescriptor, FN_ACQUIRE, FN_SETUP};
use crate::identity::{CaKeyring, Certificate, CertificateAuthority};
use crate::ledger::{OrderingConfig, SimLedger};
use crate::par;
use crate::sim::{linear_slope, percentile, CmdMsg};

/// One load experiment: `publishers` users each publishing at `rate_hz` on
/// the same robot. Gated profiles run the access-controlled contract and
/// only the first publisher acquires the robot; ungated profiles run the
/// event-driven contract where everything goes through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProfile {
    pub rate_hz: f64,
    pub publishers: usize,
    pub gated: bool,
    pub duration_s: f64,
    pub seed: u64,
    pub ledger: OrderingConfig,
}

impl LoadProfile {
    pub fn new(rate_hz: f64, publishers: usize, gated: bool) -> Self {
        Self {
            rate_hz,
            publishers,
            gated,
            duration_s: 30.0,
            seed: 42,
            ledger: OrderingConfig::default(),
        }
    }

    /// Aggregate submission rate across publishers.
    pub fn offered_hz(&self) -> f64 {
        self.rate_hz * self.publishers as f64
    }
}

/// Measured outcome of one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub offered_hz: f64,
    pub delivered_hz: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    /// Least-squares slope of delivery latency against commit time
    /// (ms of latency per ms of run). Positive means the queue is growing.
    pub latency_slope: f64,
}

/// Run one profile on a fresh network and measure the subscriber side.
pub fn run_profile(profile: &LoadProfile) -> BenchRow {
    let ca = CertificateAuthority::from_seed("Org1", profile.seed).expect("valid org");
    let mut keyring = CaKeyring::new();
    keyring.register_ca(&ca);
    let admin = ca.issue("admin1", ["admin"]).expect("admin cert");
    let publishers: Vec<Certificate> = (0..profile.publishers)
        .map(|i| ca.issue(&format!("pub{i}"), ["turtlebot4"]).expect("publisher cert"))
        .collect();

    let mut ledger = SimLedger::new(
        Box::new(RobotContract::gated(profile.gated)),
        keyring,
        profile.ledger,
    );
    let setup =
        serde_json::to_string(&vec![RobotDescriptor::mobile("turtlebot4").expect("descriptor")])
            .expect("serializes");
    ledger.submit(FN_SETUP, vec![setup], &admin, 0.0).expect("setup accepted");
    ledger.drain();

    if profile.gated {
        // Only the first publisher becomes the operator; the rest model the
        // conflicting sender whose publishes the gate rejects.
        ledger
            .submit(FN_ACQUIRE, vec!["turtlebot4".into()], &publishers[0], ledger.now_ms())
            .expect("acquire accepted");
        ledger.drain();
    }
    let start_ms = ledger.now_ms();
    let sub = broker::subscribe(&mut ledger, "turtlebot4").expect("robot exists");

    // Publishers are phase-staggered across one period so the aggregate
    // arrival stream is even.
    let period_ms = 1000.0 / profile.rate_hz;
    let mut next_pub: Vec<f64> = (0..profile.publishers)
        .map(|i| start_ms + period_ms * i as f64 / profile.publishers as f64)
        .collect();
    let end_ms = start_ms + profile.duration_s * 1000.0;
    let payload = CmdMsg { v: 0.0, w: 0.0 }.encode();

    loop {
        let (who, t) = next_pub
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite").then(a.0.cmp(&b.0)))
            .map(|(i, t)| (i, *t))
            .expect("at least one publisher");
        if t >= end_ms {
            break;
        }
        ledger.advance_to(t);
        let _ = broker::publish(&mut ledger, &publishers[who], "turtlebot4", &payload, t);
        next_pub[who] += period_ms;
    }
    ledger.drain();

    let messages: Vec<_> = broker::poll(&mut ledger, &sub)
        .into_iter()
        .filter(|m| m.deliver_ms <= end_ms)
        .collect();
    let stats = broker::measure(&messages, profile.duration_s);
    let trend: Vec<(f64, f64)> = messages
        .iter()
        .map(|m| (m.deliver_ms - start_ms, m.deliver_ms - m.publish_ms))
        .collect();

    BenchRow {
        offered_hz: profile.offered_hz(),
        delivered_hz: stats.delivered_hz,
        p50_ms: stats.p50_ms,
        p95_ms: stats.p95_ms,
        p99_ms: stats.p99_ms,
        latency_slope: linear_slope(&trend),
    }
}

/// Run a matrix of profiles, in parallel when enabled. Row order follows
/// input order regardless of lane.
pub fn run_matrix(profiles: Vec<LoadProfile>) -> Vec<BenchRow> {
    par::map_collect(profiles, |p| run_profile(&p))
}

/// Sequential twin of [`run_matrix`] for lane comparisons.
pub fn run_matrix_seq(profiles: Vec<LoadProfile>) -> Vec<BenchRow> {
    par::map_collect_seq(profiles, |p| run_profile(&p))
}

/// CSV rendering of a bench matrix.
pub fn matrix_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("offered_hz,delivered_hz,p50,p95,p99\n");
    for row in rows {
        out.push_str(&format!(
            "{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            row.offered_hz, row.delivered_hz, row.p50_ms, row.p95_ms, row.p99_ms
        ));
    }
    out
}

/// P99 latencies per window after a warm-up, for trend checks on stable
/// loads.
pub fn windowed_p99(latencies_by_time: &[(f64, f64)], window_ms: f64, warmup_ms: f64) -> Vec<f64> {
    let mut windows: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
    for (t, latency) in latencies_by_time {
        if *t < warmup_ms {
            continue;
        }
        windows.entry(((t - warmup_ms) / window_ms) as u64).or_default().push(*latency);
    }
    windows
        .into_values()
        .map(|mut v| {
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            percentile(&v, 99.0)
        })
        .collect()
}
