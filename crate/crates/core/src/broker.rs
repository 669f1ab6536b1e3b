//! Event-driven topic broker.
//!
//! The broker is a thin client over the ledger: publishing is an authorized
//! `set` transaction, subscribing is a filtered commit-event stream decoded
//! back into messages. It adds no ordering of its own — delivery order is
//! commit order.

use thiserror::Error;

use crate::contract::{message_prefix, robot_key, MessageRecord, RobotAsset, FN_SET};
use crate::identity::Certificate;
use crate::ledger::{EventSubscription, LedgerError, SimLedger, TxId};

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("robot {0:?} not found")]
    UnknownRobot(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// A delivered message: payload plus both ends of its ledger round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMessage {
    pub topic: String,
    pub robot_id: String,
    /// Per-robot sequence number; contiguous from 0 among committed
    /// messages (it is the key suffix the ledger assigned at commit).
    pub sequence: u64,
    pub publisher: String,
    pub payload: Vec<u8>,
    pub publish_ms: f64,
    pub deliver_ms: f64,
}

/// A single-consumer message stream for one robot.
#[derive(Debug)]
pub struct Subscription {
    sub: EventSubscription,
    robot_id: String,
    topic: String,
}

impl Subscription {
    pub fn robot_id(&self) -> &str {
        &self.robot_id
    }
}

/// Publish `payload` to the robot's service topic as `cert`'s subject.
///
/// Delegates to the contract's `set`; an unauthorized publish surfaces the
/// contract's rejection (and produces no delivery).
pub fn publish(
    ledger: &mut SimLedger,
    cert: &Certificate,
    robot_id: &str,
    payload: &[u8],
    now_ms: f64,
) -> Result<TxId, LedgerError> {
    use base64::Engine as _;
    let encoded = base64::engine::general_purpose::STANDARD.encode(payload);
    ledger.submit(FN_SET, vec![robot_id.to_string(), encoded], cert, now_ms)
}

/// Subscribe to a robot's committed messages. Later commits are delivered
/// in order, exactly once, through [`poll`].
pub fn subscribe(ledger: &mut SimLedger, robot_id: &str) -> Result<Subscription, BrokerError> {
    let Some((bytes, _)) = ledger.read_state(&robot_key(robot_id)) else {
        return Err(BrokerError::UnknownRobot(robot_id.to_string()));
    };
    let asset: RobotAsset = serde_json::from_slice(bytes)
        .map_err(|_| BrokerError::UnknownRobot(robot_id.to_string()))?;
    let sub = ledger.subscribe_events(message_prefix(robot_id));
    Ok(Subscription {
        sub,
        robot_id: robot_id.to_string(),
        topic: asset.service_topic().to_string(),
    })
}

/// Drain newly committed messages for a subscription.
pub fn poll(ledger: &mut SimLedger, subscription: &Subscription) -> Vec<TopicMessage> {
    let prefix = message_prefix(&subscription.robot_id);
    let events = ledger.drain_events(subscription.sub);
    let mut out = Vec::new();
    for event in events {
        for key in &event.written_keys {
            let Some(seq) = key.strip_prefix(&prefix).and_then(|s| s.parse::<u64>().ok()) else {
                continue;
            };
            let Some((bytes, _)) = ledger.read_state(key) else {
                continue;
            };
            let Ok(record) = serde_json::from_slice::<MessageRecord>(bytes) else {
                continue;
            };
            out.push(TopicMessage {
                topic: subscription.topic.clone(),
                robot_id: subscription.robot_id.clone(),
                sequence: seq,
                publisher: record.publisher.clone(),
                payload: record.payload(),
                publish_ms: record.publish_ms,
                deliver_ms: event.commit_ms,
            });
        }
    }
    out
}

/// Delivery statistics over a measurement window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryStats {
    pub delivered: usize,
    pub delivered_hz: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
}

/// Throughput and latency over `window_s` seconds: throughput is
/// deliveries per second, latencies come from per-message
/// `deliver - publish`. A non-positive window yields zeroed stats.
pub fn measure(messages: &[TopicMessage], window_s: f64) -> DeliveryStats {
    if window_s <= 0.0 || messages.is_empty() {
        return DeliveryStats {
            delivered: 0,
            delivered_hz: 0.0,
            p50_ms: 0.0,
            p95_ms: 0.0,
            p99_ms: 0.0,
        };
    }
    let mut latencies: Vec<f64> = messages.iter().map(|m| m.deliver_ms - m.publish_ms).collect();
    latencies.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));
    DeliveryStats {
        delivered: messages.len(),
        delivered_hz: messages.len() as f64 / window_s,
        p50_ms: crate::sim::percentile(&latencies, 50.0),
        p95_ms: crate::sim::percentile(&latencies, 95.0),
        p99_ms: crate::sim::percentile(&latencies, 99.0),
    }
}

/// Structured-text dump of a subscription's messages:
/// `sequence publisher publish_ms deliver_ms payload_hex`, one per line.
pub fn export_messages(messages: &[TopicMessage]) -> String {
    let mut out = String::from("sequence,publisher,publish_ms,deliver_ms,payload_hex\n");
    for m in messages {
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{}\n",
            m.sequence,
            m.publisher,
            m.publish_ms,
            m.deliver_ms,
            hex::encode(&m.payload)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{RobotContract, RobotDescriptor, FN_ACQUIRE, FN_SETUP};
    use crate::identity::{CaKeyring, CertificateAuthority};
    use crate::ledger::OrderingConfig;

    struct Net {
        ledger: SimLedger,
        salma: Certificate,
        farhad: Certificate,
    }

    fn network(gated: bool) -> Net {
        let ca = CertificateAuthority::from_seed("Org1", 5).unwrap();
        let mut keyring = CaKeyring::new();
        keyring.register_ca(&ca);
        let admin = ca.issue("admin1", ["admin"]).unwrap();
        let salma = ca.issue("salma", ["turtlebot4", "husky", "optitrack"]).unwrap();
        let farhad = ca.issue("farhad", ["turtlebot4"]).unwrap();
        let mut ledger = SimLedger::new(
            Box::new(RobotContract::gated(gated)),
            keyring,
            OrderingConfig::default(),
        );
        let robots =
            serde_json::to_string(&vec![RobotDescriptor::mobile("turtlebot4").unwrap()]).unwrap();
        ledger.submit(FN_SETUP, vec![robots], &admin, 0.0).unwrap();
        ledger.drain();
        Net { ledger, salma, farhad }
    }

    fn acquire(net: &mut Net, cert: &Certificate) {
        let t = net.ledger.now_ms();
        net.ledger
            .submit(FN_ACQUIRE, vec!["turtlebot4".into()], cert, t)
            .unwrap();
        net.ledger.drain();
    }

    #[test]
    fn subscribe_then_publish_delivers_in_sequence_order() {
        let mut net = network(true);
        let cert = net.salma.clone();
        acquire(&mut net, &cert);
        let sub = subscribe(&mut net.ledger, "turtlebot4").unwrap();
        for i in 0..3 {
            let t = 2000.0 + i as f64 * 20.0;
            publish(&mut net.ledger, &net.salma, "turtlebot4", &[i as u8], t).unwrap();
        }
        net.ledger.drain();
        let messages = poll(&mut net.ledger, &sub);
        let seqs: Vec<_> = messages.iter().map(|m| m.sequence).collect();
        assert_eq!(seqs, [0, 1, 2]);
        assert_eq!(messages[0].topic, "/turtlebot4/cmd_vel");
        assert!(messages.iter().all(|m| m.publisher == "salma"));
    }

    #[test]
    fn two_subscribers_see_identical_streams() {
        let mut net = network(true);
        let cert = net.salma.clone();
        acquire(&mut net, &cert);
        let sub1 = subscribe(&mut net.ledger, "turtlebot4").unwrap();
        let sub2 = subscribe(&mut net.ledger, "turtlebot4").unwrap();
        for i in 0..4 {
            publish(&mut net.ledger, &net.salma, "turtlebot4", b"m", 1000.0 + i as f64).unwrap();
        }
        net.ledger.drain();
        assert_eq!(poll(&mut net.ledger, &sub1), poll(&mut net.ledger, &sub2));
    }

    #[test]
    fn unknown_robot_fails_both_ways() {
        let mut net = network(true);
        assert!(matches!(
            subscribe(&mut net.ledger, "spot"),
            Err(BrokerError::UnknownRobot(_))
        ));
        let t = net.ledger.now_ms();
        let err = publish(&mut net.ledger, &net.salma, "spot", b"m", t).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { .. }));
    }

    #[test]
    fn unauthorized_publisher_produces_zero_deliveries() {
        let mut net = network(true);
        let cert = net.salma.clone();
        acquire(&mut net, &cert);
        let sub = subscribe(&mut net.ledger, "turtlebot4").unwrap();
        for i in 0..10 {
            let t = 1000.0 + i as f64 * 20.0;
            publish(&mut net.ledger, &net.salma, "turtlebot4", b"ok", t).unwrap();
            let err = publish(&mut net.ledger, &net.farhad, "turtlebot4", b"hijack", t).unwrap_err();
            assert!(err.to_string().contains("Client not authorized"));
        }
        net.ledger.drain();
        let messages = poll(&mut net.ledger, &sub);
        assert_eq!(messages.len(), 10);
        assert!(messages.iter().all(|m| m.publisher == "salma"));
    }

    #[test]
    fn delivery_latency_is_base_plus_service_at_low_load() {
        let mut net = network(true);
        let cert = net.salma.clone();
        acquire(&mut net, &cert);
        let sub = subscribe(&mut net.ledger, "turtlebot4").unwrap();
        publish(&mut net.ledger, &net.salma, "turtlebot4", b"m", 5000.0).unwrap();
        net.ledger.drain();
        let messages = poll(&mut net.ledger, &sub);
        let expected = 300.0 + 1000.0 / 70.0;
        let latency = messages[0].deliver_ms - messages[0].publish_ms;
        assert!((latency - expected).abs() < 1e-6);
    }

    #[test]
    fn measure_reports_throughput_and_percentiles() {
        let messages: Vec<TopicMessage> = (0..500)
            .map(|i| TopicMessage {
                topic: "/t".into(),
                robot_id: "r".into(),
                sequence: i,
                publisher: "u".into(),
                payload: vec![],
                publish_ms: i as f64 * 20.0,
                deliver_ms: i as f64 * 20.0 + 314.0,
            })
            .collect();
        let stats = measure(&messages, 10.0);
        assert_eq!(stats.delivered_hz, 50.0);
        assert!((stats.p50_ms - 314.0).abs() < 1e-9);
        assert!((stats.p99_ms - 314.0).abs() < 1e-9);

        let empty = measure(&[], 10.0);
        assert_eq!(empty.delivered, 0);
        assert_eq!(empty.delivered_hz, 0.0);
        let zero_window = measure(&messages, 0.0);
        assert_eq!(zero_window.delivered_hz, 0.0);
    }

    #[test]
    fn delivery_order_matches_block_log_order() {
        let mut net = network(true);
        let cert = net.salma.clone();
        acquire(&mut net, &cert);
        let sub = subscribe(&mut net.ledger, "turtlebot4").unwrap();
        let mut ids = Vec::new();
        for i in 0..6 {
            ids.push(
                publish(&mut net.ledger, &net.salma, "turtlebot4", &[i], 1000.0 + i as f64 * 5.0)
                    .unwrap(),
            );
        }
        net.ledger.drain();
        let messages = poll(&mut net.ledger, &sub);
        let committed_order: Vec<_> = net
            .ledger
            .records()
            .iter()
            .filter(|r| r.function == FN_SET && r.status == crate::ledger::TxStatus::Committed)
            .map(|r| r.tx_id)
            .collect();
        assert_eq!(committed_order, ids);
        let payloads: Vec<u8> = messages.iter().map(|m| m.payload[0]).collect();
        assert_eq!(payloads, [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn message_dump_has_one_line_per_message() {
        let messages = vec![TopicMessage {
            topic: "/t".into(),
            robot_id: "r".into(),
            sequence: 0,
            publisher: "salma".into(),
            payload: vec![0xab, 0xcd],
            publish_ms: 1.0,
            deliver_ms: 315.0,
        }];
        let dump = export_messages(&messages);
        assert!(dump.lines().nth(1).unwrap().contains("abcd"));
        assert!(dump.lines().nth(1).unwrap().starts_with("0,salma,"));
    }
}
