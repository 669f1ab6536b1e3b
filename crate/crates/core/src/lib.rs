//! Desk-scale simulation of attribute-gated coordination for shared robot
//! fleets on a permissioned ledger.
//!
//! The pieces, bottom up:
//!
//! * [`identity`] — per-organization certificate authorities issuing
//!   attribute-bearing certificates; authorization reduces to verified
//!   attribute assertion.
//! * [`ledger`] — execute-order-validate transaction pipeline over
//!   versioned world state: deterministic FIFO sequencing with batching, a
//!   calibrated queueing latency model, commit-time read-set validation
//!   (exactly one winner per contested key) and commit-event streams.
//! * [`contract`] — the robot chaincode: `setup`, `acquire`, `release`,
//!   `authorize`, `set`. Exclusive robots admit one operator at a time;
//!   publishes are gated on operatorship.
//! * [`broker`] — topic pub/sub as a thin client over the ledger: publish
//!   is an authorized `set`, delivery is the commit-event stream.
//! * [`sim`] — unicycle kinematics, delayed-feedback waypoint controllers
//!   and the scenario runner that reproduces conflict-resolution
//!   experiments on a virtual clock.
//! * [`scenario`] — declarative scenario files (TOML) and canned fixtures.
//! * [`workload`] / [`loadgen`] — randomized contention schedules and
//!   throughput/latency load matrices.
//!
//! Batch sweeps (seed batches, bench matrices) fan out over rayon behind
//! the default `parallel` feature; disabling it yields an identical
//! sequential API.

pub mod broker;
pub mod contract;
pub mod identity;
pub mod ledger;
pub mod loadgen;
pub mod par;
pub mod scenario;
pub mod sim;
pub mod workload;

pub use broker::{DeliveryStats, TopicMessage};
pub use contract::{OperationMode, RobotAsset, RobotContract};
pub use identity::{AttributeName, CaKeyring, Certificate, CertificateAuthority, ClientIdentity};
pub use ledger::{OrderingConfig, SimLedger, TxStatus, WorldState};
pub use scenario::{Gating, Scenario};
pub use sim::{run_scenario, ScenarioResult};
