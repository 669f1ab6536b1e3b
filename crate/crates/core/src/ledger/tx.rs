//! Transaction, block and event records.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::identity::ClientIdentity;

/// Ledger-assigned transaction identifier. Ids are issued in submission
/// order, so lexicographic order of the display form equals arrival order —
/// the deterministic tie-breaker for same-timestamp submissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub(crate) u64);

impl TxId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tx-{:08}", self.0)
    }
}

/// Lifecycle status. Transitions are `simulated -> committed | invalidated`,
/// or straight to `rejected` when simulation itself fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxStatus {
    Simulated,
    Committed,
    Invalidated,
    Rejected,
}

impl fmt::Display for TxStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TxStatus::Simulated => "simulated",
            TxStatus::Committed => "committed",
            TxStatus::Invalidated => "invalidated",
            TxStatus::Rejected => "rejected",
        };
        f.write_str(s)
    }
}

/// A buffered state write produced during simulation.
///
/// `Put` targets a fixed key. `Append` targets `prefix` + a sequence number
/// that the ledger assigns at commit time, so concurrent in-flight appends
/// under one prefix never conflict and committed sequence numbers stay
/// contiguous from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WriteOp {
    Put { key: String, value: Vec<u8> },
    Append { prefix: String, value: Vec<u8> },
}

/// Full record of a submitted transaction, kept for the life of the ledger.
#[derive(Debug, Clone)]
pub struct TransactionRecord {
    pub tx_id: TxId,
    pub function: String,
    pub args: Vec<String>,
    pub submitter: ClientIdentity,
    pub status: TxStatus,
    pub submit_ms: f64,
    pub commit_ms: Option<f64>,
    /// `(key, version read)` pairs captured at simulation time; `None`
    /// means the key was absent.
    pub read_set: Vec<(String, Option<u64>)>,
    pub write_set: Vec<WriteOp>,
    /// Response produced by the contract at simulation time.
    pub response: Option<Vec<u8>>,
    /// Error message for rejected transactions.
    pub error: Option<String>,
    /// Keys actually written at commit, with appends resolved.
    pub written_keys: Vec<String>,
    pub block_height: Option<u64>,
}

/// Why a block was cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutReason {
    BatchSize,
    Timeout,
}

impl fmt::Display for CutReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutReason::BatchSize => "batch-size",
            CutReason::Timeout => "timeout",
        })
    }
}

/// An ordered slice of the transaction stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub tx_ids: Vec<TxId>,
    pub cut_reason: CutReason,
}

/// Emitted once per committed transaction, in commit order.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitEvent {
    pub tx_id: TxId,
    pub block_height: u64,
    pub written_keys: Vec<String>,
    pub commit_ms: f64,
}

/// Ordering and latency model parameters.
///
/// Commit time of a transaction is
/// `submit + base_latency + queueing delay`, where the queueing delay comes
/// from a FIFO queue in front of a deterministic server that finishes one
/// transaction every `1/service_rate` seconds. Blocks group the ordered
/// stream by `batch_size` or `batch_timeout_ms`, whichever is hit first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderingConfig {
    pub batch_size: usize,
    pub batch_timeout_ms: f64,
    /// Maximum committed transactions per second.
    pub service_rate: f64,
    /// Constant end-to-end latency added to every transaction, in ms.
    pub base_latency_ms: f64,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        Self {
            batch_size: 1,
            batch_timeout_ms: 5.0,
            service_rate: 70.0,
            base_latency_ms: 300.0,
        }
    }
}

impl OrderingConfig {
    /// Service time per transaction in milliseconds.
    pub fn service_ms(&self) -> f64 {
        1000.0 / self.service_rate
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        if self.batch_size < 1 {
            problems.push("ledger.batch_size must be >= 1".to_string());
        }
        if !(self.service_rate > 0.0) {
            problems.push("ledger.service_rate must be > 0".to_string());
        }
        if !(self.base_latency_ms >= 0.0) {
            problems.push("ledger.base_latency_ms must be >= 0".to_string());
        }
        if !(self.batch_timeout_ms >= 0.0) {
            problems.push("ledger.batch_timeout_ms must be >= 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }
}
