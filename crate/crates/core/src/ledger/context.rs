//! Simulation context handed to contract code.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::identity::ClientIdentity;
use crate::ledger::state::WorldState;
use crate::ledger::tx::WriteOp;

/// Failure raised by contract code during simulation. The transaction is
/// recorded as rejected and never reaches ordering.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("bad arguments: {0}")]
    BadArguments(String),
    #[error("{0} not found")]
    NotFound(String),
    /// Authorization failure; the message is surfaced verbatim to callers.
    #[error("{0}")]
    Unauthorized(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// View of the committed state during transaction simulation.
///
/// Reads go to the committed snapshot and are recorded with the version
/// seen; writes are buffered. Contract code never sees its own buffered
/// writes, matching execute-order-validate semantics.
pub struct TxContext<'a> {
    state: &'a WorldState,
    identity: &'a ClientIdentity,
    submit_ms: f64,
    reads: BTreeMap<String, Option<u64>>,
    writes: Vec<WriteOp>,
}

impl<'a> TxContext<'a> {
    pub fn new(state: &'a WorldState, identity: &'a ClientIdentity, submit_ms: f64) -> Self {
        Self {
            state,
            identity,
            submit_ms,
            reads: BTreeMap::new(),
            writes: Vec::new(),
        }
    }

    /// Identity of the submitting client, extracted from its verified
    /// certificate.
    pub fn client(&self) -> &ClientIdentity {
        self.identity
    }

    /// Submission timestamp on the virtual clock.
    pub fn now_ms(&self) -> f64 {
        self.submit_ms
    }

    /// Read a key from the committed snapshot, recording `(key, version)`
    /// in the read set. Absent keys are recorded too, so a later write by
    /// another transaction invalidates this one.
    pub fn read(&mut self, key: &str) -> Option<Vec<u8>> {
        let entry = self.state.get(key);
        self.reads.insert(key.to_string(), entry.map(|e| e.version));
        entry.map(|e| e.value.clone())
    }

    /// Buffer a write to a fixed key.
    pub fn put(&mut self, key: impl Into<String>, value: Vec<u8>) {
        self.writes.push(WriteOp::Put {
            key: key.into(),
            value,
        });
    }

    /// Buffer an append under `prefix`; the concrete key is assigned at
    /// commit time from the per-prefix sequence counter.
    pub fn append(&mut self, prefix: impl Into<String>, value: Vec<u8>) {
        self.writes.push(WriteOp::Append {
            prefix: prefix.into(),
            value,
        });
    }

    /// Consume the context, yielding the recorded read set and buffered
    /// write set. Serial replay harnesses use this to apply contract
    /// invocations outside the pipeline.
    pub fn into_sets(self) -> (Vec<(String, Option<u64>)>, Vec<WriteOp>) {
        (self.reads.into_iter().collect(), self.writes)
    }
}

/// Contract code invoked during transaction simulation.
///
/// Implementations must be pure with respect to the context: all state
/// access goes through [`TxContext`] reads and writes, and no mutable state
/// is shared between invocations.
pub trait Contract {
    fn invoke(
        &self,
        ctx: &mut TxContext<'_>,
        function: &str,
        args: &[String],
    ) -> Result<Vec<u8>, ContractError>;
}
