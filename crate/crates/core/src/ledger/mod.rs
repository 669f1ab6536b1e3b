//! Simulated permissioned ledger: execute-order-validate over versioned
//! world state.
//!
//! Submissions are simulated immediately against the committed state by the
//! registered contract, producing read/write sets. A deterministic FIFO
//! sequencer then orders them (submission time, transaction id as
//! tie-breaker), groups them into blocks, and models commit latency as
//! `submit + base_latency + queueing delay` with a single deterministic
//! server draining `service_rate` transactions per second. At commit, a
//! transaction is validated against the current state versions of its read
//! set; winners apply their writes and emit a [`CommitEvent`], losers are
//! invalidated.
//!
//! Everything runs on a virtual clock: [`SimLedger::advance_to`] drives the
//! pipeline and makes runs deterministic.

mod context;
mod state;
mod tx;

pub use context::{Contract, ContractError, TxContext};
pub use state::{StateEntry, WorldState};
pub use tx::{Block, CommitEvent, CutReason, OrderingConfig, TransactionRecord, TxId, TxStatus, WriteOp};

use std::collections::{HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::identity::{CaKeyring, Certificate, ClientIdentity};

/// Errors surfaced by ledger submission.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    /// The submitter's certificate does not verify under any known CA.
    #[error("authentication failed: {0}")]
    Authentication(String),
    /// The contract rejected the proposal during simulation; nothing was
    /// enqueued for ordering.
    #[error("{message}")]
    Rejected { tx_id: TxId, message: String },
}

/// Handle for a commit-event subscription. Streams are single-consumer:
/// drain events through [`SimLedger::drain_events`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventSubscription(usize);

struct SubscriberSlot {
    key_prefix: String,
    queue: VecDeque<CommitEvent>,
}

struct OpenBlock {
    first_submit_ms: f64,
    tx_ids: Vec<TxId>,
}

struct PendingCommit {
    tx_id: TxId,
    commit_ms: f64,
}

/// The simulated ledger: world state, contract, sequencer and event fan-out.
pub struct SimLedger {
    contract: Box<dyn Contract>,
    keyring: CaKeyring,
    config: OrderingConfig,
    state: WorldState,
    records: Vec<TransactionRecord>,
    pending: VecDeque<PendingCommit>,
    server_free_ms: f64,
    blocks: Vec<Block>,
    open_block: Option<OpenBlock>,
    append_counters: HashMap<String, u64>,
    subscribers: Vec<SubscriberSlot>,
    clock_ms: f64,
}

impl SimLedger {
    pub fn new(contract: Box<dyn Contract>, keyring: CaKeyring, config: OrderingConfig) -> Self {
        Self {
            contract,
            keyring,
            config,
            state: WorldState::new(),
            records: Vec::new(),
            pending: VecDeque::new(),
            server_free_ms: 0.0,
            blocks: Vec::new(),
            open_block: None,
            append_counters: HashMap::new(),
            subscribers: Vec::new(),
            clock_ms: 0.0,
        }
    }

    pub fn config(&self) -> &OrderingConfig {
        &self.config
    }

    pub fn now_ms(&self) -> f64 {
        self.clock_ms
    }

    /// Authenticate the submitter, simulate the proposal against the
    /// committed state, and enqueue it for ordering. Returns immediately
    /// with the transaction id.
    ///
    /// A certificate that fails verification yields
    /// [`LedgerError::Authentication`]. A contract error records the
    /// transaction as rejected, enqueues nothing, and surfaces the message.
    pub fn submit(
        &mut self,
        function: &str,
        args: Vec<String>,
        submitter: &Certificate,
        now_ms: f64,
    ) -> Result<TxId, LedgerError> {
        let identity = ClientIdentity::from_certificate(submitter, &self.keyring)
            .map_err(|e| LedgerError::Authentication(e.to_string()))?;
        self.submit_as(function, args, identity, now_ms)
    }

    /// Like [`SimLedger::submit`] for an already-authenticated identity.
    pub fn submit_as(
        &mut self,
        function: &str,
        args: Vec<String>,
        identity: ClientIdentity,
        now_ms: f64,
    ) -> Result<TxId, LedgerError> {
        debug_assert!(
            now_ms + 1e-9 >= self.clock_ms,
            "submission at {now_ms} behind ledger clock {}",
            self.clock_ms
        );
        let tx_id = TxId(self.records.len() as u64);
        let mut ctx = TxContext::new(&self.state, &identity, now_ms);
        let outcome = self.contract.invoke(&mut ctx, function, args.as_slice());
        let (read_set, write_set) = ctx.into_sets();

        let mut record = TransactionRecord {
            tx_id,
            function: function.to_string(),
            args,
            submitter: identity,
            status: TxStatus::Simulated,
            submit_ms: now_ms,
            commit_ms: None,
            read_set,
            write_set,
            response: None,
            error: None,
            written_keys: Vec::new(),
            block_height: None,
        };

        match outcome {
            Ok(response) => {
                record.response = Some(response);
                self.records.push(record);
                self.enqueue(tx_id, now_ms);
                Ok(tx_id)
            }
            Err(err) => {
                let message = err.to_string();
                record.status = TxStatus::Rejected;
                record.error = Some(message.clone());
                record.write_set.clear();
                self.records.push(record);
                Err(LedgerError::Rejected { tx_id, message })
            }
        }
    }

    fn enqueue(&mut self, tx_id: TxId, submit_ms: f64) {
        // Deterministic single server: departure = max(arrival, previous
        // departure) + service time. Commit adds the constant base latency.
        let start = self.server_free_ms.max(submit_ms);
        let departure = start + self.config.service_ms();
        self.server_free_ms = departure;
        let commit_ms = departure + self.config.base_latency_ms;
        self.pending.push_back(PendingCommit { tx_id, commit_ms });
        self.place_in_block(tx_id, submit_ms);
    }

    fn place_in_block(&mut self, tx_id: TxId, submit_ms: f64) {
        match &mut self.open_block {
            Some(open) => {
                if submit_ms > open.first_submit_ms + self.config.batch_timeout_ms {
                    self.finalize_open_block(CutReason::Timeout);
                    self.open_block = Some(OpenBlock {
                        first_submit_ms: submit_ms,
                        tx_ids: vec![tx_id],
                    });
                } else {
                    open.tx_ids.push(tx_id);
                }
            }
            None => {
                self.open_block = Some(OpenBlock {
                    first_submit_ms: submit_ms,
                    tx_ids: vec![tx_id],
                });
            }
        }
        if self
            .open_block
            .as_ref()
            .is_some_and(|b| b.tx_ids.len() >= self.config.batch_size)
        {
            self.finalize_open_block(CutReason::BatchSize);
        }
    }

    fn finalize_open_block(&mut self, reason: CutReason) {
        if let Some(open) = self.open_block.take() {
            let height = self.blocks.len() as u64;
            for id in &open.tx_ids {
                self.records[id.index()].block_height = Some(height);
            }
            self.blocks.push(Block {
                height,
                tx_ids: open.tx_ids,
                cut_reason: reason,
            });
        }
    }

    /// Drive ordering, validation and commit up to `now_ms` on the virtual
    /// clock. Transactions whose commit time has been reached are validated
    /// in order: the read set must still match current state versions,
    /// otherwise the transaction is invalidated and its writes discarded.
    pub fn advance_to(&mut self, now_ms: f64) {
        self.clock_ms = self.clock_ms.max(now_ms);
        if self
            .open_block
            .as_ref()
            .is_some_and(|b| b.first_submit_ms + self.config.batch_timeout_ms <= now_ms)
        {
            self.finalize_open_block(CutReason::Timeout);
        }
        while self
            .pending
            .front()
            .is_some_and(|p| p.commit_ms <= now_ms)
        {
            let PendingCommit { tx_id, commit_ms } = self.pending.pop_front().unwrap();
            self.process_commit(tx_id, commit_ms);
        }
    }

    /// Advance until every enqueued transaction has been processed.
    pub fn drain(&mut self) {
        if let Some(last) = self.pending.back() {
            let target = last.commit_ms;
            self.advance_to(target);
        }
    }

    fn process_commit(&mut self, tx_id: TxId, commit_ms: f64) {
        // A commit can only belong to the open block when base latency and
        // service together undercut the batch timeout; cut it now so every
        // processed transaction sits in a finalized block.
        if self
            .open_block
            .as_ref()
            .is_some_and(|b| b.tx_ids.contains(&tx_id))
        {
            self.finalize_open_block(CutReason::Timeout);
        }

        let record = &self.records[tx_id.index()];
        let valid = record
            .read_set
            .iter()
            .all(|(key, version)| self.state.version(key) == *version);

        if !valid {
            let record = &mut self.records[tx_id.index()];
            record.status = TxStatus::Invalidated;
            record.commit_ms = Some(commit_ms);
            return;
        }

        let write_set = self.records[tx_id.index()].write_set.clone();
        let mut written_keys = Vec::with_capacity(write_set.len());
        for op in write_set {
            match op {
                WriteOp::Put { key, value } => {
                    self.state.put(key.clone(), value);
                    written_keys.push(key);
                }
                WriteOp::Append { prefix, value } => {
                    let counter = self.append_counters.entry(prefix.clone()).or_insert(0);
                    let key = format!("{prefix}{counter}");
                    *counter += 1;
                    self.state.put(key.clone(), value);
                    written_keys.push(key);
                }
            }
        }

        let block_height = self.records[tx_id.index()]
            .block_height
            .expect("committed transaction must sit in a finalized block");
        let event = CommitEvent {
            tx_id,
            block_height,
            written_keys: written_keys.clone(),
            commit_ms,
        };
        for slot in &mut self.subscribers {
            if event
                .written_keys
                .iter()
                .any(|k| k.starts_with(&slot.key_prefix))
            {
                slot.queue.push_back(event.clone());
            }
        }

        let record = &mut self.records[tx_id.index()];
        record.status = TxStatus::Committed;
        record.commit_ms = Some(commit_ms);
        record.written_keys = written_keys;
    }

    /// Committed value and version for `key`; never exposes uncommitted
    /// writes.
    pub fn read_state(&self, key: &str) -> Option<(&[u8], u64)> {
        self.state.get(key).map(|e| (e.value.as_slice(), e.version))
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Subscribe to commit events whose written keys match `key_prefix`.
    /// Only events committed after attachment are delivered.
    pub fn subscribe_events(&mut self, key_prefix: impl Into<String>) -> EventSubscription {
        self.subscribers.push(SubscriberSlot {
            key_prefix: key_prefix.into(),
            queue: VecDeque::new(),
        });
        EventSubscription(self.subscribers.len() - 1)
    }

    /// Drain pending events for a subscription, in commit order.
    pub fn drain_events(&mut self, sub: EventSubscription) -> Vec<CommitEvent> {
        self.subscribers[sub.0].queue.drain(..).collect()
    }

    pub fn record(&self, tx_id: TxId) -> &TransactionRecord {
        &self.records[tx_id.index()]
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Number of transactions still in flight.
    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    /// Line-delimited block log: one JSON object per transaction, in
    /// submission order.
    pub fn export_block_log(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            tx_id: String,
            function: &'a str,
            submitter: &'a str,
            status: TxStatus,
            submit_ms: f64,
            commit_ms: Option<f64>,
        }
        let mut out = String::new();
        for r in &self.records {
            let line = Line {
                tx_id: r.tx_id.to_string(),
                function: &r.function,
                submitter: &r.submitter.subject_id,
                status: r.status,
                submit_ms: r.submit_ms,
                commit_ms: r.commit_ms,
            };
            out.push_str(&serde_json::to_string(&line).expect("block log line serializes"));
            out.push('\n');
        }
        out
    }
}
