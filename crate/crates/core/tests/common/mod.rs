//! Shared test oracles, independent of the ledger pipeline they check.

use std::collections::HashMap;

use corral_core::contract::RobotAsset;
use corral_core::identity::ClientIdentity;
use corral_core::ledger::{Contract, TransactionRecord, TxContext, TxStatus, WorldState, WriteOp};

/// Serially replay `records` (expected to be the committed transactions, in
/// commit order) through `contract` against a fresh state: no ordering, no
/// queueing, no commit-time validation. The result is the state a
/// one-at-a-time execution would have produced; a serializable pipeline
/// must match it exactly.
pub fn serial_replay(contract: &dyn Contract, records: &[&TransactionRecord]) -> WorldState {
    let mut state = WorldState::new();
    let mut counters: HashMap<String, u64> = HashMap::new();
    for record in records {
        let mut ctx = TxContext::new(&state, &record.submitter, record.submit_ms);
        let response = contract
            .invoke(&mut ctx, &record.function, &record.args)
            .unwrap_or_else(|e| panic!("{} replayed with error: {e}", record.tx_id));
        assert_eq!(
            Some(&response),
            record.response.as_ref(),
            "{} response diverged under serial replay",
            record.tx_id
        );
        let (_, writes) = ctx.into_sets();
        for op in writes {
            match op {
                WriteOp::Put { key, value } => {
                    state.put(key, value);
                }
                WriteOp::Append { prefix, value } => {
                    let n = counters.entry(prefix.clone()).or_insert(0);
                    state.put(format!("{prefix}{n}"), value);
                    *n += 1;
                }
            }
        }
    }
    state
}

/// Committed transactions of a history, in commit order.
pub fn committed_in_commit_order(records: &[TransactionRecord]) -> Vec<&TransactionRecord> {
    let mut committed: Vec<&TransactionRecord> = records
        .iter()
        .filter(|r| r.status == TxStatus::Committed)
        .collect();
    committed.sort_by(|a, b| {
        a.commit_ms
            .partial_cmp(&b.commit_ms)
            .unwrap()
            .then(a.tx_id.cmp(&b.tx_id))
    });
    committed
}

/// Direct transcription of the acquisition pseudocode for exclusive robots:
/// refuse when under operation, otherwise grant iff the caller holds the
/// robot's required attribute, recording the caller as operator.
pub fn acquire_reference(robot: &RobotAsset, caller: &ClientIdentity) -> (bool, RobotAsset) {
    if robot.under_op {
        return (false, robot.clone());
    }
    let attribute = robot.required_attribute.clone();
    if caller.has_attribute(&attribute) {
        let mut updated = robot.clone();
        updated.under_op = true;
        updated.operator = caller.subject_id.clone();
        (true, updated)
    } else {
        (false, robot.clone())
    }
}

/// Scan a state for robot assets and panic on any broken operator
/// invariant (exclusive: `under_op` iff operator set; open: never held).
pub fn assert_operator_invariants(state: &WorldState) {
    for (key, entry) in state.iter() {
        if !key.starts_with("robot/") {
            continue;
        }
        let asset: RobotAsset = serde_json::from_slice(&entry.value).expect("robot asset parses");
        match asset.mode {
            corral_core::contract::OperationMode::Exclusive => {
                assert_eq!(
                    asset.under_op,
                    !asset.operator.is_empty(),
                    "exclusive robot {key} holds under_op={} operator={:?}",
                    asset.under_op,
                    asset.operator
                );
            }
            _ => {
                assert!(
                    !asset.under_op && asset.operator.is_empty(),
                    "open robot {key} must never be held"
                );
            }
        }
    }
}
