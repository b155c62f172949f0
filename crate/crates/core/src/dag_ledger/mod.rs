//! Permissioned DAG ledger of model-update transactions.
//!
//! Every transaction approves two earlier ones. A transaction's own weight
//! comes from its data share, training slots and accuracy; its cumulative
//! weight adds the accuracy-weighted contributions of its direct approvers.
//! New transactions pick their parents by softmax random walks from an older
//! transaction toward the tips, and a transaction is confirmed once its
//! cumulative weight reaches the threshold.

mod walk;
mod weights;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

pub use walk::{random_walk, tip_select, walk_start, WalkParams};
pub use weights::{cumulative_weight, own_weight, transition_probabilities};

#[derive(Debug, Clone, PartialEq)]
pub enum DagError {
    DegenerateWeight,
    InvalidWeightInput,
    NoSuccessors,
    EmptyDag,
    WalkTimeout {
        steps: usize,
    },
    OrphanParent(TxId),
    DuplicateTransaction(TxId),
    ValidationFailed {
        parent: TxId,
        recorded: f64,
        measured: f64,
    },
    /// Accuracy or weight outside `[0, 1]`, or a malformed genesis/child.
    InvalidTransaction(&'static str),
    InvalidConfig(&'static str),
}

impl fmt::Display for DagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DagError::DegenerateWeight => write!(f, "own weight denominator is zero"),
            DagError::InvalidWeightInput => write!(f, "own weight inputs out of range"),
            DagError::NoSuccessors => write!(f, "transition from a transaction with no approvers"),
            DagError::EmptyDag => write!(f, "the DAG has no transactions"),
            DagError::WalkTimeout { steps } => {
                write!(f, "walk did not reach a tip within {steps} steps")
            }
            DagError::OrphanParent(id) => write!(f, "parent {id} is not in the DAG"),
            DagError::DuplicateTransaction(id) => write!(f, "transaction {id} already attached"),
            DagError::ValidationFailed {
                parent,
                recorded,
                measured,
            } => write!(
                f,
                "parent {parent} records accuracy {recorded} but re-evaluates to {measured}"
            ),
            DagError::InvalidTransaction(why) => write!(f, "invalid transaction: {why}"),
            DagError::InvalidConfig(why) => write!(f, "invalid DAG config: {why}"),
        }
    }
}

impl core::error::Error for DagError {}

/// SHA-256 of a transaction body.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 32]);

impl TxId {
    /// First 8 bytes in hex, enough to tell transactions apart in logs.
    pub fn short(&self) -> ShortId<'_> {
        ShortId(self)
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxId({})", self.short())
    }
}

pub struct ShortId<'a>(&'a TxId);

impl fmt::Display for ShortId<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 .0[..8] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Issuer id used for the genesis transaction.
pub const GENESIS_ISSUER: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct TxBody {
    /// `None` only for genesis. Both parents may be the same transaction.
    pub parents: Option<[TxId; 2]>,
    pub issuer: u32,
    /// Digest of the update bundle the transaction refers to.
    pub payload: [u8; 32],
    pub dataset_size: u64,
    pub slots: u64,
    pub accuracy: f64,
    pub weight: f64,
    /// Logical round.
    pub timestamp: u64,
}

impl TxBody {
    /// Canonical little-endian encoding; the id hashes these bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 64 + 4 + 32 + 8 * 5);
        match &self.parents {
            None => out.push(0u8),
            Some([a, b]) => {
                out.push(2u8);
                out.extend_from_slice(&a.0);
                out.extend_from_slice(&b.0);
            }
        }
        out.extend_from_slice(&self.issuer.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.dataset_size.to_le_bytes());
        out.extend_from_slice(&self.slots.to_le_bytes());
        out.extend_from_slice(&self.accuracy.to_bits().to_le_bytes());
        out.extend_from_slice(&self.weight.to_bits().to_le_bytes());
        out.extend_from_slice(&self.timestamp.to_le_bytes());
        out
    }

    fn digest(&self) -> TxId {
        let mut h = Sha256::new();
        h.update(b"fedchain-tx-v1");
        h.update(self.to_bytes());
        TxId(h.finalize().into())
    }
}

/// A transaction whose id is the hash of its body.
#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    id: TxId,
    body: TxBody,
}

impl Transaction {
    pub fn new(body: TxBody) -> Result<Self, DagError> {
        if !(0.0..=1.0).contains(&body.accuracy) {
            return Err(DagError::InvalidTransaction("accuracy must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&body.weight) {
            return Err(DagError::InvalidTransaction("weight must lie in [0, 1]"));
        }
        Ok(Transaction {
            id: body.digest(),
            body,
        })
    }

    pub fn id(&self) -> TxId {
        self.id
    }

    pub fn body(&self) -> &TxBody {
        &self.body
    }

    pub fn is_genesis(&self) -> bool {
        self.body.parents.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DagConfig {
    /// Confirmation threshold on cumulative weight.
    pub theta: f64,
    /// Keep cumulative weight at or above own weight.
    pub clamp: bool,
    /// Allowed gap between a parent's recorded and re-evaluated accuracy.
    pub tolerance: f64,
}

impl Default for DagConfig {
    fn default() -> Self {
        DagConfig {
            theta: 0.5,
            clamp: true,
            tolerance: 0.05,
        }
    }
}

impl DagConfig {
    pub fn validate(&self) -> Result<(), DagError> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(DagError::InvalidConfig("theta must be positive"));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(DagError::InvalidConfig("tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// One approval: `by` approved this transaction and measured `accuracy` for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approval {
    pub by: TxId,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DagEventKind {
    Attach,
    Confirm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DagEvent {
    pub kind: DagEventKind,
    pub id: TxId,
    pub round: u64,
}

/// The ledger. Collections are ordered so iteration is deterministic.
#[derive(Debug, Clone)]
pub struct DagState {
    config: DagConfig,
    txs: BTreeMap<TxId, Transaction>,
    order: Vec<TxId>,
    approvers: BTreeMap<TxId, Vec<Approval>>,
    tips: BTreeSet<TxId>,
    cw: BTreeMap<TxId, f64>,
    confirmed: BTreeSet<TxId>,
    events: Vec<DagEvent>,
}

impl DagState {
    pub fn new(config: DagConfig) -> Result<Self, DagError> {
        config.validate()?;
        Ok(DagState {
            config,
            txs: BTreeMap::new(),
            order: Vec::new(),
            approvers: BTreeMap::new(),
            tips: BTreeSet::new(),
            cw: BTreeMap::new(),
            confirmed: BTreeSet::new(),
            events: Vec::new(),
        })
    }

    /// Start the ledger with a genesis transaction of weight 1.
    pub fn with_genesis(config: DagConfig, payload: [u8; 32]) -> Result<Self, DagError> {
        let mut dag = DagState::new(config)?;
        let genesis = Transaction::new(TxBody {
            parents: None,
            issuer: GENESIS_ISSUER,
            payload,
            dataset_size: 0,
            slots: 0,
            accuracy: 0.0,
            weight: 1.0,
            timestamp: 0,
        })?;
        dag.insert(genesis);
        Ok(dag)
    }

    fn insert(&mut self, tx: Transaction) {
        let id = tx.id;
        let round = tx.body.timestamp;
        self.cw.insert(id, tx.body.weight);
        self.tips.insert(id);
        self.approvers.insert(id, Vec::new());
        self.order.push(id);
        self.txs.insert(id, tx);
        self.events.push(DagEvent {
            kind: DagEventKind::Attach,
            id,
            round,
        });
        self.update_confirmations(&[id], round);
    }

    /// Attach `tx` after checking both parents.
    ///
    /// `measured` holds the validator's re-evaluated accuracy of each parent,
    /// in parent order. Returns the ids newly confirmed by this attachment.
    pub fn attach_transaction(
        &mut self,
        tx: Transaction,
        measured: [f64; 2],
    ) -> Result<Vec<TxId>, DagError> {
        let parents = tx.body.parents.ok_or(DagError::InvalidTransaction(
            "only the first transaction may be genesis",
        ))?;
        if self.txs.contains_key(&tx.id) {
            return Err(DagError::DuplicateTransaction(tx.id));
        }
        for (parent, &m) in parents.iter().zip(&measured) {
            let p = self
                .txs
                .get(parent)
                .ok_or(DagError::OrphanParent(*parent))?;
            // Genesis carries the initial model and nothing to re-evaluate.
            if !p.is_genesis()
                && !(m.is_finite() && (m - p.body.accuracy).abs() <= self.config.tolerance)
            {
                return Err(DagError::ValidationFailed {
                    parent: *parent,
                    recorded: p.body.accuracy,
                    measured: m,
                });
            }
        }
        let id = tx.id;
        let round = tx.body.timestamp;
        let distinct: Vec<(TxId, f64)> = if parents[0] == parents[1] {
            alloc::vec![(parents[0], measured[0])]
        } else {
            alloc::vec![(parents[0], measured[0]), (parents[1], measured[1])]
        };
        self.insert(tx);
        for &(parent, accuracy) in &distinct {
            self.approvers
                .get_mut(&parent)
                .expect("parent present")
                .push(Approval { by: id, accuracy });
            self.tips.remove(&parent);
            self.refresh_cw(parent);
        }
        let touched: Vec<TxId> = distinct.iter().map(|p| p.0).collect();
        Ok(self.update_confirmations(&touched, round))
    }

    fn refresh_cw(&mut self, id: TxId) {
        let tx = &self.txs[&id];
        if tx.is_genesis() {
            return;
        }
        let approvals: Vec<(f64, f64)> = self.approvers[&id]
            .iter()
            .map(|a| (a.accuracy, self.txs[&a.by].body.weight))
            .collect();
        let cw = cumulative_weight(tx.body.weight, &approvals, self.config.clamp);
        self.cw.insert(id, cw);
    }

    /// Confirmation is sticky: once confirmed, always confirmed.
    fn update_confirmations(&mut self, ids: &[TxId], round: u64) -> Vec<TxId> {
        let mut newly = Vec::new();
        for id in ids {
            if self.cw[id] >= self.config.theta && self.confirmed.insert(*id) {
                newly.push(*id);
                self.events.push(DagEvent {
                    kind: DagEventKind::Confirm,
                    id: *id,
                    round,
                });
            }
        }
        newly
    }

    /// Every transaction whose current cumulative weight reaches `theta`.
    pub fn confirm_transactions(&self, theta: f64) -> BTreeSet<TxId> {
        self.cw
            .iter()
            .filter(|(_, &cw)| cw >= theta)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Transactions confirmed so far at the configured threshold.
    pub fn confirmed(&self) -> &BTreeSet<TxId> {
        &self.confirmed
    }

    pub fn config(&self) -> &DagConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn get(&self, id: &TxId) -> Option<&Transaction> {
        self.txs.get(id)
    }

    /// Transactions in attachment order.
    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.order.iter().map(move |id| &self.txs[id])
    }

    pub fn genesis(&self) -> Option<&Transaction> {
        self.order.first().map(|id| &self.txs[id])
    }

    pub fn latest(&self) -> Option<&Transaction> {
        self.order.last().map(|id| &self.txs[id])
    }

    pub fn approvers(&self, id: &TxId) -> &[Approval] {
        self.approvers.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn tips(&self) -> &BTreeSet<TxId> {
        &self.tips
    }

    pub fn cumulative_weight(&self, id: &TxId) -> Option<f64> {
        self.cw.get(id).copied()
    }

    pub fn events(&self) -> &[DagEvent] {
        &self.events
    }
}
