//! DAG snapshots (JSON), Graphviz rendering and the ledger event log.

use fedchain_core::dag_ledger::{DagEventKind, DagState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxRecord {
    pub id: String,
    /// Empty for genesis.
    pub parents: Vec<String>,
    /// `None` for genesis.
    pub issuer: Option<u32>,
    pub payload: String,
    pub dataset_size: u64,
    pub slots: u64,
    pub accuracy: f64,
    pub weight: f64,
    pub cumulative_weight: f64,
    pub confirmed: bool,
    pub timestamp: u64,
}

/// Every transaction in attachment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagSnapshot {
    pub theta: f64,
    pub transactions: Vec<TxRecord>,
}

impl DagSnapshot {
    pub fn from_dag(dag: &DagState) -> Self {
        let transactions = dag
            .transactions()
            .map(|tx| {
                let b = tx.body();
                let id = tx.id();
                TxRecord {
                    id: id.to_string(),
                    parents: b
                        .parents
                        .map_or_else(Vec::new, |ps| ps.iter().map(|p| p.to_string()).collect()),
                    issuer: (!tx.is_genesis()).then_some(b.issuer),
                    payload: hex::encode(b.payload),
                    dataset_size: b.dataset_size,
                    slots: b.slots,
                    accuracy: b.accuracy,
                    weight: b.weight,
                    cumulative_weight: dag.cumulative_weight(&id).expect("attached"),
                    confirmed: dag.confirmed().contains(&id),
                    timestamp: b.timestamp,
                }
            })
            .collect();
        DagSnapshot {
            theta: dag.config().theta,
            transactions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Graphviz digraph: nodes labeled with short id, W and CW; an edge
    /// `a -> b` means `a` approves `b`. Confirmed nodes are filled.
    pub fn to_dot(&self) -> String {
        let mut out = String::from(
            "digraph dag {\n  rankdir=RL;\n  node [shape=box, fontname=\"monospace\"];\n",
        );
        for tx in &self.transactions {
            let who = tx
                .issuer
                .map_or_else(|| "genesis".to_string(), |i| format!("h{i}"));
            let style = if tx.confirmed {
                ", style=filled, fillcolor=\"#c6e5c6\""
            } else {
                ""
            };
            out.push_str(&format!(
                "  \"{}\" [label=\"{} {}\\nW={:.4}\\nCW={:.4}\"{}];\n",
                tx.id,
                &tx.id[..8],
                who,
                tx.weight,
                tx.cumulative_weight,
                style
            ));
        }
        for tx in &self.transactions {
            let mut seen: Vec<&str> = Vec::new();
            for p in &tx.parents {
                if !seen.contains(&p.as_str()) {
                    seen.push(p);
                    out.push_str(&format!("  \"{}\" -> \"{}\";\n", tx.id, p));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// One JSON object per attach or confirm event, in order.
pub fn dag_event_lines(dag: &DagState) -> String {
    let mut out = String::new();
    for e in dag.events() {
        let kind = match e.kind {
            DagEventKind::Attach => "attach",
            DagEventKind::Confirm => "confirm",
        };
        let line = serde_json::json!({ "round": e.round, "event": kind, "tx": e.id.to_string() });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedchain_core::dag_ledger::{DagConfig, Transaction, TxBody};

    fn fixture() -> DagState {
        let mut d = DagState::with_genesis(DagConfig::default(), [7; 32]).unwrap();
        let g = d.genesis().unwrap().id();
        let tx = Transaction::new(TxBody {
            parents: Some([g, g]),
            issuer: 0,
            payload: [1; 32],
            dataset_size: 100,
            slots: 1,
            accuracy: 0.8,
            weight: 0.3,
            timestamp: 1,
        })
        .unwrap();
        d.attach_transaction(tx, [0.0, 0.0]).unwrap();
        d
    }

    #[test]
    fn snapshot_round_trip_and_dot() {
        let d = fixture();
        let snap = DagSnapshot::from_dag(&d);
        assert_eq!(snap.transactions.len(), 2);
        assert_eq!(snap.transactions[0].issuer, None);
        assert!(snap.transactions[0].confirmed);
        assert_eq!(DagSnapshot::from_json(&snap.to_json()).unwrap(), snap);
        let dot = snap.to_dot();
        assert!(dot.starts_with("digraph dag {"));
        // The duplicated parent yields a single edge.
        assert_eq!(dot.matches("->").count(), 1);
        assert!(dot.contains("W=0.3000"));
        assert!(dot.contains("CW=1.0000"));
    }

    #[test]
    fn event_lines() {
        let lines = dag_event_lines(&fixture());
        let kinds: Vec<String> = lines
            .lines()
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l).unwrap()["event"]
                    .as_str()
                    .unwrap()
                    .to_string()
            })
            .collect();
        assert_eq!(kinds, ["attach", "confirm", "attach"]);
    }
}
