use alloc::vec::Vec;

use rand::Rng;

use super::{transition_probabilities, DagError, DagState, TxId};

/// Random-walk tip selection settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkParams {
    pub walkers: usize,
    /// How many parent hops behind the newest transaction walks start.
    pub start_depth: usize,
    /// `None` means `10 * |DAG|`.
    pub max_steps: Option<usize>,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            walkers: 2,
            start_depth: 10,
            max_steps: None,
        }
    }
}

/// Attempts a walker makes to find a tip different from earlier walkers.
const DISTINCT_RETRIES: usize = 16;

/// Follow first parents back from the newest transaction, stopping at genesis.
pub fn walk_start(dag: &DagState, depth: usize) -> Result<TxId, DagError> {
    let mut x = dag.latest().ok_or(DagError::EmptyDag)?;
    for _ in 0..depth {
        match x.body().parents {
            Some([p, _]) => x = dag.get(&p).expect("parents are attached first"),
            None => break,
        }
    }
    Ok(x.id())
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// One walk from `start` along approvals until a tip is reached.
pub fn random_walk<R: Rng + ?Sized>(
    dag: &DagState,
    start: TxId,
    max_steps: usize,
    rng: &mut R,
) -> Result<TxId, DagError> {
    let mut x = start;
    for _ in 0..=max_steps {
        let approvers = dag.approvers(&x);
        if approvers.is_empty() {
            return Ok(x);
        }
        let cw_x = dag.cumulative_weight(&x).ok_or(DagError::OrphanParent(x))?;
        let cws: Vec<f64> = approvers
            .iter()
            .map(|a| dag.cumulative_weight(&a.by).expect("approver attached"))
            .collect();
        let probs = transition_probabilities(cw_x, &cws)?;
        x = approvers[sample_index(&probs, rng)].by;
    }
    Err(DagError::WalkTimeout { steps: max_steps })
}

/// Run `wp.walkers` independent walks and return their tips.
///
/// Later walkers retry a few times to land on a tip not yet chosen; when the
/// DAG has fewer distinct reachable tips, duplicates are returned.
pub fn tip_select<R: Rng + ?Sized>(
    dag: &DagState,
    wp: &WalkParams,
    rng: &mut R,
) -> Result<Vec<TxId>, DagError> {
    if wp.walkers == 0 {
        return Err(DagError::InvalidConfig("walker count must be at least 1"));
    }
    let start = walk_start(dag, wp.start_depth)?;
    let max_steps = wp.max_steps.unwrap_or(10 * dag.len());
    let mut tips: Vec<TxId> = Vec::with_capacity(wp.walkers);
    for _ in 0..wp.walkers {
        let mut tip = random_walk(dag, start, max_steps, rng)?;
        let mut tries = 1;
        while tips.contains(&tip) && tries < DISTINCT_RETRIES {
            tip = random_walk(dag, start, max_steps, rng)?;
            tries += 1;
        }
        tips.push(tip);
    }
    Ok(tips)
}
