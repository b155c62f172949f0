//! Deterministic simulation of hospitals training one model over the ledger.
//!
//! Each episode elects a leader round-robin and runs its time slots. In a
//! slot every enrolled hospital trains from the current global model, sends
//! its weighted update (encrypted shares in secure mode) and attaches a
//! transaction to the DAG after re-evaluating the two parents the tip walk
//! picked. The leader unmasks and decrypts only the sum, steps the global
//! model and broadcasts it. All randomness comes from per-purpose streams
//! derived from the config seed, and the clock is a cost model, so a config
//! always produces byte-identical outputs.

pub mod clock;

use std::collections::BTreeMap;
use std::io;

use fedchain_core::dag_ledger::{
    own_weight, tip_select, DagError, DagState, Transaction, TxBody, TxId,
};
use fedchain_core::fedlearn::{
    aggregate_finish, aggregate_global, global_loss, loss_plateaued, time_budget_ok,
    AggregationEntry, FedError, RoundBudget,
};
use fedchain_core::local_model::{
    gen_synthetic, train_local, Dataset, LinearSoftmax, ModelError, TrainParams,
};
use fedchain_core::secure_agg::{
    aggregate_and_unwrap, chunk_plaintext, codec, decrypt_sum, dequantize, encrypt_internal,
    gadget_wrap, modulus_switch, quantize, setup, CryptoContext, CryptoError, CryptoParams,
    ExternalShare, KeyMaterial,
};
use fedchain_core::seed;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{AggregationMode, ConfigError, ExperimentConfig};
use clock::{CostModel, CryptoShape, RoundShape};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("round {round}: crypto failure: {source}")]
    Crypto { round: u64, source: CryptoError },
    #[error("round {round}: ledger failure: {source}")]
    Dag { round: u64, source: DagError },
    #[error("round {round}: local model failure: {source}")]
    Model { round: u64, source: ModelError },
    #[error("round {round}: aggregation failure: {source}")]
    Fed { round: u64, source: FedError },
    #[error("output error: {0}")]
    Io(#[from] io::Error),
}

fn crypto_err(round: u64) -> impl Fn(CryptoError) -> SimError {
    move |source| SimError::Crypto { round, source }
}
fn dag_err(round: u64) -> impl Fn(DagError) -> SimError {
    move |source| SimError::Dag { round, source }
}
fn model_err(round: u64) -> impl Fn(ModelError) -> SimError {
    move |source| SimError::Model { round, source }
}
fn fed_err(round: u64) -> impl Fn(FedError) -> SimError {
    move |source| SimError::Fed { round, source }
}

/// One row of the metrics series.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub episode: u64,
    pub round: u64,
    pub hospitals: usize,
    pub grads_per_hospital: usize,
    /// Accuracy of the global model on the held-out test split.
    pub global_accuracy: f64,
    /// Mean of the hospitals' local training losses at the global model.
    pub global_loss: f64,
    /// Simulated time since the start of the run.
    pub wall_time_ms: f64,
    pub confirmed_tx: usize,
}

/// One protocol event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub ts: f64,
    pub round: u64,
    pub actor: String,
    pub event: String,
    pub detail: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Key,
    Share,
    Update,
    Transaction,
    Model,
}

/// Bytes that crossed a participant boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub round: u64,
    pub from: String,
    pub to: String,
    pub kind: MessageKind,
    pub bytes: Vec<u8>,
}

/// A hospital's private update, kept for auditing and never sent as is.
#[derive(Debug, Clone, PartialEq)]
pub struct HospitalUpdate {
    pub round: u64,
    pub hospital: usize,
    /// `theta - w_local`.
    pub delta: Vec<f64>,
    /// `alpha * l * delta`, the vector that gets encrypted.
    pub weighted: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    Plateau { round: u64 },
}

impl StopReason {
    /// Short text form, e.g. `plateau@7`.
    pub fn label(&self) -> String {
        match self {
            StopReason::Completed => "completed".into(),
            StopReason::Plateau { round } => format!("plateau@{round}"),
        }
    }
}

/// Receives metrics and events as they are produced.
pub trait Sink {
    fn round(&mut self, metrics: &RoundMetrics) -> io::Result<()>;
    fn event(&mut self, event: &Event) -> io::Result<()>;
}

/// Keeps everything in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub rounds: Vec<RoundMetrics>,
    pub events: Vec<Event>,
}

impl Sink for MemorySink {
    fn round(&mut self, metrics: &RoundMetrics) -> io::Result<()> {
        self.rounds.push(metrics.clone());
        Ok(())
    }

    fn event(&mut self, event: &Event) -> io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep every message for the privacy audit.
    pub record_messages: bool,
}

#[derive(Debug)]
pub struct RunOutput {
    pub metrics: Vec<RoundMetrics>,
    pub model: Vec<f64>,
    pub dag: DagState,
    pub messages: Vec<Message>,
    pub updates: Vec<HospitalUpdate>,
    pub stop: StopReason,
    /// Derived crypto parameters in secure mode.
    pub params: Option<CryptoParams>,
}

/// Little-endian `f64` encoding of a vector.
pub fn f64_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn hospital(h: usize) -> String {
    format!("hospital-{h}")
}

fn stream_index(round: u64, h: usize) -> u64 {
    (round << 20) | h as u64
}

/// Synthetic splits for a config: one per hospital, then validation and test.
pub fn datasets(cfg: &ExperimentConfig) -> Result<(Vec<Dataset>, Dataset, Dataset), ModelError> {
    let seed = cfg.sim.seed;
    let train = (0..cfg.sim.hospitals)
        .map(|h| {
            gen_synthetic(
                &cfg.synthetic(cfg.data.samples_per_hospital),
                seed::derive(seed, "data", h as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let validation = gen_synthetic(
        &cfg.synthetic(cfg.data.validation_samples),
        seed::derive(seed, "validation", 0),
    )?;
    let test = gen_synthetic(
        &cfg.synthetic(cfg.data.test_samples),
        seed::derive(seed, "test", 0),
    )?;
    Ok((train, validation, test))
}

/// Key material for `parties` under the config seed and key epoch.
pub fn committee_keys(
    cfg: &ExperimentConfig,
    ctx: &CryptoContext,
    parties: usize,
    epoch: u64,
) -> Result<KeyMaterial, CryptoError> {
    setup(parties, ctx, &mut seed::stream(cfg.sim.seed, "keys", epoch))
}

/// Run every episode of `cfg`, streaming metrics and events into `sink`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    sink: &mut dyn Sink,
) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    Sim::new(cfg, opts, sink)?.run()
}

struct Local {
    hospital: usize,
    w: Vec<f64>,
    accuracy: f64,
    alpha: f64,
    credibility: f64,
    payload: [u8; 32],
    shares: Vec<ExternalShare>,
}

struct Sim<'a> {
    cfg: &'a ExperimentConfig,
    sink: &'a mut dyn Sink,
    record: bool,
    messages: Vec<Message>,
    updates: Vec<HospitalUpdate>,
    clock_ms: f64,
    cost: CostModel,
    model: LinearSoftmax,
    data: Vec<Dataset>,
    validation: Dataset,
    test: Dataset,
    crypto: Option<CryptoContext>,
    keys: Option<KeyMaterial>,
    key_epoch: u64,
    committee: Vec<usize>,
    theta: Vec<f64>,
    dag: DagState,
    /// Model behind each transaction, for parent re-evaluation.
    store: BTreeMap<TxId, Vec<f64>>,
}

impl<'a> Sim<'a> {
    fn new(
        cfg: &'a ExperimentConfig,
        opts: &RunOptions,
        sink: &'a mut dyn Sink,
    ) -> Result<Self, SimError> {
        let (data, validation, test) = datasets(cfg).map_err(model_err(0))?;
        let model = LinearSoftmax::for_data(&validation);
        let crypto = match cfg.sim.mode {
            AggregationMode::Secure => {
                let params = CryptoParams::derive(&cfg.param_request()).map_err(crypto_err(0))?;
                Some(CryptoContext::new(params).map_err(crypto_err(0))?)
            }
            AggregationMode::Plaintext => None,
        };
        let theta = model.zeros();
        let dag = DagState::with_genesis(cfg.dag_config(), sha256(&f64_bytes(&theta)))
            .map_err(dag_err(0))?;
        let genesis = dag.genesis().expect("genesis present").id();
        let mut store = BTreeMap::new();
        store.insert(genesis, theta.clone());
        Ok(Sim {
            cfg,
            sink,
            record: opts.record_messages,
            messages: Vec::new(),
            updates: Vec::new(),
            clock_ms: 0.0,
            cost: CostModel::default(),
            model,
            data,
            validation,
            test,
            crypto,
            keys: None,
            key_epoch: 0,
            committee: (0..cfg.sim.hospitals).collect(),
            theta,
            dag,
            store,
        })
    }

    fn emit(
        &mut self,
        round: u64,
        actor: &str,
        event: &str,
        detail: Value,
    ) -> Result<(), SimError> {
        self.sink.event(&Event {
            ts: self.clock_ms,
            round,
            actor: actor.to_string(),
            event: event.to_string(),
            detail,
        })?;
        Ok(())
    }

    fn send(
        &mut self,
        round: u64,
        from: &str,
        to: &str,
        kind: MessageKind,
        bytes: impl FnOnce() -> Vec<u8>,
    ) {
        if self.record {
            self.messages.push(Message {
                round,
                from: from.to_string(),
                to: to.to_string(),
                kind,
                bytes: bytes(),
            });
        }
    }

    fn shape(&self) -> RoundShape {
        let dim = self.model.dim();
        RoundShape {
            hospitals: self.committee.len(),
            gradients: self.cfg.fed.gradients_per_hospital,
            batch_size: self.cfg.fed.batch_size,
            dim,
            validation_samples: self.validation.len(),
            test_samples: self.test.len(),
            train_samples: self.cfg.data.samples_per_hospital,
            crypto: self.crypto.as_ref().map(|ctx| {
                let p = ctx.params();
                CryptoShape {
                    degree: p.degree(),
                    external_degree: p.external().degree(),
                    gadget_len: p.gadget_len(),
                    chunks: dim.div_ceil(p.degree()),
                }
            }),
        }
    }

    /// Fresh keys for the current committee.
    fn rekey(&mut self, round: u64) -> Result<(), SimError> {
        let Some(ctx) = &self.crypto else {
            return Ok(());
        };
        let keys = committee_keys(self.cfg, ctx, self.committee.len(), self.key_epoch)
            .map_err(crypto_err(round))?;
        let params = *ctx.params();
        let epoch = self.key_epoch;
        self.key_epoch += 1;
        self.send(round, "dealer", "all", MessageKind::Key, || {
            codec::encode_public_key(&keys.public, &params)
        });
        for (k, &h) in self.committee.clone().iter().enumerate() {
            let part = &keys.parties[k];
            self.send(round, "dealer", &hospital(h), MessageKind::Key, || {
                codec::encode_party_secret(part, &params)
            });
        }
        self.send(round, "dealer", "ledger", MessageKind::Key, || {
            codec::encode_ledger_secret(&keys.ledger, &params)
        });
        self.send(round, "dealer", "evaluator", MessageKind::Key, || {
            codec::encode_evaluator_secret(&keys.evaluator, &params)
        });
        let committee = self.committee.clone();
        self.emit(
            round,
            "dealer",
            "keygen",
            json!({ "epoch": epoch, "parties": committee, "params_digest": hex::encode(params.digest()) }),
        )?;
        self.keys = Some(keys);
        Ok(())
    }

    /// Remove hospitals scheduled to drop out by `round`; re-key if any left.
    fn apply_dropouts(&mut self, round: u64) -> Result<(), SimError> {
        let leaving: Vec<usize> = self
            .cfg
            .sim
            .dropouts
            .iter()
            .filter(|d| d.round <= round && self.committee.contains(&d.hospital))
            .map(|d| d.hospital)
            .collect();
        if leaving.is_empty() {
            return Ok(());
        }
        self.committee.retain(|h| !leaving.contains(h));
        for h in leaving {
            self.emit(
                round,
                &hospital(h),
                "dropout",
                json!({ "remaining": self.committee.len() }),
            )?;
        }
        self.rekey(round)
    }

    fn time_limits(&self) -> Vec<f64> {
        match &self.cfg.fed.time_limits_ms {
            Some(t) => self.committee.iter().map(|&h| t[h]).collect(),
            None => Vec::new(),
        }
    }

    fn credibility(&self, h: usize) -> f64 {
        self.cfg.fed.credibility.as_ref().map_or(1.0, |c| c[h])
    }

    fn run(mut self) -> Result<RunOutput, SimError> {
        let cfg = self.cfg;
        self.emit(
            0,
            "sim",
            "start",
            json!({
                "hospitals": cfg.sim.hospitals,
                "mode": cfg.sim.mode,
                "dim": self.model.dim(),
                "seed": cfg.sim.seed,
            }),
        )?;
        self.rekey(0)?;
        let mut metrics = Vec::new();
        let mut losses = Vec::new();
        let mut round = 0u64;
        let mut stop = StopReason::Completed;
        'episodes: for episode in 1..=cfg.sim.episodes as u64 {
            let mut budget = RoundBudget {
                limits: self.time_limits(),
                elapsed: Vec::new(),
            };
            let mut leader = None;
            for slot in 1..=cfg.sim.slots_per_episode as u64 {
                let next = round + 1;
                self.apply_dropouts(next)?;
                let elected = self.committee[(episode as usize - 1) % self.committee.len()];
                if leader != Some(elected) {
                    leader = Some(elected);
                    self.emit(
                        next,
                        &hospital(elected),
                        "leader",
                        json!({ "episode": episode }),
                    )?;
                }
                let shape = self.shape();
                let (local_ms, dt) = (self.cost.hospital_ms(&shape), self.cost.round_ms(&shape));
                budget.elapsed.push(dt);
                if !time_budget_ok(&budget) {
                    budget.elapsed.pop();
                    self.emit(
                        next,
                        "sim",
                        "budget_exhausted",
                        json!({ "episode": episode, "slot": slot }),
                    )?;
                    break;
                }
                round = next;
                let m = self.round(episode, round, elected, local_ms, dt)?;
                self.sink.round(&m)?;
                losses.push(m.global_loss);
                metrics.push(m);
                if loss_plateaued(&losses, cfg.fed.plateau_window, cfg.fed.plateau_tol) {
                    self.emit(
                        round,
                        "sim",
                        "plateau",
                        json!({ "window": cfg.fed.plateau_window }),
                    )?;
                    stop = StopReason::Plateau { round };
                    break 'episodes;
                }
            }
        }
        self.emit(
            round,
            "sim",
            "finish",
            json!({ "rounds": round, "transactions": self.dag.len() }),
        )?;
        Ok(RunOutput {
            metrics,
            model: self.theta,
            dag: self.dag,
            messages: self.messages,
            updates: self.updates,
            stop,
            params: self.crypto.as_ref().map(|c| *c.params()),
        })
    }

    /// One slot. Hospital events are stamped when local work ends
    /// (`local_ms` in), leader events when the slot ends (`dt` in).
    fn round(
        &mut self,
        episode: u64,
        round: u64,
        leader: usize,
        local_ms: f64,
        dt: f64,
    ) -> Result<RoundMetrics, SimError> {
        let start = self.clock_ms;
        self.clock_ms = start + local_ms;
        let mut locals = self.train(round)?;
        self.transmit(round, leader, &mut locals)?;
        self.attach(round, &locals)?;
        self.clock_ms = start + dt;
        let theta = self.aggregate(round, leader, &locals)?;
        let leader_name = hospital(leader);
        let bytes = f64_bytes(&theta);
        let digest = sha256(&bytes);
        self.send(round, &leader_name, "all", MessageKind::Model, || bytes);
        self.emit(
            round,
            &leader_name,
            "broadcast",
            json!({ "model_digest": hex::encode(digest) }),
        )?;
        self.theta = theta;

        let global_accuracy = self
            .model
            .accuracy(&self.theta, &self.test)
            .map_err(model_err(round))?;
        let local: Vec<f64> = self
            .committee
            .iter()
            .map(|&h| self.model.loss(&self.theta, &self.data[h]))
            .collect::<Result<_, _>>()
            .map_err(model_err(round))?;
        let loss = global_loss(&local, None).map_err(fed_err(round))?;
        Ok(RoundMetrics {
            episode,
            round,
            hospitals: self.committee.len(),
            grads_per_hospital: self.cfg.fed.gradients_per_hospital,
            global_accuracy,
            global_loss: loss,
            wall_time_ms: self.clock_ms,
            confirmed_tx: self.dag.confirmed().len(),
        })
    }

    /// Local training from the current global model, in hospital order.
    fn train(&mut self, round: u64) -> Result<Vec<Local>, SimError> {
        let fed = &self.cfg.fed;
        let params = TrainParams {
            eta: fed.eta,
            gradients: fed.gradients_per_hospital,
            batch_size: fed.batch_size,
        };
        let total: f64 = self
            .committee
            .iter()
            .map(|&h| self.data[h].len() as f64)
            .sum();
        let mut locals = Vec::with_capacity(self.committee.len());
        for h in self.committee.clone() {
            let mut rng = seed::stream(self.cfg.sim.seed, "train", stream_index(round, h));
            let (w, grads) = train_local(&self.theta, &self.data[h], &params, &mut rng)
                .map_err(model_err(round))?;
            let accuracy = self
                .model
                .accuracy(&w, &self.validation)
                .map_err(model_err(round))?;
            self.emit(
                round,
                &hospital(h),
                "train",
                json!({ "gradients": grads, "accuracy": accuracy }),
            )?;
            let alpha = self.data[h].len() as f64 / total;
            let credibility = self.credibility(h);
            let delta: Vec<f64> = self.theta.iter().zip(&w).map(|(t, x)| t - x).collect();
            let weighted = delta.iter().map(|d| alpha * credibility * d).collect();
            self.updates.push(HospitalUpdate {
                round,
                hospital: h,
                delta,
                weighted,
            });
            locals.push(Local {
                hospital: h,
                w,
                accuracy,
                alpha,
                credibility,
                payload: [0; 32],
                shares: Vec::new(),
            });
        }
        Ok(locals)
    }

    fn weighted_update(&self, round: u64, h: usize) -> &[f64] {
        let u = self
            .updates
            .iter()
            .rev()
            .find(|u| u.round == round && u.hospital == h)
            .expect("update recorded during training");
        &u.weighted
    }

    /// Encrypt and wrap each update (secure) or send it in the clear (plaintext).
    fn transmit(
        &mut self,
        round: u64,
        leader: usize,
        locals: &mut [Local],
    ) -> Result<(), SimError> {
        let seed = self.cfg.sim.seed;
        for (k, local) in locals.iter_mut().enumerate() {
            let h = local.hospital;
            let weighted = self.weighted_update(round, h).to_vec();
            let Some(ctx) = &self.crypto else {
                let bytes = f64_bytes(&weighted);
                local.payload = sha256(&bytes);
                self.send(
                    round,
                    &hospital(h),
                    &hospital(leader),
                    MessageKind::Update,
                    || bytes,
                );
                continue;
            };
            let keys = self.keys.as_ref().expect("keys exist in secure mode");
            let params = ctx.params();
            let qp = self.cfg.quant_params();
            let clipped = weighted.iter().filter(|x| x.abs() > qp.clip).count();
            let quantized = quantize(&weighted, &qp).map_err(crypto_err(round))?;
            let mut rng = seed::stream(seed, "encrypt", stream_index(round, h));
            let mut hasher = Sha256::new();
            let mut encoded = Vec::new();
            for chunk in chunk_plaintext(&quantized, params.degree()) {
                let ct = encrypt_internal(&chunk, &keys.public, ctx, &mut rng)
                    .map_err(crypto_err(round))?;
                let share = gadget_wrap(&ct, &keys.parties[k], &keys.public, ctx, &mut rng)
                    .map_err(crypto_err(round))?;
                let bytes = codec::encode_share(&share, params);
                hasher.update(&bytes);
                encoded.push(bytes);
                local.shares.push(share);
            }
            local.payload = hasher.finalize().into();
            for bytes in encoded {
                self.send(round, &hospital(h), "ledger", MessageKind::Share, || bytes);
            }
            if clipped > 0 {
                self.emit(
                    round,
                    &hospital(h),
                    "clip",
                    json!({ "coordinates": clipped }),
                )?;
            }
        }
        Ok(())
    }

    /// Each hospital picks two parents, re-evaluates them and attaches.
    fn attach(&mut self, round: u64, locals: &[Local]) -> Result<(), SimError> {
        let cfg = self.cfg;
        let total: u64 = self
            .committee
            .iter()
            .map(|&h| self.data[h].len() as u64)
            .sum();
        let walk = cfg.walk_params();
        for local in locals {
            let h = local.hospital;
            let mut rng = seed::stream(cfg.sim.seed, "walk", stream_index(round, h));
            let tips = tip_select(&self.dag, &walk, &mut rng).map_err(dag_err(round))?;
            let parents = [tips[0], *tips.get(1).unwrap_or(&tips[0])];
            let mut measured = [0.0; 2];
            for (m, p) in measured.iter_mut().zip(&parents) {
                *m = self
                    .model
                    .accuracy(&self.store[p], &self.validation)
                    .map_err(model_err(round))?;
            }
            let mut sum_dm = 0u64;
            for (i, p) in parents.iter().enumerate() {
                if i == 0 || parents[0] != parents[1] {
                    sum_dm += self.dag.get(p).expect("tip in DAG").body().dataset_size;
                }
            }
            let size = self.data[h].len() as u64;
            let weight = own_weight(
                size as f64,
                cfg.dag.rho,
                sum_dm as f64,
                total as f64,
                1.0,
                local.accuracy,
            )
            .map_err(dag_err(round))?;
            let tx = Transaction::new(TxBody {
                parents: Some(parents),
                issuer: h as u32,
                payload: local.payload,
                dataset_size: size,
                slots: 1,
                accuracy: local.accuracy,
                weight,
                timestamp: round,
            })
            .map_err(dag_err(round))?;
            let id = tx.id();
            self.send(
                round,
                &hospital(h),
                "ledger",
                MessageKind::Transaction,
                || tx.body().to_bytes(),
            );
            let confirmed = self
                .dag
                .attach_transaction(tx, measured)
                .map_err(dag_err(round))?;
            self.store.insert(id, local.w.clone());
            self.emit(
                round,
                &hospital(h),
                "attach",
                json!({
                    "tx": id.to_string(),
                    "parents": [parents[0].to_string(), parents[1].to_string()],
                    "weight": weight,
                    "accuracy": local.accuracy,
                }),
            )?;
            for c in confirmed {
                self.emit(round, "ledger", "confirm", json!({ "tx": c.to_string() }))?;
            }
        }
        Ok(())
    }

    /// The leader's global step.
    fn aggregate(
        &mut self,
        round: u64,
        leader: usize,
        locals: &[Local],
    ) -> Result<Vec<f64>, SimError> {
        let eta = self.cfg.fed.server_eta;
        let dim = self.model.dim();
        let Some(ctx) = &self.crypto else {
            // Absent hospitals stay in the entry list as empty slots.
            let entries: Vec<AggregationEntry> = (0..self.cfg.sim.hospitals)
                .map(|h| match locals.iter().find(|l| l.hospital == h) {
                    Some(l) => AggregationEntry {
                        gradient: Some(self.theta.iter().zip(&l.w).map(|(t, x)| t - x).collect()),
                        share: l.alpha,
                        credibility: l.credibility,
                    },
                    None => AggregationEntry {
                        gradient: None,
                        share: 0.0,
                        credibility: 0.0,
                    },
                })
                .collect();
            let (_, theta) =
                aggregate_global(&entries, &self.theta, eta).map_err(fed_err(round))?;
            self.emit(
                round,
                &hospital(leader),
                "aggregate",
                json!({ "updates": locals.len() }),
            )?;
            return Ok(theta);
        };
        let keys = self.keys.as_ref().expect("keys exist in secure mode");
        let chunks = locals.first().map_or(0, |l| l.shares.len());
        let mut sum_q = Vec::with_capacity(chunks * ctx.params().degree());
        let mut worst_noise = 0.0f64;
        for c in 0..chunks {
            let set: Vec<ExternalShare> = locals.iter().map(|l| l.shares[c].clone()).collect();
            let ct = aggregate_and_unwrap(&set, &keys.ledger, &keys.public, ctx)
                .map_err(crypto_err(round))?;
            let switched = modulus_switch(&ct, ctx).map_err(crypto_err(round))?;
            worst_noise = worst_noise.max(switched.noise);
            sum_q.extend(decrypt_sum(&switched, &keys.evaluator, ctx).map_err(crypto_err(round))?);
        }
        sum_q.truncate(dim);
        let sum = dequantize(&sum_q, &self.cfg.quant_params());
        let total: f64 = locals.iter().map(|l| l.alpha * l.credibility).sum();
        let (_, theta) = aggregate_finish(&sum, total, &self.theta, eta).map_err(fed_err(round))?;
        self.emit(
            round,
            &hospital(leader),
            "aggregate",
            json!({ "shares": locals.len() * chunks, "noise_bound": worst_noise }),
        )?;
        Ok(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small(seed: u64, mode: AggregationMode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::with_seed(seed);
        cfg.crypto.degree = 64;
        cfg.data.features = 5;
        cfg.data.samples_per_hospital = 100;
        cfg.data.validation_samples = 100;
        cfg.data.test_samples = 200;
        cfg.fed.gradients_per_hospital = 20;
        cfg.sim.episodes = 2;
        cfg.sim.slots_per_episode = 2;
        cfg.sim.mode = mode;
        cfg
    }

    fn run(cfg: &ExperimentConfig) -> (RunOutput, MemorySink) {
        let mut sink = MemorySink::default();
        let out = run_experiment(
            cfg,
            &RunOptions {
                record_messages: true,
            },
            &mut sink,
        )
        .unwrap();
        (out, sink)
    }

    #[test]
    fn rounds_transactions_and_metrics() {
        let (out, sink) = run(&small(1, AggregationMode::Secure));
        assert_eq!(out.metrics.len(), 4);
        assert_eq!(sink.rounds, out.metrics);
        assert_eq!(out.dag.len(), 1 + 3 * 4);
        assert!(out
            .metrics
            .windows(2)
            .all(|w| w[1].wall_time_ms > w[0].wall_time_ms));
        assert!(out
            .metrics
            .iter()
            .all(|m| (0.0..=1.0).contains(&m.global_accuracy)));
        assert_eq!(
            out.metrics.iter().map(|m| m.episode).collect::<Vec<_>>(),
            [1, 1, 2, 2]
        );
        let leaders: Vec<&str> = sink
            .events
            .iter()
            .filter(|e| e.event == "leader")
            .map(|e| e.actor.as_str())
            .collect();
        assert_eq!(leaders, ["hospital-0", "hospital-1"]);
    }

    #[test]
    fn single_hospital_global_is_local_model() {
        let mut cfg = small(2, AggregationMode::Plaintext);
        cfg.sim.hospitals = 1;
        cfg.sim.episodes = 1;
        cfg.sim.slots_per_episode = 1;
        let (out, _) = run(&cfg);
        let (data, _, _) = datasets(&cfg).unwrap();
        let params = TrainParams {
            eta: cfg.fed.eta,
            gradients: cfg.fed.gradients_per_hospital,
            batch_size: cfg.fed.batch_size,
        };
        let model = LinearSoftmax::for_data(&data[0]);
        let mut rng = seed::stream(cfg.sim.seed, "train", stream_index(1, 0));
        let (w, _) = train_local(&model.zeros(), &data[0], &params, &mut rng).unwrap();
        assert!(out.model.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));

        cfg.sim.mode = AggregationMode::Secure;
        let (secure, _) = run(&cfg);
        let tol = 1.0 / (2.0 * cfg.quant.scale);
        assert!(secure
            .model
            .iter()
            .zip(&w)
            .all(|(a, b)| (a - b).abs() <= tol));
    }

    #[test]
    fn secure_tracks_plaintext_control() {
        let mut cfg = small(3, AggregationMode::Secure);
        cfg.sim.episodes = 1;
        cfg.sim.slots_per_episode = 1;
        let (secure, _) = run(&cfg);
        cfg.sim.mode = AggregationMode::Plaintext;
        let (plain, _) = run(&cfg);
        let tol = 3.0 / (2.0 * cfg.quant.scale);
        for (a, b) in secure.model.iter().zip(&plain.model) {
            assert!((a - b).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn dropout_rekeys_and_continues() {
        let mut cfg = small(4, AggregationMode::Secure);
        cfg.sim.dropouts = vec![crate::config::Dropout {
            round: 2,
            hospital: 1,
        }];
        let (out, sink) = run(&cfg);
        assert_eq!(
            out.metrics.iter().map(|m| m.hospitals).collect::<Vec<_>>(),
            [3, 2, 2, 2]
        );
        let keygens = sink.events.iter().filter(|e| e.event == "keygen").count();
        assert_eq!(keygens, 2);
        assert!(out.updates.iter().all(|u| u.round < 2 || u.hospital != 1));

        cfg.sim.mode = AggregationMode::Plaintext;
        let (plain, _) = run(&cfg);
        assert_eq!(plain.metrics.len(), 4);
    }

    #[test]
    fn budget_gates_slots() {
        let mut cfg = small(5, AggregationMode::Plaintext);
        let mut probe = MemorySink::default();
        let full = run_experiment(&cfg, &RunOptions::default(), &mut probe).unwrap();
        let one_round = full.metrics[0].wall_time_ms;
        // Room for one slot per episode.
        cfg.fed.time_limits_ms = Some(vec![one_round * 1.5; 3]);
        let (out, sink) = run(&cfg);
        assert_eq!(out.metrics.len(), 2);
        assert_eq!(
            sink.events
                .iter()
                .filter(|e| e.event == "budget_exhausted")
                .count(),
            2
        );
        cfg.fed.time_limits_ms = Some(vec![0.0; 3]);
        let (empty, _) = run(&cfg);
        assert!(empty.metrics.is_empty());
    }

    #[test]
    fn plateau_stops_early() {
        let mut cfg = small(6, AggregationMode::Plaintext);
        cfg.sim.episodes = 10;
        cfg.fed.plateau_window = 1;
        cfg.fed.plateau_tol = 10.0;
        let (out, _) = run(&cfg);
        assert_eq!(out.stop, StopReason::Plateau { round: 2 });
        assert_eq!(out.metrics.len(), 2);
    }
}
