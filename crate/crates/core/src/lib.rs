//! Core algorithms for a blockchain-coordinated federated learning simulator.
//!
//! Everything here is pure computation over `alloc` collections so it can be
//! embedded without `std`: negacyclic polynomial rings and lattice samplers,
//! the additive secure-aggregation scheme built on them, the DAG ledger with
//! weighted-walk tip selection, federated optimization math and the local
//! models trained by each simulated hospital.
//!
//! IO, configuration files, orchestration and the command line live in the
//! companion `fedchain` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dag_ledger;
pub mod fedlearn;
pub mod local_model;
pub mod math;
pub mod polyring;
pub mod secure_agg;
pub mod seed;

pub use rand_chacha::ChaCha20Rng;
