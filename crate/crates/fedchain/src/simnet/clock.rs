//! Simulated wall time.
//!
//! Each round is charged from operation counts so the clock, and every
//! artifact stamped with it, is identical across machines and runs.
//! Hospitals work in parallel: a round costs the slowest hospital plus the
//! leader's aggregation and the global evaluation.

/// Nanosecond prices of the counted operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub ns_per_flop: f64,
    pub ns_per_butterfly: f64,
    /// Per-coefficient cost of additions, digit splits and switching.
    pub ns_per_coeff: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            ns_per_flop: 1.0,
            ns_per_butterfly: 2.0,
            ns_per_coeff: 1.0,
        }
    }
}

/// Shape of the work done in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundShape {
    pub hospitals: usize,
    pub gradients: usize,
    pub batch_size: usize,
    /// Model parameter count.
    pub dim: usize,
    pub validation_samples: usize,
    pub test_samples: usize,
    pub train_samples: usize,
    /// `None` for plaintext aggregation.
    pub crypto: Option<CryptoShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CryptoShape {
    pub degree: usize,
    pub external_degree: usize,
    pub gadget_len: usize,
    /// Plaintext blocks per update.
    pub chunks: usize,
}

impl CostModel {
    /// One negacyclic product: three residue primes, three transforms each.
    fn ring_mul_ns(&self, n: usize) -> f64 {
        let log = n.max(2).trailing_zeros() as f64;
        9.0 * (n as f64 / 2.0) * log * self.ns_per_butterfly + 3.0 * n as f64 * self.ns_per_coeff
    }

    /// Forward and backward pass over `samples` rows.
    fn pass_ns(&self, samples: usize, dim: usize) -> f64 {
        4.0 * (samples * dim) as f64 * self.ns_per_flop
    }

    fn eval_ns(&self, samples: usize, dim: usize) -> f64 {
        2.0 * (samples * dim) as f64 * self.ns_per_flop
    }

    pub fn hospital_ms(&self, s: &RoundShape) -> f64 {
        let train = s.gradients as f64 * self.pass_ns(s.batch_size, s.dim);
        // Own accuracy plus re-evaluation of two parents.
        let validate = 3.0 * self.eval_ns(s.validation_samples, s.dim);
        let crypto = s.crypto.map_or(s.dim as f64 * self.ns_per_coeff, |c| {
            let per_chunk = 2.0 * self.ring_mul_ns(c.degree)
                + self.ring_mul_ns(c.external_degree)
                + (2 * c.degree * c.gadget_len) as f64 * self.ns_per_coeff;
            c.chunks as f64 * per_chunk
        });
        (train + validate + crypto) / 1e6
    }

    pub fn leader_ms(&self, s: &RoundShape) -> f64 {
        let aggregate = s
            .crypto
            .map_or((s.hospitals * s.dim) as f64 * self.ns_per_coeff, |c| {
                let per_chunk = self.ring_mul_ns(c.external_degree)
                    + (s.hospitals * c.external_degree) as f64 * self.ns_per_coeff
                    + (2 * c.degree * c.gadget_len) as f64 * self.ns_per_coeff
                    + self.ring_mul_ns(c.degree)
                    + 2.0 * c.degree as f64 * self.ns_per_coeff;
                c.chunks as f64 * per_chunk
            });
        let evaluate = self.eval_ns(s.test_samples, s.dim)
            + s.hospitals as f64 * self.pass_ns(s.train_samples, s.dim);
        (aggregate + evaluate) / 1e6
    }

    pub fn round_ms(&self, s: &RoundShape) -> f64 {
        self.hospital_ms(s) + self.leader_ms(s)
    }
}
