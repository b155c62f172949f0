//! Privacy audit of a run's message log.
//!
//! Every hospital update is turned into byte patterns a leak could take and
//! every message sent in or after the update's round is scanned for them.
//! Patterns are windows of consecutive coordinates so partial leaks are
//! caught too:
//!
//! * exact `f64` and `f32` little-endian encodings ([`WINDOW`] coordinates),
//! * the fixed-point quantization as `i64`, and its residues as `u64` modulo
//!   each ring modulus in use ([`INT_WINDOW`] coordinates, since small
//!   integers also fill secret keys and noise),
//! * any real multiple of the vector (including negation and the data share
//!   weighting), found by matching coordinate ratios of `f64` windows at
//!   every byte alignment.

use std::collections::HashMap;

use fedchain_core::secure_agg::{quantize, QuantParams};

use crate::simnet::{HospitalUpdate, Message};

/// Coordinates per floating-point pattern window.
pub const WINDOW: usize = 4;

/// Coordinates per integer pattern window.
pub const INT_WINDOW: usize = 16;

/// Bytes used to index exact patterns.
const PREFIX: usize = 8;

/// Ratios are compared after rounding to this many parts.
const RATIO_RESOLUTION: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub message: usize,
    pub from: String,
    pub to: String,
    pub hospital: usize,
    pub round: u64,
    pub encoding: String,
    pub offset: usize,
}

struct Pattern {
    hospital: usize,
    round: u64,
    encoding: String,
    bytes: Vec<u8>,
}

/// What the audit looks for.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSpec {
    pub quant: QuantParams,
    /// Ring moduli whose residues of the quantized update count as leaks.
    pub moduli: Vec<u64>,
}

fn windows<T: Copy>(v: &[T], len: usize) -> impl Iterator<Item = &[T]> {
    v.windows(len.min(v.len()).max(1))
}

/// Constant windows carry no evidence: they match any constant run.
fn flat<T: PartialEq>(w: &[T]) -> bool {
    w.iter().all(|x| *x == w[0])
}

fn exact_patterns(updates: &[HospitalUpdate], spec: &AuditSpec) -> Vec<Pattern> {
    let mut out = Vec::new();
    let mut push = |u: &HospitalUpdate, encoding: String, bytes: Vec<u8>| {
        out.push(Pattern {
            hospital: u.hospital,
            round: u.round,
            encoding,
            bytes,
        })
    };
    for u in updates {
        for (name, v) in [("delta", &u.delta), ("weighted", &u.weighted)] {
            for w in windows(v, WINDOW) {
                if flat(w) {
                    continue;
                }
                push(
                    u,
                    format!("{name}/f64"),
                    w.iter().flat_map(|x| x.to_le_bytes()).collect(),
                );
                push(
                    u,
                    format!("{name}/f32"),
                    w.iter().flat_map(|x| (*x as f32).to_le_bytes()).collect(),
                );
            }
            let Ok(q) = quantize(v, &spec.quant) else {
                continue;
            };
            for w in windows(&q, INT_WINDOW) {
                if flat(w) {
                    continue;
                }
                push(
                    u,
                    format!("{name}/quantized-i64"),
                    w.iter().flat_map(|x| x.to_le_bytes()).collect(),
                );
                for &m in &spec.moduli {
                    let bytes = w
                        .iter()
                        .flat_map(|x| (x.rem_euclid(m as i64) as u64).to_le_bytes())
                        .collect();
                    push(u, format!("{name}/quantized-mod-{m}"), bytes);
                }
            }
        }
    }
    out
}

/// Rounded coordinate ratios `v[k] / v[0]`; `None` for degenerate windows.
fn ratio_key(w: &[f64]) -> Option<Vec<i64>> {
    let first = w[0];
    if first == 0.0 || !first.is_finite() {
        return None;
    }
    let mut key = Vec::with_capacity(w.len() - 1);
    for x in &w[1..] {
        let r = x / first;
        if !r.is_finite() || r.abs() > 1e6 {
            return None;
        }
        key.push((r * RATIO_RESOLUTION).round() as i64);
    }
    Some(key)
}

/// Ratio keys of flat or sign-alternating constant windows are skipped too.
fn informative(key: &[i64]) -> bool {
    let unit = RATIO_RESOLUTION as i64;
    key.iter().any(|&k| k.abs() != unit) && key.iter().any(|&k| k != 0)
}

/// Every place an update leaked into `messages`.
pub fn audit(messages: &[Message], updates: &[HospitalUpdate], spec: &AuditSpec) -> Vec<Finding> {
    let mut findings = Vec::new();

    // Index exact patterns by their first bytes.
    let patterns = exact_patterns(updates, spec);
    let mut by_prefix: HashMap<&[u8], Vec<&Pattern>> = HashMap::new();
    for p in patterns.iter().filter(|p| p.bytes.len() >= PREFIX) {
        by_prefix.entry(&p.bytes[..PREFIX]).or_default().push(p);
    }

    let mut by_ratio: HashMap<Vec<i64>, Vec<(&HospitalUpdate, &'static str)>> = HashMap::new();
    for u in updates {
        for (name, v) in [("delta", &u.delta), ("weighted", &u.weighted)] {
            for w in windows(v, WINDOW) {
                if let Some(key) = ratio_key(w).filter(|k| informative(k)) {
                    by_ratio.entry(key).or_default().push((u, name));
                }
            }
        }
    }

    for (index, msg) in messages.iter().enumerate() {
        let mut report = |hospital: usize, round: u64, encoding: String, offset: usize| {
            findings.push(Finding {
                message: index,
                from: msg.from.clone(),
                to: msg.to.clone(),
                hospital,
                round,
                encoding,
                offset,
            })
        };
        let bytes = &msg.bytes;
        for offset in 0..bytes.len().saturating_sub(PREFIX - 1) {
            let Some(cands) = by_prefix.get(&bytes[offset..offset + PREFIX]) else {
                continue;
            };
            for p in cands {
                if msg.round >= p.round && bytes[offset..].starts_with(&p.bytes) {
                    report(p.hospital, p.round, p.encoding.clone(), offset);
                }
            }
        }
        if by_ratio.is_empty() {
            continue;
        }
        for align in 0..8 {
            let floats: Vec<f64> = bytes
                .get(align..)
                .unwrap_or(&[])
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            for (k, w) in floats.windows(WINDOW).enumerate() {
                let Some(key) = ratio_key(w) else {
                    continue;
                };
                if let Some(hits) = by_ratio.get(&key) {
                    for (u, name) in hits.iter().filter(|(u, _)| msg.round >= u.round) {
                        report(
                            u.hospital,
                            u.round,
                            format!("{name}/scaled-f64"),
                            align + 8 * k,
                        );
                    }
                }
            }
        }
    }
    findings.sort_by(|a, b| {
        (a.message, a.offset, &a.encoding).cmp(&(b.message, b.offset, &b.encoding))
    });
    findings.dedup();
    findings
}
