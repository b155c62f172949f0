//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when all
//! checks pass; the process fails if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use fedchain::artifacts::{run_to_dir, DirOptions};
use fedchain::audit::{audit, AuditSpec};
use fedchain::config::{AggregationMode, ExperimentConfig};
use fedchain::presets;
use fedchain::simnet::{run_experiment, MemorySink, RunOptions, RunOutput};
use fedchain_core::dag_ledger::{
    cumulative_weight, own_weight, random_walk, DagConfig, DagState, Transaction, TxBody, TxId,
};
use fedchain_core::fedlearn::{aggregate_global, sgd_step, AggregationEntry};
use fedchain_core::local_model::{gen_synthetic, LinearRegression, LinearSoftmax, SyntheticSpec};
use fedchain_core::polyring::{sample_ternary, sample_uniform, RingElement, RingParams};
use fedchain_core::secure_agg::{
    aggregate_and_unwrap, decrypt_sum, dequantize, encrypt_internal, gadget_wrap, modulus_switch,
    quantize, setup, CryptoContext, CryptoParams, ParamRequest, QuantParams,
};
use fedchain_core::seed;

/// Outcome of one criterion: pass flag plus a short measurement summary.
type Outcome = Result<(bool, String), String>;

const SEEDS: u64 = 5;

fn secure_aggregation() -> Outcome {
    let started = Instant::now();
    let params = CryptoParams::derive(&ParamRequest {
        degree: 256,
        ..ParamRequest::default()
    })
    .map_err(|e| e.to_string())?;
    let ctx = CryptoContext::new(params).map_err(|e| e.to_string())?;
    let qp = QuantParams::default();
    let d = params.degree();
    let mut worst = Vec::new();
    let mut ok = true;
    for n in [1usize, 2, 3, 8] {
        let mut rng = seed::stream(7, "acceptance-secure", n as u64);
        let keys = setup(n, &ctx, &mut rng).map_err(|e| e.to_string())?;
        let bound = n as f64 / (2.0 * qp.scale);
        let mut max_err = 0.0f64;
        for _ in 0..100 {
            // Range exceeds the clip bound so clipping is exercised too.
            let grads: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect())
                .collect();
            let shares = grads
                .iter()
                .zip(&keys.parties)
                .map(|(g, party)| {
                    let m = quantize(g, &qp)?;
                    let ct = encrypt_internal(&m, &keys.public, &ctx, &mut rng)?;
                    gadget_wrap(&ct, party, &keys.public, &ctx, &mut rng)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let ct = aggregate_and_unwrap(&shares, &keys.ledger, &keys.public, &ctx)
                .map_err(|e| e.to_string())?;
            let switched = modulus_switch(&ct, &ctx).map_err(|e| e.to_string())?;
            let sum = dequantize(
                &decrypt_sum(&switched, &keys.evaluator, &ctx).map_err(|e| e.to_string())?,
                &qp,
            );
            for (k, s) in sum.iter().enumerate() {
                let expected: f64 = grads.iter().map(|g| qp.clamp(g[k])).sum();
                max_err = max_err.max((s - expected).abs());
            }
        }
        ok &= max_err <= bound;
        worst.push(format!("N={n} max err {max_err:.2e} (bound {bound:.2e})"));
    }
    let elapsed = started.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    Ok((
        ok,
        format!("{}; {:.1}s of 60s", worst.join(", "), elapsed.as_secs_f64()),
    ))
}

/// Negacyclic schoolbook product reduced term by term.
#[allow(clippy::needless_range_loop)]
fn oracle_mul(a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
    let d = a.len();
    let m128 = m as u128;
    let mut out = vec![0u128; d];
    for i in 0..d {
        for j in 0..d {
            let t = (a[i] as u128 * b[j] as u128) % m128;
            let k = (i + j) % d;
            out[k] = if i + j < d {
                (out[k] + t) % m128
            } else {
                (out[k] + m128 - t) % m128
            };
        }
    }
    out.into_iter().map(|x| x as u64).collect()
}

fn ring_oracle() -> Outcome {
    let mut rng = seed::stream(11, "acceptance-ring", 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let d = 1usize << rng.gen_range(0..=4);
        let m = match rng.gen_range(0..3) {
            0 => rng.gen_range(1u64..1 << 20) * 2 + 1,
            1 => rng.gen_range(1u64..1 << 40) * 2 + 1,
            _ => rng.gen_range(1u64..(1 << 61) - 1) * 2 + 1,
        };
        let params = RingParams::new(d, m).map_err(|e| e.to_string())?;
        let a: Vec<u64> = (0..d).map(|_| rng.gen_range(0..m)).collect();
        let b: Vec<u64> = (0..d).map(|_| rng.gen_range(0..m)).collect();
        let ra = RingElement::from_coeffs(params, a.clone()).map_err(|e| e.to_string())?;
        let rb = RingElement::from_coeffs(params, b.clone()).map_err(|e| e.to_string())?;
        let got = ra.mul(&rb).map_err(|e| e.to_string())?;
        if got.coeffs() != oracle_mul(&a, &b, m).as_slice() {
            mismatches += 1;
        }
    }
    Ok((
        mismatches == 0,
        format!("{mismatches} mismatches in 1000 products, d <= 16"),
    ))
}

fn sampler_laws() -> Outcome {
    let n = 1_000_000;
    let mut rng = seed::stream(13, "acceptance-sampler", 0);
    let t = sample_ternary(n, &mut rng);
    let freq = |v: i64| t.iter().filter(|&&x| x == v).count() as f64 / n as f64;
    let (fm, f0, fp) = (freq(-1), freq(0), freq(1));
    let ternary_ok =
        (fm - 0.25).abs() <= 0.003 && (f0 - 0.5).abs() <= 0.003 && (fp - 0.25).abs() <= 0.003;

    let modulus = 97u64;
    let u = sample_uniform(n, modulus, &mut rng);
    let mut counts = vec![0u64; modulus as usize];
    for x in &u {
        counts[*x as usize] += 1;
    }
    let expected = n as f64 / modulus as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = ChiSquared::new((modulus - 1) as f64)
        .map_err(|e| e.to_string())?
        .sf(chi2);
    Ok((
        ternary_ok && p > 0.001,
        format!(
            "ternary ({fm:.4}, {f0:.4}, {fp:.4}); uniform mod {modulus} chi2 {chi2:.1} p {p:.3}"
        ),
    ))
}

fn tx(parents: [TxId; 2], issuer: u32, accuracy: f64, weight: f64, t: u64) -> Transaction {
    Transaction::new(TxBody {
        parents: Some(parents),
        issuer,
        payload: [issuer as u8; 32],
        dataset_size: 100,
        slots: 1,
        accuracy,
        weight,
        timestamp: t,
    })
    .expect("valid fixture transaction")
}

/// Attach children given as (parent indices, accuracy, weight); index 0 is genesis.
fn fixture(children: &[([usize; 2], f64, f64)]) -> Result<(DagState, TxId), String> {
    let mut dag =
        DagState::with_genesis(DagConfig::default(), [0; 32]).map_err(|e| e.to_string())?;
    let genesis = dag.genesis().expect("genesis").id();
    let mut ids = vec![genesis];
    for (k, (parents, acc, w)) in children.iter().enumerate() {
        let p = parents.map(|i| ids[i]);
        let measured = p.map(|id| dag.get(&id).expect("parent").body().accuracy);
        let t = tx(p, k as u32 + 1, *acc, *w, k as u64 + 1);
        ids.push(t.id());
        dag.attach_transaction(t, measured)
            .map_err(|e| e.to_string())?;
    }
    Ok((dag, genesis))
}

/// Tip distribution of a walk from `x`, by enumerating every path.
fn exact_tips(dag: &DagState, x: TxId, mass: f64, out: &mut BTreeMap<TxId, f64>) {
    let approvers = dag.approvers(&x);
    if approvers.is_empty() {
        *out.entry(x).or_default() += mass;
        return;
    }
    let cx = dag.cumulative_weight(&x).expect("attached");
    let weights: Vec<f64> = approvers
        .iter()
        .map(|a| (dag.cumulative_weight(&a.by).expect("attached") - cx).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for (a, w) in approvers.iter().zip(weights) {
        exact_tips(dag, a.by, mass * w / total, out);
    }
}

fn tip_law() -> Outcome {
    let started = Instant::now();
    let fixtures = [
        // Diamond: two branches rejoin, a third tip hangs off one branch.
        fixture(&[
            ([0, 0], 0.9, 0.8),
            ([0, 0], 0.6, 0.1),
            ([1, 2], 0.8, 0.5),
            ([1, 1], 0.7, 0.3),
        ])?,
        // Wide fan-out from genesis with very different weights.
        fixture(&[
            ([0, 0], 0.95, 0.9),
            ([0, 0], 0.5, 0.05),
            ([0, 0], 0.8, 0.4),
            ([1, 2], 0.85, 0.6),
            ([3, 3], 0.6, 0.2),
            ([2, 3], 0.9, 0.7),
        ])?,
        // Deeper layered DAG with twelve transactions.
        fixture(&[
            ([0, 0], 0.9, 0.6),
            ([0, 0], 0.7, 0.2),
            ([1, 2], 0.85, 0.5),
            ([1, 1], 0.8, 0.4),
            ([2, 3], 0.6, 0.1),
            ([3, 4], 0.9, 0.7),
            ([4, 5], 0.75, 0.3),
            ([6, 6], 0.95, 0.9),
            ([5, 7], 0.7, 0.25),
            ([7, 8], 0.8, 0.45),
            ([6, 9], 0.65, 0.15),
        ])?,
    ];
    let walks = 100_000;
    let mut worst = 0.0f64;
    for (k, (dag, genesis)) in fixtures.iter().enumerate() {
        let mut exact = BTreeMap::new();
        exact_tips(dag, *genesis, 1.0, &mut exact);
        let mut counts: BTreeMap<TxId, usize> = BTreeMap::new();
        let mut rng = seed::stream(17, "acceptance-walk", k as u64);
        for _ in 0..walks {
            let tip =
                random_walk(dag, *genesis, 10 * dag.len(), &mut rng).map_err(|e| e.to_string())?;
            *counts.entry(tip).or_default() += 1;
        }
        for (id, p) in &exact {
            let f = counts.get(id).copied().unwrap_or(0) as f64 / walks as f64;
            worst = worst.max((f - p).abs());
        }
        if counts.keys().any(|id| !exact.contains_key(id)) {
            return Ok((
                false,
                format!("fixture {k}: walk reached a transaction that is not a tip"),
            ));
        }
    }
    let elapsed = started.elapsed();
    Ok((
        worst <= 0.02 && elapsed < Duration::from_secs(10),
        format!(
            "max |freq - exact| {worst:.4} over 3 fixtures; {:.2}s of 10s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn weight_formulas() -> Outcome {
    let w = own_weight(100.0, 0.5, 100.0, 300.0, 1.0, 0.9).map_err(|e| e.to_string())?;
    let cw = cumulative_weight(0.4, &[(0.9, 0.5)], true);
    Ok((
        (w - 0.3375).abs() <= 1e-12 && (cw - 0.65).abs() <= 1e-12,
        format!("own {w} (want 0.3375), cumulative {cw} (want 0.65)"),
    ))
}

fn gradient_check() -> Outcome {
    let mut rng = seed::stream(19, "acceptance-grad", 0);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let spec = SyntheticSpec {
            classes: rng.gen_range(2..=4),
            features: rng.gen_range(4..=8),
            samples: rng.gen_range(1..=20),
            separation: rng.gen_range(0.0..3.0),
            std: 1.0,
            scale_decay: 1.0,
        };
        let data = gen_synthetic(&spec, seed::derive(19, "acceptance-grad-data", i))
            .map_err(|e| e.to_string())?;
        let model = LinearSoftmax::for_data(&data);
        let w: Vec<f64> = (0..model.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = model.loss_and_grad(&w, &data).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut num = vec![0.0; w.len()];
        for k in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[k] += h;
            down[k] -= h;
            let lu = model.loss(&up, &data).map_err(|e| e.to_string())?;
            let ld = model.loss(&down, &data).map_err(|e| e.to_string())?;
            num[k] = (lu - ld) / (2.0 * h);
        }
        let diff: f64 = grad
            .iter()
            .zip(&num)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt()
            + num.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(if scale > 0.0 { diff / scale } else { diff });
    }
    Ok((
        worst < 1e-5,
        format!("max relative error {worst:.2e} over 100 instances"),
    ))
}

fn federated_vs_centralized() -> Outcome {
    let mut rng = seed::stream(23, "acceptance-fed", 0);
    let features = 5;
    let model = LinearRegression { features };
    let n = 90;
    let x: Vec<f64> = (0..n * features)
        .map(|_| rng.gen_range(-2.0..2.0))
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let theta: Vec<f64> = (0..model.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let eta = 0.1;

    let (_, full) = model
        .loss_and_grad(&theta, &x, &y)
        .map_err(|e| e.to_string())?;
    let central = sgd_step(&theta, &full, eta).map_err(|e| e.to_string())?;

    // Uneven disjoint shards.
    let bounds = [0, 17, 52, n];
    let entries = bounds
        .windows(2)
        .map(|b| {
            let (lo, hi) = (b[0], b[1]);
            let (_, g) =
                model.loss_and_grad(&theta, &x[lo * features..hi * features], &y[lo..hi])?;
            Ok(AggregationEntry {
                gradient: Some(g),
                share: (hi - lo) as f64 / n as f64,
                credibility: 1.0,
            })
        })
        .collect::<Result<Vec<_>, fedchain_core::local_model::ModelError>>()
        .map_err(|e| e.to_string())?;
    let (_, federated) = aggregate_global(&entries, &theta, eta).map_err(|e| e.to_string())?;
    let err = central
        .iter()
        .zip(&federated)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((
        err <= 1e-9,
        format!("max |central - federated| {err:.2e} over 3 shards"),
    ))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}

fn std_error(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

struct SweepResult {
    values: Vec<u64>,
    /// Final accuracy per value, one entry per seed.
    accuracy: Vec<Vec<f64>>,
    /// Final wall time per value, one entry per seed.
    wall: Vec<Vec<f64>>,
}

/// Every value of a preset over `SEEDS` seeds following the preset's own.
fn sweep(name: &str) -> Result<SweepResult, String> {
    let preset = presets::load(name).ok_or("missing preset")?;
    let configs = preset.configs().map_err(|e| e.to_string())?;
    let mut res = SweepResult {
        values: Vec::new(),
        accuracy: Vec::new(),
        wall: Vec::new(),
    };
    for (value, cfg) in configs {
        let (mut acc, mut wall) = (Vec::new(), Vec::new());
        for s in 0..SEEDS {
            let mut cfg = cfg.clone();
            cfg.sim.seed += s;
            let out = run_experiment(&cfg, &RunOptions::default(), &mut MemorySink::default())
                .map_err(|e| e.to_string())?;
            let last = out.metrics.last().ok_or("run produced no rounds")?;
            acc.push(last.global_accuracy);
            wall.push(last.wall_time_ms);
        }
        res.values.push(value);
        res.accuracy.push(acc);
        res.wall.push(wall);
    }
    Ok(res)
}

fn fig3a(fig3: &SweepResult, elapsed: Duration) -> Outcome {
    let medians: Vec<f64> = fig3.accuracy.iter().map(|a| median(a)).collect();
    let errors: Vec<f64> = fig3.accuracy.iter().map(|a| std_error(a)).collect();
    let monotone =
        (1..medians.len()).all(|i| medians[i] >= medians[i - 1] - errors[i].max(errors[i - 1]));
    let fast = elapsed < Duration::from_secs(300);
    let table: Vec<String> = fig3
        .values
        .iter()
        .zip(medians.iter().zip(&errors))
        .map(|(v, (m, e))| format!("{v}: {m:.4}±{e:.4}"))
        .collect();
    Ok((
        monotone && fast,
        format!(
            "median accuracy {}; {:.0}s of 300s",
            table.join(", "),
            elapsed.as_secs_f64()
        ),
    ))
}

fn fig3b(fig3: &SweepResult) -> Outcome {
    let increasing = (0..SEEDS as usize).all(|s| fig3.wall.windows(2).all(|w| w[1][s] > w[0][s]));
    let first: Vec<String> = fig3.wall.iter().map(|w| format!("{:.1}", w[0])).collect();
    Ok((
        increasing,
        format!("wall ms {} (seed {})", first.join(" < "), 0),
    ))
}

fn fig4a() -> Outcome {
    let fig4 = sweep("fig4")?;
    let medians: Vec<f64> = fig4.accuracy.iter().map(|a| median(a)).collect();
    let at = |n: u64| {
        fig4.values
            .iter()
            .position(|&v| v == n)
            .map(|i| medians[i])
            .ok_or("missing hospital count")
    };
    let (two, six) = (at(2)?, at(6)?);
    let table: Vec<String> = fig4
        .values
        .iter()
        .zip(&medians)
        .map(|(v, m)| format!("{v}: {m:.4}"))
        .collect();
    Ok((
        six >= two,
        format!("median accuracy by hospitals {}", table.join(", ")),
    ))
}

fn golden_config() -> Result<ExperimentConfig, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/config.json");
    ExperimentConfig::load(&path).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let cfg = golden_config()?;
    let dirs = [tempfile::tempdir(), tempfile::tempdir()];
    let mut outputs = Vec::new();
    for dir in &dirs {
        let dir = dir.as_ref().map_err(|e| e.to_string())?;
        run_to_dir(&cfg, dir.path(), &DirOptions::default()).map_err(|e| e.to_string())?;
        let read = |name: &str| fs::read(dir.path().join(name)).map_err(|e| e.to_string());
        outputs.push((read("metrics.csv")?, read("events.jsonl")?));
    }
    let same = outputs[0] == outputs[1];
    Ok((
        same,
        format!(
            "metrics {} bytes, events {} bytes, identical: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    ))
}

fn audited(cfg: &ExperimentConfig) -> Result<(RunOutput, usize), String> {
    let out = run_experiment(
        cfg,
        &RunOptions {
            record_messages: true,
        },
        &mut MemorySink::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut moduli = vec![cfg.crypto.plaintext_modulus];
    if let Some(p) = &out.params {
        moduli.extend([p.p(), p.p0(), p.p1()]);
    }
    let spec = AuditSpec {
        quant: cfg.quant_params(),
        moduli,
    };
    let findings = audit(&out.messages, &out.updates, &spec).len();
    Ok((out, findings))
}

fn privacy_audit() -> Outcome {
    let mut cfg = golden_config()?;
    cfg.sim.dropouts.clear();
    cfg.sim.mode = AggregationMode::Secure;
    let (secure, leaks) = audited(&cfg)?;
    cfg.sim.mode = AggregationMode::Plaintext;
    let (_, control) = audited(&cfg)?;
    let bytes: usize = secure.messages.iter().map(|m| m.bytes.len()).sum();
    Ok((
        leaks == 0 && control > 0 && !secure.updates.is_empty(),
        format!(
            "secure run: {leaks} findings in {} messages ({bytes} bytes) against {} updates; plaintext control: {control} findings",
            secure.messages.len(),
            secure.updates.len()
        ),
    ))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    };
    report(
        "secure aggregation equals plaintext sum",
        secure_aggregation(),
    );
    report(
        "ring multiplication matches schoolbook oracle",
        ring_oracle(),
    );
    report("sampler laws", sampler_laws());
    report("tip selection law", tip_law());
    report("weight formulas", weight_formulas());
    report("gradient check", gradient_check());
    report(
        "federated step equals centralized step",
        federated_vs_centralized(),
    );

    let started = Instant::now();
    let fig3 = sweep("fig3");
    let elapsed = started.elapsed();
    match fig3 {
        Ok(fig3) => {
            report(
                "accuracy non-decreasing in gradients per hospital",
                fig3a(&fig3, elapsed),
            );
            report(
                "wall time increasing in gradients per hospital",
                fig3b(&fig3),
            );
        }
        Err(e) => {
            report(
                "accuracy non-decreasing in gradients per hospital",
                Err(e.clone()),
            );
            report("wall time increasing in gradients per hospital", Err(e));
        }
    }
    report("six hospitals at least as accurate as two", fig4a());
    report("golden runs are byte-identical", determinism());
    report("no plaintext update in the message log", privacy_audit());

    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
