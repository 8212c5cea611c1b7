//! End-to-end acceptance checks. Runs every criterion in order, prints one
//! PASS/FAIL line per criterion and fails if any criterion failed.

use std::time::{Duration, Instant};

use entangle::cost::Workload;
use entangle::lab::{
    cancelling_pairs_entangled, certified_input_bound, random_block, run_cell, run_trial_multi, summarize,
    BenchWorkload, Cell, KernelChoice, Method, ScenarioFamily,
};
use entangle::{apply_entangled, apply_plain, config_for, disentangle_excluding, entangle, StreamBlock};
use entangle_cli::{cmd_bench, cmd_curves, cmd_roundtrip, cmd_table, BenchSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn table_rows() -> Verdict {
    let t = Instant::now();
    let expected = [
        (3, 11, 10, 21, 30),
        (4, 8, 8, 24, 30),
        (5, 7, 4, 25, 29),
        (8, 4, 4, 28, 29),
        (11, 3, 2, 29, 28),
        (16, 2, 2, 30, 28),
        (32, 1, 1, 31, 27),
    ];
    let got: Vec<_> = cmd_table()
        .into_iter()
        .filter(|r| r.w == 32)
        .map(|r| (r.m, r.l, r.k, r.bitwidth, r.abft_bitwidth))
        .collect();
    let elapsed = t.elapsed();
    verdict(
        got == expected && elapsed < Duration::from_secs(1),
        format!(
            "{} rows for w=32 in {elapsed:?}, matching: {}",
            got.len(),
            got == expected
        ),
    )
}

fn round_trip() -> Verdict {
    let t = Instant::now();
    let mut mismatches = 0;
    let mut blocks = 0;
    for w in [32, 64] {
        for (i, m) in [3, 4, 5, 8, 11, 16, 32].into_iter().enumerate() {
            let row = cmd_roundtrip(m, w, 64, 1000, 1000 + i as u64 + w as u64).expect("valid parameters");
            mismatches += row.mismatches;
            blocks += row.blocks;
        }
    }
    let elapsed = t.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(30),
        format!("{blocks} blocks, every excluded stream, {mismatches} mismatches in {elapsed:?}"),
    )
}

fn homomorphism() -> Verdict {
    let kinds = [
        KernelChoice::AddConst,
        KernelChoice::SubConst,
        KernelChoice::Scale,
        KernelChoice::Permutation,
        KernelChoice::Convolution,
        KernelChoice::Gemm,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut instances, mut mismatches) = (0, 0);
    for kind in kinds {
        for m in [3, 8] {
            let config = config_for(m, 32).unwrap();
            for _ in 0..200 {
                let n = if kind == KernelChoice::Gemm { 8 } else { 16 };
                let kernel = kind.build(n, &mut rng).unwrap();
                let bound = certified_input_bound(&config, &kernel);
                let b: StreamBlock<i32> = random_block(m, kind.stream_len(n), bound, &mut rng);
                let e = apply_entangled(&entangle(&b, &config).unwrap(), &kernel).unwrap();
                let r = rng.random_range(0..m);
                instances += 1;
                if disentangle_excluding(&e, r).unwrap() != apply_plain(&b, &kernel).unwrap() {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        mismatches == 0,
        format!("{instances} certified instances, {mismatches} mismatches"),
    )
}

fn cell(method: Method, m: usize, family: ScenarioFamily) -> Cell {
    Cell {
        method,
        m_streams: m,
        word_bits: 32,
        n: 16,
        kernel: KernelChoice::Convolution,
        family,
    }
}

fn detection(method: Method) -> Verdict {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for m in [3, 8] {
        let flips = run_cell(&cell(method, m, ScenarioFamily::AllBitflips), 0, 11).unwrap();
        let row = summarize(cell(method, m, ScenarioFamily::AllBitflips), &flips);
        let clean = run_cell(&cell(method, m, ScenarioFamily::None), 10_000, 12).unwrap();
        let false_pos = clean.iter().filter(|r| r.outcome.detected).count();
        let all_effective = flips.iter().all(|r| r.outcome.fault_effective);
        pass &= row.detection_rate == 1.0 && all_effective && false_pos == 0 && clean.len() == 10_000;
        parts.push(format!(
            "M={m}: {}/{} flips detected, {false_pos}/{} false positives",
            row.detected,
            flips.len(),
            clean.len()
        ));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    verdict(pass, format!("{} in {elapsed:?}", parts.join("; ")))
}

fn failstop(method: Method) -> Verdict {
    let mut trials = 0;
    let mut bad = 0;
    for m in 3..=8 {
        let recs = run_cell(&cell(method, m, ScenarioFamily::StreamDrop), 100, 20 + m as u64).unwrap();
        // The checksum baseline also loses its checksum stream in turn.
        let expected = 100 * if method == Method::Abft { m + 1 } else { m };
        if recs.len() != expected {
            bad += expected;
        }
        trials += recs.len();
        bad += recs
            .iter()
            .filter(|r| !(r.outcome.recovered && r.outcome.outputs_correct))
            .count();
    }
    verdict(
        bad == 0,
        format!("{trials} drop trials over M=3..8 and every stream, {bad} unrecovered"),
    )
}

fn abft_parity() -> Verdict {
    let d = detection(Method::Abft);
    let f = failstop(Method::Abft);
    verdict(
        d.pass && f.pass,
        format!("detection: {}; recovery: {}", d.detail, f.detail),
    )
}

fn cost_curves() -> Verdict {
    let t = Instant::now();
    let streams = [3, 4, 5, 8, 11, 16, 32];
    let dims: Vec<u64> = (700..=5000).step_by(100).collect();
    let conv = cmd_curves(&[Workload::ConvTime, Workload::ConvFreq], &streams, &dims).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for wl in ["conv_time", "conv_freq"] {
        let rows: Vec<_> = conv.iter().filter(|r| r.workload == wl).collect();
        let worst = rows.iter().map(|r| r.entangle_ratio).fold(0.0, f64::max);
        let over = rows.iter().filter(|r| r.entangle_ratio > 0.003).count();
        pass &= over == 0;
        parts.push(format!(
            "{wl} worst entangle ratio at N>=700 {:.3}% ({over}/{} points above 0.3%)",
            worst * 100.0,
            rows.len()
        ));
    }
    let gemm = cmd_curves(&[Workload::Gemm], &streams, &[2000]).unwrap();
    let worst_gap = gemm
        .iter()
        .map(|r| (r.abft_ratio - 1.0 / r.m as f64).abs())
        .fold(0.0, f64::max);
    pass &= worst_gap <= 0.01;
    parts.push(format!(
        "gemm abft ratio at N=2000 within {:.3} points of 1/M",
        worst_gap * 100.0
    ));
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    verdict(pass, parts.join("; "))
}

fn bench_trend() -> Verdict {
    let t = Instant::now();
    let spec = BenchSpec {
        workload: BenchWorkload::Gemm,
        m_streams: 3,
        dimensions: vec![200, 500, 1000, 2000],
        reps: 31,
        budget: Duration::from_millis(4000),
        seed: 8,
    };
    let report = cmd_bench(&spec).unwrap();
    let pct = |method: &str| -> Vec<(usize, f64)> {
        report
            .rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.n, r.overhead_pct_vs_plain))
            .collect()
    };
    let (ent, abft) = (pct("entangle"), pct("abft"));
    let below = ent
        .iter()
        .zip(&abft)
        .filter(|(e, _)| e.0 >= 500)
        .all(|(e, a)| e.1 < a.1);
    let decreasing = ent.windows(2).all(|w| w[1].1 <= w[0].1 + 1.0);
    let elapsed = t.elapsed();
    let fmt = |v: &[(usize, f64)]| {
        v.iter()
            .map(|(n, p)| format!("{n}:{p:.2}%"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    verdict(
        below && decreasing && elapsed < Duration::from_secs(300),
        format!("entangle [{}] abft [{}] in {elapsed:?}", fmt(&ent), fmt(&abft)),
    )
}

fn detection_limit() -> Verdict {
    let config = config_for(3, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kernel = KernelChoice::Convolution.build(16, &mut rng).unwrap();
    let b: StreamBlock<i32> = random_block(3, 16, certified_input_bound(&config, &kernel), &mut rng);
    let out = apply_entangled(&entangle(&b, &config).unwrap(), &kernel).unwrap();
    let pairs = cancelling_pairs_entangled(&out, 0, 1);
    let Some(pair) = pairs.first() else {
        return verdict(false, "no cancelling pair found");
    };
    let o = run_trial_multi(&b, &kernel, pair, Method::Entangle, &config).unwrap();
    verdict(
        o.fault_effective && !o.detected && !o.outputs_correct,
        format!(
            "{} + {} evades the check (effective={}, detected={})",
            pair[0].label(),
            pair[1].label(),
            o.fault_effective,
            o.detected
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("layout table", table_rows),
        ("round trip", round_trip),
        ("homomorphism", homomorphism),
        ("transient detection", || detection(Method::Entangle)),
        ("fail-stop recovery", || failstop(Method::Entangle)),
        ("checksum parity", abft_parity),
        ("cost curves", cost_curves),
        ("benchmark trend", bench_trend),
        ("detection limit", detection_limit),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
