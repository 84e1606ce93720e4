//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Runs under `cargo test` as a plain binary (no libtest harness).

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use datlen_cli::{measure, Objective};
use datlen_core::metrics::{lcs_len, rouge_l, rouge_n, word_novelty, Prf};
use datlen_core::oracle::OracleLimits;
use datlen_core::rng::SplitMix64 as Rng;
use datlen_core::verify::{
    check_marginals, check_path_mass, check_pathmap, check_seqmap, exhaustive_config, instance,
    Instance, InstanceCaps,
};
use datlen_core::{
    generate, pathmap_decode, seqmap_decode, BosPolicy, Conventions, DatLattice, DecodeConfig,
    GenSpec, TerminationMode,
};
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64 as XoshiroSplitMix;

const LOG_TOL: f64 = 1e-9;
const DOMINANCE_TOL: f64 = 1e-12;
const METRIC_TOL: f64 = 1e-9;

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn instances(count: u64, base: u64, caps: InstanceCaps) -> Vec<Instance> {
    (0..count).map(|i| instance(base + i, &caps)).collect()
}

fn count_failures<F: Fn(&Instance) -> Result<(), String>>(
    set: &[Instance],
    check: F,
) -> (usize, Option<String>) {
    let mut failures = 0;
    let mut first = None;
    for inst in set {
        if let Err(e) = check(inst) {
            failures += 1;
            first.get_or_insert_with(|| format!("seed {}: {e}", inst.seed));
        }
    }
    (failures, first)
}

fn verdict(
    set: usize,
    failures: usize,
    first: Option<String>,
    secs: f64,
    limit: Option<f64>,
) -> (bool, String) {
    let within = limit.is_none_or(|l| secs < l);
    let mut detail = format!("{}/{set} in {secs:.3} s", set - failures);
    if let Some(l) = limit {
        detail.push_str(&format!(" (limit {l} s)"));
    }
    if let Some(f) = first {
        detail.push_str(&format!("; first failure {f}"));
    }
    (failures == 0 && within, detail)
}

fn large_set() -> Vec<DatLattice> {
    (0..200)
        .map(|seed| generate(&GenSpec::new(32, 50, seed)).unwrap())
        .collect()
}

fn fuzz(gate: &mut Gate) {
    let mut rng = Rng::new(0xfeed);
    let mut decodes = 0;
    let mut length_violations = Vec::new();
    let mut bound_violations = Vec::new();
    let modes = [
        Conventions::new(TerminationMode::Eos, BosPolicy::Strict),
        Conventions::new(TerminationMode::Free, BosPolicy::Strict),
        Conventions::new(TerminationMode::Eos, BosPolicy::Verbatim),
        Conventions::new(TerminationMode::Free, BosPolicy::Verbatim),
    ];
    for case in 0..600u64 {
        let steps = rng.next_in(3, 40);
        let vocab = rng.next_in(3, 30);
        let length = rng.next_in(1, steps - 2);
        let conventions = modes[case as usize % modes.len()];
        let lattice = generate(&GenSpec::new(steps, vocab, rng.next_u64())).unwrap();
        let beam = rng.next_in(1, 30);
        let expand = rng.next_in(1, vocab.min(8));
        let tag = format!("case {case} (S={steps}, |V|={vocab}, T={length}, {conventions:?})");

        let (_, best) = pathmap_decode(&lattice, length, conventions).unwrap();
        decodes += 1;
        if best.tokens.len() != length {
            length_violations.push(format!("{tag}: pathmap gave {}", best.tokens.len()));
        }
        let config = DecodeConfig::new(length)
            .with_beam(beam, expand)
            .with_conventions(conventions);
        let out = seqmap_decode(&lattice, &config).unwrap();
        decodes += 1;
        for seq in &out {
            if seq.tokens.len() != length {
                length_violations.push(format!("{tag}: seqmap gave {}", seq.tokens.len()));
            }
            let total = seq.beam_total.unwrap();
            if total > seq.log_marginal + LOG_TOL {
                bound_violations.push(format!(
                    "{tag}: beam {total} > marginal {}",
                    seq.log_marginal
                ));
            }
        }
    }
    gate.report(
        6,
        "hard length constraint",
        decodes >= 1000 && length_violations.is_empty(),
        format!(
            "{decodes} decodes, {} violations{}",
            length_violations.len(),
            length_violations
                .first()
                .map(|v| format!("; {v}"))
                .unwrap_or_default()
        ),
    );
    gate.report(
        7,
        "beam total is a lower bound",
        bound_violations.is_empty(),
        format!(
            "{} seqmap decodes, {} violations{}",
            decodes / 2,
            bound_violations.len(),
            bound_violations
                .first()
                .map(|v| format!("; {v}"))
                .unwrap_or_default()
        ),
    );
}

fn close(p: Prf, want: (f64, f64, f64)) -> bool {
    (p.precision - want.0).abs() <= METRIC_TOL
        && (p.recall - want.1).abs() <= METRIC_TOL
        && (p.f1 - want.2).abs() <= METRIC_TOL
}

fn lcs_memo(a: &[String], b: &[String], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    if let Some(&v) = memo.get(&(a.len(), b.len())) {
        return v;
    }
    let v = if a[0] == b[0] {
        1 + lcs_memo(&a[1..], &b[1..], memo)
    } else {
        lcs_memo(&a[1..], b, memo).max(lcs_memo(a, &b[1..], memo))
    };
    memo.insert((a.len(), b.len()), v);
    v
}

fn metrics(gate: &mut Gate) {
    let t = 2.0 / 3.0;
    let empty: [&str; 0] = [];
    let hand = [
        (
            "rouge-1 identical",
            close(
                rouge_n(&["a", "b", "c"], &["a", "b", "c"], 1),
                (1.0, 1.0, 1.0),
            ),
        ),
        (
            "rouge-1 (a,b,c)/(a,c,d)",
            close(rouge_n(&["a", "b", "c"], &["a", "c", "d"], 1), (t, t, t)),
        ),
        (
            "rouge-2 no hyp bigrams",
            close(rouge_n(&["a"], &["a", "b"], 2), (0.0, 0.0, 0.0)),
        ),
        (
            "rouge-l identical",
            close(rouge_l(&["a", "b", "c"], &["a", "b", "c"]), (1.0, 1.0, 1.0)),
        ),
        (
            "rouge-l (a,c,b)/(a,b,c)",
            close(rouge_l(&["a", "c", "b"], &["a", "b", "c"]), (t, t, t)),
        ),
        (
            "rouge-l empty hyp",
            close(rouge_l(&empty, &["a"]), (0.0, 0.0, 0.0)),
        ),
        (
            "novelty subset",
            word_novelty(&["a", "b"], &["a", "b", "c"]) == Ok(0.0),
        ),
        (
            "novelty disjoint",
            word_novelty(&["x", "y"], &["a", "b"]) == Ok(1.0),
        ),
        (
            "novelty (a,x,a,z)",
            word_novelty(&["a", "x", "a", "z"], &["a", "b", "c"]) == Ok(0.5),
        ),
    ];
    let bad: Vec<&str> = hand.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();

    let mut rng = Rng::new(8);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let words = |rng: &mut Rng| -> Vec<String> {
            let n = rng.next_in(0, 10);
            (0..n)
                .map(|_| ["a", "b", "c", "d"][rng.next_in(0, 3)].to_string())
                .collect()
        };
        let (a, b) = (words(&mut rng), words(&mut rng));
        if lcs_len(&a, &b) != lcs_memo(&a, &b, &mut HashMap::new()) {
            mismatches += 1;
        }
    }
    gate.report(
        8,
        "metric correctness",
        bad.is_empty() && mismatches == 0,
        format!(
            "{}/{} hand examples, LCS agrees on {}/1000 random pairs{}",
            hand.len() - bad.len(),
            hand.len(),
            1000 - mismatches,
            if bad.is_empty() {
                String::new()
            } else {
                format!("; wrong: {}", bad.join(", "))
            }
        ),
    );
}

fn datlen(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_datlen"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "datlen {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

/// The documented generator rebuilt on `rand_xoshiro`'s SplitMix64.
fn reference_rows(spec: &GenSpec) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = XoshiroSplitMix::seed_from_u64(spec.seed);
    let exponent = 1.0 / spec.concentration;
    let mut row = |len: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..len)
            .map(|_| {
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                (-(1.0 - u).ln()).powf(exponent)
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter()
            .map(|&x| {
                if x == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (x / total).ln()
                }
            })
            .collect()
    };
    let n = spec.vocab_size;
    let ninf = f64::NEG_INFINITY;
    let mut words = Vec::new();
    let mut first = vec![ninf; n];
    first[0] = 0.0;
    words.push(first);
    for _ in 2..spec.steps {
        let mut r = vec![ninf, ninf];
        r.extend(row(n - 2));
        words.push(r);
    }
    let mut last = vec![ninf; n];
    last[1] = 0.0;
    words.push(last);
    let links = (1..spec.steps).map(|s| row(spec.steps - s)).collect();
    (words, links)
}

fn determinism(gate: &mut Gate) {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let lattice = dir.join("l.json");
    let lattice = lattice.to_str().unwrap();
    let mut problems = Vec::new();

    let gen = ["gen", "--steps", "24", "--vocab", "30", "--seed", "42"];
    if datlen(&gen) != datlen(&gen) {
        problems.push("gen".to_string());
    }
    std::fs::write(lattice, datlen(&gen)).unwrap();
    let mut runs = 1;
    for objective in ["pathmap", "seqmap"] {
        for termination in ["eos", "free"] {
            let args = [
                "decode",
                "--lattice",
                lattice,
                "--objective",
                objective,
                "--length",
                "6",
                "--termination",
                termination,
            ];
            runs += 1;
            if datlen(&args) != datlen(&args) {
                problems.push(format!("decode {objective}/{termination}"));
            }
        }
    }

    let mut parity_failures = 0;
    for seed in 0..100u64 {
        let mut spec = GenSpec::new(
            3 + (seed as usize % 14),
            3 + (seed as usize % 11),
            seed.wrapping_mul(0x9e37),
        );
        spec.concentration = [1.0, 0.5, 2.0][seed as usize % 3];
        let parts = generate(&spec).unwrap().to_parts();
        if (parts.word_logprobs, parts.link_logprobs) != reference_rows(&spec) {
            parity_failures += 1;
        }
    }
    gate.report(
        9,
        "determinism",
        problems.is_empty() && parity_failures == 0,
        format!(
            "{runs} commands byte-identical across two runs{}; generator matches rand_xoshiro SplitMix64 on {}/100 specs",
            if problems.is_empty() { String::new() } else { format!(" except {}", problems.join(", ")) },
            100 - parity_failures
        ),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: 0 };
    let eos = Conventions::default();
    let limits = OracleLimits::default();

    let c1 = instances(
        200,
        1_000,
        InstanceCaps {
            min_steps: 3,
            max_steps: 8,
            max_vocab: 5,
            max_length: 4,
        },
    );
    let started = Instant::now();
    let (failures, first) = count_failures(&c1, |i| check_pathmap(i, eos, &limits));
    let (ok, detail) = verdict(
        c1.len(),
        failures,
        first,
        started.elapsed().as_secs_f64(),
        Some(30.0),
    );
    gate.report(1, "pathmap exactness", ok, detail);

    let c2 = instances(
        100,
        2_000,
        InstanceCaps {
            min_steps: 3,
            max_steps: 7,
            max_vocab: 4,
            max_length: 3,
        },
    );
    let started = Instant::now();
    let (failures, first) = count_failures(&c2, |i| check_seqmap(i, eos, &limits, seqmap_decode));
    let (ok, detail) = verdict(
        c2.len(),
        failures,
        first,
        started.elapsed().as_secs_f64(),
        Some(60.0),
    );
    gate.report(2, "seqmap exhaustive exactness", ok, detail);

    let started = Instant::now();
    let (failures, first) = count_failures(&c2, |i| check_marginals(i, eos, &limits));
    let (ok, detail) = verdict(
        c2.len(),
        failures,
        first,
        started.elapsed().as_secs_f64(),
        None,
    );
    gate.report(3, "marginal vs enumeration", ok, detail);

    let c4 = instances(
        50,
        3_000,
        InstanceCaps {
            min_steps: 3,
            max_steps: 7,
            max_vocab: 5,
            max_length: 5,
        },
    );
    let started = Instant::now();
    let (failures, first) = count_failures(&c4, |i| check_path_mass(i, &limits));
    let (ok, detail) = verdict(
        c4.len(),
        failures,
        first,
        started.elapsed().as_secs_f64(),
        None,
    );
    gate.report(4, "path-mass normalization", ok, detail);

    let mut exhaustive_misses = 0;
    for inst in &c2 {
        let top = seqmap_decode(&inst.lattice, &exhaustive_config(inst, eos)).unwrap();
        let (_, path) = pathmap_decode(&inst.lattice, inst.length, eos).unwrap();
        if top[0].log_marginal < path.log_marginal - DOMINANCE_TOL {
            exhaustive_misses += 1;
        }
    }
    let large = large_set();
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    let (mut seq_sum, mut path_sum) = (0.0, 0.0);
    let defaults = DecodeConfig::new(8);
    for lattice in &large {
        let seq = seqmap_decode(lattice, &defaults)
            .unwrap()
            .swap_remove(0)
            .log_marginal;
        let path = pathmap_decode(lattice, 8, eos).unwrap().1.log_marginal;
        seq_sum += seq;
        path_sum += path;
        match seq.partial_cmp(&path) {
            Some(std::cmp::Ordering::Greater) => wins += 1,
            Some(std::cmp::Ordering::Less) => losses += 1,
            _ => ties += 1,
        }
    }
    let n = large.len() as f64;
    let (seq_mean, path_mean) = (seq_sum / n, path_sum / n);
    gate.report(
        5,
        "objective dominance",
        exhaustive_misses == 0 && seq_mean >= path_mean,
        format!(
            "exhaustive: {}/{} instances; K=20 V=5 on 200 lattices (S=32, |V|=50, T=8): mean log-marginal \
             seqmap {seq_mean:.4} vs pathmap {path_mean:.4}, {wins} wins / {losses} losses / {ties} ties",
            c2.len() - exhaustive_misses,
            c2.len()
        ),
    );

    fuzz(&mut gate);
    metrics(&mut gate);
    determinism(&mut gate);

    let path = measure(&large, Objective::Pathmap, &defaults, 8).unwrap();
    let seq = measure(&large, Objective::Seqmap, &defaults, 8).unwrap();
    gate.report(
        10,
        "benchmark direction",
        path.sentences_per_second > seq.sentences_per_second,
        format!(
            "pathmap {:.1} sent/s ({:.1} words/s), seqmap {:.1} sent/s ({:.1} words/s), batch size 1",
            path.sentences_per_second, path.words_per_second, seq.sentences_per_second, seq.words_per_second
        ),
    );

    if gate.failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", gate.failed);
        ExitCode::FAILURE
    }
}
