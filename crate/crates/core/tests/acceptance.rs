//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if a binding criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use progen_core::corpus::{write_corpus, Corpus, Document, Split};
use progen_core::genmodel::{
    generate, train_planner, train_refiner, DecoderConfig, GeneratorConfig, PlannerModel, RefinerModel,
    StageGenerator,
};
use progen_core::importance::{build_importance_table, build_stage_vocabularies, importance, StagePlan};
use progen_core::metrics::{
    bleu_scores, corpus_bleu, evaluate, fbd, frechet_distance, msj, tid, EmbeddingSet, GaussianStats, MetricConfig,
    FALLBACK_LABEL,
};
use progen_core::pipeline::{cmd_run, file_digest, GenerationMode, Pipeline, RunConfig, MANIFEST_FILE};
use progen_core::staging::{align, extract_tokens, make_pairs, noise, NgramPool, NoiseConfig};
use progen_core::synthetic::{synthesize, SynthConfig};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn corpus_of(docs: Vec<Vec<String>>) -> Corpus {
    let docs = docs
        .into_iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("d{i:04}"), t))
        .collect();
    Corpus::new(docs, Split::Train).unwrap()
}

fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, max_len: usize, vocab: usize) -> Corpus {
    let n = rng.gen_range(1..=max_docs);
    corpus_of(
        (0..n)
            .map(|_| {
                let len = rng.gen_range(1..=max_len);
                (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
            })
            .collect(),
    )
}

fn is_subsequence(small: &[String], big: &[String]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

fn synthetic_corpus(docs: usize, seed: u64) -> Corpus {
    let d = synthesize(&SynthConfig {
        documents: docs,
        seed,
        ..Default::default()
    });
    Corpus::new(d, Split::Train).unwrap()
}

// ---------------------------------------------------------------------------
// 1. importance against a double-loop recomputation

fn criterion_importance() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut words_checked = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let vocab = rng.gen_range(1..40);
        let c = random_corpus(&mut rng, 100, 50, vocab);
        let docs = c.documents();
        let n = docs.len() as f64;
        let table = build_importance_table(&c).map_err(|e| e.to_string())?;
        let words: BTreeSet<&String> = docs.iter().flat_map(|d| &d.tokens).collect();
        ensure(table.entries.len() == words.len(), || "table size differs from vocabulary".into())?;
        for w in words {
            let mut df = 0.0;
            for d in docs {
                if d.tokens.contains(w) {
                    df += 1.0;
                }
            }
            let idf = (n / df).ln();
            let mut sum = 0.0;
            for d in docs {
                let count = d.tokens.iter().filter(|t| *t == w).count();
                if count > 0 {
                    sum += count as f64 / d.tokens.len() as f64 * idf;
                }
            }
            let oracle = sum / df;
            let got = table.entries[w].importance;
            let single = importance(w, &c).map_err(|e| e.to_string())?;
            worst = worst.max((got - oracle).abs()).max((single - oracle).abs());
            words_checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-12, || format!("max abs error {worst:e} > 1e-12"))?;
    ensure(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("{words_checked} words, max error {worst:.1e}, {secs:.2}s"))
}

// ---------------------------------------------------------------------------
// 2. nested vocabularies and minimal coverage prefixes

fn coverage_oracle(vocab: &BTreeSet<String>, c: &Corpus) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for d in c.documents() {
        for t in &d.tokens {
            total += 1;
            if vocab.contains(t) {
                hit += 1;
            }
        }
    }
    hit as f64 / total as f64
}

fn criterion_vocabularies() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut corpora = vec![synthetic_corpus(300, 5)];
    for _ in 0..20 {
        let v = rng.gen_range(2..60);
        corpora.push(random_corpus(&mut rng, 40, 60, v));
    }
    let mut checks = 0;
    let mut strict_synthetic = true;
    for (ci, c) in corpora.iter().enumerate() {
        let table = build_importance_table(c).map_err(|e| e.to_string())?;
        let all: BTreeSet<String> = c.documents().iter().flat_map(|d| d.tokens.iter().cloned()).collect();
        for k in 2..=4 {
            let plan = StagePlan::preset(k).unwrap();
            let v = build_stage_vocabularies(&table, c, &plan).map_err(|e| e.to_string())?;
            ensure(v.num_stages() == k, || "wrong stage count".into())?;
            ensure(v.full() == &all, || format!("corpus {ci} K={k}: V_K is not the full vocabulary"))?;
            let rank: HashMap<&String, usize> = v.ranking.iter().enumerate().map(|(i, w)| (w, i)).collect();
            for s in 1..=k {
                let vs = v.stage(s);
                let target = plan.coverage_targets[s - 1];
                if s < k {
                    let next = v.stage(s + 1);
                    ensure(vs.is_subset(next), || format!("corpus {ci} K={k}: V_{s} not inside V_{}", s + 1))?;
                    if ci == 0 && vs.len() >= next.len() {
                        strict_synthetic = false;
                    }
                }
                let cov = coverage_oracle(vs, c);
                ensure(cov >= target, || format!("corpus {ci} K={k} stage {s}: coverage {cov} < {target}"))?;
                let lowest = vs
                    .iter()
                    .filter(|w| !v.always_include.contains(*w))
                    .max_by_key(|w| rank[w]);
                if let (Some(lowest), true) = (lowest, s < k) {
                    let mut reduced = vs.clone();
                    reduced.remove(lowest);
                    let cov = coverage_oracle(&reduced, c);
                    ensure(cov < target, || {
                        format!("corpus {ci} K={k} stage {s}: not minimal (without {lowest:?} still {cov})")
                    })?;
                }
                checks += 1;
            }
        }
    }
    ensure(strict_synthetic, || "synthetic corpus stages are not strictly nested".into())?;
    Ok(format!("{} corpora, {checks} stage checks, strict nesting on synthetic corpus", corpora.len()))
}

// ---------------------------------------------------------------------------
// 3. extraction laws

fn filter_oracle(doc: &[String], vocab: &BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for t in doc {
        if vocab.contains(t) {
            out.push(t.clone());
        }
    }
    out
}

fn criterion_extraction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alphabet: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
    let mut violations = Vec::new();
    for case in 0..1000 {
        let len = rng.gen_range(0..60);
        let doc: Vec<String> = (0..len).map(|_| alphabet[rng.gen_range(0..12)].clone()).collect();
        let outer: BTreeSet<String> = alphabet.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        let inner: BTreeSet<String> = outer.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        let c_outer = extract_tokens(&doc, &outer);
        let c_inner = extract_tokens(&doc, &inner);
        if extract_tokens(&c_outer, &inner) != c_inner {
            violations.push(format!("case {case}: filter composition"));
        }
        if c_outer != filter_oracle(&doc, &outer) || c_inner != filter_oracle(&doc, &inner) {
            violations.push(format!("case {case}: filter oracle"));
        }
        if !is_subsequence(&c_outer, &doc) || !is_subsequence(&c_inner, &c_outer) {
            violations.push(format!("case {case}: subsequence"));
        }
        let a = align(&c_inner, &c_outer);
        let monotone = a.pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
        let matched = a.pairs.iter().all(|&(i, j)| c_inner[i] == c_outer[j]);
        if !a.is_total() || a.pairs.len() != c_inner.len() || !monotone || !matched {
            violations.push(format!("case {case}: alignment not total"));
        }
    }

    // the same laws on real stage pairs
    let c = synthetic_corpus(200, 9);
    let table = build_importance_table(&c).unwrap();
    let vocab = build_stage_vocabularies(&table, &c, &StagePlan::preset(4).unwrap()).unwrap();
    let pairs = make_pairs(&c, &vocab);
    let mut n_pairs = 0;
    for k in 2..=4 {
        for p in pairs.stage(k) {
            n_pairs += 1;
            if !is_subsequence(&p.input, &p.target) || p.input != extract_tokens(&p.target, vocab.stage(k - 1)) {
                violations.push(format!("pair {} stage {k}: subsequence law", p.source_id));
            }
            if !align(&p.input, &p.target).is_total() {
                violations.push(format!("pair {} stage {k}: alignment", p.source_id));
            }
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!("1000 random cases + {n_pairs} stage pairs, 0 violations"))
}

// ---------------------------------------------------------------------------
// 4. noising statistics

/// Independent simulation of the sweep that only tracks how many positions
/// get replaced.
fn sweep_oracle(len: usize, p: [f64; 4], rng: &mut impl Rng) -> usize {
    let mut replaced = 0;
    let mut i = 0;
    while i < len {
        let mut step = 1;
        for n in [4usize, 3, 2, 1] {
            if i + n <= len && rng.gen::<f64>() < p[n - 1] {
                replaced += n;
                step = n;
                break;
            }
        }
        i += step;
    }
    replaced
}

/// Exact expected replaced count by dynamic programming over positions.
fn sweep_expectation(len: usize, p: [f64; 4]) -> f64 {
    let mut f = vec![0.0; len + 1];
    for i in (0..len).rev() {
        let mut none = 1.0;
        let mut e = 0.0;
        for n in [4usize, 3, 2, 1] {
            if i + n <= len {
                e += none * p[n - 1] * (n as f64 + f[i + n]);
                none *= 1.0 - p[n - 1];
            }
        }
        f[i] = e + none * f[i + 1];
    }
    f[0]
}

fn criterion_noise() -> Check {
    let cfg = NoiseConfig::default();
    let p = cfg.replace_prob;
    ensure(p == [0.1, 0.05, 0.025, 0.0125], || "default probabilities changed".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab: Vec<String> = (0..50).map(|i| format!("v{i}")).collect();
    let seqs: Vec<Vec<String>> = (0..1000)
        .map(|_| (0..500).map(|_| vocab[rng.gen_range(0..50)].clone()).collect())
        .collect();
    let pool = NgramPool::from_sequences(&seqs);
    let mut replaced = 0usize;
    for (i, s) in seqs.iter().enumerate() {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let out = noise(s, &cfg, &pool, &mut r).map_err(|e| e.to_string())?;
        ensure(out.tokens.len() == s.len(), || format!("sequence {i}: length changed"))?;
        replaced += out.replaced_tokens();
    }
    let got = replaced as f64 / (1000.0 * 500.0);

    let mut oracle_rng = rand::rngs::StdRng::seed_from_u64(44);
    let oracle_total: usize = (0..2000).map(|_| sweep_oracle(500, p, &mut oracle_rng)).sum();
    let oracle = oracle_total as f64 / (2000.0 * 500.0);
    let exact = sweep_expectation(500, p) / 500.0;
    let rel = (got - oracle).abs() / oracle;
    ensure(rel <= 0.10, || format!("fraction {got:.5} vs oracle {oracle:.5} ({:.1}%)", rel * 100.0))?;
    Ok(format!(
        "replaced fraction {got:.5}, Monte-Carlo oracle {oracle:.5} ({:+.2}%), exact {exact:.5}; lengths preserved",
        (got - oracle) / oracle * 100.0
    ))
}

// ---------------------------------------------------------------------------
// 5. generator contracts

fn criterion_generators() -> Check {
    // anchor preservation and closure over 10,000 stage outputs
    let c = synthetic_corpus(300, 11);
    let table = build_importance_table(&c).unwrap();
    let k = 4;
    let vocab = build_stage_vocabularies(&table, &c, &StagePlan::preset(k).unwrap()).unwrap();
    let pairs = make_pairs(&c, &vocab);
    let g = GeneratorConfig::default();
    let planner = train_planner(pairs.stage(1), g.planner_order, g.planner_smoothing()).unwrap();
    let refiners: Vec<RefinerModel> = (2..=k)
        .map(|s| train_refiner(pairs.stage(s), s, g.refiner_order, g.refiner_smoothing()).unwrap())
        .collect();
    let mut chain: Vec<&dyn StageGenerator> = vec![&planner];
    chain.extend(refiners.iter().map(|r| r as &dyn StageGenerator));
    let cfg = DecoderConfig {
        max_tokens: 150,
        ..Default::default()
    };
    let mut outputs = 0;
    let mut violations = Vec::new();
    for i in 0..2500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let trace = generate(&chain, &vocab, &[], &cfg, &mut rng).map_err(|e| e.to_string())?;
        for (s, out) in trace.stage_outputs.iter().enumerate() {
            outputs += 1;
            if let Some(t) = out.iter().find(|t| !vocab.stage(s + 1).contains(*t)) {
                violations.push(format!("sample {i} stage {}: {t:?} outside V_{}", s + 1, s + 1));
            }
            if s > 0 && !is_subsequence(&trace.stage_outputs[s - 1], out) {
                violations.push(format!("sample {i} stage {}: anchors lost", s + 1));
            }
        }
    }
    ensure(outputs == 10_000, || format!("{outputs} outputs"))?;
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;

    // memorization
    let target = toks("the quiet river runs past an old mill near town");
    let pair = |stage: usize, input: Vec<String>| progen_core::staging::TrainingPair {
        stage,
        source_id: "m".into(),
        input,
        target: target.clone(),
        noised: false,
    };
    let greedy = DecoderConfig::greedy();
    let p: PlannerModel = train_planner(&[pair(1, vec![])], 4, g.planner_smoothing()).unwrap();
    let got = p.generate(&[], &greedy, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    ensure(got == target, || format!("planner memorization produced {got:?}"))?;
    let anchors = toks("river mill town");
    let r = train_refiner(&[pair(2, anchors.clone())], 2, 3, g.refiner_smoothing()).unwrap();
    let got = r.generate(&anchors, &greedy, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    ensure(got == target, || format!("refiner memorization produced {got:?}"))?;

    // nucleus frequencies
    let dist = [('a', 0.5), ('b', 0.3), ('c', 0.2)];
    let cfg = DecoderConfig {
        top_p: 0.7,
        ..Default::default()
    };
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    for _ in 0..n {
        *counts
            .entry(progen_core::genmodel::sample_next(&dist, &cfg, &mut rng).unwrap())
            .or_default() += 1;
    }
    let mut z = Vec::new();
    for (sym, q) in [('a', 5.0 / 8.0), ('b', 3.0 / 8.0)] {
        let got = counts.get(&sym).copied().unwrap_or(0) as f64;
        let sigma = (n as f64 * q * (1.0 - q)).sqrt();
        let zs = (got - n as f64 * q) / sigma;
        ensure(zs.abs() <= 3.0, || format!("{sym}: {got} draws, z = {zs:.2}"))?;
        z.push(zs);
    }
    ensure(!counts.contains_key(&'c'), || "c sampled outside the nucleus".into())?;
    Ok(format!(
        "{outputs} stage outputs 0 violations; memorization ok; top-p z = {:.2}, {:.2}",
        z[0], z[1]
    ))
}

// ---------------------------------------------------------------------------
// 6. metric identities and naive oracles

fn grams(doc: &[String], n: usize) -> Vec<Vec<String>> {
    if doc.len() < n {
        return Vec::new();
    }
    (0..=doc.len() - n).map(|i| doc[i..i + n].to_vec()).collect()
}

fn count_in(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn msj_oracle(a: &[Vec<String>], b: &[Vec<String>], n: usize) -> f64 {
    let ga: Vec<Vec<String>> = a.iter().flat_map(|d| grams(d, n)).collect();
    let gb: Vec<Vec<String>> = b.iter().flat_map(|d| grams(d, n)).collect();
    if ga.is_empty() && gb.is_empty() {
        return 1.0;
    }
    if ga.is_empty() || gb.is_empty() {
        return 0.0;
    }
    let mut union: Vec<Vec<String>> = Vec::new();
    for g in ga.iter().chain(&gb) {
        if !union.contains(g) {
            union.push(g.clone());
        }
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for g in &union {
        let fa = count_in(&ga, g) as f64 / ga.len() as f64;
        let fb = count_in(&gb, g) as f64 / gb.len() as f64;
        lo += fa.min(fb);
        hi += fa.max(fb);
    }
    lo / hi
}

fn bleu_oracle(hyps: &[Vec<String>], refs: &[Vec<String>], n: usize) -> f64 {
    let c: usize = hyps.iter().map(Vec::len).sum();
    if c == 0 {
        return 0.0;
    }
    let mut r = 0;
    for h in hyps {
        let mut best = usize::MAX;
        let mut best_gap = usize::MAX;
        for rd in refs {
            let gap = rd.len().abs_diff(h.len());
            if gap < best_gap || (gap == best_gap && rd.len() < best) {
                best = rd.len();
                best_gap = gap;
            }
        }
        r += best;
    }
    let mut log_p = 0.0;
    for k in 1..=n {
        let (mut matched, mut total) = (0usize, 0usize);
        for h in hyps {
            let hg = grams(h, k);
            total += hg.len();
            let mut seen: Vec<&Vec<String>> = Vec::new();
            for g in &hg {
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let max_ref = refs.iter().map(|rd| count_in(&grams(rd, k), g)).max().unwrap_or(0);
                matched += count_in(&hg, g).min(max_ref);
            }
        }
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if k == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_p += p.ln() / n as f64;
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * log_p.exp()
}

fn tfidf_oracle(doc: &[String], reference: &[Vec<String>]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for w in doc {
        if out.contains_key(w) {
            continue;
        }
        let df = reference.iter().filter(|d| d.contains(w)).count();
        if df == 0 {
            continue;
        }
        let idf = (reference.len() as f64 / df as f64).ln();
        let tf = doc.iter().filter(|t| *t == w).count() as f64 / doc.len() as f64;
        out.insert(w.clone(), tf * idf);
    }
    out
}

fn tid_oracle(a: &[Vec<String>], b: &[Vec<String>], reference: &[Vec<String>]) -> f64 {
    let mean = |set: &[Vec<String>]| {
        let mut m: BTreeMap<String, f64> = BTreeMap::new();
        for d in set {
            for (w, v) in tfidf_oracle(d, reference) {
                *m.entry(w).or_default() += v / set.len() as f64;
            }
        }
        m
    };
    let (ma, mb) = (mean(a), mean(b));
    let keys: BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
    let sq: f64 = keys
        .into_iter()
        .map(|k| {
            let d = ma.get(k).unwrap_or(&0.0) - mb.get(k).unwrap_or(&0.0);
            d * d
        })
        .sum();
    sq.sqrt() * 100.0
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn sqrt_psd(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (vals, vecs) = jacobi_eigen(m.to_vec());
    let n = m.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| vecs[i][k] * vals[k].max(0.0).sqrt() * vecs[j][k]).sum())
                .collect()
        })
        .collect()
}

/// Mean and unbiased covariance plus eps*I by explicit loops.
fn stats_oracle(vectors: &[Vec<f64>], eps: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = vectors.len() as f64;
    let d = vectors[0].len();
    let mean: Vec<f64> = (0..d).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let cov = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let s: f64 = vectors.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum();
                    s / (n - 1.0) + if i == j { eps } else { 0.0 }
                })
                .collect()
        })
        .collect();
    (mean, cov)
}

/// Fréchet distance with the roles swapped: tr sqrt(S_B A S_B), S_B = sqrt(B).
fn frechet_oracle(a: &(Vec<f64>, Vec<Vec<f64>>), b: &(Vec<f64>, Vec<Vec<f64>>)) -> f64 {
    let d = a.0.len();
    let diff: f64 = (0..d).map(|i| (a.0[i] - b.0[i]).powi(2)).sum();
    let sb = sqrt_psd(&b.1);
    let m = matmul(&matmul(&sb, &a.1), &sb);
    let m: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| 0.5 * (m[i][j] + m[j][i])).collect()).collect();
    let (vals, _) = jacobi_eigen(m);
    let tr_a: f64 = (0..d).map(|i| a.1[i][i]).sum();
    let tr_b: f64 = (0..d).map(|i| b.1[i][i]).sum();
    (diff + tr_a + tr_b - 2.0 * vals.iter().map(|l| l.max(0.0).sqrt()).sum::<f64>()).max(0.0)
}

/// Fallback-embedding FBD recomputed from scratch.
fn fbd_oracle(gen: &[Vec<String>], reference: &[Vec<String>], dim: usize, eps: f64) -> f64 {
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    for d in reference {
        for (w, v) in tfidf_oracle(d, reference) {
            *mass.entry(w).or_default() += v;
        }
    }
    // every reference word has a dimension, even with zero mass
    for d in reference {
        for w in d {
            mass.entry(w.clone()).or_default();
        }
    }
    let mut words: Vec<(String, f64)> = mass.into_iter().collect();
    words.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    words.truncate(dim);
    let embed = |set: &[Vec<String>]| -> Vec<Vec<f64>> {
        set.iter()
            .map(|d| {
                let f = tfidf_oracle(d, reference);
                words.iter().map(|(w, _)| f.get(w).copied().unwrap_or(0.0)).collect()
            })
            .collect()
    };
    frechet_oracle(&stats_oracle(&embed(gen), eps), &stats_oracle(&embed(reference), eps))
}

fn criterion_metrics() -> Check {
    let cfg = MetricConfig::default();
    // identities
    let x = synthetic_corpus(40, 21);
    let rep = evaluate(&x, &x, &cfg).map_err(|e| e.to_string())?;
    for (n, v) in &rep.msj {
        ensure((v - 1.0).abs() <= 1e-12, || format!("msj[{n}] = {v}"))?;
    }
    for m in [&rep.f_bleu, &rep.b_bleu, &rep.ha_bleu] {
        for (n, v) in m {
            ensure((v - 1.0).abs() <= 1e-12, || format!("bleu[{n}] = {v}"))?;
        }
    }
    ensure(rep.tid == 0.0, || format!("tid = {}", rep.tid))?;
    let f = rep.fbd.get(FALLBACK_LABEL).copied().unwrap_or(f64::NAN);
    ensure(f <= 1e-8, || format!("fbd = {f}"))?;

    // naive oracles on random 3-document sets
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let words: Vec<String> = (0..6).map(|i| format!("x{i}")).collect();
    let doc = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.gen_range(3..=12);
        (0..len).map(|_| words[rng.gen_range(0..6)].clone()).collect()
    };
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for trial in 0..200 {
        let a: Vec<Vec<String>> = (0..3).map(|_| doc(&mut rng)).collect();
        let b: Vec<Vec<String>> = (0..3).map(|_| doc(&mut rng)).collect();
        let mut check = |name: &str, got: f64, want: f64| -> std::result::Result<(), String> {
            let err = (got - want).abs();
            worst = worst.max(err);
            compared += 1;
            ensure(err <= 1e-9, || format!("trial {trial} {name}: {got} vs oracle {want}"))
        };
        for n in 1..=5 {
            check("msj", msj(&a, &b, n).unwrap(), msj_oracle(&a, &b, n))?;
            check("bleu", corpus_bleu(&a, &b, n).unwrap(), bleu_oracle(&a, &b, n))?;
            let s = bleu_scores(&a, &b, n).unwrap();
            let (f, bb) = (bleu_oracle(&a, &b, n), bleu_oracle(&b, &a, n));
            let ha = if f + bb == 0.0 { 0.0 } else { 2.0 * f * bb / (f + bb) };
            check("b_bleu", s.backward, bb)?;
            check("ha_bleu", s.harmonic, ha)?;
        }
        let (ca, cb) = (corpus_of(a.clone()), corpus_of(b.clone()));
        check("tid", tid(&ca, &cb, &cb, 100.0).unwrap(), tid_oracle(&a, &b, &b))?;
        if trial % 10 == 0 {
            let rep = evaluate(&ca, &cb, &cfg).map_err(|e| e.to_string())?;
            check("report tid", rep.tid, tid_oracle(&a, &b, &b))?;
            check("report msj-2", rep.msj["2"], msj_oracle(&a, &b, 2))?;
            check("report f_bleu-4", rep.f_bleu["4"], bleu_oracle(&a, &b, 4))?;
            if let Some(&got) = rep.fbd.get(FALLBACK_LABEL) {
                check("fbd", got, fbd_oracle(&a, &b, cfg.fallback_dim, cfg.epsilon))?;
            }
        }
    }
    Ok(format!("identities exact; {compared} oracle comparisons, max error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 7. Fréchet numerics

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn gaussian_sample(n: usize, mean: &[f64], chol: &DMatrix<f64>, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = mean.len();
    let vectors = (0..n)
        .map(|i| {
            let z = DVector::from_iterator(d, (0..d).map(|_| normal(&mut rng)));
            let x = chol * z + DVector::from_column_slice(mean);
            (format!("s{i:05}"), x.iter().copied().collect())
        })
        .collect();
    EmbeddingSet {
        dim: d,
        label: "S".into(),
        vectors,
    }
}

fn criterion_frechet() -> Check {
    let start = Instant::now();
    let eps = 1e-6;
    let one = DMatrix::identity(1, 1);
    let a = gaussian_sample(5000, &[0.0], &one, 70);
    let b = gaussian_sample(5000, &[1.0], &one, 71);
    let d1 = fbd(&a, &b, eps).map_err(|e| e.to_string())?.distance;
    ensure((d1 - 1.0).abs() <= 0.05, || format!("1-D distance {d1}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let mut l = DMatrix::<f64>::zeros(8, 8);
    for i in 0..8 {
        for j in 0..i {
            l[(i, j)] = rng.gen_range(-0.5..0.5);
        }
        l[(i, i)] = rng.gen_range(0.5..1.5);
    }
    let mu: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let same = fbd(&gaussian_sample(5000, &mu, &l, 73), &gaussian_sample(5000, &mu, &l, 74), eps)
        .map_err(|e| e.to_string())?
        .distance;
    ensure(same <= 0.05, || format!("same-distribution distance {same}"))?;

    let shift: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 0.3 } else { -0.2 }).collect();
    let shifted_mu: Vec<f64> = mu.iter().zip(&shift).map(|(m, s)| m + s).collect();
    let s2: f64 = shift.iter().map(|s| s * s).sum();
    let shifted = fbd(&gaussian_sample(5000, &mu, &l, 75), &gaussian_sample(5000, &shifted_mu, &l, 76), eps)
        .map_err(|e| e.to_string())?
        .distance;
    ensure((shifted - s2).abs() <= 0.05, || format!("shifted distance {shifted} vs |s|^2 = {s2}"))?;

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.gen_range(1..=16);
        let mk = |rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
            (
                (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                (0..d).map(|_| rng.gen_range(1e-3..5.0)).collect(),
            )
        };
        let (ma, va) = mk(&mut rng);
        let (mb, vb) = mk(&mut rng);
        let stats = |m: &[f64], v: &[f64]| GaussianStats {
            mean: DVector::from_column_slice(m),
            covariance: DMatrix::from_diagonal(&DVector::from_column_slice(v)),
            count: 0,
        };
        let got = frechet_distance(&stats(&ma, &va), &stats(&mb, &vb)).unwrap().distance;
        let oracle: f64 = (0..d).map(|i| (ma[i] - mb[i]).powi(2) + (va[i].sqrt() - vb[i].sqrt()).powi(2)).sum();
        worst = worst.max((got - oracle).abs());
    }
    ensure(worst <= 1e-6, || format!("diagonal closed form error {worst:e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "1-D {d1:.4}; same-dist {same:.4}; shifted {shifted:.4} vs {s2:.4}; diagonal error {worst:.1e}; {secs:.2}s"
    ))
}

// ---------------------------------------------------------------------------
// 8 and 9. end-to-end runs on the synthetic corpus

struct EndToEnd {
    _dir: tempfile::TempDir,
    cfg: RunConfig,
    full: progen_core::metrics::MetricReport,
}

fn tree_digests(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, file_digest(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_end_to_end(keep: &mut Option<EndToEnd>) -> Check {
    let dir = tempfile::tempdir().unwrap();
    let docs = synthesize(&SynthConfig::default());
    let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
    let vocab: BTreeSet<&String> = docs.iter().flat_map(|d| &d.tokens).collect();
    write_corpus(&dir.path().join("corpus.jsonl"), &docs).unwrap();
    let mut cfg = RunConfig::default().with_base_dir(dir.path());
    cfg.corpus.train = "corpus.jsonl".into();

    let mut timings = Vec::new();
    let mut reports = Vec::new();
    for out in ["run-a", "run-b"] {
        cfg.output_dir = out.into();
        let start = Instant::now();
        let summary = cmd_run(&cfg).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        ensure(secs < 300.0, || format!("{out} took {secs:.0}s"))?;
        timings.push(secs);
        reports.push(summary.report);
    }
    let a = tree_digests(&dir.path().join("run-a"));
    let b = tree_digests(&dir.path().join("run-b"));
    ensure(a.len() >= 10, || format!("only {} artifacts", a.len()))?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    ensure(differing.is_empty() && a.len() == b.len(), || format!("artifacts differ: {differing:?}"))?;

    let r = &reports[0];
    for n in ["2", "3", "4", "5"] {
        for (name, m) in [("msj", &r.msj), ("f_bleu", &r.f_bleu), ("b_bleu", &r.b_bleu), ("ha_bleu", &r.ha_bleu)] {
            let v = m.get(n).copied().unwrap_or(f64::NAN);
            ensure((0.0..=1.0).contains(&v), || format!("{name}[{n}] = {v}"))?;
        }
    }
    ensure(r.tid.is_finite() && r.tid >= 0.0, || format!("tid = {}", r.tid))?;
    let f = r.fbd.get(FALLBACK_LABEL).copied().unwrap_or(f64::NAN);
    ensure(f.is_finite() && f >= 0.0, || "fallback fbd missing".into())?;

    cfg.output_dir = "run-a".into();
    let detail = format!(
        "{} docs, vocab {}, avg length {:.0}; runs {:.1}s / {:.1}s; {} artifacts identical; msj-2 {:.3}, ha-bleu-2 {:.3}, tid {:.3}, fbd {:.4}",
        docs.len(),
        vocab.len(),
        total as f64 / docs.len() as f64,
        timings[0],
        timings[1],
        a.len(),
        r.msj["2"],
        r.ha_bleu["2"],
        r.tid,
        f
    );
    *keep = Some(EndToEnd {
        _dir: dir,
        cfg,
        full: reports.swap_remove(0),
    });
    Ok(detail)
}

fn criterion_gold_plan(e2e: &Option<EndToEnd>) -> Check {
    let e = e2e.as_ref().ok_or("end-to-end run unavailable")?;
    let p = Pipeline::new(e.cfg.clone()).map_err(|e| e.to_string())?;
    let mode = GenerationMode::GoldPlan(2);
    p.generate(mode, false).map_err(|e| e.to_string())?;
    let (gold, _) = p
        .evaluate(&p.path(&Pipeline::generated_file(mode)), &p.test_file())
        .map_err(|e| e.to_string())?;
    let (gf, ff) = (gold.fbd[FALLBACK_LABEL], e.full.fbd[FALLBACK_LABEL]);
    let detail = format!("tid gold {:.3} vs full {:.3}; fbd gold {gf:.4} vs full {ff:.4}", gold.tid, e.full.tid);
    ensure(gold.tid <= e.full.tid && gf <= ff, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------------------

fn run(name: &str, f: impl FnOnce() -> Check) -> std::result::Result<String, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| format!("{name} panicked"))),
    }
}

fn main() {
    let mut e2e = None;
    let results: Vec<(usize, &str, bool, std::result::Result<String, String>)> = vec![
        (1, "importance oracle", true, run("1", criterion_importance)),
        (2, "vocabulary nesting and coverage", true, run("2", criterion_vocabularies)),
        (3, "extraction laws", true, run("3", criterion_extraction)),
        (4, "noising statistics", true, run("4", criterion_noise)),
        (5, "generator contracts", true, run("5", criterion_generators)),
        (6, "metric identities and oracles", true, run("6", criterion_metrics)),
        (7, "frechet numerics", true, run("7", criterion_frechet)),
        (8, "end-to-end determinism", true, run("8", || criterion_end_to_end(&mut e2e))),
        (9, "gold plan vs full generation (non-binding)", false, run("9", || criterion_gold_plan(&e2e))),
    ];
    let mut failed = 0;
    for (i, name, binding, r) in &results {
        match r {
            Ok(detail) => println!("criterion {i} PASS  {name}: {detail}"),
            Err(detail) if *binding => {
                failed += 1;
                println!("criterion {i} FAIL  {name}: {detail}");
            }
            Err(detail) => println!("criterion {i} WARN  {name}: {detail}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
