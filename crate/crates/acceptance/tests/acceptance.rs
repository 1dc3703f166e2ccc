//! Acceptance criteria 1-7. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion does.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

use htr_core::classifier::{
    balance_training_set, read_manifest, train_reference, CharacterClassifier, ClassDistribution, LogisticClassifier,
    SymbolAlphabet, TrainParams, NON_CHARACTER,
};
use htr_core::decoding::{brute_force_decode, counterpart_variants, decode, CounterpartSets};
use htr_core::eval::{compute_report, levenshtein, sweep, GroundTruth, SweepGrid, SWEEP_TIMEOUT};
use htr_core::fixtures::{dato_classifier, dato_lm, dato_segments, dato_word, DATO_CANDIDATES, DATO_WIDTH};
use htr_core::imaging::WordImage;
use htr_core::langmodel::{CharLm, Smoothing, WORD_END, WORD_START};
use htr_core::lattice::{
    build_lattice, enumerate_candidates, length_filter, select_labels, Candidate, Edge, Label, LabelSelection, Lattice,
    LatticeParams,
};
use htr_core::pipeline::{Settings, Transcriber, Transcription, WordResult};
use htr_core::segmentation::{segment, SegmentationMethod};
use htr_core::synth::{
    glyph_names, render_glyphs, render_word, synth_generate, training_set, GlyphSet, PageLayout, RenderParams,
    LATIN_CORPUS, LEXICON,
};
use htr_core::BinaryImage;
use htr_labeling::{decide, router, AppState, Decision, Exemplars, LabelStore, SegmentPool};

// Pinned tolerances and gates.
const SIMPLEX_TOL: f64 = 1e-9;
const LM_SUM_TOL: f64 = 1e-9;
const WORD_PROB_ULPS: f64 = 4.0 * f64::EPSILON;
const TOP1_GATE: f64 = 0.80;
const MRR_GATE: f64 = 0.85;
const DECODE_GAIN_GATE: usize = 1;
/// Relative slack for the wall-clock MWPT trend; the deterministic work
/// counters behind it must not decrease at all.
const MWPT_NOISE: f64 = 0.05;
const MWPT_REPEATS: usize = 11;

const BUDGET_1: Duration = Duration::from_secs(1);
const BUDGET_2: Duration = Duration::from_secs(30);
const BUDGET_3: Duration = Duration::from_secs(60);
const BUDGET_4: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within(start: Instant, budget: Duration) -> Result<f64, String> {
    let secs = start.elapsed().as_secs_f64();
    ensure!(start.elapsed() <= budget, "took {secs:.2} s, budget {} s", budget.as_secs());
    Ok(secs)
}

// ---------------------------------------------------------------------------
// 1. Worked examples

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let a = SymbolAlphabet::default();
    let nc = a.non_character();
    let names = |entries: &[(&str, f64)]| -> Result<Vec<String>, String> {
        let d = ClassDistribution::<f64>::with_remainder(&a, entries).map_err(err)?;
        Ok(match select_labels(&d, nc, 0.8, 0.1) {
            LabelSelection::Labels(v) => v.iter().map(|(i, _)| a.symbol(*i).name.clone()).collect(),
            LabelSelection::Drop => vec!["DROP".into()],
        })
    };
    ensure!(names(&[("a", 0.8), ("o", 0.1), ("d", 0.05)])? == ["a"], "label case 1");
    ensure!(names(&[("a", 0.75), ("o", 0.05), ("d", 0.05)])? == ["a"], "label case 2");
    ensure!(names(&[("a", 0.5), ("o", 0.4), ("d", 0.05)])? == ["a", "o"], "label case 3");

    let groups = CounterpartSets::new(vec![vec!['a', 'i'], vec!['c', 'o']]).map_err(err)?;
    let variants: HashSet<String> = counterpart_variants("dito", &groups).into_iter().collect();
    let expect: HashSet<String> = ["dito", "dato", "ditc", "datc"].iter().map(|s| s.to_string()).collect();
    ensure!(variants == expect, "variants of dito: {variants:?}");

    let lat: Lattice = build_lattice(&dato_word(), &dato_segments(), &dato_classifier().map_err(err)?, &LatticeParams::default())
        .map_err(err)?;
    ensure!(lat.vertices().len() == 8, "dato lattice has {} vertices", lat.vertices().len());
    let cands = enumerate_candidates(&lat, &dato_lm().map_err(err)?, &LatticeParams::default()).map_err(err)?;
    let texts: HashSet<&str> = cands.iter().map(|c| c.text.as_str()).collect();
    ensure!(cands.len() == 4 && texts == DATO_CANDIDATES.iter().copied().collect(), "dato candidates {texts:?}");

    let secs = within(start, BUDGET_1)?;
    Ok(format!("3 label cases, 4 variants, dato -> {{dato, daid, diid, dito}}; {secs:.3} s"))
}

// ---------------------------------------------------------------------------
// 2. Oracle equivalences

fn random_lattice(rng: &mut ChaCha8Rng, chars: &[char]) -> Lattice {
    let n = rng.gen_range(2..=8);
    let mut xs = vec![0usize];
    for _ in 1..n {
        let last = *xs.last().unwrap();
        xs.push(last + rng.gen_range(1..6));
    }
    let mut edges = Vec::new();
    for from in 0..n {
        for to in from + 1..n {
            if rng.gen_bool(0.45) {
                let k = rng.gen_range(1..=3);
                let mut pool = chars.to_vec();
                pool.shuffle(rng);
                let labels = pool[..k].iter().map(|&ch| Label { symbol: 0, ch, prob: 1.0 / k as f64 }).collect();
                edges.push(Edge { from, to, labels });
            }
        }
    }
    Lattice::from_parts(xs, edges).unwrap()
}

/// Every origin-to-sink label sequence, by plain recursion over the edge list.
fn all_paths(lat: &Lattice) -> Vec<String> {
    fn walk(lat: &Lattice, v: usize, prefix: &mut String, out: &mut Vec<String>) {
        let outgoing: Vec<&Edge> = lat.edges().iter().filter(|e| e.from == v).collect();
        if outgoing.is_empty() {
            if v != 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for e in outgoing {
            for l in &e.labels {
                prefix.push(l.ch);
                walk(lat, e.to, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(lat, 0, &mut String::new(), &mut out);
    out
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

fn edit_oracle(a: &[char], b: &[char], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(&d) = memo.get(&(a.len(), b.len())) {
        return d;
    }
    let sub = edit_oracle(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
    let del = edit_oracle(&a[1..], b, memo) + 1;
    let ins = edit_oracle(a, &b[1..], memo) + 1;
    let d = sub.min(del).min(ins);
    memo.insert((a.len(), b.len()), d);
    d
}

fn ab_strings(max: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max {
        layer = layer.iter().flat_map(|s| [format!("{s}a"), format!("{s}b")]).collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // (a) beta = 0 enumeration against all paths.
    let chars = ['a', 'b', 'c', 'd'];
    let lm = CharLm::<f64>::train_text("ab ba cab dab acd bad cd dd", 3, Smoothing::default(), &chars).map_err(err)?.0;
    let zero = LatticeParams { beta: 0.0, ..LatticeParams::default() };
    let mut paths = 0;
    for i in 0..100 {
        let lat = random_lattice(&mut rng, &chars);
        let got = sorted(enumerate_candidates(&lat, &lm, &zero).map_err(err)?.into_iter().map(|c| c.text).collect());
        let want = sorted(all_paths(&lat));
        ensure!(got == want, "lattice {i}: enumeration {got:?} vs oracle {want:?}");
        ensure!(got.len() as u128 == lat.path_count(), "lattice {i}: path count");
        paths += want.len();
    }

    // (b) decoding top-1 against exhaustive search.
    let sets = CounterpartSets::default();
    let letters = ['a', 'i', 'r', 'o', 'd', 'n', 'm', 'c', 'e', 't'];
    for i in 0..100 {
        let corpus: Vec<String> = (0..12)
            .map(|_| (0..rng.gen_range(1..=4)).map(|_| *letters.choose(&mut rng).unwrap()).collect())
            .collect();
        let tiny = CharLm::<f64>::train_text(&corpus.join(" "), 2, Smoothing::default(), &letters).map_err(err)?.0;
        let observed: String = (0..rng.gen_range(1..=4)).map(|_| *letters.choose(&mut rng).unwrap()).collect();
        let cand = Candidate { log_word_prob: tiny.log_word_prob(&observed).map_err(err)?, text: observed.clone(), path: Vec::new() };
        let top = decode(&[cand], &tiny, &sets, 1, usize::MAX).map_err(err)?.transcriptions[0].text.clone();
        let oracle = brute_force_decode(&observed, &tiny, &sets).map_err(err)?;
        ensure!(top == oracle, "instance {i}: decode {top} vs brute force {oracle} for {observed}");
    }

    // (c) levenshtein against the recursive definition.
    let strings = ab_strings(6);
    let mut pairs = 0;
    for a in &strings {
        let ac: Vec<char> = a.chars().collect();
        for b in &strings {
            let bc: Vec<char> = b.chars().collect();
            let want = edit_oracle(&ac, &bc, &mut HashMap::new());
            ensure!(levenshtein(a, b) == want, "levenshtein({a:?}, {b:?})");
            pairs += 1;
        }
    }

    // (d) word probability against a chain product of hand counts.
    let abc = ['a', 'b', 'c'];
    let model = CharLm::<f64>::train_text("ab ab ac", 2, Smoothing::None, &abc).map_err(err)?.0;
    let mut counts: HashMap<(char, char), u64> = HashMap::new();
    let mut totals: HashMap<char, u64> = HashMap::new();
    for w in ["ab", "ab", "ac"] {
        let padded: Vec<char> = std::iter::once(WORD_START).chain(w.chars()).chain(std::iter::once(WORD_END)).collect();
        for pair in padded.windows(2) {
            *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
            *totals.entry(pair[0]).or_insert(0) += 1;
        }
    }
    let mut words = vec![String::new()];
    let mut checked = 0;
    for _ in 0..3 {
        words = words.iter().flat_map(|w| abc.iter().map(move |c| format!("{w}{c}"))).collect();
        for w in &words {
            let padded: Vec<char> = std::iter::once(WORD_START).chain(w.chars()).chain(std::iter::once(WORD_END)).collect();
            let mut log_chain = 0.0f64;
            let mut chain = 1.0f64;
            for pair in padded.windows(2) {
                let c = counts.get(&(pair[0], pair[1])).copied().unwrap_or(0);
                let t = totals.get(&pair[0]).copied().unwrap_or(0);
                let ratio = if t == 0 { 0.0 } else { c as f64 / t as f64 };
                let term = model.cond_prob(&pair[0].to_string(), pair[1]).map_err(err)?;
                ensure!(term == ratio, "p({}|{}) = {term}, hand count {ratio}", pair[1], pair[0]);
                log_chain += ratio.ln();
                chain *= ratio;
            }
            let lp = model.log_word_prob(w).map_err(err)?;
            ensure!(lp == log_chain || (lp.is_infinite() && log_chain.is_infinite()), "log word_prob({w}) {lp} vs {log_chain}");
            let p = model.word_prob(w).map_err(err)?;
            ensure!((p - chain).abs() <= WORD_PROB_ULPS * chain, "word_prob({w}) {p} vs {chain}");
            checked += 1;
        }
    }
    ensure!(model.word_prob("ab").map_err(err)? == 2.0 / 3.0, "word_prob(ab) != 2/3");

    let secs = within(start, BUDGET_2)?;
    Ok(format!(
        "100 lattices ({paths} paths), 100 decode instances, {pairs} string pairs, {checked} chain products; {secs:.2} s"
    ))
}

// ---------------------------------------------------------------------------
// 3. Invariants

fn random_blob(rng: &mut ChaCha8Rng) -> BinaryImage {
    let (w, h) = (rng.gen_range(4..40), rng.gen_range(4..40));
    let bits = (0..w * h).map(|_| rng.gen_bool(0.3)).collect();
    BinaryImage::from_bits(w, h, bits).unwrap()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alphabet = SymbolAlphabet::default();
    let glyphs = GlyphSet::builtin();

    // Simplex: a briefly trained reference classifier on random and rendered inputs.
    let samples = training_set(&glyphs, &LEXICON, &alphabet, 60, 40, 25.0, &mut rng).map_err(err)?;
    let quick = TrainParams { epochs: 2, ..TrainParams::default() };
    let clf: LogisticClassifier = train_reference(&samples, &alphabet, &quick, &mut rng).map_err(err)?;
    let mut dists = 0;
    for _ in 0..300 {
        let d = clf.classify(&random_blob(&mut rng)).map_err(err)?;
        let sum: f64 = d.probs().iter().sum();
        ensure!((sum - 1.0).abs() <= SIMPLEX_TOL && d.probs().iter().all(|&p| p >= 0.0), "off simplex: sum {sum}");
        dists += 1;
    }

    // Conditional distributions of the maximum-likelihood model sum to one.
    let vocab = alphabet.text_chars();
    let mle = CharLm::<f64>::train_text(LATIN_CORPUS, 6, Smoothing::None, &vocab).map_err(err)?.0;
    let contexts = mle.contexts();
    for ctx in &contexts {
        let mut sum = mle.cond_prob(ctx, WORD_END).map_err(err)?;
        for &c in &vocab {
            sum += mle.cond_prob(ctx, c).map_err(err)?;
        }
        ensure!((sum - 1.0).abs() <= LM_SUM_TOL, "context {ctx:?} sums to {sum}");
    }

    // Substring probability never grows under extension.
    let backoff = CharLm::<f64>::train_text(LATIN_CORPUS, 6, Smoothing::default(), &vocab).map_err(err)?.0;
    for _ in 0..1000 {
        let prefix: String = (0..rng.gen_range(1..9)).map(|_| *vocab.choose(&mut rng).unwrap()).collect();
        let ext = format!("{prefix}{}", vocab.choose(&mut rng).unwrap());
        let (p, q) = (backoff.log_substring_prob(&prefix).map_err(err)?, backoff.log_substring_prob(&ext).map_err(err)?);
        ensure!(q <= p, "substring prob grew from {prefix:?} to {ext:?}");
    }

    // Pruning soundness.
    let small = ['a', 'b', 'c', 'd'];
    let lm = CharLm::<f64>::train_text("ab ba cab dab acd bad cd dd abba", 3, Smoothing::default(), &small).map_err(err)?.0;
    let zero = LatticeParams { beta: 0.0, ..LatticeParams::default() };
    let key = |c: &Candidate| format!("{}|{:?}", c.text, c.path);
    for i in 0..100 {
        let lat = random_lattice(&mut rng, &small);
        let beta = [1e-1, 1e-2, 1e-3, 1e-5][i % 4];
        let all: Vec<Candidate> = enumerate_candidates(&lat, &lm, &zero).map_err(err)?;
        let pruned: HashSet<String> =
            enumerate_candidates(&lat, &lm, &LatticeParams { beta, ..zero }).map_err(err)?.iter().map(key).collect();
        let full: HashSet<String> = all.iter().map(key).collect();
        ensure!(pruned.is_subset(&full), "lattice {i}: pruned output not a subset");
        for c in &all {
            let chars: Vec<char> = c.text.chars().collect();
            let mut keeps = true;
            for k in 1..=chars.len() {
                let prefix: String = chars[..k].iter().collect();
                keeps &= lm.log_substring_prob(&prefix).map_err(err)? >= beta.ln();
            }
            ensure!(!keeps || pruned.contains(&key(c)), "lattice {i}: {} lost by pruning", c.text);
        }
    }

    // Lattice structure and ink conservation on rendered words.
    let params = LatticeParams::default();
    let mut words = 0;
    for i in 0..100 {
        let text = LEXICON.choose(&mut rng).unwrap();
        let r = render_word(text, &alphabet, &glyphs, &RenderParams::default(), &mut rng).map_err(err)?;
        let word: WordImage = r.word_image("inv", 0, i).map_err(err)?;
        let ink: HashSet<(usize, usize)> = word.image.ink_pixels().into_iter().collect();
        for method in [SegmentationMethod::Over, SegmentationMethod::Polygonal] {
            let segs = segment(&word, method);
            let total: usize = segs.iter().map(|s| s.pixels.len()).sum();
            let union: HashSet<(usize, usize)> = segs.iter().flat_map(|s| s.pixels.iter().copied()).collect();
            ensure!(total == union.len() && union == ink, "word {i} ({text}, {method:?}): ink not conserved");
            if method == SegmentationMethod::Polygonal {
                let lat: Lattice = build_lattice(&word, &segs, &clf, &params).map_err(err)?;
                let xs = lat.vertices();
                ensure!(xs[0] == 0 && xs.windows(2).all(|w| w[0] < w[1]), "word {i}: vertices not strictly ordered");
                for e in lat.edges() {
                    ensure!(e.from < e.to && xs[e.from] < xs[e.to], "word {i}: backward edge");
                    ensure!(e.to != 0, "word {i}: edge into origin");
                    ensure!((lat.span(e) as f64) <= params.sigma, "word {i}: edge longer than sigma");
                    ensure!(e.labels.iter().all(|l| l.symbol != alphabet.non_character()), "word {i}: non-character label");
                }
            }
        }
        words += 1;
    }

    let secs = within(start, BUDGET_3)?;
    Ok(format!(
        "{dists} distributions, {} contexts, 1000 extensions, 100 pruned lattices, {words} words x 2 segmenters; {secs:.2} s",
        contexts.len()
    ))
}

// ---------------------------------------------------------------------------
// 4. End-to-end synthetic run

struct Trained {
    transcriber: Transcriber,
    words: Vec<WordImage>,
    truth: GroundTruth,
}

fn criterion_4(shared: &mut Option<Trained>) -> Outcome {
    let start = Instant::now();
    let glyphs = GlyphSet::builtin();
    let alphabet = SymbolAlphabet::default();
    ensure!(glyphs.len() == 23 && alphabet.len() == 23, "expected 23 templates and classes");
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let samples = training_set(&glyphs, &LEXICON, &alphabet, 400, 1000, 25.0, &mut rng).map_err(err)?;
    let mut per_class = vec![0usize; alphabet.len()];
    for s in &samples {
        per_class[s.label] += 1;
    }
    ensure!(samples.len() == 23_000 && per_class.iter().all(|&n| n == 1000), "training set not 23 x 1000");
    let clf: LogisticClassifier = train_reference(&samples, &alphabet, &TrainParams::default(), &mut rng).map_err(err)?;
    let lm = CharLm::train_text(LATIN_CORPUS, 6, Smoothing::default(), &alphabet.text_chars()).map_err(err)?.0;

    let set = synth_generate(&glyphs, &LEXICON, &alphabet, 200, &PageLayout::default(), &mut rng).map_err(err)?;
    let words: Vec<WordImage> = set.words.iter().map(|(w, _)| w.clone()).collect();
    let truth = GroundTruth::from(&set);
    let transcriber = Transcriber::new(clf, lm, CounterpartSets::default(), Settings::default()).map_err(err)?;
    let results = transcriber.transcribe_words(&words).map_err(err)?;
    let report = compute_report(&results, &truth, &[1, 5, 10]).map_err(err)?;
    let top1 = report.m_precision[&1];

    // Counterpart swap fixture: one character of each lexicon word is drawn
    // with a confusable glyph.
    let sets = CounterpartSets::default();
    let plain = transcriber.with_settings(Settings { decode: false, ..Settings::default() }).map_err(err)?;
    let (mut undecoded, mut decoded, mut n) = (0usize, 0usize, 0usize);
    for text in LEXICON {
        let Some(pos) = text.chars().position(|c| sets.counterparts(c).len() > 1) else { continue };
        let c = text.chars().nth(pos).unwrap();
        let mut names = glyph_names(text, &alphabet, &glyphs, &mut rng).map_err(err)?;
        names[pos] = sets.counterparts(c).into_iter().find(|&o| o != c).unwrap().to_string();
        let word = render_glyphs(text, &names, &glyphs, &RenderParams::default(), &mut rng)
            .and_then(|r| r.word_image("swap", 0, n))
            .map_err(err)?;
        n += 1;
        undecoded += usize::from(plain.transcribe_word(&word).top() == Some(text));
        decoded += usize::from(transcriber.transcribe_word(&word).top() == Some(text));
    }

    let secs = within(start, BUDGET_4)?;
    let detail = format!(
        "top-1 {:.3} (gate {TOP1_GATE}), MRR {:.3} (gate {MRR_GATE}), swap fixture {undecoded} -> {decoded} of {n}; {secs:.1} s",
        top1, report.mrr
    );
    *shared = Some(Trained { transcriber, words, truth });
    ensure!(top1 >= TOP1_GATE, "top-1 below gate: {detail}");
    ensure!(report.mrr >= MRR_GATE, "MRR below gate: {detail}");
    ensure!(decoded >= undecoded + DECODE_GAIN_GATE, "decoding gained too little: {detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 5. Metric arithmetic

fn result(id: &str, texts: &[&str]) -> WordResult {
    WordResult {
        word_id: id.into(),
        page_id: "p".into(),
        line_index: 0,
        word_index: 0,
        transcriptions: texts.iter().map(|t| Transcription { text: t.to_string(), score: -1.0, decoded: false }).collect(),
        untranscribed: texts.is_empty(),
        timed_out: false,
        error: None,
        elapsed_ms: 1.0,
        edges: 0,
        expansions: 0,
    }
}

fn criterion_5() -> Outcome {
    let truth = GroundTruth::new([("w1", "dato"), ("w2", "anno"), ("w3", "cum")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
        .map_err(err)?;
    let results = vec![result("w1", &["dato", "dito"]), result("w2", &["amno", "anno"]), result("w3", &["cnm"])];
    let mrr = compute_report(&results, &truth, &[1]).map_err(err)?.mrr;
    ensure!(mrr == 0.5, "MRR {mrr}");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pool = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "l", "m", "n"];
    let ms: Vec<usize> = (1..=12).collect();
    for i in 0..100 {
        let mut entries = BTreeMap::new();
        let mut rs = Vec::new();
        for w in 0..rng.gen_range(1..30) {
            let id = format!("w{w}");
            let truth_text = *pool.choose(&mut rng).unwrap();
            entries.insert(id.clone(), truth_text.to_string());
            let mut ranked: Vec<&str> = pool.to_vec();
            ranked.shuffle(&mut rng);
            ranked.truncate(rng.gen_range(0..=pool.len()));
            rs.push(result(&id, &ranked));
        }
        let report = compute_report(&rs, &GroundTruth::new(entries).map_err(err)?, &ms).map_err(err)?;
        let prec: Vec<f64> = ms.iter().map(|m| report.m_precision[m]).collect();
        ensure!(prec.windows(2).all(|w| w[0] <= w[1]), "fixture {i}: m-precision decreases {prec:?}");
    }

    let p = LatticeParams::default();
    let cand = |t: &str| Candidate::<f64> { text: t.into(), log_word_prob: 0.0, path: Vec::new() };
    let needed = p.min_len_ratio * DATO_WIDTH as f64;
    ensure!((needed - 59.4).abs() < 1e-12, "required length {needed}");
    ensure!(p.avg_char_px * 4.0 == 76.0 && p.avg_char_px * 2.0 == 38.0, "average character length");
    let kept = length_filter(vec![cand("dato"), cand("da")], DATO_WIDTH, &p).map_err(err)?;
    ensure!(kept.len() == 1 && kept[0].text == "dato", "length filter kept {:?}", kept.iter().map(|c| &c.text).collect::<Vec<_>>());
    Ok("ranks {1,2,absent} -> MRR 0.5, 100 m-precision fixtures monotone, 76 >= 59.4 kept and 38 < 59.4 dropped".into())
}

// ---------------------------------------------------------------------------
// 6. Parameter trends

/// Fastest repeat: the least disturbed estimate of a deterministic workload.
fn fastest(v: Vec<f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn criterion_6(shared: &Option<Trained>) -> Outcome {
    let Some(t) = shared else { return Err("needs the trained pipeline of criterion 4".into()) };
    let etas = [0.05, 0.1, 0.3];
    let grid = SweepGrid { eta: etas.to_vec(), ..SweepGrid::default() };
    let mut mwpt: Vec<Vec<f64>> = vec![Vec::new(); etas.len()];
    let mut work = Vec::new();
    // Warm-up pass, discarded.
    sweep(&t.transcriber, &grid, &t.words, &t.truth, &[1], SWEEP_TIMEOUT).map_err(err)?;
    for _ in 0..MWPT_REPEATS {
        let rows = sweep(&t.transcriber, &grid, &t.words, &t.truth, &[1], SWEEP_TIMEOUT).map_err(err)?;
        work = rows.iter().map(|r| (r.total_edges, r.total_expansions)).collect();
        for (k, r) in rows.iter().enumerate() {
            mwpt[k].push(r.report.mwpt_ms);
        }
    }
    let med: Vec<f64> = mwpt.into_iter().map(fastest).collect();
    let strict = med.windows(2).all(|w| w[0] <= w[1]);
    ensure!(work.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1), "edges/expansions decrease in eta: {work:?}");
    ensure!(
        med.windows(2).all(|w| w[1] >= w[0] * (1.0 - MWPT_NOISE)),
        "fastest-repeat MWPT decreases in eta beyond noise: {med:?} ms"
    );

    let beta_grid = SweepGrid { beta: vec![1e-16, 1e-4], ..SweepGrid::default() };
    let rows = sweep(&t.transcriber, &beta_grid, &t.words, &t.truth, &[1], SWEEP_TIMEOUT).map_err(err)?;
    let (fine, coarse) = (rows[0].report.mrr, rows[1].report.mrr);
    ensure!(fine >= coarse, "MRR at beta 1e-16 ({fine}) below beta 1e-4 ({coarse})");
    Ok(format!(
        "fastest-repeat MWPT {:.3}/{:.3}/{:.3} ms ({}), edges {:?}, MRR beta 1e-16 {fine:.3} >= 1e-4 {coarse:.3}",
        med[0],
        med[1],
        med[2],
        if strict { "strictly ordered" } else { "within noise" },
        work.iter().map(|w| w.0).collect::<Vec<_>>()
    ))
}

// ---------------------------------------------------------------------------
// 7. Labeling service

async fn post(app: &axum::Router, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, serde_json::Value) {
    let req = Request::builder().method("POST").uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null))
}

fn criterion_7() -> Outcome {
    let tally = |e: &[(&str, u32)]| e.iter().map(|&(s, n)| (s.to_string(), n)).collect::<BTreeMap<_, _>>();
    ensure!(decide(&tally(&[("a", 5), ("o", 1)]), 3, 2) == Decision::Label("a".into()), "majority case");
    ensure!(decide(&tally(&[("a", 3), ("o", 3)]), 3, 2) == Decision::Label(NON_CHARACTER.into()), "tie case");
    ensure!(decide(&tally(&[("a", 1)]), 3, 2) == Decision::Pending, "under-quorum case");

    let alphabet = SymbolAlphabet::default();
    let glyphs = GlyphSet::builtin();
    let mut items = Vec::new();
    let mut truth = HashMap::new();
    for (i, s) in alphabet.symbols().iter().enumerate() {
        let id = format!("g{i:02}");
        truth.insert(id.clone(), s.name.clone());
        items.push((id, glyphs.get(&s.name).unwrap().clone()));
    }
    let n_items = items.len();
    let dir = tempfile::tempdir().map_err(err)?;
    let store = Arc::new(LabelStore::in_memory(SegmentPool::new(items).map_err(err)?, Exemplars::builtin(), 1));
    let app = router(AppState { store: store.clone(), export_dir: dir.path().to_path_buf(), static_dir: None });

    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(8).enable_all().build().map_err(err)?;
    let (expected, cast) = runtime.block_on(async {
        let (_, task) = post(&app, "/api/tasks?symbol=a", None).await;
        let id = task["task_id"].as_str().unwrap().to_string();
        let grid: Vec<String> = task["grid"].as_array().unwrap().iter().map(|g| g["id"].as_str().unwrap().to_string()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let schedule: Vec<Vec<String>> = (0..50).map(|_| grid.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect()).collect();
        let mut expected: HashMap<String, u32> = HashMap::new();
        for ids in &schedule {
            for g in ids {
                *expected.entry(g.clone()).or_insert(0) += 1;
            }
        }
        let cast: usize = schedule.iter().map(Vec::len).sum();
        let handles: Vec<_> = schedule
            .into_iter()
            .enumerate()
            .map(|(w, ids)| {
                let app = app.clone();
                let uri = format!("/api/tasks/{id}/votes");
                tokio::spawn(async move { post(&app, &uri, Some(serde_json::json!({"worker_id": format!("w{w}"), "selected": ids}))).await.0 })
            })
            .collect();
        for h in handles {
            assert_eq!(h.await.unwrap(), StatusCode::OK);
        }
        (expected, cast)
    });
    let status = store.status();
    ensure!(status.votes == cast as u64 && status.submissions == 50, "tallies {} vs {cast} selections", status.votes);
    for (id, n) in &expected {
        let got = store.tallies(id).and_then(|t| t.get("a").copied()).unwrap_or(0);
        ensure!(got == *n, "item {id}: tally {got}, expected {n}");
    }

    // Label every item by its own symbol, then export and train from the manifest.
    let fresh = LabelStore::in_memory(
        SegmentPool::new(truth.keys().map(|id| (id.clone(), glyphs.get(&truth[id]).unwrap().clone())).collect()).map_err(err)?,
        Exemplars::builtin(),
        2,
    );
    for s in alphabet.symbols() {
        let task = fresh.create_task(&s.name).map_err(err)?;
        let hits: Vec<String> = task.grid.iter().filter(|g| truth[*g] == s.name).cloned().collect();
        for w in 0..3 {
            fresh
                .submit(htr_labeling::VoteSubmission { task_id: task.task_id.clone(), worker_id: format!("w{w}"), selected: hits.clone() })
                .map_err(err)?;
        }
    }
    let fin = fresh.finalize(3, 2).map_err(err)?;
    ensure!(fin.labeled.len() == n_items && fin.pending == 0, "finalized {} of {n_items}", fin.labeled.len());
    let manifest = fresh.export(dir.path()).map_err(err)?;
    let samples = read_manifest(&manifest, &alphabet).map_err(err)?;
    ensure!(samples.iter().any(|s| s.label == alphabet.non_character()), "no non-character sample exported");
    let balanced = balance_training_set(&samples, &alphabet, 5, &mut ChaCha8Rng::seed_from_u64(0)).map_err(err)?;
    let quick = TrainParams { epochs: 1, ..TrainParams::default() };
    train_reference::<f64, _>(&balanced, &alphabet, &quick, &mut ChaCha8Rng::seed_from_u64(0)).map_err(err)?;
    Ok(format!("50 concurrent submissions, {cast} votes conserved; 3 finalize cases; {} exported samples trained", samples.len()))
}

// ---------------------------------------------------------------------------

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    // Written straight to stdout so the lines survive test output capture.
    let mut out = std::io::stdout().lock();
    let ok = outcome.is_ok();
    let _ = match outcome {
        Ok(detail) => writeln!(out, "criterion {name}: PASS ({detail})"),
        Err(why) => writeln!(out, "criterion {name}: FAIL ({why})"),
    };
    let _ = out.flush();
    ok
}

#[test]
fn acceptance() {
    let mut shared = None;
    let results = [
        run("1 worked examples", criterion_1),
        run("2 oracle equivalences", criterion_2),
        run("3 invariants", criterion_3),
        run("4 end-to-end synthetic run", || criterion_4(&mut shared)),
        run("5 metric arithmetic", criterion_5),
        run("6 parameter trends", || criterion_6(&shared)),
        run("7 labeling service", criterion_7),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
