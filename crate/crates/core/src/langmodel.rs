//! Character q-gram language model with word-boundary markers.
//!
//! Words are padded as `$word^`. Every symbol is counted under all of its
//! left contexts of length `0..q`, never reaching left of `$`. The empty
//! context only counts in-word symbols, so it models text interior.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const WORD_START: char = '$';
pub const WORD_END: char = '^';
pub const MAX_ORDER: usize = 8;
pub const DEFAULT_ORDER: usize = 6;
pub const DEFAULT_BACKOFF: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Maximum likelihood; unseen events get probability 0.
    None,
    /// MLE when the event was seen, otherwise `alpha` times the estimate for
    /// the context shortened by one, grounded at an add-one unigram.
    StupidBackoff { alpha: f64 },
}

impl Default for Smoothing {
    fn default() -> Self {
        Self::StupidBackoff { alpha: DEFAULT_BACKOFF }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "none"),
            Self::StupidBackoff { alpha } => write!(f, "backoff:{alpha}"),
        }
    }
}

impl FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(Self::None);
        }
        if s == "backoff" {
            return Ok(Self::default());
        }
        let alpha = s
            .strip_prefix("backoff:")
            .and_then(|a| a.parse::<f64>().ok())
            .ok_or_else(|| Error::Format(format!("unknown smoothing {s:?}")))?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Format(format!("backoff weight {alpha} outside (0, 1]")));
        }
        Ok(Self::StupidBackoff { alpha })
    }
}

/// Lowercases, folds `v`→`u` and `j`→`i`, splits on non-letters and drops
/// letters outside `alphabet` (when given). Returns the tokens and the
/// number of dropped letters.
pub fn tokenize(text: &str, alphabet: Option<&BTreeSet<char>>) -> (Vec<String>, usize) {
    let mut tokens = Vec::new();
    let mut dropped = 0;
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if !ch.is_alphabetic() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        let ch = match ch {
            'v' => 'u',
            'j' => 'i',
            c => c,
        };
        if alphabet.is_some_and(|a| !a.contains(&ch)) {
            dropped += 1;
            continue;
        }
        current.push(ch);
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    (tokens, dropped)
}

#[derive(Debug, Default, Clone, PartialEq)]
struct CountTable {
    /// context -> next symbol -> count
    counts: HashMap<String, HashMap<char, u64>>,
    totals: HashMap<String, u64>,
    vocabulary: BTreeSet<char>,
    trained_order: usize,
}

/// Trained character language model.
#[derive(Debug, Clone, PartialEq)]
pub struct CharLm<S = f64> {
    table: Arc<CountTable>,
    order: usize,
    smoothing: Smoothing,
    _scalar: std::marker::PhantomData<S>,
}

impl<S: Scalar> CharLm<S> {
    /// Counts q-grams over the given words.
    ///
    /// `vocabulary` declares text symbols known to the model even if the
    /// corpus lacks them; symbols found in the corpus are always included.
    pub fn train<I, W>(words: I, order: usize, smoothing: Smoothing, vocabulary: &[char]) -> Result<Self>
    where
        I: IntoIterator<Item = W>,
        W: AsRef<str>,
    {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidArgument(format!("order {order} outside 2..={MAX_ORDER}")));
        }
        let mut table = CountTable { trained_order: order, ..Default::default() };
        table.vocabulary.extend(vocabulary.iter().copied());
        let mut any = false;
        for w in words {
            let w = w.as_ref();
            if w.is_empty() {
                continue;
            }
            if let Some(bad) = w.chars().find(|c| *c == WORD_START || *c == WORD_END) {
                return Err(Error::UnknownSymbol(bad.to_string()));
            }
            any = true;
            let padded: Vec<char> = std::iter::once(WORD_START).chain(w.chars()).chain(std::iter::once(WORD_END)).collect();
            for k in 1..padded.len() {
                let symbol = padded[k];
                if symbol != WORD_END {
                    table.vocabulary.insert(symbol);
                }
                for len in 0..=(order - 1).min(k) {
                    if len == 0 && symbol == WORD_END {
                        continue;
                    }
                    let context: String = padded[k - len..k].iter().collect();
                    *table.counts.entry(context.clone()).or_default().entry(symbol).or_default() += 1;
                    *table.totals.entry(context).or_default() += 1;
                }
            }
        }
        if !any {
            return Err(Error::InvalidArgument("empty training corpus".into()));
        }
        Ok(Self { table: Arc::new(table), order, smoothing, _scalar: Default::default() })
    }

    /// Tokenizes raw text and trains on the resulting words.
    pub fn train_text(text: &str, order: usize, smoothing: Smoothing, vocabulary: &[char]) -> Result<(Self, usize)> {
        let restrict: Option<BTreeSet<char>> = (!vocabulary.is_empty()).then(|| vocabulary.iter().copied().collect());
        let (tokens, dropped) = tokenize(text, restrict.as_ref());
        if dropped > 0 {
            log::warn!("dropped {dropped} letters outside the alphabet");
        }
        Ok((Self::train(tokens, order, smoothing, vocabulary)?, dropped))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    /// Same counts queried with a shorter (or equal) order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        if order < 2 || order > self.table.trained_order {
            return Err(Error::InvalidArgument(format!("order {order} not available (trained with {})", self.table.trained_order)));
        }
        Ok(Self { order, ..self.clone() })
    }

    pub fn with_smoothing(&self, smoothing: Smoothing) -> Self {
        Self { smoothing, ..self.clone() }
    }

    /// In-word symbols known to the model.
    pub fn vocabulary(&self) -> &BTreeSet<char> {
        &self.table.vocabulary
    }

    /// Raw count of `symbol` after `context`.
    pub fn count(&self, context: &str, symbol: char) -> u64 {
        self.table.counts.get(context).and_then(|m| m.get(&symbol)).copied().unwrap_or(0)
    }

    /// Total count of events after `context`.
    pub fn context_total(&self, context: &str) -> u64 {
        self.table.totals.get(context).copied().unwrap_or(0)
    }

    /// Contexts seen in training, sorted.
    pub fn contexts(&self) -> Vec<String> {
        let mut c: Vec<String> = self.table.counts.keys().cloned().collect();
        c.sort();
        c
    }

    fn check_symbol(&self, symbol: char) -> Result<()> {
        if symbol == WORD_END || self.table.vocabulary.contains(&symbol) {
            Ok(())
        } else {
            Err(Error::UnknownSymbol(symbol.to_string()))
        }
    }

    fn check_context(&self, context: &[char]) -> Result<()> {
        for (i, &c) in context.iter().enumerate() {
            let ok = (c == WORD_START && i == 0) || self.table.vocabulary.contains(&c);
            if !ok {
                return Err(Error::UnknownSymbol(c.to_string()));
            }
        }
        Ok(())
    }

    fn log_ratio(count: u64, total: u64) -> S {
        if count == 0 || total == 0 {
            return S::neg_infinity();
        }
        (S::of_count(count) / S::of_count(total)).ln()
    }

    /// Log probability of `symbol` after `context` (already validated, any length).
    fn log_cond_chars(&self, context: &[char], symbol: char) -> S {
        let keep = context.len().min(self.order - 1);
        let ctx = &context[context.len() - keep..];
        match self.smoothing {
            Smoothing::None => {
                let key: String = ctx.iter().collect();
                Self::log_ratio(self.count(&key, symbol), self.context_total(&key))
            }
            Smoothing::StupidBackoff { alpha } => {
                let log_alpha = S::of(alpha).ln();
                let mut penalty = S::zero();
                for start in 0..ctx.len() {
                    let key: String = ctx[start..].iter().collect();
                    let c = self.count(&key, symbol);
                    if c > 0 {
                        return penalty + Self::log_ratio(c, self.context_total(&key));
                    }
                    penalty = penalty + log_alpha;
                }
                let vocab = self.table.vocabulary.len() as u64 + 1;
                penalty + Self::log_ratio(self.count("", symbol) + 1, self.context_total("") + vocab)
            }
        }
    }

    /// Natural log of `p(symbol | context)`; the context is trimmed to its last `q - 1` symbols.
    pub fn log_cond_prob(&self, context: &str, symbol: char) -> Result<S> {
        let ctx: Vec<char> = context.chars().collect();
        self.check_context(&ctx)?;
        self.check_symbol(symbol)?;
        Ok(self.log_cond_chars(&ctx, symbol))
    }

    pub fn cond_prob(&self, context: &str, symbol: char) -> Result<S> {
        Ok(self.log_cond_prob(context, symbol)?.exp())
    }

    /// Log of the chain product over `$text^`.
    pub fn log_word_prob(&self, text: &str) -> Result<S> {
        let padded: Vec<char> = std::iter::once(WORD_START).chain(text.chars()).chain(std::iter::once(WORD_END)).collect();
        self.log_chain(&padded, 1)
    }

    pub fn word_prob(&self, text: &str) -> Result<S> {
        Ok(self.log_word_prob(text)?.exp())
    }

    /// Log of the chain product over `text` without boundary markers.
    pub fn log_substring_prob(&self, text: &str) -> Result<S> {
        let chars: Vec<char> = text.chars().collect();
        self.log_chain(&chars, 0)
    }

    pub fn substring_prob(&self, text: &str) -> Result<S> {
        Ok(self.log_substring_prob(text)?.exp())
    }

    /// Log probability of extending a known-valid prefix by one symbol,
    /// with contexts taken from the prefix only (no start marker).
    pub fn log_extend_substring(&self, prefix: &[char], symbol: char) -> Result<S> {
        self.check_symbol(symbol)?;
        if symbol == WORD_END {
            return Err(Error::UnknownSymbol(symbol.to_string()));
        }
        Ok(self.log_cond_chars(prefix, symbol))
    }

    /// Log probability of `symbol` following `context`, where the context may
    /// begin with the start marker.
    pub fn log_next(&self, context: &[char], symbol: char) -> Result<S> {
        self.check_context(context)?;
        self.check_symbol(symbol)?;
        Ok(self.log_cond_chars(context, symbol))
    }

    fn log_chain(&self, seq: &[char], first: usize) -> Result<S> {
        if seq.len() <= first || (first == 1 && seq.len() < 3) {
            return Err(Error::InvalidArgument("empty transcription".into()));
        }
        let mut total = S::zero();
        for k in first..seq.len() {
            let symbol = seq[k];
            let inner = first == 1 && k + 1 == seq.len();
            if !inner && (symbol == WORD_START || symbol == WORD_END) {
                return Err(Error::UnknownSymbol(symbol.to_string()));
            }
            self.check_symbol(symbol)?;
            let start = k.saturating_sub(self.order - 1);
            total = total + self.log_cond_chars(&seq[start..k], symbol);
        }
        Ok(total)
    }

    /// Line-oriented text serialization.
    ///
    /// ```text
    /// charlm v1 q=<q> smoothing=<none|backoff:alpha> rows=<n> vocab=<symbols>
    /// <context>\t<symbol>\t<count>
    /// ```
    pub fn to_text(&self) -> String {
        let mut rows: BTreeMap<(&str, char), u64> = BTreeMap::new();
        for (ctx, m) in &self.table.counts {
            for (&sym, &c) in m {
                rows.insert((ctx.as_str(), sym), c);
            }
        }
        let vocab: String = self.table.vocabulary.iter().collect();
        let mut out = format!("charlm v1 q={} smoothing={} rows={} vocab={}\n", self.order, self.smoothing, rows.len(), vocab);
        for ((ctx, sym), c) in rows {
            out.push_str(&format!("{ctx}\t{sym}\t{c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty model".into()))?;
        let mut fields = header.split(' ');
        if fields.next() != Some("charlm") {
            return Err(Error::Format("missing charlm header".into()));
        }
        match fields.next() {
            Some("v1") => {}
            other => return Err(Error::Format(format!("unsupported version {other:?}"))),
        }
        let mut order = None;
        let mut smoothing = None;
        let mut rows = None;
        let mut vocab = BTreeSet::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| Error::Format(format!("bad header field {f:?}")))?;
            match k {
                "q" => order = v.parse::<usize>().ok(),
                "smoothing" => smoothing = Some(v.parse::<Smoothing>()?),
                "rows" => rows = Some(v.parse::<usize>().map_err(|_| Error::Format(format!("bad row count {v:?}")))?),
                "vocab" => vocab = v.chars().collect(),
                _ => return Err(Error::Format(format!("unknown header field {k:?}"))),
            }
        }
        let order = order.filter(|q| (2..=MAX_ORDER).contains(q)).ok_or_else(|| Error::Format("missing or invalid order".into()))?;
        let smoothing = smoothing.ok_or_else(|| Error::Format("missing smoothing".into()))?;
        let rows = rows.ok_or_else(|| Error::Format("missing row count".into()))?;
        if rows == 0 {
            return Err(Error::Format("model has no counts".into()));
        }
        let mut table = CountTable { trained_order: order, vocabulary: vocab, ..Default::default() };
        let mut seen = 0;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(ctx), Some(sym), Some(count), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Format(format!("bad row {line:?}")));
            };
            let mut sym_chars = sym.chars();
            let (Some(sym), None) = (sym_chars.next(), sym_chars.next()) else {
                return Err(Error::Format(format!("bad symbol in row {line:?}")));
            };
            let count: u64 = count.parse().map_err(|_| Error::Format(format!("bad count in row {line:?}")))?;
            if ctx.chars().count() >= order {
                return Err(Error::Format(format!("context longer than order in row {line:?}")));
            }
            if sym != WORD_END {
                table.vocabulary.insert(sym);
            }
            table.counts.entry(ctx.to_string()).or_default().insert(sym, count);
            *table.totals.entry(ctx.to_string()).or_default() += count;
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Format(format!("expected {rows} rows, found {seen}")));
        }
        Ok(Self { table: Arc::new(table), order, smoothing, _scalar: Default::default() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn abac() -> CharLm {
        CharLm::train(["ab", "ab", "ac"], 2, Smoothing::None, &[]).unwrap()
    }

    #[test]
    fn hand_counts() {
        let lm = abac();
        assert_eq!(lm.count("a", 'b'), 2);
        assert_eq!(lm.count("a", 'c'), 1);
        assert_eq!(lm.count("$", 'a'), 3);
        assert_eq!(lm.count("b", '^'), 2);
        assert_eq!(lm.count("", '^'), 0);
        assert_eq!(lm.context_total(""), 6);
    }

    #[test]
    fn rejects_bad_training_input() {
        assert!(CharLm::<f64>::train(Vec::<String>::new(), 3, Smoothing::None, &[]).is_err());
        assert!(CharLm::<f64>::train(["ab"], 1, Smoothing::None, &[]).is_err());
        assert!(CharLm::<f64>::train(["ab"], 9, Smoothing::None, &[]).is_err());
    }

    #[test]
    fn hand_probabilities() {
        let lm = abac();
        assert!((lm.cond_prob("a", 'b').unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lm.cond_prob("$", 'a').unwrap(), 1.0);
        assert_eq!(lm.cond_prob("c", 'a').unwrap(), 0.0);
        assert!((lm.word_prob("ab").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lm.word_prob("ba").unwrap(), 0.0);
        assert_eq!(lm.substring_prob("a").unwrap(), 0.5);
        assert!(lm.cond_prob("a", 'z').is_err());
        assert!(lm.word_prob("").is_err());
    }

    #[test]
    fn longer_contexts_trim_to_order() {
        let lm = abac();
        assert_eq!(lm.cond_prob("cca", 'b').unwrap(), lm.cond_prob("a", 'b').unwrap());
    }

    #[test]
    fn order_independent_training() {
        let words = ["dato", "datum", "anno", "in", "et", "dominus", "domini", "anno"];
        let a = CharLm::<f64>::train(words, 4, Smoothing::None, &[]).unwrap();
        let mut shuffled: Vec<&str> = words.iter().chain(words.iter()).copied().collect();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let doubled_sorted: Vec<&str> = words.iter().chain(words.iter()).copied().collect();
        let b = CharLm::<f64>::train(shuffled, 4, Smoothing::None, &[]).unwrap();
        let c = CharLm::<f64>::train(doubled_sorted, 4, Smoothing::None, &[]).unwrap();
        assert_eq!(b, c);
        for ctx in a.contexts() {
            assert_eq!(a.context_total(&ctx) * 2, b.context_total(&ctx));
        }
    }

    #[test]
    fn conditionals_sum_to_one_under_mle() {
        let lm = CharLm::<f64>::train(["dato", "datum", "anno", "in", "et", "dominus"], 3, Smoothing::None, &[]).unwrap();
        let mut symbols: Vec<char> = lm.vocabulary().iter().copied().collect();
        symbols.push(WORD_END);
        for ctx in lm.contexts() {
            let total: f64 = symbols.iter().map(|&s| lm.cond_prob(&ctx, s).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{ctx:?}: {total}");
        }
    }

    #[test]
    fn backoff_scores_unseen_events() {
        let lm = CharLm::<f64>::train(["dato", "datum"], 3, Smoothing::default(), &['x']).unwrap();
        let p = lm.word_prob("xd").unwrap();
        assert!(p > 0.0 && p < 1.0);
        // Seen trigram keeps its MLE value.
        assert!((lm.cond_prob("da", 't').unwrap() - 1.0).abs() < 1e-12);
        // Unseen symbol after a seen context: alpha times the shorter estimate.
        let shorter = lm.cond_prob("a", 'x').unwrap();
        assert!((lm.cond_prob("da", 'x').unwrap() - 0.4 * shorter).abs() < 1e-12);
    }

    #[test]
    fn substring_monotone_under_extension() {
        let lm = CharLm::<f64>::train(["dato", "datum", "anno", "in", "et", "dominus", "terra"], 4, Smoothing::default(), &[]).unwrap();
        let symbols: Vec<char> = lm.vocabulary().iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let base: String = (0..rng.gen_range(1..5)).map(|_| *symbols.choose(&mut rng).unwrap()).collect();
            let ext: String = (0..rng.gen_range(1..4)).map(|_| *symbols.choose(&mut rng).unwrap()).collect();
            let a = lm.log_substring_prob(&base).unwrap();
            let b = lm.log_substring_prob(&(base.clone() + &ext)).unwrap();
            assert!(b <= a);
        }
    }

    #[test]
    fn text_round_trip() {
        let lm = abac();
        let back = CharLm::<f64>::from_text(&lm.to_text()).unwrap();
        let mut symbols: Vec<char> = lm.vocabulary().iter().copied().collect();
        symbols.push(WORD_END);
        for ctx in ["", "$", "a", "b", "c"] {
            for &s in &symbols {
                assert_eq!(lm.cond_prob(ctx, s).unwrap(), back.cond_prob(ctx, s).unwrap());
            }
        }
        let smoothed = CharLm::<f64>::train(["ab"], 3, Smoothing::StupidBackoff { alpha: 0.25 }, &['z']).unwrap();
        assert_eq!(CharLm::<f64>::from_text(&smoothed.to_text()).unwrap(), smoothed);
    }

    #[test]
    fn corrupt_models_are_rejected() {
        let text = abac().to_text();
        assert!(CharLm::<f64>::from_text("").is_err());
        assert!(CharLm::<f64>::from_text("charlm v1 q=2 smoothing=none rows=0 vocab=\n").is_err());
        assert!(CharLm::<f64>::from_text(&text.replace("charlm v1", "charlm v2")).is_err());
        assert!(CharLm::<f64>::from_text(&text.replace("rows=", "rows=1")).is_err());
        assert!(CharLm::<f64>::from_text(&text.replace("rows=", "rows=x")).is_err());
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(CharLm::<f64>::from_text(&truncated).is_err());
    }

    #[test]
    fn tokenizer_folds_classical_orthography() {
        let allowed: BTreeSet<char> = "abcdefghilmnopqrstux".chars().collect();
        let (tokens, dropped) = tokenize("Iulius, Vir; jam 12 ZEPHYRUS!", Some(&allowed));
        assert_eq!(tokens, vec!["iulius", "uir", "iam", "ephrus"]);
        assert_eq!(dropped, 2);
    }

    #[test]
    fn reduced_order_view() {
        let lm = CharLm::<f64>::train(["dato", "datum"], 6, Smoothing::None, &[]).unwrap();
        let low = lm.with_order(2).unwrap();
        assert_eq!(low.cond_prob("dat", 'o').unwrap(), lm.cond_prob("t", 'o').unwrap());
        assert!(lm.with_order(7).is_err());
        let f: CharLm<f32> = CharLm::train(["dato"], 3, Smoothing::None, &[]).unwrap();
        assert_eq!(f.word_prob("dato").unwrap(), 1.0);
    }
}
