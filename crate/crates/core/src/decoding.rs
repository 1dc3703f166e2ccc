//! Counterpart decoding: revise candidate transcriptions by swapping
//! symbols that the classifier tends to confuse.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langmodel::{CharLm, WORD_START};
use crate::lattice::Candidate;
use crate::scalar::Scalar;

pub const DEFAULT_VARIANT_CAP: usize = 4096;
pub const BRUTE_FORCE_BOUND: u128 = 1_000_000;

/// Groups of mutually confusable characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterpartSets {
    groups: Vec<Vec<char>>,
    index: HashMap<char, usize>,
}

impl CounterpartSets {
    /// Rejects overlapping groups and duplicate members.
    pub fn new(groups: Vec<Vec<char>>) -> Result<Self> {
        let mut index = HashMap::new();
        for (g, members) in groups.iter().enumerate() {
            for &c in members {
                if index.insert(c, g).is_some() {
                    return Err(Error::InvalidArgument(format!("symbol {c:?} belongs to more than one counterpart group")));
                }
            }
        }
        Ok(Self { groups, index })
    }

    pub fn groups(&self) -> &[Vec<char>] {
        &self.groups
    }

    /// Counterparts of `c` with `c` itself first.
    pub fn counterparts(&self, c: char) -> Vec<char> {
        match self.index.get(&c) {
            Some(&g) => std::iter::once(c).chain(self.groups[g].iter().copied().filter(|&o| o != c)).collect(),
            None => vec![c],
        }
    }

    /// Parses a JSON list of symbol arrays, e.g. `[["i","r"],["o","d"]]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<Vec<String>> = serde_json::from_str(text)?;
        let groups = raw
            .into_iter()
            .map(|g| {
                g.into_iter()
                    .map(|s| {
                        let mut it = s.chars();
                        match (it.next(), it.next()) {
                            (Some(c), None) => Ok(c),
                            _ => Err(Error::Format(format!("counterpart entry {s:?} is not a single character"))),
                        }
                    })
                    .collect::<Result<Vec<char>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(groups)
    }

    pub fn to_json(&self) -> String {
        let raw: Vec<Vec<String>> = self.groups.iter().map(|g| g.iter().map(|c| c.to_string()).collect()).collect();
        serde_json::to_string(&raw).expect("string lists serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Size of the full counterpart product of `t`.
    pub fn variant_count(&self, t: &str) -> u128 {
        t.chars().map(|c| self.counterparts(c).len() as u128).fold(1u128, |a, b| a.saturating_mul(b))
    }
}

impl Default for CounterpartSets {
    fn default() -> Self {
        Self::new(vec![vec!['i', 'r'], vec!['o', 'd'], vec!['n', 'm'], vec!['l', 'f'], vec!['c', 'e']]).expect("default groups are disjoint")
    }
}

/// Every string obtained by replacing each character of `t` with one of its
/// counterparts, `t` first.
pub fn counterpart_variants(t: &str, sets: &CounterpartSets) -> Vec<String> {
    let mut out = vec![String::new()];
    for c in t.chars() {
        let options = sets.counterparts(c);
        out = out.iter().flat_map(|prefix| options.iter().map(move |&o| format!("{prefix}{o}"))).collect();
    }
    out
}

/// Counterpart variants of `t`, at most `cap` of them. When the full
/// product is larger, a beam of width `cap` over prefix probabilities
/// keeps the most probable variants; `t` itself is always included.
pub fn counterpart_variants_capped<S: Scalar>(t: &str, sets: &CounterpartSets, cap: usize, lm: &CharLm<S>) -> Result<Vec<String>> {
    if t.is_empty() {
        return Err(Error::InvalidArgument("empty transcription".into()));
    }
    if sets.variant_count(t) <= cap as u128 {
        return Ok(counterpart_variants(t, sets));
    }
    let cap = cap.max(1);
    let mut beam: Vec<(Vec<char>, S)> = vec![(vec![WORD_START], S::zero())];
    for c in t.chars() {
        let mut next = Vec::with_capacity(beam.len() * 2);
        for (prefix, score) in &beam {
            for o in sets.counterparts(c) {
                let s = *score + lm.log_next(prefix, o)?;
                let mut p = prefix.clone();
                p.push(o);
                next.push((p, s));
            }
        }
        next.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
        next.truncate(cap);
        beam = next;
    }
    let mut out: Vec<String> = beam.into_iter().map(|(p, _)| p[1..].iter().collect()).collect();
    if !out.iter().any(|v| v == t) {
        out.pop();
        out.insert(0, t.to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded<S = f64> {
    pub text: String,
    pub log_word_prob: S,
    /// True when decoding produced a text absent from the input candidates.
    pub decoded: bool,
}

/// Decoding output: at most `m` texts, best first, no duplicates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecodedSet<S = f64> {
    pub transcriptions: Vec<Decoded<S>>,
}

/// Scores every counterpart variant of the given candidates and keeps the
/// `m` best distinct texts.
pub fn decode<S: Scalar>(top_m: &[Candidate<S>], lm: &CharLm<S>, sets: &CounterpartSets, m: usize, cap: usize) -> Result<DecodedSet<S>> {
    let mut best: HashMap<String, Decoded<S>> = HashMap::new();
    for cand in top_m {
        best.entry(cand.text.clone())
            .and_modify(|d| {
                if cand.log_word_prob > d.log_word_prob {
                    d.log_word_prob = cand.log_word_prob;
                }
                d.decoded = false;
            })
            .or_insert(Decoded { text: cand.text.clone(), log_word_prob: cand.log_word_prob, decoded: false });
    }
    for cand in top_m {
        for v in counterpart_variants_capped(&cand.text, sets, cap, lm)? {
            if best.contains_key(&v) {
                continue;
            }
            let log_word_prob = lm.log_word_prob(&v)?;
            best.insert(v.clone(), Decoded { text: v, log_word_prob, decoded: true });
        }
    }
    let mut transcriptions: Vec<Decoded<S>> = best.into_values().collect();
    transcriptions.sort_by(|a, b| b.log_word_prob.partial_cmp(&a.log_word_prob).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.text.cmp(&b.text)));
    transcriptions.truncate(m);
    Ok(DecodedSet { transcriptions })
}

/// Exhaustive maximizer of `P(h) * prod P(observed_i | h_i)` where each
/// hidden symbol emits any member of its counterpart group with
/// probability `1/k`. Ties go to the lexicographically smaller text.
pub fn brute_force_decode<S: Scalar>(observed: &str, lm: &CharLm<S>, sets: &CounterpartSets) -> Result<String> {
    if observed.is_empty() {
        return Err(Error::InvalidArgument("empty observation".into()));
    }
    let count = sets.variant_count(observed);
    if count > BRUTE_FORCE_BOUND {
        return Err(Error::VariantExplosion { count, bound: BRUTE_FORCE_BOUND });
    }
    let obs: Vec<char> = observed.chars().collect();
    let support: Vec<Vec<char>> = obs.iter().map(|&c| sets.counterparts(c)).collect();
    let mut best: Option<(S, String)> = None;
    let mut digits = vec![0usize; obs.len()];
    loop {
        let hidden: String = digits.iter().zip(&support).map(|(&d, s)| s[d]).collect();
        let mut score = lm.log_word_prob(&hidden)?;
        for (h, o) in hidden.chars().zip(&obs) {
            let group = sets.counterparts(h);
            let emission = if group.contains(o) { S::one() / S::of_count(group.len() as u64) } else { S::zero() };
            score = score + emission.ln();
        }
        let better = match &best {
            None => true,
            Some((s, t)) => score > *s || (score == *s && hidden < *t),
        };
        if better {
            best = Some((score, hidden));
        }
        let mut k = obs.len();
        loop {
            if k == 0 {
                return Ok(best.expect("at least one variant").1);
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < support[k].len() {
                break;
            }
            digits[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langmodel::Smoothing;
    use std::collections::BTreeSet;

    fn example_groups() -> CounterpartSets {
        CounterpartSets::new(vec![vec!['a', 'i'], vec!['c', 'o']]).unwrap()
    }

    fn set(v: Vec<String>) -> BTreeSet<String> {
        v.into_iter().collect()
    }

    #[test]
    fn variants_of_example_word() {
        let v = counterpart_variants("dito", &example_groups());
        assert_eq!(v[0], "dito");
        assert_eq!(set(v), set(vec!["dito".into(), "dato".into(), "ditc".into(), "datc".into()]));
    }

    #[test]
    fn variants_with_default_groups() {
        let nm = CounterpartSets::new(vec![vec!['n', 'm']]).unwrap();
        assert_eq!(set(counterpart_variants("anno", &nm)), set(vec!["anno".into(), "anmo".into(), "amno".into(), "ammo".into()]));
        // The full default groups also pair o with d.
        let s = CounterpartSets::default();
        assert_eq!(set(counterpart_variants("anno", &s)), set(vec!["anno".into(), "anmo".into(), "amno".into(), "ammo".into(), "annd".into(), "anmd".into(), "amnd".into(), "ammd".into()]));
        assert_eq!(counterpart_variants("uta", &s), vec!["uta"]);
    }

    #[test]
    fn variant_count_is_group_product() {
        let s = CounterpartSets::default();
        for w in ["dominus", "in", "terra", "ab", "filii"] {
            let n = counterpart_variants(w, &s).len() as u128;
            assert_eq!(n, s.variant_count(w));
            assert_eq!(set(counterpart_variants(w, &s)).len() as u128, n);
        }
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        assert!(CounterpartSets::new(vec![vec!['a', 'b'], vec!['b', 'c']]).is_err());
        assert!(CounterpartSets::from_json(r#"[["ab","c"]]"#).is_err());
        let s = CounterpartSets::default();
        assert_eq!(CounterpartSets::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn decoding_revises_to_likelier_word() {
        let lm = CharLm::<f64>::train(["dato", "dato", "datum", "dies"], 3, Smoothing::default(), &['c', 'o']).unwrap();
        let groups = example_groups();
        let cand = Candidate { text: "dito".to_string(), log_word_prob: lm.log_word_prob("dito").unwrap(), path: vec![] };
        let out = decode(&[cand], &lm, &groups, 10, DEFAULT_VARIANT_CAP).unwrap();
        assert_eq!(out.transcriptions[0].text, "dato");
        assert!(out.transcriptions[0].decoded);
        assert!(out.transcriptions.iter().any(|d| d.text == "dito" && !d.decoded));
        assert_eq!(brute_force_decode("dito", &lm, &groups).unwrap(), "dato");
    }

    #[test]
    fn capped_variants_keep_input_and_cap() {
        let lm = CharLm::<f64>::train(["dominum", "nomine", "omnium"], 3, Smoothing::default(), &['i', 'r', 'l', 'f', 'c', 'e']).unwrap();
        let s = CounterpartSets::default();
        let v = counterpart_variants_capped("nomminonm", &s, 16, &lm).unwrap();
        assert_eq!(v.len(), 16);
        assert!(v.contains(&"nomminonm".to_string()));
        assert_eq!(set(v.clone()).len(), 16);
    }

    #[test]
    fn brute_force_bounds() {
        let lm = CharLm::<f64>::train(["a"], 2, Smoothing::default(), &[]).unwrap();
        assert_eq!(brute_force_decode("a", &lm, &CounterpartSets::default()).unwrap(), "a");
        assert!(brute_force_decode("", &lm, &CounterpartSets::default()).is_err());
        let wide = CounterpartSets::new(vec![vec!['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'l']]).unwrap();
        let lm = CharLm::<f64>::train(["abcdefghil"], 2, Smoothing::default(), &[]).unwrap();
        assert!(matches!(brute_force_decode("aaaaaaa", &lm, &wide), Err(Error::VariantExplosion { .. })));
    }

    #[test]
    fn decode_of_empty_input_is_empty() {
        let lm = CharLm::<f64>::train(["a"], 2, Smoothing::default(), &[]).unwrap();
        assert!(decode(&[], &lm, &CounterpartSets::default(), 5, DEFAULT_VARIANT_CAP).unwrap().transcriptions.is_empty());
    }
}
