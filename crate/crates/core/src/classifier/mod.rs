//! Character classification contract, symbol alphabet and reference models.
//!
//! Any model that maps a group image to a [`ClassDistribution`] over the
//! alphabet plugs into the lattice through [`CharacterClassifier`].

mod logistic;
mod sample;
mod table;

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::BinaryImage;
use crate::scalar::Scalar;

pub use logistic::{train_reference, LogisticClassifier, TrainParams, MODEL_MAGIC};
pub use sample::{
    augment, augment_with, balance_training_set, normalize_sample, read_manifest, write_manifest, AffineJitter,
    LabeledSample, ManifestRecord, Origin, SAMPLE_SIDE,
};
pub use table::TableClassifier;

/// Name of the non-character class.
pub const NON_CHARACTER: &str = "⊗";

/// Symbols of the default alphabet, in model order (the non-character class is appended).
pub const DEFAULT_SYMBOLS: [&str; 22] = [
    "a", "b", "c", "d", "d-tall", "e", "f", "g", "h", "i", "l", "m", "n", "o", "p", "q", "r", "s", "s-long", "t",
    "u", "x",
];

/// One classifier class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    /// Character written in transcriptions; `None` for the non-character class.
    pub text: Option<char>,
}

/// Ordered set of classifier classes with exactly one non-character entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolAlphabet {
    symbols: Vec<Symbol>,
    non_character: usize,
}

fn default_text(name: &str) -> Option<char> {
    if name == NON_CHARACTER || name == "nonchar" {
        return None;
    }
    name.chars().next()
}

impl SymbolAlphabet {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &symbols {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate symbol {:?}", s.name)));
            }
        }
        let nonchars: Vec<usize> = symbols.iter().enumerate().filter(|(_, s)| s.text.is_none()).map(|(i, _)| i).collect();
        if nonchars.len() != 1 {
            return Err(Error::InvalidArgument(format!("alphabet needs exactly one non-character class, found {}", nonchars.len())));
        }
        Ok(Self { symbols, non_character: nonchars[0] })
    }

    /// Builds an alphabet from names; the text of each symbol is its first character.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let symbols = names
            .into_iter()
            .map(|n| {
                let name = if n.as_ref() == "nonchar" { NON_CHARACTER.to_string() } else { n.as_ref().to_string() };
                let text = default_text(&name);
                Symbol { name, text }
            })
            .collect();
        Self::new(symbols)
    }

    /// Parses one symbol per line: `name` or `name<TAB>text-char`.
    ///
    /// The non-character class is written `⊗` or `nonchar`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut symbols = Vec::new();
        for line in text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let mut parts = line.split('\t');
            let raw = parts.next().unwrap_or_default().trim();
            let name = if raw == "nonchar" { NON_CHARACTER.to_string() } else { raw.to_string() };
            let text = match parts.next() {
                Some(t) => {
                    let mut chars = t.trim().chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => Some(c),
                        _ => return Err(Error::InvalidArgument(format!("bad text mapping in line {line:?}"))),
                    }
                }
                None => default_text(&name),
            };
            symbols.push(Symbol { name, text });
        }
        Self::new(symbols)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> &Symbol {
        &self.symbols[index]
    }

    pub fn non_character(&self) -> usize {
        self.non_character
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let name = if name == "nonchar" { NON_CHARACTER } else { name };
        self.symbols.iter().position(|s| s.name == name)
    }

    /// Like [`index_of`](Self::index_of) but failing with [`Error::UnknownSymbol`].
    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    /// Distinct transcription characters, sorted.
    pub fn text_chars(&self) -> Vec<char> {
        let mut chars: Vec<char> = self.symbols.iter().filter_map(|s| s.text).collect();
        chars.sort_unstable();
        chars.dedup();
        chars
    }

    /// Indices of the classes written with the given character.
    pub fn indices_for_char(&self, c: char) -> Vec<usize> {
        self.symbols.iter().enumerate().filter(|(_, s)| s.text == Some(c)).map(|(i, _)| i).collect()
    }
}

impl Default for SymbolAlphabet {
    /// Latin minuscules with tall `d` and long `s` variants, plus `⊗`.
    fn default() -> Self {
        Self::from_names(DEFAULT_SYMBOLS.iter().copied().chain([NON_CHARACTER])).expect("default alphabet is valid")
    }
}

/// Probability vector over an alphabet, in alphabet order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution<S = f64> {
    probs: Vec<S>,
}

impl<S: Scalar> ClassDistribution<S> {
    /// Validates non-negativity, the upper bound and the unit total.
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= S::zero() && **p <= S::one())) {
            return Err(Error::InvalidDistribution(format!("probability {p} outside [0, 1]")));
        }
        let total: S = probs.iter().copied().sum();
        if (total - S::one()).abs() > S::simplex_tolerance() {
            return Err(Error::InvalidDistribution(format!("total {total} differs from 1")));
        }
        Ok(Self { probs })
    }

    /// Named entries; the leftover mass is spread evenly over unnamed classes.
    pub fn with_remainder(alphabet: &SymbolAlphabet, entries: &[(&str, f64)]) -> Result<Self> {
        let mut probs = vec![S::zero(); alphabet.len()];
        let mut named = vec![false; alphabet.len()];
        for &(name, p) in entries {
            let idx = alphabet.require(name)?;
            probs[idx] = S::of(p);
            named[idx] = true;
        }
        let rest = named.iter().filter(|n| !**n).count();
        let used: f64 = entries.iter().map(|e| e.1).sum();
        if rest > 0 {
            let share = S::of((1.0 - used).max(0.0) / rest as f64);
            for (p, n) in probs.iter_mut().zip(&named) {
                if !n {
                    *p = share;
                }
            }
        }
        Self::new(probs)
    }

    /// All mass on one class.
    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut probs = vec![S::zero(); len];
        probs[index] = S::one();
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Self { probs: vec![S::one() / S::of_count(len as u64); len] }
    }

    /// Softmax of raw scores.
    pub fn softmax(logits: &[S]) -> Self {
        let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
        let exps: Vec<S> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: S = exps.iter().copied().sum();
        Self { probs: exps.into_iter().map(|e| e / total).collect() }
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> S {
        self.probs[index]
    }

    /// Index of the most probable class (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Class indices by descending probability, ties by index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].partial_cmp(&self.probs[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        idx
    }

    /// True when the vector is on the probability simplex.
    pub fn is_valid(&self) -> bool {
        Self::new(self.probs.clone()).is_ok()
    }
}

/// A character classifier: group image in, class distribution out.
///
/// Implementations must be deterministic for a fixed model state.
pub trait CharacterClassifier<S: Scalar = f64>: Send + Sync {
    fn alphabet(&self) -> &SymbolAlphabet;

    fn classify(&self, image: &BinaryImage) -> Result<ClassDistribution<S>>;
}

impl<S: Scalar, C: CharacterClassifier<S> + ?Sized> CharacterClassifier<S> for Box<C> {
    fn alphabet(&self) -> &SymbolAlphabet {
        (**self).alphabet()
    }

    fn classify(&self, image: &BinaryImage) -> Result<ClassDistribution<S>> {
        (**self).classify(image)
    }
}

impl<S: Scalar, C: CharacterClassifier<S> + ?Sized> CharacterClassifier<S> for std::sync::Arc<C> {
    fn alphabet(&self) -> &SymbolAlphabet {
        (**self).alphabet()
    }

    fn classify(&self, image: &BinaryImage) -> Result<ClassDistribution<S>> {
        (**self).classify(image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_alphabet_shape() {
        let a = SymbolAlphabet::default();
        assert_eq!(a.len(), 23);
        assert_eq!(a.symbol(a.non_character()).name, NON_CHARACTER);
        assert_eq!(a.symbol(a.require("d-tall").unwrap()).text, Some('d'));
        assert_eq!(a.symbol(a.require("s-long").unwrap()).text, Some('s'));
        assert_eq!(a.text_chars().len(), 20);
        assert_eq!(a.indices_for_char('d').len(), 2);
        assert_eq!(a.index_of("nonchar"), Some(22));
    }

    #[test]
    fn alphabet_validation() {
        assert!(SymbolAlphabet::from_names(["a", "b"]).is_err());
        assert!(SymbolAlphabet::from_names(["a", "a", "⊗"]).is_err());
        assert!(SymbolAlphabet::from_names(["a", "⊗", "nonchar"]).is_err());
        let parsed = SymbolAlphabet::parse("# comment\na\nlong-s\ts\nnonchar\n").unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed.symbol(1).text, Some('s'));
        assert!(parsed.require("z").is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(ClassDistribution::<f64>::new(vec![0.5, 0.5]).is_ok());
        assert!(ClassDistribution::<f64>::new(vec![0.5, 0.6]).is_err());
        assert!(ClassDistribution::<f64>::new(vec![1.5, -0.5]).is_err());
        assert!(ClassDistribution::<f64>::new(vec![]).is_err());
        assert!(ClassDistribution::<f32>::new(vec![0.3, 0.7]).is_ok());
    }

    #[test]
    fn softmax_is_on_simplex() {
        let d = ClassDistribution::<f64>::softmax(&[1.0, 2.0, -3.0, 700.0]);
        assert!(d.is_valid());
        assert_eq!(d.argmax(), 3);
        let f = ClassDistribution::<f32>::softmax(&[0.1, 0.2, 0.3]);
        assert!(f.is_valid());
    }

    #[test]
    fn remainder_is_spread() {
        let a = SymbolAlphabet::default();
        let d = ClassDistribution::<f64>::with_remainder(&a, &[("a", 0.8), ("o", 0.1), ("d", 0.05)]).unwrap();
        assert!(d.is_valid());
        assert_eq!(d.ranked()[..3], [a.require("a").unwrap(), a.require("o").unwrap(), a.require("d").unwrap()]);
    }
}
