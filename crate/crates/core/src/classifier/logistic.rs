//! Multinomial logistic regression over raw 56x56 pixels.
//!
//! Model file layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "HTRLOGR1"
//! classes      u32      number of alphabet symbols n
//! n times:     u32 name length, UTF-8 name bytes, u32 text code point (0 = none)
//! features     u32      f, always 3136
//! weights      n * (f + 1) f64, row-major, one row per class, bias last
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::sample::{normalize_sample, LabeledSample, SAMPLE_SIDE};
use super::{CharacterClassifier, ClassDistribution, Symbol, SymbolAlphabet};
use crate::error::{Error, Result};
use crate::raster::BinaryImage;
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 8] = b"HTRLOGR1";
const FEATURES: usize = SAMPLE_SIDE * SAMPLE_SIDE;

/// Trained softmax-regression classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticClassifier<S = f64> {
    alphabet: SymbolAlphabet,
    /// `classes x (FEATURES + 1)`, bias in the last column.
    weights: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 penalty applied to the touched weights each step.
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { epochs: 12, learning_rate: 0.05, batch_size: 32, l2: 1e-5 }
    }
}

fn ink_indices(img: &BinaryImage) -> Vec<usize> {
    img.bits().iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

impl<S: Scalar> LogisticClassifier<S> {
    pub fn zeros(alphabet: SymbolAlphabet) -> Self {
        let weights = vec![S::zero(); alphabet.len() * (FEATURES + 1)];
        Self { alphabet, weights }
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    fn row(&self, class: usize) -> &[S] {
        &self.weights[class * (FEATURES + 1)..(class + 1) * (FEATURES + 1)]
    }

    fn logits(&self, ink: &[usize]) -> Vec<S> {
        (0..self.alphabet.len())
            .map(|c| {
                let row = self.row(c);
                ink.iter().fold(row[FEATURES], |acc, &i| acc + row[i])
            })
            .collect()
    }

    /// Class distribution of an already normalized 56x56 image.
    pub fn classify_normalized(&self, img: &BinaryImage) -> ClassDistribution<S> {
        ClassDistribution::softmax(&self.logits(&ink_indices(img)))
    }

    /// Fraction of samples whose argmax class equals the label.
    pub fn accuracy(&self, samples: &[LabeledSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let hits = samples.iter().filter(|s| self.classify_normalized(&s.image).argmax() == s.label).count();
        hits as f64 / samples.len() as f64
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&(self.alphabet.len() as u32).to_le_bytes())?;
        for s in self.alphabet.symbols() {
            out.write_all(&(s.name.len() as u32).to_le_bytes())?;
            out.write_all(s.name.as_bytes())?;
            out.write_all(&s.text.map_or(0, |c| c as u32).to_le_bytes())?;
        }
        out.write_all(&(FEATURES as u32).to_le_bytes())?;
        for w in &self.weights {
            out.write_all(&w.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(input, &mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format("not a logistic classifier model".into()));
        }
        let n = read_u32(input)? as usize;
        if n == 0 || n > 4096 {
            return Err(Error::Format(format!("implausible class count {n}")));
        }
        let mut symbols = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u32(input)? as usize;
            if len > 1024 {
                return Err(Error::Format(format!("implausible symbol name length {len}")));
            }
            let mut name = vec![0u8; len];
            read_exact(input, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("symbol name is not UTF-8".into()))?;
            let code = read_u32(input)?;
            let text = if code == 0 { None } else { Some(char::from_u32(code).ok_or_else(|| Error::Format("bad code point".into()))?) };
            symbols.push(Symbol { name, text });
        }
        let alphabet = SymbolAlphabet::new(symbols).map_err(|e| Error::Format(e.to_string()))?;
        let features = read_u32(input)? as usize;
        if features != FEATURES {
            return Err(Error::Format(format!("expected {FEATURES} features, found {features}")));
        }
        let mut weights = Vec::with_capacity(n * (FEATURES + 1));
        let mut buf = [0u8; 8];
        for _ in 0..n * (FEATURES + 1) {
            read_exact(input, &mut buf)?;
            weights.push(S::of(f64::from_le_bytes(buf)));
        }
        Ok(Self { alphabet, weights })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated model file".into()),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

impl<S: Scalar> CharacterClassifier<S> for LogisticClassifier<S> {
    fn alphabet(&self) -> &SymbolAlphabet {
        &self.alphabet
    }

    fn classify(&self, image: &BinaryImage) -> Result<ClassDistribution<S>> {
        Ok(self.classify_normalized(&normalize_sample(image)?))
    }
}

/// Trains the reference classifier by mini-batch gradient descent on the
/// softmax cross-entropy. Deterministic for a given `rng` state.
pub fn train_reference<S: Scalar, R: Rng + ?Sized>(
    samples: &[LabeledSample],
    alphabet: &SymbolAlphabet,
    params: &TrainParams,
    rng: &mut R,
) -> Result<LogisticClassifier<S>> {
    let mut present = vec![false; alphabet.len()];
    for s in samples {
        if s.image.width() != SAMPLE_SIDE || s.image.height() != SAMPLE_SIDE {
            return Err(Error::InvalidDimensions { width: s.image.width(), height: s.image.height() });
        }
        *present.get_mut(s.label).ok_or_else(|| Error::InvalidArgument(format!("label {} outside alphabet", s.label)))? = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::InvalidArgument("training needs at least two classes".into()));
    }
    if params.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let classes = alphabet.len();
    let inks: Vec<Vec<usize>> = samples.iter().map(|s| ink_indices(&s.image)).collect();
    let mut model = LogisticClassifier::<S>::zeros(alphabet.clone());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let stride = FEATURES + 1;
    let mut grad = vec![S::zero(); classes * stride];
    let mut touched = vec![false; FEATURES];
    let mut touched_list: Vec<usize> = Vec::new();
    for epoch in 0..params.epochs {
        order.shuffle(rng);
        // Step size decays gently over epochs.
        let lr = S::of(params.learning_rate / (1.0 + 0.1 * epoch as f64));
        let l2 = S::of(params.l2);
        for batch in order.chunks(params.batch_size) {
            let scale = lr / S::of_count(batch.len() as u64);
            for &i in batch {
                let ink = &inks[i];
                let probs = ClassDistribution::softmax(&model.logits(ink));
                for c in 0..classes {
                    let mut g = probs.prob(c);
                    if c == samples[i].label {
                        g = g - S::one();
                    }
                    let row = &mut grad[c * stride..(c + 1) * stride];
                    for &f in ink {
                        row[f] = row[f] + g;
                    }
                    row[FEATURES] = row[FEATURES] + g;
                }
                for &f in ink {
                    if !touched[f] {
                        touched[f] = true;
                        touched_list.push(f);
                    }
                }
            }
            for c in 0..classes {
                let base = c * stride;
                for &f in touched_list.iter().chain(std::iter::once(&FEATURES)) {
                    let w = &mut model.weights[base + f];
                    *w = *w - scale * grad[base + f] - lr * l2 * *w;
                    grad[base + f] = S::zero();
                }
            }
            for &f in &touched_list {
                touched[f] = false;
            }
            touched_list.clear();
        }
    }
    Ok(model)
}
