//! Lookup-table classifier keyed by image digest, for deterministic tests.

use std::collections::HashMap;

use super::{CharacterClassifier, ClassDistribution, SymbolAlphabet};
use crate::error::{Error, Result};
use crate::raster::BinaryImage;
use crate::scalar::Scalar;

/// Returns a stored distribution for known images (by [`BinaryImage::fnv1a`])
/// and a fallback for everything else.
#[derive(Debug, Clone)]
pub struct TableClassifier<S = f64> {
    alphabet: SymbolAlphabet,
    table: HashMap<u64, ClassDistribution<S>>,
    fallback: ClassDistribution<S>,
}

impl<S: Scalar> TableClassifier<S> {
    pub fn new(alphabet: SymbolAlphabet, table: HashMap<u64, ClassDistribution<S>>, fallback: ClassDistribution<S>) -> Result<Self> {
        for d in table.values().chain(std::iter::once(&fallback)) {
            if d.len() != alphabet.len() {
                return Err(Error::InvalidDistribution(format!("{} entries for a {}-symbol alphabet", d.len(), alphabet.len())));
            }
            if !d.is_valid() {
                return Err(Error::InvalidDistribution("table entry is off the simplex".into()));
            }
        }
        Ok(Self { alphabet, table, fallback })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl<S: Scalar> CharacterClassifier<S> for TableClassifier<S> {
    fn alphabet(&self) -> &SymbolAlphabet {
        &self.alphabet
    }

    fn classify(&self, image: &BinaryImage) -> Result<ClassDistribution<S>> {
        Ok(self.table.get(&image.fnv1a()).unwrap_or(&self.fallback).clone())
    }
}
