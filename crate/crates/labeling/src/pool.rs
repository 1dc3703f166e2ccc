//! Segment pool, labeling tasks, exemplars and the majority rule.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use htr_core::classifier::{
    normalize_sample, write_manifest, LabeledSample, ManifestRecord, Origin, SymbolAlphabet, NON_CHARACTER,
};
use htr_core::synth::GlyphSet;
use htr_core::BinaryImage;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Images per task grid.
pub const GRID_SIZE: usize = 40;
pub const DEFAULT_QUORUM: u32 = 3;
pub const DEFAULT_MARGIN: u32 = 2;
const NEGATIVE_EXEMPLARS: usize = 3;
const EXEMPLAR_PREFIX: &str = "exemplar-";

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with(EXEMPLAR_PREFIX)
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolItem {
    pub id: String,
    pub image: BinaryImage,
    /// Votes per symbol name.
    pub tallies: BTreeMap<String, u32>,
    /// Number of task grids the item was shown in.
    pub appearances: u32,
    pub label: Option<String>,
}

impl PoolItem {
    pub fn votes(&self) -> u32 {
        self.tallies.values().sum()
    }

    pub fn is_finalized(&self) -> bool {
        self.label.is_some()
    }
}

/// Unlabeled segment images with stable ids.
#[derive(Debug, Clone, Default)]
pub struct SegmentPool {
    items: Vec<PoolItem>,
    index: HashMap<String, usize>,
}

impl SegmentPool {
    /// Ids must be unique and made of ASCII letters, digits, `_`, `-` or `.`.
    pub fn new(images: Vec<(String, BinaryImage)>) -> Result<Self> {
        let mut pool = Self::default();
        for (id, image) in images {
            if !valid_id(&id) {
                return Err(Error::Invalid(format!("bad pool id {id:?}")));
            }
            if !image.has_ink() {
                return Err(Error::Invalid(format!("pool item {id:?} has no ink")));
            }
            if pool.index.insert(id.clone(), pool.items.len()).is_some() {
                return Err(Error::Invalid(format!("duplicate pool id {id:?}")));
            }
            pool.items.push(PoolItem { id, image, tallies: BTreeMap::new(), appearances: 0, label: None });
        }
        Ok(pool)
    }

    /// Loads every PNG below `dir`. The id of a file is its path relative to
    /// `dir` without extension, with separators replaced by `.`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut files = Vec::new();
        collect_pngs(dir, &mut files)?;
        files.sort();
        let mut images = Vec::with_capacity(files.len());
        for path in files {
            let rel = path.strip_prefix(dir).unwrap_or(&path).with_extension("");
            let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join(".");
            let image = BinaryImage::load(&path)?;
            if !image.has_ink() {
                log::warn!("skipping blank pool image {}", path.display());
                continue;
            }
            images.push((id, image));
        }
        Self::new(images)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[PoolItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&PoolItem> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    fn get_mut(&mut self, id: &str) -> Option<&mut PoolItem> {
        self.index.get(id).map(|&i| &mut self.items[i])
    }

    pub fn pending(&self) -> usize {
        self.items.iter().filter(|i| !i.is_finalized()).count()
    }

    pub fn finalized(&self) -> usize {
        self.len() - self.pending()
    }

    pub fn total_votes(&self) -> u64 {
        self.items.iter().map(|i| i.votes() as u64).sum()
    }

    /// Draws up to [`GRID_SIZE`] unfinalized items without replacement,
    /// uniformly among those with the fewest appearances.
    pub fn sample_grid<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<String>> {
        let mut open: Vec<&PoolItem> = self.items.iter().filter(|i| !i.is_finalized()).collect();
        if open.is_empty() {
            return Err(Error::PoolExhausted);
        }
        open.shuffle(rng);
        open.sort_by_key(|i| i.appearances);
        Ok(open.into_iter().take(GRID_SIZE).map(|i| i.id.clone()).collect())
    }

    pub(crate) fn record_appearances(&mut self, grid: &[String]) {
        for id in grid {
            if let Some(item) = self.get_mut(id) {
                item.appearances += 1;
            }
        }
    }

    /// One vote for `symbol` on each selected item. All ids are checked first.
    pub fn record_votes(&mut self, symbol: &str, selected: &[String]) -> Result<()> {
        let missing: Vec<String> = selected.iter().filter(|id| self.get(id).is_none()).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::UnknownItems(missing));
        }
        for id in selected {
            let item = self.get_mut(id).expect("checked above");
            *item.tallies.entry(symbol.to_string()).or_insert(0) += 1;
        }
        Ok(())
    }

    /// Applies [`decide`] to every pending item; returns the newly labeled `(id, label)` pairs.
    pub fn finalize(&mut self, quorum: u32, margin: u32) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for item in self.items.iter_mut().filter(|i| !i.is_finalized()) {
            if let Decision::Label(label) = decide(&item.tallies, quorum, margin) {
                item.label = Some(label.clone());
                out.push((item.id.clone(), label));
            }
        }
        out
    }

    pub(crate) fn restore(&mut self, id: &str, tallies: BTreeMap<String, u32>, appearances: u32, label: Option<String>) -> bool {
        match self.get_mut(id) {
            Some(item) => {
                item.tallies = tallies;
                item.appearances = appearances;
                item.label = label;
                true
            }
            None => false,
        }
    }
}

fn collect_pngs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_pngs(&path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Pending,
    /// A symbol name, `⊗` when no clear majority emerged.
    Label(String),
}

/// Majority rule. Items with fewer than `quorum` votes stay pending; otherwise
/// the most voted symbol wins if it leads the runner-up by at least `margin`,
/// else the item becomes `⊗`. Count ties go to the smaller symbol name.
pub fn decide(tallies: &BTreeMap<String, u32>, quorum: u32, margin: u32) -> Decision {
    let total: u32 = tallies.values().sum();
    if total < quorum.max(1) {
        return Decision::Pending;
    }
    let mut ranked: Vec<(&String, u32)> = tallies.iter().map(|(s, &n)| (s, n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let top = ranked[0];
    let runner_up = ranked.get(1).map_or(0, |r| r.1);
    if top.1 - runner_up >= margin {
        Decision::Label(top.0.clone())
    } else {
        Decision::Label(NON_CHARACTER.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingTask {
    pub task_id: String,
    pub target_symbol: String,
    /// Exemplar image ids showing the symbol.
    pub positives: Vec<String>,
    /// Exemplar image ids of look-alike symbols.
    pub negatives: Vec<String>,
    /// Pool item ids.
    pub grid: Vec<String>,
    /// Unix time, milliseconds.
    pub issued_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteSubmission {
    pub task_id: String,
    pub worker_id: String,
    pub selected: Vec<String>,
}

/// Reference images per symbol, normalized to the classifier input size.
#[derive(Debug, Clone)]
pub struct Exemplars {
    alphabet: SymbolAlphabet,
    images: Vec<Option<BinaryImage>>,
    negatives: Vec<Vec<usize>>,
}

impl Exemplars {
    /// Each symbol uses the glyph of the same name; the negatives of a symbol
    /// are the other glyphs closest to it in Hamming distance.
    pub fn from_glyphs(alphabet: SymbolAlphabet, glyphs: &GlyphSet) -> Result<Self> {
        let images = alphabet
            .symbols()
            .iter()
            .map(|s| glyphs.get(&s.name).map(normalize_sample).transpose())
            .collect::<htr_core::Result<Vec<_>>>()?;
        let distance = |a: &BinaryImage, b: &BinaryImage| a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count();
        let negatives = (0..images.len())
            .map(|i| {
                let Some(me) = &images[i] else { return Vec::new() };
                let mut others: Vec<(usize, usize)> = images
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .filter_map(|(j, img)| img.as_ref().map(|img| (distance(me, img), j)))
                    .collect();
                others.sort_unstable();
                others.into_iter().take(NEGATIVE_EXEMPLARS).map(|(_, j)| j).collect()
            })
            .collect();
        Ok(Self { alphabet, images, negatives })
    }

    /// Default alphabet with the built-in templates.
    pub fn builtin() -> Self {
        Self::from_glyphs(SymbolAlphabet::default(), &GlyphSet::builtin()).expect("built-in glyphs normalize")
    }

    pub fn alphabet(&self) -> &SymbolAlphabet {
        &self.alphabet
    }

    pub fn image_id(index: usize) -> String {
        format!("{EXEMPLAR_PREFIX}{index}")
    }

    /// Image behind an id produced by [`image_id`](Self::image_id).
    pub fn image(&self, id: &str) -> Option<&BinaryImage> {
        let index: usize = id.strip_prefix(EXEMPLAR_PREFIX)?.parse().ok()?;
        self.images.get(index)?.as_ref()
    }

    pub fn has_exemplar(&self, index: usize) -> bool {
        self.images.get(index).is_some_and(Option::is_some)
    }

    pub fn positives(&self, symbol: &str) -> Result<Vec<String>> {
        let index = self.alphabet.require(symbol)?;
        if !self.has_exemplar(index) {
            return Err(Error::NoExemplars(symbol.to_string()));
        }
        Ok(vec![Self::image_id(index)])
    }

    pub fn negatives(&self, symbol: &str) -> Result<Vec<String>> {
        let index = self.alphabet.require(symbol)?;
        Ok(self.negatives[index].iter().map(|&j| Self::image_id(j)).collect())
    }
}

/// Builds a task for `symbol` over the pool. Appearances are counted when the
/// task is recorded by the store.
pub fn create_task<R: Rng + ?Sized>(
    pool: &SegmentPool,
    symbol: &str,
    exemplars: &Exemplars,
    task_id: String,
    issued_at: u64,
    rng: &mut R,
) -> Result<LabelingTask> {
    let positives = exemplars.positives(symbol)?;
    let negatives = exemplars.negatives(symbol)?;
    let grid = pool.sample_grid(rng)?;
    Ok(LabelingTask { task_id, target_symbol: symbol.to_string(), positives, negatives, grid, issued_at })
}

/// Training samples for the finalized items, normalized, `⊗` included.
pub fn finalized_samples(pool: &SegmentPool, alphabet: &SymbolAlphabet) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for item in pool.items() {
        if let Some(label) = &item.label {
            let image = normalize_sample(&item.image)?;
            out.push(LabeledSample::new(image, alphabet.require(label)?, Origin::Crowd, alphabet)?);
        }
    }
    Ok(out)
}

/// Runs [`SegmentPool::finalize`] and returns the newly labeled items as samples.
pub fn finalize_labels(pool: &mut SegmentPool, quorum: u32, margin: u32, alphabet: &SymbolAlphabet) -> Result<Vec<LabeledSample>> {
    let fresh = pool.finalize(quorum, margin);
    let mut out = Vec::with_capacity(fresh.len());
    for (id, label) in fresh {
        let image = normalize_sample(&pool.get(&id).expect("finalized id").image)?;
        out.push(LabeledSample::new(image, alphabet.require(&label)?, Origin::Crowd, alphabet)?);
    }
    Ok(out)
}

/// Writes `manifest.jsonl` plus normalized copies under `images/` in `dir`.
pub fn export_manifest(pool: &SegmentPool, alphabet: &SymbolAlphabet, dir: &Path) -> Result<PathBuf> {
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir)?;
    let mut records = Vec::new();
    for item in pool.items() {
        let Some(label) = &item.label else { continue };
        alphabet.require(label)?;
        let rel = PathBuf::from("images").join(format!("{}.png", item.id));
        normalize_sample(&item.image)?.save_png(&dir.join(&rel))?;
        records.push(ManifestRecord { path: rel, label: label.clone(), origin: Origin::Crowd });
    }
    if records.is_empty() {
        return Err(Error::NothingFinalized);
    }
    let path = dir.join("manifest.jsonl");
    write_manifest(&mut BufWriter::new(File::create(&path)?), &records)?;
    Ok(path)
}
