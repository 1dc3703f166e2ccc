//! Word and page transcription: segmentation, lattice, enumeration,
//! filtering, ranking and counterpart decoding, with per-word timing.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{CharacterClassifier, LogisticClassifier};
use crate::decoding::{decode, CounterpartSets, DEFAULT_VARIANT_CAP};
use crate::error::{Error, Result};
use crate::imaging::{extract_words, PreprocessParams, WordImage, DEFAULT_WORD_GAP};
use crate::langmodel::CharLm;
use crate::lattice::{build_lattice, enumerate_until, length_filter, rank_candidates, LatticeParams};
use crate::raster::GrayImage;
use crate::scalar::Scalar;
use crate::segmentation::{segment, SegmentationMethod};

fn default_word_gap() -> usize {
    DEFAULT_WORD_GAP
}

fn default_parallelism() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_variant_cap() -> usize {
    DEFAULT_VARIANT_CAP
}

/// On-disk pipeline configuration. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub lattice: LatticeParams,
    pub lm: PathBuf,
    pub classifier: PathBuf,
    /// Counterpart groups; the built-in pairs when absent.
    #[serde(default)]
    pub counterparts: Option<PathBuf>,
    #[serde(default)]
    pub segmentation: SegmentationMethod,
    #[serde(default = "default_word_gap")]
    pub word_gap: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Query the language model at this order instead of the trained one.
    #[serde(default)]
    pub lm_order: Option<usize>,
    #[serde(default = "default_true")]
    pub decode: bool,
    #[serde(default = "default_variant_cap")]
    pub variant_cap: usize,
    #[serde(default)]
    pub deskew: bool,
    #[serde(default)]
    pub deslant: bool,
    /// Per-word time budget; a word that exceeds it yields no transcription.
    #[serde(default)]
    pub word_timeout_ms: Option<u64>,
}

impl PipelineConfig {
    pub fn new(lm: impl Into<PathBuf>, classifier: impl Into<PathBuf>) -> Self {
        Self {
            lattice: LatticeParams::default(),
            lm: lm.into(),
            classifier: classifier.into(),
            counterparts: None,
            segmentation: SegmentationMethod::default(),
            word_gap: DEFAULT_WORD_GAP,
            parallelism: 1,
            lm_order: None,
            decode: true,
            variant_cap: DEFAULT_VARIANT_CAP,
            deskew: false,
            deslant: false,
            word_timeout_ms: None,
        }
    }

    /// Reads and validates a config, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            fix(&mut cfg.lm);
            fix(&mut cfg.classifier);
            if let Some(c) = cfg.counterparts.as_mut() {
                fix(c);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if self.parallelism == 0 {
            return Err(Error::InvalidArgument("parallelism must be at least 1".into()));
        }
        if self.word_gap == 0 {
            return Err(Error::InvalidArgument("word gap must be at least 1".into()));
        }
        if self.variant_cap == 0 {
            return Err(Error::InvalidArgument("variant cap must be at least 1".into()));
        }
        for p in [Some(&self.lm), Some(&self.classifier), self.counterparts.as_ref()].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::InvalidArgument(format!("no such file {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn preprocess(&self) -> PreprocessParams {
        PreprocessParams { word_gap: self.word_gap, deskew: self.deskew, deslant: self.deslant, ..PreprocessParams::default() }
    }

    pub fn settings(&self) -> Settings {
        Settings {
            lattice: self.lattice,
            segmentation: self.segmentation,
            parallelism: self.parallelism,
            decode: self.decode,
            variant_cap: self.variant_cap,
            word_timeout: self.word_timeout_ms.map(Duration::from_millis),
        }
    }

    /// Loads the models named by the config.
    pub fn load_transcriber<S: Scalar>(&self) -> Result<Transcriber<S, LogisticClassifier<S>>> {
        self.validate()?;
        let mut lm = CharLm::load(&self.lm)?;
        if let Some(q) = self.lm_order {
            lm = lm.with_order(q)?;
        }
        let classifier = LogisticClassifier::load(&self.classifier)?;
        let counterparts = match &self.counterparts {
            Some(p) => CounterpartSets::load(p)?,
            None => CounterpartSets::default(),
        };
        Transcriber::new(classifier, lm, counterparts, self.settings())
    }
}

/// Runtime knobs of a [`Transcriber`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub lattice: LatticeParams,
    pub segmentation: SegmentationMethod,
    pub parallelism: usize,
    pub decode: bool,
    pub variant_cap: usize,
    pub word_timeout: Option<Duration>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            lattice: LatticeParams::default(),
            segmentation: SegmentationMethod::default(),
            parallelism: 1,
            decode: true,
            variant_cap: DEFAULT_VARIANT_CAP,
            word_timeout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcription {
    pub text: String,
    /// Natural log of the word probability.
    pub score: f64,
    #[serde(default)]
    pub decoded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordResult {
    pub word_id: String,
    pub page_id: String,
    pub line_index: usize,
    pub word_index: usize,
    /// Best first, at most `m` entries.
    pub transcriptions: Vec<Transcription>,
    pub untranscribed: bool,
    #[serde(default)]
    pub timed_out: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: f64,
    /// Lattice edges kept after the non-character filter.
    #[serde(default)]
    pub edges: usize,
    /// Prefix extensions performed by the path search.
    #[serde(default)]
    pub expansions: u64,
}

impl WordResult {
    fn empty(word: &WordImage) -> Self {
        Self {
            word_id: word.id(),
            page_id: word.page_id.clone(),
            line_index: word.line_index,
            word_index: word.word_index,
            transcriptions: Vec::new(),
            untranscribed: true,
            timed_out: false,
            error: None,
            elapsed_ms: 0.0,
            edges: 0,
            expansions: 0,
        }
    }

    pub fn top(&self) -> Option<&str> {
        self.transcriptions.first().map(|t| t.text.as_str())
    }

    /// 1-based position of `text` in the list.
    pub fn rank_of(&self, text: &str) -> Option<usize> {
        self.transcriptions.iter().position(|t| t.text == text).map(|i| i + 1)
    }
}

/// Loaded models plus settings; shared read-only across worker threads.
pub struct Transcriber<S: Scalar = f64, C = LogisticClassifier<S>> {
    classifier: Arc<C>,
    lm: CharLm<S>,
    counterparts: Arc<CounterpartSets>,
    settings: Settings,
}

impl<S: Scalar, C> Clone for Transcriber<S, C> {
    fn clone(&self) -> Self {
        Self {
            classifier: Arc::clone(&self.classifier),
            lm: self.lm.clone(),
            counterparts: Arc::clone(&self.counterparts),
            settings: self.settings,
        }
    }
}

impl<S: Scalar, C: CharacterClassifier<S>> Transcriber<S, C> {
    pub fn new(classifier: C, lm: CharLm<S>, counterparts: CounterpartSets, settings: Settings) -> Result<Self> {
        settings.lattice.validate()?;
        if settings.parallelism == 0 || settings.variant_cap == 0 {
            return Err(Error::InvalidArgument("parallelism and variant cap must be positive".into()));
        }
        Ok(Self { classifier: Arc::new(classifier), lm, counterparts: Arc::new(counterparts), settings })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn lm(&self) -> &CharLm<S> {
        &self.lm
    }

    pub fn classifier(&self) -> &C {
        &self.classifier
    }

    /// Same models, different settings.
    pub fn with_settings(&self, settings: Settings) -> Result<Self> {
        settings.lattice.validate()?;
        Ok(Self { settings, ..self.clone() })
    }

    /// Same classifier and counterparts, different language model.
    pub fn with_lm(&self, lm: CharLm<S>) -> Self {
        Self { lm, ..self.clone() }
    }

    /// Transcribes one word. Failures are reported in the result, never raised.
    pub fn transcribe_word(&self, word: &WordImage) -> WordResult {
        let start = Instant::now();
        let mut result = WordResult::empty(word);
        if let Err(e) = self.run(word, start, &mut result) {
            log::warn!("word {} failed: {e}", result.word_id);
            result.transcriptions.clear();
            result.error = Some(e.to_string());
        }
        result.untranscribed = result.transcriptions.is_empty();
        result.elapsed_ms = start.elapsed().as_secs_f64() * 1000.0;
        result
    }

    fn run(&self, word: &WordImage, start: Instant, out: &mut WordResult) -> Result<()> {
        let params = &self.settings.lattice;
        let segments = segment(word, self.settings.segmentation);
        let lattice = build_lattice(word, &segments, &*self.classifier, params)?;
        out.edges = lattice.edges().len();
        let deadline = self.settings.word_timeout.map(|t| start + t);
        let found = enumerate_until(&lattice, &self.lm, params, deadline)?;
        out.expansions = found.expansions;
        if !found.complete {
            out.timed_out = true;
            return Ok(());
        }
        let ranked = rank_candidates(length_filter(found.candidates, word.width(), params)?, params.m);
        out.transcriptions = if self.settings.decode {
            decode(&ranked, &self.lm, &self.counterparts, params.m, self.settings.variant_cap)?
                .transcriptions
                .into_iter()
                .map(|d| Transcription { text: d.text, score: d.log_word_prob.to_f64_lossy(), decoded: d.decoded })
                .collect()
        } else {
            ranked
                .into_iter()
                .map(|c| Transcription { text: c.text, score: c.log_word_prob.to_f64_lossy(), decoded: false })
                .collect()
        };
        Ok(())
    }

    /// Transcribes independent words on up to `parallelism` threads; output
    /// follows reading order whatever the scheduling.
    pub fn transcribe_words(&self, words: &[WordImage]) -> Result<Vec<WordResult>> {
        let mut results: Vec<WordResult> = if self.settings.parallelism == 1 {
            words.iter().map(|w| self.transcribe_word(w)).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.settings.parallelism)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| words.par_iter().map(|w| self.transcribe_word(w)).collect())
        };
        results.sort_by(|a, b| (&a.page_id, a.line_index, a.word_index).cmp(&(&b.page_id, b.line_index, b.word_index)));
        Ok(results)
    }

    /// Preprocesses a page and transcribes every word found on it.
    pub fn transcribe_page(&self, page: &GrayImage, page_id: &str, preprocess: &PreprocessParams) -> Result<Vec<WordResult>> {
        let words = extract_words(page, page_id, preprocess)?;
        log::info!("page {page_id}: {} words", words.len());
        self.transcribe_words(&words)
    }
}

pub fn write_jsonl<W: Write>(out: &mut W, results: &[WordResult]) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<WordResult>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
