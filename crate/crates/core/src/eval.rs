//! Metrics over transcription results and the parameter-sweep harness.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classifier::CharacterClassifier;
use crate::error::{Error, Result};
use crate::imaging::WordImage;
use crate::lattice::LatticeParams;
use crate::pipeline::{Transcriber, WordResult};
use crate::scalar::Scalar;

pub use crate::synth::{synth_generate, SyntheticSet};

/// Default per-word budget during sweeps.
pub const SWEEP_TIMEOUT: Duration = Duration::from_secs(120);

/// `word_id -> exact transcription`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth(BTreeMap<String, String>);

impl GroundTruth {
    pub fn new(entries: BTreeMap<String, String>) -> Result<Self> {
        if let Some((id, _)) = entries.iter().find(|(_, t)| t.is_empty()) {
            return Err(Error::InvalidArgument(format!("empty transcription for {id:?}")));
        }
        Ok(Self(entries))
    }

    pub fn get(&self, word_id: &str) -> Option<&str> {
        self.0.get(word_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    /// Parses `word_id<TAB>transcription` lines; blank lines are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("truth line {}: expected word_id<TAB>transcription", n + 1)))?;
            if entries.insert(id.to_string(), t.trim_end_matches('\r').to_string()).is_some() {
                return Err(Error::Format(format!("truth line {}: duplicate id {id:?}", n + 1)));
            }
        }
        Self::new(entries)
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        Self::parse_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> Result<()> {
        for (id, t) in &self.0 {
            writeln!(out, "{id}\t{t}")?;
        }
        Ok(())
    }
}

impl From<&SyntheticSet> for GroundTruth {
    fn from(set: &SyntheticSet) -> Self {
        Self(set.truth())
    }
}

/// Edit distance with unit insert, delete and substitute costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 / rank` of the exact truth in the result list, 0 when absent.
pub fn reciprocal_rank(result: &WordResult, truth: &str) -> f64 {
    result.rank_of(truth).map_or(0.0, |r| 1.0 / r as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub words: usize,
    pub mrr: f64,
    pub mwpt_ms: f64,
    /// Fraction of words whose truth is ranked within the top `m`.
    pub m_precision: BTreeMap<usize, f64>,
    /// Edit distance between the top-1 transcription and the truth; an
    /// untranscribed word counts at the length of its truth.
    pub ed_histogram: BTreeMap<usize, f64>,
    /// Rank of the truth, `-1` when it was not generated.
    pub rank_histogram: BTreeMap<i64, f64>,
}

impl EvalReport {
    /// Rows of `metric,key,value` for plotting.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "metric,key,value")?;
        writeln!(out, "words,,{}", self.words)?;
        writeln!(out, "mrr,,{}", self.mrr)?;
        writeln!(out, "mwpt_ms,,{}", self.mwpt_ms)?;
        for (m, v) in &self.m_precision {
            writeln!(out, "m_precision,{m},{v}")?;
        }
        for (d, v) in &self.ed_histogram {
            writeln!(out, "ed_histogram,{d},{v}")?;
        }
        for (r, v) in &self.rank_histogram {
            writeln!(out, "rank_histogram,{r},{v}")?;
        }
        Ok(())
    }
}

/// Aggregates per-word results against the truth. Timing comes from each
/// result's `elapsed_ms`.
pub fn compute_report(results: &[WordResult], truth: &GroundTruth, m_values: &[usize]) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to evaluate".into()));
    }
    let n = results.len() as f64;
    let mut rr = 0.0;
    let mut ms = 0.0;
    let mut ranks: BTreeMap<i64, usize> = BTreeMap::new();
    let mut eds: BTreeMap<usize, usize> = BTreeMap::new();
    let mut found = Vec::with_capacity(results.len());
    for r in results {
        let t = truth.get(&r.word_id).ok_or_else(|| Error::MissingTruth(r.word_id.clone()))?;
        rr += reciprocal_rank(r, t);
        ms += r.elapsed_ms;
        let rank = r.rank_of(t);
        found.push(rank);
        *ranks.entry(rank.map_or(-1, |k| k as i64)).or_default() += 1;
        *eds.entry(levenshtein(r.top().unwrap_or(""), t)).or_default() += 1;
    }
    let frac = |c: usize| c as f64 / n;
    let m_precision = m_values
        .iter()
        .map(|&m| (m, frac(found.iter().filter(|k| k.is_some_and(|k| k <= m)).count())))
        .collect();
    Ok(EvalReport {
        words: results.len(),
        mrr: rr / n,
        mwpt_ms: ms / n,
        m_precision,
        ed_histogram: eds.into_iter().map(|(k, c)| (k, frac(c))).collect(),
        rank_histogram: ranks.into_iter().map(|(k, c)| (k, frac(c))).collect(),
    })
}

/// Parameter axes of a sweep; an absent axis stays at its base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub eta: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub beta: Vec<f64>,
    pub q: Vec<usize>,
}

/// One grid point: lattice parameters plus the language-model order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub beta: f64,
    pub q: usize,
}

impl SweepGrid {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Cartesian product of the axes, eta varying slowest.
    pub fn points(&self, base: &LatticeParams, base_q: usize) -> Vec<SweepPoint> {
        let axis = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let qs = if self.q.is_empty() { vec![base_q] } else { self.q.clone() };
        let mut out = Vec::new();
        for &eta in &axis(&self.eta, base.eta) {
            for &theta1 in &axis(&self.theta1, base.theta1) {
                for &theta2 in &axis(&self.theta2, base.theta2) {
                    for &beta in &axis(&self.beta, base.beta) {
                        for &q in &qs {
                            out.push(SweepPoint { eta, theta1, theta2, beta, q });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub report: EvalReport,
    /// Words abandoned at the time budget.
    pub timed_out: usize,
    pub total_edges: usize,
    pub total_expansions: u64,
}

/// Runs the transcriber at every grid point. Points run one after another
/// so that per-word timings do not compete for cores.
pub fn sweep<S: Scalar, C: CharacterClassifier<S>>(
    base: &Transcriber<S, C>,
    grid: &SweepGrid,
    words: &[WordImage],
    truth: &GroundTruth,
    m_values: &[usize],
    timeout: Duration,
) -> Result<Vec<SweepRow>> {
    let settings = *base.settings();
    let mut rows = Vec::new();
    for point in grid.points(&settings.lattice, base.lm().order()) {
        let lattice = LatticeParams { eta: point.eta, theta1: point.theta1, theta2: point.theta2, beta: point.beta, ..settings.lattice };
        let t = base
            .with_settings(crate::pipeline::Settings { lattice, word_timeout: Some(timeout), ..settings })?
            .with_lm(base.lm().with_order(point.q)?);
        let results = t.transcribe_words(words)?;
        log::info!("sweep point {point:?} done");
        rows.push(SweepRow {
            point,
            report: compute_report(&results, truth, m_values)?,
            timed_out: results.iter().filter(|r| r.timed_out).count(),
            total_edges: results.iter().map(|r| r.edges).sum(),
            total_expansions: results.iter().map(|r| r.expansions).sum(),
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "eta,theta1,theta2,beta,q,mrr,mwpt_ms,precision_1,timed_out,edges,expansions")?;
    for r in rows {
        let p = &r.point;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.eta,
            p.theta1,
            p.theta2,
            p.beta,
            p.q,
            r.report.mrr,
            r.report.mwpt_ms,
            r.report.m_precision.get(&1).copied().unwrap_or(f64::NAN),
            r.timed_out,
            r.total_edges,
            r.total_expansions
        )?;
    }
    Ok(())
}
