//! Transcription lattice over segment centroids and candidate generation.
//!
//! Vertex 0 is the origin at x = 0; every other vertex stands for one
//! distinct segment centroid. An edge `i -> j` represents the group of
//! segments whose vertices lie in `i+1..=j` and carries the labels the
//! classifier proposed for that group.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{CharacterClassifier, ClassDistribution, SymbolAlphabet};
use crate::error::{Error, Result};
use crate::imaging::WordImage;
use crate::langmodel::CharLm;
use crate::scalar::Scalar;
use crate::segmentation::{group_image, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeParams {
    /// Largest centroid distance an edge may span, in pixels.
    pub sigma: f64,
    /// Groups with non-character probability at or above this are skipped.
    pub eta: f64,
    /// Cumulative probability the selected labels should reach.
    pub theta1: f64,
    /// Smallest probability a selected label may have.
    pub theta2: f64,
    /// Prefixes whose substring probability falls below this are pruned.
    pub beta: f64,
    /// Number of candidates kept after ranking.
    pub m: usize,
    pub avg_char_px: f64,
    pub min_len_ratio: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self { sigma: 25.0, eta: 0.1, theta1: 0.8, theta2: 0.1, beta: 1e-16, m: 10, avg_char_px: 19.0, min_len_ratio: 0.9 }
    }
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("invalid lattice parameter: {what}")));
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.eta >= 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in [0, 1]");
        }
        if !(self.theta2 > 0.0 && self.theta2 <= self.theta1 && self.theta1 <= 1.0) {
            return bad("need 0 < theta2 <= theta1 <= 1");
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in [0, 1]");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if !(self.avg_char_px > 0.0 && self.min_len_ratio >= 0.0) {
            return bad("length filter constants must be positive");
        }
        Ok(())
    }
}

/// Largest number of labels an edge may carry.
pub const MAX_LABELS: usize = 3;

/// Outcome of the label heuristic for one group.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSelection<S = f64> {
    /// Class indices with their probabilities, most probable first.
    Labels(Vec<(usize, S)>),
    Drop,
}

/// Picks the most probable classes until they reach `theta1` using only
/// classes at or above `theta2`; drops the group if the non-character class
/// is picked or nothing qualifies.
pub fn select_labels<S: Scalar>(dist: &ClassDistribution<S>, non_character: usize, theta1: f64, theta2: f64) -> LabelSelection<S> {
    let theta1 = S::of(theta1);
    let theta2 = S::of(theta2);
    let mut taken = Vec::new();
    let mut mass = S::zero();
    for idx in dist.ranked() {
        let p = dist.prob(idx);
        if p < theta2 {
            break;
        }
        taken.push((idx, p));
        mass = mass + p;
        if mass >= theta1 {
            break;
        }
    }
    if taken.is_empty() || taken.iter().any(|&(i, _)| i == non_character) {
        return LabelSelection::Drop;
    }
    taken.truncate(MAX_LABELS);
    LabelSelection::Labels(taken)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label<S = f64> {
    /// Alphabet index of the symbol.
    pub symbol: usize,
    /// Text the symbol contributes to a transcription.
    pub ch: char,
    pub prob: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge<S = f64> {
    pub from: usize,
    pub to: usize,
    pub labels: Vec<Label<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice<S = f64> {
    /// Vertex x positions; index 0 is the origin.
    vertices: Vec<usize>,
    edges: Vec<Edge<S>>,
    /// Outgoing edge indices per vertex.
    #[serde(skip)]
    outgoing: Vec<Vec<usize>>,
}

impl<S: Scalar> Lattice<S> {
    /// Checks the structural invariants and indexes outgoing edges.
    pub fn from_parts(vertices: Vec<usize>, edges: Vec<Edge<S>>) -> Result<Self> {
        if vertices.first() != Some(&0) {
            return Err(Error::InvalidArgument("origin vertex must sit at x = 0".into()));
        }
        if vertices.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("vertices must be ordered by x".into()));
        }
        let mut outgoing = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            if e.from >= e.to || e.to >= vertices.len() {
                return Err(Error::InvalidArgument(format!("edge {}->{} does not go forward", e.from, e.to)));
            }
            if e.labels.is_empty() {
                return Err(Error::InvalidArgument(format!("edge {}->{} has no labels", e.from, e.to)));
            }
            outgoing[e.from].push(i);
        }
        Ok(Self { vertices, edges, outgoing })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn outgoing(&self, vertex: usize) -> &[usize] {
        &self.outgoing[vertex]
    }

    /// True for vertices without outgoing edges.
    pub fn is_sink(&self, vertex: usize) -> bool {
        self.outgoing[vertex].is_empty()
    }

    pub fn span(&self, edge: &Edge<S>) -> usize {
        self.vertices[edge.to] - self.vertices[edge.from]
    }

    /// Number of distinct origin-to-sink paths with parallel labels counted separately.
    pub fn path_count(&self) -> u128 {
        let n = self.vertices.len();
        let mut count = vec![0u128; n];
        for v in (0..n).rev() {
            count[v] = if self.is_sink(v) {
                1
            } else {
                self.outgoing[v]
                    .iter()
                    .map(|&e| count[self.edges[e].to].saturating_mul(self.edges[e].labels.len() as u128))
                    .fold(0u128, |a, b| a.saturating_add(b))
            };
        }
        if self.is_sink(0) {
            0
        } else {
            count[0]
        }
    }
}

/// Segments grouped by distinct centroid, in centroid order.
pub fn vertex_groups(segments: &[Segment]) -> Vec<(usize, Vec<&Segment>)> {
    let mut sorted: Vec<&Segment> = segments.iter().collect();
    sorted.sort_by_key(|s| (s.centroid_x, s.left));
    let mut groups: Vec<(usize, Vec<&Segment>)> = Vec::new();
    for s in sorted {
        match groups.last_mut() {
            Some((c, members)) if *c == s.centroid_x => members.push(s),
            _ => groups.push((s.centroid_x, vec![s])),
        }
    }
    groups
}

/// Builds the lattice of a word from its segments.
pub fn build_lattice<S: Scalar, C: CharacterClassifier<S> + ?Sized>(
    word: &WordImage,
    segments: &[Segment],
    classifier: &C,
    params: &LatticeParams,
) -> Result<Lattice<S>> {
    params.validate()?;
    if segments.is_empty() {
        return Err(Error::InvalidArgument("word has no segments".into()));
    }
    let alphabet = classifier.alphabet();
    let groups = vertex_groups(segments);
    let mut vertices = vec![0];
    vertices.extend(groups.iter().map(|g| g.0));
    let mut edges = Vec::new();
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if (vertices[j] - vertices[i]) as f64 > params.sigma {
                break;
            }
            let members: Vec<Segment> = groups[i..j].iter().flat_map(|g| g.1.iter().map(|s| (*s).clone())).collect();
            let image = group_image(word, &members)?;
            let dist = classifier.classify(&image)?;
            if dist.len() != alphabet.len() {
                return Err(Error::InvalidDistribution(format!("classifier returned {} classes for an alphabet of {}", dist.len(), alphabet.len())));
            }
            if dist.prob(alphabet.non_character()) >= S::of(params.eta) {
                continue;
            }
            if let LabelSelection::Labels(selected) = select_labels(&dist, alphabet.non_character(), params.theta1, params.theta2) {
                let labels = merge_labels(alphabet, &selected);
                if !labels.is_empty() {
                    edges.push(Edge { from: i, to: j, labels });
                }
            }
        }
    }
    Lattice::from_parts(vertices, edges)
}

/// Converts class indices into text labels, merging symbols that share a character.
fn merge_labels<S: Scalar>(alphabet: &SymbolAlphabet, selected: &[(usize, S)]) -> Vec<Label<S>> {
    let mut labels: Vec<Label<S>> = Vec::new();
    for &(symbol, prob) in selected {
        let Some(ch) = alphabet.symbol(symbol).text else { continue };
        match labels.iter_mut().find(|l| l.ch == ch) {
            Some(l) => l.prob = l.prob + prob,
            None => labels.push(Label { symbol, ch, prob }),
        }
    }
    labels
}

/// One step of a lattice path: an edge and the label taken on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub edge: usize,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<S = f64> {
    pub text: String,
    pub log_word_prob: S,
    pub path: Vec<PathStep>,
}

/// Result of a possibly interrupted enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration<S = f64> {
    pub candidates: Vec<Candidate<S>>,
    /// False when the deadline stopped the search early.
    pub complete: bool,
    /// Number of prefixes extended during the search.
    pub expansions: u64,
}

/// All origin-to-sink paths whose every prefix keeps substring probability
/// at or above `beta`, scored by word probability.
pub fn enumerate_candidates<S: Scalar>(lat: &Lattice<S>, lm: &CharLm<S>, params: &LatticeParams) -> Result<Vec<Candidate<S>>> {
    Ok(enumerate_until(lat, lm, params, None)?.candidates)
}

/// Like [`enumerate_candidates`] but stops once `deadline` has passed.
pub fn enumerate_until<S: Scalar>(lat: &Lattice<S>, lm: &CharLm<S>, params: &LatticeParams, deadline: Option<Instant>) -> Result<Enumeration<S>> {
    let mut search = Search {
        lat,
        lm,
        log_beta: S::of(params.beta).ln(),
        deadline,
        text: Vec::new(),
        path: Vec::new(),
        out: Vec::new(),
        expansions: 0,
        stopped: false,
    };
    if !lat.is_sink(0) {
        search.descend(0, S::zero())?;
    }
    Ok(Enumeration { candidates: search.out, complete: !search.stopped, expansions: search.expansions })
}

struct Search<'a, S: Scalar> {
    lat: &'a Lattice<S>,
    lm: &'a CharLm<S>,
    log_beta: S,
    deadline: Option<Instant>,
    text: Vec<char>,
    path: Vec<PathStep>,
    out: Vec<Candidate<S>>,
    expansions: u64,
    stopped: bool,
}

impl<S: Scalar> Search<'_, S> {
    fn descend(&mut self, vertex: usize, log_sub: S) -> Result<()> {
        if self.lat.is_sink(vertex) {
            let text: String = self.text.iter().collect();
            let log_word_prob = self.lm.log_word_prob(&text)?;
            self.out.push(Candidate { text, log_word_prob, path: self.path.clone() });
            return Ok(());
        }
        for &e in self.lat.outgoing(vertex) {
            let edge = &self.lat.edges[e];
            for (l, label) in edge.labels.iter().enumerate() {
                if self.stopped {
                    return Ok(());
                }
                if self.expansions % 1024 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
                    self.stopped = true;
                    return Ok(());
                }
                self.expansions += 1;
                let step = self.lm.log_extend_substring(&self.text, label.ch)?;
                let next = log_sub + step;
                if next < self.log_beta {
                    continue;
                }
                self.text.push(label.ch);
                self.path.push(PathStep { edge: e, label: l });
                self.descend(edge.to, next)?;
                self.text.pop();
                self.path.pop();
            }
        }
        Ok(())
    }
}

/// Keeps candidates whose expected pixel length reaches the required share of the word width.
pub fn length_filter<S: Scalar>(cands: Vec<Candidate<S>>, word_width: usize, params: &LatticeParams) -> Result<Vec<Candidate<S>>> {
    if word_width == 0 {
        return Err(Error::InvalidArgument("word width must be positive".into()));
    }
    let needed = params.min_len_ratio * word_width as f64;
    Ok(cands.into_iter().filter(|c| params.avg_char_px * c.text.chars().count() as f64 >= needed).collect())
}

/// Sorts by descending score with ties in text order, keeps the best entry
/// per text and truncates to `m`.
pub fn rank_candidates<S: Scalar>(mut cands: Vec<Candidate<S>>, m: usize) -> Vec<Candidate<S>> {
    cands.sort_by(|a, b| b.log_word_prob.partial_cmp(&a.log_word_prob).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.text.cmp(&b.text)));
    let mut seen = std::collections::HashSet::new();
    cands.retain(|c| seen.insert(c.text.clone()));
    cands.truncate(m);
    cands
}
