//! Shared labeling state with an append-only journal and periodic snapshots.
//!
//! Every accepted event is written to the journal before it is applied, so
//! replaying the journal (from the latest snapshot on) rebuilds the state.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, PoisonError};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use htr_core::BinaryImage;

use crate::error::{Error, Result};
use crate::pool::{create_task, export_manifest, Exemplars, LabelingTask, SegmentPool, VoteSubmission};

pub const DEFAULT_SNAPSHOT_EVERY: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Event {
    Task(LabelingTask),
    Votes(VoteSubmission),
    Finalize { quorum: u32, margin: u32 },
}

#[derive(Debug, Serialize, Deserialize)]
struct JournalEntry {
    seq: u64,
    #[serde(flatten)]
    event: Event,
}

#[derive(Debug, Serialize, Deserialize)]
struct ItemState {
    id: String,
    tallies: BTreeMap<String, u32>,
    appearances: u32,
    label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    next_task: u64,
    items: Vec<ItemState>,
    tasks: Vec<LabelingTask>,
    submitted: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    /// Journal file; the snapshot lives next to it with a `.snapshot` suffix.
    /// `None` keeps everything in memory.
    pub journal: Option<PathBuf>,
    pub seed: u64,
    pub snapshot_every: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self { journal: None, seed: 0, snapshot_every: DEFAULT_SNAPSHOT_EVERY }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStatus {
    pub total: usize,
    pub pending: usize,
    pub finalized: usize,
    pub tasks: usize,
    pub submissions: usize,
    pub votes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizeOutcome {
    /// Items labeled by this call, `(id, symbol)`.
    pub labeled: Vec<(String, String)>,
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolInfo {
    pub name: String,
    pub text: Option<char>,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

struct State {
    pool: SegmentPool,
    tasks: BTreeMap<String, LabelingTask>,
    submitted: HashSet<(String, String)>,
    next_task: u64,
    seq: u64,
    since_snapshot: usize,
    journal: Option<File>,
}

impl State {
    fn check(&self, event: &Event) -> Result<()> {
        match event {
            Event::Task(task) => {
                if self.tasks.contains_key(&task.task_id) {
                    return Err(Error::Invalid(format!("task {:?} exists", task.task_id)));
                }
                let missing: Vec<String> = task.grid.iter().filter(|id| self.pool.get(id).is_none()).cloned().collect();
                if !missing.is_empty() {
                    return Err(Error::UnknownItems(missing));
                }
            }
            Event::Votes(v) => {
                let task = self.tasks.get(&v.task_id).ok_or_else(|| Error::UnknownTask(v.task_id.clone()))?;
                if v.worker_id.trim().is_empty() {
                    return Err(Error::Invalid("empty worker id".into()));
                }
                let mut seen = HashSet::new();
                if let Some(dup) = v.selected.iter().find(|id| !seen.insert(id.as_str())) {
                    return Err(Error::Invalid(format!("item {dup:?} selected twice")));
                }
                let outside: Vec<String> = v.selected.iter().filter(|id| !task.grid.contains(id)).cloned().collect();
                if !outside.is_empty() {
                    return Err(Error::UnknownItems(outside));
                }
                if self.submitted.contains(&(v.task_id.clone(), v.worker_id.clone())) {
                    return Err(Error::DuplicateSubmission { task: v.task_id.clone(), worker: v.worker_id.clone() });
                }
            }
            Event::Finalize { .. } => {}
        }
        Ok(())
    }

    /// Must follow a successful [`check`](Self::check).
    fn apply(&mut self, event: Event) -> Vec<(String, String)> {
        match event {
            Event::Task(task) => {
                self.pool.record_appearances(&task.grid);
                if let Some(n) = task.task_id.strip_prefix('t').and_then(|n| n.parse::<u64>().ok()) {
                    self.next_task = self.next_task.max(n + 1);
                }
                self.tasks.insert(task.task_id.clone(), task);
                Vec::new()
            }
            Event::Votes(v) => {
                let symbol = self.tasks[&v.task_id].target_symbol.clone();
                self.pool.record_votes(&symbol, &v.selected).expect("grid ids are pool ids");
                self.submitted.insert((v.task_id, v.worker_id));
                Vec::new()
            }
            Event::Finalize { quorum, margin } => self.pool.finalize(quorum, margin),
        }
    }

    fn snapshot(&self) -> Snapshot {
        let mut submitted: Vec<(String, String)> = self.submitted.iter().cloned().collect();
        submitted.sort();
        Snapshot {
            seq: self.seq,
            next_task: self.next_task,
            items: self
                .pool
                .items()
                .iter()
                .map(|i| ItemState { id: i.id.clone(), tallies: i.tallies.clone(), appearances: i.appearances, label: i.label.clone() })
                .collect(),
            tasks: self.tasks.values().cloned().collect(),
            submitted,
        }
    }

    fn restore(&mut self, snap: Snapshot) -> Result<()> {
        for item in snap.items {
            if !self.pool.restore(&item.id, item.tallies, item.appearances, item.label) {
                return Err(Error::UnknownItems(vec![item.id]));
            }
        }
        self.tasks = snap.tasks.into_iter().map(|t| (t.task_id.clone(), t)).collect();
        self.submitted = snap.submitted.into_iter().collect();
        self.next_task = snap.next_task;
        self.seq = snap.seq;
        Ok(())
    }
}

/// Thread-safe labeling store. All mutations are serialized by one lock.
pub struct LabelStore {
    state: Mutex<State>,
    exemplars: Exemplars,
    seed: u64,
    snapshot_every: usize,
    snapshot_path: Option<PathBuf>,
}

fn snapshot_path(journal: &Path) -> PathBuf {
    let mut name = journal.file_name().unwrap_or_default().to_os_string();
    name.push(".snapshot");
    journal.with_file_name(name)
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl LabelStore {
    /// Opens the store, replaying the snapshot and journal when present.
    pub fn open(pool: SegmentPool, exemplars: Exemplars, config: StoreConfig) -> Result<Self> {
        let mut state = State {
            pool,
            tasks: BTreeMap::new(),
            submitted: HashSet::new(),
            next_task: 0,
            seq: 0,
            since_snapshot: 0,
            journal: None,
        };
        let snap_path = config.journal.as_deref().map(snapshot_path);
        if let Some(journal) = &config.journal {
            let snap = snap_path.as_deref().expect("set with journal");
            if snap.exists() {
                let snapshot: Snapshot = serde_json::from_reader(BufReader::new(File::open(snap)?))?;
                state.restore(snapshot)?;
            }
            if journal.exists() {
                replay(&mut state, journal)?;
            }
            state.journal = Some(OpenOptions::new().create(true).append(true).open(journal)?);
        }
        Ok(Self {
            state: Mutex::new(state),
            exemplars,
            seed: config.seed,
            snapshot_every: config.snapshot_every.max(1),
            snapshot_path: snap_path,
        })
    }

    pub fn in_memory(pool: SegmentPool, exemplars: Exemplars, seed: u64) -> Self {
        Self::open(pool, exemplars, StoreConfig { seed, ..StoreConfig::default() }).expect("no files involved")
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(PoisonError::into_inner)
    }

    fn commit(&self, state: &mut State, event: Event) -> Result<Vec<(String, String)>> {
        state.check(&event)?;
        if let Some(file) = state.journal.as_mut() {
            let entry = JournalEntry { seq: state.seq + 1, event: event.clone() };
            let mut line = serde_json::to_vec(&entry)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }
        state.seq += 1;
        let out = state.apply(event);
        state.since_snapshot += 1;
        if state.since_snapshot >= self.snapshot_every {
            self.write_snapshot(state)?;
        }
        Ok(out)
    }

    fn write_snapshot(&self, state: &mut State) -> Result<()> {
        let Some(path) = &self.snapshot_path else { return Ok(()) };
        let tmp = path.with_extension("tmp");
        {
            let mut out = std::io::BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer(&mut out, &state.snapshot())?;
            out.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        state.since_snapshot = 0;
        Ok(())
    }

    /// Forces a snapshot (no-op for in-memory stores).
    pub fn snapshot(&self) -> Result<()> {
        let mut state = self.lock();
        self.write_snapshot(&mut state)
    }

    pub fn exemplars(&self) -> &Exemplars {
        &self.exemplars
    }

    pub fn symbols(&self) -> Vec<SymbolInfo> {
        self.exemplars
            .alphabet()
            .symbols()
            .iter()
            .map(|s| SymbolInfo {
                name: s.name.clone(),
                text: s.text,
                positives: self.exemplars.positives(&s.name).unwrap_or_default(),
                negatives: self.exemplars.negatives(&s.name).unwrap_or_default(),
            })
            .collect()
    }

    /// The grid of task `n` is drawn from stream `n` of the seeded generator.
    pub fn create_task(&self, symbol: &str) -> Result<LabelingTask> {
        let mut state = self.lock();
        let n = state.next_task;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(n);
        let task = create_task(&state.pool, symbol, &self.exemplars, format!("t{n:06}"), now_ms(), &mut rng)?;
        self.commit(&mut state, Event::Task(task.clone()))?;
        Ok(task)
    }

    pub fn task(&self, id: &str) -> Option<LabelingTask> {
        self.lock().tasks.get(id).cloned()
    }

    /// Returns the number of votes cast.
    pub fn submit(&self, votes: VoteSubmission) -> Result<usize> {
        let n = votes.selected.len();
        let mut state = self.lock();
        self.commit(&mut state, Event::Votes(votes))?;
        Ok(n)
    }

    pub fn finalize(&self, quorum: u32, margin: u32) -> Result<FinalizeOutcome> {
        if quorum == 0 {
            return Err(Error::Invalid("quorum must be at least 1".into()));
        }
        let mut state = self.lock();
        let labeled = self.commit(&mut state, Event::Finalize { quorum, margin })?;
        Ok(FinalizeOutcome { labeled, pending: state.pool.pending() })
    }

    pub fn status(&self) -> PoolStatus {
        let state = self.lock();
        PoolStatus {
            total: state.pool.len(),
            pending: state.pool.pending(),
            finalized: state.pool.finalized(),
            tasks: state.tasks.len(),
            submissions: state.submitted.len(),
            votes: state.pool.total_votes(),
        }
    }

    /// Vote tallies of one pool item.
    pub fn tallies(&self, id: &str) -> Option<BTreeMap<String, u32>> {
        self.lock().pool.get(id).map(|i| i.tallies.clone())
    }

    pub fn label(&self, id: &str) -> Option<String> {
        self.lock().pool.get(id).and_then(|i| i.label.clone())
    }

    /// Writes the manifest and images into `dir`; returns the manifest path.
    pub fn export(&self, dir: &Path) -> Result<PathBuf> {
        let state = self.lock();
        export_manifest(&state.pool, self.exemplars.alphabet(), dir)
    }

    /// A pool item or exemplar image.
    pub fn image(&self, id: &str) -> Option<BinaryImage> {
        if let Some(img) = self.exemplars.image(id) {
            return Some(img.clone());
        }
        self.lock().pool.get(id).map(|i| i.image.clone())
    }
}

/// Applies journal entries newer than the restored snapshot. A torn final
/// line (crash mid-write) is cut off; any other bad line is an error.
fn replay(state: &mut State, path: &Path) -> Result<()> {
    let bad = |line: usize, reason: String| Error::Journal { path: path.to_path_buf(), line, reason };
    let reader = BufReader::new(File::open(path)?);
    let mut good_bytes = 0u64;
    let mut lines = reader.split(b'\n').enumerate().peekable();
    while let Some((i, raw)) = lines.next() {
        let raw = raw?;
        let is_last = lines.peek().is_none();
        if raw.iter().all(u8::is_ascii_whitespace) {
            good_bytes += raw.len() as u64 + 1;
            continue;
        }
        let entry: JournalEntry = match serde_json::from_slice(&raw) {
            Ok(e) => e,
            Err(e) if is_last => {
                log::warn!("dropping torn journal line {} in {}: {e}", i + 1, path.display());
                OpenOptions::new().write(true).open(path)?.set_len(good_bytes)?;
                break;
            }
            Err(e) => return Err(bad(i + 1, e.to_string())),
        };
        good_bytes += raw.len() as u64 + 1;
        if entry.seq <= state.seq {
            continue;
        }
        if entry.seq != state.seq + 1 {
            return Err(bad(i + 1, format!("sequence gap: expected {}, found {}", state.seq + 1, entry.seq)));
        }
        state.check(&entry.event).map_err(|e| bad(i + 1, e.to_string()))?;
        state.seq = entry.seq;
        state.apply(entry.event);
    }
    Ok(())
}
