use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use htr_core::classifier::{
    balance_training_set, read_manifest, train_reference, write_manifest, ManifestRecord, SymbolAlphabet, TrainParams,
};
use htr_core::eval::{compute_report, sweep, write_sweep_csv, GroundTruth, SweepGrid, SWEEP_TIMEOUT};
use htr_core::imaging::{extract_words, PreprocessParams, WordImage};
use htr_core::langmodel::{CharLm, Smoothing, DEFAULT_BACKOFF};
use htr_core::pipeline::{read_jsonl, write_jsonl, PipelineConfig, WordResult};
use htr_core::segmentation::{segment, SegmentationMethod};
use htr_core::synth::{synth_generate, training_set, GlyphSet, PageLayout, LATIN_CORPUS, LEXICON};
use htr_core::{BinaryImage, GrayImage};
use htr_labeling::{AppState, Exemplars, LabelStore, SegmentPool, StoreConfig};

#[derive(Parser)]
#[command(name = "htr", version, about = "Handwritten word transcription")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Binarize pages and cut them into word images.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = htr_core::imaging::DEFAULT_WORD_GAP)]
        gap: usize,
        #[arg(long)]
        no_deskew: bool,
        #[arg(long)]
        no_deslant: bool,
    },
    /// Segment word images; writes per-word JSON and segment masks.
    Segment {
        #[arg(long, value_enum, default_value_t = Method::Polygonal)]
        method: Method,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the logistic character classifier from a manifest.
    TrainClassifier {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        alphabet: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Train a character q-gram model from text files (built-in Latin text when no corpus is given).
    TrainLm {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        q: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alphabet: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SmoothingArg::Backoff)]
        smoothing: SmoothingArg,
    },
    /// Transcribe whole pages.
    Transcribe {
        #[arg(long, required = true)]
        page: Vec<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Transcribe one word image and print its result as JSON.
    TranscribeWord {
        #[arg(long)]
        word: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score results against a truth file; prints the report as JSON.
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        m: Vec<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate a parameter grid over a directory of word images.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        m: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render synthetic pages, word images and a truth file.
    Synth {
        #[arg(long)]
        glyphs: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a balanced synthetic classifier training manifest.
    SynthTraining {
        #[arg(long)]
        glyphs: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 400)]
        words: usize,
        #[arg(long, default_value_t = 1000)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the crowd-labeling HTTP service.
    ServeLabeling {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        glyphs: Option<PathBuf>,
        #[arg(long)]
        export: Option<PathBuf>,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Over,
    Polygonal,
}

impl From<Method> for SegmentationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Over => SegmentationMethod::Over,
            Method::Polygonal => SegmentationMethod::Polygonal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SmoothingArg {
    None,
    Backoff,
}

/// Command-line overrides of the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long)]
    theta2: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Language-model order used at query time.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    no_decode: bool,
    #[arg(long)]
    threads: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let l = &mut cfg.lattice;
        l.sigma = self.sigma.unwrap_or(l.sigma);
        l.eta = self.eta.unwrap_or(l.eta);
        l.theta1 = self.theta1.unwrap_or(l.theta1);
        l.theta2 = self.theta2.unwrap_or(l.theta2);
        l.beta = self.beta.unwrap_or(l.beta);
        l.m = self.m.unwrap_or(l.m);
        cfg.lm_order = self.q.or(cfg.lm_order);
        cfg.parallelism = self.threads.unwrap_or(cfg.parallelism);
        if self.no_decode {
            cfg.decode = false;
        }
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn pngs_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    out.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> Result<String> {
    Ok(path.file_stem().context("file has no name")?.to_string_lossy().into_owned())
}

/// Reads a word image, taking page, line and word from a `{page}_{line}_{word}` stem.
fn read_word(path: &Path) -> Result<WordImage> {
    let name = stem(path)?;
    let mut parts = name.rsplitn(3, '_');
    let (word, line, page) = (parts.next(), parts.next(), parts.next());
    let (page, line, word) = match (page, line.and_then(|l| l.parse().ok()), word.and_then(|w| w.parse().ok())) {
        (Some(p), Some(l), Some(w)) => (p.to_string(), l, w),
        _ => (name.clone(), 0, 0),
    };
    let img = BinaryImage::load(path)?;
    WordImage::from_uncropped(&img, page, line, word).with_context(|| format!("word image {}", path.display()))
}

fn load_alphabet(path: Option<&Path>) -> Result<SymbolAlphabet> {
    Ok(match path {
        Some(p) => SymbolAlphabet::load(p)?,
        None => SymbolAlphabet::default(),
    })
}

fn load_glyphs(path: Option<&Path>) -> Result<GlyphSet> {
    Ok(match path {
        Some(p) => GlyphSet::load_dir(p)?,
        None => GlyphSet::builtin(),
    })
}

fn load_lexicon(path: Option<&Path>) -> Result<Vec<String>> {
    match path {
        Some(p) => {
            let words: Vec<String> = fs::read_to_string(p)?.split_whitespace().map(str::to_string).collect();
            if words.is_empty() {
                bail!("lexicon {} is empty", p.display());
            }
            Ok(words)
        }
        None => Ok(LEXICON.iter().map(|w| w.to_string()).collect()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct SegmentView {
    id: usize,
    left: usize,
    right: usize,
    centroid_x: usize,
    mask: PathBuf,
}

#[derive(Serialize)]
struct SegmentedWord {
    word_id: String,
    width: usize,
    height: usize,
    method: SegmentationMethod,
    segments: Vec<SegmentView>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { input, out, gap, no_deskew, no_deslant } => {
            fs::create_dir_all(&out)?;
            let params = PreprocessParams { word_gap: gap, deskew: !no_deskew, deslant: !no_deslant, ..PreprocessParams::default() };
            let mut total = 0;
            for page in pngs_in(&input)? {
                let page_id = stem(&page)?;
                let words = extract_words(&GrayImage::load(&page)?, &page_id, &params)?;
                for w in &words {
                    w.image.save_png(&out.join(format!("{}.png", w.id())))?;
                }
                log::info!("{page_id}: {} words", words.len());
                total += words.len();
            }
            println!("{total} word images written to {}", out.display());
        }
        Command::Segment { method, input, out } => {
            let method = SegmentationMethod::from(method);
            fs::create_dir_all(&out)?;
            for path in pngs_in(&input)? {
                let word = read_word(&path)?;
                let name = stem(&path)?;
                let mask_dir = out.join("masks").join(&name);
                fs::create_dir_all(&mask_dir)?;
                let mut views = Vec::new();
                for s in segment(&word, method) {
                    let mask = BinaryImage::from_pixels(word.image.width(), word.image.height(), &s.pixels)?;
                    let mask = htr_core::imaging::crop_margins(&mask)?;
                    let rel = PathBuf::from("masks").join(&name).join(format!("{:03}.png", s.id));
                    mask.save_png(&out.join(&rel))?;
                    views.push(SegmentView { id: s.id, left: s.left, right: s.right, centroid_x: s.centroid_x, mask: rel });
                }
                let doc = SegmentedWord { word_id: word.id(), width: word.width(), height: word.image.height(), method, segments: views };
                write_json(&out.join(format!("{name}.json")), &doc)?;
            }
        }
        Command::TrainClassifier { manifest, out, target, seed, alphabet, epochs, lr } => {
            let alphabet = load_alphabet(alphabet.as_deref())?;
            let samples = read_manifest(&manifest, &alphabet).with_context(|| format!("reading {}", manifest.display()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let balanced = balance_training_set(&samples, &alphabet, target, &mut rng)?;
            let defaults = TrainParams::default();
            let params = TrainParams {
                epochs: epochs.unwrap_or(defaults.epochs),
                learning_rate: lr.unwrap_or(defaults.learning_rate),
                ..defaults
            };
            let clf = train_reference::<f64, _>(&balanced, &alphabet, &params, &mut rng)?;
            clf.save(&out)?;
            println!("{} samples, training accuracy {:.4}, model {}", balanced.len(), clf.accuracy(&balanced), out.display());
        }
        Command::TrainLm { corpus, q, out, alphabet, smoothing } => {
            let alphabet = load_alphabet(alphabet.as_deref())?;
            let text = match corpus {
                None => LATIN_CORPUS.to_string(),
                Some(p) if p.is_file() => fs::read_to_string(&p)?,
                Some(p) => {
                    let mut files: Vec<PathBuf> = fs::read_dir(&p)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
                    files.retain(|f| f.extension().is_some_and(|e| e == "txt"));
                    files.sort();
                    if files.is_empty() {
                        bail!("no .txt files in {}", p.display());
                    }
                    files.iter().map(fs::read_to_string).collect::<std::io::Result<Vec<_>>>()?.join("\n")
                }
            };
            let smoothing = match smoothing {
                SmoothingArg::None => Smoothing::None,
                SmoothingArg::Backoff => Smoothing::StupidBackoff { alpha: DEFAULT_BACKOFF },
            };
            let (lm, dropped) = CharLm::<f64>::train_text(&text, q, smoothing, &alphabet.text_chars())?;
            lm.save(&out)?;
            println!("order {q}, {} contexts, {dropped} words dropped, model {}", lm.contexts().len(), out.display());
        }
        Command::Transcribe { page, config, out, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let t = cfg.load_transcriber::<f64>()?;
            let mut results: Vec<WordResult> = Vec::new();
            for p in &page {
                let page_id = stem(p)?;
                let r = t.transcribe_page(&GrayImage::load(p)?, &page_id, &cfg.preprocess())?;
                log::info!("{page_id}: {} words", r.len());
                results.extend(r);
            }
            write_jsonl(&mut BufWriter::new(File::create(&out)?), &results)?;
            let failed = results.iter().filter(|r| r.error.is_some()).count();
            println!("{} words transcribed ({failed} failed), results {}", results.len(), out.display());
        }
        Command::TranscribeWord { word, config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let t = cfg.load_transcriber::<f64>()?;
            let result = t.transcribe_word(&read_word(&word)?);
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Evaluate { results, truth, m, csv } => {
            let results = read_jsonl(&results)?;
            let truth = GroundTruth::load_tsv(&truth)?;
            let report = compute_report(&results, &truth, &m)?;
            if let Some(csv) = csv {
                report.write_csv(&mut BufWriter::new(File::create(csv)?))?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep { grid, data, truth, config, m, out } => {
            let cfg = PipelineConfig::load(&config)?;
            let t = cfg.load_transcriber::<f64>()?;
            let grid = SweepGrid::load(&grid)?;
            let truth = GroundTruth::load_tsv(&truth)?;
            let words = pngs_in(&data)?.iter().map(|p| read_word(p)).collect::<Result<Vec<_>>>()?;
            let timeout = cfg.word_timeout_ms.map_or(SWEEP_TIMEOUT, std::time::Duration::from_millis);
            let rows = sweep(&t, &grid, &words, &truth, &m, timeout)?;
            match out {
                Some(p) => write_sweep_csv(&mut BufWriter::new(File::create(p)?), &rows)?,
                None => write_sweep_csv(&mut std::io::stdout().lock(), &rows)?,
            }
        }
        Command::Synth { glyphs, lexicon, n, seed, out } => {
            let glyphs = load_glyphs(glyphs.as_deref())?;
            let lexicon = load_lexicon(lexicon.as_deref())?;
            let words: Vec<&str> = lexicon.iter().map(String::as_str).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = synth_generate(&glyphs, &words, &SymbolAlphabet::default(), n, &PageLayout::default(), &mut rng)?;
            fs::create_dir_all(out.join("pages"))?;
            fs::create_dir_all(out.join("words"))?;
            for (id, page) in &set.pages {
                page.save_png(&out.join("pages").join(format!("{id}.png")))?;
            }
            for (w, _) in &set.words {
                w.image.save_png(&out.join("words").join(format!("{}.png", w.id())))?;
            }
            GroundTruth::from(&set).write_tsv(&mut BufWriter::new(File::create(out.join("truth.tsv"))?))?;
            println!("{} words on {} pages in {}", set.words.len(), set.pages.len(), out.display());
        }
        Command::SynthTraining { glyphs, lexicon, words, target, seed, out } => {
            let glyphs = load_glyphs(glyphs.as_deref())?;
            let lexicon = load_lexicon(lexicon.as_deref())?;
            let lex: Vec<&str> = lexicon.iter().map(String::as_str).collect();
            let alphabet = SymbolAlphabet::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigma = htr_core::lattice::LatticeParams::default().sigma;
            let samples = training_set(&glyphs, &lex, &alphabet, words, target, sigma, &mut rng)?;
            fs::create_dir_all(out.join("images"))?;
            let mut records = Vec::with_capacity(samples.len());
            for (i, s) in samples.iter().enumerate() {
                let rel = PathBuf::from("images").join(format!("{i:06}.png"));
                s.image.save_png(&out.join(&rel))?;
                records.push(ManifestRecord { path: rel, label: alphabet.symbol(s.label).name.clone(), origin: s.origin });
            }
            write_manifest(&mut BufWriter::new(File::create(out.join("manifest.jsonl"))?), &records)?;
            println!("{} samples in {}", samples.len(), out.join("manifest.jsonl").display());
        }
        Command::ServeLabeling { pool, port, store, seed, glyphs, export, static_dir, host } => {
            let segments = SegmentPool::load_dir(&pool).with_context(|| format!("loading pool {}", pool.display()))?;
            if segments.is_empty() {
                bail!("no segment images under {}", pool.display());
            }
            let exemplars = Exemplars::from_glyphs(SymbolAlphabet::default(), &load_glyphs(glyphs.as_deref())?)?;
            let config = StoreConfig { journal: Some(store.clone()), seed, ..StoreConfig::default() };
            let labels = Arc::new(LabelStore::open(segments, exemplars, config)?);
            let export_dir = export.unwrap_or_else(|| store.with_extension("export"));
            let state = AppState { store: labels, export_dir, static_dir };
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad host or port")?;
            tokio::runtime::Runtime::new()?.block_on(htr_labeling::serve(addr, state))?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run(Cli::parse())
}
