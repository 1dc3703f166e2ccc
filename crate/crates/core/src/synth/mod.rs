//! Synthetic manuscripts: glyph templates joined by ligatures, with the
//! ground truth needed for classifier training and evaluation.

mod corpus;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

pub use corpus::{LATIN_CORPUS, LEXICON};

use crate::classifier::{balance_training_set, normalize_sample, LabeledSample, Origin, SymbolAlphabet, NON_CHARACTER};
use crate::error::{Error, Result};
use crate::imaging::{crop_margins, WordImage};
use crate::lattice::vertex_groups;
use crate::raster::{BinaryImage, GrayImage};
use crate::segmentation::{polygonal_segment, Segment};

/// Templates are drawn on a coarse grid and enlarged by this factor.
const SCALE: usize = 2;
/// Rows of the coarse grid: ascenders start near the top, the x-height band
/// spans rows 6 to 13 and descenders reach row 18.
const GRID_HEIGHT: usize = 20;
pub const GLYPH_HEIGHT: usize = GRID_HEIGHT * SCALE;
const LIGATURE_ROW: usize = 10 * SCALE;

struct Canvas {
    width: usize,
    bits: Vec<bool>,
}

impl Canvas {
    fn new(width: usize) -> Self {
        Self { width, bits: vec![false; width * GRID_HEIGHT] }
    }

    fn fill(&mut self, x0: usize, x1: usize, y0: usize, y1: usize) {
        for y in y0..=y1.min(GRID_HEIGHT - 1) {
            for x in x0..=x1.min(self.width - 1) {
                self.bits[y * self.width + x] = true;
            }
        }
    }

    /// Two-pixel-wide vertical stroke.
    fn vbar(mut self, x: usize, y0: usize, y1: usize) -> Self {
        self.fill(x, x + 1, y0, y1);
        self
    }

    /// Two-pixel-high horizontal stroke.
    fn hbar(mut self, x0: usize, x1: usize, y: usize) -> Self {
        self.fill(x0, x1, y, y + 1);
        self
    }

    fn hairline(mut self, x0: usize, x1: usize, y: usize) -> Self {
        self.fill(x0, x1, y, y);
        self
    }

    /// Stroke outline of the box `x0..=x1, y0..=y1` with its corners cut.
    fn ring(self, x0: usize, x1: usize, y0: usize, y1: usize) -> Self {
        self.vbar(x0, y0 + 1, y1 - 1).vbar(x1 - 1, y0 + 1, y1 - 1).hbar(x0 + 1, x1 - 1, y0).hbar(x0 + 1, x1 - 1, y1 - 1)
    }

    /// Two-pixel-wide straight stroke.
    fn stroke(mut self, from: (usize, usize), to: (usize, usize)) -> Self {
        for (x, y) in line_points(from, to) {
            self.fill(x, x + 1, y, y);
        }
        self
    }

    fn image(self) -> BinaryImage {
        let width = self.width * SCALE;
        let bits = (0..GLYPH_HEIGHT * width).map(|i| self.bits[(i / width / SCALE) * self.width + (i % width) / SCALE]).collect();
        BinaryImage::from_bits(width, GLYPH_HEIGHT, bits).expect("template size is positive")
    }
}

fn line_points(from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut x, mut y) = (from.0 as isize, from.1 as isize);
    let (x1, y1) = (to.0 as isize, to.1 as isize);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = vec![(x as usize, y as usize)];
    while (x, y) != (x1, y1) {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        out.push((x as usize, y as usize));
    }
    out
}

/// Template images keyed by symbol name.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphSet {
    glyphs: BTreeMap<String, BinaryImage>,
}

impl GlyphSet {
    pub fn new(glyphs: BTreeMap<String, BinaryImage>) -> Result<Self> {
        if let Some((name, _)) = glyphs.iter().find(|(_, g)| !g.has_ink()) {
            return Err(Error::InvalidArgument(format!("glyph {name:?} has no ink")));
        }
        Ok(Self { glyphs })
    }

    /// Built-in templates for the default alphabet, non-character class included.
    pub fn builtin() -> Self {
        let c = Canvas::new;
        let entries = [
            ("a", c(7).ring(0, 6, 6, 13).vbar(3, 8, 11)),
            ("b", c(7).vbar(0, 1, 13).ring(0, 6, 6, 13)),
            ("c", c(7).vbar(0, 7, 12).hbar(1, 6, 6).hbar(1, 6, 12).vbar(5, 6, 8).vbar(5, 11, 13)),
            ("d", c(8).ring(0, 6, 6, 13).vbar(6, 1, 13)),
            ("d-tall", c(7).ring(0, 6, 6, 13).stroke((5, 6), (1, 1))),
            ("e", c(7).vbar(0, 7, 12).hbar(1, 6, 6).vbar(5, 7, 9).hbar(1, 6, 9).hbar(1, 6, 12)),
            ("f", c(7).vbar(0, 1, 13).hbar(0, 6, 1).hbar(0, 5, 6).hbar(0, 6, 12).vbar(5, 10, 13)),
            ("g", c(8).ring(0, 6, 6, 12).vbar(6, 6, 17).hbar(1, 7, 17)),
            ("h", c(8).vbar(0, 1, 13).hbar(0, 7, 6).vbar(6, 6, 13)),
            ("i", c(2).vbar(0, 6, 13)),
            ("l", c(2).vbar(0, 1, 13)),
            ("m", c(12).hbar(0, 11, 6).vbar(0, 6, 13).vbar(5, 6, 13).vbar(10, 6, 13)),
            ("n", c(8).hbar(0, 7, 6).vbar(0, 6, 13).vbar(6, 6, 13)),
            ("o", c(7).ring(0, 6, 6, 13)),
            ("p", c(7).vbar(0, 6, 18).ring(0, 6, 6, 12)),
            ("q", c(8).ring(0, 6, 6, 12).vbar(6, 6, 18)),
            ("r", c(6).hbar(0, 5, 6).vbar(4, 6, 9).hbar(0, 5, 9).vbar(0, 9, 13).hbar(0, 5, 12)),
            ("s", c(7).hbar(0, 6, 6).vbar(0, 6, 9).hbar(0, 6, 9).vbar(5, 9, 13).hbar(0, 6, 12)),
            ("s-long", c(6).vbar(0, 1, 13).hbar(0, 5, 1).hbar(0, 5, 12).vbar(4, 10, 13)),
            ("t", c(7).vbar(0, 3, 13).hbar(0, 6, 6).hbar(0, 6, 12).vbar(5, 10, 13)),
            ("u", c(8).vbar(0, 6, 13).vbar(6, 6, 13).hbar(0, 7, 12).hairline(0, 7, 6)),
            ("x", c(8).vbar(0, 6, 13).vbar(6, 6, 13).stroke((1, 6), (6, 13)).stroke((6, 6), (1, 13))),
            (NON_CHARACTER, c(10).ring(0, 9, 4, 15).stroke((2, 6), (6, 13)).stroke((6, 6), (2, 13))),
        ];
        let glyphs = entries.into_iter().map(|(n, canvas)| (n.to_string(), canvas.image())).collect();
        Self::new(glyphs).expect("built-in glyphs have ink")
    }

    pub fn get(&self, name: &str) -> Option<&BinaryImage> {
        self.glyphs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.glyphs.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    /// Reads `<name>.png` files; `nonchar.png` stands for the non-character class.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut glyphs = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("png") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            let name = if stem == "nonchar" { NON_CHARACTER.to_string() } else { stem.to_string() };
            glyphs.insert(name, BinaryImage::load(&path)?);
        }
        Self::new(glyphs)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, img) in &self.glyphs {
            let stem = if name == NON_CHARACTER { "nonchar" } else { name.as_str() };
            img.save_png(&dir.join(format!("{stem}.png")))?;
        }
        Ok(())
    }
}

/// Ink row on the given template column closest to the ligature row.
fn anchor_row(img: &BinaryImage, x: usize) -> usize {
    (0..img.height())
        .filter(|&y| img.get(x, y))
        .min_by_key(|&y| (y.abs_diff(LIGATURE_ROW), std::cmp::Reverse(y)))
        .unwrap_or(LIGATURE_ROW)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderParams {
    /// Inclusive range of white columns bridged by each ligature.
    pub join: (usize, usize),
    /// Largest vertical displacement of a glyph, in pixels.
    pub jitter: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self { join: (2, 3), jitter: 1 }
    }
}

/// A rendered word with the glyph each ink pixel came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedWord {
    pub text: String,
    /// Symbol names of the drawn glyphs, in order.
    pub glyphs: Vec<String>,
    pub image: BinaryImage,
    /// Per pixel, row-major: `k + 1` for glyph `k`, 0 for ligature or background.
    pub owner: Vec<u16>,
}

impl RenderedWord {
    pub fn glyph_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.glyphs.len()];
        for &o in &self.owner {
            if o > 0 {
                sizes[o as usize - 1] += 1;
            }
        }
        sizes
    }

    pub fn word_image(&self, page_id: &str, line: usize, index: usize) -> Result<WordImage> {
        WordImage::new(self.image.clone(), page_id, line, index)
    }
}

/// Symbol names for a text, choosing randomly among glyph variants of a character.
pub fn glyph_names<R: Rng + ?Sized>(text: &str, alphabet: &SymbolAlphabet, glyphs: &GlyphSet, rng: &mut R) -> Result<Vec<String>> {
    text.chars()
        .map(|c| {
            let options: Vec<&str> = alphabet
                .indices_for_char(c)
                .into_iter()
                .map(|i| alphabet.symbol(i).name.as_str())
                .filter(|n| glyphs.get(n).is_some())
                .collect();
            options.choose(rng).map(|s| s.to_string()).ok_or_else(|| Error::UnknownSymbol(c.to_string()))
        })
        .collect()
}

/// Draws the named glyphs left to right, joined by hairline ligatures.
pub fn render_glyphs<R: Rng + ?Sized>(text: &str, names: &[String], glyphs: &GlyphSet, params: &RenderParams, rng: &mut R) -> Result<RenderedWord> {
    if names.is_empty() {
        return Err(Error::InvalidArgument("nothing to render".into()));
    }
    let templates: Vec<&BinaryImage> =
        names.iter().map(|n| glyphs.get(n).ok_or_else(|| Error::UnknownSymbol(n.clone()))).collect::<Result<_>>()?;
    let joins: Vec<usize> = (1..names.len()).map(|_| rng.gen_range(params.join.0..=params.join.1)).collect();
    let width = templates.iter().map(|t| t.width()).sum::<usize>() + joins.iter().sum::<usize>();
    let height = GLYPH_HEIGHT + 2 * params.jitter;
    let mut owner = vec![0u16; width * height];
    let mut x = 0;
    let mut prev_anchor: Option<(usize, usize)> = None;
    for (k, tpl) in templates.iter().enumerate() {
        let dy = rng.gen_range(0..=2 * params.jitter);
        for (gx, gy) in tpl.ink_pixels() {
            owner[(gy + dy) * width + x + gx] = k as u16 + 1;
        }
        let left = (x, anchor_row(tpl, 0) + dy);
        if let Some(from) = prev_anchor {
            for (lx, ly) in line_points(from, left) {
                let idx = ly * width + lx;
                if owner[idx] == 0 {
                    owner[idx] = u16::MAX;
                }
            }
        }
        let right_x = tpl.width() - 1;
        prev_anchor = Some((x + right_x, anchor_row(tpl, right_x) + dy));
        x += tpl.width() + joins.get(k).copied().unwrap_or(0);
    }
    let bits: Vec<bool> = owner.iter().map(|&o| o != 0).collect();
    let full = BinaryImage::from_bits(width, height, bits)?;
    let (x0, y0, x1, y1) = full.ink_bounds().ok_or(Error::EmptyImage)?;
    let image = full.sub_image(x0, y0, x1 - x0 + 1, y1 - y0 + 1)?;
    let mut cropped = Vec::with_capacity(image.width() * image.height());
    for y in y0..=y1 {
        for x in x0..=x1 {
            let o = owner[y * width + x];
            cropped.push(if o == u16::MAX { 0 } else { o });
        }
    }
    Ok(RenderedWord { text: text.to_string(), glyphs: names.to_vec(), image, owner: cropped })
}

/// Renders `text` with randomly chosen glyph variants.
pub fn render_word<R: Rng + ?Sized>(text: &str, alphabet: &SymbolAlphabet, glyphs: &GlyphSet, params: &RenderParams, rng: &mut R) -> Result<RenderedWord> {
    let names = glyph_names(text, alphabet, glyphs, rng)?;
    render_glyphs(text, &names, glyphs, params, rng)
}

/// What a group of segments depicts, judged by pixel ownership.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupLabel {
    /// Mostly one whole glyph, given by its position in the word.
    Glyph(usize),
    /// Clearly not a single glyph.
    NonCharacter,
    /// Too close to call either way.
    Ambiguous,
}

/// Share of a glyph a group must hold, and share of the group's glyph ink
/// that glyph must make up, to count as that glyph.
pub const GLYPH_MATCH: f64 = 0.85;
/// Below this on either share the group counts as a non-character.
pub const NON_CHAR_BELOW: f64 = 0.6;

pub fn label_group(word: &RenderedWord, sizes: &[usize], pixels: &[(usize, usize)]) -> GroupLabel {
    let mut counts = vec![0usize; sizes.len()];
    for &(x, y) in pixels {
        let o = word.owner[y * word.image.width() + x];
        if o > 0 {
            counts[o as usize - 1] += 1;
        }
    }
    let owned: usize = counts.iter().sum();
    let Some((k, &best)) = counts.iter().enumerate().max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i))) else {
        return GroupLabel::NonCharacter;
    };
    if owned == 0 {
        return GroupLabel::NonCharacter;
    }
    let cover = best as f64 / sizes[k] as f64;
    let purity = best as f64 / owned as f64;
    if cover >= GLYPH_MATCH && purity >= GLYPH_MATCH {
        GroupLabel::Glyph(k)
    } else if cover < NON_CHAR_BELOW || purity < NON_CHAR_BELOW {
        GroupLabel::NonCharacter
    } else {
        GroupLabel::Ambiguous
    }
}

/// Candidate groups of a word as the lattice would form them: vertex
/// ranges within `sigma` centroid distance, with their ownership label.
pub fn lattice_groups(word: &RenderedWord, segments: &[Segment], sigma: f64) -> Vec<(usize, usize, Vec<(usize, usize)>, GroupLabel)> {
    let groups = vertex_groups(segments);
    let mut xs = vec![0];
    xs.extend(groups.iter().map(|g| g.0));
    let sizes = word.glyph_sizes();
    let mut out = Vec::new();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if (xs[j] - xs[i]) as f64 > sigma {
                break;
            }
            let pixels: Vec<(usize, usize)> = groups[i..j].iter().flat_map(|g| g.1.iter().flat_map(|s| s.pixels.iter().copied())).collect();
            let label = label_group(word, &sizes, &pixels);
            out.push((i, j, pixels, label));
        }
    }
    out
}

/// True when some origin-to-end path of the lattice spells the word glyph
/// by glyph, i.e. the segmentation leaves the correct reading reachable.
pub fn correct_path_exists(word: &RenderedWord, segments: &[Segment], sigma: f64) -> bool {
    let n_vertices = vertex_groups(segments).len() + 1;
    let mut reach = vec![vec![false; word.glyphs.len() + 1]; n_vertices];
    reach[0][0] = true;
    let groups = lattice_groups(word, segments, sigma);
    for v in 0..n_vertices {
        for (i, j, _, label) in groups.iter().filter(|g| g.0 == v) {
            if let GroupLabel::Glyph(k) = label {
                if reach[*i][*k] {
                    reach[*j][k + 1] = true;
                }
            }
        }
    }
    reach[n_vertices - 1][word.glyphs.len()]
}

/// Classifier samples from rendered words: every lattice group labeled by
/// ownership (ambiguous groups skipped), plus each glyph template once.
pub fn group_samples(words: &[RenderedWord], alphabet: &SymbolAlphabet, glyphs: &GlyphSet, sigma: f64) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for name in glyphs.names() {
        if let Some(label) = alphabet.index_of(name) {
            let img = normalize_sample(glyphs.get(name).expect("listed name"))?;
            out.push(LabeledSample::new(img, label, Origin::Synthetic, alphabet)?);
        }
    }
    let non_char = alphabet.non_character();
    for word in words {
        let wi = WordImage::new(word.image.clone(), "synth", 0, 0)?;
        let segments = polygonal_segment(&wi);
        for (_, _, pixels, label) in lattice_groups(word, &segments, sigma) {
            let label = match label {
                GroupLabel::Glyph(k) => alphabet.require(&word.glyphs[k])?,
                GroupLabel::NonCharacter => non_char,
                GroupLabel::Ambiguous => continue,
            };
            let img = crop_margins(&BinaryImage::from_pixels(word.image.width(), word.image.height(), &pixels)?)?;
            out.push(LabeledSample::new(normalize_sample(&img)?, label, Origin::Synthetic, alphabet)?);
        }
    }
    Ok(out)
}

/// Balanced classifier training set from `n_words` rendered lexicon words.
pub fn training_set<R: Rng + ?Sized>(
    glyphs: &GlyphSet,
    lexicon: &[&str],
    alphabet: &SymbolAlphabet,
    n_words: usize,
    per_class: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<LabeledSample>> {
    let params = RenderParams::default();
    let words = (0..n_words)
        .map(|_| {
            let text = lexicon.choose(rng).ok_or_else(|| Error::InvalidArgument("empty lexicon".into()))?;
            render_word(text, alphabet, glyphs, &params, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = group_samples(&words, alphabet, glyphs, sigma)?;
    balance_training_set(&samples, alphabet, per_class, rng)
}

/// Page layout of generated words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageLayout {
    pub width: usize,
    pub margin: usize,
    pub word_gap: usize,
    pub line_gap: usize,
    pub lines_per_page: usize,
}

impl Default for PageLayout {
    fn default() -> Self {
        Self { width: 640, margin: 16, word_gap: 14, line_gap: 14, lines_per_page: 10 }
    }
}

/// Generated pages with their words in reading order.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub pages: Vec<(String, GrayImage)>,
    /// Word images with the ids page extraction assigns, and their texts.
    pub words: Vec<(WordImage, String)>,
}

impl SyntheticSet {
    /// `word_id -> text`.
    pub fn truth(&self) -> BTreeMap<String, String> {
        self.words.iter().map(|(w, t)| (w.id(), t.clone())).collect()
    }
}

/// Renders `n` lexicon words and lays them out on pages.
pub fn synth_generate<R: Rng + ?Sized>(
    glyphs: &GlyphSet,
    lexicon: &[&str],
    alphabet: &SymbolAlphabet,
    n: usize,
    layout: &PageLayout,
    rng: &mut R,
) -> Result<SyntheticSet> {
    if lexicon.is_empty() {
        return Err(Error::InvalidArgument("empty lexicon".into()));
    }
    for w in lexicon {
        glyph_names(w, alphabet, glyphs, rng)?;
    }
    let params = RenderParams::default();
    let mut rendered = Vec::with_capacity(n);
    for _ in 0..n {
        let text = lexicon.choose(rng).expect("non-empty lexicon");
        rendered.push(render_word(text, alphabet, glyphs, &params, rng)?);
    }
    // Assign words to lines and lines to pages.
    let usable = layout.width - 2 * layout.margin;
    let mut lines: Vec<Vec<usize>> = Vec::new();
    let mut used = 0;
    for (i, w) in rendered.iter().enumerate() {
        let need = if used == 0 { w.image.width() } else { used + layout.word_gap + w.image.width() };
        if lines.is_empty() || need > usable {
            lines.push(vec![i]);
            used = w.image.width();
        } else {
            lines.last_mut().expect("a line exists").push(i);
            used = need;
        }
    }
    let line_height = GLYPH_HEIGHT + 2 * params.jitter;
    let mut pages = Vec::new();
    let mut words = Vec::new();
    for (p, page_lines) in lines.chunks(layout.lines_per_page).enumerate() {
        let page_id = format!("synth_p{p:03}");
        let height = 2 * layout.margin + page_lines.len() * line_height + (page_lines.len() - 1) * layout.line_gap;
        let mut page = GrayImage::filled(layout.width, height, 255)?;
        for (l, line) in page_lines.iter().enumerate() {
            let top = layout.margin + l * (line_height + layout.line_gap);
            let mut x = layout.margin;
            for (wi, &idx) in line.iter().enumerate() {
                let w = &rendered[idx];
                // Bottom-align words on the line's baseline band.
                let y0 = top + line_height - w.image.height().min(line_height);
                for (px, py) in w.image.ink_pixels() {
                    page.set(x + px, y0 + py, 0);
                }
                words.push((w.word_image(&page_id, l, wi)?, w.text.clone()));
                x += w.image.width() + layout.word_gap;
            }
        }
        pages.push((page_id, page));
    }
    Ok(SyntheticSet { pages, words })
}
