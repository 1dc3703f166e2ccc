//! Page preprocessing: binarization, margin cropping, skew/slant correction
//! and the line/word splits that turn a scanned page into word images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryImage, GrayImage};

/// Default minimum run of white columns separating two words, in pixels.
pub const DEFAULT_WORD_GAP: usize = 7;
/// Connected components smaller than this are treated as specks.
pub const DEFAULT_MIN_SPECK: usize = 4;

const SKEW_STEPS: i32 = 50; // ±5.0° in 0.1° steps
const SLANT_STEPS: i32 = 30; // ±30° in 1° steps

/// Result of [`binarize`].
#[derive(Debug, Clone)]
pub struct Binarization {
    pub image: BinaryImage,
    /// Pixels with intensity `<= threshold` are ink. `None` for uniform input.
    pub threshold: Option<u8>,
}

impl Binarization {
    /// True when the input had a single intensity and no threshold exists.
    pub fn is_empty(&self) -> bool {
        self.threshold.is_none()
    }
}

/// Global threshold maximizing between-class intensity variance.
///
/// Returns the smallest `t` maximizing the variance between the classes
/// `{v <= t}` and `{v > t}`, or `None` if the histogram has a single level.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    let total_sum: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let mut best: Option<(u8, f64)> = None;
    let mut w0 = 0u64;
    let mut sum0 = 0f64;
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let mu0 = sum0 / w0 as f64;
        let mu1 = (total_sum - sum0) / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((t as u8, var));
        }
    }
    best.map(|(t, _)| t)
}

/// Converts a grayscale page to ink/background using the Otsu criterion.
///
/// Darker pixels are ink. A single-intensity image has no meaningful
/// threshold: the output is all background and the result is flagged empty.
pub fn binarize(img: &GrayImage) -> Binarization {
    let threshold = otsu_threshold(&img.histogram());
    let bits = match threshold {
        Some(t) => img.pixels().iter().map(|&p| p <= t).collect(),
        None => vec![false; img.width() * img.height()],
    };
    let image = BinaryImage::from_bits(img.width(), img.height(), bits).expect("same dimensions");
    Binarization { image, threshold }
}

/// Minimal bounding box of the ink.
pub fn crop_margins(img: &BinaryImage) -> Result<BinaryImage> {
    let (x0, y0, x1, y1) = img.ink_bounds().ok_or(Error::EmptyImage)?;
    img.sub_image(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

/// Drops 8-connected components with fewer than `min_size` pixels.
pub fn remove_specks(img: &BinaryImage, min_size: usize) -> BinaryImage {
    let mut out = img.clone();
    for comp in img.components() {
        if comp.len() < min_size {
            for (x, y) in comp {
                out.set(x, y, false);
            }
        }
    }
    out
}

/// Rotates about the image center by `degrees`, keeping the canvas size.
///
/// Nearest-neighbour inverse mapping, so the output stays bitonal. Positive
/// angles turn the content clockwise on screen (y grows downward).
pub fn rotate(img: &BinaryImage, degrees: f64) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut out = BinaryImage::blank(w, h).expect("non-empty dimensions");
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    for y in 0..h {
        let dy = y as f64 - cy;
        for x in 0..w {
            let dx = x as f64 - cx;
            // Inverse rotation of the output coordinate.
            let sx = (cos * dx + sin * dy + cx).round() as isize;
            let sy = (-sin * dx + cos * dy + cy).round() as isize;
            if img.get_signed(sx, sy) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Horizontal shear by `degrees`: each row moves by `round(tan(angle) * (cy - y))`.
///
/// Rows translate by whole pixels, so ink is preserved exactly as long as
/// the canvas is wide enough.
pub fn shear(img: &BinaryImage, degrees: f64) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut out = BinaryImage::blank(w, h).expect("non-empty dimensions");
    let tan = degrees.to_radians().tan();
    let cy = (h as f64 - 1.0) / 2.0;
    for y in 0..h {
        let shift = (tan * (cy - y as f64)).round() as isize;
        for x in 0..w {
            let sx = x as isize - shift;
            if img.get_signed(sx, y as isize) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Population variance of the per-row ink counts.
pub fn projection_variance(img: &BinaryImage) -> f64 {
    let rows = img.row_counts();
    let n = rows.len() as f64;
    let mean = rows.iter().sum::<usize>() as f64 / n;
    rows.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n
}

/// Sum of squared per-column ink counts.
pub fn column_sharpness(img: &BinaryImage) -> u64 {
    img.column_counts().iter().map(|&c| (c * c) as u64).sum()
}

/// Candidate angles ordered so that smaller magnitudes (and 0 first) win ties.
fn candidates(steps: i32) -> impl Iterator<Item = i32> {
    (0..=steps).flat_map(|k| if k == 0 { vec![0] } else { vec![-k, k] })
}

/// Corrects skew by searching rotations in [-5°, +5°] at 0.1° steps.
///
/// Picks the angle maximizing the variance of the horizontal projection
/// profile, computed on a canvas padded for the widest rotation. Returns the
/// cropped corrected image and the applied angle.
pub fn deskew(img: &BinaryImage) -> Result<(BinaryImage, f64)> {
    if !img.has_ink() {
        return Err(Error::EmptyImage);
    }
    let reach = ((img.width().max(img.height()) as f64) * (SKEW_STEPS as f64 / 10.0).to_radians().sin()).ceil() as usize + 1;
    let padded = img.padded(reach, reach, reach, reach);
    let mut best = (0.0, projection_variance(&padded), padded.clone());
    for k in candidates(SKEW_STEPS).skip(1) {
        let angle = k as f64 / 10.0;
        let rotated = rotate(&padded, angle);
        let score = projection_variance(&rotated);
        if score > best.1 {
            best = (angle, score, rotated);
        }
    }
    Ok((crop_margins(&best.2)?, best.0))
}

/// Corrects slant by searching horizontal shears in [-30°, +30°] at 1° steps.
///
/// Picks the shear maximizing [`column_sharpness`]. Returns the cropped
/// corrected image and the applied angle.
pub fn deslant(img: &BinaryImage) -> Result<(BinaryImage, f64)> {
    if !img.has_ink() {
        return Err(Error::EmptyImage);
    }
    let reach = ((img.height() as f64) * (SLANT_STEPS as f64).to_radians().tan()).ceil() as usize + 1;
    let padded = img.padded(reach, 0, reach, 0);
    let mut best = (0.0, column_sharpness(&padded), padded.clone());
    for k in candidates(SLANT_STEPS).skip(1) {
        let angle = k as f64;
        let sheared = shear(&padded, angle);
        let score = column_sharpness(&sheared);
        if score > best.1 {
            best = (angle, score, sheared);
        }
    }
    Ok((crop_margins(&best.2)?, best.0))
}

/// Maximal runs of `true` as half-open ranges.
fn runs(flags: impl Iterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut len = 0;
    for (i, f) in flags.enumerate() {
        len = i + 1;
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, len));
    }
    out
}

/// Splits a page into text lines at rows without ink, top to bottom.
pub fn split_lines(page: &BinaryImage) -> Vec<BinaryImage> {
    let rows = page.row_counts();
    runs(rows.iter().map(|&c| c > 0))
        .into_iter()
        .map(|(y0, y1)| {
            let band = page.sub_image(0, y0, page.width(), y1 - y0).expect("band inside page");
            crop_margins(&band).expect("band has ink")
        })
        .collect()
}

/// Splits a line at white column runs of at least `gap` pixels, left to right.
pub fn split_words(line: &BinaryImage, gap: usize) -> Result<Vec<BinaryImage>> {
    if gap == 0 {
        return Err(Error::InvalidArgument("word gap must be at least 1".into()));
    }
    let cols = line.column_counts();
    let white = runs(cols.iter().map(|&c| c == 0));
    let mut pieces = Vec::new();
    let mut start = 0;
    for (a, b) in white {
        let at_edge = a == 0 || b == cols.len();
        if b - a >= gap || at_edge {
            if a > start {
                pieces.push((start, a));
            }
            start = b;
        }
    }
    if start < cols.len() {
        pieces.push((start, cols.len()));
    }
    pieces
        .into_iter()
        .map(|(x0, x1)| crop_margins(&line.sub_image(x0, 0, x1 - x0, line.height())?))
        .collect()
}

/// A margin-cropped word image with its position on the page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordImage {
    #[serde(skip, default = "placeholder_image")]
    pub image: BinaryImage,
    pub page_id: String,
    pub line_index: usize,
    pub word_index: usize,
}

fn placeholder_image() -> BinaryImage {
    BinaryImage::blank(1, 1).expect("1x1")
}

impl WordImage {
    /// Wraps an image, checking it has ink and no blank border rows or columns.
    pub fn new(image: BinaryImage, page_id: impl Into<String>, line_index: usize, word_index: usize) -> Result<Self> {
        match image.ink_bounds() {
            None => return Err(Error::EmptyImage),
            Some((x0, y0, x1, y1)) => {
                if x0 != 0 || y0 != 0 || x1 + 1 != image.width() || y1 + 1 != image.height() {
                    return Err(Error::InvalidArgument("word image has blank margins".into()));
                }
            }
        }
        Ok(Self { image, page_id: page_id.into(), line_index, word_index })
    }

    /// Crops the margins first, then wraps.
    pub fn from_uncropped(image: &BinaryImage, page_id: impl Into<String>, line_index: usize, word_index: usize) -> Result<Self> {
        Self::new(crop_margins(image)?, page_id, line_index, word_index)
    }

    /// Identifier `{page}_{line:03}_{word:03}`, also used as the output file stem.
    pub fn id(&self) -> String {
        format!("{}_{:03}_{:03}", self.page_id, self.line_index, self.word_index)
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }
}

/// Preprocessing knobs for [`extract_words`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub word_gap: usize,
    pub min_speck: usize,
    pub deskew: bool,
    pub deslant: bool,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self { word_gap: DEFAULT_WORD_GAP, min_speck: DEFAULT_MIN_SPECK, deskew: true, deslant: true }
    }
}

/// Full page preprocessing: binarize, despeckle, deskew, split lines,
/// deslant each line, split words. Words come out in reading order.
pub fn extract_words(page: &GrayImage, page_id: &str, params: &PreprocessParams) -> Result<Vec<WordImage>> {
    let bin = binarize(page);
    if bin.is_empty() {
        return Ok(Vec::new());
    }
    let clean = remove_specks(&bin.image, params.min_speck);
    if !clean.has_ink() {
        return Ok(Vec::new());
    }
    let page_img = if params.deskew { deskew(&clean)?.0 } else { crop_margins(&clean)? };
    let mut words = Vec::new();
    for (li, line) in split_lines(&page_img).into_iter().enumerate() {
        let line = if params.deslant { deslant(&line)?.0 } else { line };
        for (wi, word) in split_words(&line, params.word_gap)?.into_iter().enumerate() {
            words.push(WordImage::new(word, page_id, li, wi)?);
        }
    }
    Ok(words)
}
