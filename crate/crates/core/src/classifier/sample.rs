//! Training samples: 56x56 normalization, augmentation, class balancing and
//! the JSON-lines manifest.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SymbolAlphabet;
use crate::error::{Error, Result};
use crate::raster::BinaryImage;

/// Side of the square classifier input.
pub const SAMPLE_SIDE: usize = 56;

const AUGMENT_RETRIES: usize = 10;

/// Where a training sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Crowd,
    Augmented,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    /// Always `SAMPLE_SIDE` x `SAMPLE_SIDE`.
    pub image: BinaryImage,
    pub label: usize,
    pub origin: Origin,
}

impl LabeledSample {
    pub fn new(image: BinaryImage, label: usize, origin: Origin, alphabet: &SymbolAlphabet) -> Result<Self> {
        if image.width() != SAMPLE_SIDE || image.height() != SAMPLE_SIDE {
            return Err(Error::InvalidDimensions { width: image.width(), height: image.height() });
        }
        if label >= alphabet.len() {
            return Err(Error::InvalidArgument(format!("label {label} outside alphabet")));
        }
        Ok(Self { image, label, origin })
    }
}

/// Resamples `img` to `nw` x `nh`.
///
/// Each output pixel takes the majority (ties count as ink) of the source
/// pixels whose centers fall in its footprint; when none do (upscaling) the
/// source pixel under its center is used.
fn resample(img: &BinaryImage, nw: usize, nh: usize) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut out = BinaryImage::blank(nw, nh).expect("positive size");
    let sx = nw as f64 / w as f64;
    let sy = nh as f64 / h as f64;
    // Source indices whose centers fall into [o/s, (o+1)/s).
    let span = |o: usize, s: f64, n: usize| -> (usize, usize) {
        let lo = ((o as f64 / s) - 0.5).ceil().max(0.0) as usize;
        let hi = ((((o + 1) as f64) / s) - 0.5).ceil().max(0.0) as usize;
        (lo.min(n), hi.min(n))
    };
    for oy in 0..nh {
        let (y0, y1) = span(oy, sy, h);
        for ox in 0..nw {
            let (x0, x1) = span(ox, sx, w);
            let total = (x1 - x0) * (y1 - y0);
            let ink = if total == 0 {
                let cx = (((ox as f64 + 0.5) / sx) as usize).min(w - 1);
                let cy = (((oy as f64 + 0.5) / sy) as usize).min(h - 1);
                img.get(cx, cy)
            } else {
                let mut count = 0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        count += img.get(x, y) as usize;
                    }
                }
                2 * count >= total
            };
            out.set(ox, oy, ink);
        }
    }
    out
}

/// Scales to fit a 56x56 square keeping the aspect ratio, then centers.
pub fn normalize_sample(img: &BinaryImage) -> Result<BinaryImage> {
    if !img.has_ink() {
        return Err(Error::EmptyImage);
    }
    let (w, h) = (img.width(), img.height());
    if w == SAMPLE_SIDE && h == SAMPLE_SIDE {
        return Ok(img.clone());
    }
    let scale = SAMPLE_SIDE as f64 / w.max(h) as f64;
    let nw = ((w as f64 * scale).round() as usize).clamp(1, SAMPLE_SIDE);
    let nh = ((h as f64 * scale).round() as usize).clamp(1, SAMPLE_SIDE);
    let scaled = if (nw, nh) == (w, h) { img.clone() } else { resample(img, nw, nh) };
    let left = (SAMPLE_SIDE - nw) / 2;
    let top = (SAMPLE_SIDE - nh) / 2;
    Ok(scaled.padded(left, top, SAMPLE_SIDE - nw - left, SAMPLE_SIDE - nh - top))
}

/// One draw of the augmentation transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineJitter {
    pub rotation_deg: f64,
    pub zoom: f64,
    pub shear: f64,
    pub shift_x: f64,
    pub shift_y: f64,
}

impl AffineJitter {
    pub const IDENTITY: Self = Self { rotation_deg: 0.0, zoom: 1.0, shear: 0.0, shift_x: 0.0, shift_y: 0.0 };

    /// Rotation in ±5°, zoom in [0.9, 1.1], shear in ±0.1, shifts in ±3 px.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            rotation_deg: rng.gen_range(-5.0..=5.0),
            zoom: rng.gen_range(0.9..=1.1),
            shear: rng.gen_range(-0.1..=0.1),
            shift_x: rng.gen_range(-3.0..=3.0),
            shift_y: rng.gen_range(-3.0..=3.0),
        }
    }

    /// Applies the transform about the image center with nearest-neighbour sampling.
    pub fn apply(&self, img: &BinaryImage) -> BinaryImage {
        let (w, h) = (img.width(), img.height());
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        // Forward map A = zoom * R * Shear; invert it explicitly.
        let a = [
            [self.zoom * cos, self.zoom * (cos * self.shear - sin)],
            [self.zoom * sin, self.zoom * (sin * self.shear + cos)],
        ];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        let mut out = BinaryImage::blank(w, h).expect("positive size");
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - cx - self.shift_x;
                let dy = y as f64 - cy - self.shift_y;
                let sx = (inv[0][0] * dx + inv[0][1] * dy + cx).round() as isize;
                let sy = (inv[1][0] * dx + inv[1][1] * dy + cy).round() as isize;
                if img.get_signed(sx, sy) {
                    out.set(x, y, true);
                }
            }
        }
        out
    }
}

/// Applies a fixed transform; fails if no ink survives.
pub fn augment_with(sample: &LabeledSample, jitter: &AffineJitter) -> Result<LabeledSample> {
    let image = jitter.apply(&sample.image);
    if !image.has_ink() {
        return Err(Error::EmptyImage);
    }
    Ok(LabeledSample { image, label: sample.label, origin: Origin::Augmented })
}

/// Random slight rotation, zoom, shear and shift of a sample.
///
/// Draws that leave no ink are redrawn up to ten times.
pub fn augment<R: Rng + ?Sized>(sample: &LabeledSample, rng: &mut R) -> Result<LabeledSample> {
    for _ in 0..AUGMENT_RETRIES {
        match augment_with(sample, &AffineJitter::random(rng)) {
            Ok(s) => return Ok(s),
            Err(Error::EmptyImage) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::EmptyImage)
}

/// Brings every class of the alphabet to exactly `target` samples.
///
/// Larger classes are subsampled uniformly without replacement; smaller ones
/// keep all their samples and are topped up with augmented copies of
/// uniformly chosen members. Output is grouped by class in alphabet order.
pub fn balance_training_set<R: Rng + ?Sized>(
    samples: &[LabeledSample],
    alphabet: &SymbolAlphabet,
    target: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSample>> {
    let mut by_class: Vec<Vec<&LabeledSample>> = vec![Vec::new(); alphabet.len()];
    for s in samples {
        by_class
            .get_mut(s.label)
            .ok_or_else(|| Error::InvalidArgument(format!("label {} outside alphabet", s.label)))?
            .push(s);
    }
    if let Some((i, _)) = by_class.iter().enumerate().find(|(_, v)| v.is_empty()) {
        return Err(Error::EmptyClass(alphabet.symbol(i).name.clone()));
    }
    let mut out = Vec::with_capacity(target * alphabet.len());
    for members in by_class {
        if members.len() >= target {
            let mut picked = sample_indices(rng, members.len(), target).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| members[i].clone()));
        } else {
            out.extend(members.iter().map(|s| (*s).clone()));
            for _ in members.len()..target {
                let src = members[rng.gen_range(0..members.len())];
                out.push(augment(src, rng)?);
            }
        }
    }
    Ok(out)
}

/// One manifest line: `{"path": ..., "label": ..., "origin": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub label: String,
    pub origin: Origin,
}

/// Reads a JSON-lines manifest; relative image paths resolve against its directory.
pub fn read_manifest(path: &Path, alphabet: &SymbolAlphabet) -> Result<Vec<LabeledSample>> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut samples = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)?;
        let label = alphabet.require(&rec.label)?;
        let img_path = if rec.path.is_absolute() { rec.path.clone() } else { base.join(&rec.path) };
        let image = normalize_sample(&BinaryImage::load(&img_path)?)?;
        samples.push(LabeledSample::new(image, label, rec.origin, alphabet)?);
    }
    Ok(samples)
}

/// Writes manifest records, one JSON object per line.
pub fn write_manifest<W: Write>(out: &mut W, records: &[ManifestRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
