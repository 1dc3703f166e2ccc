//! Character segmentation of word images.
//!
//! Two segmenters are provided. [`over_segment`] cuts at every local minimum
//! of the column ink profile and feeds the labeling pool. [`polygonal_segment`]
//! works per connected component on the smoothed upper and lower contours and
//! feeds the transcription lattice.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{crop_margins, WordImage};
use crate::raster::BinaryImage;

/// Per-column ink counts of a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InkProfile(pub Vec<usize>);

pub fn ink_profile(word: &WordImage) -> InkProfile {
    InkProfile(word.image.column_counts())
}

/// Which segmenter to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentationMethod {
    Over,
    #[default]
    Polygonal,
}

impl std::str::FromStr for SegmentationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "over" => Ok(Self::Over),
            "polygonal" => Ok(Self::Polygonal),
            other => Err(Error::InvalidArgument(format!("unknown segmentation method {other:?}"))),
        }
    }
}

/// A contiguous ink region of a word, candidate piece of a character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    /// Leftmost ink column.
    pub left: usize,
    /// One past the rightmost ink column.
    pub right: usize,
    /// Floor of the mean x coordinate of the ink pixels.
    pub centroid_x: usize,
    /// Ink pixels `(x, y)` in word coordinates, sorted.
    pub pixels: Vec<(usize, usize)>,
}

impl Segment {
    /// Builds a segment from its pixels; `None` if there are none.
    pub fn from_pixels(id: usize, mut pixels: Vec<(usize, usize)>) -> Option<Self> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_unstable();
        let left = pixels.iter().map(|p| p.0).min()?;
        let right = pixels.iter().map(|p| p.0).max()? + 1;
        let sum: usize = pixels.iter().map(|p| p.0).sum();
        let centroid_x = sum / pixels.len();
        Some(Self { id, left, right, centroid_x, pixels })
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.len()
    }
}

/// Orders by centroid then leftmost column and renumbers ids.
fn finish(mut segments: Vec<Segment>) -> Vec<Segment> {
    segments.sort_by(|a, b| a.centroid_x.cmp(&b.centroid_x).then(a.left.cmp(&b.left)).then(a.pixels.cmp(&b.pixels)));
    for (i, s) in segments.iter_mut().enumerate() {
        s.id = i;
    }
    segments
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Min,
    Max,
}

/// Interior local extrema of a sequence, plateau-aware.
///
/// A maximal run of equal values counts when both neighbouring runs lie on
/// the same side (strictly above for minima, below for maxima). Only the
/// leftmost index of such a plateau is reported.
fn plateau_extrema<T: PartialOrd + Copy>(values: &[T], kind: Extremum) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        if i > 0 && j + 1 < values.len() {
            let (before, v, after) = (values[i - 1], values[i], values[j + 1]);
            let hit = match kind {
                Extremum::Min => before > v && after > v,
                Extremum::Max => before < v && after < v,
            };
            if hit {
                out.push(i);
            }
        }
        i = j + 1;
    }
    out
}

/// Column boundaries used by [`over_segment`].
pub fn over_segment_boundaries(profile: &InkProfile) -> Vec<usize> {
    plateau_extrema(&profile.0, Extremum::Min)
}

/// Splits a word at the local minima of its column ink profile.
///
/// Each segment covers the columns between consecutive boundaries (a
/// boundary column starts the segment to its right).
pub fn over_segment(word: &WordImage) -> Vec<Segment> {
    let profile = ink_profile(word);
    let mut edges = vec![0];
    edges.extend(over_segment_boundaries(&profile));
    edges.push(word.width());
    let img = &word.image;
    let segments = edges
        .windows(2)
        .filter_map(|w| {
            let mut pixels = Vec::new();
            for x in w[0]..w[1] {
                for y in 0..img.height() {
                    if img.get(x, y) {
                        pixels.push((x, y));
                    }
                }
            }
            Segment::from_pixels(0, pixels)
        })
        .collect();
    finish(segments)
}

/// Smoothed upper and lower contour of one connected component.
///
/// Values are row indices (0 = top), defined for columns `x0..x0 + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub x0: usize,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

/// Moving average of width 3, truncated at both ends.
fn smooth3(raw: &[usize]) -> Vec<f64> {
    (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(raw.len() - 1);
            let window = &raw[lo..=hi];
            window.iter().sum::<usize>() as f64 / window.len() as f64
        })
        .collect()
}

fn contour_of_pixels(pixels: &[(usize, usize)]) -> Result<Contour> {
    let x0 = pixels.iter().map(|p| p.0).min().ok_or(Error::EmptyImage)?;
    let x1 = pixels.iter().map(|p| p.0).max().ok_or(Error::EmptyImage)?;
    let mut top = vec![usize::MAX; x1 - x0 + 1];
    let mut bottom = vec![0usize; x1 - x0 + 1];
    for &(x, y) in pixels {
        top[x - x0] = top[x - x0].min(y);
        bottom[x - x0] = bottom[x - x0].max(y);
    }
    if top.contains(&usize::MAX) {
        return Err(Error::InvalidArgument("component has a column without ink".into()));
    }
    Ok(Contour { x0, upper: smooth3(&top), lower: smooth3(&bottom) })
}

/// Upper and lower contour of a single-component image, smoothed over 3 columns.
pub fn contours(component: &BinaryImage) -> Result<Contour> {
    contour_of_pixels(&component.ink_pixels())
}

/// A straight cut between an upper-contour valley and a lower-contour peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutLine {
    pub upper: (f64, f64),
    pub lower: (f64, f64),
}

impl CutLine {
    /// Horizontal position of the cut at row `y`.
    ///
    /// Beyond its end points the cut continues vertically; a cut whose end
    /// points share a row is treated as vertical through their midpoint.
    pub fn x_at(&self, y: f64) -> f64 {
        let ((xu, yu), (xl, yl)) = (self.upper, self.lower);
        if (yu - yl).abs() < 1e-9 {
            return (xu + xl) / 2.0;
        }
        let (ya, xa, yb, xb) = if yu < yl { (yu, xu, yl, xl) } else { (yl, xl, yu, xu) };
        if y <= ya {
            xa
        } else if y >= yb {
            xb
        } else {
            xa + (y - ya) / (yb - ya) * (xb - xa)
        }
    }

    /// True when the pixel lies left of, or on, the cut.
    pub fn keeps_left(&self, x: usize, y: usize) -> bool {
        x as f64 <= self.x_at(y as f64) + 1e-9
    }

    fn mid_x(&self) -> f64 {
        (self.upper.0 + self.lower.0) / 2.0
    }
}

/// Cut lines of one component, ordered left to right.
///
/// Valleys of the upper contour are its geometric minima, i.e. local maxima
/// of the row index; peaks of the lower contour are local minima of the row
/// index. Each valley is joined to the nearest peak by column distance, ties
/// going to the left.
pub fn component_cuts(contour: &Contour) -> Vec<CutLine> {
    let valleys = plateau_extrema(&contour.upper, Extremum::Max);
    let peaks = plateau_extrema(&contour.lower, Extremum::Min);
    let mut cuts: Vec<CutLine> = Vec::new();
    if peaks.is_empty() {
        return cuts;
    }
    for &u in &valleys {
        let l = *peaks
            .iter()
            .min_by(|&&a, &&b| a.abs_diff(u).cmp(&b.abs_diff(u)).then(a.cmp(&b)))
            .expect("peaks non-empty");
        let cut = CutLine {
            upper: ((contour.x0 + u) as f64, contour.upper[u]),
            lower: ((contour.x0 + l) as f64, contour.lower[l]),
        };
        if !cuts.contains(&cut) {
            cuts.push(cut);
        }
    }
    cuts.sort_by(|a, b| a.mid_x().partial_cmp(&b.mid_x()).unwrap_or(Ordering::Equal).then(a.upper.0.partial_cmp(&b.upper.0).unwrap_or(Ordering::Equal)));
    cuts
}

/// Splits a word along contour cut lines, component by component.
///
/// Every ink pixel goes to the region left of the first cut (in left to
/// right order) that keeps it on its left side, or to the last region.
pub fn polygonal_segment(word: &WordImage) -> Vec<Segment> {
    let mut segments = Vec::new();
    for comp in word.image.components() {
        let contour = contour_of_pixels(&comp).expect("8-connected component covers its columns");
        let cuts = component_cuts(&contour);
        let mut regions: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cuts.len() + 1];
        for &(x, y) in &comp {
            let idx = cuts.iter().position(|c| c.keeps_left(x, y)).unwrap_or(cuts.len());
            regions[idx].push((x, y));
        }
        segments.extend(regions.into_iter().filter_map(|px| Segment::from_pixels(0, px)));
    }
    finish(segments)
}

/// Runs the chosen segmenter.
pub fn segment(word: &WordImage, method: SegmentationMethod) -> Vec<Segment> {
    match method {
        SegmentationMethod::Over => over_segment(word),
        SegmentationMethod::Polygonal => polygonal_segment(word),
    }
}

/// Union of the given segments' ink, margin-cropped.
pub fn group_image(word: &WordImage, segments: &[Segment]) -> Result<BinaryImage> {
    let pixels: Vec<(usize, usize)> = segments.iter().flat_map(|s| s.pixels.iter().copied()).collect();
    if pixels.is_empty() {
        return Err(Error::EmptyImage);
    }
    let img = BinaryImage::from_pixels(word.image.width(), word.image.height(), &pixels)?;
    crop_margins(&img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn word(rows: &[&str]) -> WordImage {
        WordImage::from_uncropped(&BinaryImage::from_ascii(rows).unwrap(), "t", 0, 0).unwrap()
    }

    fn word_from_profile(profile: &[usize]) -> WordImage {
        let h = *profile.iter().max().unwrap();
        let mut img = BinaryImage::blank(profile.len(), h).unwrap();
        for (x, &c) in profile.iter().enumerate() {
            for y in h - c..h {
                img.set(x, y, true);
            }
        }
        WordImage::new(img, "t", 0, 0).unwrap()
    }

    #[test]
    fn profile_counts() {
        let w = word(&[".#.", ".#.", ".#."]);
        assert_eq!(ink_profile(&w).0, vec![3]);
        let full = BinaryImage::from_ascii(&["####", "####"]).unwrap();
        assert_eq!(full.column_counts(), vec![2, 2, 2, 2]);
        let middle = BinaryImage::from_ascii(&[".#.", ".#.", ".#."]).unwrap();
        assert_eq!(middle.column_counts(), vec![0, 3, 0]);
    }

    #[test]
    fn profile_matches_naive_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let bits: Vec<bool> = (0..100).map(|_| rng.gen_bool(0.4)).collect();
            let img = BinaryImage::from_bits(10, 10, bits.clone()).unwrap();
            let naive: Vec<usize> = (0..10).map(|x| (0..10).filter(|y| bits[y * 10 + x]).count()).collect();
            assert_eq!(img.column_counts(), naive);
        }
    }

    #[test]
    fn plateau_minimum_keeps_leftmost_column() {
        let w = word_from_profile(&[3, 1, 4, 2, 2, 5]);
        assert_eq!(over_segment_boundaries(&ink_profile(&w)), vec![1, 3]);
        let segs = over_segment(&w);
        let spans: Vec<(usize, usize)> = segs.iter().map(|s| (s.left, s.right)).collect();
        assert_eq!(spans, vec![(0, 1), (1, 3), (3, 6)]);
    }

    #[test]
    fn monotone_profile_is_one_segment() {
        let w = word_from_profile(&[1, 2, 3, 4]);
        assert_eq!(over_segment(&w).len(), 1);
    }

    /// Brute-force minima scan: every column whose value is a plateau minimum,
    /// keeping the first column of each run of equal minima.
    fn minima_oracle(p: &[usize]) -> Vec<usize> {
        let n = p.len();
        let mut out = Vec::new();
        for i in 1..n.saturating_sub(1) {
            if p[i - 1] == p[i] {
                continue;
            }
            let mut j = i;
            while j + 1 < n && p[j + 1] == p[i] {
                j += 1;
            }
            if j + 1 < n && p[i - 1] > p[i] && p[j + 1] > p[i] {
                out.push(i);
            }
        }
        out
    }

    #[test]
    fn random_profiles_match_minima_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let n = rng.gen_range(1..=12);
            let p: Vec<usize> = (0..n).map(|_| rng.gen_range(1..5)).collect();
            assert_eq!(over_segment_boundaries(&InkProfile(p.clone())), minima_oracle(&p), "{p:?}");
        }
    }

    #[test]
    fn rectangle_contour_is_flat() {
        let img = BinaryImage::from_ascii(&["####", "####", "####"]).unwrap();
        let c = contours(&img).unwrap();
        assert_eq!(c.upper, vec![0.0; 4]);
        assert_eq!(c.lower, vec![2.0; 4]);
    }

    #[test]
    fn single_column_contour() {
        let img = BinaryImage::from_ascii(&["#", "#"]).unwrap();
        let c = contours(&img).unwrap();
        assert_eq!(c.upper, vec![0.0]);
        assert_eq!(c.lower, vec![1.0]);
        assert!(contours(&BinaryImage::blank(2, 2).unwrap()).is_err());
    }

    #[test]
    fn staircase_contour_hand_values() {
        // Raw tops 5,4,3,2,1,0; raw bottoms all 5.
        let img = BinaryImage::from_ascii(&[
            ".....#", "....##", "...###", "..####", ".#####", "######",
        ])
        .unwrap();
        let c = contours(&img).unwrap();
        let expected = [4.5, 4.0, 3.0, 2.0, 1.0, 0.5];
        for (a, b) in c.upper.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(c.lower, vec![5.0; 6]);
    }

    #[test]
    fn rectangle_is_one_polygonal_segment() {
        let w = word(&["#####", "#####", "#####"]);
        assert_eq!(polygonal_segment(&w).len(), 1);
    }

    fn bridge_fixture() -> WordImage {
        let mut rows = Vec::new();
        for y in 0..9 {
            let mut r = String::new();
            r.push_str("#####");
            r.push_str(if y == 4 { "###" } else { "..." });
            r.push_str("#####");
            rows.push(r);
        }
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        word(&refs)
    }

    /// Flood fill over 4-neighbours restricted to a column range.
    fn flood(img: &BinaryImage, start: (usize, usize), cols: std::ops::Range<usize>) -> Vec<(usize, usize)> {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![start];
        while let Some((x, y)) = stack.pop() {
            if !cols.contains(&x) || y >= img.height() || !img.get(x, y) || !seen.insert((x, y)) {
                continue;
            }
            stack.push((x + 1, y));
            if x > 0 {
                stack.push((x - 1, y));
            }
            stack.push((x, y + 1));
            if y > 0 {
                stack.push((x, y - 1));
            }
        }
        seen.into_iter().collect()
    }

    #[test]
    fn bridge_splits_two_rectangles() {
        let w = bridge_fixture();
        let segs = polygonal_segment(&w);
        assert_eq!(segs.len(), 2);
        // The smoothed valley and peak coincide at the bridge's middle column.
        let cut = segs[0].right;
        assert_eq!(cut, 7);
        assert_eq!(segs[0].pixels, flood(&w.image, (0, 0), 0..cut));
        assert_eq!(segs[1].pixels, flood(&w.image, (12, 0), cut..w.width()));
    }

    #[test]
    fn random_words_conserve_ink() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let (wd, ht) = (rng.gen_range(3..30), rng.gen_range(3..15));
            let mut bits: Vec<bool> = (0..wd * ht).map(|_| rng.gen_bool(0.45)).collect();
            bits[0] = true;
            let img = BinaryImage::from_bits(wd, ht, bits).unwrap();
            let w = WordImage::from_uncropped(&img, "r", 0, 0).unwrap();
            for segs in [polygonal_segment(&w), over_segment(&w)] {
                let mut all: Vec<(usize, usize)> = segs.iter().flat_map(|s| s.pixels.clone()).collect();
                let total = all.len();
                all.sort_unstable();
                all.dedup();
                assert_eq!(all.len(), total, "masks overlap");
                assert_eq!(all, w.image.ink_pixels().into_iter().map(|(x, y)| (x, y)).collect::<std::collections::BTreeSet<_>>().into_iter().collect::<Vec<_>>());
                for pair in segs.windows(2) {
                    assert!((pair[0].centroid_x, pair[0].left) <= (pair[1].centroid_x, pair[1].left));
                }
                for s in &segs {
                    assert!(s.left <= s.centroid_x && s.centroid_x < s.right);
                }
            }
            assert_eq!(polygonal_segment(&w), polygonal_segment(&w));
        }
    }

    #[test]
    fn group_images() {
        let w = bridge_fixture();
        let segs = polygonal_segment(&w);
        assert_eq!(group_image(&w, &segs).unwrap(), w.image);
        let one = group_image(&w, &segs[..1]).unwrap();
        assert_eq!(one.ink_count(), segs[0].ink_count());
        assert!(matches!(group_image(&w, &[]), Err(Error::EmptyImage)));
    }

    #[test]
    fn middle_group_matches_pixel_union() {
        let w = word(&["#.#.#.#", "#######"]);
        let segs = over_segment(&w);
        assert!(segs.len() >= 4, "{}", segs.len());
        let mid = &segs[1..3];
        let g = group_image(&w, mid).unwrap();
        let mut union: Vec<(usize, usize)> = mid.iter().flat_map(|s| s.pixels.clone()).collect();
        union.sort_unstable();
        let x0 = union.iter().map(|p| p.0).min().unwrap();
        let y0 = union.iter().map(|p| p.1).min().unwrap();
        let mut got: Vec<(usize, usize)> = g.ink_pixels().into_iter().map(|(x, y)| (x + x0, y + y0)).collect();
        got.sort_unstable();
        assert_eq!(got, union);
    }
}
