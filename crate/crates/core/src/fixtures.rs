//! Hand-built inputs with known answers: the "dato" word, whose seven
//! rectangular segments and table classifier produce a lattice with exactly
//! four origin-to-sink transcriptions.

use std::collections::HashMap;

use crate::classifier::{ClassDistribution, SymbolAlphabet, TableClassifier};
use crate::error::Result;
use crate::imaging::WordImage;
use crate::langmodel::{CharLm, Smoothing, DEFAULT_ORDER};
use crate::raster::BinaryImage;
use crate::scalar::Scalar;
use crate::segmentation::{group_image, polygonal_segment, Segment};

pub const DATO_WIDTH: usize = 66;
pub const DATO_HEIGHT: usize = 18;

/// Column span `[left, right)` and height of each rectangle, bottom aligned.
pub const DATO_RECTS: [(usize, usize, usize); 7] =
    [(0, 7, 18), (8, 13, 10), (14, 21, 12), (22, 27, 8), (28, 37, 14), (38, 45, 9), (46, 66, 11)];

/// Lattice edges that survive, as vertex pairs with classifier output.
pub const DATO_EDGES: [(usize, usize, &[(&str, f64)]); 6] = [
    (0, 2, &[("d", 0.9)]),
    (2, 4, &[("a", 0.5), ("i", 0.4)]),
    (4, 5, &[("t", 0.9)]),
    (5, 7, &[("o", 0.9)]),
    (4, 6, &[("i", 0.9)]),
    (6, 7, &[("d", 0.9)]),
];

/// Transcriptions readable off the lattice.
pub const DATO_CANDIDATES: [&str; 4] = ["dato", "daid", "diid", "dito"];

/// Every group the lattice does not keep is scored as mostly non-character.
pub const DATO_FALLBACK_NON_CHAR: f64 = 0.9;

/// Short Latin text in which "dato" is the most frequent of the four readings.
pub const DATO_CORPUS: &str = "\
dato anno domini dato die decimo mensis datum romae apud sanctum petrum \
dato tempore ad perpetuam rei memoriam dilecto filio salutem et apostolicam \
benedictionem datum laterani anno primo dato ut supra in nomine domini amen \
dictum est ut idem dato pretio emeret domum ad usum pauperum";

pub fn dato_image() -> BinaryImage {
    let mut img = BinaryImage::blank(DATO_WIDTH, DATO_HEIGHT).expect("fixture size is positive");
    for &(left, right, height) in &DATO_RECTS {
        for x in left..right {
            for y in DATO_HEIGHT - height..DATO_HEIGHT {
                img.set(x, y, true);
            }
        }
    }
    img
}

pub fn dato_word() -> WordImage {
    WordImage::new(dato_image(), "fixture", 0, 0).expect("fixture is margin cropped")
}

pub fn dato_segments() -> Vec<Segment> {
    polygonal_segment(&dato_word())
}

/// Image of the segments between two lattice vertices.
pub fn dato_group(from: usize, to: usize) -> Result<BinaryImage> {
    let segments = dato_segments();
    group_image(&dato_word(), &segments[from..to])
}

/// Table classifier answering [`DATO_EDGES`] and non-character elsewhere.
pub fn dato_classifier<S: Scalar>() -> Result<TableClassifier<S>> {
    let alphabet = SymbolAlphabet::default();
    let mut table = HashMap::new();
    for &(from, to, entries) in &DATO_EDGES {
        table.insert(dato_group(from, to)?.fnv1a(), ClassDistribution::with_remainder(&alphabet, entries)?);
    }
    let fallback = ClassDistribution::with_remainder(&alphabet, &[(crate::classifier::NON_CHARACTER, DATO_FALLBACK_NON_CHAR)])?;
    TableClassifier::new(alphabet, table, fallback)
}

pub fn dato_lm<S: Scalar>() -> Result<CharLm<S>> {
    let vocab = SymbolAlphabet::default().text_chars();
    Ok(CharLm::train_text(DATO_CORPUS, DEFAULT_ORDER, Smoothing::default(), &vocab)?.0)
}
