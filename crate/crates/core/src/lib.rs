//! Handwritten text recognition for historical manuscripts: page imaging,
//! character segmentation, classification, character language modeling,
//! lattice search, counterpart decoding and evaluation.

pub mod classifier;
pub mod decoding;
pub mod eval;
pub mod error;
pub mod fixtures;
pub mod imaging;
pub mod langmodel;
pub mod lattice;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
pub use raster::{BinaryImage, GrayImage};
pub use scalar::Scalar;

pub type ClassDistributionF32 = classifier::ClassDistribution<f32>;
pub type CharLmF32 = langmodel::CharLm<f32>;
pub type LatticeF32 = lattice::Lattice<f32>;
pub type CandidateF32 = lattice::Candidate<f32>;
