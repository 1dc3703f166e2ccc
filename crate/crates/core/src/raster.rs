//! Grayscale and bitonal rasters plus PNG input/output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        hist
    }

    /// Renders ink as black (0) on white (255).
    pub fn from_binary(img: &BinaryImage) -> Self {
        let pixels = img.bits.iter().map(|&b| if b { 0 } else { 255 }).collect();
        Self { width: img.width, height: img.height, pixels }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let luma = img.to_luma8();
        let (w, h) = luma.dimensions();
        Self::new(w as usize, h as usize, luma.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        let mut encoder = png::Encoder::new(file, self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&self.pixels)?;
        Ok(())
    }
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

/// Bitonal image, row-major; `true` marks an ink pixel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    /// All-background image.
    pub fn blank(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(Self { width, height, bits: vec![false; width * height] })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(Self { width, height, bits })
    }

    /// Builds an image from text rows, `#` (or `X`) marking ink.
    ///
    /// Handy for fixtures: all rows must have the same length.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut bits = Vec::with_capacity(width * height);
        for row in rows {
            if row.chars().count() != width {
                return Err(Error::InvalidDimensions { width, height });
            }
            bits.extend(row.chars().map(|c| c == '#' || c == 'X'));
        }
        Self::from_bits(width, height, bits)
    }

    /// Builds an image of the given size from a list of ink coordinates.
    pub fn from_pixels(width: usize, height: usize, pixels: &[(usize, usize)]) -> Result<Self> {
        let mut img = Self::blank(width, height)?;
        for &(x, y) in pixels {
            if x >= width || y >= height {
                return Err(Error::InvalidArgument(format!("pixel ({x},{y}) outside {width}x{height}")));
            }
            img.set(x, y, true);
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but treats out-of-range coordinates as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, ink: bool) {
        self.bits[y * self.width + x] = ink;
    }

    pub fn ink_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn has_ink(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    /// Coordinates of all ink pixels in row-major order.
    pub fn ink_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.width];
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += b as usize;
            }
        }
        counts
    }

    pub fn row_counts(&self) -> Vec<usize> {
        self.bits.chunks(self.width).map(|row| row.iter().filter(|&&b| b).count()).collect()
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the ink, if any.
    pub fn ink_bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bounds = Some(match bounds {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bounds
    }

    /// Copies the window starting at `(x, y)` with the given size.
    pub fn sub_image(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(Error::InvalidDimensions { width, height });
        }
        let mut bits = Vec::with_capacity(width * height);
        for row in y..y + height {
            let start = row * self.width + x;
            bits.extend_from_slice(&self.bits[start..start + width]);
        }
        Ok(Self { width, height, bits })
    }

    /// Pads the image with background on every side.
    pub fn padded(&self, left: usize, top: usize, right: usize, bottom: usize) -> Self {
        let width = self.width + left + right;
        let height = self.height + top + bottom;
        let mut out = Self { width, height, bits: vec![false; width * height] };
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.set(x + left, y + top, true);
                }
            }
        }
        out
    }

    /// 8-connected ink components, each as a list of pixels in scan order of discovery.
    ///
    /// Components are returned sorted by their leftmost column, then topmost row.
    pub fn components(&self) -> Vec<Vec<(usize, usize)>> {
        let mut label = vec![usize::MAX; self.bits.len()];
        let mut comps: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut stack = Vec::new();
        // Column-major scan so components come out ordered left to right.
        for x in 0..self.width {
            for y in 0..self.height {
                let idx = y * self.width + x;
                if !self.bits[idx] || label[idx] != usize::MAX {
                    continue;
                }
                let id = comps.len();
                let mut pixels = Vec::new();
                label[idx] = id;
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    pixels.push((cx, cy));
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let nx = cx as isize + dx;
                            let ny = cy as isize + dy;
                            if self.get_signed(nx, ny) {
                                let nidx = ny as usize * self.width + nx as usize;
                                if label[nidx] == usize::MAX {
                                    label[nidx] = id;
                                    stack.push((nx as usize, ny as usize));
                                }
                            }
                        }
                    }
                }
                comps.push(pixels);
            }
        }
        comps
    }

    /// 64-bit FNV-1a digest of the image.
    ///
    /// The hashed byte stream is the width and height as little-endian `u32`,
    /// followed by each row packed eight pixels per byte, most significant bit
    /// first, with each row padded to a whole byte.
    pub fn fnv1a(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut hash = OFFSET;
        let mut feed = |byte: u8| {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(PRIME);
        };
        for b in (self.width as u32).to_le_bytes() {
            feed(b);
        }
        for b in (self.height as u32).to_le_bytes() {
            feed(b);
        }
        for row in self.bits.chunks(self.width) {
            for chunk in row.chunks(8) {
                let mut byte = 0u8;
                for (i, &bit) in chunk.iter().enumerate() {
                    if bit {
                        byte |= 0x80 >> i;
                    }
                }
                feed(byte);
            }
        }
        hash
    }

    /// Loads a PNG (any depth); pixels darker than mid-gray become ink.
    pub fn load(path: &Path) -> Result<Self> {
        let gray = GrayImage::load(path)?;
        let bits = gray.pixels().iter().map(|&p| p < 128).collect();
        Self::from_bits(gray.width(), gray.height(), bits)
    }

    /// Writes a 1-bit grayscale PNG with ink as black.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.write_png(BufWriter::new(File::create(path)?))
    }

    /// In-memory PNG encoding, same format as [`save_png`](Self::save_png).
    pub fn png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_png(&mut out)?;
        Ok(out)
    }

    pub fn write_png<W: Write>(&self, out: W) -> Result<()> {
        let mut encoder = png::Encoder::new(out, self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::One);
        let mut writer = encoder.write_header()?;
        let stride = self.width.div_ceil(8);
        let mut data = vec![0u8; stride * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    data[y * stride + x / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        writer.write_image_data(&data)?;
        Ok(())
    }

    /// Text rendering with `#` for ink, one line per row.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for row in self.bits.chunks(self.width) {
            s.extend(row.iter().map(|&b| if b { '#' } else { '.' }));
            s.push('\n');
        }
        s
    }
}

impl std::fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryImage({}x{}, ink={})", self.width, self.height, self.ink_count())
    }
}
