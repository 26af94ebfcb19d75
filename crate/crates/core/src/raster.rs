//! Raster geometry: grayscale pages, binary masks, half-open pixel boxes,
//! boundary bands, RoI resampling and white-out masking.
//!
//! Intensities follow scanned-paper convention: 0 is full ink, 255 is blank.
//! RoI grids carry ink *density* instead, `1 - intensity / 255`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WHITE: u8 = 255;
pub const INK: u8 = 0;

/// Half-open integer pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidBox { x0, y0, x1, y1 });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Box from origin and size; panics on zero size. For internal layout code
    /// where the size is known positive.
    pub(crate) fn at(x: usize, y: usize, w: usize, h: usize) -> Self {
        assert!(w > 0 && h > 0, "empty box {w}x{h}");
        Self {
            x0: x,
            y0: y,
            x1: x + w,
            y1: y + h,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x1 > x0 && y1 > y0).then_some(BBox { x0, y0, x1, y1 })
    }

    pub fn intersection_area(&self, other: &BBox) -> usize {
        self.intersect(other).map_or(0, |b| b.area())
    }

    /// Smallest box covering both.
    pub fn hull(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn hull_of<'a>(boxes: impl IntoIterator<Item = &'a BBox>) -> Option<BBox> {
        boxes.into_iter().fold(None, |acc, b| match acc {
            None => Some(*b),
            Some(a) => Some(a.hull(b)),
        })
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.x1 <= width && self.y1 <= height
    }

    /// Grow every edge by `d`, clipped to `[0, width) × [0, height)`.
    pub fn dilate(&self, d: usize, width: usize, height: usize) -> BBox {
        BBox {
            x0: self.x0.saturating_sub(d),
            y0: self.y0.saturating_sub(d),
            x1: (self.x1 + d).min(width),
            y1: (self.y1 + d).min(height),
        }
    }
}

/// Intersection-over-union by pixel area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid must be non-empty, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (values.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Blank paper.
    pub fn blank(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            values: vec![WHITE; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.values[y * self.width + x] = v;
    }

    pub fn fill_rect(&mut self, rect: &BBox, v: u8) {
        let x1 = rect.x1.min(self.width);
        let y1 = rect.y1.min(self.height);
        for y in rect.y0..y1 {
            let row = y * self.width;
            self.values[row + rect.x0..row + x1].fill(v);
        }
    }

    /// Number of non-blank pixels.
    pub fn ink_count(&self) -> usize {
        self.values.iter().filter(|&&v| v < WHITE).count()
    }

    pub fn bounds(&self) -> BBox {
        BBox::at(0, 0, self.width, self.height)
    }
}

/// One boolean per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (bits.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    /// Union of rectangles; parts outside the grid are ignored.
    pub fn from_rects(width: usize, height: usize, rects: &[BBox]) -> Self {
        let mut mask = Self::empty(width, height);
        for r in rects {
            mask.fill_rect(r, true);
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn fill_rect(&mut self, rect: &BBox, v: bool) {
        let x1 = rect.x1.min(self.width);
        let y1 = rect.y1.min(self.height);
        if rect.x0 >= x1 {
            return;
        }
        for y in rect.y0..y1 {
            let row = y * self.width;
            self.bits[row + rect.x0..row + x1].fill(v);
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Count of set bits inside `rect` (clipped to the grid).
    pub fn count_in(&self, rect: &BBox) -> usize {
        let x1 = rect.x1.min(self.width);
        let y1 = rect.y1.min(self.height);
        if rect.x0 >= x1 {
            return 0;
        }
        (rect.y0..y1)
            .map(|y| {
                let row = y * self.width;
                self.bits[row + rect.x0..row + x1].iter().filter(|&&b| b).count()
            })
            .sum()
    }

    /// Tight bounding box of the set bits.
    pub fn bounds(&self) -> Option<BBox> {
        let mut out: Option<BBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let px = BBox::at(x, y, 1, 1);
                    out = Some(out.map_or(px, |b| b.hull(&px)));
                }
            }
        }
        out
    }

    fn check_same(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_same(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Ok(BinaryMask { bits, ..*self })
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_same(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(BinaryMask { bits, ..*self })
    }

    /// `self ∧ ¬other`.
    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_same(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && !*b).collect();
        Ok(BinaryMask { bits, ..*self })
    }

    /// Ink-style rendering: true → 255, false → 0.
    pub fn to_grid(&self) -> PixelGrid {
        let values = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        PixelGrid {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Inverse of [`BinaryMask::to_grid`]; values ≥ 128 are set.
    pub fn from_grid(grid: &PixelGrid) -> Self {
        Self {
            width: grid.width,
            height: grid.height,
            bits: grid.values.iter().map(|&v| v >= 128).collect(),
        }
    }
}

/// Mask IoU; two empty masks count as identical (1.0).
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.check_same(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Inclusive 2D prefix counts over a boolean grid.
pub(crate) struct SummedArea {
    width: usize,
    table: Vec<u32>,
}

impl SummedArea {
    pub(crate) fn new(width: usize, height: usize, bits: &[bool]) -> Self {
        let stride = width + 1;
        let mut table = vec![0u32; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0u32;
            for x in 0..width {
                row += bits[y * width + x] as u32;
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { width, table }
    }

    /// Set bits in `[x0, x1) × [y0, y1)`.
    pub(crate) fn count(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u32 {
        let s = self.width + 1;
        self.table[y1 * s + x1] + self.table[y0 * s + x0]
            - self.table[y0 * s + x1]
            - self.table[y1 * s + x0]
    }
}

/// Disjoint split of a grid into boundary pixels (set B) and interior pixels
/// (set I) for a given window half-size `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPartition {
    width: usize,
    height: usize,
    k: usize,
    boundary: Vec<bool>,
    boundary_count: usize,
}

impl BandPartition {
    /// Side length for square RoIs.
    pub fn m(&self) -> usize {
        self.width
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_boundary(&self, x: usize, y: usize) -> bool {
        self.boundary[y * self.width + x]
    }

    /// Per-pixel membership in B, row-major.
    pub fn boundary_bits(&self) -> &[bool] {
        &self.boundary
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_count
    }

    pub fn interior_count(&self) -> usize {
        self.width * self.height - self.boundary_count
    }

    /// Pixel coordinates `(x, y)` in B.
    pub fn boundary_coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Pixel coordinates `(x, y)` in I.
    pub fn interior_coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.boundary.clone(),
        }
    }
}

/// Pixel `p` is a boundary pixel iff the `(2k+1)²` window centred on `p`,
/// clipped at the grid edge, holds both set and unset target bits.
pub fn boundary_band(target: &BinaryMask, k: usize) -> Result<BandPartition> {
    if k < 1 {
        return Err(Error::InvalidParameter("band window k must be >= 1".into()));
    }
    let (w, h) = target.dims();
    let sat = SummedArea::new(w, h, &target.bits);
    let mut boundary = vec![false; w * h];
    let mut boundary_count = 0;
    for y in 0..h {
        let (wy0, wy1) = (y.saturating_sub(k), (y + k + 1).min(h));
        for x in 0..w {
            let (wx0, wx1) = (x.saturating_sub(k), (x + k + 1).min(w));
            let set = sat.count(wx0, wy0, wx1, wy1) as usize;
            let area = (wx1 - wx0) * (wy1 - wy0);
            if set > 0 && set < area {
                boundary[y * w + x] = true;
                boundary_count += 1;
            }
        }
    }
    Ok(BandPartition {
        width: w,
        height: h,
        k,
        boundary,
        boundary_count,
    })
}

/// Square grid of reals in `[0, 1]`, row-major. Used for RoI ink densities
/// and mask coverage fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    side: usize,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: (side, side),
                actual: (values.len(), 1),
            });
        }
        Ok(Self { side, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.side + x]
    }
}

/// Overlap of each source pixel with each of `m` equal output cells along one
/// axis of length `len`, in units of `1 / m` pixel. Every cell sums to `len`.
fn axis_weights(len: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
    (0..m)
        .map(|cell| {
            let (c0, c1) = (cell * len, (cell + 1) * len);
            let first = c0 / m;
            let last = (c1 - 1) / m;
            (first..=last)
                .filter_map(|p| {
                    let (p0, p1) = (p * m, (p + 1) * m);
                    let overlap = c1.min(p1).saturating_sub(c0.max(p0));
                    (overlap > 0).then_some((p, overlap))
                })
                .collect()
        })
        .collect()
}

fn area_average(
    width: usize,
    height: usize,
    bbox: &BBox,
    m: usize,
    sample: impl Fn(usize, usize) -> f64,
) -> Result<DensityGrid> {
    if m == 0 {
        return Err(Error::InvalidParameter("RoI side m must be >= 1".into()));
    }
    if !bbox.fits_in(width, height) {
        return Err(Error::OutOfBounds {
            bbox: *bbox,
            width,
            height,
        });
    }
    let (bw, bh) = (bbox.width(), bbox.height());
    let wx = axis_weights(bw, m);
    let wy = axis_weights(bh, m);
    let norm = (bw * bh) as f64;
    let mut values = Vec::with_capacity(m * m);
    for row in &wy {
        for col in &wx {
            let mut acc = 0.0;
            for &(py, oy) in row {
                for &(px, ox) in col {
                    acc += (oy * ox) as f64 * sample(bbox.x0 + px, bbox.y0 + py);
                }
            }
            values.push((acc / norm).clamp(0.0, 1.0));
        }
    }
    Ok(DensityGrid { side: m, values })
}

/// Area-averaged downsampling of the boxed region to an `m × m` ink-density
/// grid.
pub fn crop_resample(grid: &PixelGrid, bbox: &BBox, m: usize) -> Result<DensityGrid> {
    area_average(grid.width, grid.height, bbox, m, |x, y| {
        1.0 - grid.get(x, y) as f64 / 255.0
    })
}

/// Fraction of each of the `m × m` cells covered by set mask bits.
pub fn mask_coverage(mask: &BinaryMask, bbox: &BBox, m: usize) -> Result<DensityGrid> {
    area_average(mask.width, mask.height, bbox, m, |x, y| {
        mask.get(x, y) as u8 as f64
    })
}

/// Nearest-neighbour placement of an `m × m` RoI mask onto the box extent of
/// a `page_w × page_h` page; pixels outside the box stay unset.
pub fn upsample_mask(
    roi_mask: &BinaryMask,
    bbox: &BBox,
    page_w: usize,
    page_h: usize,
) -> Result<BinaryMask> {
    if !bbox.fits_in(page_w, page_h) {
        return Err(Error::OutOfBounds {
            bbox: *bbox,
            width: page_w,
            height: page_h,
        });
    }
    let (mw, mh) = roi_mask.dims();
    let (bw, bh) = (bbox.width(), bbox.height());
    let mut out = BinaryMask::empty(page_w, page_h);
    for dy in 0..bh {
        let sy = dy * mh / bh;
        for dx in 0..bw {
            let sx = dx * mw / bw;
            if roi_mask.get(sx, sy) {
                out.set(bbox.x0 + dx, bbox.y0 + dy, true);
            }
        }
    }
    Ok(out)
}

/// Paint every pixel under `region` white.
pub fn apply_white_mask(grid: &PixelGrid, region: &BinaryMask) -> Result<PixelGrid> {
    if grid.dims() != region.dims() {
        return Err(Error::DimensionMismatch {
            expected: grid.dims(),
            actual: region.dims(),
        });
    }
    let values = grid
        .values
        .iter()
        .zip(&region.bits)
        .map(|(&v, &r)| if r { WHITE } else { v })
        .collect();
    Ok(PixelGrid {
        width: grid.width,
        height: grid.height,
        values,
    })
}

/// Write a binary PGM (P5, maxval 255).
pub fn write_pgm<W: Write>(grid: &PixelGrid, mut out: W) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", grid.width, grid.height)?;
    out.write_all(&grid.values)
}

fn pgm_token<R: BufRead>(input: &mut R) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = input
            .read(&mut byte)
            .map_err(|e| Error::malformed("pgm", e.to_string()))?;
        if n == 0 {
            break;
        }
        let c = byte[0];
        if c == b'#' && token.is_empty() {
            let mut skip = Vec::new();
            input
                .read_until(b'\n', &mut skip)
                .map_err(|e| Error::malformed("pgm", e.to_string()))?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(c);
    }
    if token.is_empty() {
        return Err(Error::malformed("pgm", "truncated header"));
    }
    String::from_utf8(token).map_err(|e| Error::malformed("pgm", e.to_string()))
}

/// Read a binary PGM (P5) with maxval 255.
pub fn read_pgm<R: BufRead>(mut input: R) -> Result<PixelGrid> {
    let magic = pgm_token(&mut input)?;
    if magic != "P5" {
        return Err(Error::malformed("pgm", format!("expected P5, got {magic}")));
    }
    let mut num = |name: &str| -> Result<usize> {
        let t = pgm_token(&mut input)?;
        t.parse()
            .map_err(|_| Error::malformed("pgm", format!("bad {name} `{t}`")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(Error::malformed("pgm", format!("maxval {maxval} unsupported")));
    }
    let mut values = vec![0u8; width * height];
    input
        .read_exact(&mut values)
        .map_err(|e| Error::malformed("pgm", format!("pixel data: {e}")))?;
    PixelGrid::new(width, height, values)
}
