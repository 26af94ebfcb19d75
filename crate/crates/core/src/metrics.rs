//! Edit-distance error rates, boundary text extraction and the AP family.

use serde::{Deserialize, Serialize};

use crate::digitize::reading_order;
use crate::error::{Error, Result};
use crate::raster::{boundary_band, BBox, BinaryMask, SummedArea};
use crate::synthcorpus::{OcrToken, PageRecord};

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Error counts for one reference/hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub word_errors: usize,
    pub ref_words: usize,
    pub char_errors: usize,
    pub ref_chars: usize,
}

impl ErrorCounts {
    pub fn add(&mut self, other: &ErrorCounts) {
        self.word_errors += other.word_errors;
        self.ref_words += other.ref_words;
        self.char_errors += other.char_errors;
        self.ref_chars += other.ref_chars;
    }

    pub fn wer(&self) -> f64 {
        rate(self.word_errors, self.ref_words)
    }

    pub fn cer(&self) -> f64 {
        rate(self.char_errors, self.ref_chars)
    }

    /// Empty reference but a non-empty hypothesis.
    pub fn degenerate(&self) -> bool {
        self.ref_words == 0 && self.word_errors > 0
    }
}

/// `errors / len`; with an empty reference the error count itself.
fn rate(errors: usize, len: usize) -> f64 {
    if len == 0 {
        errors as f64
    } else {
        errors as f64 / len as f64
    }
}

/// Word and character error counts. Words are whitespace tokens; the
/// character sequence is the tokens joined by single spaces.
pub fn error_counts(reference: &str, hypothesis: &str) -> ErrorCounts {
    let rw: Vec<&str> = reference.split_whitespace().collect();
    let hw: Vec<&str> = hypothesis.split_whitespace().collect();
    let rc: Vec<char> = rw.join(" ").chars().collect();
    let hc: Vec<char> = hw.join(" ").chars().collect();
    ErrorCounts {
        word_errors: edit_distance(&rw, &hw),
        ref_words: rw.len(),
        char_errors: edit_distance(&rc, &hc),
        ref_chars: rc.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub wer: f64,
    pub cer: f64,
    pub degenerate: bool,
}

pub fn wer_cer(reference: &str, hypothesis: &str) -> ErrorRates {
    let c = error_counts(reference, hypothesis);
    ErrorRates {
        wer: c.wer(),
        cer: c.cer(),
        degenerate: c.degenerate(),
    }
}

/// Corpus-pooled error rates: totals are summed before dividing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub wer: f64,
    pub cer: f64,
    pub boundary_wer: f64,
    pub boundary_cer: f64,
    pub overall: ErrorCounts,
    pub boundary: ErrorCounts,
}

impl WerReport {
    pub fn from_counts(overall: ErrorCounts, boundary: ErrorCounts) -> Self {
        Self {
            wer: overall.wer(),
            cer: overall.cer(),
            boundary_wer: boundary.wer(),
            boundary_cer: boundary.cer(),
            overall,
            boundary,
        }
    }
}

/// Reference and hypothesis restricted to the boundary band.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TextPair {
    pub reference: String,
    pub hypothesis: String,
}

fn in_reading_order(items: Vec<(&str, BBox)>) -> String {
    let boxes: Vec<BBox> = items.iter().map(|t| t.1).collect();
    reading_order(&boxes)
        .flat()
        .into_iter()
        .map(|i| items[i].0)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Page-resolution band `B(k_eval)` of `gt_region`, as a summed-area table.
/// Only a window around the region is examined: beyond `k_eval` pixels
/// from the region no pixel can be in the band.
fn band_table(gt_region: &BinaryMask, k_eval: usize) -> Result<Option<(BBox, SummedArea)>> {
    let Some(bounds) = gt_region.bounds() else {
        return Ok(None);
    };
    let (w, h) = gt_region.dims();
    let win = bounds.dilate(k_eval + 1, w, h);
    let mut bits = Vec::with_capacity(win.area());
    for y in win.y0..win.y1 {
        for x in win.x0..win.x1 {
            bits.push(gt_region.get(x, y));
        }
    }
    let crop = BinaryMask::new(win.width(), win.height(), bits)?;
    let band = boundary_band(&crop, k_eval)?;
    Ok(Some((win, SummedArea::new(win.width(), win.height(), band.boundary_bits()))))
}

/// Ground-truth words and OCR tokens touching the band `B(k_eval)` of
/// `gt_region`, each side in reading order.
pub fn boundary_text_pair(
    page: &PageRecord,
    gt_region: &BinaryMask,
    tokens: &[OcrToken],
    k_eval: usize,
) -> Result<TextPair> {
    if k_eval < 1 {
        return Err(Error::InvalidParameter(format!("k_eval must be >= 1, got {k_eval}")));
    }
    if gt_region.dims() != page.grid.dims() {
        return Err(Error::DimensionMismatch {
            expected: page.grid.dims(),
            actual: gt_region.dims(),
        });
    }
    let Some((win, table)) = band_table(gt_region, k_eval)? else {
        return Ok(TextPair::default());
    };
    let touches = |b: &BBox| match b.intersect(&win) {
        Some(i) => table.count(i.x0 - win.x0, i.y0 - win.y0, i.x1 - win.x0, i.y1 - win.y0) > 0,
        None => false,
    };
    let reference = page
        .words
        .iter()
        .filter(|w| touches(&w.bbox))
        .map(|w| (w.text.as_str(), w.bbox))
        .collect();
    let hypothesis = tokens
        .iter()
        .filter(|t| touches(&t.bbox))
        .map(|t| (t.text.as_str(), t.bbox))
        .collect();
    Ok(TextPair {
        reference: in_reading_order(reference),
        hypothesis: in_reading_order(hypothesis),
    })
}

/// A box or a page mask.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Box(BBox),
    Mask(BinaryMask),
}

impl Shape {
    pub fn area(&self) -> usize {
        match self {
            Shape::Box(b) => b.area(),
            Shape::Mask(m) => m.count(),
        }
    }

    fn bounds(&self) -> Option<BBox> {
        match self {
            Shape::Box(b) => Some(*b),
            Shape::Mask(m) => m.bounds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub shape: Shape,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub shape: Shape,
    pub area: usize,
}

impl GroundTruth {
    pub fn new(shape: Shape) -> Self {
        let area = shape.area();
        Self { shape, area }
    }
}

/// Detections and ground truths of one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageEval {
    pub detections: Vec<Detection>,
    pub ground_truths: Vec<GroundTruth>,
}

fn shape_iou(a: &Shape, b: &Shape) -> Result<f64> {
    match (a, b) {
        (Shape::Box(a), Shape::Box(b)) => Ok(crate::raster::iou(a, b)),
        _ => {
            let (ma, mb) = (to_mask_like(a, b)?, to_mask_like(b, a)?);
            let (ca, cb) = (ma.count(), mb.count());
            if ca + cb == 0 {
                return Ok(1.0);
            }
            let inter = match (a.bounds(), b.bounds()) {
                (Some(ba), Some(bb)) => match ba.intersect(&bb) {
                    Some(r) => (r.y0..r.y1)
                        .map(|y| (r.x0..r.x1).filter(|&x| ma.get(x, y) && mb.get(x, y)).count())
                        .sum(),
                    None => 0,
                },
                _ => 0,
            };
            Ok(inter as f64 / (ca + cb - inter) as f64)
        }
    }
}

fn to_mask_like<'a>(s: &'a Shape, other: &Shape) -> Result<std::borrow::Cow<'a, BinaryMask>> {
    use std::borrow::Cow;
    match (s, other) {
        (Shape::Mask(m), Shape::Mask(o)) if m.dims() != o.dims() => Err(Error::DimensionMismatch {
            expected: o.dims(),
            actual: m.dims(),
        }),
        (Shape::Mask(m), _) => Ok(Cow::Borrowed(m)),
        (Shape::Box(b), Shape::Mask(o)) => {
            Ok(Cow::Owned(BinaryMask::from_rects(o.width(), o.height(), &[*b])))
        }
        (Shape::Box(_), Shape::Box(_)) => unreachable!("box pairs use box IoU"),
    }
}

pub const IOU_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
pub const MEDIUM_AREA: (usize, usize) = (32 * 32, 96 * 96);
pub const LARGE_MIN_AREA: usize = 96 * 96;
pub const RECALL_POINTS: usize = 101;

/// Precision-recall curve at one IoU threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub iou_threshold: f64,
    pub ap: f64,
    /// Raw (precision, recall) after each ranked detection.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Interpolated precision at recall 0.00, 0.01, …, 1.00.
    pub interpolated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct APReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    /// `None` when no ground truth falls in the band.
    pub ap_m: Option<f64>,
    pub ap_l: Option<f64>,
    pub num_ground_truths: usize,
    pub num_detections: usize,
    pub curves: Vec<PrCurve>,
}

#[derive(Clone, Copy)]
enum Outcome {
    Tp,
    Fp,
    Ignored,
}

/// Greedy score-ordered matching for one image at one threshold.
/// `ignore_gt[g]` marks ground truths outside the area band; detections
/// matched to them, or unmatched and outside the band, are ignored.
fn match_image(
    order: &[usize],
    ious: &[Vec<f64>],
    ignore_gt: &[bool],
    det_in_band: &[bool],
    threshold: f64,
) -> Vec<(usize, Outcome)> {
    let mut taken = vec![false; ignore_gt.len()];
    let mut out = Vec::with_capacity(order.len());
    for &d in order {
        let mut best: Option<(bool, f64, usize)> = None;
        for (g, &iou) in ious[d].iter().enumerate() {
            if taken[g] || iou < threshold {
                continue;
            }
            // Prefer in-band ground truths, then higher IoU, then lower index.
            let cand = (!ignore_gt[g], iou, g);
            let better = match best {
                None => true,
                Some((bi, bv, _)) => (cand.0, cand.1) > (bi, bv),
            };
            if better {
                best = Some(cand);
            }
        }
        let outcome = match best {
            Some((in_band, _, g)) => {
                taken[g] = true;
                if in_band {
                    Outcome::Tp
                } else {
                    Outcome::Ignored
                }
            }
            None if det_in_band[d] => Outcome::Fp,
            None => Outcome::Ignored,
        };
        out.push((d, outcome));
    }
    out
}

/// 101-point interpolated AP of a ranked TP/FP list against `n_gt`.
fn interpolated_ap(hits: &[bool], n_gt: usize) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tps = Vec::with_capacity(hits.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &h in hits {
        if h {
            tp += 1
        } else {
            fp += 1
        }
        tps.push(tp);
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 });
    }
    // Running maximum of precision from the right.
    let mut envelope = precision.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut interpolated = vec![0.0; RECALL_POINTS];
    if n_gt > 0 {
        let mut idx = 0;
        for (r, slot) in interpolated.iter_mut().enumerate() {
            // First rank whose recall reaches r / 100, compared exactly.
            while idx < tps.len() && tps[idx] * (RECALL_POINTS - 1) < r * n_gt {
                idx += 1;
            }
            if idx < tps.len() {
                *slot = envelope[idx];
            }
        }
    }
    let ap = interpolated.iter().sum::<f64>() / RECALL_POINTS as f64;
    (ap, precision, recall, interpolated)
}

struct Prepared {
    ious: Vec<Vec<f64>>,
    order: Vec<usize>,
}

fn prepare(image: &ImageEval) -> Result<Prepared> {
    for d in &image.detections {
        if !d.score.is_finite() {
            return Err(Error::NonFinite {
                name: "detection score",
                value: d.score,
            });
        }
    }
    let ious = image
        .detections
        .iter()
        .map(|d| {
            image
                .ground_truths
                .iter()
                .map(|g| shape_iou(&d.shape, &g.shape))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..image.detections.len()).collect();
    order.sort_by(|&a, &b| {
        image.detections[b]
            .score
            .total_cmp(&image.detections[a].score)
            .then(a.cmp(&b))
    });
    Ok(Prepared { ious, order })
}

/// AP at each threshold for ground truths with area in `[lo, hi)`.
/// Returns `None` when no ground truth is in the band.
fn band_curves(
    images: &[ImageEval],
    prepared: &[Prepared],
    band: (usize, usize),
) -> Option<Vec<PrCurve>> {
    let in_band = |a: usize| a >= band.0 && a < band.1;
    let n_gt: usize = images
        .iter()
        .map(|im| im.ground_truths.iter().filter(|g| in_band(g.area)).count())
        .sum();
    if n_gt == 0 {
        return None;
    }
    let curves = IOU_THRESHOLDS
        .iter()
        .map(|&t| {
            // (score, image, rank within image, hit)
            let mut ranked: Vec<(f64, usize, usize, bool)> = Vec::new();
            for (i, (im, p)) in images.iter().zip(prepared).enumerate() {
                let ignore: Vec<bool> = im.ground_truths.iter().map(|g| !in_band(g.area)).collect();
                let det_in: Vec<bool> = im.detections.iter().map(|d| in_band(d.shape.area())).collect();
                for (rank, (d, outcome)) in match_image(&p.order, &p.ious, &ignore, &det_in, t)
                    .into_iter()
                    .enumerate()
                {
                    match outcome {
                        Outcome::Tp => ranked.push((im.detections[d].score, i, rank, true)),
                        Outcome::Fp => ranked.push((im.detections[d].score, i, rank, false)),
                        Outcome::Ignored => {}
                    }
                }
            }
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
            let hits: Vec<bool> = ranked.iter().map(|r| r.3).collect();
            let (ap, precision, recall, interpolated) = interpolated_ap(&hits, n_gt);
            PrCurve {
                iou_threshold: t,
                ap,
                precision,
                recall,
                interpolated,
            }
        })
        .collect();
    Some(curves)
}

/// AP family over several images, pooling detections across images
/// after per-image matching.
pub fn ap_suite_images(images: &[ImageEval]) -> Result<APReport> {
    let prepared = images.iter().map(prepare).collect::<Result<Vec<_>>>()?;
    let all = (0, usize::MAX);
    let num_ground_truths = images.iter().map(|im| im.ground_truths.len()).sum();
    let num_detections = images.iter().map(|im| im.detections.len()).sum();
    let mean = |c: &[PrCurve]| c.iter().map(|c| c.ap).sum::<f64>() / c.len() as f64;
    let curves = band_curves(images, &prepared, all).unwrap_or_else(|| {
        IOU_THRESHOLDS
            .iter()
            .map(|&t| PrCurve {
                iou_threshold: t,
                ap: 0.0,
                precision: Vec::new(),
                recall: Vec::new(),
                interpolated: vec![0.0; RECALL_POINTS],
            })
            .collect()
    });
    let ap_m = band_curves(images, &prepared, MEDIUM_AREA).map(|c| mean(&c));
    let ap_l = band_curves(images, &prepared, (LARGE_MIN_AREA, usize::MAX)).map(|c| mean(&c));
    Ok(APReport {
        ap: mean(&curves),
        ap50: curves[0].ap,
        ap75: curves[5].ap,
        ap_m,
        ap_l,
        num_ground_truths,
        num_detections,
        curves,
    })
}

/// AP family for a single image.
pub fn ap_suite(detections: &[Detection], ground_truths: &[GroundTruth]) -> Result<APReport> {
    ap_suite_images(&[ImageEval {
        detections: detections.to_vec(),
        ground_truths: ground_truths.to_vec(),
    }])
}
