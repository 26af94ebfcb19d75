//! Ground-truth refinement: snapping detected article boxes to the word
//! boxes they contain, and splitting headline from body by glyph height.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BBox;
use crate::synthcorpus::{Category, ElementAnnotation, Region, WordBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Fraction of a word's area that must fall inside the predicted box.
    pub containment_threshold: f64,
    /// A word is tall when its height reaches this multiple of the median.
    pub headline_ratio: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            containment_threshold: 0.5,
            headline_ratio: 1.5,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.containment_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "containment_threshold must be in (0, 1], got {t}"
            )));
        }
        if !(self.headline_ratio > 0.0 && self.headline_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "headline_ratio must be positive, got {}",
                self.headline_ratio
            )));
        }
        Ok(())
    }
}

fn qualifies(predicted: &BBox, word: &BBox, threshold: f64) -> bool {
    predicted.intersection_area(word) as f64 >= threshold * word.area() as f64
}

fn qualifying_hull(predicted: &BBox, words: &[WordBox], threshold: f64) -> Option<BBox> {
    BBox::hull_of(
        words
            .iter()
            .map(|w| &w.bbox)
            .filter(|b| qualifies(predicted, b, threshold)),
    )
}

/// Hull of the word boxes that sit mostly inside `predicted`.
/// `None` is the empty-refinement signal: no word qualified.
///
/// The hull can reach past `predicted` and so admit further words; the
/// hull is recomputed until it stops growing, which makes the result a
/// fixed point of the refinement.
pub fn refine_box(predicted: &BBox, words: &[WordBox], cfg: &RefineConfig) -> Option<BBox> {
    let mut current = qualifying_hull(predicted, words, cfg.containment_threshold)?;
    loop {
        let next = qualifying_hull(&current, words, cfg.containment_threshold)
            .expect("words inside the hull still qualify");
        if next == current {
            return Some(current);
        }
        current = next;
    }
}

/// Headline flag per box. Tall boxes (height ≥ `ratio` × lower median
/// height) count only in the first contiguous tall run in (y, x) order.
pub fn classify_by_height(boxes: &[BBox], ratio: f64) -> Vec<bool> {
    let mut flags = vec![false; boxes.len()];
    if boxes.is_empty() {
        return flags;
    }
    let mut heights: Vec<usize> = boxes.iter().map(BBox::height).collect();
    heights.sort_unstable();
    let median = heights[(heights.len() - 1) / 2] as f64;
    let tall = |b: &BBox| b.height() as f64 >= ratio * median;

    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by_key(|&i| (boxes[i].y0, boxes[i].x0));
    let run = order
        .iter()
        .skip_while(|&&i| !tall(&boxes[i]))
        .take_while(|&&i| tall(&boxes[i]));
    for &i in run {
        flags[i] = true;
    }
    flags
}

/// Indices of headline and body words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeadlineSplit {
    pub headline: Vec<usize>,
    pub body: Vec<usize>,
}

pub fn classify_headline(words: &[WordBox], cfg: &RefineConfig) -> HeadlineSplit {
    let boxes: Vec<BBox> = words.iter().map(|w| w.bbox).collect();
    let mut split = HeadlineSplit::default();
    for (i, is_head) in classify_by_height(&boxes, cfg.headline_ratio).into_iter().enumerate() {
        if is_head {
            split.headline.push(i)
        } else {
            split.body.push(i)
        }
    }
    split
}

/// Annotations derived from detections, plus the indices of detections
/// whose refinement came back empty (those keep their original box).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labeling {
    pub annotations: Vec<ElementAnnotation>,
    pub unrefined: Vec<usize>,
}

/// Refine each detection, then split its words into headline and body.
/// Article `i` gets id `i`; headline annotations follow with parents set.
pub fn label_regions(detected: &[(BBox, f64)], words: &[WordBox], cfg: &RefineConfig) -> Labeling {
    let mut out = Labeling::default();
    let mut headlines = Vec::new();
    let n = detected.len() as u32;
    for (i, (predicted, _score)) in detected.iter().enumerate() {
        let region = match refine_box(predicted, words, cfg) {
            Some(b) => b,
            None => {
                out.unrefined.push(i);
                *predicted
            }
        };
        out.annotations.push(ElementAnnotation {
            id: i as u32,
            category: Category::Article,
            parent: None,
            region: Region::rect(region),
        });
        let inside: Vec<WordBox> = words
            .iter()
            .filter(|w| qualifies(&region, &w.bbox, cfg.containment_threshold))
            .cloned()
            .collect();
        let split = classify_headline(&inside, cfg);
        if let Some(head) = BBox::hull_of(split.headline.iter().map(|&j| &inside[j].bbox)) {
            headlines.push(ElementAnnotation {
                id: n + headlines.len() as u32,
                category: Category::Headline,
                parent: Some(i as u32),
                region: Region::rect(head),
            });
        }
    }
    out.annotations.extend(headlines);
    out
}
