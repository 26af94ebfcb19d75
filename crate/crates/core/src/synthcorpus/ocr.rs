use serde::{Deserialize, Serialize};

use super::{PageRecord, Role};
use crate::digitize::reading_order;
use crate::error::{Error, Result};
use crate::raster::{BBox, BinaryMask};

/// Visible fraction at or above which a character is read verbatim.
pub const VERBATIM_FRACTION: f64 = 0.8;
/// Visible fraction at or below which a character is lost.
pub const DROP_FRACTION: f64 = 0.2;
/// Emitted for a partially visible character.
pub const CORRUPT_CHAR: char = '#';

/// One recognized word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrToken {
    pub text: String,
    /// Box of the source word on the page.
    pub bbox: BBox,
    pub article_id: u32,
    pub role: Role,
    /// Whether any character was substituted or dropped.
    pub corrupted: bool,
}

/// Read every word the `visible` mask exposes, degrading characters by
/// their visible fraction. Tokens come back in reading order.
pub fn oracle_ocr(page: &PageRecord, visible: &BinaryMask) -> Result<Vec<OcrToken>> {
    if visible.dims() != page.grid.dims() {
        return Err(Error::DimensionMismatch {
            expected: page.grid.dims(),
            actual: visible.dims(),
        });
    }
    let mut tokens = Vec::new();
    for word in &page.words {
        if visible.count_in(&word.bbox) == 0 {
            continue;
        }
        let mut text = String::with_capacity(word.text.len());
        let mut corrupted = false;
        for (i, ch) in word.text.chars().enumerate() {
            let cell = word.char_cell(i);
            let f = visible.count_in(&cell) as f64 / cell.area() as f64;
            if f >= VERBATIM_FRACTION {
                text.push(ch);
            } else if f > DROP_FRACTION {
                text.push(CORRUPT_CHAR);
                corrupted = true;
            } else {
                corrupted = true;
            }
        }
        if text.is_empty() {
            continue;
        }
        tokens.push(OcrToken {
            text,
            bbox: word.bbox,
            article_id: word.article_id,
            role: word.role,
            corrupted,
        });
    }
    let boxes: Vec<BBox> = tokens.iter().map(|t| t.bbox).collect();
    let order = reading_order(&boxes).flat();
    let mut slots: Vec<Option<OcrToken>> = tokens.into_iter().map(Some).collect();
    Ok(order
        .into_iter()
        .map(|i| slots[i].take().expect("reading order is a permutation"))
        .collect())
}
