//! Synthetic newspaper pages with pixel-exact ground truth, and the oracle
//! OCR that reads them back through a visibility mask.

pub mod font;
mod io;
mod layout;
mod ocr;
mod words;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::raster::{BBox, BinaryMask, PixelGrid};

pub use io::{load_corpus, load_page, save_corpus, save_page, ANNOTATION_SCHEMA_VERSION};
pub use layout::{generate_corpus, generate_page, LayoutSpec, Metrics as LayoutMetrics};
pub use ocr::{oracle_ocr, OcrToken, CORRUPT_CHAR, DROP_FRACTION, VERBATIM_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Headline,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Article,
    Ad,
    Header,
    Headline,
    Illustration,
}

/// Rectilinear region: a union of pairwise-disjoint rectangles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub rects: Vec<BBox>,
}

impl Region {
    pub fn rect(b: BBox) -> Self {
        Self { rects: vec![b] }
    }

    pub fn bounds(&self) -> BBox {
        BBox::hull_of(&self.rects).expect("region has at least one rectangle")
    }

    pub fn area(&self) -> usize {
        self.rects.iter().map(BBox::area).sum()
    }

    pub fn to_mask(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_rects(width, height, &self.rects)
    }

    pub fn intersection_area(&self, b: &BBox) -> usize {
        self.rects.iter().map(|r| r.intersection_area(b)).sum()
    }

    pub fn contains_box(&self, b: &BBox) -> bool {
        self.intersection_area(b) == b.area()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.rects.iter().any(|r| r.contains(x, y))
    }
}

/// One rendered word and where it sits on the page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordBox {
    pub text: String,
    pub bbox: BBox,
    pub font_scale: usize,
    pub article_id: u32,
    pub role: Role,
}

impl WordBox {
    /// Cell of the `i`-th character.
    pub fn char_cell(&self, i: usize) -> BBox {
        let w = font::cell_w(self.font_scale);
        BBox::at(self.bbox.x0 + i * w, self.bbox.y0, w, font::cell_h(self.font_scale))
    }

    pub fn glyph_height(&self) -> usize {
        self.bbox.height()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementAnnotation {
    pub id: u32,
    pub category: Category,
    /// Enclosing article for headlines and illustrations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<u32>,
    pub region: Region,
}

/// Ground-truth text of one article; body words are single-space separated.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArticleText {
    pub headline: String,
    pub body: String,
}

impl ArticleText {
    /// Headline followed by body.
    pub fn full(&self) -> String {
        match (self.headline.is_empty(), self.body.is_empty()) {
            (true, _) => self.body.clone(),
            (false, true) => self.headline.clone(),
            (false, false) => format!("{} {}", self.headline, self.body),
        }
    }
}

/// A generated page: raster plus everything needed to score a digitization.
#[derive(Debug, Clone, PartialEq)]
pub struct PageRecord {
    pub id: String,
    pub grid: PixelGrid,
    pub annotations: Vec<ElementAnnotation>,
    pub words: Vec<WordBox>,
    pub article_texts: BTreeMap<u32, ArticleText>,
    pub masthead: String,
    pub date: String,
    pub seed: u64,
}

impl PageRecord {
    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    /// Article annotations in id order (which is also layout reading order).
    pub fn articles(&self) -> impl Iterator<Item = &ElementAnnotation> {
        let mut v: Vec<_> = self
            .annotations
            .iter()
            .filter(|a| a.category == Category::Article)
            .collect();
        v.sort_by_key(|a| a.id);
        v.into_iter()
    }

    pub fn article(&self, id: u32) -> Option<&ElementAnnotation> {
        self.annotations
            .iter()
            .find(|a| a.category == Category::Article && a.id == id)
    }

    pub fn children(&self, article_id: u32, category: Category) -> impl Iterator<Item = &ElementAnnotation> {
        self.annotations
            .iter()
            .filter(move |a| a.category == category && a.parent == Some(article_id))
    }

    pub fn article_words(&self, article_id: u32) -> impl Iterator<Item = &WordBox> {
        self.words.iter().filter(move |w| w.article_id == article_id)
    }

    /// Bounding box of an article's word boxes.
    pub fn tight_word_box(&self, article_id: u32) -> Option<BBox> {
        BBox::hull_of(self.article_words(article_id).map(|w| &w.bbox))
    }

    pub fn article_mask(&self, article_id: u32) -> Option<BinaryMask> {
        self.article(article_id)
            .map(|a| a.region.to_mask(self.width(), self.height()))
    }
}
