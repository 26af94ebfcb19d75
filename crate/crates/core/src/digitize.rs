//! Pipeline tail: per-article text extraction from an instance mask,
//! reading order, assembly and accessible HTML / Markdown output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BBox, BinaryMask, PixelGrid, WHITE};
use crate::refine::{classify_headline, RefineConfig};
use crate::synthcorpus::{oracle_ocr, Category, OcrToken, PageRecord, WordBox};

pub const TEMPLATE_VERSION: u32 = 1;

/// Smallest side of a solid block treated as an illustration.
pub const MIN_ILLUSTRATION_SIDE: usize = 32;

/// Tokens grouped as paragraphs of lines of indices into the input.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReadingOrder {
    pub paragraphs: Vec<Vec<Vec<usize>>>,
}

impl ReadingOrder {
    pub fn flat(&self) -> Vec<usize> {
        self.paragraphs.iter().flatten().flatten().copied().collect()
    }
}

/// Intervals `[lo, hi)` from `items`, merged where the gap between
/// neighbours is at most `max_gap`. Returns groups of item indices.
fn split_on_gaps(items: &[usize], interval: impl Fn(usize) -> (usize, usize), max_gap: usize) -> Vec<Vec<usize>> {
    let mut sorted = items.to_vec();
    sorted.sort_by_key(|&i| (interval(i).0, i));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut reach = 0;
    for i in sorted {
        let (lo, hi) = interval(i);
        match groups.last_mut() {
            Some(g) if lo <= reach + max_gap => {
                g.push(i);
                reach = reach.max(hi);
            }
            _ => {
                groups.push(vec![i]);
                reach = hi;
            }
        }
    }
    groups
}

/// Recursive cut. A top band set in larger type than everything below it
/// (masthead, headline) is read first; otherwise columns (a horizontal gap
/// wider than one glyph cell) come before the first blank vertical gap.
/// Leaves are sorted by (y, x).
fn order_into(boxes: &[BBox], items: Vec<usize>, out: &mut Vec<usize>) {
    if items.len() <= 1 {
        out.extend(items);
        return;
    }
    let mut bands = split_on_gaps(&items, |i| (boxes[i].y0, boxes[i].y1), 0);
    let rest_min_h = |bands: &[Vec<usize>]| {
        bands[1..].iter().flatten().map(|&i| boxes[i].height()).min().unwrap_or(0)
    };
    if bands.len() > 1 && bands[0].iter().all(|&i| boxes[i].height() > rest_min_h(&bands)) {
        let top = bands.remove(0);
        order_into(boxes, top, out);
        order_into(boxes, bands.concat(), out);
        return;
    }
    let min_h = items.iter().map(|&i| boxes[i].height()).min().unwrap_or(8);
    let cell = (min_h * 6 / 8).max(1);
    let columns = split_on_gaps(&items, |i| (boxes[i].x0, boxes[i].x1), cell);
    if columns.len() > 1 {
        for c in columns {
            order_into(boxes, c, out);
        }
        return;
    }
    // Peel off only the topmost band: the rest may still split into
    // columns once a spanning line is out of the way.
    if bands.len() > 1 {
        let top = bands.remove(0);
        order_into(boxes, top, out);
        order_into(boxes, bands.concat(), out);
        return;
    }
    let mut leaf = items;
    leaf.sort_by_key(|&i| (boxes[i].y0, boxes[i].x0, i));
    out.extend(leaf);
}

/// Column-major, then top-to-bottom, then left-to-right. A new line starts
/// when y moves by more than half a line height; a new paragraph when a
/// line is separated from the previous one by a blank gap.
pub fn reading_order(boxes: &[BBox]) -> ReadingOrder {
    let mut flat = Vec::with_capacity(boxes.len());
    order_into(boxes, (0..boxes.len()).collect(), &mut flat);

    let mut paragraphs: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut prev: Option<BBox> = None;
    let mut line_bottom = 0;
    for i in flat {
        let b = boxes[i];
        match prev {
            Some(p) if b.y0.abs_diff(p.y0) * 2 <= p.height() => {
                paragraphs.last_mut().unwrap().last_mut().unwrap().push(i);
            }
            Some(p) if b.y0 < line_bottom + p.height() / 2 => {
                // Next line, or the top of the next column.
                paragraphs.last_mut().unwrap().push(vec![i]);
            }
            _ => paragraphs.push(vec![vec![i]]),
        }
        line_bottom = b.y1;
        prev = Some(b);
    }
    ReadingOrder { paragraphs }
}

/// Tokens in reading order.
pub fn ordered_tokens<S: Clone>(tokens: &[(S, BBox)]) -> Vec<S> {
    let boxes: Vec<BBox> = tokens.iter().map(|t| t.1).collect();
    reading_order(&boxes)
        .flat()
        .into_iter()
        .map(|i| tokens[i].0.clone())
        .collect()
}

/// Solid rectangles of uniform non-white intensity, at least
/// [`MIN_ILLUSTRATION_SIDE`] on each side.
pub fn detect_illustrations(grid: &PixelGrid) -> Vec<BBox> {
    let (w, h) = grid.dims();
    let mut seen = vec![false; w * h];
    let mut found = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        let v = grid.values()[start];
        if seen[start] || v == WHITE {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut count = 0usize;
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            count += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
            let mut visit = |q: usize| {
                if !seen[q] && grid.values()[q] == v {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        let (bw, bh) = (x1 - x0, y1 - y0);
        if bw >= MIN_ILLUSTRATION_SIDE && bh >= MIN_ILLUSTRATION_SIDE && count == bw * bh {
            found.push(BBox::at(x0, y0, bw, bh));
        }
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IllustrationSource {
    /// Use the page's illustration annotations.
    #[default]
    Annotations,
    /// Detect solid blocks in the raster.
    Detect,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub refine: RefineConfig,
    pub illustrations: IllustrationSource,
}

/// One digitized article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleDoc {
    pub id: u32,
    pub headline: String,
    /// No headline text was recovered.
    pub headline_missing: bool,
    /// Body paragraphs, each a single-space separated token string.
    pub body: Vec<String>,
    pub page_index: usize,
    pub order_index: usize,
    /// The instance mask was empty or exposed no text.
    pub empty: bool,
    /// Bounds of the instance mask; drives assembly order.
    pub anchor: Option<BBox>,
}

impl ArticleDoc {
    /// Headline followed by body, single-space separated.
    pub fn text(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if !self.headline.is_empty() {
            parts.push(&self.headline);
        }
        parts.extend(self.body.iter().map(String::as_str).filter(|p| !p.is_empty()));
        parts.join(" ")
    }
}

/// An [`ArticleDoc`] together with the tokens it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub doc: ArticleDoc,
    pub headline_tokens: Vec<OcrToken>,
    pub body_tokens: Vec<OcrToken>,
}

impl Extraction {
    pub fn tokens(&self) -> impl Iterator<Item = &OcrToken> {
        self.headline_tokens.iter().chain(&self.body_tokens)
    }
}

fn join(tokens: &[OcrToken]) -> String {
    tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Extract one article from the page region selected by `instance`.
pub fn extract_article_tokens(
    page: &PageRecord,
    instance: &BinaryMask,
    id: u32,
    page_index: usize,
    cfg: &ExtractConfig,
) -> Result<Extraction> {
    if instance.dims() != page.grid.dims() {
        return Err(Error::DimensionMismatch {
            expected: page.grid.dims(),
            actual: instance.dims(),
        });
    }
    let anchor = instance.bounds();
    let empty_doc = |anchor| ArticleDoc {
        id,
        headline: String::new(),
        headline_missing: true,
        body: Vec::new(),
        page_index,
        order_index: 0,
        empty: true,
        anchor,
    };
    let Some(bounds) = anchor else {
        return Ok(Extraction {
            doc: empty_doc(None),
            headline_tokens: Vec::new(),
            body_tokens: Vec::new(),
        });
    };

    let visible_words: Vec<WordBox> = page
        .words
        .iter()
        .filter(|w| w.bbox.intersect(&bounds).is_some() && instance.count_in(&w.bbox) > 0)
        .cloned()
        .collect();
    let split = classify_headline(&visible_words, &cfg.refine);
    let headline_box = BBox::hull_of(split.headline.iter().map(|&i| &visible_words[i].bbox));

    let (w, h) = page.grid.dims();
    let mut masked = BinaryMask::empty(w, h);
    if let Some(b) = headline_box {
        masked.fill_rect(&b, true);
    }
    let illustrations: Vec<BBox> = match cfg.illustrations {
        IllustrationSource::Annotations => page
            .annotations
            .iter()
            .filter(|a| a.category == Category::Illustration)
            .flat_map(|a| a.region.rects.iter().copied())
            .collect(),
        IllustrationSource::Detect => detect_illustrations(&page.grid),
    };
    for b in illustrations.iter().filter(|b| b.intersect(&bounds).is_some()) {
        masked.fill_rect(b, true);
    }

    let body_visible = instance.and_not(&masked)?;
    let body_tokens = oracle_ocr(page, &body_visible)?;
    let headline_tokens = match headline_box {
        Some(b) => {
            let mut region = BinaryMask::empty(w, h);
            region.fill_rect(&b, true);
            oracle_ocr(page, &instance.and(&region)?)?
        }
        None => Vec::new(),
    };

    let boxes: Vec<BBox> = body_tokens.iter().map(|t| t.bbox).collect();
    let body: Vec<String> = reading_order(&boxes)
        .paragraphs
        .iter()
        .map(|para| {
            para.iter()
                .flatten()
                .map(|&i| body_tokens[i].text.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let headline = join(&headline_tokens);
    let empty = headline_tokens.is_empty() && body_tokens.is_empty();
    Ok(Extraction {
        doc: ArticleDoc {
            id,
            headline_missing: headline.is_empty(),
            headline,
            body,
            page_index,
            order_index: 0,
            empty,
            anchor,
        },
        headline_tokens,
        body_tokens,
    })
}

pub fn extract_article(
    page: &PageRecord,
    instance: &BinaryMask,
    id: u32,
    page_index: usize,
    cfg: &ExtractConfig,
) -> Result<ArticleDoc> {
    extract_article_tokens(page, instance, id, page_index, cfg).map(|e| e.doc)
}

/// Assembled document for one edition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsDoc {
    pub masthead: String,
    pub date: String,
    pub articles: Vec<ArticleDoc>,
}

/// Anchors whose left edges lie within this many pixels share a column.
const COLUMN_TOLERANCE: usize = 32;

/// Order articles by page, then column-major by the anchor's top-left
/// corner, and number them.
pub fn assemble(masthead: &str, date: &str, mut articles: Vec<ArticleDoc>) -> NewsDoc {
    let key = |a: &ArticleDoc| a.anchor.map(|b| (b.x0, b.y0)).unwrap_or((usize::MAX, usize::MAX));
    articles.sort_by_key(|a| (a.page_index, key(a), a.id));

    // Column buckets per page: a new bucket when x0 moves past the
    // bucket's first anchor by more than the tolerance.
    let mut ranked: Vec<(usize, usize, usize, usize, u32, usize)> = Vec::with_capacity(articles.len());
    let mut bucket = 0;
    let mut bucket_x = None;
    let mut page = None;
    for (i, a) in articles.iter().enumerate() {
        let (x, y) = key(a);
        if page != Some(a.page_index) {
            page = Some(a.page_index);
            bucket_x = None;
        }
        match bucket_x {
            Some(bx) if x <= bx + COLUMN_TOLERANCE => {}
            _ => {
                bucket += 1;
                bucket_x = Some(x);
            }
        }
        ranked.push((a.page_index, bucket, y, x, a.id, i));
    }
    ranked.sort();
    let mut slots: Vec<Option<ArticleDoc>> = articles.into_iter().map(Some).collect();
    let articles = ranked
        .into_iter()
        .enumerate()
        .map(|(n, r)| {
            let mut a = slots[r.5].take().expect("each article ranked once");
            a.order_index = n;
            a
        })
        .collect();
    NewsDoc {
        masthead: masthead.to_string(),
        date: date.to_string(),
        articles,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Html,
    Markdown,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Html => "html",
            Format::Markdown => "md",
        }
    }
}

fn title(a: &ArticleDoc) -> String {
    if a.headline_missing || a.headline.is_empty() {
        format!("[Untitled article {}]", a.order_index + 1)
    } else {
        a.headline.clone()
    }
}

fn anchor_id(a: &ArticleDoc) -> String {
    format!("article-{}", a.order_index + 1)
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn escape_markdown(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        if matches!(ch, '\\' | '[' | ']' | '*' | '_' | '#' | '`' | '<' | '>') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

fn emit_html(doc: &NewsDoc) -> String {
    let mut s = String::new();
    let mast = escape_html(&doc.masthead);
    let date = escape_html(&doc.date);
    s.push_str("<!DOCTYPE html>\n");
    let _ = writeln!(s, "<!-- newsdoc-template v{TEMPLATE_VERSION} -->");
    s.push_str("<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(s, "<title>{mast}, {date}</title>");
    s.push_str("</head>\n<body>\n<header>\n");
    let _ = writeln!(s, "<h1>{mast}</h1>");
    let _ = writeln!(s, "<p><time datetime=\"{date}\">{date}</time></p>");
    s.push_str("</header>\n<nav aria-label=\"Table of contents\">\n<h2>Contents</h2>\n<ol>\n");
    for a in &doc.articles {
        let _ = writeln!(s, "<li><a href=\"#{}\">{}</a></li>", anchor_id(a), escape_html(&title(a)));
    }
    s.push_str("</ol>\n</nav>\n<main>\n");
    for a in &doc.articles {
        let id = anchor_id(a);
        let _ = writeln!(s, "<section id=\"{id}\" aria-labelledby=\"{id}-title\">");
        let _ = writeln!(s, "<h2 id=\"{id}-title\">{}</h2>", escape_html(&title(a)));
        for p in a.body.iter().filter(|p| !p.is_empty()) {
            let _ = writeln!(s, "<p>{}</p>", escape_html(p));
        }
        s.push_str("</section>\n");
    }
    s.push_str("</main>\n</body>\n</html>\n");
    s
}

fn emit_markdown(doc: &NewsDoc) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<!-- newsdoc-template v{TEMPLATE_VERSION} -->\n");
    let _ = writeln!(s, "# {}\n", escape_markdown(&doc.masthead));
    let _ = writeln!(s, "{}\n", escape_markdown(&doc.date));
    s.push_str("## Contents\n\n");
    for a in &doc.articles {
        let _ = writeln!(s, "{}. [{}](#{})", a.order_index + 1, escape_markdown(&title(a)), anchor_id(a));
    }
    for a in &doc.articles {
        let _ = writeln!(s, "\n<a id=\"{}\"></a>\n", anchor_id(a));
        let _ = writeln!(s, "## {}", escape_markdown(&title(a)));
        for p in a.body.iter().filter(|p| !p.is_empty()) {
            let _ = writeln!(s, "\n{}", escape_markdown(p));
        }
    }
    s
}

pub fn emit(doc: &NewsDoc, format: Format) -> String {
    match format {
        Format::Html => emit_html(doc),
        Format::Markdown => emit_markdown(doc),
    }
}

/// Digitize a page from one instance mask per article id.
pub fn digitize_page(
    page: &PageRecord,
    page_index: usize,
    instances: &[(u32, BinaryMask)],
    cfg: &ExtractConfig,
) -> Result<NewsDoc> {
    let docs = instances
        .iter()
        .map(|(id, mask)| extract_article(page, mask, *id, page_index, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(&page.masthead, &page.date, docs))
}

/// Ground-truth instance masks of a page, keyed by article id.
pub fn ground_truth_instances(page: &PageRecord) -> Vec<(u32, BinaryMask)> {
    page.articles()
        .map(|a| (a.id, a.region.to_mask(page.width(), page.height())))
        .collect()
}
