use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::font::{self, cell_h, cell_w};
use super::words::{AD_LINES, MASTHEADS, VOCABULARY};
use super::{ArticleText, Category, ElementAnnotation, PageRecord, Region, Role, WordBox};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::raster::{BBox, PixelGrid, INK};

/// Fixed page geometry shared by the generator and its consumers.
pub struct Metrics;

impl Metrics {
    pub const MARGIN: usize = 16;
    /// Horizontal gap between text columns.
    pub const GUTTER: usize = 12;
    /// Vertical gap between stacked elements in a column.
    pub const VGAP: usize = 12;
    pub const HEAD_GAP: usize = 4;
    pub const ILLUSTRATION_GAP: usize = 4;
    pub const BODY_SCALE: usize = 1;
    pub const HEADLINE_SCALE: usize = 2;
    pub const MASTHEAD_SCALE: usize = 3;
    pub const DEFAULT_WIDTH: usize = 640;
    pub const DEFAULT_HEIGHT: usize = 900;
    /// Narrowest text column the generator accepts.
    pub const MIN_COLUMN_WIDTH: usize = 96;
    pub const SPAN_PROBABILITY: f64 = 0.3;
}

fn default_width() -> usize {
    Metrics::DEFAULT_WIDTH
}

fn default_height() -> usize {
    Metrics::DEFAULT_HEIGHT
}

/// Layout parameters for one page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub columns: usize,
    pub articles: usize,
    pub illustration_prob: f64,
    pub seed: u64,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
}

impl LayoutSpec {
    pub fn new(columns: usize, articles: usize, illustration_prob: f64, seed: u64) -> Self {
        Self {
            columns,
            articles,
            illustration_prob,
            seed,
            width: Metrics::DEFAULT_WIDTH,
            height: Metrics::DEFAULT_HEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.columns) {
            return Err(Error::InvalidParameter(format!(
                "columns must be in 2..=5, got {}",
                self.columns
            )));
        }
        if !(3..=12).contains(&self.articles) {
            return Err(Error::InvalidParameter(format!(
                "articles must be in 3..=12, got {}",
                self.articles
            )));
        }
        if !(0.0..=1.0).contains(&self.illustration_prob) {
            return Err(Error::InvalidParameter(format!(
                "illustration_prob must be in [0, 1], got {}",
                self.illustration_prob
            )));
        }
        Ok(())
    }

    fn column_width(&self) -> usize {
        let usable = self
            .width
            .saturating_sub(2 * Metrics::MARGIN + (self.columns - 1) * Metrics::GUTTER);
        usable / self.columns
    }

    fn column_x(&self, c: usize) -> usize {
        Metrics::MARGIN + c * (self.column_width() + Metrics::GUTTER)
    }
}

struct PlacedArticle {
    rects: Vec<BBox>,
    headline: Vec<(String, BBox)>,
    body: Vec<(String, BBox)>,
    illustration: Option<(BBox, u8)>,
}

impl PlacedArticle {
    fn bounds(&self) -> BBox {
        BBox::hull_of(&self.rects).expect("non-empty")
    }
}

fn text_width(text: &str, scale: usize) -> usize {
    text.chars().count() * cell_w(scale)
}

/// Greedy word wrap of `words` into lines no wider than `width`.
fn wrap(words: &[String], width: usize, scale: usize) -> Vec<Vec<String>> {
    let space = cell_w(scale);
    let mut lines: Vec<Vec<String>> = Vec::new();
    let mut used = 0;
    for w in words {
        let ww = text_width(w, scale);
        match lines.last_mut() {
            Some(line) if used + space + ww <= width => {
                line.push(w.clone());
                used += space + ww;
            }
            _ => {
                lines.push(vec![w.clone()]);
                used = ww;
            }
        }
    }
    lines
}

/// Lay out `words` left to right from `(x, y)`, one space cell apart.
fn place_line(words: &[String], x: usize, y: usize, scale: usize) -> Vec<(String, BBox)> {
    let mut out = Vec::with_capacity(words.len());
    let mut cx = x;
    for w in words {
        let ww = text_width(w, scale);
        out.push((w.clone(), BBox::at(cx, y, ww, cell_h(scale))));
        cx += ww + cell_w(scale);
    }
    out
}

fn body_word(rng: &mut ChaCha8Rng, max_width: usize) -> String {
    loop {
        let w = VOCABULARY.choose(rng).expect("non-empty vocabulary");
        if text_width(w, Metrics::BODY_SCALE) + cell_w(1) <= max_width {
            return (*w).to_string();
        }
    }
}

/// Fill one body line up to `fill` of `width`, never exceeding it.
fn body_line(rng: &mut ChaCha8Rng, width: usize, fill: f64, end_of_paragraph: bool) -> Vec<String> {
    let space = cell_w(Metrics::BODY_SCALE);
    let target = ((width as f64) * fill) as usize;
    let mut words = Vec::new();
    let mut used = 0usize;
    loop {
        let mut w = body_word(rng, width);
        if rng.gen_bool(0.08) {
            w.push(if rng.gen_bool(0.5) { ',' } else { '.' });
        }
        let ww = text_width(&w, Metrics::BODY_SCALE);
        let need = if words.is_empty() { ww } else { used + space + ww };
        if need > width || (!words.is_empty() && need > target.max(1)) {
            break;
        }
        used = need;
        words.push(w);
        if used >= target {
            break;
        }
    }
    if words.is_empty() {
        words.push(body_word(rng, width));
    }
    if end_of_paragraph {
        let last = words.last_mut().expect("non-empty line");
        if !last.ends_with('.') && !last.ends_with(',') {
            let candidate = format!("{last}.");
            let total: usize = words.iter().map(|w| text_width(w, 1)).sum::<usize>()
                + (words.len() - 1) * space
                + cell_w(1);
            if total <= width {
                *words.last_mut().unwrap() = candidate;
            }
        } else if last.ends_with(',') {
            last.pop();
            last.push('.');
        }
    }
    words
}

/// Line slots for a body: `Some(words)` for text, `None` for a paragraph gap.
fn body_slots(rng: &mut ChaCha8Rng, total: usize, column_break: usize, width: usize) -> Vec<Option<Vec<String>>> {
    let forbidden = |i: usize| i == 0 || i + 1 == total || i == column_break || i + 1 == column_break;
    let mut slots = Vec::with_capacity(total);
    let mut left_in_paragraph: usize = rng.gen_range(2..=6);
    for i in 0..total {
        let prev_blank = matches!(slots.last(), Some(None));
        if left_in_paragraph == 0 && !prev_blank && !forbidden(i) {
            slots.push(None);
            left_in_paragraph = rng.gen_range(2..=6);
            continue;
        }
        // A paragraph ends on this line if the next slot will be a gap.
        let ends = left_in_paragraph == 1 && i + 1 < total && !forbidden(i + 1);
        let fill = if ends || i + 1 == total {
            rng.gen_range(0.3..1.0)
        } else {
            1.0
        };
        slots.push(Some(body_line(rng, width, fill, ends || i + 1 == total)));
        left_in_paragraph = left_in_paragraph.saturating_sub(1);
    }
    slots
}

#[allow(clippy::too_many_arguments)]
fn compose_article(
    rng: &mut ChaCha8Rng,
    x: usize,
    top: usize,
    cw: usize,
    span2: bool,
    height: usize,
    illustration: bool,
) -> Option<PlacedArticle> {
    let text_w = if span2 { 2 * cw + Metrics::GUTTER } else { cw };
    let hs = Metrics::HEADLINE_SCALE;

    let n_head = rng.gen_range(2..=5);
    let mut head_words = Vec::with_capacity(n_head);
    while head_words.len() < n_head {
        let w = VOCABULARY.choose(rng).expect("non-empty vocabulary");
        if w.len() >= 2 && text_width(w, hs) <= text_w {
            head_words.push((*w).to_string());
        }
    }
    let mut head_lines = wrap(&head_words, text_w, hs);
    head_lines.truncate(2);

    let mut headline = Vec::new();
    let mut y = top;
    for line in &head_lines {
        headline.extend(place_line(line, x, y, hs));
        y += cell_h(hs);
    }
    y += Metrics::HEAD_GAP;

    let line_h = cell_h(Metrics::BODY_SCALE);
    let mut ill = None;
    if illustration {
        let ih = rng.gen_range(40..=64);
        let shade = rng.gen_range(96..=176u8);
        // Only draw it if two body lines still fit underneath.
        if y + ih + Metrics::ILLUSTRATION_GAP + 2 * line_h <= top + height {
            ill = Some((BBox::at(x, y, text_w, ih), shade));
            y += ih + Metrics::ILLUSTRATION_GAP;
        }
    }

    let body_top = y;
    let la = (top + height).saturating_sub(body_top) / line_h;
    if la < 2 {
        return None;
    }
    let lb = if span2 { la - rng.gen_range(0..=la / 3) } else { 0 };
    let lb = if span2 { lb.max(1) } else { 0 };
    let total = la + lb;
    let slots = body_slots(rng, total, if span2 { la } else { usize::MAX }, cw);

    let col_b_x = x + cw + Metrics::GUTTER;
    let mut body = Vec::new();
    let mut col_a_below: Vec<BBox> = Vec::new();
    let mut above: Vec<BBox> = headline.iter().map(|(_, b)| *b).collect();
    if let Some((b, _)) = ill {
        above.push(b);
    }
    for (i, slot) in slots.iter().enumerate() {
        let Some(words) = slot else { continue };
        let (lx, row) = if i < la { (x, i) } else { (col_b_x, i - la) };
        let placed = place_line(words, lx, body_top + row * line_h, Metrics::BODY_SCALE);
        for (_, b) in &placed {
            if span2 && i < la && row >= lb {
                col_a_below.push(*b);
            } else {
                above.push(*b);
            }
        }
        body.extend(placed);
    }

    let mut rects = vec![BBox::hull_of(&above).expect("headline present")];
    if let Some(lower) = BBox::hull_of(&col_a_below) {
        rects.push(lower);
    }
    Some(PlacedArticle {
        rects,
        headline,
        body,
        illustration: ill,
    })
}

fn draw_text(grid: &mut PixelGrid, text: &str, x: usize, y: usize, scale: usize) {
    for (i, ch) in text.chars().enumerate() {
        let g = font::glyph(ch).unwrap_or_else(|| panic!("unsupported character {ch:?}"));
        let cx = x + i * cell_w(scale);
        for gy in 0..font::GLYPH_H {
            for gx in 0..font::GLYPH_W {
                if g.pixel(gx, gy) {
                    grid.fill_rect(&BBox::at(cx + gx * scale, y + gy * scale, scale, scale), INK);
                }
            }
        }
    }
}

struct Attempt {
    articles: Vec<PlacedArticle>,
    ads: Vec<BBox>,
}

fn layout_attempt(spec: &LayoutSpec, rng: &mut ChaCha8Rng, content_top: usize, factor: f64) -> Option<Attempt> {
    let n_cols = spec.columns;
    let cw = spec.column_width();
    let content_bottom = spec.height - Metrics::MARGIN;
    let mut col_bottom = vec![content_bottom; n_cols];

    let n_ads = if spec.articles >= 3 && rng.gen_bool(0.3) { 2 } else { 1 };
    let mut ad_cols: Vec<usize> = (0..n_cols).collect();
    ad_cols.shuffle(rng);
    let mut ads = Vec::new();
    for &c in ad_cols.iter().take(n_ads) {
        let ah = rng.gen_range(48..=88);
        ads.push(BBox::at(spec.column_x(c), content_bottom - ah, cw, ah));
        col_bottom[c] = content_bottom - ah - Metrics::VGAP;
    }

    let mut sky = vec![content_top; n_cols];
    let mut placed = Vec::with_capacity(spec.articles);
    for i in 0..spec.articles {
        let remaining = spec.articles - i;
        let span2 = n_cols >= 2 && rng.gen_bool(Metrics::SPAN_PROBABILITY);
        let (c, top, limit) = if span2 {
            (0..n_cols - 1)
                .map(|c| (c, sky[c].max(sky[c + 1]), col_bottom[c].min(col_bottom[c + 1])))
                .min_by_key(|&(c, top, _)| (top, c))
                .expect("at least two columns")
        } else {
            (0..n_cols)
                .map(|c| (c, sky[c], col_bottom[c]))
                .min_by_key(|&(c, top, _)| (top, c))
                .expect("at least one column")
        };
        let space: usize = (0..n_cols).map(|c| col_bottom[c].saturating_sub(sky[c])).sum();
        let share = space as f64 / (remaining as f64 * (1.0 + Metrics::SPAN_PROBABILITY));
        let target = (share * factor * rng.gen_range(0.75..1.25)) as usize;
        let height = target.min(limit.saturating_sub(top));
        let illustrated = rng.gen_bool(spec.illustration_prob);
        let article = compose_article(rng, spec.column_x(c), top, cw, span2, height, illustrated)?;
        let bottom = article.bounds().y1;
        if bottom > limit {
            return None;
        }
        if span2 {
            sky[c] = bottom + Metrics::VGAP;
            sky[c + 1] = bottom + Metrics::VGAP;
        } else {
            sky[c] = bottom + Metrics::VGAP;
        }
        placed.push(article);
    }
    Some(Attempt {
        articles: placed,
        ads,
    })
}

/// Generate one page. Same spec, same page.
pub fn generate_page(spec: &LayoutSpec, id: &str) -> Result<PageRecord> {
    spec.validate()?;
    let cw = spec.column_width();
    if cw < Metrics::MIN_COLUMN_WIDTH {
        return Err(Error::InfeasibleLayout(format!(
            "{} columns on a {}-pixel page leave {cw}-pixel columns",
            spec.columns, spec.width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let masthead = MASTHEADS.choose(&mut rng).expect("mastheads").to_string();
    let date = format!(
        "{:04}-{:02}-{:02}",
        rng.gen_range(1960..2024),
        rng.gen_range(1..=12),
        rng.gen_range(1..=28)
    );

    let mut grid = PixelGrid::blank(spec.width, spec.height);
    let ms = Metrics::MASTHEAD_SCALE;
    let mast_w = text_width(&masthead, ms);
    if mast_w + 2 * Metrics::MARGIN > spec.width {
        return Err(Error::InfeasibleLayout("masthead wider than page".into()));
    }
    let top = Metrics::MARGIN;
    draw_text(&mut grid, &masthead, (spec.width - mast_w) / 2, top, ms);
    let date_y = top + cell_h(ms) + 4;
    draw_text(&mut grid, &date.replace('-', " "), Metrics::MARGIN, date_y, 1);
    let rule_y = date_y + cell_h(1) + 4;
    let rule = BBox::at(Metrics::MARGIN, rule_y, spec.width - 2 * Metrics::MARGIN, 2);
    grid.fill_rect(&rule, INK);
    let header = BBox::new(Metrics::MARGIN, top, spec.width - Metrics::MARGIN, rule.y1)?;
    let content_top = header.y1 + Metrics::VGAP;

    let attempt = [1.0, 0.85, 0.7, 0.55, 0.4]
        .iter()
        .enumerate()
        .find_map(|(n, &factor)| {
            let mut arng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, n as u64 + 1));
            layout_attempt(spec, &mut arng, content_top, factor)
        })
        .ok_or_else(|| {
            Error::InfeasibleLayout(format!(
                "{} articles do not fit in {} columns of a {}x{} page",
                spec.articles, spec.columns, spec.width, spec.height
            ))
        })?;

    let mut articles = attempt.articles;
    // Column-major reading order defines article ids.
    articles.sort_by_key(|a| {
        let b = a.bounds();
        (b.x0, b.y0)
    });

    let mut annotations = Vec::new();
    let mut words = Vec::new();
    let mut article_texts = BTreeMap::new();
    let mut next_id = articles.len() as u32;
    for (idx, art) in articles.iter().enumerate() {
        let aid = idx as u32;
        annotations.push(ElementAnnotation {
            id: aid,
            category: Category::Article,
            parent: None,
            region: Region {
                rects: art.rects.clone(),
            },
        });
        let head_box = BBox::hull_of(art.headline.iter().map(|(_, b)| b)).expect("headline");
        annotations.push(ElementAnnotation {
            id: next_id,
            category: Category::Headline,
            parent: Some(aid),
            region: Region::rect(head_box),
        });
        next_id += 1;
        if let Some((b, shade)) = art.illustration {
            grid.fill_rect(&b, shade);
            annotations.push(ElementAnnotation {
                id: next_id,
                category: Category::Illustration,
                parent: Some(aid),
                region: Region::rect(b),
            });
            next_id += 1;
        }
        for (role, list) in [(Role::Headline, &art.headline), (Role::Body, &art.body)] {
            let scale = match role {
                Role::Headline => Metrics::HEADLINE_SCALE,
                Role::Body => Metrics::BODY_SCALE,
            };
            for (text, b) in list {
                draw_text(&mut grid, text, b.x0, b.y0, scale);
                words.push(WordBox {
                    text: text.clone(),
                    bbox: *b,
                    font_scale: scale,
                    article_id: aid,
                    role,
                });
            }
        }
        let join = |v: &[(String, BBox)]| v.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>().join(" ");
        article_texts.insert(
            aid,
            ArticleText {
                headline: join(&art.headline),
                body: join(&art.body),
            },
        );
    }

    for ad in &attempt.ads {
        let frame = 2;
        grid.fill_rect(&BBox::at(ad.x0, ad.y0, ad.width(), frame), INK);
        grid.fill_rect(&BBox::at(ad.x0, ad.y1 - frame, ad.width(), frame), INK);
        grid.fill_rect(&BBox::at(ad.x0, ad.y0, frame, ad.height()), INK);
        grid.fill_rect(&BBox::at(ad.x1 - frame, ad.y0, frame, ad.height()), INK);
        let mut ty = ad.y0 + 8;
        let mut lines: Vec<&str> = AD_LINES.to_vec();
        lines.shuffle(&mut rng);
        for line in lines {
            let lw = text_width(line, 1);
            if ty + cell_h(1) + 6 > ad.y1 || lw + 12 > ad.width() {
                continue;
            }
            draw_text(&mut grid, line, ad.x0 + (ad.width() - lw) / 2, ty, 1);
            ty += cell_h(1) + 4;
        }
        annotations.push(ElementAnnotation {
            id: next_id,
            category: Category::Ad,
            parent: None,
            region: Region::rect(*ad),
        });
        next_id += 1;
    }
    annotations.push(ElementAnnotation {
        id: next_id,
        category: Category::Header,
        parent: None,
        region: Region::rect(header),
    });

    Ok(PageRecord {
        id: id.to_string(),
        grid,
        annotations,
        words,
        article_texts,
        masthead,
        date,
        seed: spec.seed,
    })
}

/// `n` pages with ids `page_0000…`; layout parameters are drawn per page
/// from `seed` (2–5 columns, 3–12 articles, illustration probability 0.4).
pub fn generate_corpus(n: usize, seed: u64) -> Result<Vec<PageRecord>> {
    (0..n)
        .map(|i| {
            let page_seed = derive_seed(seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(page_seed);
            let columns = rng.gen_range(2..=5);
            let mut articles = rng.gen_range(3..=12usize.min(3 * columns));
            let id = format!("page_{i:04}");
            loop {
                let spec = LayoutSpec::new(columns, articles, 0.4, page_seed);
                match generate_page(&spec, &id) {
                    Err(Error::InfeasibleLayout(_)) if articles > 3 => articles -= 1,
                    other => return other,
                }
            }
        })
        .collect()
}
