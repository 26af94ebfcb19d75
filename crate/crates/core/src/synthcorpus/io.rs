//! Corpus directory layout: `pages/<id>.pgm` holds the raster and
//! `pages/<id>.ann` a JSON annotation document.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ArticleText, ElementAnnotation, PageRecord, WordBox};
use crate::error::{Error, Result};
use crate::raster::{read_pgm, write_pgm};

pub const ANNOTATION_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct AnnotationDoc {
    schema_version: u32,
    id: String,
    width: usize,
    height: usize,
    masthead: String,
    date: String,
    seed: u64,
    elements: Vec<ElementAnnotation>,
    words: Vec<WordBox>,
    article_texts: BTreeMap<u32, ArticleText>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

fn pages_dir(dir: &Path) -> PathBuf {
    dir.join("pages")
}

/// Write one page into `dir/pages/`.
pub fn save_page(dir: &Path, page: &PageRecord) -> Result<()> {
    let pages = pages_dir(dir);
    fs::create_dir_all(&pages).map_err(|e| Error::io(&pages, e))?;

    let pgm = pages.join(format!("{}.pgm", page.id));
    let file = File::create(&pgm).map_err(|e| Error::io(&pgm, e))?;
    let mut out = BufWriter::new(file);
    write_pgm(&page.grid, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&pgm, e))?;

    let doc = AnnotationDoc {
        schema_version: ANNOTATION_SCHEMA_VERSION,
        id: page.id.clone(),
        width: page.width(),
        height: page.height(),
        masthead: page.masthead.clone(),
        date: page.date.clone(),
        seed: page.seed,
        elements: page.annotations.clone(),
        words: page.words.clone(),
        article_texts: page.article_texts.clone(),
    };
    let ann = pages.join(format!("{}.ann", page.id));
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(&ann, text).map_err(|e| Error::io(&ann, e))
}

/// Load page `id` from `dir/pages/`.
pub fn load_page(dir: &Path, id: &str) -> Result<PageRecord> {
    let pages = pages_dir(dir);
    let ann = pages.join(format!("{id}.ann"));
    let text = fs::read_to_string(&ann).map_err(|e| Error::io(&ann, e))?;
    let probe: VersionProbe = serde_json::from_str(&text)
        .map_err(|e| Error::malformed(ann.display().to_string(), e.to_string()))?;
    if probe.schema_version != ANNOTATION_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            what: ann.display().to_string(),
            found: probe.schema_version,
            expected: ANNOTATION_SCHEMA_VERSION,
        });
    }
    let doc: AnnotationDoc = serde_json::from_str(&text)
        .map_err(|e| Error::malformed(ann.display().to_string(), e.to_string()))?;
    if doc.id != id {
        return Err(Error::IdMismatch(format!(
            "{} declares id {:?}",
            ann.display(),
            doc.id
        )));
    }

    let pgm = pages.join(format!("{id}.pgm"));
    let file = File::open(&pgm).map_err(|e| Error::io(&pgm, e))?;
    let grid = read_pgm(BufReader::new(file))?;
    if grid.dims() != (doc.width, doc.height) {
        return Err(Error::DimensionMismatch {
            expected: (doc.width, doc.height),
            actual: grid.dims(),
        });
    }
    Ok(PageRecord {
        id: doc.id,
        grid,
        annotations: doc.elements,
        words: doc.words,
        article_texts: doc.article_texts,
        masthead: doc.masthead,
        date: doc.date,
        seed: doc.seed,
    })
}

pub fn save_corpus(dir: &Path, pages: &[PageRecord]) -> Result<()> {
    let p = pages_dir(dir);
    fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    pages.par_iter().try_for_each(|page| save_page(dir, page))
}

/// Every page under `dir/pages/`, sorted by id.
pub fn load_corpus(dir: &Path) -> Result<Vec<PageRecord>> {
    let pages = pages_dir(dir);
    let entries = fs::read_dir(&pages).map_err(|e| Error::io(&pages, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&pages, e))?.path();
        if path.extension().is_some_and(|e| e == "ann") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    ids.par_iter().map(|id| load_page(dir, id)).collect()
}
