//! End-to-end experiment plumbing shared by the CLI and the test suites:
//! RoI sample construction, page segmentation, prediction files,
//! corpus evaluation and λ sweeps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digitize::{extract_article_tokens, ExtractConfig};
use crate::error::{Error, Result};
use crate::loss::MaskTarget;
use crate::metrics::{
    ap_suite_images, boundary_text_pair, error_counts, APReport, Detection, ErrorCounts, GroundTruth,
    ImageEval, Shape, WerReport,
};
use crate::raster::{mask_coverage, upsample_mask, BBox, BinaryMask};
use crate::synthcorpus::PageRecord;
use crate::toyseg::{jitter_proposals, predict_roi, train, ModelParams, Sample, TrainConfig, TrainReport};
use crate::{derive_seed, stable_hash};

/// How RoIs are cut from a page for training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub m: usize,
    pub k: usize,
    /// Maximum edge shift `j` applied to each proposal.
    pub jitter: usize,
    /// Context margin added around the ground-truth box before jittering.
    pub context: usize,
    /// Minimum covered fraction for an RoI cell to be foreground.
    pub target_coverage: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            m: 28,
            k: 2,
            jitter: 4,
            context: 4,
            target_coverage: 0.5,
        }
    }
}

/// Proposals for every article of `page`, keyed by article id. The seed
/// is combined with the page id, so a page gets the same proposals
/// whatever corpus it sits in.
pub fn article_proposals(page: &PageRecord, cfg: &ProposalConfig, seed: u64) -> Vec<(u32, BBox)> {
    let (w, h) = page.grid.dims();
    let ids: Vec<u32> = page.articles().map(|a| a.id).collect();
    let padded: Vec<BBox> = page
        .articles()
        .map(|a| a.region.bounds().dilate(cfg.context, w, h))
        .collect();
    let jittered = jitter_proposals(&padded, cfg.jitter, derive_seed(seed, stable_hash(&page.id)), w, h);
    ids.into_iter().zip(jittered).collect()
}

/// Binary RoI target: cells whose covered fraction reaches the threshold.
pub fn roi_target(page: &PageRecord, article_id: u32, proposal: &BBox, cfg: &ProposalConfig) -> Result<MaskTarget> {
    let article = page
        .article(article_id)
        .ok_or_else(|| Error::IdMismatch(format!("page {} has no article {article_id}", page.id)))?;
    let (pw, ph) = (proposal.width(), proposal.height());
    let mut local = BinaryMask::empty(pw, ph);
    for r in &article.region.rects {
        if let Some(i) = r.intersect(proposal) {
            local.fill_rect(&BBox::at(i.x0 - proposal.x0, i.y0 - proposal.y0, i.width(), i.height()), true);
        }
    }
    let cov = mask_coverage(&local, &BBox::at(0, 0, pw, ph), cfg.m)?;
    let bits = cov.values().iter().map(|&c| c >= cfg.target_coverage).collect();
    MaskTarget::new(BinaryMask::new(cfg.m, cfg.m, bits)?)
}

/// Training RoIs for every article of every page.
pub fn build_samples(pages: &[PageRecord], cfg: &ProposalConfig, seed: u64) -> Result<Vec<Sample>> {
    let per_page: Vec<Vec<Sample>> = pages
        .par_iter()
        .map(|page| {
            article_proposals(page, cfg, seed)
                .into_iter()
                .map(|(id, proposal)| {
                    let input = crate::raster::crop_resample(&page.grid, &proposal, cfg.m)?;
                    let target = roi_target(page, id, &proposal, cfg)?;
                    Sample::new(input, target, cfg.k)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_page.into_iter().flatten().collect())
}

/// Instance mask as stored in a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceMask {
    /// An `m × m` RoI mask over `proposal`; rows of `0`/`1` characters.
    Roi { proposal: BBox, m: usize, rows: Vec<String> },
    /// A union of page rectangles.
    Rects { rects: Vec<BBox> },
}

impl InstanceMask {
    pub fn from_roi(proposal: BBox, roi: &BinaryMask) -> Self {
        let m = roi.width();
        let rows = (0..roi.height())
            .map(|y| (0..m).map(|x| if roi.get(x, y) { '1' } else { '0' }).collect())
            .collect();
        InstanceMask::Roi { proposal, m, rows }
    }

    pub fn to_page_mask(&self, width: usize, height: usize) -> Result<BinaryMask> {
        match self {
            InstanceMask::Rects { rects } => {
                if let Some(r) = rects.iter().find(|r| !r.fits_in(width, height)) {
                    return Err(Error::OutOfBounds { bbox: *r, width, height });
                }
                Ok(BinaryMask::from_rects(width, height, rects))
            }
            InstanceMask::Roi { proposal, m, rows } => {
                if rows.len() != *m || rows.iter().any(|r| r.len() != *m) {
                    return Err(Error::malformed("instance mask", format!("expected {m} rows of {m} cells")));
                }
                let mut bits = Vec::with_capacity(m * m);
                for row in rows {
                    for c in row.chars() {
                        bits.push(match c {
                            '1' => true,
                            '0' => false,
                            other => {
                                return Err(Error::malformed("instance mask", format!("unexpected cell {other:?}")))
                            }
                        });
                    }
                }
                upsample_mask(&BinaryMask::new(*m, *m, bits)?, proposal, width, height)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    /// Ground-truth article the proposal was cut for.
    pub article_id: u32,
    pub score: f64,
    pub mask: InstanceMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PagePredictions {
    pub page_id: String,
    pub instances: Vec<InstancePrediction>,
}

pub const PREDICTIONS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub schema_version: u32,
    /// λ of the model that produced the masks; `None` for ground truth.
    pub lambda: Option<f64>,
    pub pages: Vec<PagePredictions>,
}

impl PredictionSet {
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            schema_version: u32,
        }
        let probe: Probe = serde_json::from_str(text).map_err(|e| Error::malformed("predictions", e.to_string()))?;
        if probe.schema_version != PREDICTIONS_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "predictions".into(),
                found: probe.schema_version,
                expected: PREDICTIONS_SCHEMA_VERSION,
            });
        }
        serde_json::from_str(text).map_err(|e| Error::malformed("predictions", e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Ground-truth regions as predictions with score 1.
    pub fn ground_truth(pages: &[PageRecord]) -> Self {
        Self {
            schema_version: PREDICTIONS_SCHEMA_VERSION,
            lambda: None,
            pages: pages
                .iter()
                .map(|p| PagePredictions {
                    page_id: p.id.clone(),
                    instances: p
                        .articles()
                        .map(|a| InstancePrediction {
                            article_id: a.id,
                            score: 1.0,
                            mask: InstanceMask::Rects { rects: a.region.rects.clone() },
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Predictions for `pages`, in corpus order. Fails on ids that are
    /// not in the corpus; corpus pages without an entry get no instances.
    pub fn align<'a>(&'a self, pages: &[PageRecord]) -> Result<Vec<&'a [InstancePrediction]>> {
        let mut by_id: BTreeMap<&str, &[InstancePrediction]> = BTreeMap::new();
        for p in &self.pages {
            if by_id.insert(p.page_id.as_str(), &p.instances).is_some() {
                return Err(Error::IdMismatch(format!("page {} listed twice in predictions", p.page_id)));
            }
        }
        let out: Vec<&[InstancePrediction]> = pages
            .iter()
            .map(|p| by_id.remove(p.id.as_str()).unwrap_or(&[]))
            .collect();
        if let Some(extra) = by_id.keys().next() {
            return Err(Error::IdMismatch(format!("predictions refer to page {extra:?} not in the corpus")));
        }
        Ok(out)
    }
}

/// Segment one page: one instance per article proposal. The score is the
/// mean probability over the cells predicted foreground.
pub fn segment_page(
    params: &ModelParams,
    page: &PageRecord,
    cfg: &ProposalConfig,
    eps: f64,
    seed: u64,
) -> Result<PagePredictions> {
    let instances = article_proposals(page, cfg, seed)
        .into_iter()
        .map(|(id, proposal)| {
            let pred = predict_roi(params, &page.grid, &proposal, cfg.m, eps)?;
            let roi = pred.to_mask();
            let fg: Vec<f64> = pred.probs().iter().copied().filter(|&p| p > 0.5).collect();
            let score = if fg.is_empty() { 0.0 } else { fg.iter().sum::<f64>() / fg.len() as f64 };
            Ok(InstancePrediction {
                article_id: id,
                score,
                mask: InstanceMask::from_roi(proposal, &roi),
            })
        })
        .collect::<Result<_>>()?;
    Ok(PagePredictions { page_id: page.id.clone(), instances })
}

pub fn segment_corpus(
    params: &ModelParams,
    pages: &[PageRecord],
    cfg: &ProposalConfig,
    eps: f64,
    seed: u64,
    lambda: Option<f64>,
) -> Result<PredictionSet> {
    let pages = pages
        .par_iter()
        .map(|p| segment_page(params, p, cfg, eps, seed))
        .collect::<Result<_>>()?;
    Ok(PredictionSet {
        schema_version: PREDICTIONS_SCHEMA_VERSION,
        lambda,
        pages,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Band half-width for boundary text, in page pixels.
    pub k_eval: usize,
    pub extract: ExtractConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_eval: 8,
            extract: ExtractConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub wer: WerReport,
    pub ap: APReport,
}

struct PageOutcome {
    overall: ErrorCounts,
    boundary: ErrorCounts,
    image: ImageEval,
}

fn evaluate_page(page: &PageRecord, page_index: usize, preds: &[InstancePrediction], cfg: &EvalConfig) -> Result<PageOutcome> {
    let (w, h) = page.grid.dims();
    let masks = preds
        .iter()
        .map(|p| p.mask.to_page_mask(w, h))
        .collect::<Result<Vec<_>>>()?;
    let mut overall = ErrorCounts::default();
    let mut boundary = ErrorCounts::default();
    let mut ground_truths = Vec::new();
    for article in page.articles() {
        let gt_mask = article.region.to_mask(w, h);
        let reference = page
            .article_texts
            .get(&article.id)
            .map(|t| t.full())
            .unwrap_or_default();
        // Highest-scoring instance cut for this article, first on ties.
        let best = preds
            .iter()
            .enumerate()
            .filter(|(_, p)| p.article_id == article.id)
            .fold(None::<(usize, f64)>, |acc, (i, p)| match acc {
                Some((_, s)) if s >= p.score => acc,
                _ => Some((i, p.score)),
            });
        let (hypothesis, tokens) = match best {
            Some((i, _)) => {
                let ex = extract_article_tokens(page, &masks[i], article.id, page_index, &cfg.extract)?;
                let tokens: Vec<_> = ex.tokens().cloned().collect();
                (ex.doc.text(), tokens)
            }
            None => (String::new(), Vec::new()),
        };
        overall.add(&error_counts(&reference, &hypothesis));
        let pair = boundary_text_pair(page, &gt_mask, &tokens, cfg.k_eval)?;
        boundary.add(&error_counts(&pair.reference, &pair.hypothesis));
        ground_truths.push(GroundTruth::new(Shape::Mask(gt_mask)));
    }
    let detections = preds
        .iter()
        .zip(masks)
        .map(|(p, m)| Detection { shape: Shape::Mask(m), score: p.score })
        .collect();
    Ok(PageOutcome {
        overall,
        boundary,
        image: ImageEval { detections, ground_truths },
    })
}

/// Corpus-pooled WER/CER, boundary WER/CER and AP of a prediction set.
pub fn evaluate(pages: &[PageRecord], preds: &PredictionSet, cfg: &EvalConfig) -> Result<Evaluation> {
    let aligned = preds.align(pages)?;
    let outcomes: Vec<PageOutcome> = pages
        .par_iter()
        .zip(aligned)
        .enumerate()
        .map(|(i, (page, p))| evaluate_page(page, i, p, cfg))
        .collect::<Result<_>>()?;
    let mut overall = ErrorCounts::default();
    let mut boundary = ErrorCounts::default();
    let mut images = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        overall.add(&o.overall);
        boundary.add(&o.boundary);
        images.push(o.image);
    }
    Ok(Evaluation {
        wer: WerReport::from_counts(overall, boundary),
        ap: ap_suite_images(&images)?,
    })
}

/// Distinct λ values in first-seen order, plus the repeats that were dropped.
pub fn dedup_lambdas(lambdas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut kept: Vec<f64> = Vec::new();
    let mut dropped = Vec::new();
    for &l in lambdas {
        if kept.contains(&l) {
            dropped.push(l);
        } else {
            kept.push(l);
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Shared training settings; `lambda` is replaced per run.
    pub train: TrainConfig,
    pub proposals: ProposalConfig,
    pub eval: EvalConfig,
}

impl SweepConfig {
    pub fn new(train: TrainConfig, eval: EvalConfig) -> Self {
        let proposals = ProposalConfig {
            m: train.m,
            k: train.k,
            jitter: train.proposal_jitter,
            context: train.proposal_jitter,
            ..ProposalConfig::default()
        };
        Self { train, proposals, eval }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub lambda: f64,
    pub params: ModelParams,
    pub train: TrainReport,
    /// Pixel error rates on the held-out RoIs.
    pub test_boundary_error_rate: f64,
    pub test_interior_error_rate: f64,
    pub evaluation: Evaluation,
}

/// Train one model per λ on `train_pages` and evaluate it on `test_pages`.
/// Runs are independent and execute in parallel; the output order follows
/// `lambdas`.
pub fn run_sweep(
    train_pages: &[PageRecord],
    test_pages: &[PageRecord],
    lambdas: &[f64],
    cfg: &SweepConfig,
) -> Result<Vec<SweepOutcome>> {
    let seed = cfg.train.seed;
    let train_samples = build_samples(train_pages, &cfg.proposals, seed)?;
    let test_seed = derive_seed(seed, 1);
    let test_samples = build_samples(test_pages, &cfg.proposals, test_seed)?;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let tc = TrainConfig { lambda, ..cfg.train };
            let (params, report) = train(&train_samples, &tc)?;
            let (tb, ti) = crate::toyseg::pixel_error_rates(&params, &test_samples);
            let preds = segment_corpus(&params, test_pages, &cfg.proposals, tc.clamp_eps, test_seed, Some(lambda))?;
            let evaluation = evaluate(test_pages, &preds, &cfg.eval)?;
            Ok(SweepOutcome {
                lambda,
                params,
                train: report,
                test_boundary_error_rate: tb,
                test_interior_error_rate: ti,
                evaluation,
            })
        })
        .collect()
}

/// One row of a Table-1 style report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub lambda: Option<f64>,
    pub wer: f64,
    pub cer: f64,
    pub boundary_wer: f64,
    pub boundary_cer: f64,
}

impl ReportRow {
    pub fn new(lambda: Option<f64>, w: &WerReport) -> Self {
        Self {
            lambda,
            wer: w.wer,
            cer: w.cer,
            boundary_wer: w.boundary_wer,
            boundary_cer: w.boundary_cer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApBlock {
    pub lambda: Option<f64>,
    pub report: APReport,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Consolidated evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub k_eval: usize,
    pub rows: Vec<ReportRow>,
    pub ap: Vec<ApBlock>,
    /// Pooled counts behind each row, same order.
    pub counts: Vec<WerReport>,
}

impl EvalReport {
    pub fn new(k_eval: usize, results: &[(Option<f64>, &Evaluation)]) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            k_eval,
            rows: results.iter().map(|(l, e)| ReportRow::new(*l, &e.wer)).collect(),
            ap: results
                .iter()
                .map(|(l, e)| ApBlock { lambda: *l, report: e.ap.clone() })
                .collect(),
            counts: results.iter().map(|(_, e)| e.wer).collect(),
        }
    }
}
