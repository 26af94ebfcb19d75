use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use edgemask::digitize::{digitize_page, ground_truth_instances, emit, ExtractConfig, Format};
use edgemask::experiment::{
    build_samples, dedup_lambdas, evaluate, run_sweep, segment_corpus, EvalConfig, EvalReport, PredictionSet,
    ProposalConfig, SweepConfig,
};
use edgemask::synthcorpus::{generate_corpus, load_corpus, save_corpus, PageRecord};
use edgemask::toyseg::{train, Checkpoint, TrainConfig};
use edgemask::derive_seed;

#[derive(Parser)]
#[command(name = "edgemask", version, about = "Synthetic newspaper segmentation with a boundary-weighted mask loss")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic page corpus.
    Gen(GenArgs),
    /// Train the toy mask head on a corpus.
    Train(TrainArgs),
    /// Train and evaluate one model per λ.
    Sweep(SweepArgs),
    /// Predict instance masks for every article proposal.
    Segment(SegmentArgs),
    /// Produce one accessible document per page.
    Digitize(DigitizeArgs),
    /// Score predictions: WER/CER, boundary WER/CER and AP.
    Eval(EvalArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    pages: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 28)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Proposal jitter used to cut training RoIs.
    #[arg(long, default_value_t = 4)]
    jitter: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Held-out corpus; when absent the last `--test-pages` pages of
    /// `--corpus` are held out.
    #[arg(long)]
    test_corpus: Option<PathBuf>,
    /// Defaults to one sixth of the corpus (at least one page).
    #[arg(long)]
    test_pages: Option<usize>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 28)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    jitter: usize,
    #[arg(long, default_value_t = 8)]
    k_eval: usize,
}

#[derive(Args, Serialize)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 4)]
    jitter: usize,
    /// Proposal seed; defaults to the held-out seed derived from the
    /// model's training seed, as used by `sweep`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Html,
    Md,
}

#[derive(Args, Serialize)]
struct DigitizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, conflicts_with = "gt", required_unless_present = "gt")]
    preds: Option<PathBuf>,
    /// Use the ground-truth article regions as masks.
    #[arg(long)]
    gt: bool,
    #[arg(long, value_enum)]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    preds: PathBuf,
    #[arg(long, default_value_t = 8)]
    k_eval: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Written next to every output so a run can be repeated from it.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    argv: Vec<String>,
    version: &'static str,
    seed: Option<u64>,
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    wall_time_secs: f64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// What a command produced, for the manifest.
#[derive(Default)]
struct Produced {
    config: Value,
    outputs: Vec<PathBuf>,
}

fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn load_pages(dir: &Path) -> Result<Vec<PageRecord>> {
    load_corpus(dir).with_context(|| format!("loading corpus {}", dir.display()))
}

fn load_predictions(path: &Path) -> Result<PredictionSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading predictions {}", path.display()))?;
    PredictionSet::from_json(&text).with_context(|| format!("parsing predictions {}", path.display()))
}

fn lambda_tag(lambda: f64) -> String {
    format!("{lambda}").replace('.', "p")
}

fn cmd_gen(a: &GenArgs) -> Result<Produced> {
    let pages = generate_corpus(a.pages, a.seed)?;
    save_corpus(&a.out, &pages).with_context(|| format!("writing corpus {}", a.out.display()))?;
    Ok(Produced {
        config: serde_json::to_value(a)?,
        outputs: vec![a.out.join("pages")],
    })
}

fn train_config(iters: usize, lambda: f64, k: usize, m: usize, jitter: usize, seed: u64) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        iterations: iters,
        lambda,
        k,
        m,
        proposal_jitter: jitter,
        seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn proposal_config(cfg: &TrainConfig, jitter: usize) -> ProposalConfig {
    ProposalConfig {
        m: cfg.m,
        k: cfg.k,
        jitter,
        context: jitter,
        ..ProposalConfig::default()
    }
}

fn cmd_train(a: &TrainArgs) -> Result<Produced> {
    let cfg = train_config(a.iters, a.lambda, a.k, a.m, a.jitter, a.seed)?;
    let pages = load_pages(&a.corpus)?;
    let samples = build_samples(&pages, &proposal_config(&cfg, a.jitter), cfg.seed)?;
    let (params, report) = train(&samples, &cfg)?;
    ensure_parent(&a.out)?;
    Checkpoint::new(cfg, params).save(&a.out)?;
    let report_path = manifest_path(&a.out, false).with_file_name({
        let mut n = a.out.file_name().unwrap_or_default().to_os_string();
        n.push(".report.json");
        n
    });
    write_json(&report_path, &report)?;
    eprintln!(
        "trained λ={} on {} RoIs: loss {:.5} -> {:.5} in {:.1}s",
        cfg.lambda,
        samples.len(),
        report.initial_mean_loss,
        report.final_mean_loss,
        report.wall_time_secs
    );
    Ok(Produced {
        config: json!({ "args": a, "train": cfg }),
        outputs: vec![a.out.clone(), report_path],
    })
}

fn cmd_sweep(a: &SweepArgs) -> Result<Produced> {
    if a.lambdas.is_empty() {
        bail!("--lambdas needs at least one value");
    }
    let (lambdas, dropped) = dedup_lambdas(&a.lambdas);
    for l in &dropped {
        eprintln!("warning: duplicate λ={l} ignored");
    }
    let train_cfg = train_config(a.iters, lambdas[0], a.k, a.m, a.jitter, a.seed)?;
    for &l in &lambdas {
        TrainConfig { lambda: l, ..train_cfg }.validate()?;
    }
    let mut pages = load_pages(&a.corpus)?;
    let test = match &a.test_corpus {
        Some(dir) => load_pages(dir)?,
        None => {
            let n = a.test_pages.unwrap_or((pages.len() / 6).max(1));
            if n >= pages.len() {
                bail!("corpus has {} pages; cannot hold out {n} and still train", pages.len());
            }
            pages.split_off(pages.len() - n)
        }
    };
    let eval = EvalConfig { k_eval: a.k_eval, ..EvalConfig::default() };
    let mut cfg = SweepConfig::new(train_cfg, eval);
    cfg.proposals = proposal_config(&train_cfg, a.jitter);

    let outcomes = run_sweep(&pages, &test, &lambdas, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut outputs = Vec::new();
    for o in &outcomes {
        let path = a.out.join(format!("model_lambda_{}.json", lambda_tag(o.lambda)));
        Checkpoint::new(TrainConfig { lambda: o.lambda, ..train_cfg }, o.params.clone()).save(&path)?;
        outputs.push(path);
        let path = a.out.join(format!("train_lambda_{}.json", lambda_tag(o.lambda)));
        write_json(&path, &o.train)?;
        outputs.push(path);
    }
    let results: Vec<_> = outcomes.iter().map(|o| (Some(o.lambda), &o.evaluation)).collect();
    let report = EvalReport::new(a.k_eval, &results);
    let report_path = a.out.join("report.json");
    write_json(&report_path, &report)?;
    outputs.push(report_path);

    eprintln!("{:>8} {:>8} {:>8} {:>10} {:>10}", "lambda", "WER", "CER", "bWER", "bCER");
    for r in &report.rows {
        eprintln!(
            "{:>8} {:>8.4} {:>8.4} {:>10.4} {:>10.4}",
            r.lambda.unwrap_or(f64::NAN),
            r.wer,
            r.cer,
            r.boundary_wer,
            r.boundary_cer
        );
    }
    Ok(Produced {
        config: json!({
            "args": a,
            "lambdas": lambdas,
            "dropped_duplicates": dropped,
            "train_pages": pages.len(),
            "test_pages": test.len(),
            "sweep": cfg,
        }),
        outputs,
    })
}

fn cmd_segment(a: &SegmentArgs) -> Result<Produced> {
    let ckpt = Checkpoint::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let pages = load_pages(&a.corpus)?;
    let cfg = proposal_config(&ckpt.config, a.jitter);
    let seed = a.seed.unwrap_or_else(|| derive_seed(ckpt.config.seed, 1));
    let preds = segment_corpus(&ckpt.params, &pages, &cfg, ckpt.config.clamp_eps, seed, Some(ckpt.config.lambda))?;
    ensure_parent(&a.out)?;
    fs::write(&a.out, preds.to_json()?).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(Produced {
        config: json!({ "args": a, "proposal_seed": seed, "proposals": cfg }),
        outputs: vec![a.out.clone()],
    })
}

fn cmd_digitize(a: &DigitizeArgs) -> Result<Produced> {
    let pages = load_pages(&a.corpus)?;
    let preds = match &a.preds {
        Some(p) => Some(load_predictions(p)?),
        None => None,
    };
    let aligned = preds.as_ref().map(|p| p.align(&pages)).transpose()?;
    let format = match a.format {
        FormatArg::Html => Format::Html,
        FormatArg::Md => Format::Markdown,
    };
    let cfg = ExtractConfig::default();
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut outputs = Vec::new();
    for (i, page) in pages.iter().enumerate() {
        let instances = match &aligned {
            Some(al) => al[i]
                .iter()
                .map(|p| Ok((p.article_id, p.mask.to_page_mask(page.width(), page.height())?)))
                .collect::<Result<Vec<_>>>()?,
            None => ground_truth_instances(page),
        };
        let doc = digitize_page(page, i, &instances, &cfg)?;
        let path = a.out.join(format!("{}.{}", page.id, format.extension()));
        fs::write(&path, emit(&doc, format)).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(path);
    }
    Ok(Produced {
        config: json!({ "args": a, "extract": cfg }),
        outputs,
    })
}

fn cmd_eval(a: &EvalArgs) -> Result<Produced> {
    if a.k_eval == 0 {
        bail!("--k-eval must be at least 1");
    }
    let pages = load_pages(&a.corpus)?;
    let preds = load_predictions(&a.preds)?;
    let cfg = EvalConfig { k_eval: a.k_eval, ..EvalConfig::default() };
    let evaluation = evaluate(&pages, &preds, &cfg)?;
    let report = EvalReport::new(a.k_eval, &[(preds.lambda, &evaluation)]);
    ensure_parent(&a.out)?;
    write_json(&a.out, &report)?;
    let r = &report.rows[0];
    eprintln!(
        "WER {:.4} CER {:.4} boundary WER {:.4} boundary CER {:.4} AP {:.4}",
        r.wer, r.cer, r.boundary_wer, r.boundary_cer, evaluation.ap.ap
    );
    Ok(Produced {
        config: json!({ "args": a, "eval": cfg }),
        outputs: vec![a.out.clone()],
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let start = Instant::now();
    let (name, seed, inputs, out, is_dir, result) = match &cli.command {
        Command::Gen(a) => ("gen", Some(a.seed), vec![], &a.out, true, cmd_gen(a)),
        Command::Train(a) => ("train", Some(a.seed), vec![a.corpus.clone()], &a.out, false, cmd_train(a)),
        Command::Sweep(a) => {
            let mut inputs = vec![a.corpus.clone()];
            inputs.extend(a.test_corpus.clone());
            ("sweep", Some(a.seed), inputs, &a.out, true, cmd_sweep(a))
        }
        Command::Segment(a) => (
            "segment",
            a.seed,
            vec![a.model.clone(), a.corpus.clone()],
            &a.out,
            false,
            cmd_segment(a),
        ),
        Command::Digitize(a) => {
            let mut inputs = vec![a.corpus.clone()];
            inputs.extend(a.preds.clone());
            ("digitize", None, inputs, &a.out, true, cmd_digitize(a))
        }
        Command::Eval(a) => (
            "eval",
            None,
            vec![a.corpus.clone(), a.preds.clone()],
            &a.out,
            false,
            cmd_eval(a),
        ),
    };
    let (produced, error) = match result {
        Ok(p) => (p, None),
        Err(e) => (Produced::default(), Some(e)),
    };
    let manifest = RunManifest {
        command: name,
        argv,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config: produced.config,
        inputs,
        outputs: produced.outputs,
        wall_time_secs: start.elapsed().as_secs_f64(),
        status: if error.is_some() { "failed" } else { "ok" },
        error: error.as_ref().map(|e| format!("{e:#}")),
    };
    let path = manifest_path(out, is_dir);
    let written = if is_dir {
        fs::create_dir_all(out).map_err(anyhow::Error::from)
    } else {
        ensure_parent(out)
    }
    .and_then(|_| write_json(&path, &manifest));
    if let Err(e) = &written {
        eprintln!("error: could not write manifest {}: {e:#}", path.display());
    }
    match error {
        Some(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
        None if written.is_err() => ExitCode::FAILURE,
        None => ExitCode::SUCCESS,
    }
}
