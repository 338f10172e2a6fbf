//! Subcommand implementations. Every artifact lands under the configured
//! output directory:
//!
//! ```text
//! ingest/posts.jsonl, ingest/issues.jsonl
//! clean/posts.jsonl, clean/report.json
//! enrich/captions.jsonl
//! <tag>/model.ckpt, <tag>/history.json, <tag>/split.json   (train-text, train-image)
//! evaluate/<tag>.json
//! report/*.csv, report/*.png
//! manifests/<command>.json
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use image::DynamicImage;
use reactlens::analytics::{
    country_report, engagement_export, geo_aggregate, overlap_matrix, render_reports, Atlas,
    RenderOptions, ReportInputs,
};
use reactlens::checkpoint::Checkpoint;
use reactlens::corpus::fixture::{generate_fixture, labeled_captions, labeled_images};
use reactlens::corpus::{
    clean, export, ingest, label_per_post, read_annotations, write_annotations, PostFormat,
};
use reactlens::image_model::{
    self, fine_tune, fit_image, image_to_tensor, load_manifest_images, read_manifest,
    write_manifest, CnnParams, ImageTrainConfig, LabeledImage, ManifestEntry,
};
use reactlens::media::{encode_png, load_media};
use reactlens::preprocess::{EnrichedCaption, Enricher, ProviderSet};
use reactlens::sampling::stratified_split;
use reactlens::text_model::{
    self, encode_all, read_labeled_text, train, write_labeled_text, AttentionLstmParams,
    FrozenLayers, LabeledText, ModelDims, TrainConfig, Vocabulary,
};
use reactlens::{Evaluation, PostRecord, SentimentClass};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;
use crate::manifest::RunManifest;

const VOCAB_META: &str = "vocab";

/// Artifact locations under the output directory.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &LoadedConfig) -> Self {
        Layout {
            root: cfg.output_dir().to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ingested_posts(&self) -> PathBuf {
        self.root.join("ingest/posts.jsonl")
    }

    pub fn ingest_issues(&self) -> PathBuf {
        self.root.join("ingest/issues.jsonl")
    }

    pub fn clean_posts(&self) -> PathBuf {
        self.root.join("clean/posts.jsonl")
    }

    pub fn clean_report(&self) -> PathBuf {
        self.root.join("clean/report.json")
    }

    pub fn enriched(&self) -> PathBuf {
        self.root.join("enrich/captions.jsonl")
    }

    pub fn model_dir(&self, tag: &str) -> PathBuf {
        self.root.join(tag)
    }

    pub fn evaluation(&self, tag: &str) -> PathBuf {
        self.root.join("evaluate").join(format!("{tag}.json"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&body).with_context(|| format!("parsing {}", path.display()))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    create_parent(path)?;
    let mut body = String::new();
    for item in items {
        body.push_str(&serde_json::to_string(item)?);
        body.push('\n');
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?,
        );
    }
    Ok(out)
}

/// Cleaned posts; `clean` must have run.
pub fn load_clean_posts(layout: &Layout) -> Result<Vec<PostRecord>> {
    let path = layout.clean_posts();
    if !path.exists() {
        bail!("{} not found; run `clean` first", path.display());
    }
    let got = ingest(&path, PostFormat::RecordPerLine)?;
    ensure!(got.errors.is_empty(), "{}: {} unreadable records", path.display(), got.errors.len());
    Ok(got.posts)
}

pub fn load_enriched(layout: &Layout) -> Result<Option<Vec<EnrichedCaption>>> {
    let path = layout.enriched();
    if !path.exists() {
        return Ok(None);
    }
    read_lines(&path).map(Some)
}

// ---------------------------------------------------------------- fixture

pub struct FixtureArgs {
    pub seed: u64,
    pub posts: usize,
    pub captions: usize,
    pub images: usize,
}

pub fn fixture(cfg: &LoadedConfig, args: &FixtureArgs) -> Result<RunManifest> {
    let c = &cfg.config;
    let mut manifest = RunManifest::new(
        "fixture",
        cfg,
        json!({"seed": args.seed, "n": args.posts, "captions": args.captions, "images": args.images}),
    );
    let fx = generate_fixture(args.seed, args.posts)?;
    create_parent(&c.paths.posts)?;
    export(&c.paths.posts, &fx.posts, c.paths.posts_format)?;
    fx.write_media(&c.paths.media_root)?;
    create_parent(&c.paths.annotations)?;
    write_annotations(&c.paths.annotations, &fx.annotations)?;
    manifest.output(cfg, &c.paths.posts)?;
    manifest.output(cfg, &c.paths.media_root)?;
    manifest.output(cfg, &c.paths.annotations)?;

    if let Some(path) = &c.text.corpus {
        let records: Vec<LabeledText> = labeled_captions(args.seed, args.captions)
            .into_iter()
            .map(|l| LabeledText {
                label: l.class,
                text: l.text,
            })
            .collect();
        create_parent(path)?;
        write_labeled_text(path, &records)?;
        manifest.output(cfg, path)?;
    }
    if let Some(path) = &c.image.manifest {
        create_parent(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::with_capacity(args.images);
        for (i, (img, label)) in labeled_images(args.seed, args.images).into_iter().enumerate() {
            let file = dir.join(format!("img_{i:04}.png"));
            std::fs::write(&file, encode_png(&img)?)
                .with_context(|| format!("writing {}", file.display()))?;
            entries.push(ManifestEntry { path: file, label });
        }
        write_manifest(path, &entries)?;
        manifest.output(cfg, dir)?;
    }
    log::info!(
        "fixture: {} posts ({} duplicates, {} incomplete, {} corrupted), {} annotations",
        fx.posts.len(),
        fx.defects.duplicates,
        fx.defects.incomplete,
        fx.defects.corrupted,
        fx.annotations.len()
    );
    Ok(manifest)
}

// ------------------------------------------------------------ ingest/clean

pub fn ingest_cmd(cfg: &LoadedConfig, input: Option<&Path>, format: Option<PostFormat>) -> Result<RunManifest> {
    let layout = Layout::new(cfg);
    let input = input.unwrap_or(&cfg.config.paths.posts);
    let format = format.unwrap_or(cfg.config.paths.posts_format);
    let mut manifest = RunManifest::new("ingest", cfg, json!({"format": format}));
    manifest.input(cfg, input)?;
    let got = ingest(input, format)?;
    for issue in &got.errors {
        log::warn!("{}:{}: {}", input.display(), issue.line, issue.message);
    }
    create_parent(&layout.ingested_posts())?;
    export(&layout.ingested_posts(), &got.posts, PostFormat::RecordPerLine)?;
    write_lines(&layout.ingest_issues(), &got.errors)?;
    manifest.output(cfg, &layout.ingested_posts())?;
    manifest.output(cfg, &layout.ingest_issues())?;
    println!("ingested {} records, {} unreadable", got.posts.len(), got.errors.len());
    Ok(manifest)
}

pub fn clean_cmd(cfg: &LoadedConfig, input: Option<&Path>, format: Option<PostFormat>) -> Result<RunManifest> {
    let layout = Layout::new(cfg);
    let input = input.unwrap_or(&cfg.config.paths.posts);
    let format = format.unwrap_or(cfg.config.paths.posts_format);
    let mut manifest = RunManifest::new("clean", cfg, json!({"format": format}));
    manifest.input(cfg, input)?;
    manifest.input(cfg, &cfg.config.paths.media_root)?;
    let got = ingest(input, format)?;
    if !got.errors.is_empty() {
        log::warn!("{} unreadable records skipped", got.errors.len());
    }
    let (posts, report) = clean(&got.posts, &cfg.config.paths.media_root);
    create_parent(&layout.clean_posts())?;
    export(&layout.clean_posts(), &posts, PostFormat::RecordPerLine)?;
    write_json(&layout.clean_report(), &report)?;
    manifest.output(cfg, &layout.clean_posts())?;
    manifest.output(cfg, &layout.clean_report())?;
    println!(
        "clean: {} in, {} duplicates, {} incomplete, {} corrupted, {} out",
        report.input_count,
        report.removed_duplicates,
        report.removed_incomplete,
        report.removed_corrupted,
        report.output_count
    );
    Ok(manifest)
}

// ----------------------------------------------------------------- enrich

pub fn enrich_cmd(cfg: &LoadedConfig) -> Result<RunManifest> {
    let layout = Layout::new(cfg);
    let p = &cfg.config.providers;
    let mut manifest = RunManifest::new(
        "enrich",
        cfg,
        json!({"ocr": p.ocr, "subtitle": p.subtitle, "translation": p.translation}),
    );
    manifest.input(cfg, &layout.clean_posts())?;
    let posts = load_clean_posts(&layout)?;
    let enricher = Enricher::new(
        ProviderSet::from_bindings(&p.ocr, &p.subtitle, &p.translation),
        &cfg.config.paths.media_root,
    );
    let enriched: Vec<EnrichedCaption> = posts.iter().map(|post| enricher.enrich(post)).collect();
    let failures = enriched.iter().filter(|e| !e.provider_errors.is_empty()).count();
    write_lines(&layout.enriched(), &enriched)?;
    manifest.output(cfg, &layout.enriched())?;
    println!("enriched {} captions, {failures} with provider errors", enriched.len());
    Ok(manifest)
}

// --------------------------------------------------------------- training

/// Which records were held out, tied to the corpus they index into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub corpus_size: usize,
    pub corpus_sha256: String,
    pub holdout: f64,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    fn new(labels: &[usize], keys: &[String], holdout: f64, seed: u64) -> Self {
        let (train, test) = stratified_split(labels, holdout, seed);
        Split {
            corpus_size: labels.len(),
            corpus_sha256: corpus_digest(keys),
            holdout,
            seed,
            train,
            test,
        }
    }

    fn check(&self, keys: &[String]) -> Result<()> {
        ensure!(
            self.corpus_size == keys.len() && self.corpus_sha256 == corpus_digest(keys),
            "the corpus changed since training; retrain before evaluating"
        );
        Ok(())
    }
}

fn corpus_digest(keys: &[String]) -> String {
    let mut h = Sha256::new();
    for k in keys {
        h.update(k.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn training_labels(labels: impl Iterator<Item = SentimentClass>) -> Result<Vec<usize>> {
    labels
        .map(|l| {
            l.training_index()
                .ok_or_else(|| anyhow!("class {} ({}) cannot be trained on", l.code(), l.name()))
        })
        .collect()
}

/// Labeled captions plus one identity key per record for the split digest.
pub fn text_corpus(cfg: &LoadedConfig, layout: &Layout) -> Result<(Vec<LabeledText>, Vec<PathBuf>)> {
    if let Some(path) = &cfg.config.text.corpus {
        return Ok((read_labeled_text(path)?, vec![path.clone()]));
    }
    let enriched = load_enriched(layout)?
        .ok_or_else(|| anyhow!("no text.corpus configured and {} missing; run `enrich` first", layout.enriched().display()))?;
    let anns = read_annotations(&cfg.config.paths.annotations)?;
    let labels = label_per_post(&anns);
    let mut records: Vec<(String, LabeledText)> = enriched
        .into_iter()
        .filter_map(|e| {
            let class = labels.get(&e.post_id)?.caption_class;
            class.training_index()?;
            Some((
                e.post_id,
                LabeledText {
                    label: class,
                    text: e.final_text,
                },
            ))
        })
        .collect();
    records.sort_by(|a, b| a.0.cmp(&b.0));
    Ok((
        records.into_iter().map(|(_, r)| r).collect(),
        vec![layout.enriched(), cfg.config.paths.annotations.clone()],
    ))
}

fn text_keys(records: &[LabeledText]) -> Vec<String> {
    records.iter().map(|r| format!("{}\t{}", r.label.code(), r.text)).collect()
}

pub fn save_text_model(path: &Path, params: &AttentionLstmParams, vocab: &Vocabulary) -> Result<()> {
    let mut ck = params.to_checkpoint();
    ck.metadata.push((VOCAB_META.into(), vocab.to_text()));
    create_parent(path)?;
    ck.save(path)?;
    Ok(())
}

pub fn load_text_model(path: &Path) -> Result<(AttentionLstmParams, Vocabulary)> {
    let ck = Checkpoint::load(path)?;
    let params = AttentionLstmParams::from_checkpoint(&ck, None)?;
    let vocab = Vocabulary::from_text(
        ck.meta(VOCAB_META)
            .ok_or_else(|| anyhow!("{}: checkpoint carries no vocabulary", path.display()))?,
    )?;
    ensure!(
        vocab.len() == params.dims.vocab,
        "{}: vocabulary has {} entries, embedding has {}",
        path.display(),
        vocab.len(),
        params.dims.vocab
    );
    Ok((params, vocab))
}

pub struct TrainTextArgs {
    pub tag: String,
    pub frozen: Option<FrozenLayers>,
    pub init: Option<PathBuf>,
    pub epochs: Option<usize>,
}

pub fn train_text_cmd(cfg: &LoadedConfig, args: &TrainTextArgs) -> Result<RunManifest> {
    let layout = Layout::new(cfg);
    let t = &cfg.config.text;
    let config = TrainConfig {
        seed: cfg.config.seed,
        learning_rate: t.learning_rate,
        epochs: args.epochs.unwrap_or(t.epochs),
        batch_size: t.batch_size,
        frozen: args.frozen.unwrap_or(t.frozen),
        max_len: t.max_len,
        clip_norm: t.clip_norm,
        step_control: t.step_control,
    };
    let mut manifest = RunManifest::new(
        "train-text",
        cfg,
        json!({"tag": args.tag, "train": config, "init": args.init.as_ref().map(|p| cfg.display_path(p))}),
    );
    let (records, inputs) = text_corpus(cfg, &layout)?;
    for p in &inputs {
        manifest.input(cfg, p)?;
    }
    ensure!(!records.is_empty(), "the text corpus is empty");
    let labels = training_labels(records.iter().map(|r| r.label))?;
    let split = Split::new(&labels, &text_keys(&records), t.holdout, cfg.config.seed);
    let train_records = pick(&records, &split.train);

    let (vocab, init) = match &args.init {
        Some(path) => {
            manifest.input(cfg, path)?;
            let (p, v) = load_text_model(path)?;
            (v, Some(p))
        }
        None => (
            Vocabulary::build(train_records.iter().map(|r| r.text.as_str()), t.min_count),
            None,
        ),
    };
    let dims = match &init {
        Some(p) => p.dims,
        None => {
            let mut d = ModelDims::new(vocab.len(), t.embed, t.hidden);
            if let Some(a) = t.aspect {
                d.aspect = a;
            }
            d
        }
    };
    let train_set = encode_all(&train_records, &vocab, config.max_len);
    let (params, history) = train(&train_set, &config, dims, init)?;

    let dir = layout.model_dir(&args.tag);
    let ckpt = dir.join("model.ckpt");
    save_text_model(&ckpt, &params, &vocab)?;
    write_json(&dir.join("history.json"), &history)?;
    write_json(&dir.join("split.json"), &split)?;
    for f in ["model.ckpt", "history.json", "split.json"] {
        manifest.output(cfg, &dir.join(f))?;
    }
    let last = history.last().expect("at least one epoch");
    println!(
        "train-text: {} train / {} held out, final loss {:.4}, train accuracy {:.3}",
        split.train.len(),
        split.test.len(),
        last.loss,
        last.accuracy
    );
    Ok(manifest)
}

/// Labeled images plus identity keys for the split digest.
pub fn image_corpus(
    cfg: &LoadedConfig,
    layout: &Layout,
    input: (usize, usize, usize),
) -> Result<(Vec<LabeledImage>, Vec<String>, Vec<PathBuf>)> {
    let (channels, h, w) = input;
    ensure!(channels == 3, "image input must have 3 channels, got {channels}");
    if let Some(path) = &cfg.config.image.manifest {
        let keys = read_manifest(path)?
            .iter()
            .map(|e| format!("{}\t{}", cfg.display_path(&e.path), e.label.code()))
            .collect();
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        return Ok((load_manifest_images(path, h, w)?, keys, vec![dir]));
    }
    let posts = load_clean_posts(layout)?;
    let anns = read_annotations(&cfg.config.paths.annotations)?;
    let labels = label_per_post(&anns);
    let mut rows: Vec<(&PostRecord, SentimentClass)> = posts
        .iter()
        .filter_map(|p| {
            let class = labels.get(&p.post_id)?.image_class;
            class.training_index()?;
            p.media_path.as_ref()?;
            p.media_kind?;
            Some((p, class))
        })
        .collect();
    rows.sort_by(|a, b| a.0.post_id.cmp(&b.0.post_id));
    let mut images = Vec::with_capacity(rows.len());
    let mut keys = Vec::with_capacity(rows.len());
    for (post, label) in rows {
        let path = cfg.config.paths.media_root.join(post.media_path.as_deref().unwrap_or_default());
        let frame = match load_media(&path, post.media_kind.expect("filtered")) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{}: skipping media: {e}", post.post_id);
                continue;
            }
        };
        let fitted = fit_image(&DynamicImage::ImageRgb8(frame), h, w);
        images.push(LabeledImage {
            pixels: image_to_tensor(&fitted),
            label,
        });
        keys.push(format!("{}\t{}", post.post_id, label.code()));
    }
    Ok((
        images,
        keys,
        vec![
            layout.clean_posts(),
            cfg.config.paths.media_root.clone(),
            cfg.config.paths.annotations.clone(),
        ],
    ))
}

pub struct TrainImageArgs {
    pub tag: String,
    pub frozen_prefix: Option<usize>,
    pub init: Option<PathBuf>,
    pub epochs: Option<usize>,
}

pub fn train_image_cmd(cfg: &LoadedConfig, args: &TrainImageArgs) -> Result<RunManifest> {
    let layout = Layout::new(cfg);
    let im = &cfg.config.image;
    let mut spec = cfg.cnn_spec()?;
    if let Some(k) = args.frozen_prefix {
        spec.frozen_prefix = k;
        spec.validate()?;
    }
    let config = ImageTrainConfig {
        seed: cfg.config.seed,
        learning_rate: im.learning_rate,
        epochs: args.epochs.unwrap_or(im.epochs),
        batch_size: im.batch_size,
        step_control: im.step_control,
    };
    let mut manifest = RunManifest::new(
        "train-image",
        cfg,
        json!({"tag": args.tag, "train": config, "spec": spec, "init": args.init.as_ref().map(|p| cfg.display_path(p))}),
    );
    let (images, keys, inputs) = image_corpus(cfg, &layout, spec.input)?;
    for p in &inputs {
        manifest.input(cfg, p)?;
    }
    ensure!(!images.is_empty(), "the image corpus is empty");
    let labels = training_labels(images.iter().map(|i| i.label))?;
    let split = Split::new(&labels, &keys, im.holdout, cfg.config.seed);
    let init = match &args.init {
        Some(path) => {
            manifest.input(cfg, path)?;
            Some(CnnParams::from_checkpoint(&Checkpoint::load(path)?, Some(&spec))?)
        }
        None => None,
    };
    let (params, history) = fine_tune(&pick(&images, &split.train), &spec, &config, init)?;

    let dir = layout.model_dir(&args.tag);
    let ckpt = dir.join("model.ckpt");
    create_parent(&ckpt)?;
    params.to_checkpoint().save(&ckpt)?;
    write_json(&dir.join("history.json"), &history)?;
    write_json(&dir.join("split.json"), &split)?;
    for f in ["model.ckpt", "history.json", "split.json"] {
        manifest.output(cfg, &dir.join(f))?;
    }
    let last = history.last().expect("at least one epoch");
    println!(
        "train-image: {} train / {} held out, final loss {:.4}, train accuracy {:.3}",
        split.train.len(),
        split.test.len(),
        last.loss,
        last.accuracy
    );
    Ok(manifest)
}

// ------------------------------------------------------------- evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub train: Evaluation,
    /// Absent when nothing was held out.
    pub test: Option<Evaluation>,
}

fn evaluate_split<T>(
    items: &[T],
    split: &Split,
    eval: impl Fn(&[T]) -> reactlens::Result<Evaluation>,
) -> Result<(Evaluation, Option<Evaluation>)>
where
    T: Clone,
{
    let train = eval(&pick(items, &split.train))?;
    let test = if split.test.is_empty() {
        None
    } else {
        Some(eval(&pick(items, &split.test))?)
    };
    Ok((train, test))
}

pub fn evaluate_cmd(cfg: &LoadedConfig, text_tag: &str, image_tag: &str) -> Result<RunManifest> {
    let layout = Layout::new(cfg);
    let mut manifest = RunManifest::new(
        "evaluate",
        cfg,
        json!({"text_tag": text_tag, "image_tag": image_tag}),
    );
    let mut evaluated = 0;

    let text_dir = layout.model_dir(text_tag);
    if text_dir.join("model.ckpt").exists() {
        let (params, vocab) = load_text_model(&text_dir.join("model.ckpt"))?;
        let split: Split = read_json(&text_dir.join("split.json"))?;
        let (records, inputs) = text_corpus(cfg, &layout)?;
        split.check(&text_keys(&records))?;
        manifest.input(cfg, &text_dir.join("model.ckpt"))?;
        for p in &inputs {
            manifest.input(cfg, p)?;
        }
        let seqs = encode_all(&records, &vocab, cfg.config.text.max_len);
        let (train, test) = evaluate_split(&seqs, &split, |s| text_model::evaluate(&params, s))?;
        let out = layout.evaluation(text_tag);
        write_json(&out, &EvaluationReport { model: "text".into(), train, test: test.clone() })?;
        manifest.output(cfg, &out)?;
        println!("evaluate {text_tag}: held-out accuracy {}", fmt_acc(&test));
        evaluated += 1;
    }

    let image_dir = layout.model_dir(image_tag);
    if image_dir.join("model.ckpt").exists() {
        let params = CnnParams::from_checkpoint(&Checkpoint::load(&image_dir.join("model.ckpt"))?, None)?;
        let split: Split = read_json(&image_dir.join("split.json"))?;
        let (images, keys, inputs) = image_corpus(cfg, &layout, params.spec.input)?;
        split.check(&keys)?;
        manifest.input(cfg, &image_dir.join("model.ckpt"))?;
        for p in &inputs {
            manifest.input(cfg, p)?;
        }
        let (train, test) = evaluate_split(&images, &split, |s| image_model::evaluate(&params, s))?;
        let out = layout.evaluation(image_tag);
        write_json(&out, &EvaluationReport { model: "image".into(), train, test: test.clone() })?;
        manifest.output(cfg, &out)?;
        println!("evaluate {image_tag}: held-out accuracy {}", fmt_acc(&test));
        evaluated += 1;
    }

    ensure!(evaluated > 0, "no trained model under {}; run train-text or train-image first", layout.root().display());
    Ok(manifest)
}

fn fmt_acc(e: &Option<Evaluation>) -> String {
    e.as_ref()
        .map(|e| format!("{:.3}", e.accuracy))
        .unwrap_or_else(|| "n/a (nothing held out)".into())
}

// ----------------------------------------------------------------- report

pub fn report_cmd(cfg: &LoadedConfig) -> Result<RunManifest> {
    let layout = Layout::new(cfg);
    let r = &cfg.config.report;
    let mut manifest = RunManifest::new(
        "report",
        cfg,
        json!({"geo_resolution": r.geo_resolution, "geo_metric": r.geo_metric, "top_k": r.top_k,
               "likes_cap": r.likes_cap, "bar_y_cap": r.bar_y_cap}),
    );
    manifest.input(cfg, &layout.clean_posts())?;
    manifest.input(cfg, &cfg.config.paths.annotations)?;
    let posts = load_clean_posts(&layout)?;
    let anns = read_annotations(&cfg.config.paths.annotations)?;
    let atlas = Atlas::bundled();
    let metric = r.metric()?;

    let geo = geo_aggregate(&posts, metric, r.geo_resolution)?;
    let countries = country_report(&posts, &anns, r.top_k, atlas)?;
    let overlap = overlap_matrix(&anns);
    let engagement = engagement_export(&posts, &anns, r.likes_cap);
    let inputs = ReportInputs {
        geo: &geo,
        geo_resolution: r.geo_resolution,
        geo_metric: metric,
        countries: &countries,
        overlap: &overlap,
        engagement: &engagement,
    };
    let written = render_reports(
        &layout.report_dir(),
        &inputs,
        &RenderOptions {
            bar_y_cap: r.bar_y_cap,
        },
    )?;
    for p in &written {
        manifest.output(cfg, p)?;
    }
    println!(
        "report: {} cells, {} countries, {} labeled posts ({:.1}% cross-modal agreement), {} engagement points",
        geo.len(),
        countries.len(),
        overlap.total(),
        100.0 * overlap.agreement_rate(),
        engagement.points.len()
    );
    Ok(manifest)
}

/// Enriched text per post id, for the annotation queue.
pub fn enriched_texts(layout: &Layout) -> Result<HashMap<String, String>> {
    Ok(load_enriched(layout)?
        .unwrap_or_default()
        .into_iter()
        .map(|e| (e.post_id, e.final_text))
        .collect())
}
