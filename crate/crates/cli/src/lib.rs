//! `reactlens` command line: pipeline subcommands and the annotation API.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod server;

use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use reactlens::annotate::AnnotationService;
use reactlens::corpus::PostFormat;
use reactlens::text_model::FrozenLayers;

use crate::config::LoadedConfig;
use crate::pipeline::{FixtureArgs, Layout, TrainImageArgs, TrainTextArgs};

#[derive(Debug, Parser)]
#[command(name = "reactlens", version, about = "Post corpus pipeline: clean, enrich, classify, report")]
pub struct Cli {
    /// Pipeline config file (TOML).
    #[arg(short, long, global = true, default_value = "reactlens.toml")]
    pub config: PathBuf,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus to the configured paths.
    Fixture {
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Post records, injected defects included.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Labeled captions, written when `text.corpus` is set.
        #[arg(long, default_value_t = 400)]
        captions: usize,
        /// Labeled images, written when `image.manifest` is set.
        #[arg(long, default_value_t = 400)]
        images: usize,
    },
    /// Parse a post file into the normalized record-per-line form.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        /// delimited | record-per-line
        #[arg(long)]
        format: Option<PostFormat>,
    },
    /// Drop incomplete, corrupted and duplicate posts.
    Clean {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<PostFormat>,
    },
    /// Merge OCR and subtitle text into captions, translate and trim.
    Enrich,
    /// Serve the labeling API over the cleaned corpus.
    AnnotateServe {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Train the caption classifier.
    TrainText {
        /// none | embeddings | embeddings+lstm
        #[arg(long)]
        frozen: Option<FrozenLayers>,
        /// Start from this checkpoint (and its vocabulary).
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Artifact subdirectory.
        #[arg(long, default_value = "text")]
        tag: String,
    },
    /// Train or fine-tune the image classifier.
    TrainImage {
        /// Leading layers held fixed.
        #[arg(long)]
        frozen_prefix: Option<usize>,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "image")]
        tag: String,
    },
    /// Accuracy and confusion matrices on the training and held-out splits.
    Evaluate {
        #[arg(long, default_value = "text")]
        text_tag: String,
        #[arg(long, default_value = "image")]
        image_tag: String,
    },
    /// Geographic, country, overlap and engagement tables and plots.
    Report,
}

/// Runs one subcommand to completion and writes its run manifest.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = LoadedConfig::load(&cli.config)?;
    let (name, manifest) = match &cli.command {
        Command::Fixture {
            seed,
            n,
            captions,
            images,
        } => {
            let args = FixtureArgs {
                seed: seed.unwrap_or(cfg.config.seed),
                posts: *n,
                captions: *captions,
                images: *images,
            };
            ("fixture".to_string(), pipeline::fixture(&cfg, &args)?)
        }
        Command::Ingest { input, format } => (
            "ingest".into(),
            pipeline::ingest_cmd(&cfg, input.as_deref(), *format)?,
        ),
        Command::Clean { input, format } => (
            "clean".into(),
            pipeline::clean_cmd(&cfg, input.as_deref(), *format)?,
        ),
        Command::Enrich => ("enrich".into(), pipeline::enrich_cmd(&cfg)?),
        Command::AnnotateServe { addr } => {
            return annotate_serve(&cfg, *addr);
        }
        Command::TrainText {
            frozen,
            init,
            epochs,
            tag,
        } => {
            let args = TrainTextArgs {
                tag: tag.clone(),
                frozen: *frozen,
                init: init.clone(),
                epochs: *epochs,
            };
            (format!("train-text-{tag}"), pipeline::train_text_cmd(&cfg, &args)?)
        }
        Command::TrainImage {
            frozen_prefix,
            init,
            epochs,
            tag,
        } => {
            let args = TrainImageArgs {
                tag: tag.clone(),
                frozen_prefix: *frozen_prefix,
                init: init.clone(),
                epochs: *epochs,
            };
            (format!("train-image-{tag}"), pipeline::train_image_cmd(&cfg, &args)?)
        }
        Command::Evaluate {
            text_tag,
            image_tag,
        } => ("evaluate".into(), pipeline::evaluate_cmd(&cfg, text_tag, image_tag)?),
        Command::Report => ("report".into(), pipeline::report_cmd(&cfg)?),
    };
    let path = manifest.write(&cfg, &name)?;
    log::info!("run manifest: {}", path.display());
    Ok(())
}

/// Builds the service over the cleaned corpus and enriched captions.
pub fn annotation_service(cfg: &LoadedConfig) -> Result<AnnotationService> {
    let layout = Layout::new(cfg);
    let posts = pipeline::load_clean_posts(&layout)?;
    let texts = pipeline::enriched_texts(&layout)?;
    if let Some(dir) = cfg.config.paths.annotations.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(AnnotationService::open(
        posts,
        texts,
        &cfg.config.paths.media_root,
        &cfg.config.paths.annotations,
    )?)
}

fn annotate_serve(cfg: &LoadedConfig, addr: SocketAddr) -> Result<()> {
    let service = annotation_service(cfg)?;
    let mut manifest = manifest::RunManifest::new(
        "annotate-serve",
        cfg,
        serde_json::json!({"addr": addr.to_string()}),
    );
    let layout = Layout::new(cfg);
    manifest.input(cfg, &layout.clean_posts())?;
    manifest.input(cfg, &layout.enriched())?;
    manifest.input(cfg, &cfg.config.paths.annotations)?;
    manifest.write(cfg, "annotate-serve")?;
    println!("serving {} posts on http://{addr}", service.total());
    tokio::runtime::Runtime::new()?.block_on(server::serve(service, addr))
}
