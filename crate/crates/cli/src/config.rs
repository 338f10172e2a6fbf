//! Pipeline configuration file (TOML).
//!
//! Relative paths are resolved against the directory holding the config
//! file. `REACTLENS_OUTPUT_DIR`, when set, replaces `paths.output_dir`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reactlens::analytics::GeoMetric;
use reactlens::corpus::PostFormat;
use reactlens::image_model::CnnSpec;
use reactlens::optim::BoldDriver;
use reactlens::text_model::FrozenLayers;
use serde::Deserialize;
use sha2::{Digest, Sha256};

pub const OUTPUT_DIR_ENV: &str = "REACTLENS_OUTPUT_DIR";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Raw post file read by `ingest` and `clean`.
    pub posts: PathBuf,
    #[serde(default = "default_posts_format")]
    pub posts_format: PostFormat,
    pub media_root: PathBuf,
    /// Append-only annotation store.
    pub annotations: PathBuf,
    pub output_dir: PathBuf,
}

fn default_posts_format() -> PostFormat {
    PostFormat::RecordPerLine
}

/// Executable name per provider kind, or `"stub"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersSection {
    #[serde(default = "stub")]
    pub ocr: String,
    #[serde(default = "stub")]
    pub subtitle: String,
    #[serde(default = "stub")]
    pub translation: String,
}

fn stub() -> String {
    "stub".into()
}

impl Default for ProvidersSection {
    fn default() -> Self {
        ProvidersSection {
            ocr: stub(),
            subtitle: stub(),
            translation: stub(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextSection {
    /// Labeled text file (`code<TAB>text`). Without it the corpus is built
    /// from enriched captions and their annotated caption class.
    pub corpus: Option<PathBuf>,
    pub embed: usize,
    pub hidden: usize,
    /// Aspect width; defaults to `hidden`.
    pub aspect: Option<usize>,
    pub min_count: usize,
    pub holdout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: Option<f64>,
    pub frozen: FrozenLayers,
    pub max_len: usize,
    pub step_control: Option<BoldDriver>,
}

impl Default for TextSection {
    fn default() -> Self {
        let t = reactlens::text_model::TrainConfig::default();
        TextSection {
            corpus: None,
            embed: 16,
            hidden: 16,
            aspect: None,
            min_count: 1,
            holdout: 0.2,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            clip_norm: t.clip_norm,
            frozen: t.frozen,
            max_len: t.max_len,
            step_control: t.step_control,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    /// Image manifest (`path<TAB>code`). Without it the corpus is built from
    /// cleaned posts' media and their annotated image class.
    pub manifest: Option<PathBuf>,
    /// Architecture as JSON; the built-in desk network otherwise.
    pub spec: Option<PathBuf>,
    pub frozen_prefix: usize,
    pub holdout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_control: Option<BoldDriver>,
}

impl Default for ImageSection {
    fn default() -> Self {
        let t = reactlens::image_model::ImageTrainConfig::default();
        ImageSection {
            manifest: None,
            spec: None,
            frozen_prefix: 0,
            holdout: 0.2,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            step_control: t.step_control,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub geo_resolution: f64,
    pub geo_metric: String,
    pub top_k: usize,
    pub likes_cap: Option<u64>,
    pub bar_y_cap: u64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            geo_resolution: 1.0,
            geo_metric: "posts".into(),
            top_k: 15,
            likes_cap: Some(5000),
            bar_y_cap: 60,
        }
    }
}

impl ReportSection {
    pub fn metric(&self) -> Result<GeoMetric> {
        self.geo_metric.parse().map_err(anyhow::Error::msg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: PathsSection,
    #[serde(default)]
    pub providers: ProvidersSection,
    #[serde(default)]
    pub text: TextSection,
    #[serde(default)]
    pub image: ImageSection,
    #[serde(default)]
    pub report: ReportSection,
}

/// A parsed config with absolute paths and the digest of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    /// Directory relative paths were resolved against.
    pub base_dir: PathBuf,
    pub sha256: String,
}

fn absolute(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let base = if base.as_os_str().is_empty() {
            std::env::current_dir()?
        } else {
            base
        };
        let env_out = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
        Self::parse(&text, &base, env_out)
            .with_context(|| format!("in config {}", path.display()))
    }

    /// `output_override` stands in for the environment variable.
    pub fn parse(text: &str, base_dir: &Path, output_override: Option<PathBuf>) -> Result<Self> {
        let mut config: PipelineConfig = toml::from_str(text)?;
        let base = base_dir.to_path_buf();
        let p = &mut config.paths;
        p.posts = absolute(&base, &p.posts);
        p.media_root = absolute(&base, &p.media_root);
        p.annotations = absolute(&base, &p.annotations);
        p.output_dir = match output_override {
            Some(o) if !o.as_os_str().is_empty() => absolute(&std::env::current_dir()?, &o),
            _ => absolute(&base, &p.output_dir),
        };
        if let Some(c) = &mut config.text.corpus {
            *c = absolute(&base, c);
        }
        if let Some(m) = &mut config.image.manifest {
            *m = absolute(&base, m);
        }
        if let Some(s) = &mut config.image.spec {
            *s = absolute(&base, s);
        }
        for (name, v) in [("text.holdout", config.text.holdout), ("image.holdout", config.image.holdout)] {
            if !(0.0..1.0).contains(&v) {
                bail!("{name} must be in [0, 1), got {v}");
            }
        }
        config.report.metric()?;
        Ok(LoadedConfig {
            config,
            base_dir: base,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.paths.output_dir
    }

    pub fn cnn_spec(&self) -> Result<CnnSpec> {
        let mut spec = match &self.config.image.spec {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading image spec {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing image spec {}", path.display()))?
            }
            None => CnnSpec::desk(),
        };
        spec.frozen_prefix = self.config.image.frozen_prefix;
        spec.validate()?;
        Ok(spec)
    }

    /// `path` relative to the config directory when it lies beneath it.
    pub fn display_path(&self, path: &Path) -> String {
        path.strip_prefix(&self.base_dir)
            .or_else(|_| path.strip_prefix(self.output_dir()))
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }
}
