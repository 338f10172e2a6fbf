//! Image tensors and labeled-image manifests (`path<TAB>label` per line,
//! relative paths resolved against the manifest's directory).

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{DynamicImage, RgbImage};
use ndarray::Array3;

use super::train::LabeledImage;
use crate::{Error, Result, SentimentClass};

/// RGB pixels scaled to `[0, 1]`, `(3, height, width)`.
pub fn image_to_tensor(img: &RgbImage) -> Array3<f64> {
    let (w, h) = img.dimensions();
    Array3::from_shape_fn((3, h as usize, w as usize), |(c, y, x)| {
        f64::from(img.get_pixel(x as u32, y as u32)[c]) / 255.0
    })
}

/// Converts to RGB and resizes to `(height, width)` when needed.
pub fn fit_image(img: &DynamicImage, height: usize, width: usize) -> RgbImage {
    let rgb = img.to_rgb8();
    if rgb.dimensions() == (width as u32, height as u32) {
        rgb
    } else {
        image::imageops::resize(&rgb, width as u32, height as u32, FilterType::Triangle)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: SentimentClass,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (n, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: &str| {
            Error::InvalidArgument(format!("{}:{}: {why}", path.display(), n + 1))
        };
        let (file, label) = line.rsplit_once('\t').ok_or_else(|| bad("missing tab"))?;
        let code: u8 = label.trim().parse().map_err(|_| bad("label is not an integer"))?;
        let label = SentimentClass::try_from(code).map_err(|_| bad("label out of range"))?;
        out.push(ManifestEntry {
            path: base.join(file),
            label,
        });
    }
    Ok(out)
}

/// Writes entries with paths relative to the manifest's directory when
/// possible.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut body = String::new();
    for e in entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        let rel = rel.to_string_lossy().replace('\\', "/");
        body.push_str(&format!("{rel}\t{}\n", e.label.code()));
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Decodes every manifest image and fits it to `(height, width)`.
pub fn load_manifest_images(path: &Path, height: usize, width: usize) -> Result<Vec<LabeledImage>> {
    read_manifest(path)?
        .into_iter()
        .map(|e| {
            let img = image::open(&e.path).map_err(|err| Error::CorruptMedia {
                path: e.path.clone(),
                reason: err.to_string(),
            })?;
            Ok(LabeledImage {
                pixels: image_to_tensor(&fit_image(&img, height, width)),
                label: e.label,
            })
        })
        .collect()
}
