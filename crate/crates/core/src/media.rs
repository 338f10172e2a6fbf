//! Media decoding.
//!
//! Still images are any format the `image` crate decodes (PNG is what the
//! fixtures write). Videos are stored as a frame-sequence container:
//!
//! ```text
//! b"RLFRAMES"  u32-le frame_count  { u32-le byte_len  PNG bytes } * frame_count
//! ```

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::{Error, MediaKind, Result};

pub const FRAME_MAGIC: &[u8; 8] = b"RLFRAMES";

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Packs frames into the container format.
pub fn encode_frames(frames: &[RgbImage]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16);
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for f in frames {
        let png = encode_png(f)?;
        out.extend_from_slice(&(png.len() as u32).to_le_bytes());
        out.extend_from_slice(&png);
    }
    Ok(out)
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptMedia {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Decodes the temporally first frame of a container held in memory.
/// `path` is used only for error reporting.
pub fn first_frame_from_bytes(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    let header = bytes
        .get(..12)
        .ok_or_else(|| corrupt(path, "truncated container header"))?;
    if &header[..8] != FRAME_MAGIC {
        return Err(corrupt(path, "not a frame container"));
    }
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if count == 0 {
        return Err(corrupt(path, "container holds no frames"));
    }
    let len = bytes
        .get(12..16)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .ok_or_else(|| corrupt(path, "truncated frame header"))?;
    let frame = bytes
        .get(16..16 + len)
        .ok_or_else(|| corrupt(path, "truncated frame"))?;
    image::load_from_memory(frame)
        .map(|img| img.to_rgb8())
        .map_err(|e| corrupt(path, e.to_string()))
}

pub fn decode_image_bytes(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    image::load_from_memory(bytes)
        .map(|img| img.to_rgb8())
        .map_err(|e| corrupt(path, e.to_string()))
}

/// The single frame the classifiers look at: the image itself, or the first
/// frame of a video.
pub fn load_media(path: &Path, kind: MediaKind) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match kind {
        MediaKind::Image => decode_image_bytes(&bytes, path),
        MediaKind::Video => first_frame_from_bytes(&bytes, path),
    }
}
