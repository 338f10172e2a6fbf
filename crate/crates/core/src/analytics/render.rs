//! CSV tables and PNG plots for the aggregates.
//!
//! Tables (fixed column order):
//!
//! * `geo_cells.csv`: `lat_bin,lon_bin,lat_min,lon_min,post_count,likes_sum,comments_sum`
//! * `countries.csv`: `country_code,post_count,memes_humor,news_neutral,positive,negative,random`
//! * `overlap.csv`: `image_class` then one column per caption class
//! * `engagement_points.csv`: `post_id,likes_count,comments_count,image_class,caption_class,ratio`
//! * `engagement_ratios.csv`: `class,image_posts,image_mean_ratio,caption_posts,caption_mean_ratio`
//!
//! Plots are skipped when their table has no data rows.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::{
    Atlas, CountryAggregate, EngagementExport, GeoAggregate, GeoMetric, OverlapMatrix,
    CLASS_COLUMNS,
};
use crate::{Error, Result};

pub const REPORT_FILES: [&str; 5] = [
    "geo_cells.csv",
    "countries.csv",
    "overlap.csv",
    "engagement_points.csv",
    "engagement_ratios.csv",
];

pub struct ReportInputs<'a> {
    pub geo: &'a [GeoAggregate],
    pub geo_resolution: f64,
    pub geo_metric: GeoMetric,
    /// Rows of the country bar chart, already ranked.
    pub countries: &'a [CountryAggregate],
    pub overlap: &'a OverlapMatrix,
    pub engagement: &'a EngagementExport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    /// Bars taller than this are clipped.
    pub bar_y_cap: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { bar_y_cap: 60 }
    }
}

const CLASS_COLORS: [[u8; 3]; 5] = [
    [230, 159, 0],
    [86, 180, 233],
    [0, 158, 115],
    [213, 94, 0],
    [150, 150, 150],
];
const UNLABELED: [u8; 3] = [210, 210, 210];
const BACKGROUND: [u8; 3] = [255, 255, 255];

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    let bytes = crate::media::encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn fill(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    for y in y0.max(0)..y1.min(h) {
        for x in x0.max(0)..x1.min(w) {
            img.put_pixel(x as u32, y as u32, Rgb(color));
        }
    }
}

fn blend(from: [u8; 3], to: [u8; 3], t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    std::array::from_fn(|i| (from[i] as f64 + (to[i] as f64 - from[i] as f64) * t).round() as u8)
}

/// Writes every table and, where there is data, its plot. Returns the written
/// paths in a fixed order.
pub fn render_reports(dir: &Path, inputs: &ReportInputs, options: &RenderOptions) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let res = inputs.geo_resolution;

    let path = dir.join(REPORT_FILES[0]);
    write_rows(
        &path,
        &["lat_bin", "lon_bin", "lat_min", "lon_min", "post_count", "likes_sum", "comments_sum"],
        inputs
            .geo
            .iter()
            .map(|c| {
                vec![
                    c.lat_bin.to_string(),
                    c.lon_bin.to_string(),
                    (c.lat_bin as f64 * res).to_string(),
                    (c.lon_bin as f64 * res).to_string(),
                    c.post_count.to_string(),
                    c.likes_sum.to_string(),
                    c.comments_sum.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(path);

    let path = dir.join(REPORT_FILES[1]);
    let mut header = vec!["country_code", "post_count"];
    header.extend(CLASS_COLUMNS);
    write_rows(
        &path,
        &header,
        inputs
            .countries
            .iter()
            .map(|c| {
                let mut row = vec![c.country_code.clone(), c.post_count.to_string()];
                row.extend(c.class_counts.iter().map(u64::to_string));
                row
            })
            .collect(),
    )?;
    written.push(path);

    let path = dir.join(REPORT_FILES[2]);
    let mut header = vec!["image_class"];
    header.extend(CLASS_COLUMNS);
    let overlap_rows = if inputs.overlap.total() == 0 {
        Vec::new()
    } else {
        inputs
            .overlap
            .counts
            .iter()
            .zip(CLASS_COLUMNS)
            .map(|(row, name)| {
                let mut r = vec![name.to_string()];
                r.extend(row.iter().map(u64::to_string));
                r
            })
            .collect()
    };
    write_rows(&path, &header, overlap_rows)?;
    written.push(path);

    let path = dir.join(REPORT_FILES[3]);
    write_rows(
        &path,
        &["post_id", "likes_count", "comments_count", "image_class", "caption_class", "ratio"],
        inputs
            .engagement
            .points
            .iter()
            .map(|p| {
                vec![
                    p.post_id.clone(),
                    p.likes_count.to_string(),
                    p.comments_count.to_string(),
                    p.image_class.code().to_string(),
                    p.caption_class.code().to_string(),
                    p.ratio().to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(path);

    let path = dir.join(REPORT_FILES[4]);
    write_rows(
        &path,
        &["class", "image_posts", "image_mean_ratio", "caption_posts", "caption_mean_ratio"],
        inputs
            .engagement
            .ratios
            .iter()
            .map(|r| {
                vec![
                    r.class.code().to_string(),
                    r.image_posts.to_string(),
                    opt(r.image_mean_ratio),
                    r.caption_posts.to_string(),
                    opt(r.caption_mean_ratio),
                ]
            })
            .collect(),
    )?;
    written.push(path);

    if !inputs.geo.is_empty() {
        let path = dir.join("geo_heatmap.png");
        save_png(&geo_heatmap(inputs.geo, res, inputs.geo_metric), &path)?;
        written.push(path);
    }
    if !inputs.countries.is_empty() {
        let path = dir.join("country_bars.png");
        save_png(&country_bars(inputs.countries, options.bar_y_cap), &path)?;
        written.push(path);
    }
    if inputs.overlap.total() > 0 {
        let path = dir.join("overlap_heatmap.png");
        save_png(&overlap_heatmap(inputs.overlap), &path)?;
        written.push(path);
    }
    if !inputs.engagement.points.is_empty() {
        let path = dir.join("engagement_scatter.png");
        save_png(&engagement_scatter(inputs.engagement), &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Equirectangular world map, two pixels per degree, land from the bundled
/// atlas and cells shaded by `log(1 + value)`.
fn geo_heatmap(cells: &[GeoAggregate], res: f64, metric: GeoMetric) -> RgbImage {
    const PX: f64 = 2.0;
    let (w, h) = ((360.0 * PX) as u32, (180.0 * PX) as u32);
    let mut img = RgbImage::from_pixel(w, h, Rgb([200, 220, 240]));
    let atlas = Atlas::bundled();
    for y in 0..h {
        let lat = 90.0 - (y as f64 + 0.5) / PX;
        for x in 0..w {
            let lon = (x as f64 + 0.5) / PX - 180.0;
            if atlas.countries().iter().any(|c| c.contains(lat, lon)) {
                img.put_pixel(x, y, Rgb([235, 235, 225]));
            }
        }
    }
    let max = cells.iter().map(|c| c.value(metric)).max().unwrap_or(0);
    let scale = ((max as f64) + 1.0).ln().max(f64::MIN_POSITIVE);
    for c in cells {
        let v = c.value(metric);
        if v == 0 {
            continue;
        }
        let t = (v as f64 + 1.0).ln() / scale;
        let color = blend([255, 230, 120], [180, 0, 0], t);
        let (lat0, lon0) = (c.lat_bin as f64 * res, c.lon_bin as f64 * res);
        let x0 = ((lon0 + 180.0) * PX).floor() as i64;
        let x1 = (((lon0 + res + 180.0) * PX).ceil() as i64).max(x0 + 1);
        let y0 = ((90.0 - lat0 - res) * PX).floor() as i64;
        let y1 = (((90.0 - lat0) * PX).ceil() as i64).max(y0 + 1);
        fill(&mut img, x0, y0, x1, y1, color);
    }
    img
}

/// One stacked bar per country, segments per caption class, unlabeled posts
/// on top; everything above `cap` is clipped.
fn country_bars(rows: &[CountryAggregate], cap: u64) -> RgbImage {
    const BAR: i64 = 24;
    const GAP: i64 = 8;
    const HEIGHT: i64 = 300;
    const MARGIN: i64 = 10;
    let cap = cap.max(1);
    let width = MARGIN * 2 + rows.len() as i64 * (BAR + GAP);
    let mut img = RgbImage::from_pixel(width as u32, (HEIGHT + 2 * MARGIN) as u32, Rgb(BACKGROUND));
    let base = MARGIN + HEIGHT;
    for tick in (10..=cap).step_by(10) {
        let y = base - (tick * HEIGHT as u64 / cap) as i64;
        fill(&mut img, MARGIN, y, width - MARGIN, y + 1, [235, 235, 235]);
    }
    for (i, row) in rows.iter().enumerate() {
        let x0 = MARGIN + i as i64 * (BAR + GAP) + GAP / 2;
        let mut segments: Vec<(u64, [u8; 3])> = row
            .class_counts
            .iter()
            .zip(CLASS_COLORS)
            .map(|(&n, c)| (n, c))
            .collect();
        segments.push((row.post_count.saturating_sub(row.annotated()), UNLABELED));
        let mut acc = 0u64;
        for (n, color) in segments {
            let lo = acc.min(cap);
            acc += n;
            let hi = acc.min(cap);
            if hi > lo {
                let y_hi = base - (hi * HEIGHT as u64 / cap) as i64;
                let y_lo = base - (lo * HEIGHT as u64 / cap) as i64;
                fill(&mut img, x0, y_hi, x0 + BAR, y_lo, color);
            }
        }
    }
    fill(&mut img, MARGIN, base, width - MARGIN, base + 1, [0, 0, 0]);
    img
}

fn overlap_heatmap(m: &OverlapMatrix) -> RgbImage {
    const CELL: i64 = 60;
    let mut img = RgbImage::from_pixel((CELL * 5) as u32, (CELL * 5) as u32, Rgb(BACKGROUND));
    let max = m.counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            let color = blend([247, 251, 255], [8, 48, 107], n as f64 / max as f64);
            let (x, y) = (j as i64 * CELL, i as i64 * CELL);
            fill(&mut img, x + 1, y + 1, x + CELL - 1, y + CELL - 1, color);
        }
    }
    img
}

/// Comments on x, likes on y; points above the likes cap are left out.
fn engagement_scatter(e: &EngagementExport) -> RgbImage {
    const W: i64 = 600;
    const H: i64 = 400;
    const MARGIN: i64 = 10;
    let shown: Vec<_> = e
        .points
        .iter()
        .filter(|p| e.likes_cap.is_none_or(|cap| p.likes_count <= cap))
        .collect();
    let max_likes = e
        .likes_cap
        .unwrap_or_else(|| shown.iter().map(|p| p.likes_count).max().unwrap_or(0))
        .max(1) as f64;
    let max_comments = shown.iter().map(|p| p.comments_count).max().unwrap_or(0).max(1) as f64;
    let mut img = RgbImage::from_pixel((W + 2 * MARGIN) as u32, (H + 2 * MARGIN) as u32, Rgb(BACKGROUND));
    fill(&mut img, MARGIN, MARGIN + H, MARGIN + W, MARGIN + H + 1, [0, 0, 0]);
    fill(&mut img, MARGIN, MARGIN, MARGIN + 1, MARGIN + H, [0, 0, 0]);
    for p in shown {
        let x = MARGIN + (p.comments_count as f64 / max_comments * (W - 1) as f64).round() as i64;
        let y = MARGIN + H - 1 - (p.likes_count as f64 / max_likes * (H - 1) as f64).round() as i64;
        fill(&mut img, x - 1, y - 1, x + 2, y + 2, CLASS_COLORS[p.caption_class.index()]);
    }
    img
}
