use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::{Numeric, POST_FIELDS};
use super::PostRecord;
use crate::{Error, Result};

/// On-disk layout of a post file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostFormat {
    /// Comma-separated with a header row naming the columns.
    Delimited,
    /// One JSON object per line.
    RecordPerLine,
}

impl FromStr for PostFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "delimited" | "csv" => Ok(PostFormat::Delimited),
            "record-per-line" | "jsonl" => Ok(PostFormat::RecordPerLine),
            other => Err(format!("unknown post format {other:?}")),
        }
    }
}

/// A row that could not become a [`PostRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    /// 1-based line (record-per-line) or row (delimited, header excluded).
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub posts: Vec<PostRecord>,
    pub errors: Vec<ParseIssue>,
}

pub fn ingest(path: &Path, format: PostFormat) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        PostFormat::RecordPerLine => ingest_lines(BufReader::new(file), path),
        PostFormat::Delimited => ingest_delimited(file, path),
    }
}

fn ingest_lines(reader: impl BufRead, path: &Path) -> Result<Ingested> {
    let mut out = Ingested::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PostRecord>(&line) {
            Ok(p) if p.post_id.trim().is_empty() => out.errors.push(ParseIssue {
                line: i + 1,
                message: "empty post_id".into(),
            }),
            Ok(p) => out.posts.push(p),
            Err(e) => out.errors.push(ParseIssue {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

fn ingest_delimited(file: File, path: &Path) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(file);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(path, e)),
    };
    let mut out = Ingested::default();
    if headers.is_empty() {
        return Ok(out);
    }
    for (i, row) in reader.records().enumerate() {
        let line = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.errors.push(ParseIssue {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if row.len() != headers.len() {
            out.errors.push(ParseIssue {
                line,
                message: format!("expected {} fields, found {}", headers.len(), row.len()),
            });
            continue;
        }
        match record_from_row(headers.iter().zip(row.iter())) {
            Ok(p) => out.posts.push(p),
            Err(message) => out.errors.push(ParseIssue { line, message }),
        }
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    }
}

fn record_from_row<'a>(
    cells: impl Iterator<Item = (&'a str, &'a str)>,
) -> std::result::Result<PostRecord, String> {
    let mut post = PostRecord::new("");
    for (name, value) in cells {
        if value.is_empty() {
            continue;
        }
        let text = || Some(value.to_string());
        match name.trim() {
            "post_id" => post.post_id = value.trim().to_string(),
            "shortcode" => post.shortcode = text(),
            "created_at" => post.created_at = Some(Numeric::parse(value)),
            "media_kind" => post.media_kind = Some(value.parse()?),
            "source_url" => post.source_url = text(),
            "image_url_low" => post.image_url_low = text(),
            "image_url_high" => post.image_url_high = text(),
            "caption" => post.caption = text(),
            "owner_id" => post.owner_id = text(),
            "likes_count" => post.likes_count = Some(Numeric::parse(value)),
            "comments_count" => post.comments_count = Some(Numeric::parse(value)),
            "location_name" => post.location_name = text(),
            "latitude" => post.latitude = Some(Numeric::parse(value)),
            "longitude" => post.longitude = Some(Numeric::parse(value)),
            "media_path" => post.media_path = text(),
            _ => {}
        }
    }
    if post.post_id.is_empty() {
        return Err("missing post_id".into());
    }
    Ok(post)
}

/// Writes posts in the given format; absent fields are omitted (record-per-line)
/// or left as empty cells (delimited).
pub fn export(path: &Path, posts: &[PostRecord], format: PostFormat) -> Result<()> {
    let bytes = match format {
        PostFormat::RecordPerLine => {
            let mut buf = Vec::new();
            for p in posts {
                serde_json::to_writer(&mut buf, p)?;
                buf.push(b'\n');
            }
            buf
        }
        PostFormat::Delimited => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
            w.write_record(POST_FIELDS).map_err(csv_err)?;
            for p in posts {
                let row: Vec<String> = POST_FIELDS
                    .iter()
                    .map(|f| p.field_text(f).unwrap_or_default())
                    .collect();
                w.write_record(&row).map_err(csv_err)?;
            }
            w.into_inner()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
        }
    };
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MediaKind;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn record_with_shortcode() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "one.jsonl",
            r#"{"post_id":"2254071","shortcode":"B8o8MQHJbMc","created_at":1582000000,"media_kind":"image","caption":"stay safe","likes_count":3,"comments_count":0}"#,
        );
        let got = ingest(&p, PostFormat::RecordPerLine).unwrap();
        assert!(got.errors.is_empty());
        assert_eq!(got.posts[0].shortcode.as_deref(), Some("B8o8MQHJbMc"));
        assert_eq!(got.posts[0].media_kind, Some(MediaKind::Image));
    }

    #[test]
    fn empty_file_is_empty_collection() {
        let dir = tempfile::tempdir().unwrap();
        for (name, fmt) in [("e.jsonl", PostFormat::RecordPerLine), ("e.csv", PostFormat::Delimited)] {
            let p = write(dir.path(), name, "");
            assert_eq!(ingest(&p, fmt).unwrap(), Ingested::default());
        }
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = ingest(Path::new("/nonexistent/posts.jsonl"), PostFormat::RecordPerLine);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn rows_without_post_id_are_reported() {
        // 10 rows; rows 4 and 9 lack post_id.
        let mut body = String::new();
        for i in 1..=10 {
            if i == 4 || i == 9 {
                body.push_str(&format!("{{\"shortcode\":\"s{i}\",\"caption\":\"c\"}}\n"));
            } else {
                body.push_str(&format!("{{\"post_id\":\"p{i}\",\"shortcode\":\"s{i}\"}}\n"));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "ten.jsonl", &body);
        let got = ingest(&p, PostFormat::RecordPerLine).unwrap();
        assert_eq!(got.posts.len(), 8);
        assert_eq!(got.errors.len(), 2);
        assert_eq!(got.errors[0].line, 4);
        assert_eq!(got.errors[1].line, 9);
    }

    #[test]
    fn delimited_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "p.csv",
            "post_id,shortcode,media_kind,likes_count,latitude,longitude,caption\n\
             1,B8o8MQHJbMc,image,12,48.85,2.35,\"hello, world\"\n\
             ,x,image,1,,,\n\
             3,y,hologram,1,,,\n\
             4,z,video,n/a,,,\n\
             5,short\n",
        );
        let got = ingest(&p, PostFormat::Delimited).unwrap();
        assert_eq!(got.posts.len(), 2);
        assert_eq!(got.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 3, 5]);
        assert_eq!(got.posts[0].caption.as_deref(), Some("hello, world"));
        assert_eq!(got.posts[0].coordinates(), Some((48.85, 2.35)));
        assert!(got.posts[1].has_corrupt_fields());
    }
}
