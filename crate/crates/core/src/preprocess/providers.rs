use std::fmt;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use thiserror::Error;

use crate::{media, MediaKind, PostRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProviderKind {
    Ocr,
    Subtitle,
    Translation,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Ocr => "ocr",
            ProviderKind::Subtitle => "subtitle",
            ProviderKind::Translation => "translation",
        })
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider failed: {0}")]
    Failed(String),
    #[error("could not run {program}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
}

/// A timed subtitle line.
#[derive(Debug, Clone, PartialEq)]
pub struct Cue {
    pub start_secs: f64,
    pub text: String,
}

impl Cue {
    pub fn new(start_secs: f64, text: impl Into<String>) -> Self {
        Cue {
            start_secs,
            text: text.into(),
        }
    }
}

/// Text of the cues starting before `cap_secs`, in time order.
pub fn cap_cues(cues: &[Cue], cap_secs: f64) -> String {
    let mut kept: Vec<&Cue> = cues.iter().filter(|c| c.start_secs < cap_secs).collect();
    kept.sort_by(|a, b| a.start_secs.total_cmp(&b.start_secs));
    kept.iter()
        .map(|c| c.text.trim())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses `start_secs<TAB>text` lines.
pub fn parse_cues(text: &str) -> Result<Vec<Cue>, ProviderError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (start, body) = l
                .split_once('\t')
                .ok_or_else(|| ProviderError::Failed(format!("cue line without tab: {l:?}")))?;
            let start_secs = start
                .trim()
                .parse::<f64>()
                .map_err(|_| ProviderError::Failed(format!("bad cue start {start:?}")))?;
            Ok(Cue::new(start_secs, body))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderOutput {
    Text(String),
    Cues(Vec<Cue>),
}

pub struct ProviderInput<'a> {
    pub post: &'a PostRecord,
    /// Absolute path of the post's media, when it has any.
    pub media_path: Option<&'a Path>,
    /// Caption (OCR, subtitle) or merged text to translate.
    pub text: &'a str,
}

/// Maps a post's media or text to text. Implementations must be reentrant.
pub trait TextProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn name(&self) -> &str;
    /// Identity providers are skipped and never mark text as translated.
    fn is_identity(&self) -> bool {
        false
    }
    fn run(&self, input: &ProviderInput<'_>) -> Result<ProviderOutput, ProviderError>;
}

/// Offline stand-in: empty text for OCR and subtitles, identity translation.
#[derive(Debug, Clone, Copy)]
pub struct StubProvider(pub ProviderKind);

impl TextProvider for StubProvider {
    fn kind(&self) -> ProviderKind {
        self.0
    }

    fn name(&self) -> &str {
        "stub"
    }

    fn is_identity(&self) -> bool {
        self.0 == ProviderKind::Translation
    }

    fn run(&self, input: &ProviderInput<'_>) -> Result<ProviderOutput, ProviderError> {
        Ok(ProviderOutput::Text(match self.0 {
            ProviderKind::Translation => input.text.to_string(),
            _ => String::new(),
        }))
    }
}

/// Runs an external program.
///
/// * OCR: `program <png>`; videos are passed as their first frame written
///   to a temporary PNG. Stdout is the recognized text.
/// * Subtitle: `program <media>`; stdout is `start_secs<TAB>text` lines.
/// * Translation: text on stdin, translation on stdout.
#[derive(Debug, Clone)]
pub struct CommandProvider {
    pub kind: ProviderKind,
    pub program: String,
}

impl CommandProvider {
    fn exec(&self, arg: Option<&Path>, stdin: Option<&str>) -> Result<String, ProviderError> {
        let spawn_err = |source| ProviderError::Spawn {
            program: self.program.clone(),
            source,
        };
        let mut cmd = Command::new(&self.program);
        if let Some(a) = arg {
            cmd.arg(a);
        }
        cmd.stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let mut child = cmd.spawn().map_err(spawn_err)?;
        if let (Some(text), Some(mut pipe)) = (stdin, child.stdin.take()) {
            pipe.write_all(text.as_bytes()).map_err(spawn_err)?;
        }
        let out = child.wait_with_output().map_err(spawn_err)?;
        if !out.status.success() {
            return Err(ProviderError::Failed(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        String::from_utf8(out.stdout)
            .map_err(|_| ProviderError::Failed(format!("{} wrote non-UTF-8 output", self.program)))
    }
}

impl TextProvider for CommandProvider {
    fn kind(&self) -> ProviderKind {
        self.kind
    }

    fn name(&self) -> &str {
        &self.program
    }

    fn run(&self, input: &ProviderInput<'_>) -> Result<ProviderOutput, ProviderError> {
        match self.kind {
            ProviderKind::Translation => {
                Ok(ProviderOutput::Text(self.exec(None, Some(input.text))?.trim().to_string()))
            }
            ProviderKind::Subtitle => {
                let Some(path) = input.media_path else {
                    return Ok(ProviderOutput::Cues(Vec::new()));
                };
                Ok(ProviderOutput::Cues(parse_cues(&self.exec(Some(path), None)?)?))
            }
            ProviderKind::Ocr => {
                let Some(path) = input.media_path else {
                    return Ok(ProviderOutput::Text(String::new()));
                };
                let text = if input.post.media_kind == Some(MediaKind::Video) {
                    let frame = media::load_media(path, MediaKind::Video)
                        .map_err(|e| ProviderError::Failed(e.to_string()))?;
                    let tmp = std::env::temp_dir().join(format!(
                        "reactlens-ocr-{}-{}.png",
                        std::process::id(),
                        input.post.post_id
                    ));
                    frame
                        .save(&tmp)
                        .map_err(|e| ProviderError::Failed(e.to_string()))?;
                    let out = self.exec(Some(&tmp), None);
                    let _ = std::fs::remove_file(&tmp);
                    out?
                } else {
                    self.exec(Some(path), None)?
                };
                Ok(ProviderOutput::Text(text.trim().to_string()))
            }
        }
    }
}

/// One provider per kind.
pub struct ProviderSet {
    pub ocr: Box<dyn TextProvider>,
    pub subtitle: Box<dyn TextProvider>,
    pub translation: Box<dyn TextProvider>,
}

impl ProviderSet {
    pub fn stubs() -> Self {
        ProviderSet {
            ocr: Box::new(StubProvider(ProviderKind::Ocr)),
            subtitle: Box::new(StubProvider(ProviderKind::Subtitle)),
            translation: Box::new(StubProvider(ProviderKind::Translation)),
        }
    }

    /// Builds a provider from a binding: `"stub"` or an executable name.
    pub fn binding(kind: ProviderKind, binding: &str) -> Box<dyn TextProvider> {
        match binding.trim() {
            "" | "stub" => Box::new(StubProvider(kind)),
            program => Box::new(CommandProvider {
                kind,
                program: program.to_string(),
            }),
        }
    }

    pub fn from_bindings(ocr: &str, subtitle: &str, translation: &str) -> Self {
        ProviderSet {
            ocr: Self::binding(ProviderKind::Ocr, ocr),
            subtitle: Self::binding(ProviderKind::Subtitle, subtitle),
            translation: Self::binding(ProviderKind::Translation, translation),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cues_capped_at_two_minutes() {
        let cues = parse_cues("0\thello\n119.9\tthere\n120\tgone\n30\tmiddle\n").unwrap();
        assert_eq!(cap_cues(&cues, 120.0), "hello middle there");
    }

    #[test]
    fn malformed_cues_rejected() {
        assert!(parse_cues("no tab here").is_err());
        assert!(parse_cues("x\ttext").is_err());
    }

    #[cfg(unix)]
    #[test]
    fn command_translation_uses_stdin() {
        let p = CommandProvider {
            kind: ProviderKind::Translation,
            program: "cat".into(),
        };
        let post = PostRecord::new("1");
        let out = p
            .run(&ProviderInput {
                post: &post,
                media_path: None,
                text: "bonjour",
            })
            .unwrap();
        assert_eq!(out, ProviderOutput::Text("bonjour".into()));
    }

    #[test]
    fn missing_program_is_an_error() {
        let p = CommandProvider {
            kind: ProviderKind::Translation,
            program: "definitely-not-a-real-binary-xyz".into(),
        };
        let post = PostRecord::new("1");
        let r = p.run(&ProviderInput {
            post: &post,
            media_path: None,
            text: "x",
        });
        assert!(matches!(r, Err(ProviderError::Spawn { .. })));
    }
}
