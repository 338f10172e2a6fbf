use std::collections::HashMap;
use std::path::Path;

use crate::{Error, Result};

pub const PAD: usize = 0;
pub const OOV: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const OOV_TOKEN: &str = "<unk>";

/// Dense token ↔ index map with `PAD = 0` and `OOV = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

/// Lowercases, turns every non-alphanumeric character into a space and
/// splits on whitespace.
pub fn normalize(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

impl Vocabulary {
    /// Builds from ordinary tokens; the special tokens are prepended.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
        let mut index: HashMap<String, usize> = all.iter().cloned().zip(0..).collect();
        for t in tokens {
            let t = t.into();
            if !index.contains_key(&t) {
                index.insert(t.clone(), all.len());
                all.push(t);
            }
        }
        Vocabulary { tokens: all, index }
    }

    /// Tokens occurring at least `min_count` times, most frequent first,
    /// ties in lexicographic order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in texts {
            for w in normalize(t) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_tokens(ranked.into_iter().map(|(w, _)| w))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// Normalized tokens mapped to indices, truncated to `max_len`.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<usize> {
        normalize(text)
            .iter()
            .take(max_len)
            .map(|w| self.get(w))
            .collect()
    }

    /// One token per line, in index order, specials first.
    pub fn to_text(&self) -> String {
        let mut body = self.tokens.join("\n");
        body.push('\n');
        body
    }

    /// Inverse of [`Vocabulary::to_text`].
    pub fn from_text(body: &str) -> Result<Self> {
        let mut lines = body.lines();
        if lines.next() != Some(PAD_TOKEN) || lines.next() != Some(OOV_TOKEN) {
            return Err(Error::InvalidArgument(format!(
                "vocabulary must start with {PAD_TOKEN} and {OOV_TOKEN}"
            )));
        }
        Ok(Self::from_tokens(lines))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&body).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
