//! Token/id mapping with fixed reserved symbols.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;

/// Reserved tokens, in id order. They always occupy ids 0..3.
pub const RESERVED_TOKENS: [&str; 3] = ["<pad>", "<bos>", "<eos>"];

/// Bidirectional token/id map. Ids 0..3 are `<pad>`, `<bos>`, `<eos>`;
/// content tokens follow in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from content tokens. Reserved tokens are prepended
    /// automatically and must not appear in `content`.
    pub fn new<I, S>(content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(content.into_iter().map(Into::into));

        let mut index = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::data(format!(
                    "vocab token {id} is empty or contains whitespace: {token:?}"
                )));
            }
            if id >= RESERVED_TOKENS.len() && RESERVED_TOKENS.contains(&token.as_str()) {
                return Err(Error::data(format!(
                    "reserved token {token:?} listed among content tokens"
                )));
            }
            if index.insert(token.clone(), id as u32).is_some() {
                return Err(Error::data(format!("duplicate vocab token {token:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Full size including the three reserved tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of content (non-reserved) tokens.
    pub fn content_len(&self) -> usize {
        self.tokens.len() - RESERVED_TOKENS.len()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_reserved(&self, id: u32) -> bool {
        (id as usize) < RESERVED_TOKENS.len()
    }

    /// Ids of all content tokens, ascending.
    pub fn content_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (RESERVED_TOKENS.len() as u32)..(self.tokens.len() as u32)
    }

    /// Reads a vocabulary file: one token per line, line number = id,
    /// reserved tokens first.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| Error::data(format!("cannot read vocab {}: {e}", path.as_ref().display())))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED_TOKENS.len() {
            return Err(Error::data("vocab file shorter than the reserved prefix"));
        }
        for (i, expected) in RESERVED_TOKENS.iter().enumerate() {
            if lines[i] != *expected {
                return Err(Error::data(format!(
                    "vocab line {i} must be {expected:?}, found {:?}",
                    lines[i]
                )));
            }
        }
        Vocab::new(lines[RESERVED_TOKENS.len()..].iter().map(|s| s.to_string()))
    }

    /// Writes the vocabulary file (inverse of [`Vocab::load`]).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for token in &self.tokens {
            out.push_str(token);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocab::new(["a", "b"]).unwrap();
        assert_eq!(v.id("<pad>"), Some(PAD_ID));
        assert_eq!(v.id("<bos>"), Some(BOS_ID));
        assert_eq!(v.id("<eos>"), Some(EOS_ID));
        assert_eq!(v.id("a"), Some(3));
        assert_eq!(v.len(), 5);
        assert_eq!(v.content_len(), 2);
        assert!(v.is_reserved(0) && v.is_reserved(2) && !v.is_reserved(3));
    }

    #[test]
    fn rejects_duplicates_and_reserved_content() {
        assert!(Vocab::new(["a", "a"]).is_err());
        assert!(Vocab::new(["<eos>"]).is_err());
        assert!(Vocab::new(["a b"]).is_err());
        assert!(Vocab::new([""]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocab::new(["w0", "w1", "w2"]).unwrap();
        v.save(&path).unwrap();
        let loaded = Vocab::load(&path).unwrap();
        assert_eq!(v, loaded);
    }

    #[test]
    fn load_rejects_missing_reserved_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "a\nb\nc\nd\n").unwrap();
        assert!(Vocab::load(&path).is_err());
    }
}
