//! Sentences and line-paired parallel corpora.

use std::fs;
use std::path::Path;

use crate::data::vocab::{Vocab, PAD_ID};
use crate::error::{Error, Result};

/// A tokenized sentence as vocabulary ids. Corpus sentences contain content
/// tokens only: BOS/EOS framing and padding belong to the model layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sentence(Vec<u32>);

impl Sentence {
    pub fn new(ids: Vec<u32>) -> Self {
        Sentence(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks the corpus-side invariants: nonempty, all ids within the
    /// vocabulary, no PAD (and no reserved token at all, since corpus
    /// sentences carry content tokens only).
    pub fn validate(&self, vocab: &Vocab) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::data("empty sentence"));
        }
        for &id in &self.0 {
            if id as usize >= vocab.len() {
                return Err(Error::data(format!("token id {id} outside vocab")));
            }
            if id == PAD_ID {
                return Err(Error::data("sentence contains PAD"));
            }
            if vocab.is_reserved(id) {
                return Err(Error::data(format!(
                    "sentence contains reserved token {:?}",
                    vocab.token(id).unwrap_or("?")
                )));
            }
        }
        Ok(())
    }

    /// Renders the sentence as space-joined token text.
    pub fn to_text(&self, vocab: &Vocab) -> Result<String> {
        let mut parts = Vec::with_capacity(self.0.len());
        for &id in &self.0 {
            parts.push(
                vocab
                    .token(id)
                    .ok_or_else(|| Error::data(format!("token id {id} outside vocab")))?,
            );
        }
        Ok(parts.join(" "))
    }

    /// Parses space-separated token text against a fixed vocabulary.
    pub fn from_text(text: &str, vocab: &Vocab) -> Result<Self> {
        let mut ids = Vec::new();
        for token in text.split_whitespace() {
            let id = vocab
                .id(token)
                .ok_or_else(|| Error::data(format!("unknown token {token:?}")))?;
            ids.push(id);
        }
        Ok(Sentence(ids))
    }
}

impl From<Vec<u32>> for Sentence {
    fn from(ids: Vec<u32>) -> Self {
        Sentence(ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// Aligned source/target sentence pairs. The pair id is the index, which is
/// stable across loads of the same files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    split: Split,
    pairs: Vec<(Sentence, Sentence)>,
}

impl ParallelCorpus {
    pub fn new(split: Split, pairs: Vec<(Sentence, Sentence)>) -> Self {
        ParallelCorpus { split, pairs }
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, id: usize) -> Option<&(Sentence, Sentence)> {
        self.pairs.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &(Sentence, Sentence))> {
        self.pairs.iter().enumerate()
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|(s, _)| s)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|(_, t)| t)
    }
}

/// Loads a line-paired corpus from two text files (one sentence per line,
/// tokens separated by spaces). Line counts must match, no line may be empty,
/// and every token must be in `vocab`.
pub fn load_corpus(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    vocab: &Vocab,
    split: Split,
) -> Result<ParallelCorpus> {
    let read = |path: &Path| -> Result<Vec<String>> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read corpus {}: {e}", path.display())))?;
        Ok(text.lines().map(str::to_string).collect())
    };
    let src_lines = read(src_path.as_ref())?;
    let tgt_lines = read(tgt_path.as_ref())?;
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::data(format!(
            "line count mismatch: {} source vs {} target",
            src_lines.len(),
            tgt_lines.len()
        )));
    }

    let mut pairs = Vec::with_capacity(src_lines.len());
    for (lineno, (src, tgt)) in src_lines.iter().zip(&tgt_lines).enumerate() {
        let parse = |text: &str, side: &str| -> Result<Sentence> {
            if text.trim().is_empty() {
                return Err(Error::data(format!("{side} line {} is empty", lineno + 1)));
            }
            let sentence = Sentence::from_text(text, vocab)
                .map_err(|e| Error::data(format!("{side} line {}: {e}", lineno + 1)))?;
            sentence.validate(vocab)?;
            Ok(sentence)
        };
        pairs.push((parse(src, "source")?, parse(tgt, "target")?));
    }
    Ok(ParallelCorpus::new(split, pairs))
}

/// Writes a corpus back to two text files; inverse of [`load_corpus`].
pub fn save_corpus(
    corpus: &ParallelCorpus,
    vocab: &Vocab,
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
) -> Result<()> {
    let mut src_out = String::new();
    let mut tgt_out = String::new();
    for (_, (src, tgt)) in corpus.iter() {
        src_out.push_str(&src.to_text(vocab)?);
        src_out.push('\n');
        tgt_out.push_str(&tgt.to_text(vocab)?);
        tgt_out.push('\n');
    }
    fs::write(src_path, src_out)?;
    fs::write(tgt_path, tgt_out)?;
    Ok(())
}
