//! Plain shuffled fixed-size batching with padding.

use rand::seq::SliceRandom;

use crate::data::corpus::{ParallelCorpus, Sentence};
use crate::data::vocab::PAD_ID;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamKind};

/// One batch of pairs, padded to the batch-local maximum lengths. True
/// lengths are retained so PAD positions never enter log-probability sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub pair_ids: Vec<usize>,
    pub src: Vec<Vec<u32>>,
    pub src_lens: Vec<usize>,
    pub tgt: Vec<Vec<u32>>,
    pub tgt_lens: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.pair_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_ids.is_empty()
    }

    /// Recovers the unpadded sentence pair at position `i` in the batch.
    pub fn sentence_pair(&self, i: usize) -> (Sentence, Sentence) {
        let src = Sentence::new(self.src[i][..self.src_lens[i]].to_vec());
        let tgt = Sentence::new(self.tgt[i][..self.tgt_lens[i]].to_vec());
        (src, tgt)
    }
}

fn pad_rows(sentences: &[&Sentence]) -> (Vec<Vec<u32>>, Vec<usize>) {
    let width = sentences.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(sentences.len());
    let mut lens = Vec::with_capacity(sentences.len());
    for s in sentences {
        let mut row = s.ids().to_vec();
        row.resize(width, PAD_ID);
        rows.push(row);
        lens.push(s.len());
    }
    (rows, lens)
}

/// Shuffles the corpus with a stream keyed by `(seed, epoch)` and cuts it
/// into consecutive batches of `batch_size` (the last one may be shorter).
/// Every pair appears in exactly one batch.
pub fn batches(
    corpus: &ParallelCorpus,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut ids: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = stream_rng(seed, StreamKind::Shuffle, epoch as u64);
    ids.shuffle(&mut rng);

    let mut out = Vec::with_capacity(ids.len().div_ceil(batch_size));
    for chunk in ids.chunks(batch_size) {
        let srcs: Vec<&Sentence> = chunk.iter().map(|&id| &corpus.pair(id).unwrap().0).collect();
        let tgts: Vec<&Sentence> = chunk.iter().map(|&id| &corpus.pair(id).unwrap().1).collect();
        let (src, src_lens) = pad_rows(&srcs);
        let (tgt, tgt_lens) = pad_rows(&tgts);
        out.push(Batch {
            pair_ids: chunk.to_vec(),
            src,
            src_lens,
            tgt,
            tgt_lens,
        });
    }
    Ok(out)
}
