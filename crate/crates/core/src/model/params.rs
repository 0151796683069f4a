//! Model configuration, the named parameter tensors, gradients, and
//! checkpoint serialization.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::data::RESERVED_TOKENS;
use crate::error::{Error, Result};
use crate::model::tensor::Tensor;
use crate::rng::{stream_rng, StreamKind};

/// Attention score family. Only the bilinear form is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionKind {
    #[default]
    Bilinear,
}

impl AttentionKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(AttentionKind::Bilinear),
            other => Err(Error::config(format!(
                "unknown attention kind '{other}' (expected bilinear)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        "bilinear"
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attention: AttentionKind,
    /// Most content tokens a decode may emit before stopping without EOS.
    pub max_decode_len: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults for everything except the vocabulary sizes.
    pub fn new(src_vocab: usize, tgt_vocab: usize) -> ModelConfig {
        ModelConfig {
            src_vocab,
            tgt_vocab,
            embed_dim: 16,
            hidden_dim: 32,
            attention: AttentionKind::Bilinear,
            max_decode_len: 25,
            init_scale: 0.08,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min_vocab = RESERVED_TOKENS.len() + 1;
        if self.src_vocab < min_vocab || self.tgt_vocab < min_vocab {
            return Err(Error::config(format!(
                "vocab sizes ({}, {}) must be at least {min_vocab} (reserved tokens plus content)",
                self.src_vocab, self.tgt_vocab
            )));
        }
        if self.embed_dim < 1 || self.hidden_dim < 1 {
            return Err(Error::config(format!(
                "model dims must be at least 1, got embed {} hidden {}",
                self.embed_dim, self.hidden_dim
            )));
        }
        if self.max_decode_len < 1 {
            return Err(Error::config("model.max_decode_len must be at least 1".to_string()));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::config(format!(
                "model.init_scale must be > 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// One GRU cell's weights: per gate, an input matrix `w*`, a recurrent
/// matrix `u*`, and a bias `b*`, for the update (z), reset (r), and
/// candidate (n) gates.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub wz: Tensor,
    pub wr: Tensor,
    pub wn: Tensor,
    pub uz: Tensor,
    pub ur: Tensor,
    pub un: Tensor,
    pub bz: Tensor,
    pub br: Tensor,
    pub bn: Tensor,
}

impl GruWeights {
    fn zeros(hidden: usize, input: usize) -> GruWeights {
        GruWeights {
            wz: Tensor::zeros(hidden, input),
            wr: Tensor::zeros(hidden, input),
            wn: Tensor::zeros(hidden, input),
            uz: Tensor::zeros(hidden, hidden),
            ur: Tensor::zeros(hidden, hidden),
            un: Tensor::zeros(hidden, hidden),
            bz: Tensor::zeros(hidden, 1),
            br: Tensor::zeros(hidden, 1),
            bn: Tensor::zeros(hidden, 1),
        }
    }

    fn tensors(&self) -> [(&'static str, &Tensor); 9] {
        [
            ("wz", &self.wz),
            ("wr", &self.wr),
            ("wn", &self.wn),
            ("uz", &self.uz),
            ("ur", &self.ur),
            ("un", &self.un),
            ("bz", &self.bz),
            ("br", &self.br),
            ("bn", &self.bn),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 9] {
        [
            ("wz", &mut self.wz),
            ("wr", &mut self.wr),
            ("wn", &mut self.wn),
            ("uz", &mut self.uz),
            ("ur", &mut self.ur),
            ("un", &mut self.un),
            ("bz", &mut self.bz),
            ("br", &mut self.br),
            ("bn", &mut self.bn),
        ]
    }
}

/// All model parameters as named tensors. The canonical tensor order (also
/// the checkpoint order) is: embeddings, forward encoder cell, backward
/// encoder cell, decoder cell, attention, output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub src_embed: Tensor,
    pub tgt_embed: Tensor,
    pub enc_fwd: GruWeights,
    pub enc_bwd: GruWeights,
    pub dec: GruWeights,
    pub attn_w: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

const CHECKPOINT_MAGIC: &str = "adimt-checkpoint v1";

impl Parameters {
    /// All-zero tensors with shapes fixed by the config.
    pub fn zeros(config: &ModelConfig) -> Result<Parameters> {
        config.validate()?;
        let e = config.embed_dim;
        let h = config.hidden_dim;
        Ok(Parameters {
            src_embed: Tensor::zeros(config.src_vocab, e),
            tgt_embed: Tensor::zeros(config.tgt_vocab, e),
            enc_fwd: GruWeights::zeros(h, e),
            enc_bwd: GruWeights::zeros(h, e),
            dec: GruWeights::zeros(h, e),
            attn_w: Tensor::zeros(h, 2 * h),
            out_w: Tensor::zeros(config.tgt_vocab, 3 * h),
            out_b: Tensor::zeros(config.tgt_vocab, 1),
        })
    }

    /// Uniform initialization in `[-init_scale, init_scale)`, deterministic
    /// given the config seed.
    pub fn init(config: &ModelConfig) -> Result<Parameters> {
        let mut params = Parameters::zeros(config)?;
        let mut rng = stream_rng(config.seed, StreamKind::ParamInit, 0);
        let scale = config.init_scale;
        for (_, tensor) in params.tensors_mut() {
            for v in tensor.data_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
        Ok(params)
    }

    /// Named tensors in canonical order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("src_embed".to_string(), &self.src_embed),
            ("tgt_embed".to_string(), &self.tgt_embed),
        ];
        for (prefix, cell) in [
            ("enc_fwd", &self.enc_fwd),
            ("enc_bwd", &self.enc_bwd),
            ("dec", &self.dec),
        ] {
            for (suffix, t) in cell.tensors() {
                out.push((format!("{prefix}.{suffix}"), t));
            }
        }
        out.push(("attn_w".to_string(), &self.attn_w));
        out.push(("out_w".to_string(), &self.out_w));
        out.push(("out_b".to_string(), &self.out_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("src_embed".to_string(), &mut self.src_embed),
            ("tgt_embed".to_string(), &mut self.tgt_embed),
        ];
        for (prefix, cell) in [
            ("enc_fwd", &mut self.enc_fwd),
            ("enc_bwd", &mut self.enc_bwd),
            ("dec", &mut self.dec),
        ] {
            for (suffix, t) in cell.tensors_mut() {
                out.push((format!("{prefix}.{suffix}"), t));
            }
        }
        out.push(("attn_w".to_string(), &mut self.attn_w));
        out.push(("out_w".to_string(), &mut self.out_w));
        out.push(("out_b".to_string(), &mut self.out_b));
        out
    }

    /// `theta -= lr * grad`, tensor by tensor.
    pub fn sgd_step(&mut self, grad: &GradientEstimate, lr: f64) {
        for ((_, t), (_, g)) in self.tensors_mut().into_iter().zip(grad.grads.tensors()) {
            t.add_scaled(g, -lr);
        }
    }

    /// Writes the checkpoint: a version line, one `name rows cols` line per
    /// tensor in canonical order, a blank line, then every tensor's values
    /// as little-endian 64-bit floats, row-major, in header order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        for (name, t) in self.tensors() {
            writeln!(w, "{name} {} {}", t.rows(), t.cols())?;
        }
        writeln!(w)?;
        for (_, t) in self.tensors() {
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads and validates a checkpoint against the shapes the config
    /// dictates. Fails on any name, shape, size, or finiteness mismatch.
    pub fn load(config: &ModelConfig, path: impl AsRef<Path>) -> Result<Parameters> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let header_end = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::data(format!("{}: no checkpoint header terminator", path.display())))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| Error::data(format!("{}: checkpoint header is not UTF-8", path.display())))?;
        let payload = &bytes[header_end + 2..];

        let mut lines = header.lines();
        let magic = lines.next().unwrap_or_default();
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::data(format!(
                "{}: version line '{magic}', expected '{CHECKPOINT_MAGIC}'",
                path.display()
            )));
        }

        let mut params = Parameters::zeros(config)?;
        let expected: Vec<(String, (usize, usize))> = params
            .tensors()
            .into_iter()
            .map(|(name, t)| (name, (t.rows(), t.cols())))
            .collect();
        let mut declared = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::data(format!(
                    "{}: malformed tensor line '{line}'",
                    path.display()
                )));
            }
            let rows: usize = parts[1]
                .parse()
                .map_err(|_| Error::data(format!("{}: bad shape in '{line}'", path.display())))?;
            let cols: usize = parts[2]
                .parse()
                .map_err(|_| Error::data(format!("{}: bad shape in '{line}'", path.display())))?;
            declared.push((parts[0].to_string(), (rows, cols)));
        }
        if declared != expected {
            return Err(Error::data(format!(
                "{}: checkpoint tensors do not match the model config (found {} tensors)",
                path.display(),
                declared.len()
            )));
        }

        let total: usize = expected.iter().map(|(_, (r, c))| r * c).sum();
        if payload.len() != total * 8 {
            return Err(Error::data(format!(
                "{}: payload holds {} bytes, expected {}",
                path.display(),
                payload.len(),
                total * 8
            )));
        }
        let mut offset = 0;
        for (name, t) in params.tensors_mut() {
            for v in t.data_mut() {
                let chunk: [u8; 8] = payload[offset..offset + 8].try_into().expect("sized above");
                *v = f64::from_le_bytes(chunk);
                if !v.is_finite() {
                    return Err(Error::non_finite(format!(
                        "checkpoint value in tensor {name}"
                    )));
                }
                offset += 8;
            }
        }
        Ok(params)
    }
}

/// Gradient of a scalar loss with respect to every parameter tensor;
/// structurally identical to [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    grads: Parameters,
}

impl GradientEstimate {
    pub fn zeros(config: &ModelConfig) -> Result<GradientEstimate> {
        Ok(GradientEstimate {
            grads: Parameters::zeros(config)?,
        })
    }

    /// Zero gradient with shapes copied from existing parameters.
    pub fn zeros_like(params: &Parameters) -> GradientEstimate {
        let mut grads = params.clone();
        for (_, t) in grads.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        GradientEstimate { grads }
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        self.grads.tensors()
    }

    pub(crate) fn grads_mut(&mut self) -> &mut Parameters {
        &mut self.grads
    }

    /// Errors with the offending tensor's name on any non-finite entry.
    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.grads.tensors() {
            if t.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("gradient tensor {name}")));
            }
        }
        Ok(())
    }

    /// Euclidean norm across every tensor entry.
    pub fn global_norm(&self) -> f64 {
        self.grads
            .tensors()
            .iter()
            .map(|(_, t)| t.sum_of_squares())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`; returns the
    /// factor applied (1 when no clipping happened).
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm <= max_norm || norm == 0.0 {
            return 1.0;
        }
        let factor = max_norm / norm;
        for (_, t) in self.grads.tensors_mut() {
            t.scale(factor);
        }
        factor
    }

    /// Flattens every tensor into one vector in canonical order, for
    /// oracle comparisons.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (_, t) in self.grads.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config() -> ModelConfig {
        let mut c = ModelConfig::new(6, 6);
        c.embed_dim = 3;
        c.hidden_dim = 4;
        c.seed = 11;
        c
    }

    #[test]
    fn canonical_tensor_set() {
        let p = Parameters::zeros(&tiny_config()).unwrap();
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 32);
        assert_eq!(names[0], "src_embed");
        assert_eq!(names[2], "enc_fwd.wz");
        assert_eq!(names[11], "enc_bwd.wz");
        assert_eq!(names[31], "out_b");
        let attn = &p.attn_w;
        assert_eq!((attn.rows(), attn.cols()), (4, 8));
        let out_w = &p.out_w;
        assert_eq!((out_w.rows(), out_w.cols()), (6, 12));
    }

    #[test]
    fn init_is_deterministic_bounded_and_seed_sensitive() {
        let cfg = tiny_config();
        let a = Parameters::init(&cfg).unwrap();
        let b = Parameters::init(&cfg).unwrap();
        assert_eq!(a, b);
        for (_, t) in a.tensors() {
            for &v in t.data() {
                assert!(v.abs() <= cfg.init_scale);
            }
        }
        let mut other = cfg;
        other.seed = 12;
        let c = Parameters::init(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = tiny_config();
        let p = Parameters::init(&cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        p.save(&path).unwrap();
        let q = Parameters::load(&cfg, &path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn checkpoint_rejects_mismatched_config() {
        let cfg = tiny_config();
        let p = Parameters::init(&cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        p.save(&path).unwrap();
        let mut other = cfg;
        other.hidden_dim = 5;
        assert!(Parameters::load(&other, &path).is_err());
    }

    #[test]
    fn checkpoint_rejects_truncation_and_bad_magic() {
        let cfg = tiny_config();
        let p = Parameters::init(&cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        p.save(&path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let truncated = dir.path().join("short.ckpt");
        std::fs::write(&truncated, &bytes[..bytes.len() - 8]).unwrap();
        assert!(Parameters::load(&cfg, &truncated).is_err());

        let mut corrupt = bytes.clone();
        corrupt[0] = b'x';
        let bad = dir.path().join("bad.ckpt");
        std::fs::write(&bad, &corrupt).unwrap();
        assert!(Parameters::load(&cfg, &bad).is_err());
    }

    #[test]
    fn gradient_clipping() {
        let cfg = tiny_config();
        let mut g = GradientEstimate::zeros(&cfg).unwrap();
        g.grads_mut().out_b.data_mut()[0] = 3.0;
        g.grads_mut().out_b.data_mut()[1] = 4.0;
        assert!((g.global_norm() - 5.0).abs() < 1e-15);
        assert_eq!(g.clip_global_norm(10.0), 1.0);
        let factor = g.clip_global_norm(1.0);
        assert!((factor - 0.2).abs() < 1e-15);
        assert!((g.global_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sgd_step_moves_against_gradient() {
        let cfg = tiny_config();
        let mut p = Parameters::zeros(&cfg).unwrap();
        let mut g = GradientEstimate::zeros(&cfg).unwrap();
        g.grads_mut().out_b.data_mut()[0] = 2.0;
        p.sgd_step(&g, 0.5);
        assert_eq!(p.out_b.data()[0], -1.0);
        assert!(g.check_finite().is_ok());
        g.grads_mut().attn_w.data_mut()[0] = f64::NAN;
        let err = g.check_finite().unwrap_err().to_string();
        assert!(err.contains("attn_w"), "error was: {err}");
    }
}
