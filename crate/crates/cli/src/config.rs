//! Flat key = value run configuration shared by every subcommand. One file
//! describes a whole experiment; each subcommand reads the slice it needs,
//! and the fully resolved form is written next to a run's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use adimt_core::augment::AugmentConfig;
use adimt_core::data::{Split, SyntheticTaskSpec, TaskKind};
use adimt_core::error::{Error, Result};
use adimt_core::model::{AttentionKind, ModelConfig};
use adimt_core::objectives::{ObjectiveConfig, ObjectiveKind};
use adimt_core::trainer::{AugmentMode, SearchKind, TrainConfig};

/// Decode strategy named in a config; the beam width lives in its own key
/// so switching strategies does not erase it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchChoice {
    Greedy,
    Beam,
}

impl SearchChoice {
    pub fn name(self) -> &'static str {
        match self {
            SearchChoice::Greedy => "greedy",
            SearchChoice::Beam => "beam",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "greedy" => Ok(SearchChoice::Greedy),
            "beam" => Ok(SearchChoice::Beam),
            other => Err(Error::config(format!(
                "unknown search {other:?} (expected greedy or beam)"
            ))),
        }
    }
}

fn parse_split(text: &str) -> Result<Split> {
    match text {
        "train" => Ok(Split::Train),
        "dev" => Ok(Split::Dev),
        "test" => Ok(Split::Test),
        other => Err(Error::config(format!(
            "unknown split {other:?} (expected train, dev, or test)"
        ))),
    }
}

/// One experiment's worth of settings: data generation, augmentation,
/// objective, model shape, training schedule, and paths. Every key is
/// validated on assignment; unknown keys are rejected by name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskKind,
    pub content_vocab_size: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub train_pairs: usize,
    pub dev_pairs: usize,
    pub test_pairs: usize,
    pub data_seed: u64,

    pub tau: f64,
    pub samples_per_pair: usize,
    pub edit_fraction: f64,
    pub augment_seed: u64,

    pub objective: ObjectiveKind,
    pub alpha: f64,

    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attention: AttentionKind,
    pub max_decode_len: usize,
    pub init_scale: f64,
    pub model_seed: u64,

    pub lr0: f64,
    pub lr_min: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub clip_norm: f64,
    pub train_seed: u64,
    pub augment_mode: AugmentMode,

    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub augmented_path: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub search: SearchChoice,
    pub beam_width: usize,
    pub eval_split: Split,
}

impl Default for RunConfig {
    fn default() -> Self {
        let objective = ObjectiveConfig::default();
        let augment = AugmentConfig::default();
        let model = ModelConfig::new(0, 0);
        let train = TrainConfig::default();
        RunConfig {
            task: TaskKind::Reverse,
            content_vocab_size: 12,
            len_min: 5,
            len_max: 10,
            train_pairs: 2000,
            dev_pairs: 200,
            test_pairs: 200,
            data_seed: 0,

            tau: objective.tau,
            samples_per_pair: augment.samples_per_pair,
            edit_fraction: augment.edit_fraction,
            augment_seed: augment.seed,

            objective: objective.kind,
            alpha: objective.alpha,

            embed_dim: model.embed_dim,
            hidden_dim: model.hidden_dim,
            attention: model.attention,
            max_decode_len: model.max_decode_len,
            init_scale: model.init_scale,
            model_seed: model.seed,

            lr0: train.lr0,
            lr_min: train.lr_min,
            decay: train.decay,
            batch_size: train.batch_size,
            max_epochs: train.max_epochs,
            clip_norm: train.clip_norm,
            train_seed: train.seed,
            augment_mode: train.augment_mode,

            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            augmented_path: None,
            checkpoint: None,
            search: SearchChoice::Greedy,
            beam_width: 10,
            eval_split: Split::Test,
        }
    }
}

impl RunConfig {
    /// Reads a config file and applies every assignment in order. Lines are
    /// `key = value`; blank lines and lines starting with `#` are skipped.
    pub fn load_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!(
                    "{} line {}: expected key = value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Assigns one key, parsing the value into the key's type. Unknown keys
    /// are an error naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str, ty: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(format!("key '{key}': invalid {ty} {value:?}")))
        }
        match key {
            "task" => self.task = TaskKind::parse(value)?,
            "content_vocab_size" => self.content_vocab_size = num(key, value, "integer")?,
            "len_min" => self.len_min = num(key, value, "integer")?,
            "len_max" => self.len_max = num(key, value, "integer")?,
            "train_pairs" => self.train_pairs = num(key, value, "integer")?,
            "dev_pairs" => self.dev_pairs = num(key, value, "integer")?,
            "test_pairs" => self.test_pairs = num(key, value, "integer")?,
            "data_seed" => self.data_seed = num(key, value, "integer")?,

            "tau" => self.tau = num(key, value, "number")?,
            "samples_per_pair" => self.samples_per_pair = num(key, value, "integer")?,
            "edit_fraction" => self.edit_fraction = num(key, value, "number")?,
            "augment_seed" => self.augment_seed = num(key, value, "integer")?,

            "objective" => self.objective = ObjectiveKind::parse(value)?,
            "alpha" => self.alpha = num(key, value, "number")?,

            "embed_dim" => self.embed_dim = num(key, value, "integer")?,
            "hidden_dim" => self.hidden_dim = num(key, value, "integer")?,
            "attention" => self.attention = AttentionKind::parse(value)?,
            "max_decode_len" => self.max_decode_len = num(key, value, "integer")?,
            "init_scale" => self.init_scale = num(key, value, "number")?,
            "model_seed" => self.model_seed = num(key, value, "integer")?,

            "lr0" => self.lr0 = num(key, value, "number")?,
            "lr_min" => self.lr_min = num(key, value, "number")?,
            "decay" => self.decay = num(key, value, "number")?,
            "batch_size" => self.batch_size = num(key, value, "integer")?,
            "max_epochs" => self.max_epochs = num(key, value, "integer")?,
            "clip_norm" => self.clip_norm = num(key, value, "number")?,
            "train_seed" => self.train_seed = num(key, value, "integer")?,
            "augment_mode" => self.augment_mode = AugmentMode::parse(value)?,

            "data_dir" => self.data_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "augmented_path" => self.augmented_path = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "search" => self.search = SearchChoice::parse(value)?,
            "beam_width" => self.beam_width = num(key, value, "integer")?,
            "eval_split" => self.eval_split = parse_split(value)?,

            other => return Err(Error::config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// The full configuration as parseable `key = value` lines, in schema
    /// order. Unset optional paths are omitted.
    pub fn resolved(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        let mut line = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        line("task", self.task.name().into());
        line("content_vocab_size", self.content_vocab_size.to_string());
        line("len_min", self.len_min.to_string());
        line("len_max", self.len_max.to_string());
        line("train_pairs", self.train_pairs.to_string());
        line("dev_pairs", self.dev_pairs.to_string());
        line("test_pairs", self.test_pairs.to_string());
        line("data_seed", self.data_seed.to_string());
        line("tau", self.tau.to_string());
        line("samples_per_pair", self.samples_per_pair.to_string());
        line("edit_fraction", self.edit_fraction.to_string());
        line("augment_seed", self.augment_seed.to_string());
        line("objective", self.objective.name().into());
        line("alpha", self.alpha.to_string());
        line("embed_dim", self.embed_dim.to_string());
        line("hidden_dim", self.hidden_dim.to_string());
        line("attention", self.attention.name().into());
        line("max_decode_len", self.max_decode_len.to_string());
        line("init_scale", self.init_scale.to_string());
        line("model_seed", self.model_seed.to_string());
        line("lr0", self.lr0.to_string());
        line("lr_min", self.lr_min.to_string());
        line("decay", self.decay.to_string());
        line("batch_size", self.batch_size.to_string());
        line("max_epochs", self.max_epochs.to_string());
        line("clip_norm", self.clip_norm.to_string());
        line("train_seed", self.train_seed.to_string());
        line("augment_mode", self.augment_mode.name().into());
        line("data_dir", self.data_dir.display().to_string());
        line("out_dir", self.out_dir.display().to_string());
        if let Some(p) = &self.augmented_path {
            line("augmented_path", p.display().to_string());
        }
        if let Some(p) = &self.checkpoint {
            line("checkpoint", p.display().to_string());
        }
        line("search", self.search.name().into());
        line("beam_width", self.beam_width.to_string());
        line("eval_split", self.eval_split.name().into());
        out
    }

    /// Writes [`RunConfig::resolved`] to `path`, creating parent
    /// directories.
    pub fn write_resolved(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.resolved())?;
        Ok(())
    }

    pub fn task_spec(&self) -> SyntheticTaskSpec {
        SyntheticTaskSpec {
            kind: self.task,
            content_vocab_size: self.content_vocab_size,
            len_min: self.len_min,
            len_max: self.len_max,
            train_pairs: self.train_pairs,
            dev_pairs: self.dev_pairs,
            test_pairs: self.test_pairs,
            seed: self.data_seed,
        }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            tau: self.tau,
            samples_per_pair: self.samples_per_pair,
            edit_fraction: self.edit_fraction,
            seed: self.augment_seed,
        }
    }

    pub fn objective_config(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            kind: self.objective,
            alpha: self.alpha,
            tau: self.tau,
        }
    }

    pub fn model_config(&self, src_vocab: usize, tgt_vocab: usize) -> ModelConfig {
        ModelConfig {
            src_vocab,
            tgt_vocab,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            attention: self.attention,
            max_decode_len: self.max_decode_len,
            init_scale: self.init_scale,
            seed: self.model_seed,
        }
    }

    /// Training settings with checkpoints under the run's output directory.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            objective: self.objective_config(),
            augment: self.augment_config(),
            augment_mode: self.augment_mode,
            lr0: self.lr0,
            lr_min: self.lr_min,
            decay: self.decay,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            clip_norm: self.clip_norm,
            seed: self.train_seed,
            checkpoint_dir: Some(self.out_dir.clone()),
        }
    }

    pub fn search_kind(&self) -> SearchKind {
        match self.search {
            SearchChoice::Greedy => SearchKind::Greedy,
            SearchChoice::Beam => SearchKind::Beam(self.beam_width),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("learning_rate", "1.0").unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("alpha", "half").unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        let err = cfg.set("batch_size", "-3").unwrap_err();
        assert!(err.to_string().contains("batch_size"), "{err}");
    }

    #[test]
    fn resolved_round_trips_through_the_parser() {
        let mut cfg = RunConfig::default();
        cfg.set("task", "copy").unwrap();
        cfg.set("alpha", "0.3").unwrap();
        cfg.set("objective", "raml").unwrap();
        cfg.set("augmented_path", "aug/samples.tsv").unwrap();
        cfg.set("search", "beam").unwrap();
        cfg.set("beam_width", "4").unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resolved.cfg");
        cfg.write_resolved(&path).unwrap();
        let mut reloaded = RunConfig::default();
        reloaded.load_file(&path).unwrap();
        assert_eq!(cfg, reloaded);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# experiment\n\ntau = 2.5\n  alpha=0.7  \n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.load_file(&path).unwrap();
        assert_eq!(cfg.tau, 2.5);
        assert_eq!(cfg.alpha, 0.7);
    }

    #[test]
    fn lines_without_assignment_are_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "tau\n").unwrap();
        let mut cfg = RunConfig::default();
        let err = cfg.load_file(&path).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
