//! Versioned JSON checkpoints for model and trainer parameters.
//!
//! Tensors are stored as f64 values under stable dotted names inside a
//! `BTreeMap`, so serialization order (and therefore the byte output for a
//! given state) is deterministic.

use crate::error::{io_err, Error, Result};
use crate::model::ModelConfig;
use crate::scalar::Scalar;
use crate::tensor::ParamGroup;
use crate::training::TrainConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

const FORMAT: &str = "neat-checkpoint";
const VERSION: u32 = 1;

/// Provenance carried by every checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub config_hash: String,
    /// Which training phase produced this state: "lm" or "attention".
    pub phase: String,
    /// Hash of the vocabulary file the model was trained against.
    pub vocab_fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorDto {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    meta: CheckpointMeta,
    model: ModelConfig,
    train: TrainConfig,
    tensors: BTreeMap<String, TensorDto>,
}

/// A checkpoint read back from disk, with tensors still in raw form.
#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub meta: CheckpointMeta,
    pub model: ModelConfig,
    pub train: TrainConfig,
    tensors: BTreeMap<String, TensorDto>,
}

/// Serializes `sections` (each a named parameter group; the name prefixes
/// its tensor names, an empty name leaves them bare) to `path`.
pub fn save_checkpoint<F: Scalar>(
    path: &Path,
    meta: &CheckpointMeta,
    model: &ModelConfig,
    train: &TrainConfig,
    sections: &[(&str, &dyn ParamGroup<F>)],
) -> Result<()> {
    let mut tensors = BTreeMap::new();
    for (prefix, group) in sections {
        for (name, t) in group.tensors() {
            let key = if prefix.is_empty() {
                name
            } else {
                format!("{prefix}.{name}")
            };
            let dto = TensorDto {
                shape: t.shape().to_vec(),
                values: t.values.iter().map(|v| v.to_f64_lossy()).collect(),
            };
            if tensors.insert(key.clone(), dto).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor name {key}")));
            }
        }
    }
    let file = CheckpointFile {
        format: FORMAT.to_string(),
        version: VERSION,
        meta: meta.clone(),
        model: model.clone(),
        train: train.clone(),
        tensors,
    };
    let body = serde_json::to_string(&file)
        .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
    std::fs::write(path, body).map_err(io_err(path))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let body = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: CheckpointFile = serde_json::from_str(&body)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if file.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "{}: unrecognized format `{}`",
            path.display(),
            file.format
        )));
    }
    if file.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: version {} unsupported (expected {VERSION})",
            path.display(),
            file.version
        )));
    }
    Ok(LoadedCheckpoint {
        meta: file.meta,
        model: file.model,
        train: file.train,
        tensors: file.tensors,
    })
}

impl LoadedCheckpoint {
    /// Copies the tensors of one named section into `group`. Shapes must
    /// match exactly; a missing tensor is an error.
    pub fn restore<F: Scalar>(
        &self,
        prefix: &str,
        group: &mut dyn ParamGroup<F>,
    ) -> Result<()> {
        for (name, t) in group.tensors_mut() {
            let key = if prefix.is_empty() {
                name
            } else {
                format!("{prefix}.{name}")
            };
            let dto = self
                .tensors
                .get(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))?;
            if dto.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {key}: shape {:?} does not match expected {:?}",
                    dto.shape,
                    t.shape()
                )));
            }
            for (dst, src) in t.values.iter_mut().zip(&dto.values) {
                *dst = F::of(*src);
            }
        }
        Ok(())
    }

    /// True if the checkpoint contains a tensor section with this prefix.
    pub fn has_section(&self, prefix: &str) -> bool {
        let dotted = format!("{prefix}.");
        self.tensors.keys().any(|k| k.starts_with(&dotted))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Linear;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            seed: 9,
            config_hash: "abc".into(),
            phase: "lm".into(),
            vocab_fingerprint: "v1".into(),
        }
    }

    #[test]
    fn round_trip_preserves_values_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lin = Linear::<f64>::uniform(3, 2, 0.05, &mut rng);
        let model = ModelConfig::tiny_for_tests();
        let train = TrainConfig::default();
        save_checkpoint(&path, &meta(), &model, &train, &[("out", &lin)]).unwrap();

        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.meta.seed, 9);
        let mut fresh = Linear::<f64>::zeros(3, 2);
        loaded.restore("out", &mut fresh).unwrap();
        assert_eq!(fresh.weight.values, lin.weight.values);
        assert_eq!(fresh.bias.values, lin.bias.values);
    }

    #[test]
    fn shape_mismatch_and_missing_tensor_are_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let lin = Linear::<f64>::zeros(3, 2);
        let model = ModelConfig::tiny_for_tests();
        save_checkpoint(&path, &meta(), &model, &TrainConfig::default(), &[("out", &lin)])
            .unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        let mut wrong = Linear::<f64>::zeros(4, 2);
        let err = loaded.restore("out", &mut wrong).unwrap_err();
        assert!(err.to_string().contains("shape"));

        let mut other = Linear::<f64>::zeros(3, 2);
        let err = loaded.restore("decoder", &mut other).unwrap_err();
        assert!(err.to_string().contains("missing tensor"));
    }

    #[test]
    fn identical_state_serializes_to_identical_bytes() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lin = Linear::<f64>::uniform(5, 4, 0.05, &mut rng);
        let model = ModelConfig::tiny_for_tests();
        let train = TrainConfig::default();
        save_checkpoint(&a, &meta(), &model, &train, &[("out", &lin)]).unwrap();
        save_checkpoint(&b, &meta(), &model, &train, &[("out", &lin)]).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
