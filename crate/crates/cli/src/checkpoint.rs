//! Checkpoint serialization: model weights and shape metadata in one
//! [`TensorArchive`] file.
//!
//! The archive starts with a `meta.dims` entry (a rank-1 f64 tensor of 12
//! values, listed below) followed by the 22 parameter tensors in the
//! model's canonical order, all stored as little-endian f64. `meta.dims`
//! holds, in order: region dim, instance columns, background columns,
//! question dim, question slots, glimpse dim, logit rank, heads, fused dim,
//! answer count, stage-wiring code (index into the wiring list) and the
//! padding-mask flag (0 or 1).

use maskvqa_core::attention::params::ModelDims;
use maskvqa_core::attention::{ComposeOrder, ModelParams};

use crate::tensor_file::{Tensor, TensorArchive, TensorFileError};

type Result<T> = std::result::Result<T, TensorFileError>;

/// Name of the shape-metadata entry.
pub const META_DIMS: &str = "meta.dims";

fn format_err<T>(message: impl Into<String>) -> Result<T> {
    Err(TensorFileError::Format {
        offset: 0,
        message: message.into(),
    })
}

fn order_code(order: ComposeOrder) -> f64 {
    ComposeOrder::ALL
        .iter()
        .position(|o| *o == order)
        .expect("every order is listed in ALL") as f64
}

fn order_from_code(code: f64) -> Result<ComposeOrder> {
    let idx = code as usize;
    if code.fract() != 0.0 || code < 0.0 || idx >= ComposeOrder::ALL.len() {
        return format_err(format!("invalid stage-wiring code {code}"));
    }
    Ok(ComposeOrder::ALL[idx])
}

fn encode_dims(dims: &ModelDims) -> Tensor {
    let values = vec![
        dims.region_dim as f64,
        dims.instance_cols as f64,
        dims.background_cols as f64,
        dims.question_dim as f64,
        dims.question_slots as f64,
        dims.glimpse_dim as f64,
        dims.logit_rank as f64,
        dims.heads as f64,
        dims.fused_dim as f64,
        dims.answer_count as f64,
        order_code(dims.order),
        if dims.mask_padding { 1.0 } else { 0.0 },
    ];
    Tensor::from_f64(vec![values.len()], values).expect("12 values, dims [12]")
}

fn decode_dims(t: &Tensor) -> Result<ModelDims> {
    let v = t.as_f64()?;
    if t.dims().len() != 1 || v.len() != 12 {
        return format_err(format!(
            "meta.dims must be a rank-1 tensor of 12 values, got dims {:?}",
            t.dims()
        ));
    }
    let field = |i: usize, name: &str| -> Result<usize> {
        let x = v[i];
        if x.fract() != 0.0 || x < 0.0 || x > u32::MAX as f64 {
            return format_err(format!("meta.dims {name} has invalid value {x}"));
        }
        Ok(x as usize)
    };
    Ok(ModelDims {
        region_dim: field(0, "region dim")?,
        instance_cols: field(1, "instance columns")?,
        background_cols: field(2, "background columns")?,
        question_dim: field(3, "question dim")?,
        question_slots: field(4, "question slots")?,
        glimpse_dim: field(5, "glimpse dim")?,
        logit_rank: field(6, "logit rank")?,
        heads: field(7, "heads")?,
        fused_dim: field(8, "fused dim")?,
        answer_count: field(9, "answer count")?,
        order: order_from_code(v[10])?,
        mask_padding: if v[11] == 0.0 {
            false
        } else if v[11] == 1.0 {
            true
        } else {
            return format_err(format!("meta.dims padding flag has invalid value {}", v[11]));
        },
    })
}

/// Packs model weights plus shape metadata into an archive.
pub fn to_archive(params: &ModelParams) -> Result<TensorArchive> {
    let mut archive = TensorArchive::new();
    archive.push(META_DIMS, encode_dims(&params.dims))?;
    for (name, mat) in params.tensors() {
        archive.push(name, Tensor::from_mat(mat))?;
    }
    Ok(archive)
}

/// Rebuilds model weights from an archive, verifying names and shapes.
pub fn from_archive(archive: &TensorArchive) -> Result<ModelParams> {
    let meta = match archive.get(META_DIMS) {
        Some(t) => t,
        None => return format_err("checkpoint is missing the meta.dims entry"),
    };
    let dims = decode_dims(meta)?;
    let mut params = ModelParams::zeros(dims).map_err(|e| TensorFileError::Format {
        offset: 0,
        message: format!("invalid checkpoint dims: {e}"),
    })?;
    let expected = 1 + params.tensors().len();
    if archive.len() != expected {
        return format_err(format!(
            "checkpoint has {} entries, expected {expected}",
            archive.len()
        ));
    }
    for (name, slot) in params.tensors_mut() {
        let stored = match archive.get(name) {
            Some(t) => t,
            None => return format_err(format!("checkpoint is missing tensor {name:?}")),
        };
        let mat = stored.to_mat().map_err(|e| TensorFileError::Format {
            offset: 0,
            message: format!("tensor {name:?}: {e}"),
        })?;
        if mat.rows() != slot.rows() || mat.cols() != slot.cols() {
            return format_err(format!(
                "tensor {name:?} has shape {}x{}, expected {}x{}",
                mat.rows(),
                mat.cols(),
                slot.rows(),
                slot.cols()
            ));
        }
        *slot = mat;
    }
    Ok(params)
}

/// Writes a checkpoint file.
pub fn save(params: &ModelParams, path: impl AsRef<std::path::Path>) -> Result<()> {
    to_archive(params)?.save(path)
}

/// Reads a checkpoint file.
pub fn load(path: impl AsRef<std::path::Path>) -> Result<ModelParams> {
    from_archive(&TensorArchive::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(order: ComposeOrder) -> ModelDims {
        ModelDims {
            region_dim: 5,
            instance_cols: 3,
            background_cols: 4,
            question_dim: 6,
            question_slots: 2,
            glimpse_dim: 3,
            logit_rank: 2,
            heads: 2,
            fused_dim: 7,
            answer_count: 4,
            order,
            mask_padding: true,
        }
    }

    #[test]
    fn checkpoint_roundtrips_every_wiring() {
        let dir = tempfile::tempdir().unwrap();
        for (i, &order) in ComposeOrder::ALL.iter().enumerate() {
            let params = ModelParams::init(dims(order), 40 + i as u64).unwrap();
            let path = dir.path().join(format!("ckpt{i}.mqta"));
            save(&params, &path).unwrap();
            let back = load(&path).unwrap();
            assert_eq!(back.dims, params.dims);
            for ((n1, t1), (n2, t2)) in params.tensors().iter().zip(back.tensors().iter()) {
                assert_eq!(*n1, *n2);
                assert_eq!(t1.data(), t2.data(), "tensor {n1} must be bit-identical");
            }
        }
    }

    #[test]
    fn checkpoint_write_is_deterministic() {
        let params = ModelParams::init(dims(ComposeOrder::IBQ), 7).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        to_archive(&params).unwrap().write_to(&mut a).unwrap();
        to_archive(&params).unwrap().write_to(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_and_misshapen_tensors_are_rejected() {
        let params = ModelParams::init(dims(ComposeOrder::IBQ), 7).unwrap();
        let full = to_archive(&params).unwrap();

        let mut missing = TensorArchive::new();
        for (name, tensor) in full.iter() {
            if name != "classifier.b" {
                missing.push(name, tensor.clone()).unwrap();
            }
        }
        assert!(from_archive(&missing).is_err());

        let mut misshapen = TensorArchive::new();
        for (name, tensor) in full.iter() {
            if name == "classifier.b" {
                misshapen
                    .push(name, Tensor::from_f64(vec![1, 1], vec![0.0]).unwrap())
                    .unwrap();
            } else {
                misshapen.push(name, tensor.clone()).unwrap();
            }
        }
        assert!(from_archive(&misshapen).is_err());

        let empty = TensorArchive::new();
        assert!(from_archive(&empty).is_err());
    }

    #[test]
    fn meta_dims_validation_catches_bad_codes() {
        let params = ModelParams::init(dims(ComposeOrder::BQ), 7).unwrap();
        let full = to_archive(&params).unwrap();
        let mut bad = TensorArchive::new();
        for (name, tensor) in full.iter() {
            if name == META_DIMS {
                let mut v = tensor.to_f64_vec();
                v[10] = 99.0;
                bad.push(name, Tensor::from_f64(vec![12], v).unwrap()).unwrap();
            } else {
                bad.push(name, tensor.clone()).unwrap();
            }
        }
        let err = from_archive(&bad).unwrap_err();
        assert!(err.to_string().contains("wiring"), "{err}");
    }
}
