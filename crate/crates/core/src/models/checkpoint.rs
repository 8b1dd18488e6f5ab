//! Binary checkpoints: a JSON header describing the model followed by the
//! raw tensor data in canonical parameter order. The format is
//! platform-independent (explicit little-endian) and round-trips weights
//! bitwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::nn::ParamTensors;

const MAGIC: &[u8; 8] = b"DGNNCKPT";

/// Hyperparameters stored alongside the weights so a checkpoint can be
/// rebuilt without the original command line. Fields that do not apply to a
/// model (for example `k` for a plain MLP) hold the configured defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub hidden: usize,
    pub depth: usize,
    pub k: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: String,
    pub seed: u64,
    pub hyper: ModelHyper,
    pub tensors: Vec<TensorMeta>,
}

pub fn save_checkpoint(
    path: &Path,
    model: &str,
    hyper: &ModelHyper,
    seed: u64,
    params: &impl ParamTensors,
) -> Result<()> {
    let names = params.tensor_names();
    let tensors = params.tensors();
    if names.len() != tensors.len() {
        return Err(Error::Checkpoint(format!(
            "{} tensor names for {} tensors",
            names.len(),
            tensors.len()
        )));
    }
    let header = CheckpointHeader {
        model: model.to_string(),
        seed,
        hyper: hyper.clone(),
        tensors: names
            .iter()
            .zip(&tensors)
            .map(|(name, t)| TensorMeta {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    write(&mut w, MAGIC)?;
    write(&mut w, &(header_bytes.len() as u64).to_le_bytes())?;
    write(&mut w, &header_bytes)?;
    for t in &tensors {
        for &v in t.data() {
            write(&mut w, &v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<DenseMatrix>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, path)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: not a checkpoint file",
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 8];
    read_exact(&mut r, &mut len_bytes, path)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    if header_len > 1 << 24 {
        return Err(Error::Checkpoint(format!(
            "{}: header length {} is implausible",
            path.display(),
            header_len
        )));
    }
    let mut header_bytes = vec![0u8; header_len];
    read_exact(&mut r, &mut header_bytes, path)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Checkpoint(format!("{}: bad header: {e}", path.display())))?;

    let mut tensors = Vec::with_capacity(header.tensors.len());
    let mut buf = [0u8; 8];
    for meta in &header.tensors {
        let count = meta.rows.checked_mul(meta.cols).ok_or_else(|| {
            Error::Checkpoint(format!(
                "{}: tensor {} has overflowing shape",
                path.display(),
                meta.name
            ))
        })?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            read_exact(&mut r, &mut buf, path)?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push(DenseMatrix::from_vec(meta.rows, meta.cols, data)?);
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Checkpoint(format!(
                "{}: trailing bytes after tensor data",
                path.display()
            )))
        }
        Err(e) => return Err(Error::io(path, e)),
    }
    Ok((header, tensors))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Checkpoint(format!("{}: truncated checkpoint", path.display()))
        } else {
            Error::io(path, e)
        }
    })
}
