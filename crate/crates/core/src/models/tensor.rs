//! Flat f64 tensors and their on-disk layout: little-endian values,
//! concatenated in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightsInfo {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
    pub tensors: Vec<TensorInfo>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode_tensors(tensors: &[Tensor]) -> (Vec<u8>, Vec<TensorInfo>) {
    let total: usize = tensors.iter().map(|t| t.data.len()).sum();
    let mut bytes = Vec::with_capacity(total * 8);
    for t in tensors {
        for v in &t.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let infos = tensors
        .iter()
        .map(|t| TensorInfo {
            name: t.name.clone(),
            shape: t.shape.clone(),
        })
        .collect();
    (bytes, infos)
}

pub fn write_tensors(path: &Path, tensors: &[Tensor]) -> Result<WeightsInfo> {
    let (bytes, tensors) = encode_tensors(tensors);
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(WeightsInfo {
        file: path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
        tensors,
    })
}

/// Reads tensors described by `info`, verifying size and checksum. Problems
/// are reported as plain messages for the caller to attribute.
pub fn read_tensors(path: &Path, info: &WeightsInfo) -> std::result::Result<Vec<Tensor>, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    if bytes.len() as u64 != info.bytes {
        return Err(format!(
            "weights file has {} bytes, manifest expects {}",
            bytes.len(),
            info.bytes
        ));
    }
    let digest = sha256_hex(&bytes);
    if digest != info.sha256 {
        return Err(format!(
            "weights checksum {digest} does not match manifest {}",
            info.sha256
        ));
    }
    let expected: usize = info.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if expected * 8 != bytes.len() {
        return Err(format!(
            "manifest tensor shapes need {} bytes, file has {}",
            expected * 8,
            bytes.len()
        ));
    }
    let mut offset = 0;
    let mut out = Vec::with_capacity(info.tensors.len());
    for t in &info.tensors {
        let n: usize = t.shape.iter().product();
        let data = bytes[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += n * 8;
        out.push(Tensor::new(t.name.clone(), t.shape.clone(), data));
    }
    Ok(out)
}

/// Removes the named tensor from `tensors`, checking its element count.
pub fn take_tensor(tensors: &mut Vec<Tensor>, name: &str, len: usize) -> std::result::Result<Vec<f64>, String> {
    let pos = tensors
        .iter()
        .position(|t| t.name == name)
        .ok_or_else(|| format!("missing tensor `{name}`"))?;
    let t = tensors.remove(pos);
    if t.data.len() != len {
        return Err(format!("tensor `{name}` has {} values, expected {len}", t.data.len()));
    }
    Ok(t.data)
}
