//! Reading and writing named f64 arrays in safetensors files.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use safetensors::{Dtype, SafeTensors};

use crate::error::{Error, Result};

/// A named array with its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// An ordered set of arrays plus string metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightFile {
    pub arrays: BTreeMap<String, NamedArray>,
    pub metadata: HashMap<String, String>,
}

fn st_err(context: &str, e: safetensors::SafeTensorError) -> Error {
    Error::parse(context.to_string(), e.to_string())
}

impl WeightFile {
    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.insert(name.into(), NamedArray { shape, data });
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::parse("weights", format!("missing tensor {name:?}")))
    }

    /// Decodes F32 or F64 tensors; other dtypes are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, meta) = SafeTensors::read_metadata(bytes).map_err(|e| st_err("safetensors", e))?;
        let st = SafeTensors::deserialize(bytes).map_err(|e| st_err("safetensors", e))?;
        let mut out = WeightFile {
            metadata: meta.metadata().clone().unwrap_or_default(),
            ..Default::default()
        };
        for (name, view) in st.tensors() {
            let raw = view.data();
            let data: Vec<f64> = match view.dtype() {
                Dtype::F32 => raw
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                    .collect(),
                Dtype::F64 => raw
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
                other => {
                    return Err(Error::parse(
                        "safetensors",
                        format!("tensor {name:?} has unsupported dtype {other:?}"),
                    ))
                }
            };
            out.insert(name, view.shape().to_vec(), data);
        }
        Ok(out)
    }

    pub fn load(path: &Path, hint: &str) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::resource(path, hint),
            _ => e.into(),
        })?;
        Self::from_bytes(&bytes)
    }

    /// Encodes every array as little-endian F64 (or F32 when `single` is set).
    pub fn to_bytes(&self, single: bool) -> Result<Vec<u8>> {
        let encoded: Vec<(String, Vec<usize>, Vec<u8>)> = self
            .arrays
            .iter()
            .map(|(name, a)| {
                let bytes = if single {
                    a.data.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect()
                } else {
                    a.data.iter().flat_map(|v| v.to_le_bytes()).collect()
                };
                (name.clone(), a.shape.clone(), bytes)
            })
            .collect();
        let dtype = if single { Dtype::F32 } else { Dtype::F64 };
        let views = encoded
            .iter()
            .map(|(n, s, b)| {
                safetensors::tensor::TensorView::new(dtype, s.clone(), b)
                    .map(|v| (n.clone(), v))
                    .map_err(|e| st_err("safetensors", e))
            })
            .collect::<Result<Vec<_>>>()?;
        let meta = (!self.metadata.is_empty()).then(|| self.metadata.clone());
        let bytes = safetensors::serialize(views, &meta).map_err(|e| st_err("safetensors", e))?;
        canonical_header(bytes)
    }

    /// Writes atomically via a temporary file in the destination directory.
    pub fn save(&self, path: &Path, single: bool) -> Result<()> {
        let bytes = self.to_bytes(single)?;
        crate::fsutil::write_atomic(path, &bytes)
    }
}

/// Rewrites the JSON header with sorted keys so equal contents give equal bytes (the
/// metadata map would otherwise follow hash order).
fn canonical_header(bytes: Vec<u8>) -> Result<Vec<u8>> {
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8-byte prefix")) as usize;
    let mut header: BTreeMap<String, serde_json::Value> = serde_json::from_slice(&bytes[8..8 + n])?;
    if let Some(meta) = header.get_mut("__metadata__") {
        let sorted: BTreeMap<String, String> = serde_json::from_value(meta.take())?;
        *meta = serde_json::to_value(sorted)?;
    }
    let mut json = serde_json::to_vec(&header)?;
    while json.len() % 8 != 0 {
        json.push(b' ');
    }
    let mut out = Vec::with_capacity(8 + json.len() + bytes.len() - 8 - n);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&bytes[8 + n..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_f64_and_f32() {
        let mut w = WeightFile::default();
        w.insert("a.weight", vec![2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        w.insert("b", vec![1], vec![-1.5]);
        w.metadata.insert("step".into(), "7".into());
        let back = WeightFile::from_bytes(&w.to_bytes(false).unwrap()).unwrap();
        assert_eq!(back, w);
        let single = WeightFile::from_bytes(&w.to_bytes(true).unwrap()).unwrap();
        assert_eq!(single.get("b").unwrap().data, vec![-1.5]);
        assert!((single.get("a.weight").unwrap().data[0] - 0.1).abs() < 1e-7);
        assert!(single.get("zzz").is_err());
    }

    #[test]
    fn encoding_is_byte_stable() {
        let mut w = WeightFile::default();
        w.insert("x", vec![1], vec![2.0]);
        for k in ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"] {
            w.metadata.insert(k.into(), k.to_uppercase());
        }
        let first = w.to_bytes(false).unwrap();
        for _ in 0..5 {
            let mut again = WeightFile::default();
            again.arrays = w.arrays.clone();
            for (k, v) in &w.metadata {
                again.metadata.insert(k.clone(), v.clone());
            }
            assert_eq!(again.to_bytes(false).unwrap(), first);
        }
        assert_eq!(WeightFile::from_bytes(&first).unwrap(), w);
    }

    #[test]
    fn missing_file_is_resource_error() {
        let err = WeightFile::load(Path::new("/nonexistent/w.safetensors"), "download it").unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }
}
