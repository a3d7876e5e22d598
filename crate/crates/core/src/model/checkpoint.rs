//! Parameter checkpoints.
//!
//! Layout:
//!
//! ```text
//! magic   8 bytes  "SPKHNCKP"
//! hlen    u64 LE   byte length of the JSON header
//! header  hlen bytes UTF-8 JSON {format_version, tensors:[{name, shape}], model, extra}
//! data    little-endian f64 values of every tensor, in header order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, NeuronKind};
use super::params::{ModelParams, PARAM_NAMES};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SPKHNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f64>,
    pub model: ModelConfig,
    /// Free-form run metadata (meta-path names, split settings, ...).
    pub extra: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    tensors: Vec<TensorEntry>,
    model: ModelConfig,
    extra: serde_json::Value,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.params.tensors();
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: (*name).to_owned(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
            model: self.model.clone(),
            extra: self.extra.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.params.element_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_owned());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..).ok_or_else(|| bad("truncated"))?;
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_VERSION})",
                header.format_version
            )));
        }
        let mut data = &body[hlen..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for (k, entry) in header.tensors.iter().enumerate() {
            if PARAM_NAMES.get(k) != Some(&entry.name.as_str()) {
                return Err(Error::Checkpoint(format!(
                    "tensor {k} is `{}`, expected `{}`",
                    entry.name,
                    PARAM_NAMES.get(k).unwrap_or(&"<none>")
                )));
            }
            let len: usize = entry.shape.iter().product();
            if data.len() < 8 * len {
                return Err(bad("truncated tensor data"));
            }
            let values = data[..8 * len]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            data = &data[8 * len..];
            tensors.push(Tensor::new(entry.shape.clone(), values)?);
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after tensor data"));
        }
        if tensors.len() < 5 {
            return Err(bad("missing tensors"));
        }
        let tau = tensors.get(5).map(|t| t.item());
        if tau.is_some() != (header.model.neuron.kind == NeuronKind::PLIF) {
            return Err(bad("tau parameter present iff the neuron kind is PLIF"));
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("checked length");
        let params = ModelParams::from_tensors(next(), next(), next(), next(), next(), tau)?;
        Ok(Self {
            params,
            model: header.model,
            extra: header.extra,
        })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn roundtrip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::init(6, 4, 3, NeuronKind::PLIF, 2.0, &mut rng).unwrap();
        let ckpt = Checkpoint {
            params,
            model: ModelConfig::default(),
            extra: serde_json::json!({"metapaths": ["PAP", "PSP"]}),
        };
        let bytes = ckpt.to_bytes().unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::init(2, 2, 2, NeuronKind::IF, 2.0, &mut rng).unwrap();
        let model = ModelConfig {
            neuron: crate::model::NeuronConfig {
                kind: NeuronKind::IF,
                ..Default::default()
            },
            ..Default::default()
        };
        let bytes = Checkpoint { params, model, extra: serde_json::Value::Null }.to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }
}
