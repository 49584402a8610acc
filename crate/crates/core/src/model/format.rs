//! Binary model format, little-endian:
//!
//! ```text
//! magic "D2FL"            4 bytes
//! format version          u16
//! metadata length         u32, then UTF-8 JSON metadata
//! architecture length     u32, then UTF-8 JSON network spec
//! parameters              f32 x count, layer order, weight before bias
//! CRC-32 (IEEE)           u32 over every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::model::{ModelArtifact, ModelMetadata};
use crate::nn::{LayerParams, NetworkSpec, ParameterSet, Tensor};

pub const MAGIC: [u8; 4] = *b"D2FL";
pub const FORMAT_VERSION: u16 = 1;

const PREFIX_LEN: usize = 4 + 2;
const TRAILER_LEN: usize = 4;

fn json_sections(artifact: &ModelArtifact) -> (Vec<u8>, Vec<u8>) {
    let meta = serde_json::to_vec(&artifact.metadata).expect("metadata serializes");
    let arch = serde_json::to_vec(&artifact.spec).expect("network spec serializes");
    (meta, arch)
}

/// Exact length of [`encode`]'s output, computed without encoding the parameters.
pub fn audit_size(artifact: &ModelArtifact) -> usize {
    let (meta, arch) = json_sections(artifact);
    PREFIX_LEN + 4 + meta.len() + 4 + arch.len() + 4 * artifact.params.total_count() + TRAILER_LEN
}

pub fn encode(artifact: &ModelArtifact) -> Vec<u8> {
    let (meta, arch) = json_sections(artifact);
    let mut buf = Vec::with_capacity(audit_size(artifact));
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(&meta);
    buf.extend_from_slice(&(arch.len() as u32).to_le_bytes());
    buf.extend_from_slice(&arch);
    for v in artifact.params.flat_values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, FormatError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or(FormatError::Truncated {
            needed: at + 4,
            actual: bytes.len(),
        })
}

/// Checks, in order: magic, version, that the declared sections fit, the CRC,
/// then the JSON sections and the parameter block length.
pub fn decode(bytes: &[u8]) -> Result<ModelArtifact, FormatError> {
    let truncated = |needed: usize| FormatError::Truncated {
        needed,
        actual: bytes.len(),
    };
    let magic: [u8; 4] = bytes.get(..4).ok_or(truncated(4))?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(bytes.get(4..6).ok_or(truncated(6))?.try_into().expect("2 bytes"));
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let meta_len = read_u32(bytes, PREFIX_LEN)? as usize;
    let meta_start = PREFIX_LEN + 4;
    let arch_len_at = meta_start + meta_len;
    let arch_len = read_u32(bytes, arch_len_at)? as usize;
    let arch_start = arch_len_at + 4;
    let params_start = arch_start + arch_len;
    if bytes.len() < params_start + TRAILER_LEN {
        return Err(truncated(params_start + TRAILER_LEN));
    }
    let body_end = bytes.len() - TRAILER_LEN;
    let stored = u32::from_le_bytes(bytes[body_end..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch { stored, computed });
    }

    let metadata: ModelMetadata = serde_json::from_slice(&bytes[meta_start..arch_len_at])
        .map_err(|e| FormatError::Malformed(format!("metadata: {e}")))?;
    let spec: NetworkSpec = serde_json::from_slice(&bytes[arch_start..params_start])
        .map_err(|e| FormatError::Malformed(format!("architecture: {e}")))?;
    spec.validate()
        .map_err(|e| FormatError::Malformed(format!("architecture: {e}")))?;

    let payload = &bytes[params_start..body_end];
    let needed = 4 * spec.param_count();
    if payload.len() != needed {
        return Err(FormatError::Malformed(format!(
            "parameter block holds {} bytes, architecture needs {needed}",
            payload.len()
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let mut layers = Vec::new();
    for (i, layer) in spec.layers.iter().enumerate() {
        if let Some((wshape, bshape)) = layer.param_shapes() {
            let mut take = |shape: Vec<usize>| {
                let n = shape.iter().product();
                Tensor::new(shape, values.by_ref().take(n).collect()).expect("length checked above")
            };
            let weight = take(wshape);
            let bias = take(bshape);
            layers.push((i, LayerParams { weight, bias }));
        }
    }
    let artifact = ModelArtifact {
        spec,
        params: ParameterSet::from_layers(layers),
        metadata,
    };
    artifact
        .check_consistency()
        .map_err(|e| FormatError::Malformed(e.to_string()))?;
    Ok(artifact)
}

pub fn save_model(artifact: &ModelArtifact, destination: &Path) -> Result<()> {
    let mut file = fs::File::create(destination)?;
    file.write_all(&encode(artifact))?;
    file.sync_all()?;
    Ok(())
}

pub fn load_model(source: &Path) -> Result<ModelArtifact> {
    let bytes = fs::read(source)?;
    Ok(decode(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn artifact() -> ModelArtifact {
        ModelArtifact::initialized(&ModelConfig::default(), 3).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let a = artifact();
        let bytes = encode(&a);
        assert_eq!(bytes.len(), audit_size(&a));
        let b = decode(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(encode(&b), bytes);
    }

    #[test]
    fn each_failure_is_named() {
        let bytes = encode(&artifact());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(FormatError::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad), Err(FormatError::UnsupportedVersion { found: 9, .. })));
        let mut bad = bytes.clone();
        let mid = bytes.len() - 100;
        bad[mid] ^= 0x01;
        assert!(matches!(decode(&bad), Err(FormatError::ChecksumMismatch { .. })));
        assert!(matches!(decode(&bytes[..3]), Err(FormatError::Truncated { .. })));
        assert!(matches!(decode(&bytes[..40]), Err(FormatError::Truncated { .. })));
    }

    #[test]
    fn empty_parameter_set_is_header_and_trailer() {
        let a = artifact();
        let empty = ModelArtifact {
            params: ParameterSet::from_layers([]),
            ..a.clone()
        };
        let (meta, arch) = json_sections(&a);
        assert_eq!(audit_size(&empty), 6 + 4 + meta.len() + 4 + arch.len() + 4);
        assert_eq!(encode(&empty).len(), audit_size(&empty));
    }

    #[test]
    fn wrong_parameter_block_is_malformed() {
        let a = artifact();
        let mut bytes = encode(&a);
        // drop one parameter and re-seal the CRC
        let body_end = bytes.len() - 4;
        bytes.drain(body_end - 4..body_end);
        let crc = crc32fast::hash(&bytes[..bytes.len() - 4]);
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(FormatError::Malformed(_))));
    }
}
