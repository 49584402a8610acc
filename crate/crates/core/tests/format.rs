use std::path::PathBuf;

use drowsy_core::model::{audit_size, decode, encode, load_model, save_model, ModelArtifact, ModelConfig};
use drowsy_core::nn::ParameterSet;
use drowsy_core::FormatError;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_tiny.d2fl")
}

/// One filter per conv block: 29 parameters, set to `i / 8 - 1`.
fn tiny() -> ModelArtifact {
    let config = ModelConfig { filters: Some(vec![1, 1, 1, 1]), ..ModelConfig::default() };
    let mut params = ParameterSet::zeros(&config.build().unwrap());
    let mut i = 0;
    for (_, layer) in params.iter_mut() {
        for t in [&mut layer.weight, &mut layer.bias] {
            for v in t.data_mut() {
                *v = i as f32 / 8.0 - 1.0;
                i += 1;
            }
        }
    }
    ModelArtifact::new(&config, params, 7, 3).unwrap()
}

fn u32_at(b: &[u8], at: usize) -> usize {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap()) as usize
}

#[test]
fn golden_file_is_stable() {
    let art = tiny();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path(), encode(&art)).unwrap();
    }
    let golden = std::fs::read(golden_path()).unwrap();
    assert_eq!(encode(&art), golden);
    assert_eq!(decode(&golden).unwrap(), art);

    assert_eq!(&golden[..4], b"D2FL");
    assert_eq!(u16::from_le_bytes([golden[4], golden[5]]), 1);
    let meta_len = u32_at(&golden, 6);
    let meta: serde_json::Value = serde_json::from_slice(&golden[10..10 + meta_len]).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["epochs"], 3);
    assert_eq!(meta["created"], serde_json::Value::Null);
    let arch_at = 10 + meta_len;
    let arch_len = u32_at(&golden, arch_at);
    let arch: serde_json::Value = serde_json::from_slice(&golden[arch_at + 4..arch_at + 4 + arch_len]).unwrap();
    assert_eq!(arch["input"]["length"], 68);
    let params = &golden[arch_at + 4 + arch_len..golden.len() - 4];
    assert_eq!(params.len(), 29 * 4);
    let first: Vec<f32> = params.chunks(4).take(3).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(first, [-1.0, -0.875, -0.75]);
    assert_eq!(golden.len(), audit_size(&art));
}

#[test]
fn trailer_is_standard_crc32() {
    assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    let golden = std::fs::read(golden_path()).unwrap();
    let n = golden.len();
    assert_eq!(u32_at(&golden, n - 4) as u32, crc32fast::hash(&golden[..n - 4]));
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let art = ModelArtifact::initialized(&ModelConfig::default(), 11).unwrap();
    let (a, b) = (dir.path().join("a.d2fl"), dir.path().join("b.d2fl"));
    save_model(&art, &a).unwrap();
    save_model(&load_model(&a).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::metadata(&a).unwrap().len() as usize, audit_size(&art));
}

#[test]
fn every_byte_flip_in_the_payload_is_caught() {
    let bytes = encode(&tiny());
    for i in 6..bytes.len() {
        let mut bad = bytes.clone();
        bad[i] ^= 0x5a;
        assert!(decode(&bad).is_err(), "flip at {i} went unnoticed");
    }
    assert!(matches!(decode(&[]), Err(FormatError::Truncated { .. })));
}
