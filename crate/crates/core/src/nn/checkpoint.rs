//! Binary weight checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 8     | magic `LDPGNNW\0`                        |
//! | 4     | format version (u32, currently 1)        |
//! | 1     | backbone tag (0 = gcn, 1 = sage)         |
//! | 12    | input dim, hidden dim, classes (3 × u32) |
//! | 4·P   | parameters as f32: w1, b1, w2, b2        |
//!
//! Weights are stored at single precision; reading then writing again yields
//! the same bytes.

use std::fs;
use std::path::Path;

use super::{Backbone, GnnConfig, ModelWeights};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LDPGNNW\0";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 12;

pub fn encode_checkpoint(config: &GnnConfig, weights: &ModelWeights) -> Vec<u8> {
    let input_dim = weights.input_dim(config.backbone);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * weights.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(config.backbone.tag());
    for dim in [input_dim, config.hidden_dim, config.num_classes] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for s in weights.slices() {
        for &x in s {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], dropout: f64) -> Result<(GnnConfig, ModelWeights)> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a weight checkpoint".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let backbone = Backbone::from_tag(bytes[12])
        .ok_or_else(|| Error::Checkpoint(format!("unknown backbone tag {}", bytes[12])))?;
    let input_dim = u32_at(13) as usize;
    let config = GnnConfig {
        backbone,
        hidden_dim: u32_at(17) as usize,
        num_classes: u32_at(21) as usize,
        dropout,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let mut weights = ModelWeights::zeros(&config, input_dim);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * weights.num_params() {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, header implies {}",
            payload.len(),
            4 * weights.num_params()
        )));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    weights.set_flat(&flat)?;
    if !weights.is_finite() {
        return Err(Error::Checkpoint("non-finite weight".into()));
    }
    Ok((config, weights))
}

pub fn write_checkpoint(path: &Path, config: &GnnConfig, weights: &ModelWeights) -> Result<()> {
    fs::write(path, encode_checkpoint(config, weights))?;
    Ok(())
}

/// Reads a checkpoint; the dropout rate is not stored and is supplied by the
/// caller.
pub fn read_checkpoint(path: &Path, dropout: f64) -> Result<(GnnConfig, ModelWeights)> {
    decode_checkpoint(&fs::read(path)?, dropout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for backbone in [Backbone::Gcn, Backbone::Sage] {
            let cfg = GnnConfig::new(backbone, 5, 0.25).unwrap();
            let w = ModelWeights::glorot(&cfg, 7, &mut ChaCha8Rng::seed_from_u64(2));
            let path = dir.path().join(format!("{backbone}.bin"));
            write_checkpoint(&path, &cfg, &w).unwrap();
            let (cfg2, w2) = read_checkpoint(&path, 0.25).unwrap();
            assert_eq!(cfg2, cfg);
            for (a, b) in w.to_flat().iter().zip(w2.to_flat()) {
                assert_eq!(*a as f32, b as f32);
            }
            assert_eq!(encode_checkpoint(&cfg2, &w2), fs::read(&path).unwrap());
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        let cfg = GnnConfig::new(Backbone::Gcn, 3, 0.0).unwrap();
        let w = ModelWeights::zeros(&cfg, 4);
        let good = encode_checkpoint(&cfg, &w);
        assert!(decode_checkpoint(&good[..good.len() - 1], 0.0).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad, 0.0).is_err());
        let mut bad = good.clone();
        bad[8] = 2;
        assert!(decode_checkpoint(&bad, 0.0).is_err());
        let mut bad = good;
        bad[12] = 9;
        assert!(decode_checkpoint(&bad, 0.0).is_err());
    }
}
