//! Binary checkpoint files.
//!
//! Layout: the 8-byte magic `MSSPINN\0`, a little-endian `u32` format
//! version, a `u32` header length, that many bytes of JSON header, a `u64`
//! parameter count and the parameters as little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkArchitecture, NetworkParameters};

const MAGIC: &[u8; 8] = b"MSSPINN\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: NetworkArchitecture,
    pub model: String,
    /// Number of optimiser steps taken.
    pub iteration: usize,
    pub seed: u64,
    /// Time scale `T` of the network input `τ = t/T`.
    pub t_scale: f64,
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: NetworkParameters,
}

fn format_err(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serialises");
        let values = self.params.values();
        let mut out = Vec::with_capacity(24 + header.len() + 8 * values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic).map_err(|_| format_err("truncated"))?;
        if &magic != MAGIC {
            return Err(format_err("bad magic"));
        }
        let version = read_u32(&mut bytes)?;
        if version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported format version {version}")));
        }
        let hlen = read_u32(&mut bytes)? as usize;
        if bytes.len() < hlen {
            return Err(format_err("truncated header"));
        }
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[..hlen]).map_err(|e| format_err(e.to_string()))?;
        bytes = &bytes[hlen..];
        let mut n = [0u8; 8];
        bytes.read_exact(&mut n).map_err(|_| format_err("truncated"))?;
        let n = u64::from_le_bytes(n) as usize;
        if bytes.len() != 8 * n {
            return Err(format_err(format!("expected {n} parameters, found {} bytes", bytes.len())));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let params = NetworkParameters::from_values(header.architecture.clone(), values)
            .map_err(|e| format_err(e.to_string()))?;
        Ok(Self { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn read_u32(bytes: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    bytes.read_exact(&mut b).map_err(|_| format_err("truncated"))?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::initialize_parameters;

    fn sample() -> Checkpoint {
        let arch = NetworkArchitecture::new(vec![4, 3], 3).unwrap();
        Checkpoint {
            header: CheckpointHeader {
                architecture: arch.clone(),
                model: "example1".into(),
                iteration: 7,
                seed: 3,
                t_scale: 60000.0,
                config_digest: "abc".into(),
            },
            params: initialize_parameters(&arch, 3).unwrap(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format { .. })));
        let mut bad = bytes;
        bad[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format { .. })));
    }
}
