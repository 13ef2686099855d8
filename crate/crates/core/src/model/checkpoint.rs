//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "DOROCKPT"
//! version  u32
//! arch     u8       0 = linear, 1 = mlp
//! input    u64      input dimension
//! hidden   u64      hidden width (0 for linear)
//! count    u64      number of parameters
//! values   count x f64, per layer weights then bias
//! ```

use std::fs;
use std::path::Path;

use super::{Architecture, ModelError, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DOROCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 1 + 8 + 8 + 8;

impl ModelParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let flat = self.to_flat();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * flat.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let (tag, hidden) = match self.architecture() {
            Architecture::Linear => (0u8, 0u64),
            Architecture::Mlp { hidden } => (1u8, hidden as u64),
        };
        out.push(tag);
        out.extend_from_slice(&(self.input_dim() as u64).to_le_bytes());
        out.extend_from_slice(&hidden.to_le_bytes());
        out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |msg: &str| ModelError::Checkpoint(msg.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(bad("file shorter than the header"));
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let architecture = match (bytes[12], u64_at(21)) {
            (0, 0) => Architecture::Linear,
            (1, hidden) => Architecture::Mlp {
                hidden: hidden as usize,
            },
            (tag, hidden) => {
                return Err(ModelError::Checkpoint(format!(
                    "unknown architecture tag {tag} (hidden {hidden})"
                )))
            }
        };
        let input_dim = u64_at(13) as usize;
        let count = u64_at(29) as usize;
        let mut params = ModelParams::zeros(architecture, input_dim)?;
        if count != params.num_params() || bytes.len() != HEADER_LEN + 8 * count {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameters in {} bytes, header says {count} in {}",
                params.num_params(),
                HEADER_LEN + 8 * params.num_params(),
                bytes.len()
            )));
        }
        let flat: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.set_flat(&flat)?;
        Ok(params)
    }
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    fs::write(path, params.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, ModelError> {
    ModelParams::from_bytes(&fs::read(path)?)
}
