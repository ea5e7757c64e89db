//! Network checkpoints.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "PERCHNN\0"
//! version    u32      = 1
//! iteration  u64
//! episodes   u64
//! seed       u64
//! config     u64      config hash
//! head       4 × f64  thrust_mid, thrust_half_range, log_std_min, log_std_max
//! then for the policy and the value network:
//!   layers   u32      number of layer sizes (input, hidden..., output)
//!   sizes    layers × u32
//!   count    u64      parameter count
//!   params   count × f64
//! ```
//!
//! Parameters per layer are the row-major weight matrix (out × in) followed by
//! the bias vector.

use std::io::{self, Read};
use std::path::Path;

use perch_core::nn::MlpNet;
use perch_core::rl::policy::PolicyHead;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;

pub const MAGIC: &[u8; 8] = b"PERCHNN\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checkpoint architecture does not match its parameters: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub iteration: u64,
    pub episodes: u64,
    pub seed: u64,
    pub config_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub head: PolicyHead,
    pub policy: MlpNet,
    pub value: MlpNet,
}

fn put_net(out: &mut Vec<u8>, net: &MlpNet) {
    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
    for &s in net.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.params().len() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let mut buf = [0u8; N];
        self.0.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn net(&mut self) -> Result<MlpNet, CheckpointError> {
        let layers = self.u32()? as usize;
        if !(2..=64).contains(&layers) {
            return Err(CheckpointError::ShapeMismatch(format!("{layers} layer sizes")));
        }
        let sizes = (0..layers).map(|_| self.u32().map(|s| s as usize)).collect::<Result<Vec<_>, _>>()?;
        let count = self.u64()? as usize;
        let expected = MlpNet::param_count(&sizes);
        if count != expected {
            return Err(CheckpointError::ShapeMismatch(format!(
                "sizes {sizes:?} need {expected} parameters, file declares {count}"
            )));
        }
        if self.0.len() < count * 8 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated parameter block").into());
        }
        let params = (0..count).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        MlpNet::from_params(&sizes, params).map_err(|e| CheckpointError::ShapeMismatch(e.to_string()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * (self.policy.params().len() + self.value.params().len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.meta.iteration, self.meta.episodes, self.meta.seed, self.meta.config_hash] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let h = &self.head;
        for v in [h.thrust_mid, h.thrust_half_range, h.log_std_min, h.log_std_max] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_net(&mut out, &self.policy);
        put_net(&mut out, &self.value);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader(bytes);
        let magic: [u8; 8] = r.take()?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::VersionMismatch { found: version });
        }
        let meta = CheckpointMeta { iteration: r.u64()?, episodes: r.u64()?, seed: r.u64()?, config_hash: r.u64()? };
        let head = PolicyHead {
            thrust_mid: r.f64()?,
            thrust_half_range: r.f64()?,
            log_std_min: r.f64()?,
            log_std_max: r.f64()?,
        };
        let policy = r.net()?;
        let value = r.net()?;
        if !r.0.is_empty() {
            return Err(CheckpointError::ShapeMismatch(format!("{} trailing bytes", r.0.len())));
        }
        if value.output_dim() != 1 || policy.input_dim() != value.input_dim() {
            return Err(CheckpointError::ShapeMismatch("policy/value networks are inconsistent".into()));
        }
        Ok(Checkpoint { meta, head, policy, value })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Short identifier derived from the file contents.
    pub fn id(&self) -> String {
        use sha2::{Digest, Sha256};
        let d = Sha256::digest(self.to_bytes());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format_version": VERSION,
            "id": self.id(),
            "meta": self.meta,
            "head": self.head,
            "policy": { "sizes": self.policy.sizes(), "params": self.policy.params() },
            "value": { "sizes": self.value.sizes(), "params": self.value.params() },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use perch_core::dynamics::QuadParams;
    use rand_chacha::rand_core::SeedableRng;

    fn sample() -> Checkpoint {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        Checkpoint {
            meta: CheckpointMeta { iteration: 3, episodes: 48, seed: 7, config_hash: 0xdead_beef },
            head: PolicyHead::new(&QuadParams::default(), -5.0, 1.0),
            policy: MlpNet::glorot(&[18, 6, 5, 8], 1.0, &mut rng).unwrap(),
            value: MlpNet::glorot(&[18, 6, 5, 1], 1.0, &mut rng).unwrap(),
        }
    }

    #[test]
    fn bytes_round_trip_bit_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.policy.params().iter().zip(c.policy.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncation_is_an_io_error() {
        let bytes = sample().to_bytes();
        for cut in [0, 5, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(CheckpointError::Io(_))), "cut {cut}");
        }
    }

    #[test]
    fn tampered_architecture_is_a_shape_mismatch() {
        let mut bytes = sample().to_bytes();
        // first hidden width of the policy network
        let off = 8 + 4 + 32 + 32 + 4 + 4;
        bytes[off] = 7;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::ShapeMismatch(_))));
    }

    #[test]
    fn version_checked() {
        let mut bytes = sample().to_bytes();
        bytes[8] = 2;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::VersionMismatch { found: 2 })));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::BadMagic)));
    }
}
