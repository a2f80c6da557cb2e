//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! "JSR1"  u32 version (1: f32 tensors, 2: f64 tensors)  u64 step
//! str config (JSON)
//! u64 n_terms  str × n_terms
//! u64 n_users  str × n_users
//! u64 × 7 model shape
//! u64 n_tensors, then per tensor: str name, u64 rank, u64 × rank dims,
//!   values
//! ```
//!
//! `str` is a u64 byte length followed by UTF-8 bytes. Serialisation is
//! canonical, so save, load, save yields identical bytes.

use std::path::Path;

use crate::cli::{write_atomic, RunConfig};
use crate::corpus::Vocabulary;
use crate::model::{ModelParams, ModelShape};
use crate::numerics::{ParamSet, Scalar, Tensor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"JSR1";

/// Format version tag for tensors of scalar type `F`.
pub fn format_version<F: Scalar>() -> u32 {
    match F::BYTES {
        4 => 1,
        _ => 2,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<F> {
    pub step: usize,
    pub config: RunConfig,
    pub vocabulary: Vec<String>,
    pub users: Vec<String>,
    pub model: ModelParams<F>,
}

impl<F: Scalar> Checkpoint<F> {
    pub fn vocabulary_fingerprint(&self) -> String {
        Vocabulary::from_terms(self.vocabulary.clone()).fingerprint()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&format_version::<F>().to_le_bytes());
        put_u64(&mut out, self.step as u64);
        let config = serde_json::to_string(&self.config).map_err(|e| Error::Config(e.to_string()))?;
        put_str(&mut out, &config);
        for table in [&self.vocabulary, &self.users] {
            put_u64(&mut out, table.len() as u64);
            for s in table {
                put_str(&mut out, s);
            }
        }
        let s = self.model.shape();
        for d in [s.vocab_size, s.n_users, s.embed_dim, s.user_dim, s.repr_dim, s.tower_hidden, s.match_hidden] {
            put_u64(&mut out, d as u64);
        }
        let params = self.model.params();
        put_u64(&mut out, params.len() as u64);
        for (_, name, tensor) in params.iter() {
            put_str(&mut out, name);
            put_u64(&mut out, tensor.shape().len() as u64);
            for &d in tensor.shape() {
                put_u64(&mut out, d as u64);
            }
            for &v in tensor.data() {
                v.write_le(&mut out);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::BadMagic);
        }
        let mut r = Reader { bytes, at: MAGIC.len() };
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != format_version::<F>() {
            return Err(Error::VersionMismatch { found: version, expected: format_version::<F>() });
        }
        let step = r.len()?;
        let config: RunConfig = serde_json::from_str(&r.string()?)
            .map_err(|e| Error::Data(format!("checkpoint config: {e}")))?;
        let mut tables = [Vec::new(), Vec::new()];
        for table in &mut tables {
            let n = r.len()?;
            for _ in 0..n {
                table.push(r.string()?);
            }
        }
        let [vocabulary, users] = tables;
        let mut dims = [0usize; 7];
        for d in &mut dims {
            *d = r.len()?;
        }
        let [vocab_size, n_users, embed_dim, user_dim, repr_dim, tower_hidden, match_hidden] = dims;
        let shape = ModelShape { vocab_size, n_users, embed_dim, user_dim, repr_dim, tower_hidden, match_hidden };
        if vocab_size != vocabulary.len() || n_users != users.len() {
            return Err(Error::Data("checkpoint tables disagree with the model shape".into()));
        }
        let n_tensors = r.len()?;
        let mut params = ParamSet::new();
        for _ in 0..n_tensors {
            let name = r.string()?;
            let rank = r.len()?;
            let mut tensor_dims = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                tensor_dims.push(r.len()?);
            }
            let count = tensor_dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(Error::Truncated)?;
            let raw = r.take(count.checked_mul(F::BYTES).ok_or(Error::Truncated)?)?;
            let data: Vec<F> = raw.chunks_exact(F::BYTES).map(F::read_le).collect();
            params.insert(name, Tensor::new(tensor_dims, data)?);
        }
        if r.at != bytes.len() {
            return Err(Error::Data(format!("{} trailing bytes after checkpoint", bytes.len() - r.at)));
        }
        Ok(Checkpoint { step, config, vocabulary, users, model: ModelParams::from_params(shape, params)? })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u64(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Truncated)?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Truncated)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Data(format!("checkpoint string: {e}")))
    }
}
