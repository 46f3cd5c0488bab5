//! Versioned binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes  "MSNNCKPT"
//! version    u32      = 1
//! dtype      u8       1 = f32, 2 = f64
//! kind       str      model kind tag
//! metadata   str      free-form (models store their JSON config here)
//! n_params   u32
//! n_params × { name: str, ndim: u32, dims: ndim × u64, values: numel × dtype }
//! has_adam   u8
//! if has_adam: t: u64, lr, beta1, beta2, eps: f64,
//!              n_params × { m: numel × dtype }, n_params × { v: numel × dtype }
//! rng_seed   u64
//! rng_counter u64
//! ```
//! where `str` is a u32 byte length followed by UTF-8 bytes.

use std::path::Path;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MSNNCKPT";
pub const VERSION: u32 = 1;

/// State of the counter-based generators at save time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub counter: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub kind: String,
    pub metadata: String,
    pub params: ParamStore<T>,
    pub optimizer: Option<AdamState<T>>,
    pub rng: RngState,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.params.num_elements() * T::BYTES * 3 + 1024);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(T::DTYPE);
        put_str(&mut out, &self.kind);
        put_str(&mut out, &self.metadata);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in self.params.iter() {
            put_str(&mut out, &p.name);
            out.extend_from_slice(&(p.tensor.shape().len() as u32).to_le_bytes());
            for &d in p.tensor.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            p.tensor.data().iter().for_each(|&x| x.write_le(&mut out));
        }
        match &self.optimizer {
            None => out.push(0),
            Some(adam) => {
                out.push(1);
                out.extend_from_slice(&adam.t.to_le_bytes());
                for x in [
                    adam.config.lr,
                    adam.config.beta1,
                    adam.config.beta2,
                    adam.config.eps,
                ] {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                for buf in adam.m.iter().chain(&adam.v) {
                    buf.iter().for_each(|&x| x.write_le(&mut out));
                }
            }
        }
        out.extend_from_slice(&self.rng.seed.to_le_bytes());
        out.extend_from_slice(&self.rng.counter.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dtype = r.take(1)?[0];
        if dtype != T::DTYPE {
            return Err(bad(format!("dtype tag {dtype}, expected {}", T::DTYPE)));
        }
        let kind = r.string()?;
        let metadata = r.string()?;
        let n = r.u32()? as usize;
        let mut params = ParamStore::new();
        for _ in 0..n {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let data = r.values::<T>(numel)?;
            params.add(name, Tensor::new(&shape, data)?);
        }
        let optimizer = match r.take(1)?[0] {
            0 => None,
            1 => {
                let t = r.u64()?;
                let mut cfg = [0f64; 4];
                for c in &mut cfg {
                    *c = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
                }
                let sizes: Vec<usize> = params.iter().map(|p| p.tensor.numel()).collect();
                let m = sizes
                    .iter()
                    .map(|&k| r.values::<T>(k))
                    .collect::<Result<Vec<_>>>()?;
                let v = sizes
                    .iter()
                    .map(|&k| r.values::<T>(k))
                    .collect::<Result<Vec<_>>>()?;
                let config = AdamConfig {
                    lr: cfg[0],
                    beta1: cfg[1],
                    beta2: cfg[2],
                    eps: cfg[3],
                };
                Some(AdamState { config, t, m, v })
            }
            x => return Err(bad(format!("bad optimizer flag {x}"))),
        };
        let rng = RngState {
            seed: r.u64()?,
            counter: r.u64()?,
        };
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            kind,
            metadata,
            params,
            optimizer,
            rng,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid utf-8"))
    }
    fn values<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let raw = self.take(
            n.checked_mul(T::BYTES)
                .ok_or_else(|| bad("size overflow"))?,
        )?;
        Ok(raw.chunks_exact(T::BYTES).map(T::read_le).collect())
    }
}
