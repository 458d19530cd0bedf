//! Binary checkpoint: model config, named parameter tensors and optional
//! optimizer state. Values are stored as little-endian `f64`, which holds
//! both `f32` and `f64` parameters exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::optim::{AdamW, AdamWConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"TSADCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub params: ModelParams<T>,
    /// Number of optimizer updates applied so far.
    pub step: u64,
    pub optimizer: Option<AdamW<T>>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn values<T: Scalar>(&mut self, t: &Tensor<T>) {
        for &v in t.data() {
            self.f64(v.as_f64());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("name is not UTF-8".into()))
    }
    fn values<T: Scalar>(&mut self, shape: &[usize]) -> Result<Tensor<T>> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| self.f64().map(T::of)).collect::<Result<Vec<_>>>()?;
        Tensor::new(shape, data)
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        let pairs = self.params.config().to_pairs();
        w.u32(pairs.len() as u32);
        for (k, v) in pairs {
            w.str(k);
            w.u64(v as u64);
        }
        w.u64(self.step);
        let tensors = self.params.tensors();
        w.u32(tensors.len() as u32);
        for (name, t) in self.params.names().iter().zip(tensors) {
            w.str(name);
            w.u32(t.shape().len() as u32);
            for &d in t.shape() {
                w.u64(d as u64);
            }
            w.values(t);
        }
        match &self.optimizer {
            None => w.u8(0),
            Some(opt) => {
                w.u8(1);
                let c = opt.config;
                for v in [c.beta1, c.beta2, c.eps, c.weight_decay] {
                    w.f64(v);
                }
                w.u64(opt.step);
                for (m, v) in opt.first.iter().zip(&opt.second) {
                    w.values(m);
                    w.values(v);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n_pairs = r.u32()?;
        let pairs = (0..n_pairs)
            .map(|_| Ok((r.str()?, r.u64()? as usize)))
            .collect::<Result<Vec<_>>>()?;
        let config = ModelConfig::from_pairs(&pairs)?;
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.str()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            named.push((name, r.values(&shape)?));
        }
        let params = ModelParams::from_named(&config, named)?;
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let config = AdamWConfig {
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    eps: r.f64()?,
                    weight_decay: r.f64()?,
                };
                let opt_step = r.u64()?;
                let mut first = Vec::with_capacity(count);
                let mut second = Vec::with_capacity(count);
                for t in params.tensors() {
                    first.push(r.values(t.shape())?);
                    second.push(r.values(t.shape())?);
                }
                Some(AdamW {
                    config,
                    first,
                    second,
                    step: opt_step,
                })
            }
            other => return Err(Error::Checkpoint(format!("bad optimizer flag {other}"))),
        };
        if r.pos != buf.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint {
            params,
            step,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}
