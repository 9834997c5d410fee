//! Versioned binary checkpoint.
//!
//! Layout (little-endian):
//! ```text
//! magic "UAMCKPT\0" | version u32 | algorithm str | metadata str | count u32
//! per network: name str | layers u32 | sizes u64* | output u8 | params u64 | f64*
//! ```
//! where `str` is a u32 byte length followed by UTF-8. Parameters are stored
//! as raw IEEE-754 bits, so a round trip is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, MlpLayout};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"UAMCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRecord {
    pub name: String,
    pub layout: MlpLayout,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub algorithm: String,
    /// Free-form JSON describing how the networks were built.
    pub metadata: String,
    pub networks: Vec<NetworkRecord>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
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
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Result<&NetworkRecord> {
        self.networks
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("checkpoint has no network named {name:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_str(&mut out, &self.algorithm);
        put_str(&mut out, &self.metadata);
        put_u32(&mut out, self.networks.len() as u32);
        for net in &self.networks {
            put_str(&mut out, &net.name);
            let sizes = net.layout.sizes();
            put_u32(&mut out, sizes.len() as u32);
            for &s in sizes {
                put_u64(&mut out, s as u64);
            }
            out.push(match net.layout.output_activation() {
                Activation::Identity => 0,
                Activation::Relu => 1,
            });
            put_u64(&mut out, net.params.len() as u64);
            for p in &net.params {
                out.extend_from_slice(&p.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let algorithm = r.string()?;
        let metadata = r.string()?;
        let count = r.u32()?;
        let mut networks = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = r.string()?;
            let n_sizes = r.u32()? as usize;
            let sizes = (0..n_sizes)
                .map(|_| r.u64().map(|s| s as usize))
                .collect::<Result<Vec<_>>>()?;
            let output = match r.u8()? {
                0 => Activation::Identity,
                1 => Activation::Relu,
                other => return Err(Error::Checkpoint(format!("unknown activation tag {other}"))),
            };
            let layout = MlpLayout::new(&sizes, output).map_err(|e| Error::Checkpoint(e.to_string()))?;
            let n_params = r.u64()? as usize;
            if n_params != layout.param_count() {
                return Err(Error::Checkpoint(format!(
                    "network {name:?} stores {n_params} parameters, layout needs {}",
                    layout.param_count()
                )));
            }
            let params = (0..n_params)
                .map(|_| r.u64().map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            networks.push(NetworkRecord { name, layout, params });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last network".into()));
        }
        Ok(Self {
            algorithm,
            metadata,
            networks,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
