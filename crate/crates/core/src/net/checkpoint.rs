//! Checkpoint file.
//!
//! Little-endian layout:
//!
//! ```text
//! "SLPN"  u32 version
//! u8 kind (0 relaxed, 1 strict, 2 robust), u8 loss (0 Lagrangian, 1 penalty), 2 zero bytes
//! u32 n_antennas, u32 n_users, u32 blocks, u32 pum_channels, u32 apb_channels
//! f64 hinge_weight, f64 gamma_init, f64 mu_init, u64 seed
//! u32 block count, then per block:
//!     u32 name length, name (UTF-8), u32 rank, rank × u64 dims, f64 payload
//! ```
//!
//! Blocks hold every parameter in `SlpDnet::params` order followed by the batch-norm buffers.

use std::fs;
use std::path::Path;

use super::model::{NetConfig, SlpDnet, TrainingLoss};
use crate::error::{Result, SlpError};
use crate::solvers::SlpKind;

const MAGIC: &[u8; 4] = b"SLPN";
const VERSION: u32 = 1;

fn kind_code(kind: SlpKind) -> u8 {
    match kind {
        SlpKind::Relaxed => 0,
        SlpKind::Strict => 1,
        SlpKind::Robust => 2,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(SlpError::Format("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn named_blocks(model: &SlpDnet) -> Vec<(String, Vec<usize>, &Vec<f64>)> {
    let mut v: Vec<_> = model.params().into_iter().map(|p| (p.name.clone(), p.shape.clone(), &p.value)).collect();
    for (name, buf) in model.apb.buffers() {
        v.push((name, vec![buf.len()], buf));
    }
    v
}

pub fn checkpoint_to_bytes(model: &SlpDnet) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let loss = match c.loss {
        TrainingLoss::Lagrangian => 0,
        TrainingLoss::Penalty => 1,
    };
    out.extend_from_slice(&[kind_code(c.kind), loss, 0, 0]);
    for v in [c.n_antennas, c.n_users, c.blocks, c.pum_channels, c.apb_channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in [c.hinge_weight, c.gamma_init, c.mu_init] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    let blocks = named_blocks(model);
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, shape, values) in blocks {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<SlpDnet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(SlpError::Format("not an SLPN checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SlpError::Format(format!("unsupported checkpoint version {version}")));
    }
    let head = r.take(4)?;
    let kind = match head[0] {
        0 => SlpKind::Relaxed,
        1 => SlpKind::Strict,
        2 => SlpKind::Robust,
        k => return Err(SlpError::Format(format!("unknown kind code {k}"))),
    };
    let loss = match head[1] {
        0 => TrainingLoss::Lagrangian,
        1 => TrainingLoss::Penalty,
        l => return Err(SlpError::Format(format!("unknown loss code {l}"))),
    };
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let mut config = NetConfig::new(kind, dims[0], dims[1]);
    config.blocks = dims[2];
    config.pum_channels = dims[3];
    config.apb_channels = dims[4];
    config.loss = loss;
    config.hinge_weight = r.f64()?;
    config.gamma_init = r.f64()?;
    config.mu_init = r.f64()?;
    config.seed = r.u64()?;
    let mut model = SlpDnet::new(config)?;
    let count = r.u32()? as usize;
    let mut loaded = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| SlpError::Format("block name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        loaded.push((name, shape, values));
    }
    if r.pos != bytes.len() {
        return Err(SlpError::Format("trailing bytes after checkpoint".into()));
    }
    let expected = named_blocks(&model).len();
    if loaded.len() != expected {
        return Err(SlpError::Format(format!("expected {expected} blocks, found {}", loaded.len())));
    }
    let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
        let pos = loaded
            .iter()
            .position(|(n, _, _)| n == name)
            .ok_or_else(|| SlpError::Format(format!("missing block {name}")))?;
        let (_, s, v) = loaded.swap_remove(pos);
        if s != shape {
            return Err(SlpError::Format(format!("block {name} has shape {s:?}, expected {shape:?}")));
        }
        Ok(v)
    };
    for p in model.params_mut() {
        p.value = take(&p.name, &p.shape)?;
    }
    for (name, buf) in model.apb.buffers_mut() {
        let shape = [buf.len()];
        *buf = take(&name, &shape)?;
    }
    Ok(model)
}

pub fn save_checkpoint(model: &SlpDnet, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_bytes(model)).map_err(|e| SlpError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<SlpDnet> {
    let bytes = fs::read(path).map_err(|e| SlpError::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
