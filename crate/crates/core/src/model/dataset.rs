use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;

use super::{ComplexChannelSet, ModulationSpec, Rotation, SlpInstance};
use crate::error::{Result, SlpError};

const MAGIC: &[u8; 4] = b"SLPD";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetConfig {
    pub rotation: Rotation,
}

/// Stacked rotated channels, one (2N_t × K) record per sample.
///
/// Record layout is row-major: entry (r, k) sits at `r * K + k`. Rows
/// `0..N_t` hold Re(ĥ_k), rows `N_t..2N_t` hold Im(ĥ_k), so column k is Λ_k.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub k: usize,
    pub nt: usize,
    pub seed: u64,
    pub records: Vec<f64>,
}

pub fn build_dataset(
    channels: &ComplexChannelSet,
    symbols: &[Vec<Complex64>],
    config: &DatasetConfig,
) -> Result<Dataset> {
    let (k, nt) = (channels.k, channels.nt);
    if symbols.len() != channels.samples.len() {
        return Err(SlpError::DimensionMismatch {
            context: "symbol sets",
            expected: channels.samples.len(),
            found: symbols.len(),
        });
    }
    let mut records = Vec::with_capacity(channels.samples.len() * 2 * nt * k);
    for (h, s) in channels.samples.iter().zip(symbols) {
        if h.n_users() != k || h.n_antennas() != nt {
            return Err(SlpError::DimensionMismatch {
                context: "channel sample",
                expected: k * nt,
                found: h.n_users() * h.n_antennas(),
            });
        }
        if s.len() != k {
            return Err(SlpError::DimensionMismatch {
                context: "symbol vector",
                expected: k,
                found: s.len(),
            });
        }
        let cols = (0..k)
            .map(|i| config.rotation.apply(h.row(i), s, i).map(|r| r.lambda))
            .collect::<Result<Vec<_>>>()?;
        for r in 0..2 * nt {
            for col in &cols {
                records.push(col[r]);
            }
        }
    }
    Ok(Dataset {
        n: channels.samples.len(),
        k,
        nt,
        seed: channels.seed,
        records,
    })
}

impl Dataset {
    pub fn record_len(&self) -> usize {
        2 * self.nt * self.k
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let len = self.record_len();
        &self.records[i * len..(i + 1) * len]
    }

    /// Column k of sample i, i.e. Λ_k.
    pub fn lambda(&self, i: usize, user: usize) -> DVector<f64> {
        let rec = self.sample(i);
        DVector::from_fn(2 * self.nt, |r, _| rec[r * self.k + user])
    }

    pub fn instance(
        &self,
        i: usize,
        targets: Vec<f64>,
        noise: f64,
        modulation: ModulationSpec,
    ) -> Result<SlpInstance> {
        let channels = (0..self.k).map(|u| self.lambda(i, u)).collect();
        SlpInstance::new(channels, targets, noise, modulation)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.records.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.nt as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.records {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(SlpError::Format("missing SLPD header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(SlpError::Format(format!("unsupported dataset version {version}")));
        }
        let n = u64_at(8) as usize;
        let k = u32_at(16) as usize;
        let nt = u32_at(20) as usize;
        let seed = u64_at(24);
        let count = n * 2 * nt * k;
        if bytes.len() != HEADER_LEN + 8 * count {
            return Err(SlpError::Format(format!(
                "expected {} payload bytes, found {}",
                8 * count,
                bytes.len() - HEADER_LEN
            )));
        }
        let records = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { n, k, nt, seed, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| SlpError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| SlpError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Column names of the CSV export: `re_{r}_{k}` then `im_{r}_{k}`, row-major.
    pub fn csv_columns(&self) -> Vec<String> {
        let mut cols = Vec::with_capacity(self.record_len());
        for part in ["re", "im"] {
            for r in 0..self.nt {
                for k in 0..self.k {
                    cols.push(format!("{part}_{r}_{k}"));
                }
            }
        }
        cols
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let to_io = |e: csv::Error| SlpError::io(path, e.into());
        let mut file = fs::File::create(path).map_err(|e| SlpError::io(path, e))?;
        {
            let mut w = csv::Writer::from_writer(&mut file);
            w.write_record(self.csv_columns()).map_err(to_io)?;
            for i in 0..self.n {
                w.write_record(self.sample(i).iter().map(|v| format!("{v:e}"))).map_err(to_io)?;
            }
            w.flush().map_err(|e| SlpError::io(path, e))?;
        }
        file.flush().map_err(|e| SlpError::io(path, e))
    }
}
