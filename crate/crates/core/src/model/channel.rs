use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModulationSpec;
use crate::error::{Result, SlpError};

/// K × N_t complex channel, row i is user i's channel h_i.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    k: usize,
    nt: usize,
    data: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn new(k: usize, nt: usize, data: Vec<Complex64>) -> Result<Self> {
        if k == 0 {
            return Err(SlpError::ZeroDimension { what: "K" });
        }
        if nt == 0 {
            return Err(SlpError::ZeroDimension { what: "N_t" });
        }
        if data.len() != k * nt {
            return Err(SlpError::DimensionMismatch {
                context: "channel matrix",
                expected: k * nt,
                found: data.len(),
            });
        }
        Ok(Self { k, nt, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let nt = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * nt);
        for r in rows {
            if r.len() != nt {
                return Err(SlpError::DimensionMismatch {
                    context: "channel rows",
                    expected: nt,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), nt, data)
    }

    pub fn n_users(&self) -> usize {
        self.k
    }

    pub fn n_antennas(&self) -> usize {
        self.nt
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.nt..(i + 1) * self.nt]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.nt)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannelSet {
    pub samples: Vec<ChannelMatrix>,
    pub seed: u64,
    pub k: usize,
    pub nt: usize,
}

fn check_dims(n: usize, k: usize, nt: usize) -> Result<()> {
    if n == 0 {
        return Err(SlpError::ZeroDimension { what: "sample count" });
    }
    if k == 0 {
        return Err(SlpError::ZeroDimension { what: "K" });
    }
    if nt == 0 {
        return Err(SlpError::ZeroDimension { what: "N_t" });
    }
    Ok(())
}

/// Draws one CN(0, 1) entry.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).unwrap();
    Complex64::new(normal.sample(rng), normal.sample(rng))
}

/// i.i.d. CN(0, 1) channels, `n` samples of size K × N_t.
pub fn gen_channels(n: usize, k: usize, nt: usize, seed: u64) -> Result<ComplexChannelSet> {
    check_dims(n, k, nt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let data = (0..k * nt).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            ChannelMatrix { k, nt, data }
        })
        .collect();
    Ok(ComplexChannelSet { samples, seed, k, nt })
}

/// Uniform random PSK symbols, `n` vectors of length K.
pub fn gen_symbols(
    n: usize,
    k: usize,
    modulation: &ModulationSpec,
    seed: u64,
) -> Result<Vec<Vec<Complex64>>> {
    check_dims(n, k, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            (0..k)
                .map(|_| modulation.symbol(rng.random_range(0..modulation.order())))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let set = gen_channels(10_000, 4, 4, 7).unwrap();
        let n = (10_000 * 16) as f64;
        let all = set.samples.iter().flat_map(|s| s.as_slice().iter().copied());
        let (mut sum, mut sq, mut re2, mut im2) = (Complex64::new(0.0, 0.0), 0.0, 0.0, 0.0);
        for z in all {
            sum += z;
            sq += z.norm_sqr();
            re2 += z.re * z.re;
            im2 += z.im * z.im;
        }
        let mean = sum / n;
        assert!(mean.norm() < 0.05);
        let var = sq / n - mean.norm_sqr();
        assert!((0.95..=1.05).contains(&var), "{var}");
        assert!((re2 / n - 0.5).abs() < 0.03);
        assert!((im2 / n - 0.5).abs() < 0.03);
    }

    #[test]
    fn deterministic() {
        let a = gen_channels(50, 3, 2, 11).unwrap();
        let b = gen_channels(50, 3, 2, 11).unwrap();
        assert_eq!(a, b);
        let c = gen_channels(50, 3, 2, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(gen_channels(0, 1, 1, 0).is_err());
        assert!(gen_channels(1, 0, 1, 0).is_err());
        assert!(gen_channels(1, 1, 0, 0).is_err());
    }

    #[test]
    fn symbols_are_constellation_points() {
        let q = ModulationSpec::qpsk();
        let syms = gen_symbols(100, 4, &q, 3).unwrap();
        for s in syms.iter().flatten() {
            assert!((s.norm() - 1.0).abs() < 1e-12);
            assert!((0..4).any(|m| (q.symbol(m) - s).norm() < 1e-12));
        }
    }
}
