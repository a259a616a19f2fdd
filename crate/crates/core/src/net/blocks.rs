//! PUM sub-networks and the auxiliary processing block.

use rand::Rng;

use super::layers::{
    sigmoid, signed_softplus, signed_softplus_derivative, softplus, softplus_inverse, AvgPool2d, BatchNorm2d,
    BatchNormCache, Conv2d, ConvCache, Linear, PRelu,
};
use super::param::Param;
use super::tensor::TensorBuffer;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMap {
    Softplus,
    /// sign(z)·softplus(|z|).
    SignedSoftplus,
}

impl OutputMap {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputMap::Softplus => softplus(z),
            OutputMap::SignedSoftplus => signed_softplus(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputMap::Softplus => sigmoid(z),
            OutputMap::SignedSoftplus => signed_softplus_derivative(z),
        }
    }
}

/// conv 3×3 → avg-pool 1×1 → softplus → flatten → FC → scalar output map.
#[derive(Debug, Clone, PartialEq)]
pub struct SubNet {
    pub conv: Conv2d,
    pub pool: AvgPool2d,
    pub fc: Linear,
    pub map: OutputMap,
}

#[derive(Debug, Clone)]
pub struct SubNetCache {
    conv: ConvCache,
    conv_shape: Vec<usize>,
    pooled: TensorBuffer,
    flat: TensorBuffer,
    z: Vec<f64>,
}

impl SubNet {
    /// `grid` is the (rows, cols) input size.
    pub fn new<R: Rng>(name: &str, channels: usize, grid: (usize, usize), map: OutputMap, rng: &mut R) -> Self {
        Self {
            conv: Conv2d::new(&format!("{name}.conv"), 1, channels, 3, 1, rng),
            pool: AvgPool2d::new((1, 1)),
            fc: Linear::new(&format!("{name}.fc"), channels * grid.0 * grid.1, 1, rng),
            map,
        }
    }

    /// Sets the FC bias. For softplus outputs `value` is the emitted value at zero weights,
    /// for the signed map it is the pre-activation.
    pub fn set_output_offset(&mut self, value: f64) {
        self.fc.bias.value[0] = match self.map {
            OutputMap::Softplus => softplus_inverse(value),
            OutputMap::SignedSoftplus => value,
        };
    }

    /// Zeroes all weights so the output is the same for every input.
    pub fn freeze_to_bias(&mut self) {
        for p in [&mut self.conv.weight, &mut self.conv.bias, &mut self.fc.weight] {
            p.value.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn forward(&self, x: &TensorBuffer) -> Result<(Vec<f64>, SubNetCache)> {
        let (y, conv) = self.conv.forward(x)?;
        let conv_shape = y.shape().to_vec();
        let pooled = self.pool.forward(&y)?;
        let b = pooled.shape()[0];
        let per = pooled.len() / b;
        let flat = pooled.map(softplus).reshape(vec![b, per])?;
        let z = self.fc.forward(&flat)?.into_values();
        let out = z.iter().map(|&z| self.map.apply(z)).collect();
        Ok((out, SubNetCache { conv, conv_shape, pooled, flat, z }))
    }

    pub fn backward(&mut self, cache: &SubNetCache, grad: &[f64]) -> Result<()> {
        let gz: Vec<f64> = grad.iter().zip(&cache.z).map(|(g, &z)| g * self.map.derivative(z)).collect();
        let gz = TensorBuffer::new(vec![gz.len(), 1], gz)?;
        let gflat = self.fc.backward(&cache.flat, &gz)?;
        let mut gpool = gflat.reshape(cache.pooled.shape().to_vec())?;
        for (g, &p) in gpool.values_mut().iter_mut().zip(cache.pooled.values()) {
            *g *= sigmoid(p);
        }
        let gconv = self.pool.backward(&cache.conv_shape, &gpool)?;
        self.conv.backward(&cache.conv, &gconv)?;
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.conv.params();
        v.extend(self.fc.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.conv.params_mut();
        v.extend(self.fc.params_mut());
        v
    }
}

/// One parameter-update block: sub-networks emitting μ, γ and λ.
#[derive(Debug, Clone, PartialEq)]
pub struct PumBlock {
    pub mu: SubNet,
    pub gamma: SubNet,
    pub lambda: SubNet,
}

impl PumBlock {
    pub fn new<R: Rng>(name: &str, channels: usize, grid: (usize, usize), rng: &mut R) -> Self {
        Self {
            mu: SubNet::new(&format!("{name}.mu"), channels, grid, OutputMap::Softplus, rng),
            gamma: SubNet::new(&format!("{name}.gamma"), channels, grid, OutputMap::Softplus, rng),
            lambda: SubNet::new(&format!("{name}.lambda"), channels, grid, OutputMap::SignedSoftplus, rng),
        }
    }

    /// Makes the block emit constants for every input; `lambda` is a pre-activation.
    pub fn set_constant_outputs(&mut self, mu: f64, gamma: f64, lambda: f64) {
        for (net, v) in [(&mut self.mu, mu), (&mut self.gamma, gamma), (&mut self.lambda, lambda)] {
            net.freeze_to_bias();
            net.set_output_offset(v);
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.mu.params();
        v.extend(self.gamma.params());
        v.extend(self.lambda.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.mu.params_mut();
        v.extend(self.gamma.params_mut());
        v.extend(self.lambda.params_mut());
        v
    }

    pub const LAYERS: usize = 6;
}

/// conv(1→h) + BN + PReLU → conv(h→2N_tK) + BN + PReLU → conv(2N_tK→1).
#[derive(Debug, Clone, PartialEq)]
pub struct Apb {
    pub conv1: Conv2d,
    pub bn1: BatchNorm2d,
    pub act1: PRelu,
    pub conv2: Conv2d,
    pub bn2: BatchNorm2d,
    pub act2: PRelu,
    pub conv3: Conv2d,
}

#[derive(Debug, Clone)]
pub struct ApbCache {
    c1: ConvCache,
    b1: BatchNormCache,
    pre1: TensorBuffer,
    c2: ConvCache,
    b2: BatchNormCache,
    pre2: TensorBuffer,
    c3: ConvCache,
}

impl Apb {
    /// The last convolution starts at zero, so a fresh block outputs zeros.
    pub fn new<R: Rng>(hidden: usize, middle: usize, rng: &mut R) -> Self {
        let mut bn1 = BatchNorm2d::new("apb.bn1", hidden);
        let mut bn2 = BatchNorm2d::new("apb.bn2", middle);
        bn1.eps = 1e-6;
        bn2.eps = 1e-6;
        Self {
            conv1: Conv2d::new("apb.conv1", 1, hidden, 3, 1, rng),
            bn1,
            act1: PRelu::new("apb.act1"),
            conv2: Conv2d::new("apb.conv2", hidden, middle, 3, 1, rng),
            bn2,
            act2: PRelu::new("apb.act2"),
            conv3: Conv2d::new("apb.conv3", middle, 1, 3, 1, rng).zero_init(),
        }
    }

    pub fn forward(&mut self, x: &TensorBuffer, training: bool) -> Result<(TensorBuffer, ApbCache)> {
        let (y, c1) = self.conv1.forward(x)?;
        let (pre1, b1) = self.bn1.forward(&y, training)?;
        let y = self.act1.forward(&pre1);
        let (y, c2) = self.conv2.forward(&y)?;
        let (pre2, b2) = self.bn2.forward(&y, training)?;
        let y = self.act2.forward(&pre2);
        let (out, c3) = self.conv3.forward(&y)?;
        Ok((out, ApbCache { c1, b1, pre1, c2, b2, pre2, c3 }))
    }

    pub fn backward(&mut self, cache: &ApbCache, grad: &TensorBuffer) -> Result<TensorBuffer> {
        let g = self.conv3.backward(&cache.c3, grad)?;
        let g = self.act2.backward(&cache.pre2, &g);
        let g = self.bn2.backward(&cache.b2, &g)?;
        let g = self.conv2.backward(&cache.c2, &g)?;
        let g = self.act1.backward(&cache.pre1, &g);
        let g = self.bn1.backward(&cache.b1, &g)?;
        self.conv1.backward(&cache.c1, &g)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.conv1.params();
        v.extend(self.bn1.params());
        v.extend(self.act1.params());
        v.extend(self.conv2.params());
        v.extend(self.bn2.params());
        v.extend(self.act2.params());
        v.extend(self.conv3.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.conv1.params_mut();
        v.extend(self.bn1.params_mut());
        v.extend(self.act1.params_mut());
        v.extend(self.conv2.params_mut());
        v.extend(self.bn2.params_mut());
        v.extend(self.act2.params_mut());
        v.extend(self.conv3.params_mut());
        v
    }

    /// Batch-norm running statistics as (name, values).
    pub fn buffers(&self) -> Vec<(String, &Vec<f64>)> {
        vec![
            ("apb.bn1.running_mean".into(), &self.bn1.running_mean),
            ("apb.bn1.running_var".into(), &self.bn1.running_var),
            ("apb.bn2.running_mean".into(), &self.bn2.running_mean),
            ("apb.bn2.running_var".into(), &self.bn2.running_var),
        ]
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        vec![
            ("apb.bn1.running_mean".into(), &mut self.bn1.running_mean),
            ("apb.bn1.running_var".into(), &mut self.bn1.running_var),
            ("apb.bn2.running_mean".into(), &mut self.bn2.running_mean),
            ("apb.bn2.running_var".into(), &mut self.bn2.running_var),
        ]
    }

    pub const LAYERS: usize = 3;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn apb_fresh_output_is_zero_and_shape_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut apb = Apb::new(64, 32, &mut rng);
        let x = TensorBuffer::new(vec![2, 1, 8, 4], (0..64).map(|i| (i as f64).sin()).collect()).unwrap();
        let (y, _) = apb.forward(&x, true).unwrap();
        assert_eq!(y.shape(), &[2, 1, 8, 4]);
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_block_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = PumBlock::new("pum0", 4, (4, 2), &mut rng);
        b.set_constant_outputs(0.7, 0.2, -1.5);
        let x = TensorBuffer::new(vec![3, 1, 4, 2], (0..24).map(|i| i as f64).collect()).unwrap();
        let (mu, _) = b.mu.forward(&x).unwrap();
        let (lam, _) = b.lambda.forward(&x).unwrap();
        assert!(mu.iter().all(|&m| (m - 0.7).abs() < 1e-12));
        assert!(lam.iter().all(|&l| (l - signed_softplus(-1.5)).abs() < 1e-15));
    }
}
