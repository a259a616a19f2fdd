//! Batched layers with explicit caches for reverse mode.

use nalgebra::DMatrix;
use rand::Rng;

use super::param::Param;
use super::tensor::TensorBuffer;
use crate::error::{Result, SlpError};

fn check_channels(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(SlpError::DimensionMismatch {
            context: "layer input channels",
            expected,
            found,
        });
    }
    Ok(())
}

/// 2-d convolution, stride 1, square kernel, zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub padding: usize,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    col: DMatrix<f64>,
    in_shape: (usize, usize, usize, usize),
    out_hw: (usize, usize),
}

impl Conv2d {
    pub fn new<R: Rng>(name: &str, in_channels: usize, out_channels: usize, kernel: usize, padding: usize, rng: &mut R) -> Self {
        let kk = kernel * kernel;
        Self {
            weight: Param::xavier(
                format!("{name}.weight"),
                vec![out_channels, in_channels, kernel, kernel],
                in_channels * kk,
                out_channels * kk,
                rng,
            ),
            bias: Param::filled(format!("{name}.bias"), vec![out_channels], 0.0, true),
            in_channels,
            out_channels,
            kernel,
            padding,
        }
    }

    pub fn zero_init(mut self) -> Self {
        self.weight.value.iter_mut().for_each(|v| *v = 0.0);
        self
    }

    fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < self.kernel || wp < self.kernel {
            return Err(SlpError::DimensionMismatch {
                context: "conv spatial size",
                expected: self.kernel,
                found: hp.min(wp),
            });
        }
        Ok((hp - self.kernel + 1, wp - self.kernel + 1))
    }

    fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.out_channels, self.in_channels * self.kernel * self.kernel, &self.weight.value)
    }

    pub fn forward(&self, x: &TensorBuffer) -> Result<(TensorBuffer, ConvCache)> {
        let (b, c, h, w) = x.dims4()?;
        check_channels(c, self.in_channels)?;
        let (ho, wo) = self.out_hw(h, w)?;
        let k = self.kernel;
        let pad = self.padding as isize;
        let hw = ho * wo;
        let xs = x.values();
        let mut col = DMatrix::zeros(c * k * k, b * hw);
        for bi in 0..b {
            for ci in 0..c {
                let plane = &xs[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let row = (ci * k + ky) * k + kx;
                        for y in 0..ho {
                            let iy = y as isize + ky as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for xo in 0..wo {
                                let ix = xo as isize + kx as isize - pad;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                col[(row, bi * hw + y * wo + xo)] = plane[iy as usize * w + ix as usize];
                            }
                        }
                    }
                }
            }
        }
        let y = self.weight_matrix() * &col;
        let o = self.out_channels;
        let mut out = vec![0.0; b * o * hw];
        for bi in 0..b {
            for oi in 0..o {
                let bias = self.bias.value[oi];
                let dst = &mut out[(bi * o + oi) * hw..(bi * o + oi + 1) * hw];
                for (p, d) in dst.iter_mut().enumerate() {
                    *d = y[(oi, bi * hw + p)] + bias;
                }
            }
        }
        Ok((
            TensorBuffer::new(vec![b, o, ho, wo], out)?,
            ConvCache { col, in_shape: (b, c, h, w), out_hw: (ho, wo) },
        ))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &ConvCache, grad_out: &TensorBuffer) -> Result<TensorBuffer> {
        let (b, c, h, w) = cache.in_shape;
        let (ho, wo) = cache.out_hw;
        let hw = ho * wo;
        let o = self.out_channels;
        let go = grad_out.values();
        if go.len() != b * o * hw {
            return Err(SlpError::DimensionMismatch {
                context: "conv output gradient",
                expected: b * o * hw,
                found: go.len(),
            });
        }
        let mut g = DMatrix::zeros(o, b * hw);
        for bi in 0..b {
            for oi in 0..o {
                let src = &go[(bi * o + oi) * hw..(bi * o + oi + 1) * hw];
                let mut s = 0.0;
                for (p, v) in src.iter().enumerate() {
                    g[(oi, bi * hw + p)] = *v;
                    s += v;
                }
                self.bias.grad[oi] += s;
            }
        }
        let gw = &g * cache.col.transpose();
        let cols = gw.ncols();
        for oi in 0..o {
            for j in 0..cols {
                self.weight.grad[oi * cols + j] += gw[(oi, j)];
            }
        }
        let gcol = self.weight_matrix().transpose() * &g;
        let k = self.kernel;
        let pad = self.padding as isize;
        let mut gin = vec![0.0; b * c * h * w];
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * h * w;
                for ky in 0..k {
                    for kx in 0..k {
                        let row = (ci * k + ky) * k + kx;
                        for y in 0..ho {
                            let iy = y as isize + ky as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for xo in 0..wo {
                                let ix = xo as isize + kx as isize - pad;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                gin[base + iy as usize * w + ix as usize] += gcol[(row, bi * hw + y * wo + xo)];
                            }
                        }
                    }
                }
            }
        }
        TensorBuffer::new(vec![b, c, h, w], gin)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
}

/// Average pooling with stride equal to the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvgPool2d {
    pub window: (usize, usize),
}

impl AvgPool2d {
    pub fn new(window: (usize, usize)) -> Self {
        Self { window }
    }

    pub fn forward(&self, x: &TensorBuffer) -> Result<TensorBuffer> {
        let (b, c, h, w) = x.dims4()?;
        let (ph, pw) = self.window;
        if ph == 0 || pw == 0 || h % ph != 0 || w % pw != 0 {
            return Err(SlpError::DimensionMismatch {
                context: "pooling window",
                expected: h,
                found: ph,
            });
        }
        let (ho, wo) = (h / ph, w / pw);
        let scale = 1.0 / (ph * pw) as f64;
        let xs = x.values();
        let mut out = vec![0.0; b * c * ho * wo];
        for plane in 0..b * c {
            for y in 0..h {
                for xx in 0..w {
                    out[plane * ho * wo + (y / ph) * wo + xx / pw] += xs[plane * h * w + y * w + xx] * scale;
                }
            }
        }
        TensorBuffer::new(vec![b, c, ho, wo], out)
    }

    pub fn backward(&self, in_shape: &[usize], grad_out: &TensorBuffer) -> Result<TensorBuffer> {
        let (b, c, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
        let (ph, pw) = self.window;
        let (ho, wo) = (h / ph, w / pw);
        let scale = 1.0 / (ph * pw) as f64;
        let go = grad_out.values();
        let mut gin = vec![0.0; b * c * h * w];
        for plane in 0..b * c {
            for y in 0..h {
                for xx in 0..w {
                    gin[plane * h * w + y * w + xx] = go[plane * ho * wo + (y / ph) * wo + xx / pw] * scale;
                }
            }
        }
        TensorBuffer::new(in_shape.to_vec(), gin)
    }
}

/// Fully connected layer on (batch, features).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn new<R: Rng>(name: &str, in_features: usize, out_features: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::xavier(format!("{name}.weight"), vec![out_features, in_features], in_features, out_features, rng),
            bias: Param::filled(format!("{name}.bias"), vec![out_features], 0.0, true),
            in_features,
            out_features,
        }
    }

    fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.out_features, self.in_features, &self.weight.value)
    }

    fn batch(&self, x: &TensorBuffer) -> Result<usize> {
        let b = x.shape()[0];
        if x.len() != b * self.in_features {
            return Err(SlpError::DimensionMismatch {
                context: "linear input features",
                expected: self.in_features,
                found: x.len() / b.max(1),
            });
        }
        Ok(b)
    }

    pub fn forward(&self, x: &TensorBuffer) -> Result<TensorBuffer> {
        let b = self.batch(x)?;
        let xm = DMatrix::from_row_slice(b, self.in_features, x.values());
        let y = xm * self.weight_matrix().transpose();
        let mut out = Vec::with_capacity(b * self.out_features);
        for r in 0..b {
            for o in 0..self.out_features {
                out.push(y[(r, o)] + self.bias.value[o]);
            }
        }
        TensorBuffer::new(vec![b, self.out_features], out)
    }

    pub fn backward(&mut self, x: &TensorBuffer, grad_out: &TensorBuffer) -> Result<TensorBuffer> {
        let b = self.batch(x)?;
        let xm = DMatrix::from_row_slice(b, self.in_features, x.values());
        let g = DMatrix::from_row_slice(b, self.out_features, grad_out.values());
        let gw = g.transpose() * &xm;
        for o in 0..self.out_features {
            for i in 0..self.in_features {
                self.weight.grad[o * self.in_features + i] += gw[(o, i)];
            }
            self.bias.grad[o] += g.column(o).sum();
        }
        let gx = g * self.weight_matrix();
        let mut gin = Vec::with_capacity(b * self.in_features);
        for r in 0..b {
            for i in 0..self.in_features {
                gin.push(gx[(r, i)]);
            }
        }
        TensorBuffer::new(x.shape().to_vec(), gin)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
}

/// Per-channel batch normalization over (batch, height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d {
    pub scale: Param,
    pub shift: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    shape: (usize, usize, usize, usize),
    training: bool,
}

impl BatchNorm2d {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            scale: Param::filled(format!("{name}.scale"), vec![channels], 1.0, false),
            shift: Param::filled(format!("{name}.shift"), vec![channels], 0.0, false),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    /// Batch statistics when `training`, running statistics otherwise.
    pub fn forward(&mut self, x: &TensorBuffer, training: bool) -> Result<(TensorBuffer, BatchNormCache)> {
        let (b, c, h, w) = x.dims4()?;
        check_channels(c, self.channels())?;
        let hw = h * w;
        let n = b * hw;
        let xs = x.values();
        let mut x_hat = vec![0.0; xs.len()];
        let mut out = vec![0.0; xs.len()];
        let mut inv_std = vec![0.0; c];
        for ci in 0..c {
            let idx = |bi: usize, p: usize| (bi * c + ci) * hw + p;
            let (mean, var) = if training {
                let mut s = 0.0;
                for bi in 0..b {
                    for p in 0..hw {
                        s += xs[idx(bi, p)];
                    }
                }
                let mean = s / n as f64;
                let mut v = 0.0;
                for bi in 0..b {
                    for p in 0..hw {
                        v += (xs[idx(bi, p)] - mean).powi(2);
                    }
                }
                let var = v / n as f64;
                let unbiased = if n > 1 { v / (n - 1) as f64 } else { var };
                self.running_mean[ci] = (1.0 - self.momentum) * self.running_mean[ci] + self.momentum * mean;
                self.running_var[ci] = (1.0 - self.momentum) * self.running_var[ci] + self.momentum * unbiased;
                (mean, var)
            } else {
                (self.running_mean[ci], self.running_var[ci])
            };
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ci] = is;
            for bi in 0..b {
                for p in 0..hw {
                    let j = idx(bi, p);
                    x_hat[j] = (xs[j] - mean) * is;
                    out[j] = self.scale.value[ci] * x_hat[j] + self.shift.value[ci];
                }
            }
        }
        Ok((
            TensorBuffer::new(x.shape().to_vec(), out)?,
            BatchNormCache { x_hat, inv_std, shape: (b, c, h, w), training },
        ))
    }

    pub fn backward(&mut self, cache: &BatchNormCache, grad_out: &TensorBuffer) -> Result<TensorBuffer> {
        let (b, c, h, w) = cache.shape;
        let hw = h * w;
        let n = (b * hw) as f64;
        let go = grad_out.values();
        let mut gin = vec![0.0; go.len()];
        for ci in 0..c {
            let idx = |bi: usize, p: usize| (bi * c + ci) * hw + p;
            let (mut sg, mut sgx) = (0.0, 0.0);
            for bi in 0..b {
                for p in 0..hw {
                    let j = idx(bi, p);
                    sg += go[j];
                    sgx += go[j] * cache.x_hat[j];
                }
            }
            self.scale.grad[ci] += sgx;
            self.shift.grad[ci] += sg;
            let g = self.scale.value[ci];
            let is = cache.inv_std[ci];
            for bi in 0..b {
                for p in 0..hw {
                    let j = idx(bi, p);
                    gin[j] = if cache.training {
                        g * is * (go[j] - sg / n - cache.x_hat[j] * sgx / n)
                    } else {
                        g * is * go[j]
                    };
                }
            }
        }
        TensorBuffer::new(vec![b, c, h, w], gin)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.scale, &mut self.shift]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.scale, &self.shift]
    }
}

/// PReLU with one shared slope.
#[derive(Debug, Clone, PartialEq)]
pub struct PRelu {
    pub slope: Param,
}

impl PRelu {
    pub fn new(name: &str) -> Self {
        Self { slope: Param::filled(format!("{name}.slope"), vec![1], 0.25, false) }
    }

    pub fn forward(&self, x: &TensorBuffer) -> TensorBuffer {
        let a = self.slope.value[0];
        x.map(|v| if v >= 0.0 { v } else { a * v })
    }

    pub fn backward(&mut self, x: &TensorBuffer, grad_out: &TensorBuffer) -> TensorBuffer {
        let a = self.slope.value[0];
        let mut ga = 0.0;
        let mut gin = grad_out.clone();
        for (g, &v) in gin.values_mut().iter_mut().zip(x.values()) {
            if v < 0.0 {
                ga += *g * v;
                *g *= a;
            }
        }
        self.slope.grad[0] += ga;
        gin
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.slope]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.slope]
    }
}

pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// sign(z)·softplus(|z|), allowing negative outputs.
pub fn signed_softplus(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z.signum() * softplus(z.abs())
    }
}

pub fn signed_softplus_derivative(z: f64) -> f64 {
    sigmoid(z.abs())
}

/// Inverse of softplus for positive targets.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}
