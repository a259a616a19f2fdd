use super::param::Param;

/// Adam moments for a fixed ordered set of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[&mut Param]) -> Self {
        Self {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update of `params` using their accumulated gradients.
    pub fn update(&mut self, params: &mut [&mut Param], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (j, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[j], &mut self.v[j]);
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.value[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Param::new("x", vec![2], vec![1.0, -1.0], true);
        p.grad = vec![3.0, -0.5];
        let mut opt = AdamState::new(&[&mut p]);
        opt.update(&mut [&mut p], 0.1);
        assert!((p.value[0] - 0.9).abs() < 1e-7);
        assert!((p.value[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = Param::new("x", vec![1], vec![5.0], true);
        let mut opt = AdamState::new(&[&mut p]);
        for _ in 0..2000 {
            p.grad[0] = 2.0 * (p.value[0] - 2.0);
            opt.update(&mut [&mut p], 0.05);
        }
        assert!((p.value[0] - 2.0).abs() < 1e-3);
    }
}
