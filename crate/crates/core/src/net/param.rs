use rand::Rng;

/// Trainable array with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    /// Counted in the weight-norm regularizer.
    pub regularized: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, value: Vec<f64>, regularized: bool) -> Self {
        let n = value.len();
        debug_assert_eq!(n, shape.iter().product::<usize>());
        Self {
            name: name.into(),
            shape,
            value,
            grad: vec![0.0; n],
            regularized,
        }
    }

    pub fn filled(name: impl Into<String>, shape: Vec<usize>, fill: f64, regularized: bool) -> Self {
        let n = shape.iter().product();
        Self::new(name, shape, vec![fill; n], regularized)
    }

    /// Xavier-uniform initialization.
    pub fn xavier<R: Rng>(
        name: impl Into<String>,
        shape: Vec<usize>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        let value = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
        Self::new(name, shape, value, true)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn sq_norm(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum()
    }
}
