use std::f64::consts::PI;

use crate::error::{Result, SlpError};

/// c3·x³ + c2·x² + c1·x + c0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicPolynomial {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CubicPolynomial {
    pub fn new(c3: f64, c2: f64, c1: f64, c0: f64) -> Self {
        Self { c3, c2, c1, c0 }
    }

    pub fn monic(c2: f64, c1: f64, c0: f64) -> Self {
        Self::new(1.0, c2, c1, c0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        ((self.c3 * x + self.c2) * x + self.c1) * x + self.c0
    }

    /// The derivative Υ(x) = 3c3·x² + 2c2·x + c1.
    pub fn derivative(&self, x: f64) -> f64 {
        (3.0 * self.c3 * x + 2.0 * self.c2) * x + self.c1
    }

    pub fn coefficient_scale(&self) -> f64 {
        1f64.max(self.c0.abs() + self.c1.abs() + self.c2.abs() + self.c3.abs())
    }

    fn polish(&self, mut x: f64) -> f64 {
        let mut fx = self.eval(x);
        for _ in 0..4 {
            let d = self.derivative(x);
            if fx == 0.0 || d == 0.0 {
                break;
            }
            let next = x - fx / d;
            let fn_ = self.eval(next);
            if fn_.abs() < fx.abs() {
                x = next;
                fx = fn_;
            } else {
                break;
            }
        }
        x
    }
}

/// Real roots in ascending order, with multiplicity (one or three values).
pub fn solve_cubic_real(p: &CubicPolynomial) -> Result<Vec<f64>> {
    if p.c3 == 0.0 || ![p.c3, p.c2, p.c1, p.c0].iter().all(|c| c.is_finite()) {
        return Err(SlpError::DegenerateCubic);
    }
    let a = p.c2 / p.c3;
    let b = p.c1 / p.c3;
    let c = p.c0 / p.c3;
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let q3 = q * q * q;
    let shift = a / 3.0;
    let mut roots = if r * r < q3 {
        let theta = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        vec![
            m * (theta / 3.0).cos() - shift,
            m * ((theta + 2.0 * PI) / 3.0).cos() - shift,
            m * ((theta - 2.0 * PI) / 3.0).cos() - shift,
        ]
    } else {
        let big_a = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
        let big_b = if big_a != 0.0 { q / big_a } else { 0.0 };
        let x1 = big_a + big_b - shift;
        if (big_a - big_b).abs() <= 1e-9 * (big_a.abs() + big_b.abs()) {
            let x2 = -0.5 * (big_a + big_b) - shift;
            vec![x1, x2, x2]
        } else {
            vec![x1]
        }
    };
    for x in &mut roots {
        *x = p.polish(*x);
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}
