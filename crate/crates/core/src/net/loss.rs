//! Unsupervised Lagrangian losses.

use nalgebra::DVector;

use super::param::Param;
use super::recover::{robust_normals, Multipliers};
use crate::error::{Result, SlpError};
use crate::model::SlpInstance;
use crate::solvers::SlpKind;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Batch mean of ‖w‖².
    pub objective: f64,
    /// Batch mean of the multiplier-weighted constraint terms, or of the weighted violation penalty.
    pub constraint: f64,
    /// Penalty on skipped prox steps.
    pub hinge: f64,
    /// (ϑ/L)·Σ‖θ‖².
    pub regularizer: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub(crate) fn finish(mut self) -> Self {
        self.total = self.objective + self.constraint + self.hinge + self.regularizer;
        self
    }
}

/// Multiplier-weighted constraint terms of one instance.
pub(crate) fn constraint_term(kind: SlpKind, inst: &SlpInstance, w: &DVector<f64>, m: &Multipliers) -> f64 {
    let t = inst.tan_phi();
    let mut s = 0.0;
    for i in 0..inst.n_users() {
        let c = inst.margin(i);
        let re = inst.channels[i].dot(w);
        let im = inst.quadrature(i).dot(w);
        s += match kind {
            SlpKind::Relaxed => m.first[i] * (im - t * re + t * c) + m.second[i] * (-im - t * re + t * c),
            SlpKind::Strict => m.second[i] * im + m.first[i] * (c - re),
            SlpKind::Robust => {
                let rho2 = inst.effective_bound(i).powi(2);
                let w2 = w.norm_squared();
                robust_normals(inst, i)
                    .iter()
                    .zip([m.first[i], m.second[i]])
                    .map(|(a, mu)| mu * (rho2 * w2 - (a.dot(w) - t * c).powi(2)))
                    .sum()
            }
        };
    }
    s
}

/// Gradient of ‖w‖² + constraint_term with respect to w and to each multiplier.
pub(crate) fn lagrangian_gradient(
    kind: SlpKind,
    inst: &SlpInstance,
    w: &DVector<f64>,
    m: &Multipliers,
) -> (DVector<f64>, Vec<f64>, Vec<f64>) {
    let t = inst.tan_phi();
    let k = inst.n_users();
    let mut g = w * 2.0;
    let mut g1 = vec![0.0; k];
    let mut g2 = vec![0.0; k];
    for i in 0..k {
        let c = inst.margin(i);
        let lam = &inst.channels[i];
        let d = inst.quadrature(i);
        let re = lam.dot(w);
        let im = d.dot(w);
        match kind {
            SlpKind::Relaxed => {
                g += (&d - lam * t) * m.first[i] - (&d + lam * t) * m.second[i];
                g1[i] = im - t * re + t * c;
                g2[i] = -im - t * re + t * c;
            }
            SlpKind::Strict => {
                g += &d * m.second[i] - lam * m.first[i];
                g1[i] = c - re;
                g2[i] = im;
            }
            SlpKind::Robust => {
                let rho2 = inst.effective_bound(i).powi(2);
                let w2 = w.norm_squared();
                for (j, a) in robust_normals(inst, i).iter().enumerate() {
                    let mu = if j == 0 { m.first[i] } else { m.second[i] };
                    let slack = a.dot(w) - t * c;
                    g += w * (2.0 * mu * rho2) - a * (2.0 * mu * slack);
                    let val = rho2 * w2 - slack * slack;
                    if j == 0 {
                        g1[i] = val;
                    } else {
                        g2[i] = val;
                    }
                }
            }
        }
    }
    (g, g1, g2)
}

/// Quadratic penalty Σ max(0, v)² over the constraint violations v of one instance, and its gradient in w.
pub(crate) fn violation_penalty(kind: SlpKind, inst: &SlpInstance, w: &DVector<f64>) -> (f64, DVector<f64>) {
    let t = inst.tan_phi();
    let mut p = 0.0;
    let mut g = DVector::zeros(w.len());
    let wn = w.norm();
    for i in 0..inst.n_users() {
        let c = inst.margin(i);
        let lam = &inst.channels[i];
        let d = inst.quadrature(i);
        let re = lam.dot(w);
        let im = d.dot(w);
        match kind {
            SlpKind::Relaxed => {
                for sign in [1.0, -1.0] {
                    let v = sign * im - t * re + t * c;
                    if v > 0.0 {
                        p += v * v;
                        g += (&d * sign - lam * t) * (2.0 * v);
                    }
                }
            }
            SlpKind::Strict => {
                if c > re {
                    p += (c - re).powi(2);
                    g -= lam * (2.0 * (c - re));
                }
                p += im * im;
                g += &d * (2.0 * im);
            }
            SlpKind::Robust => {
                let rho = inst.effective_bound(i);
                for a in robust_normals(inst, i) {
                    let v = t * c + rho * wn - a.dot(w);
                    if v > 0.0 {
                        p += v * v;
                        if wn > 0.0 {
                            g += w * (2.0 * v * rho / wn);
                        }
                        g -= a * (2.0 * v);
                    }
                }
            }
        }
    }
    (p, g)
}

/// (ϑ/L)·Σ‖θ‖² over the regularized parameters.
pub fn regularizer(params: &[&Param], layers: usize, vartheta: f64) -> f64 {
    if layers == 0 || vartheta == 0.0 {
        return 0.0;
    }
    vartheta / layers as f64 * params.iter().filter(|p| p.regularized).map(|p| p.sq_norm()).sum::<f64>()
}

/// Batch-mean Lagrangian plus the weight regularizer.
///
/// `multipliers` holds one pair per sample.
pub fn loss_eval(
    kind: SlpKind,
    batch: &[SlpInstance],
    w: &[DVector<f64>],
    multipliers: &[Multipliers],
    theta: &[&Param],
    layers: usize,
    vartheta: f64,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(SlpError::ZeroDimension { what: "loss batch" });
    }
    if w.len() != batch.len() || multipliers.len() != batch.len() {
        return Err(SlpError::DimensionMismatch {
            context: "loss batch",
            expected: batch.len(),
            found: w.len().min(multipliers.len()),
        });
    }
    let n = batch.len() as f64;
    let mut out = LossBreakdown::default();
    for ((inst, w), m) in batch.iter().zip(w).zip(multipliers) {
        out.objective += w.norm_squared() / n;
        out.constraint += constraint_term(kind, inst, w, m) / n;
    }
    out.regularizer = regularizer(theta, layers, vartheta);
    Ok(out.finish())
}
