//! Closed-form precoders from Lagrangian multipliers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SlpError};
use crate::model::{SlpInstance, StackedPrecoder};
use crate::solvers::SlpKind;

/// Per-user multiplier pair: (μ1, μ2) for relaxed and robust, (μ, λ) for strict.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Multipliers {
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(SlpError::DimensionMismatch {
                context: "multiplier pair",
                expected: first.len(),
                found: second.len(),
            });
        }
        Ok(Self { first, second })
    }

    pub fn zeros(k: usize) -> Self {
        Self { first: vec![0.0; k], second: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    /// Multiplies user i's pair by `factors[i]`.
    pub fn scaled(&self, factors: &[f64]) -> Self {
        Self {
            first: self.first.iter().zip(factors).map(|(m, f)| m * f).collect(),
            second: self.second.iter().zip(factors).map(|(m, f)| m * f).collect(),
        }
    }

    fn check(&self, kind: SlpKind, inst: &SlpInstance) -> Result<()> {
        if self.len() != inst.n_users() {
            return Err(SlpError::DimensionMismatch {
                context: "multipliers per user",
                expected: inst.n_users(),
                found: self.len(),
            });
        }
        let nonneg_second = kind != SlpKind::Strict;
        for (&a, &b) in self.first.iter().zip(&self.second) {
            if !(a >= 0.0) || (nonneg_second && !(b >= 0.0)) || !b.is_finite() {
                return Err(SlpError::InvalidParameter {
                    name: "multiplier",
                    value: if a >= 0.0 { b } else { a },
                });
            }
        }
        Ok(())
    }
}

/// Robust constraint normals a_1 = tΛ − ΠᵀΛ and a_2 = tΛ + ΠᵀΛ.
pub(crate) fn robust_normals(inst: &SlpInstance, i: usize) -> [DVector<f64>; 2] {
    let t = inst.tan_phi();
    let lam = &inst.channels[i] * t;
    let d = inst.quadrature(i);
    [&lam - &d, lam + d]
}

/// Stationary point of the kind's Lagrangian in w for fixed multipliers.
///
/// Relaxed: w = ½Σ[(μ1+μ2)tΛ − (μ1−μ2)ΠᵀΛ]. Strict: w = ½Σ(μΛ − λΠᵀΛ).
/// Robust: solves [(1 + Σς'²μ)I − Σμ_j a_j a_jᵀ] w = −tΣ c μ_j a_j.
pub fn recover_precoder(kind: SlpKind, multipliers: &Multipliers, inst: &SlpInstance) -> Result<StackedPrecoder> {
    multipliers.check(kind, inst)?;
    let n = inst.dim();
    let t = inst.tan_phi();
    let (m1, m2) = (&multipliers.first, &multipliers.second);
    let w = match kind {
        SlpKind::Relaxed => {
            let mut w = DVector::zeros(n);
            for i in 0..inst.n_users() {
                w += &inst.channels[i] * (0.5 * (m1[i] + m2[i]) * t);
                w -= inst.quadrature(i) * (0.5 * (m1[i] - m2[i]));
            }
            w
        }
        SlpKind::Strict => {
            let mut w = DVector::zeros(n);
            for i in 0..inst.n_users() {
                w += &inst.channels[i] * (0.5 * m1[i]);
                w -= inst.quadrature(i) * (0.5 * m2[i]);
            }
            w
        }
        SlpKind::Robust => {
            let mut a_mat = DMatrix::identity(n, n);
            let mut rhs = DVector::zeros(n);
            for i in 0..inst.n_users() {
                let rho = inst.effective_bound(i);
                let c = inst.margin(i);
                for (j, a) in robust_normals(inst, i).iter().enumerate() {
                    let mu = if j == 0 { m1[i] } else { m2[i] };
                    for r in 0..n {
                        a_mat[(r, r)] += mu * rho * rho;
                    }
                    a_mat.ger(-mu, a, a, 1.0);
                    rhs -= a * (t * c * mu);
                }
            }
            let sv = a_mat.clone().svd(false, false).singular_values;
            let (lo, hi) = (sv.min(), sv.max());
            if !(lo > 1e-12 * hi) {
                return Err(SlpError::Singular { context: "robust recovery system" });
            }
            a_mat.lu().solve(&rhs).ok_or(SlpError::Singular { context: "robust recovery system" })?
        }
    };
    StackedPrecoder::new(w)
}

/// Jacobian columns of the relaxed or strict closed form with respect to user i's pair.
pub(crate) fn recovery_directions(kind: SlpKind, inst: &SlpInstance, i: usize) -> (DVector<f64>, DVector<f64>) {
    let t = inst.tan_phi();
    let lam = &inst.channels[i];
    let d = inst.quadrature(i);
    match kind {
        SlpKind::Strict => (lam * 0.5, d * -0.5),
        SlpKind::Relaxed | SlpKind::Robust => ((lam * t - &d) * 0.5, (lam * t + d) * 0.5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModulationSpec;

    fn inst() -> SlpInstance {
        SlpInstance::new(
            vec![DVector::from_vec(vec![1.0, 0.5, -0.3, 0.2]), DVector::from_vec(vec![0.1, -0.4, 0.9, 0.6])],
            vec![2.0, 3.0],
            0.5,
            ModulationSpec::qpsk(),
        )
        .unwrap()
    }

    #[test]
    fn relaxed_equal_multipliers_drop_quadrature() {
        let inst = inst();
        let m = Multipliers::new(vec![0.3, 0.7], vec![0.3, 0.7]).unwrap();
        let w = recover_precoder(SlpKind::Relaxed, &m, &inst).unwrap().w1;
        let expect = (&inst.channels[0] * 0.3 + &inst.channels[1] * 0.7) * inst.tan_phi();
        assert!((w - expect).amax() < 1e-14);
    }

    #[test]
    fn strict_zero_lambda() {
        let inst = inst();
        let m = Multipliers::new(vec![0.4, 1.2], vec![0.0, 0.0]).unwrap();
        let w = recover_precoder(SlpKind::Strict, &m, &inst).unwrap().w1;
        let expect = (&inst.channels[0] * 0.4 + &inst.channels[1] * 1.2) / 2.0;
        assert!((w - expect).amax() < 1e-14);
    }

    #[test]
    fn closed_forms_are_stationary() {
        let inst = inst().with_error_bound(0.2).unwrap();
        let m = Multipliers::new(vec![0.05, 0.02], vec![0.03, 0.01]).unwrap();
        for kind in [SlpKind::Relaxed, SlpKind::Strict, SlpKind::Robust] {
            let w = recover_precoder(kind, &m, &inst).unwrap().w1;
            let (g, _, _) = super::super::loss::lagrangian_gradient(kind, &inst, &w, &m);
            assert!(g.amax() < 1e-12, "{kind:?}: {}", g.amax());
        }
    }

    #[test]
    fn robust_singular_and_negative_inputs() {
        let inst = SlpInstance::new(vec![DVector::from_vec(vec![1.0, 0.0])], vec![1.0], 1.0, ModulationSpec::qpsk()).unwrap();
        // a_1 = [1, 1], a_2 = [1, -1]; μ = ½ makes I − ½(a_1a_1ᵀ) singular along a_1
        let m = Multipliers::new(vec![0.5], vec![0.0]).unwrap();
        assert!(matches!(recover_precoder(SlpKind::Robust, &m, &inst), Err(SlpError::Singular { .. })));
        let bad = Multipliers::new(vec![-0.1], vec![0.0]).unwrap();
        assert!(recover_precoder(SlpKind::Relaxed, &bad, &inst).is_err());
        let lam_neg = Multipliers::new(vec![0.1], vec![-3.0]).unwrap();
        assert!(recover_precoder(SlpKind::Strict, &lam_neg, &inst).is_ok());
    }
}
