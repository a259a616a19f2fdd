use nalgebra::{DMatrix, DVector};

use super::SlpKind;
use crate::error::{Result, SlpError};
use crate::model::SlpInstance;
use crate::prox::{objective_grad_step, BarrierParams, ProxDirection, ProxEval, ProxProblem};

/// What happened to one user during a prox sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    /// Prox applied; carries the evaluation at that user's input.
    Applied(Box<ProxEval>),
    /// Barrier undefined at the current iterate; the user was left unchanged.
    /// `violation` is the positive slack deficit that the hinge penalizes, evaluated at `input`.
    Skipped { violation: f64, input: DVector<f64> },
}

impl SweepOutcome {
    /// Full Jacobian of the step, including the dependence of lagged bounds on the input.
    pub fn total_jacobian(&self, kind: SlpKind, inst: &SlpInstance, user: usize) -> Option<DMatrix<f64>> {
        match self {
            SweepOutcome::Applied(e) => {
                let mut j = e.jac.clone();
                if let (SlpKind::Relaxed, Some((da, db))) = (kind, &e.d_bounds) {
                    // b = t(Λᵀv − c), a = −b.
                    let g = (db - da) * inst.tan_phi();
                    j.ger(1.0, &g, &inst.channels[user], 1.0);
                }
                Some(j)
            }
            SweepOutcome::Skipped { .. } => None,
        }
    }
}

fn problem(kind: SlpKind, inst: &SlpInstance, i: usize, w: &DVector<f64>, mode: ProxDirection) -> Result<Option<ProxProblem>> {
    match kind {
        SlpKind::Relaxed => match ProxProblem::relaxed(inst, i, w, mode) {
            Ok(p) => Ok(Some(p)),
            Err(SlpError::InfeasibleBounds { .. }) => Ok(None),
            Err(e) => Err(e),
        },
        SlpKind::Strict => Ok(Some(ProxProblem::strict(inst, i))),
        SlpKind::Robust => Ok(Some(ProxProblem::robust(inst, i))),
    }
}

/// Slack deficit of user `i` at `w`; positive when the constraint is violated.
pub fn deficit(kind: SlpKind, inst: &SlpInstance, i: usize, w: &DVector<f64>) -> f64 {
    let t = inst.tan_phi();
    let c = inst.margin(i);
    match kind {
        SlpKind::Relaxed | SlpKind::Strict => t * (c - inst.channels[i].dot(w)),
        SlpKind::Robust => {
            let norm = w.norm();
            let re = inst.channels[i].dot(w);
            let im = inst.quadrature(i).dot(w);
            let rho = inst.effective_bound(i);
            [t * re - im, t * re + im].iter().map(|a| (t * c - a + rho * norm).max(0.0)).sum()
        }
    }
}

/// Gradient of `deficit(..).max(0.0)` with respect to `w`.
pub fn deficit_gradient(kind: SlpKind, inst: &SlpInstance, i: usize, w: &DVector<f64>) -> DVector<f64> {
    let t = inst.tan_phi();
    let c = inst.margin(i);
    let lam = &inst.channels[i];
    match kind {
        SlpKind::Relaxed | SlpKind::Strict => {
            if deficit(kind, inst, i, w) > 0.0 {
                -lam * t
            } else {
                DVector::zeros(w.len())
            }
        }
        SlpKind::Robust => {
            let d = inst.quadrature(i);
            let norm = w.norm();
            let rho = inst.effective_bound(i);
            let re = lam.dot(w);
            let im = d.dot(w);
            let mut g = DVector::zeros(w.len());
            for sign in [-1.0, 1.0] {
                if t * c - (t * re + sign * im) + rho * norm > 0.0 {
                    g -= lam * t + &d * sign;
                    if norm > 0.0 {
                        g += w * (rho / norm);
                    }
                }
            }
            g
        }
    }
}

/// Cyclic per-user prox over all users, starting from `v`.
pub fn prox_sweep(
    kind: SlpKind,
    inst: &SlpInstance,
    v: &DVector<f64>,
    gamma: f64,
    mu: f64,
    mode: ProxDirection,
) -> Result<(DVector<f64>, Vec<SweepOutcome>)> {
    let mut w = v.clone();
    let mut outcomes = Vec::with_capacity(inst.n_users());
    for i in 0..inst.n_users() {
        let evaluated = match problem(kind, inst, i, &w, mode)? {
            Some(p) => match p.prox(&w, gamma, mu) {
                Ok(e) => Some(e),
                Err(SlpError::InfeasibleRay { .. }) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        match evaluated {
            Some(e) => {
                w = e.w_out.clone();
                outcomes.push(SweepOutcome::Applied(Box::new(e)));
            }
            None => outcomes.push(SweepOutcome::Skipped {
                violation: deficit(kind, inst, i, &w).max(0.0),
                input: w.clone(),
            }),
        }
    }
    Ok((w, outcomes))
}

/// Forward-backward proximal iterations w ← prox(w − γ∇D(w, λ)), one per entry of `params`.
///
/// Returns every iterate including `w0`.
pub fn forward_backward(
    kind: SlpKind,
    inst: &SlpInstance,
    w0: &DVector<f64>,
    params: &[BarrierParams],
    mode: ProxDirection,
) -> Result<Vec<DVector<f64>>> {
    let mut trace = vec![w0.clone()];
    for p in params {
        let v = objective_grad_step(trace.last().unwrap(), p.gamma, p.lambda);
        let (w, _) = prox_sweep(kind, inst, &v, p.gamma, p.mu, mode)?;
        trace.push(w);
    }
    Ok(trace)
}
