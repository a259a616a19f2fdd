use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::barrier::{homogeneous_phase_one, path_following, scale_into_interior, Constraint, Objective};
use super::{Precoder, SlpKind, SolveReport, SolveStatus, SolverOptions, UserSlack};
use crate::error::{Result, SlpError};
use crate::model::{SlpInstance, StackedPrecoder};

pub fn transmit_power(w: &DVector<f64>) -> f64 {
    w.norm_squared()
}

fn check_dim(inst: &SlpInstance, w: &DVector<f64>) -> Result<()> {
    if w.len() != inst.dim() {
        return Err(SlpError::DimensionMismatch {
            context: "precoder",
            expected: inst.dim(),
            found: w.len(),
        });
    }
    Ok(())
}

/// RHS − LHS of each user's CI constraints.
pub fn constraint_residuals(kind: SlpKind, inst: &SlpInstance, w: &DVector<f64>) -> Result<Vec<UserSlack>> {
    check_dim(inst, w)?;
    let t = inst.tan_phi();
    let norm = w.norm();
    Ok((0..inst.n_users())
        .map(|i| {
            let re = inst.channels[i].dot(w);
            let im = inst.quadrature(i).dot(w);
            let c = inst.margin(i);
            match kind {
                SlpKind::Relaxed => UserSlack { slack: t * (re - c) - im.abs(), equality: 0.0 },
                SlpKind::Strict => UserSlack { slack: re - c, equality: im },
                SlpKind::Robust => UserSlack {
                    slack: t * (re - c) - im.abs() - inst.effective_bound(i) * norm,
                    equality: 0.0,
                },
            }
        })
        .collect())
}

/// Smallest s ≥ 1 such that s·w satisfies every inequality; `None` if no scale works.
pub fn rescale_to_feasible(kind: SlpKind, inst: &SlpInstance, w: &DVector<f64>) -> Result<Option<f64>> {
    check_dim(inst, w)?;
    let t = inst.tan_phi();
    let norm = w.norm();
    let mut s: f64 = 1.0;
    for i in 0..inst.n_users() {
        let re = inst.channels[i].dot(w);
        let im = inst.quadrature(i).dot(w);
        let (slope, offset) = match kind {
            SlpKind::Relaxed => (t * re - im.abs(), t * inst.margin(i)),
            SlpKind::Strict => (re, inst.margin(i)),
            SlpKind::Robust => (t * re - im.abs() - inst.effective_bound(i) * norm, t * inst.margin(i)),
        };
        if slope <= 0.0 {
            return Ok(None);
        }
        s = s.max(offset / slope);
    }
    Ok(Some(if s > 1.0 { s * (1.0 + 1e-12) } else { s }))
}

/// Orthonormal basis of {w : (ΠᵀΛ_i)ᵀw = 0 ∀i}.
fn quadrature_null_space(inst: &SlpInstance) -> DMatrix<f64> {
    let n = inst.dim();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..inst.n_users() {
        let d = inst.quadrature(i);
        gram.ger(1.0, &d, &d, 1.0);
    }
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&j| eig.eigenvalues[j] <= 1e-10 * top)
        .map(|j| eig.eigenvectors.column(j).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Homogeneous parts h_j and offsets b_j with constraint h_j(x) ≥ b_j.
fn homogeneous_constraints(kind: SlpKind, inst: &SlpInstance, basis: Option<&DMatrix<f64>>) -> (Vec<Constraint>, Vec<f64>) {
    let t = inst.tan_phi();
    let n = inst.dim();
    let mut cons = Vec::new();
    let mut offsets = Vec::new();
    for i in 0..inst.n_users() {
        let l = &inst.channels[i];
        let c = inst.margin(i);
        match kind {
            SlpKind::Strict => {
                let a = match basis {
                    Some(nb) => nb.transpose() * l,
                    None => l.clone(),
                };
                cons.push(Constraint::Affine { a, b: 0.0 });
                offsets.push(c);
            }
            SlpKind::Relaxed | SlpKind::Robust => {
                let d = inst.quadrature(i);
                let rho = if kind == SlpKind::Robust { inst.effective_bound(i) } else { 0.0 };
                for a in [l * t - &d, l * t + &d] {
                    if rho > 0.0 {
                        cons.push(Constraint::NormBound { a, b: 0.0, rho, len: n });
                    } else {
                        cons.push(Constraint::Affine { a, b: 0.0 });
                    }
                    offsets.push(t * c);
                }
            }
        }
    }
    (cons, offsets)
}

fn with_offsets(cons: &[Constraint], offsets: &[f64]) -> Vec<Constraint> {
    cons.iter()
        .zip(offsets)
        .map(|(c, &b)| match c {
            Constraint::Affine { a, .. } => Constraint::Affine { a: a.clone(), b },
            Constraint::NormBound { a, rho, len, .. } => Constraint::NormBound { a: a.clone(), b, rho: *rho, len: *len },
            other => other.clone(),
        })
        .collect()
}

/// Minimum-power CI precoder for one symbol slot by log-barrier path following.
pub fn solve_slp(kind: SlpKind, inst: &SlpInstance, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let start = Instant::now();
    let basis = (kind == SlpKind::Strict).then(|| quadrature_null_space(inst));
    if basis.as_ref().is_some_and(|b| b.ncols() == 0) {
        return Ok(SolveReport::infeasible(start.elapsed().as_secs_f64(), 0));
    }
    let (homog, offsets) = homogeneous_constraints(kind, inst, basis.as_ref());
    let guess: DVector<f64> = inst.channels.iter().fold(DVector::zeros(inst.dim()), |acc, l| acc + l);
    let guess = match &basis {
        Some(nb) => nb.transpose() * guess,
        None => guess,
    };
    let Some(x0) = scale_into_interior(&homog, &offsets, &guess).or_else(|| homogeneous_phase_one(&homog, &offsets, opts))
    else {
        return Ok(SolveReport::infeasible(start.elapsed().as_secs_f64(), 0));
    };
    let cons = with_offsets(&homog, &offsets);
    let obj = Objective { quad: 1.0, lin: DVector::zeros(x0.len()) };
    let res = path_following(&obj, &cons, x0, opts, |_| false);
    let w = match &basis {
        Some(nb) => nb * &res.x,
        None => res.x.clone(),
    };
    let residuals = constraint_residuals(kind, inst, &w)?;
    Ok(SolveReport {
        power: transmit_power(&w),
        precoder: Some(Precoder::Stacked(StackedPrecoder::new(w)?)),
        residuals,
        iterations: res.newton_iterations,
        outer_iterations: res.outer_iterations,
        wall_time: start.elapsed().as_secs_f64(),
        status: if res.converged { SolveStatus::Converged } else { SolveStatus::MaxIterations },
        objective_trace: res.trace,
    })
}
