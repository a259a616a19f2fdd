use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::barrier::{path_following, Constraint, Objective};
use super::{Precoder, SolveReport, SolveStatus, SolverOptions, UserSlack};
use crate::error::{Result, SlpError};
use crate::model::{stack, stack_parts, unstack, ChannelMatrix, Swap};

/// SINR of every user for per-user beamformers `w`.
pub fn sinr(h: &ChannelMatrix, w: &[Vec<Complex64>], noise: f64) -> Vec<f64> {
    (0..h.n_users())
        .map(|i| {
            let hi = h.row(i);
            let gain = |wk: &[Complex64]| hi.iter().zip(wk).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr();
            let own = gain(&w[i]);
            let interference: f64 = w.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, wk)| gain(wk)).sum();
            own / (interference + noise)
        })
        .collect()
}

/// Σ_i Γ_i/(1 + Γ_i); the SINR targets are infeasible whenever this reaches min(N_t, K).
pub fn blp_feasibility_bound(targets: &[f64]) -> f64 {
    targets.iter().map(|g| g / (1.0 + g)).sum()
}

struct BlpLayout {
    k: usize,
    block: usize,
    lambdas: Vec<DVector<f64>>,
    quads: Vec<DVector<f64>>,
}

impl BlpLayout {
    fn n(&self) -> usize {
        self.k * self.block
    }

    /// Row vector selecting Λᵀ w1_k within the stacked variable.
    fn place(&self, v: &DVector<f64>, k: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.n());
        out.rows_mut(k * self.block, self.block).copy_from(v);
        out
    }
}

fn null_space(rows: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut gram = DMatrix::zeros(n, n);
    for r in rows {
        gram.ger(1.0, r, r, 1.0);
    }
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&j| eig.eigenvalues[j] <= 1e-10 * top)
        .map(|j| eig.eigenvectors.column(j).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

fn zero_forcing(h: &ChannelMatrix, targets: &[f64], noise: f64) -> Option<Vec<Vec<Complex64>>> {
    let (k, nt) = (h.n_users(), h.n_antennas());
    if k > nt {
        return None;
    }
    let hm = DMatrix::from_row_slice(k, nt, h.as_slice());
    let gram_inv = (&hm * hm.adjoint()).try_inverse()?;
    let pinv = hm.adjoint() * gram_inv;
    Some(
        (0..k)
            .map(|i| {
                let p = (2.0 * targets[i] * noise).sqrt();
                pinv.column(i).iter().map(|z| z * p).collect()
            })
            .collect(),
    )
}

/// Minimum-power block-level precoding under per-user SINR targets.
///
/// Solved as an SOCP in the real stacked variables with the phase of
/// h_iᵀw_i fixed to zero, using the same barrier path following as the SLP solvers.
pub fn solve_blp(h: &ChannelMatrix, targets: &[f64], noise: f64, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let start = Instant::now();
    let (k, nt) = (h.n_users(), h.n_antennas());
    if targets.len() != k {
        return Err(SlpError::DimensionMismatch { context: "SINR targets", expected: k, found: targets.len() });
    }
    if let Some(&g) = targets.iter().find(|g| !(**g > 0.0)) {
        return Err(SlpError::InvalidParameter { name: "SINR target", value: g });
    }
    if !(noise > 0.0) {
        return Err(SlpError::InvalidParameter { name: "noise power", value: noise });
    }
    if blp_feasibility_bound(targets) >= nt.min(k) as f64 {
        return Ok(SolveReport::infeasible(start.elapsed().as_secs_f64(), 0));
    }
    let swap = Swap::new(nt)?;
    let lambdas: Vec<DVector<f64>> = h.rows().map(stack_parts).collect();
    let quads = lambdas.iter().map(|l| swap.apply_transpose(l)).collect();
    let lay = BlpLayout { k, block: 2 * nt, lambdas, quads };
    let n = lay.n();
    let eq_rows: Vec<DVector<f64>> = (0..k).map(|i| lay.place(&lay.quads[i], i)).collect();
    let basis = null_space(&eq_rows, n);
    let m = basis.ncols();

    let cones: Vec<Constraint> = (0..k)
        .map(|i| {
            let beta = (1.0 + 1.0 / targets[i]).sqrt();
            let a = basis.transpose() * lay.place(&lay.lambdas[i], i) * beta;
            let mut rows = DMatrix::zeros(2 * k + 1, m);
            for j in 0..k {
                rows.set_row(2 * j, &(basis.transpose() * lay.place(&lay.lambdas[i], j)).transpose());
                rows.set_row(2 * j + 1, &(basis.transpose() * lay.place(&lay.quads[i], j)).transpose());
            }
            let mut m0 = DVector::zeros(2 * k + 1);
            m0[2 * k] = noise.sqrt();
            Constraint::Cone { a, b: 0.0, m: rows, m0 }
        })
        .collect();

    let to_x = |w: &[Vec<Complex64>]| {
        let mut x = DVector::zeros(n);
        for (i, wi) in w.iter().enumerate() {
            x.rows_mut(i * lay.block, lay.block).copy_from(&stack(wi));
        }
        x
    };
    let z_zf = zero_forcing(h, targets, noise)
        .map(|w| basis.transpose() * to_x(&w))
        .filter(|z| cones.iter().all(|c| c.slack(z).is_some()));
    let z0 = match z_zf {
        Some(z) => Some(z),
        None => phase_one(&cones, m, targets, noise, opts),
    };
    let Some(z0) = z0 else {
        return Ok(SolveReport::infeasible(start.elapsed().as_secs_f64(), 0));
    };
    let obj = Objective { quad: 1.0, lin: DVector::zeros(m) };
    let res = path_following(&obj, &cones, z0, opts, |_| false);
    let x = &basis * &res.x;
    let w: Vec<Vec<Complex64>> = (0..k)
        .map(|i| unstack(x.rows(i * lay.block, lay.block).as_slice()).expect("even block"))
        .collect();
    let achieved = sinr(h, &w, noise);
    let residuals = achieved
        .iter()
        .zip(targets)
        .map(|(s, g)| UserSlack { slack: s / g - 1.0, equality: 0.0 })
        .collect();
    Ok(SolveReport {
        power: x.norm_squared(),
        precoder: Some(Precoder::PerUser(w)),
        residuals,
        iterations: res.newton_iterations,
        outer_iterations: res.outer_iterations,
        wall_time: start.elapsed().as_secs_f64(),
        status: if res.converged { SolveStatus::Converged } else { SolveStatus::MaxIterations },
        objective_trace: res.trace,
    })
}

/// min τ s.t. s_i + τ > ‖v_i‖ inside a large ball; feasible when τ < 0.
fn phase_one(cones: &[Constraint], m: usize, targets: &[f64], noise: f64, opts: &SolverOptions) -> Option<DVector<f64>> {
    let scale = 1.0 + targets.iter().map(|g| g * noise).sum::<f64>().sqrt();
    let mut cons: Vec<Constraint> = cones
        .iter()
        .map(|c| match c {
            Constraint::Cone { a, b, m: rows, m0 } => {
                let mut a2 = a.clone().resize_vertically(m + 1, 0.0);
                a2[m] = 1.0;
                let rows2 = rows.clone().resize_horizontally(m + 1, 0.0);
                Constraint::Cone { a: a2, b: *b, m: rows2, m0: m0.clone() }
            }
            _ => unreachable!(),
        })
        .collect();
    cons.push(Constraint::Ball { radius_sq: (1e3 * scale).powi(2), len: m });
    let mut lin = DVector::zeros(m + 1);
    lin[m] = 1.0;
    let obj = Objective { quad: 0.0, lin };
    let mut y0 = DVector::zeros(m + 1);
    y0[m] = 2.0 * noise.sqrt() + 1.0;
    let res = path_following(&obj, &cons, y0, opts, |y| y[m] < -1e-9 * scale);
    let z = res.x.rows(0, m).into_owned();
    cones.iter().all(|c| c.slack(&z).is_some()).then_some(z)
}
