//! Log-barrier functions and their proximity operators.

mod cubic;
mod roots;

use nalgebra::{DMatrix, DVector};

pub use cubic::{solve_cubic_real, CubicPolynomial};
pub use roots::{
    hyperslab_cubic, hyperslab_root, ray_cubic, robust_ray_scale, strict_root, HyperslabRoot, RayScale,
    StrictRoot,
};

use crate::error::{Result, SlpError};
use crate::model::SlpInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperslabBounds {
    pub a: f64,
    pub b: f64,
}

impl HyperslabBounds {
    pub fn is_feasible(&self) -> bool {
        self.a < self.b
    }
}

/// b = (Λᵀw_ref − √(Γv0)) tanφ, a = −b.
pub fn hyperslab_bounds(
    lambda: &DVector<f64>,
    w_ref: &DVector<f64>,
    gamma_i: f64,
    v0: f64,
    phi: f64,
) -> Result<HyperslabBounds> {
    if !(gamma_i > 0.0) || !(v0 > 0.0) {
        return Err(SlpError::InvalidParameter {
            name: "SINR target or noise",
            value: gamma_i.min(v0),
        });
    }
    bounds_from_margin(lambda.dot(w_ref), (gamma_i * v0).sqrt(), phi.tan())
}

pub(crate) fn bounds_from_margin(real_part: f64, margin: f64, tan_phi: f64) -> Result<HyperslabBounds> {
    let b = (real_part - margin) * tan_phi;
    if b > 0.0 {
        Ok(HyperslabBounds { a: -b, b })
    } else {
        Err(SlpError::InfeasibleBounds { a: -b, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub mu: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl BarrierParams {
    pub fn new(mu: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(SlpError::InvalidParameter { name: "mu", value: mu });
        }
        if !(gamma > 0.0) {
            return Err(SlpError::InvalidParameter { name: "gamma", value: gamma });
        }
        Ok(Self { mu, gamma, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BarrierKind {
    RelaxedHyperslab,
    StrictAffine,
    RobustBall,
}

/// Which direction the relaxed prox moves along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxDirection {
    /// ΠᵀΛ, consistent with the barrier argument ΛᵀΠw.
    #[default]
    Quadrature,
    /// Λ, the literal form kept for comparison.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxEval {
    pub w_out: DVector<f64>,
    pub jac: DMatrix<f64>,
    pub d_mu: DVector<f64>,
    pub d_gamma: DVector<f64>,
    /// Root of the scalar problem: X for the hyperslab, Λᵀw_out for the strict
    /// kind, the ray scale s for the robust kind.
    pub root: f64,
    /// ∂w_out/∂a and ∂w_out/∂b for the hyperslab kind.
    pub d_bounds: Option<(DVector<f64>, DVector<f64>)>,
}

/// One user's barrier together with the data it needs.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxProblem {
    /// −ln(b − dᵀw) − ln(dᵀw − a) with frozen bounds.
    Hyperslab {
        direction: DVector<f64>,
        bounds: HyperslabBounds,
    },
    /// −ln(Λᵀw − c).
    Strict { lambda: DVector<f64>, margin: f64 },
    /// −Σ_j ln(a_jᵀw − e − ρ‖w‖).
    Robust {
        slopes: [DVector<f64>; 2],
        offset: f64,
        radius: f64,
    },
}

impl ProxProblem {
    /// Relaxed CI barrier of user i with bounds lagged at `w_ref`.
    pub fn relaxed(inst: &SlpInstance, i: usize, w_ref: &DVector<f64>, mode: ProxDirection) -> Result<Self> {
        let lambda = &inst.channels[i];
        let bounds = bounds_from_margin(lambda.dot(w_ref), inst.margin(i), inst.tan_phi())?;
        let direction = match mode {
            ProxDirection::Quadrature => inst.quadrature(i),
            ProxDirection::Literal => lambda.clone(),
        };
        Ok(ProxProblem::Hyperslab { direction, bounds })
    }

    pub fn strict(inst: &SlpInstance, i: usize) -> Self {
        ProxProblem::Strict {
            lambda: inst.channels[i].clone(),
            margin: inst.margin(i),
        }
    }

    /// Both worst-case CI constraints of user i.
    pub fn robust(inst: &SlpInstance, i: usize) -> Self {
        let t = inst.tan_phi();
        let l = &inst.channels[i];
        let d = inst.quadrature(i);
        ProxProblem::Robust {
            slopes: [l * t - &d, l * t + &d],
            offset: t * inst.margin(i),
            radius: inst.effective_bound(i),
        }
    }

    pub fn kind(&self) -> BarrierKind {
        match self {
            ProxProblem::Hyperslab { .. } => BarrierKind::RelaxedHyperslab,
            ProxProblem::Strict { .. } => BarrierKind::StrictAffine,
            ProxProblem::Robust { .. } => BarrierKind::RobustBall,
        }
    }

    /// Barrier value, `f64::INFINITY` outside the strict interior.
    pub fn barrier(&self, w: &DVector<f64>) -> f64 {
        match self {
            ProxProblem::Hyperslab { direction, bounds } => hyperslab_barrier(*bounds, direction.dot(w)),
            ProxProblem::Strict { lambda, margin } => strict_barrier(lambda.dot(w) - margin),
            ProxProblem::Robust { slopes, offset, radius } => {
                let n = w.norm();
                slopes.iter().map(|a| strict_barrier(a.dot(w) - offset - radius * n)).sum()
            }
        }
    }

    /// Direction along which the prox displaces `w_in`.
    pub fn active_direction(&self, w_in: &DVector<f64>) -> DVector<f64> {
        match self {
            ProxProblem::Hyperslab { direction, .. } => direction.clone(),
            ProxProblem::Strict { lambda, .. } => lambda.clone(),
            ProxProblem::Robust { .. } => w_in.clone(),
        }
    }

    pub fn prox(&self, w_in: &DVector<f64>, gamma: f64, mu: f64) -> Result<ProxEval> {
        if !(gamma > 0.0) {
            return Err(SlpError::InvalidParameter { name: "gamma", value: gamma });
        }
        if !(mu >= 0.0) {
            return Err(SlpError::InvalidParameter { name: "mu", value: mu });
        }
        let n = w_in.len();
        match self {
            ProxProblem::Hyperslab { direction: d, bounds } => {
                let dd = d.norm_squared();
                let u0 = d.dot(w_in);
                let r = hyperslab_root(u0, *bounds, gamma * mu * dd)?;
                let w_out = w_in + d * ((r.x - u0) / dd);
                let jac = DMatrix::identity(n, n) + d * d.transpose() * ((r.dx_du0 - 1.0) / dd);
                Ok(ProxEval {
                    w_out,
                    jac,
                    d_mu: d * (r.dx_dkappa * gamma),
                    d_gamma: d * (r.dx_dkappa * mu),
                    root: r.x,
                    d_bounds: Some((d * (r.dx_da / dd), d * (r.dx_db / dd))),
                })
            }
            ProxProblem::Strict { lambda: l, margin } => {
                let dd = l.norm_squared();
                let u0 = l.dot(w_in);
                let r = strict_root(u0, *margin, gamma * mu * dd)?;
                let w_out = w_in + l * ((r.u - u0) / dd);
                let jac = DMatrix::identity(n, n) + l * l.transpose() * ((r.du_du0 - 1.0) / dd);
                Ok(ProxEval {
                    w_out,
                    jac,
                    d_mu: l * (r.du_dkappa * gamma),
                    d_gamma: l * (r.du_dkappa * mu),
                    root: r.u,
                    d_bounds: None,
                })
            }
            ProxProblem::Robust { slopes, offset, radius } => {
                let norm = w_in.norm();
                let p = norm * norm;
                let alpha = [slopes[0].dot(w_in) - radius * norm, slopes[1].dot(w_in) - radius * norm];
                let r = robust_ray_scale(p, alpha, *offset, gamma * mu)?;
                let unit = w_in / norm;
                let mut grad_s = w_in * (2.0 * r.ds_dp);
                for j in 0..2 {
                    grad_s += (&slopes[j] - &unit * *radius) * r.ds_dalpha[j];
                }
                let jac = DMatrix::identity(n, n) * r.s + w_in * grad_s.transpose();
                Ok(ProxEval {
                    w_out: w_in * r.s,
                    jac,
                    d_mu: w_in * (r.ds_dkappa * gamma),
                    d_gamma: w_in * (r.ds_dkappa * mu),
                    root: r.s,
                    d_bounds: None,
                })
            }
        }
    }
}

/// −ln(b − u) − ln(u − a).
pub fn hyperslab_barrier(bounds: HyperslabBounds, u: f64) -> f64 {
    if u > bounds.a && u < bounds.b {
        -(bounds.b - u).ln() - (u - bounds.a).ln()
    } else {
        f64::INFINITY
    }
}

/// −ln(slack).
pub fn strict_barrier(slack: f64) -> f64 {
    if slack > 0.0 {
        -slack.ln()
    } else {
        f64::INFINITY
    }
}

pub fn barrier_value(problem: &ProxProblem, w: &DVector<f64>) -> f64 {
    problem.barrier(w)
}

pub fn prox_eval(problem: &ProxProblem, w_in: &DVector<f64>, gamma: f64, mu: f64) -> Result<ProxEval> {
    problem.prox(w_in, gamma, mu)
}

fn max_rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0f64, |m, x| m.max(x.abs())).max(1e-6);
    analytic
        .iter()
        .zip(numeric)
        .fold(0f64, |m, (a, f)| m.max((a - f).abs()))
        / scale
}

/// Max relative error of jac, d_mu and d_gamma against central differences.
///
/// At μ = 0 the μ-derivative uses a forward difference.
pub fn prox_derivatives_check(problem: &ProxProblem, w_in: &DVector<f64>, gamma: f64, mu: f64) -> Result<f64> {
    let eval = problem.prox(w_in, gamma, mu)?;
    let n = w_in.len();
    let h = 1e-6 * w_in.amax().max(1.0);
    let mut fd_jac = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut wp = w_in.clone();
        let mut wm = w_in.clone();
        wp[c] += h;
        wm[c] -= h;
        let diff = (problem.prox(&wp, gamma, mu)?.w_out - problem.prox(&wm, gamma, mu)?.w_out) / (2.0 * h);
        fd_jac.set_column(c, &diff);
    }
    let hm = 1e-6 * mu.max(1.0);
    let fd_mu = if mu > hm {
        (problem.prox(w_in, gamma, mu + hm)?.w_out - problem.prox(w_in, gamma, mu - hm)?.w_out) / (2.0 * hm)
    } else {
        let hf = 1e-7;
        let f1 = problem.prox(w_in, gamma, mu + hf)?.w_out;
        let f2 = problem.prox(w_in, gamma, mu + 2.0 * hf)?.w_out;
        (f1 * 4.0 - f2 - &eval.w_out * 3.0) / (2.0 * hf)
    };
    let hg = 1e-6 * gamma.max(1.0).min(gamma * 1e3);
    let fd_gamma =
        (problem.prox(w_in, gamma + hg, mu)?.w_out - problem.prox(w_in, gamma - hg, mu)?.w_out) / (2.0 * hg);
    let mut err = max_rel(eval.jac.as_slice(), fd_jac.as_slice())
        .max(max_rel(eval.d_mu.as_slice(), fd_mu.as_slice()))
        .max(max_rel(eval.d_gamma.as_slice(), fd_gamma.as_slice()));
    if let (ProxProblem::Hyperslab { direction, bounds }, Some((da, db))) = (problem, &eval.d_bounds) {
        let hb = 1e-6 * bounds.b.abs().max(bounds.a.abs()).max(1.0);
        let shifted = |da_: f64, db_: f64| {
            let p = ProxProblem::Hyperslab {
                direction: direction.clone(),
                bounds: HyperslabBounds { a: bounds.a + da_, b: bounds.b + db_ },
            };
            p.prox(w_in, gamma, mu).map(|e| e.w_out)
        };
        let fd_a = (shifted(hb, 0.0)? - shifted(-hb, 0.0)?) / (2.0 * hb);
        let fd_b = (shifted(0.0, hb)? - shifted(0.0, -hb)?) / (2.0 * hb);
        let analytic: Vec<f64> = da.iter().chain(db.iter()).copied().collect();
        let numeric: Vec<f64> = fd_a.iter().chain(fd_b.iter()).copied().collect();
        err = err.max(max_rel(&analytic, &numeric));
    }
    Ok(err)
}

/// w − γ∇(‖w‖² + λ1ᵀw) = (1 − 2γ)w − γλ1.
pub fn objective_grad_step(w: &DVector<f64>, gamma: f64, lambda: f64) -> DVector<f64> {
    w.map(|x| (1.0 - 2.0 * gamma) * x - gamma * lambda)
}
