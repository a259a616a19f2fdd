//! Log-barrier path following with damped Newton centering.

use nalgebra::{DMatrix, DVector};

use super::SolverOptions;

/// A concave constraint g(x) > 0 with barrier −ln g (or −ln of the cone form).
#[derive(Debug, Clone)]
pub(crate) enum Constraint {
    /// aᵀx − b.
    Affine { a: DVector<f64>, b: f64 },
    /// aᵀx − b − ρ‖x[..len]‖.
    NormBound { a: DVector<f64>, b: f64, rho: f64, len: usize },
    /// s = aᵀx − b > ‖Mx + m0‖, barrier −ln(s² − ‖Mx + m0‖²).
    Cone { a: DVector<f64>, b: f64, m: DMatrix<f64>, m0: DVector<f64> },
    /// r² − ‖x[..len]‖².
    Ball { radius_sq: f64, len: usize },
}

impl Constraint {
    /// Barrier parameter contribution.
    pub(crate) fn nu(&self) -> f64 {
        match self {
            Constraint::Cone { .. } => 2.0,
            _ => 1.0,
        }
    }

    /// Slack in the barrier's own units; `None` outside the domain.
    pub(crate) fn slack(&self, x: &DVector<f64>) -> Option<f64> {
        let s = match self {
            Constraint::Affine { a, b } => a.dot(x) - b,
            Constraint::NormBound { a, b, rho, len } => a.dot(x) - b - rho * x.rows(0, *len).norm(),
            Constraint::Cone { a, b, m, m0 } => {
                let s = a.dot(x) - b;
                if s <= 0.0 {
                    return None;
                }
                let v = m * x + m0;
                s * s - v.norm_squared()
            }
            Constraint::Ball { radius_sq, len } => radius_sq - x.rows(0, *len).norm_squared(),
        };
        (s > 0.0 && s.is_finite()).then_some(s)
    }

    /// Adds the gradient and Hessian of −ln(slack) into `g` and `h`.
    fn accumulate(&self, x: &DVector<f64>, scale: f64, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        let q = self.slack(x).expect("accumulate called outside the domain");
        let (dq, hess_q) = match self {
            Constraint::Affine { a, .. } => (a.clone(), None),
            Constraint::NormBound { a, rho, len, .. } => {
                let n = x.rows(0, *len).norm();
                let mut dq = a.clone();
                let mut hq = DMatrix::zeros(x.len(), x.len());
                if n > 0.0 {
                    let u = x.rows(0, *len) / n;
                    for i in 0..*len {
                        dq[i] -= rho * u[i];
                        for j in 0..*len {
                            let id = if i == j { 1.0 } else { 0.0 };
                            hq[(i, j)] = -rho * (id - u[i] * u[j]) / n;
                        }
                    }
                }
                (dq, Some(hq))
            }
            Constraint::Cone { a, b, m, m0 } => {
                let s = a.dot(x) - b;
                let v = m * x + m0;
                let dq = a * (2.0 * s) - m.transpose() * v * 2.0;
                let hq = (a * a.transpose() - m.transpose() * m) * 2.0;
                (dq, Some(hq))
            }
            Constraint::Ball { len, .. } => {
                let mut dq = DVector::zeros(x.len());
                let mut hq = DMatrix::zeros(x.len(), x.len());
                for i in 0..*len {
                    dq[i] = -2.0 * x[i];
                    hq[(i, i)] = -2.0;
                }
                (dq, Some(hq))
            }
        };
        g.axpy(-scale / q, &dq, 1.0);
        h.ger(scale / (q * q), &dq, &dq, 1.0);
        if let Some(hq) = hess_q {
            *h -= hq * (scale / q);
        }
    }
}

/// Objective σ‖x‖² + cᵀx.
#[derive(Debug, Clone)]
pub(crate) struct Objective {
    pub quad: f64,
    pub lin: DVector<f64>,
}

impl Objective {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.quad * x.norm_squared() + self.lin.dot(x)
    }
}

pub(crate) struct PathResult {
    pub x: DVector<f64>,
    pub newton_iterations: usize,
    pub outer_iterations: usize,
    /// Objective after each centering stage.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn barrier_total(cons: &[Constraint], x: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for c in cons {
        match c.slack(x) {
            Some(s) => total -= s.ln(),
            None => return f64::INFINITY,
        }
    }
    total
}

/// Minimizes f(x) + μφ(x) by damped Newton. Returns the iteration count.
fn center(
    obj: &Objective,
    cons: &[Constraint],
    x: &mut DVector<f64>,
    mu: f64,
    opts: &SolverOptions,
) -> (usize, bool) {
    let n = x.len();
    let mut iters = 0;
    let mut fx = obj.value(x) + mu * barrier_total(cons, x);
    while iters < opts.max_newton_per_stage {
        let mut g = &obj.lin + &*x * (2.0 * obj.quad);
        let mut h = DMatrix::identity(n, n) * (2.0 * obj.quad);
        for c in cons {
            c.accumulate(x, mu, &mut g, &mut h);
        }
        let Some(chol) = h.clone().cholesky() else {
            return (iters, false);
        };
        let step = -chol.solve(&g);
        let decrement = -g.dot(&step);
        iters += 1;
        if decrement / 2.0 <= opts.centering_tol * (1.0 + fx.abs()) {
            return (iters, true);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_backtracks {
            let trial = &*x + &step * t;
            let ft = obj.value(&trial) + mu * barrier_total(cons, &trial);
            if ft.is_finite() && ft <= fx - 0.25 * t * decrement {
                *x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Newton direction no longer decreases in floating point.
            return (iters, decrement / 2.0 <= 1e-6 * (1.0 + fx.abs()));
        }
    }
    (iters, false)
}

/// Path following from a strictly feasible `x0`.
pub(crate) fn path_following(
    obj: &Objective,
    cons: &[Constraint],
    x0: DVector<f64>,
    opts: &SolverOptions,
    stop: impl Fn(&DVector<f64>) -> bool,
) -> PathResult {
    let nu: f64 = cons.iter().map(Constraint::nu).sum();
    let mut x = x0;
    let mut mu = opts.mu0 * (obj.value(&x).abs() / nu).max(1.0);
    let mut newton = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_outer {
        let (it, ok) = center(obj, cons, &mut x, mu, opts);
        newton += it;
        trace.push(obj.value(&x));
        if !ok {
            break;
        }
        if mu * nu < opts.epsilon * obj.value(&x).abs().max(1.0) || stop(&x) {
            converged = true;
            break;
        }
        mu *= opts.decrease;
    }
    PathResult {
        outer_iterations: trace.len(),
        x,
        newton_iterations: newton,
        trace,
        converged,
    }
}

/// Finds x with every constraint strictly positive, for constraints whose
/// slack is h_j(x) − b_j with h_j positively homogeneous and b_j > 0.
///
/// Solves max τ s.t. h_j(x) ≥ τ, ‖x‖² ≤ 1, then rescales by homogeneity.
/// Returns `None` when the homogeneous margin is not positive.
pub(crate) fn homogeneous_phase_one(
    homogeneous: &[Constraint],
    offsets: &[f64],
    opts: &SolverOptions,
) -> Option<DVector<f64>> {
    let n = match &homogeneous[0] {
        Constraint::Affine { a, .. } | Constraint::NormBound { a, .. } => a.len(),
        _ => unreachable!("phase one expects affine or norm-bound constraints"),
    };
    let aug = |a: &DVector<f64>| {
        let mut v = a.clone().resize_vertically(n + 1, 0.0);
        v[n] = -1.0;
        v
    };
    let mut cons: Vec<Constraint> = homogeneous
        .iter()
        .map(|c| match c {
            Constraint::Affine { a, .. } => Constraint::Affine { a: aug(a), b: 0.0 },
            Constraint::NormBound { a, rho, .. } => Constraint::NormBound { a: aug(a), b: 0.0, rho: *rho, len: n },
            _ => unreachable!(),
        })
        .collect();
    cons.push(Constraint::Ball { radius_sq: 1.0, len: n });
    let mut lin = DVector::zeros(n + 1);
    lin[n] = -1.0;
    let obj = Objective { quad: 0.0, lin };
    let mut y0 = DVector::zeros(n + 1);
    y0[n] = -1.0;
    let res = path_following(&obj, &cons, y0, opts, |y| y[n] > 1e-9);
    let x = res.x.rows(0, n).into_owned();
    scale_into_interior(homogeneous, offsets, &x)
}

/// Returns 2·max_j b_j/h_j(x) · x when every h_j(x) > 0.
pub(crate) fn scale_into_interior(
    homogeneous: &[Constraint],
    offsets: &[f64],
    x: &DVector<f64>,
) -> Option<DVector<f64>> {
    let mut scale: f64 = 0.0;
    for (c, &b) in homogeneous.iter().zip(offsets) {
        let h = c.slack(x)?;
        scale = scale.max(b / h);
    }
    let y = x * (2.0 * scale.max(f64::MIN_POSITIVE));
    let shifted_ok = homogeneous.iter().zip(offsets).all(|(c, &b)| c.slack(&y).is_some_and(|h| h > b));
    shifted_ok.then_some(y)
}
