//! Scalar cores of the three proximity operators and their sensitivities.

use super::cubic::{solve_cubic_real, CubicPolynomial};
use super::HyperslabBounds;
use crate::error::{Result, SlpError};

/// Interior root X of (X−a)(X−b)(X−u0) − κ(2X−a−b) and its partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperslabRoot {
    pub x: f64,
    /// Υ, the cubic's derivative at X.
    pub upsilon: f64,
    pub dx_du0: f64,
    pub dx_da: f64,
    pub dx_db: f64,
    pub dx_dkappa: f64,
}

pub fn hyperslab_cubic(u0: f64, bounds: HyperslabBounds, kappa: f64) -> CubicPolynomial {
    let (a, b) = (bounds.a, bounds.b);
    CubicPolynomial::monic(
        -(a + b + u0),
        a * b + u0 * (a + b) - 2.0 * kappa,
        -a * b * u0 + kappa * (a + b),
    )
}

/// Solves the scalar prox min_u ½(u−u0)² + κ[−ln(b−u) − ln(u−a)].
pub fn hyperslab_root(u0: f64, bounds: HyperslabBounds, kappa: f64) -> Result<HyperslabRoot> {
    let (a, b) = (bounds.a, bounds.b);
    if !(a < b) {
        return Err(SlpError::InfeasibleBounds { a, b });
    }
    if !(kappa >= 0.0) || !u0.is_finite() {
        return Err(SlpError::InvalidParameter { name: "barrier weight", value: kappa });
    }
    let cubic = hyperslab_cubic(u0, bounds, kappa);
    let x = if kappa == 0.0 {
        if u0 > a && u0 < b {
            u0
        } else {
            return Err(SlpError::NoInteriorRoot { roots: vec![u0], lower: a, upper: b });
        }
    } else {
        let roots = solve_cubic_real(&cubic)?;
        let start = roots.iter().copied().find(|&r| r > a && r < b);
        // F(a) = κ(b−a) > 0 and F(b) < 0 bracket the unique interior root.
        let f = |x: f64| {
            let (xa, xb, xu) = (x - a, x - b, x - u0);
            (xa * xb * xu - kappa * (xa + xb), xb * xu + xa * xu + xa * xb - 2.0 * kappa)
        };
        let mut x = bracketed_newton(f, a, b, start, true);
        if x <= a {
            x = a.next_up();
        } else if x >= b {
            x = b.next_down();
        }
        if !(x > a && x < b) {
            return Err(SlpError::NoInteriorRoot { roots, lower: a, upper: b });
        }
        x
    };
    let upsilon = (x - b) * (x - u0) + (x - a) * (x - u0) + (x - a) * (x - b) - 2.0 * kappa;
    let f_u0 = -(x - a) * (x - b);
    let f_a = -(x - b) * (x - u0) + kappa;
    let f_b = -(x - a) * (x - u0) + kappa;
    let f_kappa = a + b - 2.0 * x;
    Ok(HyperslabRoot {
        x,
        upsilon,
        dx_du0: -f_u0 / upsilon,
        dx_da: -f_a / upsilon,
        dx_db: -f_b / upsilon,
        dx_dkappa: -f_kappa / upsilon,
    })
}

/// Root u > c of (u − u0)(u − c) = κ and its partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrictRoot {
    pub u: f64,
    pub du_du0: f64,
    pub du_dc: f64,
    pub du_dkappa: f64,
}

pub fn strict_root(u0: f64, margin: f64, kappa: f64) -> Result<StrictRoot> {
    if !(kappa >= 0.0) || !u0.is_finite() {
        return Err(SlpError::InvalidParameter { name: "barrier weight", value: kappa });
    }
    let g = u0 - margin;
    let r = (g * g + 4.0 * kappa).sqrt();
    // δ = (g + R)/2 without cancellation for g < 0.
    let delta = if g >= 0.0 { 0.5 * (g + r) } else if r > 0.0 { 2.0 * kappa / (r - g) } else { 0.0 };
    let (du_du0, du_dkappa) = if r > 0.0 { (0.5 * (1.0 + g / r), 1.0 / r) } else { (0.5, f64::INFINITY) };
    Ok(StrictRoot {
        u: margin + delta,
        du_du0,
        du_dc: 1.0 - du_du0,
        du_dkappa,
    })
}

/// Scale s of the ray-restricted robust prox and its partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayScale {
    pub s: f64,
    pub ds_dp: f64,
    pub ds_dalpha: [f64; 2],
    pub ds_dkappa: f64,
}

/// p(s−1)(α1 s−e)(α2 s−e) − κ[2α1α2 s − e(α1+α2)].
pub fn ray_cubic(p: f64, alpha: [f64; 2], e: f64, kappa: f64) -> CubicPolynomial {
    let [a1, a2] = alpha;
    let sum = a1 + a2;
    let prod = a1 * a2;
    CubicPolynomial::new(
        p * prod,
        -p * (e * sum + prod),
        p * (e * e + e * sum) - 2.0 * kappa * prod,
        -p * e * e + kappa * e * sum,
    )
}

/// Solves min_{s} ½p(s−1)² − κ Σ_j ln(α_j s − e) over the domain α_j s > e.
pub fn robust_ray_scale(p: f64, alpha: [f64; 2], e: f64, kappa: f64) -> Result<RayScale> {
    for (j, &a) in alpha.iter().enumerate() {
        if !(a > 0.0) {
            return Err(SlpError::InfeasibleRay { constraint: j, alpha: a });
        }
    }
    if !(kappa >= 0.0) {
        return Err(SlpError::InvalidParameter { name: "barrier weight", value: kappa });
    }
    if !(p > 0.0) {
        return Err(SlpError::InvalidParameter { name: "ray norm", value: p });
    }
    let lo = (e / alpha[0]).max(e / alpha[1]);
    let g = |s: f64| {
        let mut v = p * (s - 1.0);
        let mut d = p;
        for &a in &alpha {
            let sl = a * s - e;
            v -= kappa * a / sl;
            d += kappa * a * a / (sl * sl);
        }
        (v, d)
    };
    let s = if kappa == 0.0 {
        if 1.0 > lo {
            1.0
        } else {
            return Err(SlpError::NoInteriorRoot { roots: vec![1.0], lower: lo, upper: f64::INFINITY });
        }
    } else {
        let cubic = ray_cubic(p, alpha, e, kappa);
        let roots = solve_cubic_real(&cubic).unwrap_or_default();
        let start = roots.iter().copied().filter(|&r| r > lo).fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |a| a.max(r)))
        });
        let mut hi = lo.max(1.0) + 1.0;
        while g(hi).0 <= 0.0 {
            hi = lo + 2.0 * (hi - lo);
            if !hi.is_finite() {
                return Err(SlpError::NoInteriorRoot { roots, lower: lo, upper: f64::INFINITY });
            }
        }
        let mut s = bracketed_newton(g, lo, hi, start, false).max(lo);
        let interior = |s: f64| alpha.iter().all(|&a| a * s - e > 0.0);
        for _ in 0..8 {
            if interior(s) {
                break;
            }
            s = s.next_up();
        }
        if !interior(s) {
            return Err(SlpError::NoInteriorRoot { roots, lower: lo, upper: hi });
        }
        s
    };
    let mut g_s = p;
    let mut g_kappa = 0.0;
    let mut g_alpha = [0.0; 2];
    for j in 0..2 {
        let sl = alpha[j] * s - e;
        g_s += kappa * alpha[j] * alpha[j] / (sl * sl);
        g_kappa -= alpha[j] / sl;
        g_alpha[j] = kappa * e / (sl * sl);
    }
    Ok(RayScale {
        s,
        ds_dp: -(s - 1.0) / g_s,
        ds_dalpha: [-g_alpha[0] / g_s, -g_alpha[1] / g_s],
        ds_dkappa: -g_kappa / g_s,
    })
}

/// Safeguarded Newton on a function with a single sign change in (lo, hi).
///
/// `decreasing` says f(lo) > 0 > f(hi); otherwise f(lo) < 0 < f(hi).
fn bracketed_newton<F>(f: F, mut lo: f64, mut hi: f64, start: Option<f64>, decreasing: bool) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let sign = if decreasing { -1.0 } else { 1.0 };
    let mut x = match start {
        Some(s) if s > lo && s < hi => s,
        _ => 0.5 * (lo + hi),
    };
    for _ in 0..200 {
        let (fx, dx) = f(x);
        let fx = sign * fx;
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = fx / (sign * dx);
        let mut next = x - step;
        if !(next > lo && next < hi) || !step.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || next == x {
            return next;
        }
        x = next;
    }
    x
}
