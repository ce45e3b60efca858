//! Right-most roots `Φ(q)` of `ψ(θ) = q` and `φ(q)` of `ψ(θ) - δθ = q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LevyModel;

const MAX_DOUBLINGS: usize = 200;
const REL_TOL: f64 = 1e-13;

/// `Φ(q)` and `φ(q)` together with their residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub q: f64,
    pub phi: f64,
    pub varphi: f64,
    pub residuals: [f64; 2],
}

impl RootPair {
    pub fn compute(model: &LevyModel, delta: f64, q: f64) -> Result<Self> {
        let phi = phi_root(model, q)?;
        let varphi = varphi_root(model, delta, q)?;
        let r1 = (model.laplace_exponent(phi)? - q).abs();
        let r2 = (model.laplace_exponent(varphi)? - delta * varphi - q).abs();
        Ok(RootPair { q, phi, varphi, residuals: [r1, r2] })
    }
}

/// `Φ(q) = sup{θ ≥ 0 : ψ(θ) = q}`.
pub fn phi_root(model: &LevyModel, q: f64) -> Result<f64> {
    tilted_root(model, 0.0, q)
}

/// `φ(q) = sup{θ ≥ 0 : ψ(θ) - δθ = q}`.
pub fn varphi_root(model: &LevyModel, delta: f64, q: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::domain("varphi_root", format!("delta must be > 0, got {delta}")));
    }
    tilted_root(model, delta, q)
}

/// Largest root of `ψ(θ) - tilt·θ = q`. Used with `tilt = 0` for `X` and
/// `tilt = δ` for `Y = X - δt`.
pub fn tilted_root(model: &LevyModel, tilt: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::domain("root", format!("q must be > 0, got {q}")));
    }
    let g = |t: f64| model.laplace_exponent(t).map(|v| v - tilt * t - q);
    let dg = |t: f64| model.laplace_exponent_derivative(t).map(|v| v - tilt);

    let lo = argmin(model, tilt)?;
    // g(lo) <= -q < 0 since ψ(lo) - tilt·lo <= ψ(0) = 0
    let mut lo = lo;
    let mut hi = lo.max(1.0);
    let mut doublings = 0;
    while g(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::convergence("root", format!("no bracket for q = {q} after {MAX_DOUBLINGS} doublings")));
        }
    }

    // Bisect until the bracket is tight enough for Newton to be safe.
    for _ in 0..200 {
        if hi - lo <= 1e-4 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Safeguarded Newton from the upper end, where g is convex and increasing.
    let mut x = hi;
    for _ in 0..100 {
        let gx = g(x)?;
        if gx == 0.0 {
            return Ok(x);
        }
        if gx > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let d = dg(x)?;
        let mut next = x - gx / d;
        // a converged step can round onto the bracket end; accept it before the safeguard
        if d > 0.0 && (gx / d).abs() <= REL_TOL * x.abs() {
            return best_of(&g, next, x);
        }
        if !(d > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= REL_TOL * x.abs() || hi - lo <= f64::EPSILON * hi {
            return best_of(&g, next, x);
        }
        x = next;
    }
    Err(Error::convergence("root", format!("Newton did not settle for q = {q}; bracket [{lo}, {hi}]")))
}

fn best_of<G: Fn(f64) -> Result<f64>>(g: &G, a: f64, b: f64) -> Result<f64> {
    if g(a)?.abs() <= g(b)?.abs() {
        Ok(a)
    } else {
        Ok(b)
    }
}

/// Minimiser of the convex map `θ ↦ ψ(θ) - tilt·θ` on `[0, ∞)`.
fn argmin(model: &LevyModel, tilt: f64) -> Result<f64> {
    let slope = |t: f64| model.laplace_exponent_derivative(t).map(|v| v - tilt);
    let at_zero = if model.is_rational() { slope(0.0)? } else { slope(1e-12)? };
    if at_zero >= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while slope(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::convergence("root", "Laplace exponent is not eventually increasing"));
        }
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
