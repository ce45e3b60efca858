//! Scale functions by numerical Laplace inversion.
//!
//! The tilted function `w(x) = e^{-L x} W(x)` (with `L` the leading root) is
//! bounded, and its transform `1/(ψ(s + L) - tilt·(s + L) - q)` is analytic
//! for `Re s > 0`. It is inverted on a Bromwich line with Euler summation,
//! which only evaluates ψ to the right of the imaginary axis. Values and
//! derivatives are tabulated on a uniform grid and interpolated by cubic
//! Hermite polynomials.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::table::UniformTable;

/// Euler summation order; `2M + 1` transform evaluations per point.
pub(crate) const EULER_M: usize = 18;
/// Lower order used for the error estimate.
pub(crate) const EULER_M_CHECK: usize = 14;
pub(crate) const TABLE_NODES: usize = 4096;

/// Euler weights `ξ_k` and abscissae `β_k` (Abate-Whitt unified form).
#[derive(Debug, Clone)]
struct EulerRule {
    scale: f64,
    beta: Vec<Complex64>,
    xi: Vec<f64>,
}

impl EulerRule {
    fn new(m: usize) -> Self {
        let mf = m as f64;
        let a = mf * std::f64::consts::LN_10 / 3.0;
        let mut eta = vec![0.0; 2 * m + 1];
        eta[0] = 0.5;
        for e in eta.iter_mut().take(m + 1).skip(1) {
            *e = 1.0;
        }
        let two_m = 2f64.powi(-(m as i32));
        eta[2 * m] = two_m;
        let mut binom = 1.0;
        for k in 1..m {
            binom *= (m - k + 1) as f64 / k as f64;
            eta[2 * m - k] = eta[2 * m - k + 1] + two_m * binom;
        }
        let xi = eta.iter().enumerate().map(|(k, e)| if k % 2 == 0 { *e } else { -*e }).collect();
        let beta = (0..=2 * m).map(|k| Complex64::new(a, std::f64::consts::PI * k as f64)).collect();
        EulerRule { scale: 10f64.powf(mf / 3.0), beta, xi }
    }

    fn invert<F>(&self, transform: &F, t: f64) -> Result<f64>
    where
        F: Fn(Complex64) -> Result<Complex64>,
    {
        let mut acc = 0.0;
        for (b, xi) in self.beta.iter().zip(&self.xi) {
            acc += xi * transform(b / t)?.re;
        }
        Ok(self.scale / t * acc)
    }
}

/// Tabulated `w` and `w'` with Hermite interpolation.
#[derive(Debug, Clone)]
pub(crate) struct InversionTable {
    pub model: LevyModel,
    pub tilt: f64,
    pub q: f64,
    pub lead: f64,
    pub at_zero: f64,
    pub x_max: f64,
    step: f64,
    w: Vec<f64>,
    dw: Vec<f64>,
    /// Max |difference| between orders `EULER_M` and `EULER_M_CHECK` on sampled nodes.
    pub error_estimate: f64,
    rule: EulerRule,
    /// `h(x) = W'(x) - lead·W(x) = e^{lead·x} w'(x)`, inverted directly from
    /// `(s - lead) G(s - lead) - w(0)` so the absolute inversion error is not
    /// amplified by `e^{lead·x}`.
    h: Option<UniformTable>,
}

impl InversionTable {
    pub fn build(model: &LevyModel, tilt: f64, q: f64, lead: f64, at_zero: f64, x_max: f64) -> Result<Self> {
        let rule = EulerRule::new(EULER_M);
        let step = x_max / (TABLE_NODES - 1) as f64;
        let mut table = InversionTable {
            model: model.clone(),
            tilt,
            q,
            lead,
            at_zero,
            x_max,
            step,
            w: Vec::with_capacity(TABLE_NODES),
            dw: Vec::with_capacity(TABLE_NODES),
            error_estimate: 0.0,
            rule,
            h: None,
        };
        let mut w = Vec::with_capacity(TABLE_NODES);
        let mut dw = Vec::with_capacity(TABLE_NODES);
        w.push(at_zero);
        // w'(0+) from the first interior node is refined below
        dw.push(f64::NAN);
        for k in 1..TABLE_NODES {
            let x = k as f64 * step;
            let (v, d) = table.invert_pair(x, &table.rule)?;
            w.push(v);
            dw.push(d);
        }
        // right limit of w' at 0 by quadratic extrapolation
        dw[0] = 3.0 * dw[1] - 3.0 * dw[2] + dw[3];
        table.w = w;
        table.dw = dw;

        let check = EulerRule::new(EULER_M_CHECK);
        let mut worst = 0.0f64;
        for k in (1..TABLE_NODES).step_by(256) {
            let x = k as f64 * step;
            let (v, _) = table.invert_pair(x, &check)?;
            worst = worst.max((v - table.w[k]).abs());
        }
        table.error_estimate = worst;
        table.build_h()?;
        if !worst.is_finite() || worst > 1e-4 * table.w.iter().fold(0.0f64, |m, v| m.max(v.abs())) {
            return Err(Error::Inversion { x: x_max, msg: format!("order-doubling error estimate {worst:e} too large") });
        }
        Ok(table)
    }

    fn tilted_transform(&self, s: Complex64) -> Result<Complex64> {
        let z = s + self.lead;
        let psi = self.model.laplace_exponent_complex(z)?;
        Ok(1.0 / (psi - self.tilt * z - self.q))
    }

    /// `(w(x), w'(x))` by inverting `G(s)` and `s G(s) - w(0)`.
    fn invert_pair(&self, x: f64, rule: &EulerRule) -> Result<(f64, f64)> {
        let v = rule.invert(&|s| self.tilted_transform(s), x)?;
        let d = rule.invert(&|s| self.tilted_transform(s).map(|g| s * g - self.at_zero), x)?;
        if !v.is_finite() || !d.is_finite() {
            return Err(Error::Inversion { x, msg: "non-finite Euler sum".into() });
        }
        Ok((v, d))
    }

    /// `(w, w')` at `x ≥ 0`.
    pub fn tilted_pair(&self, x: f64) -> (f64, f64) {
        if x >= self.x_max {
            return self.invert_pair(x, &self.rule).unwrap_or((f64::NAN, f64::NAN));
        }
        let pos = x / self.step;
        let i = (pos.floor() as usize).min(TABLE_NODES - 2);
        let t = pos - i as f64;
        let h = self.step;
        let (y0, y1) = (self.w[i], self.w[i + 1]);
        let (m0, m1) = (self.dw[i] * h, self.dw[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let slope = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (value, slope)
    }

    fn h_transform(&self, s: Complex64) -> Result<Complex64> {
        let a = self.lead;
        if (s - a).norm() <= 1e-9 * a.max(1.0) {
            // removable pole of (s - a) G(s - a) at s = a
            return Ok(Complex64::new(self.lead_coefficient()? - self.at_zero, 0.0));
        }
        self.tilted_transform(s - a).map(|g| (s - a) * g - self.at_zero)
    }

    fn build_h(&mut self) -> Result<()> {
        let mut values = vec![0.0; TABLE_NODES];
        for (k, v) in values.iter_mut().enumerate().skip(1) {
            let x = k as f64 * self.step;
            *v = self.rule.invert(&|s| self.h_transform(s), x)?;
            if !v.is_finite() {
                return Err(Error::Inversion { x, msg: "non-finite Euler sum".into() });
            }
        }
        values[0] = 4.0 * values[1] - 6.0 * values[2] + 4.0 * values[3] - values[4];
        self.h = Some(UniformTable::from_values(0.0, self.step, values));
        Ok(())
    }

    /// `W'(x) - lead·W(x)` for `x ≥ 0`.
    pub fn lead_removed_derivative(&self, x: f64) -> f64 {
        match &self.h {
            Some(t) if t.contains(x) => t.eval(x),
            _ => self.rule.invert(&|s| self.h_transform(s), x).unwrap_or(f64::NAN),
        }
    }

    /// Limit of `w` at infinity, `1 / f'(L)`.
    pub fn lead_coefficient(&self) -> Result<f64> {
        Ok(1.0 / (self.model.laplace_exponent_derivative(self.lead)? - self.tilt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_inverts_exponential() {
        // 1/(s + 1) ↔ e^{-t}
        let rule = EulerRule::new(EULER_M);
        for t in [0.1, 1.0, 5.0] {
            let v = rule.invert(&|s: Complex64| Ok(1.0 / (s + 1.0)), t).unwrap();
            assert!((v - (-t).exp()).abs() < 1e-9, "t = {t}: {v}");
        }
    }

    #[test]
    fn euler_inverts_pole_at_origin() {
        // 1/(s (s + 2)) ↔ (1 - e^{-2t}) / 2
        let rule = EulerRule::new(EULER_M);
        for t in [0.05, 0.7, 10.0] {
            let v = rule.invert(&|s: Complex64| Ok(1.0 / (s * (s + 2.0))), t).unwrap();
            let exact = 0.5 * (1.0 - (-2.0 * t).exp());
            assert!((v - exact).abs() < 1e-9, "t = {t}: {v} vs {exact}");
        }
    }
}
