//! Wiener-Hopf factors of `X` and `Y` and the auxiliary functions `F1`, `F2`,
//! `f` and the density of `K_q`.
//!
//! `F2`, `F2'`, `f` and `K_q` on the negative half-line are defined by
//! formulas in `W`, `𝕎` that subtract terms growing like `e^{φ|x|}`. Here
//! they are evaluated through the bounded functions `h = W' - ΦW` and
//! `𝕙 = 𝕎' - φ𝕎` instead, using
//!
//! * `P(-X̲_{e(q)} ∈ dx)/dx = (q/Φ) h(x)` for `x > 0`,
//! * `P̂(-Y̲_{e(q)} ∈ dx)/dx = (q/φ) 𝕙(x)` for `x > 0`.
//!
//! The direct transcriptions are kept in [`literal`] for cross-checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate, LevyModel, RefractionParams};
use crate::quad;
use crate::scale::{build_scale_with, Backend, BackendChoice, ScaleEvaluator};
use crate::table::UniformTable;

const ABS: f64 = 1e-15;
const REL: f64 = 1e-12;
const TABLE_NODES: usize = 4096;

/// Precomputed ingredients of the Wiener-Hopf route.
#[derive(Debug, Clone)]
pub struct FactorSet {
    q: f64,
    delta: f64,
    phi: f64,
    varphi: f64,
    model: LevyModel,
    scale_x: ScaleEvaluator,
    scale_y: ScaleEvaluator,
    /// Quadrature tolerances, looser when a scale function is tabulated.
    abs: f64,
    rel: f64,
    /// `K_q` on `[-x_max, 0]` (left limit at 0) and `F2'` on the same range.
    kq_table: Option<UniformTable>,
    f2_prime_table: Option<UniformTable>,
}

/// `E[e^{-sX̄}]`, `E[e^{sX̲}]`, `Ê[e^{-sȲ}]`, `Ê[e^{sY̲}]` at time `e(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhTransforms {
    pub sup_x: f64,
    pub inf_x: f64,
    pub sup_y: f64,
    pub inf_y: f64,
}

/// Numeric and closed-form transforms of the laws of `-X̲` and `-Y̲`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfLawCheck {
    pub x_numeric: f64,
    pub x_analytic: f64,
    pub y_numeric: f64,
    pub y_analytic: f64,
}

/// Two sides of an identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

impl Sides {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

impl FactorSet {
    pub fn new(model: &LevyModel, params: &RefractionParams, q: f64) -> Result<Self> {
        Self::with_backend(model, params, q, BackendChoice::Auto)
    }

    pub fn with_backend(model: &LevyModel, params: &RefractionParams, q: f64, choice: BackendChoice) -> Result<Self> {
        validate(model, params).into_result()?;
        let scale_x = build_scale_with(model, q, 0.0, choice)?;
        let scale_y = build_scale_with(model, q, params.delta, choice)?;
        let phi = scale_x.leading_root();
        let varphi = scale_y.leading_root();
        if !(varphi > phi) {
            return Err(Error::Consistency(format!("expected φ(q) > Φ(q), got φ = {varphi}, Φ = {phi}")));
        }
        let tabulated = [&scale_x, &scale_y].iter().any(|s| s.backend() == Backend::LaplaceInversion);
        let (abs, rel) = if tabulated { (1e-10, 1e-8) } else { (ABS, REL) };
        let mut fs = FactorSet {
            q,
            delta: params.delta,
            phi,
            varphi,
            model: model.clone(),
            scale_x,
            scale_y,
            abs,
            rel,
            kq_table: None,
            f2_prime_table: None,
        };
        fs.build_tables()?;
        Ok(fs)
    }

    /// Tables of `K_q` and `F2'` for the inversion backend; exponential sums
    /// are evaluated directly.
    fn build_tables(&mut self) -> Result<()> {
        let span = self.scale_x.x_max().max(self.scale_y.x_max());
        self.kq_table = None;
        self.f2_prime_table = None;
        if self.scale_x.exp_sum().is_some() && self.scale_y.exp_sum().is_some() {
            return Ok(());
        }
        let kq = UniformTable::build(-span, 0.0, TABLE_NODES, |x| self.kq_left(-x))?;
        let f2p = UniformTable::build(-span, 0.0, TABLE_NODES, |x| self.f2_prime_raw(x))?;
        self.kq_table = Some(kq);
        self.f2_prime_table = Some(f2p);
        Ok(())
    }

    /// Replace φ(q) by `φ(q) + eps` everywhere it enters the factor formulas.
    /// Only meant for sensitivity probes of the verification suite.
    pub fn perturb_varphi(&mut self, eps: f64) -> Result<()> {
        self.varphi += eps;
        self.build_tables()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Φ(q).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// φ(q).
    pub fn varphi(&self) -> f64 {
        self.varphi
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn scale_x(&self) -> &ScaleEvaluator {
        &self.scale_x
    }

    pub fn scale_y(&self) -> &ScaleEvaluator {
        &self.scale_y
    }

    pub fn wh_transforms(&self, s: f64) -> Result<WhTransforms> {
        if !(s > 0.0) {
            return Err(Error::domain("wh_transforms", format!("s must be > 0, got {s}")));
        }
        let (q, phi, varphi, delta) = (self.q, self.phi, self.varphi, self.delta);
        let psi = self.model.laplace_exponent(s)?;
        let near = |a: f64, b: f64| (a - b).abs() <= 1e-10 * b.max(1.0);
        let inf_x = if near(s, phi) {
            q / (phi * self.model.laplace_exponent_derivative(phi)?)
        } else {
            q / phi * (phi - s) / (q - psi)
        };
        let inf_y = if near(s, varphi) {
            q / (varphi * (self.model.laplace_exponent_derivative(varphi)? - delta))
        } else {
            q / varphi * (varphi - s) / (q - psi + delta * s)
        };
        Ok(WhTransforms { sup_x: phi / (phi + s), inf_x, sup_y: varphi / (varphi + s), inf_y })
    }

    /// `F1(x) = ((φ - Φ)/Φ) e^{-φx}` for `x ≥ 0`.
    pub fn f1(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain("F1", format!("x must be >= 0, got {x}")));
        }
        Ok(self.f1_raw(x))
    }

    fn f1_raw(&self, x: f64) -> f64 {
        (self.varphi - self.phi) / self.phi * (-self.varphi * x).exp()
    }

    /// `F1'(x) = -φ F1(x)` for `x > 0`.
    pub fn f1_prime(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain("F1_prime", format!("x must be > 0, got {x}")));
        }
        Ok(self.f1_prime_raw(x))
    }

    pub(crate) fn f1_prime_raw(&self, x: f64) -> f64 {
        -self.varphi * self.f1_raw(x)
    }

    /// `∫_0^∞ e^{-φt} h(u + t) dt` with `h = W' - ΦW`, the common tail of `F2` and `F2'`.
    fn x_tail(&self, u: f64) -> Result<f64> {
        let varphi = self.varphi;
        if let Some(sum) = self.scale_x.exp_sum() {
            return Ok(sum.lead_removed_sum(|s| (s * u).exp() / (varphi - s)));
        }
        let e = quad::kronrod_to_infinity(
            |t| (-varphi * t).exp() * self.scale_x.lead_removed_prime(u + t),
            0.0,
            self.abs,
            self.rel,
        )?;
        Ok(e.value)
    }

    /// `F2(x)` for `x ≤ 0`.
    pub fn f2(&self, x: f64) -> Result<f64> {
        if !(x <= 0.0) {
            return Err(Error::domain("F2", format!("x must be <= 0, got {x}")));
        }
        Ok(self.delta * self.varphi / self.phi * self.x_tail(-x)?)
    }

    /// `F2'(x)` for `x < 0`.
    pub fn f2_prime(&self, x: f64) -> Result<f64> {
        if !(x < 0.0) {
            return Err(Error::domain("F2_prime", format!("x must be < 0, got {x}")));
        }
        self.f2_prime_raw(x)
    }

    /// `F2'` with the left limit at 0.
    pub(crate) fn f2_prime_raw(&self, x: f64) -> Result<f64> {
        let u = (-x).max(0.0);
        let k = self.delta * self.varphi / self.phi;
        let head = self.scale_x.lead_removed_prime(u);
        Ok(k * (head - self.varphi * self.x_tail(u)?))
    }

    /// `f(x)` for `x < 0`.
    pub fn f_aux(&self, x: f64) -> Result<f64> {
        if !(x < 0.0) {
            return Err(Error::domain("f_aux", format!("x must be < 0, got {x}")));
        }
        self.f_aux_raw(x)
    }

    /// `f` with the value `𝕎(0)` at 0.
    pub(crate) fn f_aux_raw(&self, x: f64) -> Result<f64> {
        let u = (-x).max(0.0);
        let phi = self.phi;
        if let Some(sum) = self.scale_y.exp_sum() {
            let grow = (phi * u).exp();
            return Ok(grow * self.scale_y.value_at_zero() + sum.lead_removed_sum(|s| ((s * u).exp() - grow) / (s - phi)));
        }
        let inner = quad::kronrod(
            |v| (phi * (u - v)).exp() * self.scale_y.lead_removed_prime(v),
            0.0,
            u,
            self.abs,
            self.rel,
        )?;
        Ok((phi * u).exp() * self.scale_y.value_at_zero() + inner.value)
    }

    /// Density of `K_q`.
    pub fn kq_density(&self, x: f64) -> Result<f64> {
        let (q, phi, varphi, delta) = (self.q, self.phi, self.varphi, self.delta);
        if x >= 0.0 {
            return Ok(q * (varphi - phi) / (varphi * delta) * (-phi * x).exp());
        }
        self.kq_left(-x)
    }

    /// `K_q` density at `-u` from the negative-half-line formula, `u ≥ 0`.
    fn kq_left(&self, u: f64) -> Result<f64> {
        let (q, phi, varphi) = (self.q, self.phi, self.varphi);
        let tail = match self.scale_y.exp_sum() {
            Some(sum) => sum.lead_removed_sum(|s| (s * u).exp() / (phi - s)),
            None => {
                quad::kronrod_to_infinity(
                    |t| (-phi * t).exp() * self.scale_y.lead_removed_prime(u + t),
                    0.0,
                    self.abs,
                    self.rel,
                )?
                .value
            }
        };
        let v = q * phi / varphi * tail;
        if v < -1e-10 {
            return Err(Error::Consistency(format!("K_q density {v:e} < 0 at x = {}", -u)));
        }
        Ok(v.max(0.0))
    }

    /// `K_q` density read from the table where possible.
    pub(crate) fn kq_cached(&self, x: f64) -> Result<f64> {
        match &self.kq_table {
            Some(t) if x < 0.0 && t.contains(x) => Ok(t.eval(x).max(0.0)),
            _ => self.kq_density(x),
        }
    }

    /// `F2'` (left limit at 0) read from the table where possible.
    pub(crate) fn f2_prime_cached(&self, x: f64) -> Result<f64> {
        match &self.f2_prime_table {
            Some(t) if t.contains(x) => Ok(t.eval(x)),
            _ => self.f2_prime_raw(x),
        }
    }

    /// Transforms of the laws of `-X̲_{e(q)}` and `-Y̲_{e(q)}`, numerically
    /// (including the atoms at 0) and in closed form.
    pub fn inf_law_check(&self, s: f64) -> Result<InfLawCheck> {
        if !(s > 0.0) {
            return Err(Error::domain("inf_law_check", format!("s must be > 0, got {s}")));
        }
        let wh = self.wh_transforms(s)?;
        let law = |sc: &ScaleEvaluator, lead: f64| -> Result<f64> {
            // x = y/s keeps the kernel at e^{-y}
            let body = quad::kronrod_to_infinity(
                |y| (-y).exp() * sc.lead_removed_prime(y / s),
                0.0,
                self.abs,
                self.rel,
            )?;
            Ok(self.q / lead * (sc.value_at_zero() + body.value / s))
        };
        Ok(InfLawCheck {
            x_numeric: law(&self.scale_x, self.phi)?,
            x_analytic: wh.inf_x,
            y_numeric: law(&self.scale_y, self.varphi)?,
            y_analytic: wh.inf_y,
        })
    }

    /// `∫_0^∞ e^{-sx} F1(x) dx` against `(1/s)(Ê[e^{-sȲ}]/E[e^{-sX̄}] - 1)`.
    pub fn f1_transform(&self, s: f64) -> Result<Sides> {
        let wh = self.wh_transforms(s)?;
        let lhs = quad::kronrod_to_infinity(|x| (-s * x).exp() * self.f1_raw(x), 0.0, self.abs, self.rel)?.value;
        Ok(Sides { lhs, rhs: (wh.sup_y / wh.sup_x - 1.0) / s })
    }

    /// `∫_{-∞}^0 e^{sz} F2(z) dz` against `(1/s)(E[e^{sX̲}]/Ê[e^{sY̲}] - 1)`.
    pub fn f2_transform(&self, s: f64) -> Result<Sides> {
        let wh = self.wh_transforms(s)?;
        let failure = std::cell::Cell::new(None);
        let lhs = quad::kronrod_to_infinity(
            |u| match self.f2(-u) {
                Ok(v) => (-s * u).exp() * v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            0.0,
            self.abs.max(1e-14),
            self.rel.max(1e-11),
        )?
        .value;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(Sides { lhs, rhs: (wh.inf_x / wh.inf_y - 1.0) / s })
    }

    /// `∫_{-∞}^0 e^{φz} W'(-z) dz` against `1/δ - W(0)`.
    pub fn identity_w_prime_transform(&self) -> Result<Sides> {
        let varphi = self.varphi;
        let phi = self.phi;
        let sx = &self.scale_x;
        // e^{-φv} W'(v) = e^{-φv} h(v) + Φ e^{(Φ-φ)v} ω(v)
        let lhs = quad::kronrod_to_infinity(
            |v| (-varphi * v).exp() * sx.lead_removed_prime(v) + phi * (-(varphi - phi) * v).exp() * sx.tilted(v),
            0.0,
            self.abs,
            self.rel,
        )?
        .value;
        Ok(Sides { lhs, rhs: 1.0 / self.delta - self.scale_x.value_at_zero() })
    }

    /// `∫_x^0 e^{-φ(x-z)} f(z) dz` against `∫_x^0 e^{-Φ(x-z)} 𝕎(-z) dz`, `x ≤ 0`.
    pub fn identity_f_convolution(&self, x: f64) -> Result<Sides> {
        if !(x <= 0.0) {
            return Err(Error::domain("identity_f_convolution", format!("x must be <= 0, got {x}")));
        }
        let (phi, varphi) = (self.phi, self.varphi);
        let failure = std::cell::Cell::new(None);
        let lhs = quad::kronrod(
            |z| match self.f_aux_raw(z) {
                Ok(v) => (-varphi * (x - z)).exp() * v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            x,
            0.0,
            self.abs,
            self.rel,
        )?
        .value;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let rhs = quad::kronrod(|z| (-phi * (x - z)).exp() * self.scale_y.w(-z), x, 0.0, self.abs, self.rel)?.value;
        Ok(Sides { lhs, rhs })
    }

    /// `∫_{y-x}^0 F2'(y-x-z) f(z) dz` against
    /// `(φ/Φ)(1 - δW(0)) f(y-x) - (φ/Φ) W(x-y)` for `x > y`.
    pub fn identity_f2_prime_convolution(&self, x: f64, y: f64) -> Result<Sides> {
        if !(x > y) {
            return Err(Error::domain("identity_f2_prime_convolution", format!("need x > y, got x = {x}, y = {y}")));
        }
        let a = y - x;
        let failure = std::cell::Cell::new(None);
        let lhs = quad::kronrod(
            |z| match (self.f2_prime_raw(a - z), self.f_aux_raw(z)) {
                (Ok(p), Ok(f)) => p * f,
                (Err(e), _) | (_, Err(e)) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            a,
            0.0,
            self.abs.max(1e-13),
            self.rel.max(1e-11),
        )?
        .value;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let ratio = self.varphi / self.phi;
        let rhs = ratio * (1.0 - self.delta * self.scale_x.value_at_zero()) * self.f_aux_raw(a)?
            - ratio * self.scale_x.w(x - y);
        Ok(Sides { lhs, rhs })
    }

    /// Total mass of `K_q`.
    pub fn kq_mass(&self) -> Result<f64> {
        let failure = std::cell::Cell::new(None);
        let right = quad::kronrod_to_infinity(
            |x| match self.kq_density(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            0.0,
            self.abs.max(1e-14),
            self.rel.max(1e-12),
        )?
        .value;
        let left = quad::kronrod_to_infinity(
            |u| match self.kq_density(-u) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            0.0,
            self.abs.max(1e-14),
            self.rel.max(1e-12),
        )?
        .value;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(left + right)
    }
}

/// Direct transcriptions of the defining formulas, with quadrature on the
/// raw scale functions. Accurate only for moderate `|x|`; used to
/// cross-check the tilted forms.
pub mod literal {
    use super::*;

    /// `F2(x) = ((φ-Φ)/Φ)e^{-φx} - (δφ/Φ)W(-x) - (δφ/Φ)∫_x^0 (φ-Φ)e^{-φ(x-z)}W(-z)dz`.
    pub fn f2(fs: &FactorSet, x: f64) -> Result<f64> {
        let (phi, varphi, delta) = (fs.phi, fs.varphi, fs.delta);
        let integral =
            quad::kronrod(|z| (varphi - phi) * (-varphi * (x - z)).exp() * fs.scale_x.w(-z), x, 0.0, ABS, 1e-14)?.value;
        Ok((varphi - phi) / phi * (-varphi * x).exp()
            - delta * varphi / phi * fs.scale_x.w(-x)
            - delta * varphi / phi * integral)
    }

    /// `F2'(x) = (δφ/Φ)(W'(-x) - (φ-Φ)∫_{-∞}^x e^{-φ(x-z)} W'(-z) dz)`.
    pub fn f2_prime(fs: &FactorSet, x: f64) -> Result<f64> {
        let (phi, varphi, delta) = (fs.phi, fs.varphi, fs.delta);
        let u = -x;
        // z = x - t
        let sx = &fs.scale_x;
        let tail = quad::kronrod_to_infinity(
            // e^{-φt} W'(u+t) with W' = (W' - ΦW) + Φ e^{Φx} ω(x), kept finite for large t
            |t| {
                let x = u + t;
                (-varphi * t).exp() * sx.lead_removed_prime(x) + phi * (phi * u - (varphi - phi) * t).exp() * sx.tilted(x)
            },
            0.0,
            ABS,
            1e-14,
        )?
        .value;
        Ok(delta * varphi / phi * (fs.scale_x.dw(u) - (varphi - phi) * tail))
    }

    /// `f(x) = 𝕎(-x) + (Φ-φ)∫_x^0 e^{-Φ(x-z)} 𝕎(-z) dz`.
    pub fn f_aux(fs: &FactorSet, x: f64) -> Result<f64> {
        let (phi, varphi) = (fs.phi, fs.varphi);
        let integral = quad::kronrod(|z| (-phi * (x - z)).exp() * fs.scale_y.w(-z), x, 0.0, ABS, 1e-14)?.value;
        Ok(fs.scale_y.w(-x) + (phi - varphi) * integral)
    }

    /// `K_q` density from `e^{-Φx} q(φ-Φ)/(φδ) - (qΦ/φ) f(x)`.
    pub fn kq_density(fs: &FactorSet, x: f64) -> Result<f64> {
        let (q, phi, varphi, delta) = (fs.q, fs.phi, fs.varphi, fs.delta);
        let head = (-phi * x).exp() * q * (varphi - phi) / (varphi * delta);
        if x >= 0.0 {
            Ok(head)
        } else {
            Ok(head - q * phi / varphi * f_aux(fs, x)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExpJump, Jumps};

    fn std_bm() -> FactorSet {
        let m = LevyModel::new(2f64.sqrt(), 0.0, Jumps::None).unwrap();
        FactorSet::new(&m, &RefractionParams::new(0.5, 0.0), 1.0).unwrap()
    }

    fn cl_exp() -> FactorSet {
        let m = LevyModel::with_drift(0.0, 2.0, Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 1.0 }])).unwrap();
        FactorSet::new(&m, &RefractionParams::new(0.5, 0.0), 1.0).unwrap()
    }

    const VARPHI: f64 = 1.280_776_406_404_415_1;

    #[test]
    fn transforms_examples() {
        let fs = std_bm();
        assert!((fs.wh_transforms(1.0).unwrap().sup_x - 0.5).abs() < 1e-15);
        let t = fs.wh_transforms(1e-12).unwrap();
        for v in [t.sup_x, t.inf_x, t.sup_y, t.inf_y] {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let t = fs.wh_transforms(2.0).unwrap();
        let expected = (1.0 / VARPHI) * (VARPHI - 2.0) / (1.0 - 4.0 + 1.0);
        assert!((t.inf_y - expected).abs() < 1e-15);
        assert!((t.inf_y - 0.280776).abs() < 1e-6);
        assert!(fs.wh_transforms(0.0).is_err());
    }

    #[test]
    fn transforms_removable_poles() {
        let fs = std_bm();
        let at = fs.wh_transforms(fs.phi()).unwrap();
        let near = fs.wh_transforms(fs.phi() * (1.0 + 1e-7)).unwrap();
        assert!((at.inf_x - near.inf_x).abs() < 1e-6);
        let at = fs.wh_transforms(fs.varphi()).unwrap();
        let near = fs.wh_transforms(fs.varphi() * (1.0 + 1e-7)).unwrap();
        assert!((at.inf_y - near.inf_y).abs() < 1e-6);
    }

    #[test]
    fn f1_examples() {
        let fs = std_bm();
        assert!((fs.f1(0.0).unwrap() - (VARPHI - 1.0)).abs() < 1e-14);
        assert!((fs.f1(1.0).unwrap() - 0.078005).abs() < 1e-6);
        assert!((fs.f1_prime(1e-300).unwrap() + 0.359611).abs() < 1e-6);
        assert!((fs.f1_prime(1.0).unwrap() + 0.099907).abs() < 1e-6);
        assert!(fs.f1(200.0).unwrap() < 1e-100);
        assert!(fs.f1(-1.0).is_err());
        assert!(fs.f1_prime(0.0).is_err());
        assert!((fs.f1(0.0).unwrap() + 1.0 - fs.varphi() / fs.phi()).abs() < 1e-12);
    }

    #[test]
    fn f2_at_zero() {
        let fs = std_bm();
        assert!((fs.f2(0.0).unwrap() - (VARPHI - 1.0)).abs() < 1e-10);
        let fs = cl_exp();
        let (p, v) = (fs.phi(), fs.varphi());
        let expected = (v - p) / p - 0.25 * v / p;
        assert!((fs.f2(0.0).unwrap() - expected).abs() < 1e-10);
        assert!(fs.f2(0.1).is_err());
    }

    #[test]
    fn f2_continuous_at_zero() {
        for fs in [std_bm(), cl_exp()] {
            let gap = (fs.f2(-1e-9).unwrap() - fs.f2(0.0).unwrap()).abs();
            assert!(gap < 1e-8, "gap {gap:e}");
        }
    }

    #[test]
    fn tilted_forms_match_literal_formulas() {
        for fs in [std_bm(), cl_exp()] {
            for x in [-0.01, -0.5, -1.0, -3.0, -6.0] {
                let a = fs.f2(x).unwrap();
                let b = literal::f2(&fs, x).unwrap();
                assert!((a - b).abs() < 1e-9, "F2({x}): {a} vs {b}");
                let a = fs.f2_prime(x).unwrap();
                let b = literal::f2_prime(&fs, x).unwrap();
                assert!((a - b).abs() < 1e-9, "F2'({x}): {a} vs {b}");
                let a = fs.f_aux(x).unwrap();
                let b = literal::f_aux(&fs, x).unwrap();
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "f({x}): {a} vs {b}");
                let a = fs.kq_density(x).unwrap();
                let b = literal::kq_density(&fs, x).unwrap();
                assert!((a - b).abs() < 1e-9, "K({x}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn f2_prime_matches_finite_difference() {
        let fs = cl_exp();
        let h = 1e-5;
        for i in 1..=10 {
            let x = -0.37 * i as f64;
            let fd = (fs.f2(x + h).unwrap() - fs.f2(x - h).unwrap()) / (2.0 * h);
            assert!((fd - fs.f2_prime(x).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn f_aux_limit_at_zero() {
        let fs = std_bm();
        assert!(fs.f_aux(-1e-12).unwrap().abs() < 1e-10);
        let fs = cl_exp();
        assert!((fs.f_aux(-1e-12).unwrap() - 1.0 / 1.5).abs() < 1e-10);
        assert!(fs.f_aux(0.0).is_err());
    }

    #[test]
    fn kq_examples() {
        let fs = std_bm();
        let k0 = (VARPHI - 1.0) / (VARPHI * 0.5);
        assert!((fs.kq_density(0.0).unwrap() - k0).abs() < 1e-14);
        assert!((fs.kq_density(0.0).unwrap() - 0.438447).abs() < 1e-6);
        assert!((fs.kq_density(2.0).unwrap() - 0.059338).abs() < 1e-6);
        assert!((fs.kq_density(2.0).unwrap() - k0 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kq_nonnegative_far_left() {
        for fs in [std_bm(), cl_exp()] {
            for i in 0..200 {
                let x = -0.25 * i as f64;
                assert!(fs.kq_density(x).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn inf_law_examples() {
        let fs = std_bm();
        let c = fs.inf_law_check(2.0).unwrap();
        assert!((c.x_analytic - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.x_numeric - 1.0 / 3.0).abs() < 1e-10);

        let fs = cl_exp();
        let c = fs.inf_law_check(1.0).unwrap();
        let p = fs.phi();
        let analytic = (1.0 / p) * (p - 1.0) / (1.0 - 1.5);
        assert!((c.x_analytic - analytic).abs() < 1e-14);
        assert!((c.x_numeric - analytic).abs() < 1e-6);
        assert!((c.y_numeric - c.y_analytic).abs() < 1e-6);

        // atom mass (q/Φ)W(0) = 0.5/Φ
        let c = fs.inf_law_check(1e7).unwrap();
        assert!((c.x_numeric - 0.5 / p).abs() < 1e-6);
        assert!((c.x_analytic - 0.5 / p).abs() < 1e-6);
        assert!(fs.inf_law_check(0.0).is_err());
    }

    #[test]
    fn w_prime_transform_identity() {
        let s = std_bm().identity_w_prime_transform().unwrap();
        assert!((s.lhs - 2.0).abs() < 1e-8);
        assert_eq!(s.rhs, 2.0);
        let s = cl_exp().identity_w_prime_transform().unwrap();
        assert!((s.lhs - 1.5).abs() < 1e-8);
    }

    #[test]
    fn corrupted_varphi_breaks_transform_identity() {
        let mut fs = std_bm();
        fs.perturb_varphi(1e-3).unwrap();
        let s = fs.identity_w_prime_transform().unwrap();
        assert!(s.gap() > 1e-4);
    }

    #[test]
    fn factor_transforms() {
        for fs in [std_bm(), cl_exp()] {
            for s in [0.3, 1.0, 2.5] {
                let t = fs.f1_transform(s).unwrap();
                assert!(t.gap() < 1e-9, "F1 transform at {s}: {t:?}");
                let t = fs.f2_transform(s).unwrap();
                assert!(t.gap() < 1e-6, "F2 transform at {s}: {t:?}");
            }
        }
    }

    #[test]
    fn convolution_identities() {
        for fs in [std_bm(), cl_exp()] {
            for x in [-0.3, -1.0, -2.5] {
                let c = fs.identity_f_convolution(x).unwrap();
                assert!(c.gap() < 1e-8, "{c:?}");
            }
            for (x, y) in [(0.5, -0.5), (1.0, 0.2), (2.0, -1.0)] {
                let c = fs.identity_f2_prime_convolution(x, y).unwrap();
                assert!(c.gap() < 1e-7, "({x}, {y}): {c:?}");
            }
        }
    }

    #[test]
    fn kq_is_a_probability_density() {
        for fs in [std_bm(), cl_exp()] {
            assert!((fs.kq_mass().unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn inversion_backend_agrees() {
        let m = LevyModel::with_drift(0.0, 2.0, Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 1.0 }])).unwrap();
        let p = RefractionParams::new(0.5, 0.0);
        let inv = FactorSet::with_backend(&m, &p, 1.0, BackendChoice::ForceInversion).unwrap();
        let cf = cl_exp();
        for x in [-0.2, -1.0, -4.0] {
            assert!((inv.f2(x).unwrap() - cf.f2(x).unwrap()).abs() < 1e-6);
            assert!((inv.kq_density(x).unwrap() - cf.kq_density(x).unwrap()).abs() < 1e-6);
            assert!((inv.f_aux(x).unwrap() - cf.f_aux(x).unwrap()).abs() < 1e-6 * cf.f_aux(x).unwrap().max(1.0));
        }
    }

    #[test]
    fn cached_tables_match_direct() {
        assert!(std_bm().kq_table.is_none() && cl_exp().f2_prime_table.is_none());
        let m = LevyModel::with_drift(0.0, 2.0, Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 1.0 }])).unwrap();
        let p = RefractionParams::new(0.5, 0.0);
        let inv = FactorSet::with_backend(&m, &p, 1.0, BackendChoice::ForceInversion).unwrap();
        assert!(inv.kq_table.is_some());
        for fs in [inv] {
            for k in 1..200 {
                let x = -0.0613 * k as f64;
                assert!((fs.kq_cached(x).unwrap() - fs.kq_density(x).unwrap()).abs() < 1e-9);
                assert!((fs.f2_prime_cached(x).unwrap() - fs.f2_prime(x).unwrap()).abs() < 1e-9);
            }
        }
    }
}
