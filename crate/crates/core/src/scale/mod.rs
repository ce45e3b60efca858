//! q-scale functions `W^(q)` of `X` and `𝕎^(q)` of `Y = X - δt`.
//!
//! `W` is characterised by `∫_0^∞ e^{-sx} W(x) dx = 1/(ψ(s) - tilt·s - q)`
//! for `s` beyond the leading root, and `W = 0` on `(-∞, 0)`. Rational
//! exponents get an exact exponential-sum representation; everything else
//! goes through numerical Laplace inversion.

mod closed_form;
mod inversion;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::quad;
use crate::roots;

use closed_form::{Build, ExpSum};
use inversion::InversionTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProcessTag {
    X,
    Y,
}

impl fmt::Display for ProcessTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessTag::X => "X",
            ProcessTag::Y => "Y",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    ClosedForm,
    LaplaceInversion,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::ClosedForm => "closed-form",
            Backend::LaplaceInversion => "laplace-inversion",
        })
    }
}

/// Which backend to use when building a scale function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendChoice {
    /// Closed form when ψ is rational and its roots are simple.
    #[default]
    Auto,
    ForceInversion,
}

#[derive(Debug, Clone)]
enum Repr {
    Exp(ExpSum),
    Table(Box<InversionTable>),
}

/// A built q-scale function.
#[derive(Debug, Clone)]
pub struct ScaleEvaluator {
    process: ProcessTag,
    q: f64,
    tilt: f64,
    lead: f64,
    lead_coef: f64,
    at_zero: f64,
    x_max: f64,
    model: LevyModel,
    repr: Repr,
    warnings: Vec<String>,
}

/// Both sides of the Laplace identities for `W` and for the measure `W(dx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTrip {
    pub s: f64,
    pub numeric: f64,
    pub analytic: f64,
    pub measure_numeric: f64,
    pub measure_analytic: f64,
}

impl RoundTrip {
    pub fn relative_error(&self) -> f64 {
        ((self.numeric - self.analytic) / self.analytic).abs()
    }

    pub fn measure_relative_error(&self) -> f64 {
        ((self.measure_numeric - self.measure_analytic) / self.measure_analytic).abs()
    }
}

/// Build `W^(q)` (`tilt = 0`) or `𝕎^(q)` (`tilt = δ`).
pub fn build_scale(model: &LevyModel, q: f64, tilt: f64) -> Result<ScaleEvaluator> {
    build_scale_with(model, q, tilt, BackendChoice::Auto)
}

pub fn build_scale_with(model: &LevyModel, q: f64, tilt: f64, choice: BackendChoice) -> Result<ScaleEvaluator> {
    if !(q > 0.0) {
        return Err(Error::domain("build_scale", format!("q must be > 0, got {q}")));
    }
    if !(tilt >= 0.0) {
        return Err(Error::domain("build_scale", format!("tilt must be >= 0, got {tilt}")));
    }
    let process = if tilt == 0.0 { ProcessTag::X } else { ProcessTag::Y };
    let lead = roots::tilted_root(model, tilt, q)?;
    let at_zero = match model.drift_d() {
        Some(d) if d > tilt => 1.0 / (d - tilt),
        Some(d) => {
            return Err(Error::Validation(format!("bounded variation needs drift d = {d} above tilt {tilt}")));
        }
        None => 0.0,
    };
    // e^{-lead·x_max} < 1e-14
    let x_max = 14.0 * std::f64::consts::LN_10 / lead;
    let mut warnings = Vec::new();

    if model.is_rational() && choice == BackendChoice::Auto {
        match closed_form::build(model, tilt, q, lead) {
            Ok(Build::Ready(sum)) => {
                return Ok(ScaleEvaluator {
                    process,
                    q,
                    tilt,
                    lead,
                    lead_coef: sum.lead_coef,
                    at_zero,
                    x_max,
                    model: model.clone(),
                    repr: Repr::Exp(sum),
                    warnings,
                });
            }
            Ok(Build::Degenerate(gap)) => warnings.push(format!(
                "near-repeated roots (gap {gap:e}); falling back to Laplace inversion"
            )),
            Err(e @ Error::Validation(_)) => return Err(e),
            Err(e) => warnings.push(format!("closed form unavailable ({e}); falling back to Laplace inversion")),
        }
    }

    let table = InversionTable::build(model, tilt, q, lead, at_zero, x_max)?;
    let lead_coef = table.lead_coefficient()?;
    Ok(ScaleEvaluator {
        process,
        q,
        tilt,
        lead,
        lead_coef,
        at_zero,
        x_max,
        model: model.clone(),
        repr: Repr::Table(Box::new(table)),
        warnings,
    })
}

impl ScaleEvaluator {
    pub fn process(&self) -> ProcessTag {
        self.process
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    pub fn backend(&self) -> Backend {
        match self.repr {
            Repr::Exp(_) => Backend::ClosedForm,
            Repr::Table(_) => Backend::LaplaceInversion,
        }
    }

    /// Φ(q) for `X`, φ(q) for `Y`.
    pub fn leading_root(&self) -> f64 {
        self.lead
    }

    /// `lim_{x→∞} e^{-lead·x} W(x)`.
    pub fn lead_coefficient(&self) -> f64 {
        self.lead_coef
    }

    pub fn value_at_zero(&self) -> f64 {
        self.at_zero
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Error estimate of the inversion backend (zero for closed form).
    pub fn inversion_error_estimate(&self) -> f64 {
        match &self.repr {
            Repr::Exp(_) => 0.0,
            Repr::Table(t) => t.error_estimate,
        }
    }

    /// Rates of the exponential terms (closed-form backend only).
    pub fn exponents(&self) -> Option<Vec<num_complex::Complex64>> {
        match &self.repr {
            Repr::Exp(sum) => Some(sum.rates()),
            Repr::Table(_) => None,
        }
    }

    /// `W(x)`: zero for `x < 0`, `W(0)` by its limit value.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return self.at_zero;
        }
        match &self.repr {
            Repr::Exp(sum) => sum.value(x),
            Repr::Table(t) => (self.lead * x).exp() * t.tilted_pair(x).0,
        }
    }

    /// `W'(x)` for `x > 0`.
    pub fn w_prime(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain("W_prime", format!("x must be > 0, got {x}")));
        }
        Ok(self.dw(x))
    }

    /// `W'` with the right limit at 0 and zero on the negative half-line.
    pub(crate) fn dw(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Exp(sum) => sum.derivative(x),
            Repr::Table(t) => {
                let (w, dw) = t.tilted_pair(x);
                (self.lead * x).exp() * (dw + self.lead * w)
            }
        }
    }

    /// `e^{-lead·x} W(x)` for `x ≥ 0`.
    pub fn tilted(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return self.at_zero;
        }
        match &self.repr {
            Repr::Exp(sum) => sum.tilted(x),
            Repr::Table(t) => t.tilted_pair(x).0,
        }
    }

    /// `d/dx [e^{-lead·x} W(x)]` for `x ≥ 0` (right limit at 0). This is the
    /// cancellation-free building block for the extrema laws of `X` and `Y`.
    pub fn tilted_prime(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Exp(sum) => sum.tilted_derivative(x.max(0.0)),
            Repr::Table(t) => t.tilted_pair(x.max(0.0)).1,
        }
    }

    /// `W'(x) - lead·W(x) = e^{lead·x} d/dx [e^{-lead·x} W(x)]` for `x ≥ 0`
    /// (right limit at 0). Bounded and free of the leading exponential, so
    /// the extrema laws of `X` and `Y` can be written without cancellation.
    pub fn lead_removed_prime(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match &self.repr {
            Repr::Exp(sum) => sum.lead_removed_derivative(x),
            Repr::Table(t) => t.lead_removed_derivative(x),
        }
    }

    pub(crate) fn exp_sum(&self) -> Option<&ExpSum> {
        match &self.repr {
            Repr::Exp(sum) => Some(sum),
            Repr::Table(_) => None,
        }
    }

    /// `1/(ψ(s) - tilt·s - q)`.
    pub fn transform(&self, s: f64) -> Result<f64> {
        Ok(1.0 / (self.model.laplace_exponent(s)? - self.tilt * s - self.q))
    }

    /// Numeric versus analytic Laplace transforms of `W` and of `W(dx)` at `s`.
    pub fn laplace_roundtrip(&self, s: f64) -> Result<RoundTrip> {
        if !(s > self.lead) {
            return Err(Error::domain(
                "laplace_roundtrip",
                format!("s = {s} must exceed the leading root {}", self.lead),
            ));
        }
        let cut = self.x_max;
        let body = quad::kronrod(|x| (-s * x).exp() * self.w(x), 0.0, cut, 1e-300, 1e-13)?.value;
        let dbody = quad::kronrod(|x| (-s * x).exp() * self.dw(x), 0.0, cut, 1e-300, 1e-13)?.value;
        let (tail, dtail) = match &self.repr {
            Repr::Exp(sum) => (sum.transform_tail(s, cut, 0), sum.transform_tail(s, cut, 1)),
            Repr::Table(_) => {
                // beyond the table W ≈ lead_coef·e^{lead·x}
                let t = self.lead_coef * ((self.lead - s) * cut).exp() / (s - self.lead);
                (t, self.lead * t)
            }
        };
        let analytic = self.transform(s)?;
        Ok(RoundTrip {
            s,
            numeric: body + tail,
            analytic,
            measure_numeric: self.at_zero + dbody + dtail,
            measure_analytic: s * analytic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExpJump, Jumps};

    fn std_bm() -> LevyModel {
        LevyModel::new(2f64.sqrt(), 0.0, Jumps::None).unwrap()
    }

    fn cl_exp() -> LevyModel {
        LevyModel::with_drift(0.0, 2.0, Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 1.0 }])).unwrap()
    }

    #[test]
    fn brownian_scale_is_sinh() {
        let w = build_scale(&std_bm(), 1.0, 0.0).unwrap();
        assert_eq!(w.backend(), Backend::ClosedForm);
        assert_eq!(w.process(), ProcessTag::X);
        assert!((w.w(1.0) - 1f64.sinh()).abs() < 1e-14);
        assert!((w.w(1.0) - 1.175201).abs() < 1e-6);
        assert_eq!(w.w(-3.0), 0.0);
        assert_eq!(w.w(0.0), 0.0);
        assert!((w.w_prime(1.0).unwrap() - 1f64.cosh()).abs() < 1e-14);
        assert!((w.w_prime(0.5).unwrap() - 1.127626).abs() < 1e-6);
    }

    #[test]
    fn tilted_brownian_scale() {
        let w = build_scale(&std_bm(), 1.0, 0.5).unwrap();
        assert_eq!(w.process(), ProcessTag::Y);
        let (r1, r2) = ((0.5 + 4.25f64.sqrt()) / 2.0, (0.5 - 4.25f64.sqrt()) / 2.0);
        let exact = ((r1 * 1.0).exp() - (r2 * 1.0).exp()) / (r1 - r2);
        assert!((w.w(1.0) - exact).abs() < 1e-14);
        assert!((w.w(1.0) - 1.523795).abs() < 1e-6);
    }

    #[test]
    fn bounded_variation_value_at_zero() {
        let w = build_scale(&cl_exp(), 1.0, 0.0).unwrap();
        assert_eq!(w.w(0.0), 0.5);
        assert_eq!(w.value_at_zero(), 0.5);
        // the exponential sum agrees with the limit
        assert!((w.w(1e-12) - 0.5).abs() < 1e-11);
        let wy = build_scale(&cl_exp(), 1.0, 0.5).unwrap();
        assert_eq!(wy.w(0.0), 1.0 / 1.5);
    }

    #[test]
    fn w_prime_rejects_non_positive() {
        let w = build_scale(&std_bm(), 1.0, 0.0).unwrap();
        assert!(matches!(w.w_prime(0.0), Err(Error::Domain { .. })));
        assert!(matches!(w.w_prime(-1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn roundtrip_examples() {
        let w = build_scale(&std_bm(), 1.0, 0.0).unwrap();
        let r = w.laplace_roundtrip(2.0).unwrap();
        assert!((r.analytic - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.numeric - 1.0 / 3.0).abs() < 1e-8);
        let r = w.laplace_roundtrip(1.5).unwrap();
        assert!((r.analytic - 0.8).abs() < 1e-15);
        assert!((r.numeric - 0.8).abs() < 1e-8);

        let w = build_scale(&cl_exp(), 1.0, 0.0).unwrap();
        let r = w.laplace_roundtrip(3.0).unwrap();
        assert!((r.measure_analytic - 3.0 / 4.25).abs() < 1e-14);
        assert!((r.measure_numeric - 0.705882).abs() < 1e-6);
        assert!((r.measure_numeric - r.measure_analytic).abs() < 1e-7);
    }

    #[test]
    fn roundtrip_rejects_small_s() {
        let w = build_scale(&std_bm(), 1.0, 0.0).unwrap();
        assert!(matches!(w.laplace_roundtrip(0.9), Err(Error::Domain { .. })));
    }

    #[test]
    fn zero_tilt_matches_x() {
        let a = build_scale(&cl_exp(), 0.7, 0.0).unwrap();
        let b = build_scale_with(&cl_exp(), 0.7, 0.0, BackendChoice::Auto).unwrap();
        for i in 0..50 {
            let x = i as f64 * 0.2;
            assert!((a.w(x) - b.w(x)).abs() <= 1e-12 * a.w(x).abs().max(1.0));
        }
    }

    #[test]
    fn inversion_backend_matches_closed_form() {
        let model = LevyModel::with_drift(
            0.3,
            1.0,
            Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 2.0 }, ExpJump { rate: 0.5, exp_rate: 0.7 }]),
        )
        .unwrap();
        let exact = build_scale(&model, 1.0, 0.4).unwrap();
        let inv = build_scale_with(&model, 1.0, 0.4, BackendChoice::ForceInversion).unwrap();
        assert_eq!(inv.backend(), Backend::LaplaceInversion);
        assert!(inv.inversion_error_estimate() < 1e-7);
        for i in 1..60 {
            let x = i as f64 * 0.13;
            let rel = (exact.w(x) - inv.w(x)).abs() / exact.w(x);
            assert!(rel < 1e-7, "x = {x}: rel {rel:e}");
            let rel = (exact.dw(x) - inv.dw(x)).abs() / exact.dw(x);
            assert!(rel < 1e-6, "x = {x}: derivative rel {rel:e}");
        }
    }
}
