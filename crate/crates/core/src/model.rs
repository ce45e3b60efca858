//! Spectrally negative Lévy models and refraction parameters.
//!
//! A model is stored in "effective drift" form: the linear coefficient
//! already absorbs the small-jump compensation, so the Laplace exponent is
//! evaluated without splitting the jump integral at 1.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;

const QUAD_ABS: f64 = 1e-12;
const QUAD_REL: f64 = 1e-10;

/// One exponential phase of a hyperexponential jump distribution:
/// jumps arrive at `rate` and have size `Exp(exp_rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpJump {
    pub rate: f64,
    pub exp_rate: f64,
}

/// Whether a tail-specified jump measure has `∫_(0,1) x Π(dx) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpVariation {
    Bounded,
    Unbounded,
}

/// Lévy measure given through its tail `x ↦ Π((x, ∞))`.
#[derive(Clone)]
pub struct TailMeasure {
    tail: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    variation: JumpVariation,
}

impl TailMeasure {
    pub fn new<F>(tail: F, variation: JumpVariation) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        TailMeasure { tail: Arc::new(tail), variation }
    }

    pub fn tail(&self, x: f64) -> f64 {
        (self.tail)(x)
    }

    pub fn variation(&self) -> JumpVariation {
        self.variation
    }
}

impl fmt::Debug for TailMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailMeasure").field("variation", &self.variation).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Jumps {
    None,
    HyperExponential(Vec<ExpJump>),
    Tail(TailMeasure),
}

/// A spectrally negative Lévy process `X`.
#[derive(Debug, Clone)]
pub struct LevyModel {
    sigma: f64,
    drift: f64,
    jumps: Jumps,
    bounded_variation: bool,
}

impl LevyModel {
    /// Build from the usual triplet `(γ, σ, Π)` where `γ` is the linear
    /// coefficient paired with compensation of jumps in `(0, 1)`.
    pub fn new(sigma: f64, gamma: f64, jumps: Jumps) -> Result<Self> {
        check_sigma(sigma)?;
        if !gamma.is_finite() {
            return Err(Error::Validation(format!("gamma must be finite, got {gamma}")));
        }
        let jumps = normalize_jumps(jumps)?;
        let shift = match &jumps {
            Jumps::None => 0.0,
            Jumps::HyperExponential(js) => js
                .iter()
                .map(|j| {
                    let r = j.exp_rate;
                    // ∫_(0,1) x λ r e^{-r x} dx
                    j.rate * (1.0 - (-r).exp() * (1.0 + r)) / r
                })
                .sum(),
            Jumps::Tail(t) => tail_drift_shift(t)?,
        };
        Ok(Self::assemble(sigma, gamma + shift, jumps))
    }

    /// Build from the effective linear coefficient directly. For bounded
    /// variation models this is the drift `d`.
    pub fn with_drift(sigma: f64, drift: f64, jumps: Jumps) -> Result<Self> {
        check_sigma(sigma)?;
        if !drift.is_finite() {
            return Err(Error::Validation(format!("drift must be finite, got {drift}")));
        }
        let jumps = normalize_jumps(jumps)?;
        Ok(Self::assemble(sigma, drift, jumps))
    }

    fn assemble(sigma: f64, drift: f64, jumps: Jumps) -> Self {
        let jumps_bv = match &jumps {
            Jumps::None | Jumps::HyperExponential(_) => true,
            Jumps::Tail(t) => t.variation == JumpVariation::Bounded,
        };
        LevyModel { sigma, drift, bounded_variation: sigma == 0.0 && jumps_bv, jumps }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Effective linear coefficient used by [`LevyModel::laplace_exponent`].
    pub fn effective_drift(&self) -> f64 {
        self.drift
    }

    pub fn jumps(&self) -> &Jumps {
        &self.jumps
    }

    pub fn is_bounded_variation(&self) -> bool {
        self.bounded_variation
    }

    /// True when ψ is a rational function (no jumps or hyperexponential jumps).
    pub fn is_rational(&self) -> bool {
        matches!(self.jumps, Jumps::None | Jumps::HyperExponential(_))
    }

    /// The drift `d = γ + ∫_(0,1) x Π(dx)` of a bounded variation model.
    pub fn drift_d(&self) -> Option<f64> {
        self.bounded_variation.then_some(self.drift)
    }

    /// `ψ(θ) = log E[e^{θ X_1}]` for `θ ≥ 0`.
    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) {
            return Err(Error::domain("laplace_exponent", format!("theta must be >= 0, got {theta}")));
        }
        if theta == 0.0 {
            return Ok(0.0);
        }
        let gauss = 0.5 * self.sigma * self.sigma * theta * theta + self.drift * theta;
        let jump = match &self.jumps {
            Jumps::None => 0.0,
            Jumps::HyperExponential(js) => js.iter().map(|j| j.rate * theta / (j.exp_rate + theta)).sum(),
            Jumps::Tail(t) => tail_jump_term(t, theta)?,
        };
        Ok(gauss - jump)
    }

    /// `ψ'(θ)` for `θ ≥ 0`.
    pub fn laplace_exponent_derivative(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) {
            return Err(Error::domain("laplace_exponent_derivative", format!("theta must be >= 0, got {theta}")));
        }
        let gauss = self.sigma * self.sigma * theta + self.drift;
        let jump = match &self.jumps {
            Jumps::None => 0.0,
            Jumps::HyperExponential(js) => js
                .iter()
                .map(|j| j.rate * j.exp_rate / ((j.exp_rate + theta) * (j.exp_rate + theta)))
                .sum(),
            Jumps::Tail(t) => tail_jump_derivative(t, theta)?,
        };
        Ok(gauss - jump)
    }

    /// ψ continued to complex arguments with positive real part.
    pub fn laplace_exponent_complex(&self, z: Complex64) -> Result<Complex64> {
        let gauss = 0.5 * self.sigma * self.sigma * z * z + self.drift * z;
        let jump = match &self.jumps {
            Jumps::None => Complex64::new(0.0, 0.0),
            Jumps::HyperExponential(js) => js.iter().map(|j| j.rate * z / (j.exp_rate + z)).sum(),
            Jumps::Tail(t) => {
                if !(z.re > 0.0) {
                    return Err(Error::domain(
                        "laplace_exponent_complex",
                        format!("tail-specified jumps need Re z > 0, got {z}"),
                    ));
                }
                tail_jump_term_complex(t, z)?
            }
        };
        Ok(gauss - jump)
    }

    pub(crate) fn hyperexponential_phases(&self) -> Option<&[ExpJump]> {
        match &self.jumps {
            Jumps::HyperExponential(js) => Some(js),
            Jumps::None => Some(&[]),
            Jumps::Tail(_) => None,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Validation(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    Ok(())
}

/// Validate rates and merge phases with equal exponential rates.
fn normalize_jumps(jumps: Jumps) -> Result<Jumps> {
    match jumps {
        Jumps::HyperExponential(js) if js.is_empty() => Ok(Jumps::None),
        Jumps::HyperExponential(js) => {
            let mut merged: Vec<ExpJump> = Vec::with_capacity(js.len());
            for j in js {
                if !(j.rate > 0.0) || !j.rate.is_finite() {
                    return Err(Error::Validation(format!("jump rate lambda must be > 0, got {}", j.rate)));
                }
                if !(j.exp_rate > 0.0) || !j.exp_rate.is_finite() {
                    return Err(Error::Validation(format!("jump size rate rho must be > 0, got {}", j.exp_rate)));
                }
                match merged.iter_mut().find(|m| m.exp_rate == j.exp_rate) {
                    Some(m) => m.rate += j.rate,
                    None => merged.push(j),
                }
            }
            merged.sort_by(|a, b| a.exp_rate.total_cmp(&b.exp_rate));
            Ok(Jumps::HyperExponential(merged))
        }
        other => Ok(other),
    }
}

/// Difference between the effective drift and the compensated γ for a
/// tail-specified measure.
fn tail_drift_shift(t: &TailMeasure) -> Result<f64> {
    let at_one = t.tail(1.0);
    match t.variation {
        // + ∫_(0,1) x Π(dx) = ∫_0^1 Π̄ - Π̄(1)
        JumpVariation::Bounded => {
            let inner = quad::kronrod(|x| t.tail(x), 0.0, 1.0, QUAD_ABS, QUAD_REL)?.value;
            Ok(inner - at_one)
        }
        // - ∫_(1,∞) x Π(dx) = -(Π̄(1) + ∫_1^∞ Π̄)
        JumpVariation::Unbounded => {
            let outer = quad::kronrod_to_infinity(|x| t.tail(x), 1.0, QUAD_ABS, QUAD_REL)?.value;
            Ok(-(at_one + outer))
        }
    }
}

/// The jump contribution subtracted in ψ, written over the scaled variable
/// `y = θx` so the integrand decays like `e^{-y}` regardless of θ.
fn tail_jump_term(t: &TailMeasure, theta: f64) -> Result<f64> {
    match t.variation {
        // ∫(1 - e^{-θx}) Π(dx) = ∫_0^∞ e^{-y} Π̄(y/θ) dy
        JumpVariation::Bounded => {
            let e = quad::kronrod_to_infinity(|y| (-y).exp() * t.tail(y / theta), 0.0, QUAD_ABS, QUAD_REL)?;
            Ok(e.value)
        }
        // ∫(1 - e^{-θx} - θx) Π(dx) = -∫_0^∞ (1 - e^{-y}) Π̄(y/θ) dy
        JumpVariation::Unbounded => {
            let e = quad::kronrod_to_infinity(
                |y| (-y).exp_m1() * t.tail(y / theta),
                0.0,
                QUAD_ABS,
                QUAD_REL,
            )?;
            Ok(e.value)
        }
    }
}

fn tail_jump_derivative(t: &TailMeasure, theta: f64) -> Result<f64> {
    if theta == 0.0 {
        return Err(Error::domain("laplace_exponent_derivative", "tail-specified jumps need theta > 0"));
    }
    // θ ∫ x e^{-θx} Π̄(x) dx, scaled
    let mean = |k: f64| {
        quad::kronrod_to_infinity(|y| (-y).exp() * y * t.tail(y / theta), 0.0, QUAD_ABS, QUAD_REL)
            .map(|e| k * e.value / theta)
    };
    match t.variation {
        JumpVariation::Bounded => {
            let a = quad::kronrod_to_infinity(|y| (-y).exp() * t.tail(y / theta), 0.0, QUAD_ABS, QUAD_REL)?;
            Ok(a.value / theta - mean(1.0)?)
        }
        JumpVariation::Unbounded => {
            let a = quad::kronrod_to_infinity(
                |y| -(-y).exp_m1() * t.tail(y / theta),
                0.0,
                QUAD_ABS,
                QUAD_REL,
            )?;
            Ok(-(a.value / theta) - mean(1.0)?)
        }
    }
}

fn tail_jump_term_complex(t: &TailMeasure, z: Complex64) -> Result<Complex64> {
    // x = y / Re z; oscillation frequency Im z / Re z stays moderate on
    // Bromwich contours.
    let a = z.re;
    let w = z.im / a;
    let kernel = |y: f64| -> Complex64 {
        let e = Complex64::new(-y, -w * y).exp();
        match t.variation {
            JumpVariation::Bounded => e,
            JumpVariation::Unbounded => e - 1.0,
        }
    };
    let re = quad::kronrod_to_infinity(|y| kernel(y).re * t.tail(y / a), 0.0, QUAD_ABS, QUAD_REL)?.value;
    let im = quad::kronrod_to_infinity(|y| kernel(y).im * t.tail(y / a), 0.0, QUAD_ABS, QUAD_REL)?.value;
    // z ∫ e^{-zx} Π̄(x) dx = (z / a) ∫ e^{-(z/a) y} Π̄(y/a) dy
    Ok(z / a * Complex64::new(re, im))
}

/// Refraction rate δ and threshold b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefractionParams {
    pub delta: f64,
    pub b: f64,
}

impl RefractionParams {
    pub fn new(delta: f64, b: f64) -> Self {
        RefractionParams { delta, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveDelta(f64),
    NonFiniteThreshold(f64),
    DriftNotAboveDelta { d: f64, delta: f64 },
    JumpMassOnNonPositive,
    NegativeTail { x: f64, value: f64 },
    NonIntegrableNearZero,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveDelta(d) => write!(f, "δ must be positive (got {d})"),
            Violation::NonFiniteThreshold(b) => write!(f, "threshold b must be finite (got {b})"),
            Violation::DriftNotAboveDelta { d, delta } => {
                write!(f, "bounded variation requires d > δ (d = {d}, δ = {delta})")
            }
            Violation::JumpMassOnNonPositive => write!(f, "Lévy measure charges (-∞, 0]"),
            Violation::NegativeTail { x, value } => {
                write!(f, "Lévy tail must be nonnegative and nonincreasing (Π̄({x}) = {value})")
            }
            Violation::NonIntegrableNearZero => write!(f, "Lévy measure is not integrable against x² ∧ 1 (or x ∧ 1 for bounded variation)"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
            Err(Error::Validation(msgs.join("; ")))
        }
    }
}

/// Check a model against refraction parameters.
pub fn validate(model: &LevyModel, params: &RefractionParams) -> ValidationReport {
    let mut violations = Vec::new();
    if !(params.delta > 0.0) {
        violations.push(Violation::NonPositiveDelta(params.delta));
    }
    if !params.b.is_finite() {
        violations.push(Violation::NonFiniteThreshold(params.b));
    }
    if let Some(d) = model.drift_d() {
        if params.delta > 0.0 && d <= params.delta {
            violations.push(Violation::DriftNotAboveDelta { d, delta: params.delta });
        }
    }
    if let Jumps::Tail(t) = model.jumps() {
        check_tail(t, &mut violations);
    }
    ValidationReport { violations }
}

fn check_tail(t: &TailMeasure, out: &mut Vec<Violation>) {
    // Π̄ must be finite, nonnegative and nonincreasing on (0, ∞); an
    // increasing tail means negative mass, i.e. jumps that are not downward.
    let mut prev = f64::INFINITY;
    for k in -60..=60 {
        let x = 10f64.powf(k as f64 / 10.0);
        let v = t.tail(x);
        if !(v >= 0.0) {
            out.push(Violation::NegativeTail { x, value: v });
            return;
        }
        if v > prev * (1.0 + 1e-12) {
            out.push(Violation::JumpMassOnNonPositive);
            return;
        }
        prev = v;
    }
    let near_zero = match t.variation {
        JumpVariation::Bounded => quad::kronrod(|x| t.tail(x), 0.0, 1.0, QUAD_ABS, QUAD_REL),
        JumpVariation::Unbounded => quad::kronrod(|x| 2.0 * x * t.tail(x), 0.0, 1.0, QUAD_ABS, QUAD_REL),
    };
    if near_zero.is_err() {
        out.push(Violation::NonIntegrableNearZero);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_bm() -> LevyModel {
        LevyModel::new(2f64.sqrt(), 0.0, Jumps::None).unwrap()
    }

    fn cl_exp() -> LevyModel {
        LevyModel::with_drift(0.0, 2.0, Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 1.0 }])).unwrap()
    }

    #[test]
    fn laplace_exponent_examples() {
        assert_eq!(std_bm().laplace_exponent(0.0).unwrap(), 0.0);
        assert!((std_bm().laplace_exponent(2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((cl_exp().laplace_exponent(1.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(cl_exp().laplace_exponent(0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_theta_is_domain_error() {
        assert!(matches!(std_bm().laplace_exponent(-1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn drift_d_examples() {
        assert_eq!(cl_exp().drift_d(), Some(2.0));
        assert_eq!(std_bm().drift_d(), None);
        let drift = LevyModel::new(0.0, 1.0, Jumps::None).unwrap();
        assert_eq!(drift.drift_d(), Some(1.0));
    }

    #[test]
    fn gamma_is_compensated() {
        // d = γ + ∫_(0,1) x e^{-x} dx = γ + 1 - 2/e
        let m = LevyModel::new(0.0, 1.0, Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 1.0 }])).unwrap();
        let expected = 2.0 - 2.0 * (-1f64).exp();
        assert!((m.drift_d().unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&cl_exp(), &RefractionParams::new(0.5, 0.0)).is_valid());
        let r = validate(&cl_exp(), &RefractionParams::new(3.0, 0.0));
        assert_eq!(r.violations, vec![Violation::DriftNotAboveDelta { d: 2.0, delta: 3.0 }]);
        let r = validate(&std_bm(), &RefractionParams::new(-1.0, 0.0));
        assert_eq!(r.violations, vec![Violation::NonPositiveDelta(-1.0)]);
        assert!(r.into_result().unwrap_err().to_string().contains("δ must be positive"));
    }

    #[test]
    fn validate_rejects_bad_tail() {
        let up = LevyModel::with_drift(0.0, 2.0, Jumps::Tail(TailMeasure::new(|x| x, JumpVariation::Bounded))).unwrap();
        let r = validate(&up, &RefractionParams::new(0.5, 0.0));
        assert!(r.violations.contains(&Violation::JumpMassOnNonPositive));

        let heavy = LevyModel::with_drift(
            0.0,
            2.0,
            Jumps::Tail(TailMeasure::new(|x: f64| x.powf(-1.5), JumpVariation::Bounded)),
        )
        .unwrap();
        let r = validate(&heavy, &RefractionParams::new(0.5, 0.0));
        assert!(r.violations.contains(&Violation::NonIntegrableNearZero));
    }

    #[test]
    fn invalid_rates_rejected() {
        let r = LevyModel::new(1.0, 0.0, Jumps::HyperExponential(vec![ExpJump { rate: -1.0, exp_rate: 1.0 }]));
        assert!(matches!(r, Err(Error::Validation(_))));
        assert!(LevyModel::new(-1.0, 0.0, Jumps::None).is_err());
    }

    #[test]
    fn equal_phases_merge() {
        let m = LevyModel::with_drift(
            0.0,
            3.0,
            Jumps::HyperExponential(vec![
                ExpJump { rate: 1.0, exp_rate: 2.0 },
                ExpJump { rate: 0.5, exp_rate: 2.0 },
            ]),
        )
        .unwrap();
        assert_eq!(m.hyperexponential_phases().unwrap(), &[ExpJump { rate: 1.5, exp_rate: 2.0 }]);
    }

    #[test]
    fn complex_matches_real_on_axis() {
        let m = cl_exp();
        for th in [0.3, 1.0, 4.0] {
            let c = m.laplace_exponent_complex(Complex64::new(th, 0.0)).unwrap();
            assert!((c.re - m.laplace_exponent(th).unwrap()).abs() < 1e-14);
            assert_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = LevyModel::new(
            0.7,
            0.3,
            Jumps::HyperExponential(vec![ExpJump { rate: 2.0, exp_rate: 1.5 }, ExpJump { rate: 0.5, exp_rate: 4.0 }]),
        )
        .unwrap();
        for th in [0.1, 1.0, 3.0] {
            let h = 1e-5;
            let fd = (m.laplace_exponent(th + h).unwrap() - m.laplace_exponent(th - h).unwrap()) / (2.0 * h);
            assert!((fd - m.laplace_exponent_derivative(th).unwrap()).abs() < 1e-8);
        }
    }
}
