//! Exponential-sum scale functions for rational Laplace exponents.
//!
//! With hyperexponential jumps, `ψ(s) - tilt·s - q` is a ratio of
//! polynomials whose numerator has simple roots `s_j` in the generic case;
//! then `W(x) = Σ_j e^{s_j x} / f'(s_j)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::poly::Poly;

/// Roots closer than this are treated as repeated.
pub(crate) const ROOT_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct ExpSum {
    /// Leading real root (Φ or φ) and its residue.
    pub lead: f64,
    pub lead_coef: f64,
    /// Remaining real terms `(coef, rate)`.
    pub real: Vec<(f64, f64)>,
    /// One representative of each conjugate pair `(coef, rate)`; counted twice.
    pub complex: Vec<(Complex64, Complex64)>,
}

pub(crate) enum Build {
    Ready(ExpSum),
    /// Near-repeated roots; carries the smallest gap found.
    Degenerate(f64),
}

fn tilted_exponent(model: &LevyModel, tilt: f64, q: f64, z: Complex64) -> (Complex64, Complex64) {
    let s2 = model.sigma() * model.sigma();
    let mut f = 0.5 * s2 * z * z + (model.effective_drift() - tilt) * z - q;
    let mut df = s2 * z + (model.effective_drift() - tilt);
    for j in model.hyperexponential_phases().unwrap_or(&[]) {
        let den = j.exp_rate + z;
        f -= j.rate * z / den;
        df -= j.rate * j.exp_rate / (den * den);
    }
    (f, df)
}

/// Numerator polynomial of `ψ(s) - tilt·s - q` after clearing the poles at `-ρ_i`.
fn numerator(model: &LevyModel, tilt: f64, q: f64) -> Poly {
    let phases = model.hyperexponential_phases().unwrap_or(&[]);
    let s2 = model.sigma() * model.sigma();
    let gauss = Poly(vec![-q, model.effective_drift() - tilt, 0.5 * s2]);
    let all = phases.iter().fold(Poly::constant(1.0), |acc, j| acc.mul(&Poly(vec![j.exp_rate, 1.0])));
    let mut p = gauss.mul(&all);
    for (i, ji) in phases.iter().enumerate() {
        let others = phases
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .fold(Poly::constant(1.0), |acc, (_, j)| acc.mul(&Poly(vec![j.exp_rate, 1.0])));
        p = p.add(&others.mul(&Poly(vec![0.0, -ji.rate])));
    }
    p
}

pub(crate) fn build(model: &LevyModel, tilt: f64, q: f64, lead: f64) -> Result<Build> {
    let p = numerator(model, tilt, q);
    let n_phases = model.hyperexponential_phases().map_or(0, <[_]>::len);
    let expected = n_phases + if model.sigma() > 0.0 { 2 } else { 1 };
    if p.degree() != expected {
        return Err(Error::Validation(format!(
            "scale function needs a positive drift for σ = 0 (effective drift {} vs tilt {tilt})",
            model.effective_drift()
        )));
    }
    let mut roots = p.roots()?;
    for z in roots.iter_mut() {
        // polish on the rational form, which is better conditioned than the expanded polynomial
        for _ in 0..8 {
            let (f, df) = tilted_exponent(model, tilt, q, *z);
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *z -= step;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        }
        if z.im.abs() <= 1e-9 * z.norm().max(1.0) {
            z.im = 0.0;
        }
    }

    let mut gap = f64::INFINITY;
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            gap = gap.min((roots[i] - roots[j]).norm());
        }
    }
    if gap < ROOT_GAP {
        return Ok(Build::Degenerate(gap));
    }

    let lead_idx = roots
        .iter()
        .enumerate()
        .filter(|(_, z)| z.im == 0.0)
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Consistency("no real root for the scale function".into()))?;
    if (roots[lead_idx].re - lead).abs() > 1e-8 * lead.max(1.0) {
        return Err(Error::Consistency(format!(
            "partial-fraction leading root {} disagrees with root finder {lead}",
            roots[lead_idx].re
        )));
    }
    roots.swap_remove(lead_idx);

    let (_, dlead) = tilted_exponent(model, tilt, q, Complex64::new(lead, 0.0));
    let lead_coef = 1.0 / dlead.re;
    let mut real = Vec::new();
    let mut complex = Vec::new();
    for z in roots {
        let (_, df) = tilted_exponent(model, tilt, q, z);
        let c = 1.0 / df;
        if z.im == 0.0 {
            real.push((c.re, z.re));
        } else if z.im > 0.0 {
            complex.push((c, z));
        }
    }
    real.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(Build::Ready(ExpSum { lead, lead_coef, real, complex }))
}

impl ExpSum {
    /// `Σ c_j s_j^k e^{(s_j - shift) x}` over all terms.
    fn moment(&self, x: f64, shift: f64, k: i32, skip_lead: bool) -> f64 {
        let mut v = if skip_lead { 0.0 } else { self.lead_coef * self.lead.powi(k) * ((self.lead - shift) * x).exp() };
        for &(c, s) in &self.real {
            v += c * s.powi(k) * ((s - shift) * x).exp();
        }
        for &(c, s) in &self.complex {
            v += 2.0 * (c * s.powi(k) * ((s - shift) * x).exp()).re;
        }
        v
    }

    pub fn value(&self, x: f64) -> f64 {
        self.moment(x, 0.0, 0, false)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.moment(x, 0.0, 1, false)
    }

    /// `e^{-lead·x} W(x)`.
    pub fn tilted(&self, x: f64) -> f64 {
        self.moment(x, self.lead, 0, false)
    }

    /// `d/dx [e^{-lead·x} W(x)] = Σ_{j ≠ lead} c_j (s_j - lead) e^{(s_j - lead) x}`.
    pub fn tilted_derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for &(c, s) in &self.real {
            v += c * (s - self.lead) * ((s - self.lead) * x).exp();
        }
        for &(c, s) in &self.complex {
            v += 2.0 * (c * (s - self.lead) * ((s - self.lead) * x).exp()).re;
        }
        v
    }

    /// `W'(x) - lead·W(x) = Σ_{j ≠ lead} c_j (s_j - lead) e^{s_j x}`, bounded on `[0, ∞)`.
    pub fn lead_removed_derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for &(c, s) in &self.real {
            v += c * (s - self.lead) * (s * x).exp();
        }
        for &(c, s) in &self.complex {
            v += 2.0 * (c * (s - self.lead) * (s * x).exp()).re;
        }
        v
    }

    /// `Σ_{j ≠ lead} c_j (s_j - lead) g(s_j)`: any linear functional of
    /// `W' - lead·W` that maps `e^{s x}` to `g(s)`.
    pub fn lead_removed_sum(&self, g: impl Fn(Complex64) -> Complex64) -> f64 {
        let mut v = 0.0;
        for &(c, s) in &self.real {
            v += c * (s - self.lead) * g(Complex64::new(s, 0.0)).re;
        }
        for &(c, s) in &self.complex {
            v += 2.0 * (c * (s - self.lead) * g(s)).re;
        }
        v
    }

    /// `∫_X^∞ e^{-s x} W^{(k)}(x) dx` summed term by term, for `k ∈ {0, 1}`.
    pub fn transform_tail(&self, s: f64, from: f64, k: i32) -> f64 {
        let mut v = self.lead_coef * self.lead.powi(k) * ((self.lead - s) * from).exp() / (s - self.lead);
        for &(c, r) in &self.real {
            v += c * r.powi(k) * ((r - s) * from).exp() / (s - r);
        }
        for &(c, r) in &self.complex {
            v += 2.0 * (c * r.powi(k) * ((r - s) * from).exp() / (s - r)).re;
        }
        v
    }

    pub fn rates(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(self.lead, 0.0)];
        out.extend(self.real.iter().map(|&(_, s)| Complex64::new(s, 0.0)));
        for &(_, s) in &self.complex {
            out.push(s);
            out.push(s.conj());
        }
        out
    }
}
