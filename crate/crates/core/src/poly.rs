//! Real polynomials and their complex roots.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients in increasing degree: `c[0] + c[1] s + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut out = vec![0.0; n];
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.0.get(i).copied().unwrap_or(0.0) + other.0.get(i).copied().unwrap_or(0.0);
        }
        Poly(out)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * k).collect())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and derivative by Horner.
    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.0[..=self.degree()].iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// All complex roots by Aberth-Ehrlich iteration.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.0[n];
        let monic: Vec<f64> = self.0[..=n].iter().map(|c| c / lead).collect();
        let monic = Poly(monic);
        // Initial guesses on a circle of the Cauchy bound radius, rotated off the real axis.
        let radius = 1.0 + monic.0[..n].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64) + 0.4;
                Complex64::from_polar(0.5 * radius, angle)
            })
            .collect();
        let abs_coef: Vec<f64> = monic.0.iter().map(|c| c.abs()).collect();
        let mut done = vec![false; n];
        for _ in 0..500 {
            let mut max_step = 0.0f64;
            for i in 0..n {
                if done[i] {
                    continue;
                }
                let (p, dp) = monic.eval_with_derivative(z[i]);
                // |p| at the rounding level of Horner's scheme
                let floor = 8.0 * f64::EPSILON * abs_coef.iter().rev().fold(0.0, |acc, &c| acc * z[i].norm() + c);
                if p.norm() <= floor {
                    done[i] = true;
                    continue;
                }
                let ratio = p / dp;
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| Complex64::new(1.0, 0.0) / (z[i] - z[j]))
                    .sum();
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                if step.is_finite() {
                    z[i] -= step;
                    max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
                }
            }
            if max_step < 1e-15 || done.iter().all(|&d| d) {
                return Ok(z);
            }
        }
        Err(Error::convergence("polynomial roots", format!("Aberth iteration stalled at degree {n}")))
    }
}
