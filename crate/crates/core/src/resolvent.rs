//! The law of `U_{e(q)}` started at `x`: the density
//! `y ↦ q E_x[∫_0^∞ e^{-qt} 1{U_t ∈ dy} dt] / dy`.
//!
//! Route A evaluates the scale-function formulas. Route B evaluates the
//! Wiener-Hopf convolution
//!
//! * `y ≥ b`: `(F1(0)+1) K_q(y-x) + ∫_{b-x}^{y-x} F1'(y-x-z) K_q(z) dz`,
//! * `y < b`: `(F2(0)+1) K_q(y-x) - ∫_{y-x}^{b-x} F2'(y-x-z) K_q(z) dz`.
//!
//! Both treat the density as right-continuous in `y`: at `y = x` the terms
//! `W(x-y)`, `𝕎(x-y)` take the value 0, matching `K_q(0)` from the
//! right-hand formula. For bounded-variation `X` the density jumps there.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::model::{LevyModel, RefractionParams};
use crate::quad;
use crate::scale::{Backend, BackendChoice};

const ABS: f64 = 1e-12;
const REL: f64 = 1e-10;
/// Largest rounding error tolerated in the scale-function route, as
/// `ε · (largest term)`. Its terms grow like `e^{Φ(x-y)}` and `e^{φ(x-b)}`
/// while the density stays bounded.
const CANCELLATION_LIMIT: f64 = 1e-9;

/// Which formula(s) to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Scale,
    WienerHopf,
    Both,
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale" => Ok(Route::Scale),
            "wiener-hopf" | "wh" => Ok(Route::WienerHopf),
            "both" => Ok(Route::Both),
            other => Err(Error::Config(format!("unknown route `{other}` (expected scale, wiener-hopf or both)"))),
        }
    }
}

/// Model, refraction parameters and `q`, with everything both routes need.
#[derive(Debug, Clone)]
pub struct Resolvent {
    fs: FactorSet,
    b: f64,
    /// `F2(0) + 1`, from the numerical `F2`.
    f2_at_zero_plus_one: f64,
}

/// A density query: start point and route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventQuery {
    pub x: f64,
    pub route: Route,
}

/// Densities on a grid of `y` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub x: f64,
    pub b: f64,
    pub q: f64,
    pub route: Route,
    pub y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_scale: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_wh: Option<Vec<f64>>,
    /// Max `|scale - wh|` over the grid when both routes ran.
    pub route_gap: Option<f64>,
    /// Mass over the grid range plus tail corrections.
    pub mass: f64,
    /// `|mass - 1|`.
    pub normalization_defect: f64,
    /// Right limit minus left limit of the density at `b`.
    pub threshold_gap: f64,
}

impl DensityGrid {
    /// Route-A values if present, else route B.
    pub fn primary(&self) -> &[f64] {
        self.density_scale.as_deref().or(self.density_wh.as_deref()).expect("at least one route is evaluated")
    }
}

impl Resolvent {
    pub fn new(model: &LevyModel, params: &RefractionParams, q: f64) -> Result<Self> {
        Self::from_factors(FactorSet::new(model, params, q)?, params.b)
    }

    pub fn with_backend(model: &LevyModel, params: &RefractionParams, q: f64, choice: BackendChoice) -> Result<Self> {
        Self::from_factors(FactorSet::with_backend(model, params, q, choice)?, params.b)
    }

    pub fn from_factors(fs: FactorSet, b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::Validation(format!("threshold b must be finite, got {b}")));
        }
        let f2_at_zero_plus_one = fs.f2(0.0)? + 1.0;
        Ok(Resolvent { fs, b, f2_at_zero_plus_one })
    }

    pub fn factors(&self) -> &FactorSet {
        &self.fs
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn q(&self) -> f64 {
        self.fs.q()
    }

    /// Backends of the two scale functions.
    pub fn backends(&self) -> (Backend, Backend) {
        (self.fs.scale_x().backend(), self.fs.scale_y().backend())
    }

    /// Coarser of the two route-agreement tolerances that apply.
    pub fn agreement_tolerance(&self) -> f64 {
        match self.backends() {
            (Backend::ClosedForm, Backend::ClosedForm) => 1e-6,
            _ => 1e-4,
        }
    }

    /// `e^{Φ(x-b)} (1 + δΦ ∫_0^{x-b} e^{-Φt} 𝕎(t) dt)`; the integral only for `x > b`.
    fn a_factor(&self, x: f64) -> Result<f64> {
        let (phi, delta, b) = (self.fs.phi(), self.fs.delta(), self.b);
        let lead = (phi * (x - b)).exp();
        if x <= b {
            return Ok(lead);
        }
        let sy = self.fs.scale_y();
        let gap = self.fs.varphi() - phi;
        // e^{-Φt} 𝕎(t) = e^{(φ-Φ)t} e^{-φt} 𝕎(t)
        let integral = quad::kronrod(|t| (gap * t).exp() * sy.tilted(t), 0.0, x - b, ABS, REL)?.value;
        Ok(lead * (1.0 + delta * phi * integral))
    }

    /// Route A: scale-function formulas. Returns [`Error::IllConditioned`]
    /// where the terms are too large for the difference to be meaningful,
    /// typically far below the start point when `Φ` is large.
    pub fn density_scale(&self, x: f64, y: f64) -> Result<f64> {
        let fs = &self.fs;
        let (q, phi, varphi, delta, b) = (fs.q(), fs.phi(), fs.varphi(), fs.delta(), self.b);
        let (sx, sy) = (fs.scale_x(), fs.scale_y());
        let open = |v: f64| if v > 0.0 { v } else { -1.0 };
        let terms: [f64; 3] = if y >= b {
            [
                q * (varphi - phi) / (delta * phi) * (-varphi * (y - b)).exp() * self.a_factor(x).map_err(|e| at(y, overflow(e)))?,
                -q * sy.w(open(x - y)),
                0.0,
            ]
        } else {
            let conv = if x > b {
                quad::kronrod(|z| sy.w(x - z) * sx.dw(z - y), b, x, ABS, REL)
                    .map_err(|e| at(y, overflow(e)))?
                    .value
            } else {
                0.0
            };
            // ∫_0^∞ e^{-φt} W'(t + c) dt with c = b - y > 0, written via h = W' - ΦW
            let c = b - y;
            let j = quad::kronrod_to_infinity(
                |t| {
                    let v = t + c;
                    (-varphi * t).exp() * sx.lead_removed_prime(v)
                        + phi * (phi * c - (varphi - phi) * t).exp() * sx.tilted(v)
                },
                0.0,
                ABS,
                REL,
            )
            .map_err(|e| at(y, overflow(e)))?
            .value;
            [-delta * q * conv, -q * sx.w(open(x - y)), q * (varphi - phi) / phi * j * self.a_factor(x).map_err(|e| at(y, overflow(e)))?]
        };
        let magnitude = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if !(magnitude * f64::EPSILON <= CANCELLATION_LIMIT) {
            return Err(at(y, Error::IllConditioned { magnitude }));
        }
        clip(terms.iter().sum(), y)
    }

    /// Route B: Wiener-Hopf convolution.
    pub fn density_wh(&self, x: f64, y: f64) -> Result<f64> {
        let fs = &self.fs;
        let b = self.b;
        let a = y - x;
        let failure = std::cell::Cell::new(None);
        let keep = |r: Result<f64>| match r {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        };
        let value = if y >= b {
            let head = fs.varphi() / fs.phi() * fs.kq_cached(a).map_err(|e| at(y, e))?;
            // F1'(a - z) K(z) for z ∈ [b - x, a]
            let conv = quad::kronrod_split(
                |z| fs.f1_prime_raw(a - z) * keep(fs.kq_cached(z)),
                b - x,
                a,
                &quad::geometric_breaks(&[0.0, a]),
                ABS,
                REL,
            )
            .map_err(|e| at(y, e))?;
            head + conv
        } else {
            let head = self.f2_at_zero_plus_one * fs.kq_cached(a).map_err(|e| at(y, e))?;
            let conv = quad::kronrod_split(
                |z| keep(fs.f2_prime_cached(a - z)) * keep(fs.kq_cached(z)),
                a,
                b - x,
                &quad::geometric_breaks(&[0.0, a]),
                ABS,
                REL,
            )
            .map_err(|e| at(y, e))?;
            head - conv
        };
        if let Some(e) = failure.take() {
            return Err(at(y, e));
        }
        clip(value, y)
    }

    /// Route A from the left at `b`: formula for `y < b` evaluated at `y = b`.
    fn left_limit_at_b(&self, x: f64) -> Result<f64> {
        let y = self.b - 1e-9 * self.b.abs().max(1.0);
        self.density_scale(x, y)
    }

    /// Evaluate the requested route(s) on `y` (ascending) in parallel.
    pub fn density_grid(&self, query: ResolventQuery, y: &[f64]) -> Result<DensityGrid> {
        if y.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("density_grid", "y grid must be strictly increasing"));
        }
        if y.len() < 2 {
            return Err(Error::domain("density_grid", "y grid needs at least two points"));
        }
        let x = query.x;
        let run = |f: &(dyn Fn(f64) -> Result<f64> + Sync)| -> Result<Vec<f64>> { y.par_iter().map(|&v| f(v)).collect() };
        let scale = match query.route {
            Route::Scale | Route::Both => Some(run(&|v| self.density_scale(x, v))?),
            Route::WienerHopf => None,
        };
        let wh = match query.route {
            Route::WienerHopf | Route::Both => Some(run(&|v| self.density_wh(x, v))?),
            Route::Scale => None,
        };
        let route_gap = match (&scale, &wh) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)),
            _ => None,
        };
        // route B where available: it has no cancellation in the tails
        let density = |v: f64| -> Result<f64> {
            match query.route {
                Route::Scale => self.density_scale(x, v),
                _ => self.density_wh(x, v),
            }
        };
        let mass = self.mass(x, y, &density)?;
        let threshold_gap = match query.route {
            Route::Scale => self.density_scale(x, self.b)? - self.left_limit_at_b(x)?,
            _ => {
                let eps = 1e-9 * self.b.abs().max(1.0);
                self.density_wh(x, self.b)? - self.density_wh(x, self.b - eps)?
            }
        };
        Ok(DensityGrid {
            x,
            b: self.b,
            q: self.q(),
            route: query.route,
            y: y.to_vec(),
            density_scale: scale,
            density_wh: wh,
            route_gap,
            mass,
            normalization_defect: (mass - 1.0).abs(),
            threshold_gap,
        })
    }

    /// Probability of each bin `[e_k, e_{k+1})` from route B, split at `x` and `b`.
    pub fn bin_masses(&self, x: f64, edges: &[f64]) -> Result<Vec<f64>> {
        edges
            .par_windows(2)
            .map(|e| {
                let failure = std::cell::Cell::new(None);
                let m = quad::kronrod_split(
                    |v| match self.density_wh(x, v) {
                        Ok(d) => d,
                        Err(err) => {
                            failure.set(Some(err));
                            0.0
                        }
                    },
                    e[0],
                    e[1],
                    &quad::geometric_breaks(&[x, self.b]),
                    1e-12,
                    1e-9,
                )?;
                match failure.take() {
                    Some(err) => Err(err),
                    None => Ok(m),
                }
            })
            .collect()
    }

    /// Mass on `[y_0, y_n]` by adaptive quadrature split at `x` and `b`,
    /// plus an exact right tail (rate φ beyond `max(x, b)`) and a left tail
    /// from the log-slope over the leftmost tenth of the range.
    fn mass(&self, x: f64, y: &[f64], density: &(dyn Fn(f64) -> Result<f64> + Sync)) -> Result<f64> {
        let (lo, hi) = (y[0], y[y.len() - 1]);
        let breaks = quad::geometric_breaks(&[x, self.b]);
        let failure = std::cell::Cell::new(None);
        let body = quad::kronrod_split(
            |v| match density(v) {
                Ok(d) => d,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            lo,
            hi,
            &breaks,
            1e-10,
            1e-8,
        )?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let right = density(hi)? / self.fs.varphi();
        let left = {
            let probe = lo + 0.1 * (hi - lo);
            let (d0, d1) = (density(lo)?, density(probe)?);
            if d0 > 0.0 && d1 > d0 {
                let rate = (d1 / d0).ln() / (probe - lo);
                d0 / rate
            } else {
                0.0
            }
        };
        Ok(body + right + left)
    }
}

fn at(y: f64, e: Error) -> Error {
    match e {
        Error::AtPoint { .. } => e,
        other => Error::AtPoint { y, source: Box::new(other) },
    }
}

/// Overflowing scale functions in route A mean the terms are beyond any
/// useful cancellation.
fn overflow(e: Error) -> Error {
    match e {
        Error::Quadrature { err, .. } if !err.is_finite() => Error::IllConditioned { magnitude: f64::INFINITY },
        other => other,
    }
}

fn clip(v: f64, y: f64) -> Result<f64> {
    if v < -1e-10 || !v.is_finite() {
        return Err(Error::AtPoint {
            y,
            source: Box::new(Error::Consistency(format!("density {v:e} is negative or not finite"))),
        });
    }
    Ok(v.max(0.0))
}

/// Grid from `lo` to `hi` inclusive with the given step.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi > lo) {
        return Err(Error::domain("grid", format!("need lo < hi and step > 0, got [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}
