//! Monte Carlo for `U_t = X_t - δ ∫_0^t 1{U_s > b} ds`.
//!
//! Explicit Euler steps with the threshold indicator taken at the left
//! endpoint. The Gaussian part uses one normal draw per step; jumps of the
//! hyperexponential compound Poisson part are placed exactly, with arrival
//! times from exponential waiting times. Each path owns a ChaCha stream
//! keyed by `(seed, path index)`, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate, ExpJump, Jumps, LevyModel, RefractionParams};

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub step_h: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub bin_width: f64,
}

impl SimConfig {
    /// `h = 1e-3`, `2·10⁵` paths, bins of width 0.1.
    pub fn acceptance(seed: u64) -> Self {
        SimConfig { step_h: 1e-3, n_paths: 200_000, seed, bin_width: 0.1 }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.step_h > 0.0 && self.step_h <= 1e-2) {
            return Err(Error::Config(format!("step_h must lie in (0, 1e-2], got {}", self.step_h)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::Config(format!("bin_width must be positive, got {}", self.bin_width)));
        }
        Ok(())
    }
}

/// Jump part prepared for sampling.
struct JumpSampler {
    total_rate: f64,
    /// Cumulative phase probabilities and their size laws.
    phases: Vec<(f64, Exp<f64>)>,
}

impl JumpSampler {
    fn new(model: &LevyModel) -> Result<Option<Self>> {
        let phases: &[ExpJump] = match model.jumps() {
            Jumps::None => return Ok(None),
            Jumps::HyperExponential(p) => p,
            Jumps::Tail(_) => {
                return Err(Error::Capability("simulation supports only no jumps or hyperexponential jumps".into()));
            }
        };
        let total_rate: f64 = phases.iter().map(|j| j.rate).sum();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(phases.len());
        for j in phases {
            acc += j.rate / total_rate;
            out.push((acc, Exp::new(j.exp_rate).map_err(|e| Error::Config(e.to_string()))?));
        }
        Ok(Some(JumpSampler { total_rate, phases: out }))
    }

    fn waiting_time<R: Rng>(&self, rng: &mut R) -> f64 {
        -(1.0 - rng.random::<f64>()).ln() / self.total_rate
    }

    fn size<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let (_, law) = self.phases.iter().find(|(c, _)| u < *c).unwrap_or(self.phases.last().expect("non-empty"));
        law.sample(rng)
    }
}

struct Stepper {
    drift: f64,
    sigma: f64,
    delta: f64,
    b: f64,
    h: f64,
    jumps: Option<JumpSampler>,
}

impl Stepper {
    fn new(model: &LevyModel, params: &RefractionParams, h: f64) -> Result<Self> {
        Ok(Stepper {
            drift: model.effective_drift(),
            sigma: model.sigma(),
            delta: params.delta,
            b: params.b,
            h,
            jumps: JumpSampler::new(model)?,
        })
    }

    fn run<R: Rng>(&self, x: f64, horizon: f64, rng: &mut R) -> f64 {
        let mut u = x;
        let mut t = 0.0;
        let mut next_jump = match &self.jumps {
            Some(j) => j.waiting_time(rng),
            None => f64::INFINITY,
        };
        while t < horizon {
            let dt = self.h.min(horizon - t);
            let refract = if u > self.b { self.delta } else { 0.0 };
            let mut du = (self.drift - refract) * dt;
            if self.sigma > 0.0 {
                let n: f64 = StandardNormal.sample(rng);
                du += self.sigma * dt.sqrt() * n;
            }
            let end = t + dt;
            if let Some(j) = &self.jumps {
                while next_jump <= end {
                    du -= j.size(rng);
                    next_jump += j.waiting_time(rng);
                }
            }
            u += du;
            t = end;
        }
        u
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `U_T` for one path started at `x`.
pub fn simulate_path<R: Rng>(
    model: &LevyModel,
    params: &RefractionParams,
    x: f64,
    horizon: f64,
    step_h: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::domain("simulate_path", format!("horizon must be > 0, got {horizon}")));
    }
    if !(step_h > 0.0) {
        return Err(Error::domain("simulate_path", format!("step must be > 0, got {step_h}")));
    }
    Ok(Stepper::new(model, params, step_h)?.run(x, horizon, rng))
}

/// Terminal values at a fixed horizon, one stream per path.
pub fn sample_fixed_horizon(
    model: &LevyModel,
    params: &RefractionParams,
    x: f64,
    horizon: f64,
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    cfg.check()?;
    let stepper = Stepper::new(model, params, cfg.step_h)?;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| stepper.run(x, horizon, &mut path_rng(cfg.seed, i)))
        .collect())
}

/// Samples of `U_{e(q)}` with `e(q)` drawn per path by inverse transform.
pub fn sample_terminal(
    model: &LevyModel,
    params: &RefractionParams,
    x: f64,
    q: f64,
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    if !(q > 0.0) {
        return Err(Error::domain("sample_terminal", format!("q must be > 0, got {q}")));
    }
    cfg.check()?;
    // δ = 0 is a legitimate control run here, so only the BV drift condition is enforced
    if params.delta > 0.0 {
        validate(model, params).into_result()?;
    }
    let stepper = Stepper::new(model, params, cfg.step_h)?;
    let out: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let horizon = -(1.0 - rng.random::<f64>()).ln() / q;
            stepper.run(x, horizon, &mut rng)
        })
        .collect();
    if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Consistency(format!("path {bad} produced a non-finite value")));
    }
    Ok(out)
}

/// Histogram of samples on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDensity {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_total: u64,
    /// Samples outside `[lo, hi)`.
    pub below: u64,
    pub above: u64,
}

impl EmpiricalDensity {
    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(hi > lo) || !(width > 0.0) {
            return Err(Error::domain("histogram", format!("need lo < hi and width > 0, got [{lo}, {hi}] width {width}")));
        }
        let n_bins = ((hi - lo) / width).round().max(1.0) as usize;
        let edges: Vec<f64> = (0..=n_bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0u64; n_bins];
        let (mut below, mut above) = (0, 0);
        for &s in samples {
            if s < lo {
                below += 1;
            } else if s >= edges[n_bins] {
                above += 1;
            } else {
                let mut k = (((s - lo) / width).floor() as usize).min(n_bins - 1);
                // the division can land one bin off at an edge
                if s < edges[k] {
                    k -= 1;
                } else if s >= edges[k + 1] && k + 1 < n_bins {
                    k += 1;
                }
                counts[k] += 1;
            }
        }
        Ok(Self::from_counts(edges, counts, below, above))
    }

    pub fn from_counts(edges: Vec<f64>, counts: Vec<u64>, below: u64, above: u64) -> Self {
        let n_total = counts.iter().sum::<u64>() + below + above;
        let n = n_total as f64;
        let (density, std_err) = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, e)| {
                let w = e[1] - e[0];
                let p = c as f64 / n;
                (p / w, (p * (1.0 - p) / n).sqrt() / w)
            })
            .unzip();
        EmpiricalDensity { edges, counts, density, std_err, n_total, below, above }
    }

    pub fn mean_of(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }
}

/// Per-bin z-scores of a histogram against analytic bin masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZReport {
    pub z: Vec<f64>,
    /// Bins with expected count below 5 are skipped.
    pub skipped: usize,
    pub compared: usize,
    pub max_abs_z: f64,
    pub within_2: f64,
    pub within_3: f64,
    pub within_4: f64,
}

/// `z = (count/n - p) / sqrt(p(1-p)/n)` per bin, with `p` the analytic bin mass.
pub fn compare_to_density(emp: &EmpiricalDensity, bin_mass: &[f64]) -> Result<ZReport> {
    if bin_mass.len() != emp.counts.len() {
        return Err(Error::domain(
            "compare_to_density",
            format!("{} bins against {} analytic masses", emp.counts.len(), bin_mass.len()),
        ));
    }
    let n = emp.n_total as f64;
    let mut z = Vec::with_capacity(bin_mass.len());
    let mut skipped = 0;
    for (&c, &p) in emp.counts.iter().zip(bin_mass) {
        if n * p < 5.0 {
            skipped += 1;
            z.push(f64::NAN);
            continue;
        }
        z.push((c as f64 / n - p) / (p * (1.0 - p) / n).sqrt());
    }
    let live: Vec<f64> = z.iter().copied().filter(|v| v.is_finite()).collect();
    let frac = |k: f64| {
        if live.is_empty() {
            0.0
        } else {
            live.iter().filter(|v| v.abs() <= k).count() as f64 / live.len() as f64
        }
    };
    Ok(ZReport {
        skipped,
        compared: live.len(),
        max_abs_z: live.iter().fold(0.0, |m, v| m.max(v.abs())),
        within_2: frac(2.0),
        within_3: frac(3.0),
        within_4: frac(4.0),
        z,
    })
}
