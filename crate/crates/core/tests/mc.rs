use refracted::mc::{compare_to_density, sample_fixed_horizon, sample_terminal, EmpiricalDensity, SimConfig};
use refracted::quad::{geometric_breaks, kronrod_split};
use refracted::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn std_bm() -> LevyModel {
    LevyModel::new(2f64.sqrt(), 0.0, Jumps::None).unwrap()
}

fn cl_exp() -> LevyModel {
    LevyModel::with_drift(0.0, 2.0, Jumps::HyperExponential(vec![ExpJump { rate: 1.0, exp_rate: 1.0 }])).unwrap()
}

fn cfg(step_h: f64, n_paths: usize, seed: u64) -> SimConfig {
    SimConfig { step_h, n_paths, seed, bin_width: 0.1 }
}

/// Asymptotic Kolmogorov tail `P(K > λ)` with the Stephens correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn brownian_terminal_law_passes_ks() {
    // δ = 0: X_1 ~ N(0, σ²) exactly, whatever the step
    let mut s = sample_fixed_horizon(&std_bm(), &RefractionParams::new(0.0, 0.0), 0.0, 1.0, &cfg(1e-2, 100_000, 3)).unwrap();
    s.sort_by(f64::total_cmp);
    let law = Normal::new(0.0, 2f64.sqrt()).unwrap();
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = law.cdf(v);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, s.len());
    assert!(p > 0.01, "D = {d}, p = {p}");
}

#[test]
fn unrefracted_mean_matches_drift() {
    // E X_{e(q)} = x + ψ'(0)/q and ψ'(0) = 2 - 1 = 1
    let x = 0.3;
    let s = sample_terminal(&cl_exp(), &RefractionParams::new(0.0, 0.0), x, 1.0, &cfg(1e-2, 100_000, 11)).unwrap();
    let (mean, se) = EmpiricalDensity::mean_of(&s);
    assert!((mean - (x + 1.0)).abs() < 4.0 * se, "mean {mean} se {se}");
}

#[test]
fn refraction_lowers_every_path() {
    let c = cfg(1e-3, 2_000, 5);
    let free = sample_terminal(&cl_exp(), &RefractionParams::new(0.0, 0.0), 1.0, 1.0, &c).unwrap();
    let bent = sample_terminal(&cl_exp(), &RefractionParams::new(0.5, 0.0), 1.0, 1.0, &c).unwrap();
    assert!(free.iter().zip(&bent).all(|(f, b)| b <= f));
    assert!(EmpiricalDensity::mean_of(&bent).0 < EmpiricalDensity::mean_of(&free).0 - 0.1);
}

#[test]
fn step_bias_stays_within_noise() {
    let (m, p) = (std_bm(), RefractionParams::new(0.5, 0.0));
    let res = Resolvent::new(&m, &p, 1.0).unwrap();
    let breaks = geometric_breaks(&[0.0]);
    let above = kronrod_split(|y| res.density_wh(0.0, y).unwrap(), 0.0, 60.0, &breaks, 1e-12, 1e-10).unwrap();
    let mean = kronrod_split(|y| y * res.density_wh(0.0, y).unwrap(), -60.0, 60.0, &breaks, 1e-12, 1e-10).unwrap();
    let mut max_z = Vec::new();
    for h in [4e-3, 2e-3, 1e-3] {
        let s = sample_terminal(&m, &p, 0.0, 1.0, &cfg(h, 100_000, 7)).unwrap();
        let emp = EmpiricalDensity::from_samples(&s, -6.0, 6.0, 0.1).unwrap();
        let z = compare_to_density(&emp, &res.bin_masses(0.0, &emp.edges).unwrap()).unwrap();
        assert!(z.within_4 >= 0.95, "h {h}: {z:?}");
        max_z.push(z.max_abs_z);
        let n = s.len() as f64;
        let f = s.iter().filter(|&&v| v > 0.0).count() as f64 / n;
        let se = (f * (1.0 - f) / n).sqrt();
        assert!((f - above).abs() < 4.0 * se, "h {h}: P(U > b) {f} against {above}");
        let (mu, se) = EmpiricalDensity::mean_of(&s);
        assert!((mu - mean).abs() < 4.0 * se, "h {h}: mean {mu} against {mean}");
    }
    // the largest of ~120 |z| fluctuates by about one unit between runs
    assert!(max_z[2] <= max_z[0] + 1.0, "max |z| by step: {max_z:?}");
}

#[test]
fn heavy_jumps_stay_finite() {
    let m = LevyModel::new(0.3, 5.0, Jumps::HyperExponential(vec![ExpJump { rate: 20.0, exp_rate: 0.05 }])).unwrap();
    let s = sample_terminal(&m, &RefractionParams::new(1.0, 0.0), 0.0, 0.1, &cfg(1e-2, 2_000, 9)).unwrap();
    assert!(s.iter().all(|v| v.is_finite()));
}
