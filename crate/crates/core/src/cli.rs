//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 failed
//! verify suite, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::mc::{compare_to_density, sample_terminal, EmpiricalDensity, SimConfig};
use crate::model::validate;
use crate::resolvent::{uniform_grid, Resolvent, ResolventQuery, Route};
use crate::roots::RootPair;
use crate::scale::{build_scale, ScaleEvaluator};
use crate::verify::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "refracted", version, about = "Potential densities of refracted spectrally negative Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// Model file, or a bundled preset name (std-bm, cl-exp).
    #[arg(long)]
    model: PathBuf,
    /// Killing rate of the exponential time.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    q: f64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct Range {
    #[arg(long, allow_negative_numbers = true)]
    lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    hi: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Φ(q), φ(q) and their residuals.
    Roots {
        #[command(flatten)]
        common: Common,
    },
    /// W and 𝕎 on a grid of x ≥ 0 (default [0, 5]).
    Scale {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: Range,
    },
    /// F1, F1', F2, F2', f and the density of K_q (default [-6, 6]).
    Factors {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: Range,
    },
    /// Density of U at e(q) started from x, on a y grid (default [-6, 6]).
    Resolvent {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        x: f64,
        #[arg(long = "y-min", allow_negative_numbers = true, default_value_t = -6.0)]
        y_min: f64,
        #[arg(long = "y-max", allow_negative_numbers = true, default_value_t = 6.0)]
        y_max: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// scale, wiener-hopf (wh) or both.
        #[arg(long, default_value = "both")]
        route: String,
        /// Include wall-clock timings in the JSON summary.
        #[arg(long)]
        timings: bool,
    },
    /// Monte Carlo histogram of U at e(q) started from x.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        x: f64,
        /// Euler step.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Number of paths.
        #[arg(long, default_value_t = 200_000)]
        n: usize,
        /// Bin width.
        #[arg(long, default_value_t = 0.1)]
        bins: f64,
        #[arg(long = "y-min", allow_negative_numbers = true, default_value_t = -6.0)]
        y_min: f64,
        #[arg(long = "y-max", allow_negative_numbers = true, default_value_t = 6.0)]
        y_max: f64,
        /// Compare against analytic bin masses (z-scores).
        #[arg(long)]
        compare: bool,
    },
    /// Run the identity suite.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() || matches!(e, Error::Capability(_)) {
                EXIT_INVALID
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn load(common: &Common) -> Result<ModelConfig> {
    let cfg = ModelConfig::load(&common.model)?;
    validate(&cfg.model, &cfg.params).into_result()?;
    if !(common.q > 0.0 && common.q.is_finite()) {
        return Err(Error::Config(format!("--q must be positive, got {}", common.q)));
    }
    Ok(cfg)
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::Config(format!("cannot write stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Seventeen significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn grid(range: &Range, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let (lo, hi) = (range.lo.unwrap_or(lo), range.hi.unwrap_or(hi));
    uniform_grid(lo, hi, range.step).map_err(|e| Error::Config(e.to_string()))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Roots { common } => {
            let cfg = load(&common)?;
            let r = RootPair::compute(&cfg.model, cfg.params.delta, common.q)?;
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&r),
                Format::Csv => format!(
                    "q,phi,varphi,residual_phi,residual_varphi\n{},{},{},{},{}\n",
                    num(r.q),
                    num(r.phi),
                    num(r.varphi),
                    num(r.residuals[0]),
                    num(r.residuals[1])
                ),
            };
            emit(&common, &text)?;
        }
        Command::Scale { common, range } => {
            let cfg = load(&common)?;
            let xs = grid(&range, 0.0, 5.0)?;
            if xs[0] < 0.0 {
                return Err(Error::Config("scale grid must start at x >= 0".into()));
            }
            let sx = build_scale(&cfg.model, common.q, 0.0)?;
            let sy = build_scale(&cfg.model, common.q, cfg.params.delta)?;
            let rows = |sc: &ScaleEvaluator| -> Vec<(f64, f64, Option<f64>)> {
                xs.iter().map(|&x| (x, sc.w(x), sc.w_prime(x).ok())).collect()
            };
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut s = String::from("x,W,W_prime,backend,q,process_tag\n");
                    for sc in [&sx, &sy] {
                        for (x, w, dw) in rows(sc) {
                            s += &format!("{},{},{},{},{},{}\n", num(x), num(w), cell(dw), sc.backend(), num(common.q), sc.process());
                        }
                    }
                    s
                }
                Format::Json => {
                    let series = |sc: &ScaleEvaluator| {
                        let r = rows(sc);
                        json!({
                            "process_tag": sc.process(),
                            "backend": sc.backend(),
                            "q": common.q,
                            "leading_root": sc.leading_root(),
                            "value_at_zero": sc.value_at_zero(),
                            "warnings": sc.warnings(),
                            "x": r.iter().map(|t| t.0).collect::<Vec<_>>(),
                            "W": r.iter().map(|t| t.1).collect::<Vec<_>>(),
                            "W_prime": r.iter().map(|t| t.2).collect::<Vec<_>>(),
                        })
                    };
                    to_json(&json!([series(&sx), series(&sy)]))
                }
            };
            emit(&common, &text)?;
        }
        Command::Factors { common, range } => {
            let cfg = load(&common)?;
            let xs = grid(&range, -6.0, 6.0)?;
            let fs = FactorSet::new(&cfg.model, &cfg.params, common.q)?;
            let mut rows = Vec::with_capacity(xs.len());
            for &x in &xs {
                let pos = x >= 0.0;
                rows.push([
                    pos.then(|| fs.f1(x)).transpose()?,
                    (x > 0.0).then(|| fs.f1_prime(x)).transpose()?,
                    (x <= 0.0).then(|| fs.f2(x)).transpose()?,
                    (x < 0.0).then(|| fs.f2_prime(x)).transpose()?,
                    (x < 0.0).then(|| fs.f_aux(x)).transpose()?,
                    Some(fs.kq_density(x)?),
                ]);
            }
            let names = ["F1", "F1_prime", "F2", "F2_prime", "f", "Kq_density"];
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut s = format!("x,{}\n", names.join(","));
                    for (x, r) in xs.iter().zip(&rows) {
                        s += &num(*x);
                        for v in r {
                            s.push(',');
                            s += &cell(*v);
                        }
                        s.push('\n');
                    }
                    s
                }
                Format::Json => {
                    let mut obj = serde_json::Map::new();
                    obj.insert("q".into(), json!(common.q));
                    obj.insert("phi".into(), json!(fs.phi()));
                    obj.insert("varphi".into(), json!(fs.varphi()));
                    obj.insert("x".into(), json!(xs));
                    for (k, name) in names.iter().enumerate() {
                        obj.insert((*name).into(), json!(rows.iter().map(|r| r[k]).collect::<Vec<_>>()));
                    }
                    to_json(&obj)
                }
            };
            emit(&common, &text)?;
        }
        Command::Resolvent { common, x, y_min, y_max, step, route, timings } => {
            let cfg = load(&common)?;
            let route: Route = route.parse()?;
            let ys = uniform_grid(y_min, y_max, step).map_err(|e| Error::Config(e.to_string()))?;
            let t0 = Instant::now();
            let res = Resolvent::new(&cfg.model, &cfg.params, common.q)?;
            let t_build = t0.elapsed().as_secs_f64();
            let g = res.density_grid(ResolventQuery { x, route }, &ys)?;
            let t_total = t0.elapsed().as_secs_f64();
            let (bx, by) = res.backends();
            let mut summary = json!({
                "x": g.x,
                "b": g.b,
                "q": g.q,
                "route": g.route,
                "backends": [bx, by],
                "points": g.y.len(),
                "route_gap": g.route_gap,
                "mass": g.mass,
                "normalization_defect": g.normalization_defect,
                "threshold_gap": g.threshold_gap,
            });
            if timings {
                summary["timings"] = json!({ "setup_s": t_build, "total_s": t_total });
            }
            match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut s = String::from("y,density_scale,density_wh,gap\n");
                    for (k, y) in g.y.iter().enumerate() {
                        let a = g.density_scale.as_ref().map(|v| v[k]);
                        let b = g.density_wh.as_ref().map(|v| v[k]);
                        let gap = a.zip(b).map(|(a, b)| (a - b).abs());
                        s += &format!("{},{},{},{}\n", num(*y), cell(a), cell(b), cell(gap));
                    }
                    emit(&common, &s)?;
                    eprint!("{}", to_json(&summary));
                }
                Format::Json => {
                    summary["y"] = json!(g.y);
                    summary["density_scale"] = json!(g.density_scale);
                    summary["density_wh"] = json!(g.density_wh);
                    emit(&common, &to_json(&summary))?;
                }
            }
        }
        Command::Simulate { common, x, h, n, bins, y_min, y_max, compare } => {
            let cfg = load(&common)?;
            let sim = SimConfig { step_h: h, n_paths: n, seed: common.seed, bin_width: bins };
            sim.check()?;
            let samples = sample_terminal(&cfg.model, &cfg.params, x, common.q, &sim)?;
            let emp = EmpiricalDensity::from_samples(&samples, y_min, y_max, bins).map_err(|e| Error::Config(e.to_string()))?;
            let (mean, mean_se) = EmpiricalDensity::mean_of(&samples);
            let (mass, z) = if compare {
                let res = Resolvent::new(&cfg.model, &cfg.params, common.q)?;
                let mass = res.bin_masses(x, &emp.edges)?;
                let z = compare_to_density(&emp, &mass)?;
                (Some(mass), Some(z))
            } else {
                (None, None)
            };
            let report = json!({
                "x": x,
                "q": common.q,
                "config": sim,
                "n_total": emp.n_total,
                "below": emp.below,
                "above": emp.above,
                "mean": mean,
                "mean_se": mean_se,
                "z_report": z.as_ref().map(|z| json!({
                    "compared": z.compared,
                    "skipped": z.skipped,
                    "max_abs_z": z.max_abs_z,
                    "within_2": z.within_2,
                    "within_3": z.within_3,
                    "within_4": z.within_4,
                })),
            });
            match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut s = String::from("lo,hi,count,density,std_err");
                    if compare {
                        s += ",analytic_mass,z";
                    }
                    s.push('\n');
                    for k in 0..emp.counts.len() {
                        s += &format!(
                            "{},{},{},{},{}",
                            num(emp.edges[k]),
                            num(emp.edges[k + 1]),
                            emp.counts[k],
                            num(emp.density[k]),
                            num(emp.std_err[k])
                        );
                        if let (Some(m), Some(z)) = (&mass, &z) {
                            let zk = z.z[k];
                            s += &format!(",{},{}", num(m[k]), if zk.is_finite() { num(zk) } else { String::new() });
                        }
                        s.push('\n');
                    }
                    emit(&common, &s)?;
                    eprint!("{}", to_json(&report));
                }
                Format::Json => {
                    let mut full = report;
                    full["histogram"] = json!(emp);
                    full["analytic_mass"] = json!(mass);
                    emit(&common, &to_json(&full))?;
                }
            }
        }
        Command::Verify { common } => {
            let cfg = load(&common)?;
            let report = verify(&cfg.model, &cfg.params, common.q);
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&report),
                Format::Csv => {
                    let mut s = String::from("name,measured,tolerance,pass\n");
                    for c in &report.checks {
                        s += &format!("{},{},{},{}\n", c.name, num(c.measured), num(c.tolerance), c.pass);
                    }
                    s
                }
            };
            emit(&common, &text)?;
            for c in report.failed() {
                eprintln!("FAIL {}: measured {:e} > tolerance {:e}{}", c.name, c.measured, c.tolerance, c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default());
            }
            if !report.pass {
                return Ok(EXIT_VERIFY);
            }
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_map_to_64() {
        assert_eq!(run(["refracted", "roots", "--model", "std-bm", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["refracted"]), EXIT_USAGE);
        assert_eq!(run(["refracted", "--help"]), EXIT_OK);
    }

    #[test]
    fn number_rendering_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1.280776406404415, -6.0, 1e-300] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
