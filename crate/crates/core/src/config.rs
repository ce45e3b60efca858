//! Model files.
//!
//! ```json
//! { "sigma": 1.4142135623730951, "gamma": 0.0, "jumps": "none", "delta": 0.5, "b": 0.0 }
//! ```
//!
//! `jumps` is `"none"` or a list of `{"lambda": .., "rho": ..}` phases of a
//! hyperexponential compound Poisson part. `gamma` is the linear coefficient
//! of the Laplace exponent with small jumps compensated on `(0, 1)`; `drift`
//! may be given instead and is then used as the effective drift directly
//! (for bounded variation, this is `d`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExpJump, Jumps, LevyModel, RefractionParams};

pub const STD_BM: &str = include_str!("../../../presets/std-bm.json");
pub const CL_EXP: &str = include_str!("../../../presets/cl-exp.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJump {
    lambda: f64,
    rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawJumps {
    Keyword(String),
    List(Vec<RawJump>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    sigma: f64,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    drift: Option<f64>,
    jumps: RawJumps,
    delta: f64,
    b: f64,
}

/// A parsed model file. Parameter constraints such as `δ > 0` are checked
/// later by [`crate::model::validate`].
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub model: LevyModel,
    pub params: RefractionParams,
}

impl ModelConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        let field = |name: &str, msg: String| Error::Config(format!("{origin}: field `{name}`: {msg}"));
        let jumps = match raw.jumps {
            RawJumps::Keyword(k) if k == "none" => Jumps::None,
            RawJumps::Keyword(k) => return Err(field("jumps", format!("expected \"none\" or a list, got \"{k}\""))),
            RawJumps::List(list) if list.is_empty() => Jumps::None,
            RawJumps::List(list) => {
                for (i, j) in list.iter().enumerate() {
                    if !(j.lambda > 0.0 && j.lambda.is_finite()) {
                        return Err(field("jumps", format!("entry {i}: lambda must be positive, got {}", j.lambda)));
                    }
                    if !(j.rho > 0.0 && j.rho.is_finite()) {
                        return Err(field("jumps", format!("entry {i}: rho must be positive, got {}", j.rho)));
                    }
                }
                Jumps::HyperExponential(list.iter().map(|j| ExpJump { rate: j.lambda, exp_rate: j.rho }).collect())
            }
        };
        if !(raw.sigma >= 0.0 && raw.sigma.is_finite()) {
            return Err(field("sigma", format!("must be finite and >= 0, got {}", raw.sigma)));
        }
        let model = match (raw.gamma, raw.drift) {
            (Some(g), None) => LevyModel::new(raw.sigma, g, jumps),
            (None, Some(d)) => LevyModel::with_drift(raw.sigma, d, jumps),
            (Some(_), Some(_)) => return Err(field("drift", "give either `gamma` or `drift`, not both".into())),
            (None, None) => return Err(field("gamma", "missing (or give `drift`)".into())),
        }
        .map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        if !raw.b.is_finite() {
            return Err(field("b", format!("must be finite, got {}", raw.b)));
        }
        Ok(ModelConfig { model, params: RefractionParams::new(raw.delta, raw.b) })
    }

    /// Read a model file. The names `std-bm` and `cl-exp` resolve to the
    /// bundled presets when no such file exists.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text, &path.display().to_string()),
            Err(e) => match preset(&path.to_string_lossy()) {
                Some(text) => Self::parse(text, &path.display().to_string()),
                None => Err(Error::Config(format!("cannot read {}: {e}", path.display()))),
            },
        }
    }
}

/// Bundled preset by name, with or without a file extension.
pub fn preset(name: &str) -> Option<&'static str> {
    let stem = Path::new(name).file_stem()?.to_str()?;
    match stem {
        "std-bm" => Some(STD_BM),
        "cl-exp" => Some(CL_EXP),
        _ => None,
    }
}
