//! Potential densities of refracted spectrally negative Lévy processes.
//!
//! For `U_t = X_t - δ ∫_0^t 1{U_s > b} ds` with `X` spectrally negative, the
//! law of `U` at an independent exponential time `e(q)` is computed two ways:
//! from q-scale functions ([`Resolvent::density_scale`]) and from
//! Wiener-Hopf factors ([`Resolvent::density_wh`]). A Monte Carlo simulator
//! ([`mc`]) provides a model-free check of both.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod factors;
pub mod mc;
pub mod model;
pub mod poly;
pub mod quad;
pub mod resolvent;
pub mod roots;
pub mod scale;
pub mod verify;
mod table;

pub use error::{Error, Result};
pub use factors::FactorSet;
pub use model::{validate, ExpJump, JumpVariation, Jumps, LevyModel, RefractionParams, TailMeasure};
pub use resolvent::Resolvent;
pub use roots::{phi_root, varphi_root, RootPair};
pub use scale::{build_scale, Backend, ProcessTag, ScaleEvaluator};
