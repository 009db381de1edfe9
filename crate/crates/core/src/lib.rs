//! Constructive dyadic elimination for fractional parts of linear forms.
//!
//! Given forms `L_n(θ) = a_n·θ + b_n` on `ℝ^d` with non-decreasing norms and
//! a schedule of thresholds `δ_n`, the engine builds nested dyadic cubes on
//! which `‖L_n(θ)‖ >= δ_n` holds for every `n` up to a working depth. All
//! membership decisions use exact rational arithmetic; the measure
//! inequalities that drive the construction are checked at runtime and the
//! result is written as an independently checkable certificate.
//!
//! Modules:
//! - [`numerics`]: exact rationals, outward-rounded intervals, constants.
//! - [`forms`]: linear forms, norms, sequence generators, rescaling.
//! - [`measure`]: bad-set measures, the strip bounds, the cube predicate.
//! - [`engine`]: levels, survivor sets, both constructions, certificates.
//! - [`theorems`]: explicit schedules for the lacunary and sublacunary cases.
//! - [`cli`]: the `dyelim` command line and its file formats.

pub mod cli;
pub mod engine;
pub mod forms;
pub mod measure;
pub mod numerics;
pub mod theorems;

mod error;

pub use error::{Error, Result};
