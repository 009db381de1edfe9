//! Dyadic elimination: level schedules, survivor sets, the single-point
//! driver with its runtime product-bound assertions, good-cube tracking for
//! branching trees, point extraction and certificate checking.

mod certificate;
mod cube;
mod prop1;
mod prop2;
mod schedule;
mod survivors;

use std::fmt;

use num_traits::Signed;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use certificate::{certificate_digest, verify_certificate, Certificate, VerifyCheck, VerifyReport, FORMAT};
pub use cube::DyadicCube;
pub use prop1::{extract_point, run_prop1, Extraction, Prop1Outcome, Prop1Run, Restriction, TraceEntry};
pub use prop2::{run_prop2, Branching, GoodCube, Prop2Outcome};
pub use schedule::{
    condition_report, level_for, prop1_checks, prop2_checks, q_nu, resolve, sigma, ConditionCheck,
    ConditionReport, Factors, MRule, Prop2Schedule, Resolved, Schedule, ValueSeq,
};
pub use survivors::{SurvivorSet, MAX_DEPTH};

use crate::forms::FormSequence;
use crate::numerics::{fmt_rational, int, pow2, ExactRational};
use crate::{Error, Result};

/// A failed condition or runtime assertion with the exact values compared.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: String,
    /// Stage `n` or block index `ν`.
    pub index: usize,
    pub lhs: String,
    pub rhs: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at index {}: lhs {} vs rhs {}",
            self.condition, self.index, self.lhs, self.rhs
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

impl Violation {
    pub fn to_json(&self) -> Value {
        json!({
            "condition": self.condition,
            "index": self.index,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "detail": self.detail,
        })
    }
}

/// Compact JSON with object keys in sorted order.
pub fn canonical_json(v: &Value) -> String {
    // serde_json's default map is ordered by key.
    serde_json::to_string(v).expect("JSON values always serialise")
}

pub fn sha256_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Tuning knobs of the engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    /// Maximum stored entries (rows plus runs) of a survivor set.
    pub cube_budget: u128,
    /// Stop at the first violated condition instead of recording it.
    pub strict: bool,
    /// Extra levels below the final stage for the extracted cube.
    pub depth_bits: u32,
    /// Entry budget for classifying all children of a good cube at once.
    pub classify_budget: u128,
    /// Children classified individually when the budget is exceeded.
    pub sample_children: usize,
    /// Seed for choosing sampled children and reported leaves.
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            cube_budget: 1 << 24,
            strict: true,
            depth_bits: 0,
            classify_budget: 1 << 24,
            sample_children: 16,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn to_json(&self) -> Value {
        json!({
            "cube_budget": self.cube_budget.to_string(),
            "strict": self.strict,
            "depth_bits": self.depth_bits,
            "classify_budget": self.classify_budget.to_string(),
            "sample_children": self.sample_children,
            "seed": self.seed,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainMode {
    /// `θ = ϑ` on the unit cube.
    Unit,
    /// `θ = sϑ` with `s` a power of two making `R̃_1` large enough.
    Rescaled,
    /// `θ = v + rϑ`, a user-chosen target cube.
    Within,
}

/// The affine substitution `θ = v + rϑ`, `ϑ ∈ [0, 1]^d`, and the first
/// stage the construction controls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub mode: DomainMode,
    pub offset: Vec<ExactRational>,
    pub scale: ExactRational,
    pub first: usize,
}

impl Domain {
    pub fn unit(d: usize) -> Self {
        Self {
            mode: DomainMode::Unit,
            offset: vec![int(0); d],
            scale: int(1),
            first: 1,
        }
    }

    /// Picks the substitution: the unit cube when `R_1 >= 2^{|λ|} d^{1/p}`,
    /// otherwise the smallest power-of-two scale fixing it; with a target
    /// cube, the first stage `n_0` with `r R_{n_0} >= 2^{|λ|} d^{1/p}`.
    pub fn choose(
        seq: &FormSequence,
        f: &Factors,
        within: Option<(Vec<ExactRational>, ExactRational)>,
    ) -> Result<Self> {
        if seq.is_empty() {
            return Ok(Self::unit(seq.dim()));
        }
        match within {
            Some((v, r)) => {
                if v.len() != seq.dim() {
                    return Err(Error::Dimension {
                        expected: seq.dim(),
                        got: v.len(),
                    });
                }
                if !r.is_positive() {
                    return Err(Error::InvalidArgument("target cube side must be positive".into()));
                }
                let first = (1..=seq.len())
                    .find(|&n| seq.norm(n).scale(&r).certainly_ge(&f.scale_floor))
                    .ok_or_else(|| {
                        Error::InvalidArgument(
                            "no stage reaches r R_n >= 2^|lambda| d^(1/p) inside the sequence".into(),
                        )
                    })?;
                Ok(Self {
                    mode: DomainMode::Within,
                    offset: v,
                    scale: r,
                    first,
                })
            }
            None => {
                let r1 = seq.norm(1);
                if r1.certainly_ge(&f.scale_floor) {
                    return Ok(Self::unit(seq.dim()));
                }
                let mut e = 1i64;
                while !r1.scale(&pow2(e)).certainly_ge(&f.scale_floor) {
                    e += 1;
                    if e > 4096 {
                        return Err(Error::PrecisionExhausted(
                            "could not certify a rescaling factor".into(),
                        ));
                    }
                }
                Ok(Self {
                    mode: DomainMode::Rescaled,
                    offset: vec![int(0); seq.dim()],
                    scale: pow2(e),
                    first: 1,
                })
            }
        }
    }

    /// Working sequence `L̃_n(ϑ) = L_{n+first−1}(v + rϑ)`.
    pub fn work_sequence(&self, seq: &FormSequence) -> Result<FormSequence> {
        Ok(seq.rescale(&self.offset, &self.scale)?.tail(self.first))
    }

    /// Image of a working-space cube in original coordinates.
    pub fn to_original(&self, cube: &DyadicCube) -> (Vec<ExactRational>, Vec<ExactRational>) {
        let (lo, hi) = cube.bounds();
        let map = |x: Vec<ExactRational>| -> Vec<ExactRational> {
            x.iter()
                .zip(&self.offset)
                .map(|(t, v)| v + &self.scale * t)
                .collect()
        };
        (map(lo), map(hi))
    }

    pub fn point_to_original(&self, p: &[ExactRational]) -> Vec<ExactRational> {
        p.iter()
            .zip(&self.offset)
            .map(|(t, v)| v + &self.scale * t)
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "mode": match self.mode {
                DomainMode::Unit => "unit",
                DomainMode::Rescaled => "rescaled",
                DomainMode::Within => "within",
            },
            "offset": self.offset.iter().map(fmt_rational).collect::<Vec<_>>(),
            "scale": fmt_rational(&self.scale),
            "first": self.first,
        })
    }
}
