//! The `dyelim` command line.
//!
//! Every document written to stdout is canonical JSON (sorted keys, no
//! whitespace) followed by a newline. Exit codes are a stable contract:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | precision exhausted |
//! | 3 | a condition of the construction failed |
//! | 4 | cube budget exceeded |
//! | 5 | certificate verification failed |
//! | 64 | usage error or malformed input |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{
    canonical_json, condition_report, run_prop1, run_prop2, verify_certificate, Certificate, EngineConfig,
    MRule, Prop2Schedule, Schedule, ValueSeq,
};
use crate::forms::{FormSequence, LinearForm, NormSelector, SequenceSpec};
use crate::measure::{
    cube_strip_bound, exact_bad_measure_1d, mc_bad_measure, BadSetSpec, RationalBox, PRNG_NAME,
};
use crate::numerics::{fmt_rational, int, parse_rational, ExactRational, RealInterval};
use crate::theorems::{
    corollary_family, khintchine_gamma_comparison, theorem1_schedule, theorem2_schedule, theorem3_schedule,
    FamilyKind, Thm3Config,
};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECISION: i32 = 2;
pub const EXIT_CONDITION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable holding the default working precision in bits.
pub const PRECISION_ENV: &str = "DYELIM_PRECISION";
pub const DEFAULT_PRECISION: u32 = 256;
const MIN_PRECISION: u32 = 64;
const MAX_PRECISION: u32 = 1 << 16;

/// Exit code for an engine or parsing error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::PrecisionExhausted(_) => EXIT_PRECISION,
        Error::ConditionViolated(_)
        | Error::SurvivorsEmpty { .. }
        | Error::ScheduleInfeasible { .. }
        | Error::BranchingAbsent { .. } => EXIT_CONDITION,
        Error::BudgetExceeded(_) => EXIT_BUDGET,
        Error::Domain(_)
        | Error::Dimension { .. }
        | Error::InvalidArgument(_)
        | Error::Parse(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_USAGE,
    }
}

fn error_json(e: &Error) -> Value {
    let mut v = json!({
        "status": "error",
        "exit_code": exit_code(e),
        "error": e.to_string(),
    });
    match e {
        Error::ConditionViolated(viol) | Error::SurvivorsEmpty { violation: viol, .. } => {
            v["violation"] = viol.to_json();
        }
        _ => {}
    }
    v
}

#[derive(Parser, Debug)]
#[command(name = "dyelim", version, about = "Dyadic elimination for fractional parts of linear forms")]
struct Cli {
    /// Worker threads for the engine (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Working precision in bits [default: $DYELIM_PRECISION or 256].
    #[arg(long, global = true)]
    precision: Option<u32>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explicit δ and the verified inequality chain of a theorem.
    Bound(BoundArgs),
    /// Run a construction and write its certificate.
    Construct(ConstructArgs),
    /// Re-check a certificate against a sequence spec.
    Verify(VerifyArgs),
    /// Bad-set measure of one form against the strip bound.
    Measure(MeasureArgs),
    /// Evaluate the construction conditions without running it.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// 1, 2 or 3.
    #[arg(long)]
    theorem: u8,
    #[arg(long = "N", default_value_t = 1)]
    n: i64,
    #[arg(long, default_value_t = 1)]
    d: i64,
    /// Also list δ(t)·t·ln(t+1) for t = 1..=T (theorem 1).
    #[arg(long)]
    table: Option<u64>,
    #[command(flatten)]
    family: FamilyArgs,
    /// Sequence spec (path or inline JSON), needed for theorem 3.
    #[arg(long)]
    sequence: Option<String>,
}

#[derive(Args, Debug, Default)]
struct FamilyArgs {
    /// cor1 | cor2 | cor3 | custom.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    beta1: Option<String>,
    /// The constant A of cor3.
    #[arg(long = "A")]
    a_const: Option<String>,
    /// Exponent of x in f (custom).
    #[arg(long)]
    power: Option<String>,
    /// f carries ln(x+1) (custom).
    #[arg(long)]
    log: bool,
    /// h(x) = x + c f(x) (custom).
    #[arg(long)]
    h_additive: Option<String>,
    /// h(x) = x^C (custom).
    #[arg(long)]
    h_power: Option<String>,
    /// Override the computed C.
    #[arg(long = "C")]
    c: Option<String>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n1_max: Option<usize>,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    /// RunConfig JSON file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sequence spec (path or inline JSON).
    #[arg(long)]
    sequence: Option<String>,
    /// theorem1 | theorem2 | theorem3.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long = "N")]
    n: Option<u64>,
    /// prop1 | prop2.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    nu_max: Option<usize>,
    #[arg(long)]
    depth_bits: Option<u32>,
    #[arg(long)]
    cube_budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record violated conditions and continue instead of stopping.
    #[arg(long)]
    no_strict: bool,
    /// Target cube, e.g. `--within v=1/4 r=1/4` (v is comma separated for d > 1).
    #[arg(long, num_args = 1..=2)]
    within: Vec<String>,
    #[command(flatten)]
    family: FamilyArgs,
    /// Certificate output path; without it the certificate is embedded in the summary.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    certificate: PathBuf,
    /// Sequence spec (path or inline JSON).
    #[arg(long)]
    sequence: String,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Coefficients, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    b: String,
    #[arg(long)]
    eps: String,
    #[arg(long, default_value = "inf")]
    p: String,
    /// Lower corner of the cube, comma separated [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    v: Option<String>,
    /// Side of the cube.
    #[arg(long, default_value = "1")]
    r: String,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sequence: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long = "N")]
    n: Option<u64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    nu_max: Option<usize>,
    #[command(flatten)]
    family: FamilyArgs,
}

/// Construction input. Rationals are strings such as `"3/7"`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sequence: SequenceSource,
    pub schedule: ScheduleSource,
    #[serde(default)]
    pub mode: Mode,
    /// Last stage for `prop1` (defaults to the sequence length).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Deepest block for `prop2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_max: Option<usize>,
    #[serde(default)]
    pub depth_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube_budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify_budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_children: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
    #[serde(default = "yes")]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within: Option<Within>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SequenceSource {
    Path(String),
    Inline(SequenceSpec),
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Prop1,
    Prop2,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Within {
    pub v: Vec<String>,
    pub r: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSource {
    Theorem1 {
        #[serde(rename = "N", default = "one")]
        n: u64,
    },
    Theorem2 {
        #[serde(rename = "N", default = "one")]
        n: u64,
    },
    Theorem3 {
        family: FamilySpec,
        #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
        c: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n1: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n1_max: Option<usize>,
    },
    Explicit {
        delta: ValueSpec,
        #[serde(default = "zero_string")]
        lambda: String,
        x: ValueSpec,
        #[serde(default = "default_m")]
        m: MSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prop2: Option<ExplicitProp2>,
    },
}

fn one() -> u64 {
    1
}

fn zero_string() -> String {
    "0".into()
}

fn default_m() -> MSpec {
    MSpec::Named("default".into())
}

/// A constant rational or a list indexed from 1.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ValueSpec {
    Constant(String),
    List(Vec<String>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MSpec {
    /// Only `"default"`.
    Named(String),
    Lag { lag: usize },
    List(Vec<usize>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExplicitProp2 {
    pub n: Vec<usize>,
    pub eta: ValueSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    Cor1 {
        beta: String,
        gamma: String,
    },
    Cor2 {
        gamma: String,
    },
    Cor3 {
        gamma: String,
        beta: String,
        beta1: String,
        #[serde(rename = "A")]
        a: String,
    },
    Custom {
        power: String,
        #[serde(default)]
        log: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_additive: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_power: Option<String>,
    },
}

impl ValueSpec {
    fn resolve(&self) -> Result<ValueSeq> {
        Ok(match self {
            Self::Constant(s) => ValueSeq::Constant(parse_rational(s)?),
            Self::List(v) => ValueSeq::List(v.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?),
        })
    }
}

impl MSpec {
    fn resolve(&self) -> Result<MRule> {
        match self {
            Self::Named(s) if s == "default" => Ok(MRule::Default),
            Self::Named(s) => Err(Error::Parse(format!("unknown m rule {s:?}"))),
            Self::Lag { lag } => Ok(MRule::Lag(*lag)),
            Self::List(v) => Ok(MRule::List(v.clone())),
        }
    }
}

impl FamilySpec {
    fn kind(&self) -> Result<FamilyKind> {
        let p = |s: &String| parse_rational(s);
        Ok(match self {
            Self::Cor1 { beta, gamma } => FamilyKind::Cor1 {
                beta: p(beta)?,
                gamma: p(gamma)?,
            },
            Self::Cor2 { gamma } => FamilyKind::Cor2 { gamma: p(gamma)? },
            Self::Cor3 { gamma, beta, beta1, a } => FamilyKind::Cor3 {
                gamma: p(gamma)?,
                beta: p(beta)?,
                beta1: p(beta1)?,
                a: p(a)?,
            },
            Self::Custom {
                power,
                log,
                h_additive,
                h_power,
            } => {
                use crate::theorems::HForm;
                let h = match (h_additive, h_power) {
                    (Some(c), None) => HForm::Additive(p(c)?),
                    (None, Some(c)) => HForm::Power(p(c)?),
                    _ => {
                        return Err(Error::InvalidArgument(
                            "custom family needs exactly one of h_additive, h_power".into(),
                        ))
                    }
                };
                FamilyKind::Custom {
                    power: p(power)?,
                    log: *log,
                    h,
                }
            }
        })
    }
}

impl FamilyArgs {
    fn spec(&self) -> Result<Option<FamilySpec>> {
        let Some(name) = &self.family else {
            return Ok(None);
        };
        let need = |v: &Option<String>, what: &str| {
            v.clone()
                .ok_or_else(|| Error::InvalidArgument(format!("family {name} needs --{what}")))
        };
        Ok(Some(match name.as_str() {
            "cor1" => FamilySpec::Cor1 {
                beta: need(&self.beta, "beta")?,
                gamma: need(&self.gamma, "gamma")?,
            },
            "cor2" => FamilySpec::Cor2 {
                gamma: need(&self.gamma, "gamma")?,
            },
            "cor3" => FamilySpec::Cor3 {
                gamma: need(&self.gamma, "gamma")?,
                beta: need(&self.beta, "beta")?,
                beta1: need(&self.beta1, "beta1")?,
                a: need(&self.a_const, "A")?,
            },
            "custom" => FamilySpec::Custom {
                power: need(&self.power, "power")?,
                log: self.log,
                h_additive: self.h_additive.clone(),
                h_power: self.h_power.clone(),
            },
            other => return Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }))
    }

    fn schedule(&self) -> Result<ScheduleSource> {
        let family = self
            .spec()?
            .ok_or_else(|| Error::InvalidArgument("theorem 3 needs --family".into()))?;
        Ok(ScheduleSource::Theorem3 {
            family,
            c: self.c.clone(),
            n1: self.n1,
            n1_max: self.n1_max,
        })
    }
}

/// Inline JSON (starting with `{` or `[`) or a path to a JSON file.
fn read_json_arg(s: &str, base: Option<&Path>) -> Result<Value> {
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(serde_json::from_str(t)?);
    }
    let path = match base {
        Some(b) if Path::new(s).is_relative() => b.join(s),
        _ => PathBuf::from(s),
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_sequence_spec(s: &str, base: Option<&Path>) -> Result<SequenceSpec> {
    Ok(serde_json::from_value(read_json_arg(s, base)?)?)
}

/// A config with its sequence resolved and its schedule built.
pub struct Prepared {
    pub config: RunConfig,
    pub spec: SequenceSpec,
    pub seq: FormSequence,
    pub schedule: Schedule,
    pub prop2: Option<Prop2Schedule>,
    /// Calculator output of the theorem that produced the schedule.
    pub params: Value,
    pub precision: u32,
}

impl RunConfig {
    /// Reads a config file; relative sequence paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<(Self, Option<PathBuf>)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok((cfg, path.parent().map(Path::to_path_buf)))
    }

    pub fn engine_config(&self) -> EngineConfig {
        let def = EngineConfig::default();
        EngineConfig {
            cube_budget: self.cube_budget.map_or(def.cube_budget, u128::from),
            strict: self.strict,
            depth_bits: self.depth_bits,
            classify_budget: self.classify_budget.map_or(def.classify_budget, u128::from),
            sample_children: self.sample_children.unwrap_or(def.sample_children),
            seed: self.seed,
        }
    }

    /// Resolves the sequence and builds the schedule. `prec` is used unless
    /// the config fixes `precision_bits`.
    pub fn prepare(&self, base: Option<&Path>, prec: u32) -> Result<Prepared> {
        let prec = check_precision(self.precision_bits.unwrap_or(prec))?;
        let spec = match &self.sequence {
            SequenceSource::Inline(s) => s.clone(),
            SequenceSource::Path(p) => load_sequence_spec(p, base)?,
        };
        let (seq, _) = spec.build(prec)?;
        let d = seq.dim() as u64;
        let (schedule, prop2, params) = match &self.schedule {
            ScheduleSource::Theorem1 { n } => {
                let (_, params, s) = theorem1_schedule(*n, d, prec)?;
                (s, None, params.to_json())
            }
            ScheduleSource::Theorem2 { n } => {
                let (_, params, s, p2) = theorem2_schedule(*n, d, prec)?;
                (s, Some(p2), params.to_json())
            }
            ScheduleSource::Theorem3 { family, c, n1, n1_max } => {
                let mut tc = Thm3Config::new(corollary_family(family.kind()?)?);
                tc.c_override = c.as_deref().map(parse_rational).transpose()?;
                tc.n1 = *n1;
                if let Some(m) = n1_max {
                    tc.n1_max = *m;
                }
                let (s, p2, params) = theorem3_schedule(&tc, &seq, prec)?;
                (s, Some(p2), params.to_json())
            }
            ScheduleSource::Explicit {
                delta,
                lambda,
                x,
                m,
                prop2,
            } => {
                let s = Schedule {
                    delta: delta.resolve()?,
                    lambda: RealInterval::exact(parse_rational(lambda)?, prec),
                    x: x.resolve()?,
                    m: m.resolve()?,
                    label: "explicit".into(),
                };
                let p2 = prop2
                    .as_ref()
                    .map(|p| -> Result<Prop2Schedule> {
                        Ok(Prop2Schedule {
                            n: p.n.clone(),
                            eta: p.eta.resolve()?,
                            sigma_bounds: Default::default(),
                        })
                    })
                    .transpose()?;
                (s, p2, json!({ "source": "explicit" }))
            }
        };
        let mut config = self.clone();
        config.sequence = SequenceSource::Inline(spec.clone());
        config.precision_bits = Some(prec);
        Ok(Prepared {
            config,
            spec,
            seq,
            schedule,
            prop2,
            params,
            precision: prec,
        })
    }

    fn within(&self) -> Result<Option<(Vec<ExactRational>, ExactRational)>> {
        self.within
            .as_ref()
            .map(|w| -> Result<_> {
                let v = w.v.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
                Ok((v, parse_rational(&w.r)?))
            })
            .transpose()
    }
}

fn check_precision(bits: u32) -> Result<u32> {
    if (MIN_PRECISION..=MAX_PRECISION).contains(&bits) {
        Ok(bits)
    } else {
        Err(Error::InvalidArgument(format!(
            "precision must be in {MIN_PRECISION}..={MAX_PRECISION} bits, got {bits}"
        )))
    }
}

/// `--precision`, else `$DYELIM_PRECISION`, else 256.
fn default_precision(flag: Option<u32>) -> Result<u32> {
    if let Some(b) = flag {
        return check_precision(b);
    }
    match std::env::var(PRECISION_ENV) {
        Ok(s) => {
            let b = s
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidArgument(format!("{PRECISION_ENV}={s:?} is not a bit count")))?;
            check_precision(b)
        }
        Err(_) => Ok(DEFAULT_PRECISION),
    }
}

fn schedule_from_flags(name: &str, n: Option<u64>, fam: &FamilyArgs) -> Result<ScheduleSource> {
    let n = n.unwrap_or(1);
    match name {
        "theorem1" => Ok(ScheduleSource::Theorem1 { n }),
        "theorem2" => Ok(ScheduleSource::Theorem2 { n }),
        "theorem3" => fam.schedule(),
        other => Err(Error::InvalidArgument(format!(
            "unknown schedule {other:?}; use theorem1, theorem2, theorem3 or a config file"
        ))),
    }
}

fn parse_within(tokens: &[String]) -> Result<Option<Within>> {
    if tokens.is_empty() {
        return Ok(None);
    }
    let (mut v, mut r) = (None, None);
    for tok in tokens.iter().flat_map(|t| t.split_whitespace()) {
        match tok.split_once('=') {
            Some(("v", val)) => v = Some(val.split(',').map(str::to_string).collect()),
            Some(("r", val)) => r = Some(val.to_string()),
            _ => return Err(Error::InvalidArgument(format!("--within expects v=.. r=.., got {tok:?}"))),
        }
    }
    match (v, r) {
        (Some(v), Some(r)) => Ok(Some(Within { v, r })),
        _ => Err(Error::InvalidArgument("--within needs both v= and r=".into())),
    }
}

fn parse_list(s: &str) -> Result<Vec<ExactRational>> {
    s.split(',').map(|t| parse_rational(t.trim())).collect()
}

struct Outcome {
    doc: Value,
    code: i32,
}

impl Outcome {
    fn ok(doc: Value) -> Self {
        Self { doc, code: EXIT_OK }
    }
}

fn base_config(
    config: Option<&PathBuf>,
    sequence: Option<&String>,
    schedule: Option<&String>,
    n: Option<u64>,
    fam: &FamilyArgs,
) -> Result<(RunConfig, Option<PathBuf>)> {
    let (mut cfg, base) = match config {
        Some(p) => RunConfig::from_file(p)?,
        None => {
            let seq = sequence.ok_or_else(|| Error::InvalidArgument("--sequence or --config is required".into()))?;
            let sched = schedule.ok_or_else(|| Error::InvalidArgument("--schedule or --config is required".into()))?;
            let cfg = RunConfig {
                sequence: SequenceSource::Inline(load_sequence_spec(seq, None)?),
                schedule: schedule_from_flags(sched, n, fam)?,
                mode: Mode::Prop1,
                n_max: None,
                nu_max: None,
                depth_bits: 0,
                cube_budget: None,
                classify_budget: None,
                sample_children: None,
                seed: 0,
                precision_bits: None,
                strict: true,
                within: None,
            };
            return Ok((cfg, None));
        }
    };
    if let Some(s) = sequence {
        cfg.sequence = SequenceSource::Inline(load_sequence_spec(s, None)?);
    }
    if let Some(s) = schedule {
        cfg.schedule = schedule_from_flags(s, n, fam)?;
    }
    Ok((cfg, base))
}

fn cmd_bound(a: &BoundArgs, prec: u32) -> Result<Outcome> {
    if a.n < 1 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    if a.d < 1 {
        return Err(Error::InvalidArgument("d must be ≥ 1".into()));
    }
    let (n, d) = (a.n as u64, a.d as u64);
    let doc = match a.theorem {
        1 => {
            let (_, params, sched) = theorem1_schedule(n, d, prec)?;
            let mut v = params.to_json();
            v["schedule"] = schedule_json(&sched);
            if let Some(t) = a.table {
                let rows = khintchine_gamma_comparison(t, prec)?;
                v["table"] = Value::Array(rows.iter().map(|r| r.to_json()).collect());
            }
            v
        }
        2 => {
            let (_, params, sched, p2) = theorem2_schedule(n, d, prec)?;
            let mut v = params.to_json();
            v["schedule"] = schedule_json(&sched);
            v["blocks"] = json!(p2.n);
            v
        }
        3 => {
            let seq = a
                .sequence
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("theorem 3 needs --sequence".into()))?;
            let (seq, _) = load_sequence_spec(seq, None)?.build(prec)?;
            let ScheduleSource::Theorem3 { family, c, n1, n1_max } = a.family.schedule()? else {
                unreachable!()
            };
            let mut tc = Thm3Config::new(corollary_family(family.kind()?)?);
            tc.c_override = c.as_deref().map(parse_rational).transpose()?;
            tc.n1 = n1;
            if let Some(m) = n1_max {
                tc.n1_max = m;
            }
            let (sched, _, params) = theorem3_schedule(&tc, &seq, prec)?;
            let mut v = params.to_json();
            v["schedule"] = schedule_json(&sched);
            v
        }
        t => return Err(Error::InvalidArgument(format!("unknown theorem {t}; use 1, 2 or 3"))),
    };
    Ok(Outcome::ok(doc))
}

fn schedule_json(s: &Schedule) -> Value {
    json!({
        "label": s.label,
        "delta": s.delta.to_json(),
        "lambda": crate::theorems::interval_json(&s.lambda),
        "x": s.x.to_json(),
        "m": s.m.to_json(),
    })
}

fn margin_summary(e: &crate::engine::Extraction) -> Value {
    json!({
        "theta": e.theta.iter().map(fmt_rational).collect::<Vec<_>>(),
        "theta_approx": e.theta.iter().map(crate::numerics::to_f64).collect::<Vec<_>>(),
        "min_margin": e.min_margin().map(fmt_rational),
        "checked": e.margins.len(),
    })
}

fn cmd_construct(a: &ConstructArgs, prec: u32) -> Result<Outcome> {
    let (mut cfg, base) = base_config(a.config.as_ref(), a.sequence.as_ref(), a.schedule.as_ref(), a.n, &a.family)?;
    if let Some(m) = &a.mode {
        cfg.mode = serde_json::from_value(json!(m))
            .map_err(|_| Error::InvalidArgument(format!("unknown mode {m:?}; use prop1 or prop2")))?;
    }
    cfg.n_max = a.n_max.or(cfg.n_max);
    cfg.nu_max = a.nu_max.or(cfg.nu_max);
    cfg.depth_bits = a.depth_bits.unwrap_or(cfg.depth_bits);
    cfg.cube_budget = a.cube_budget.or(cfg.cube_budget);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if a.no_strict {
        cfg.strict = false;
    }
    if let Some(w) = parse_within(&a.within)? {
        cfg.within = Some(w);
    }
    let prep = cfg.prepare(base.as_deref(), prec)?;
    let (cert, summary) = construct(&prep)?;
    let text = cert.to_canonical();
    let mut doc = json!({
        "status": "ok",
        "certificate_digest": cert.digest(),
        "summary": summary,
    });
    match &a.out {
        Some(p) => {
            std::fs::write(p, format!("{text}\n"))?;
            doc["certificate_path"] = json!(p.display().to_string());
        }
        None => doc["certificate"] = cert.into_value(),
    }
    Ok(Outcome::ok(doc))
}

/// Runs the construction a prepared config describes.
pub fn construct(prep: &Prepared) -> Result<(Certificate, Value)> {
    let cfg = &prep.config;
    let config_json = serde_json::to_value(cfg)?;
    let digest = prep.spec.digest();
    match cfg.mode {
        Mode::Prop1 => {
            let n_max = cfg.n_max.unwrap_or(prep.seq.len());
            let out = run_prop1(&prep.seq, &prep.schedule, n_max, cfg.within()?, cfg.engine_config())?;
            let trace: Vec<Value> = out
                .trace
                .iter()
                .map(|t| {
                    json!({
                        "n": t.n,
                        "count": t.count.to_string(),
                        "fraction": fmt_rational(&t.fraction),
                        "lower_bound": crate::numerics::to_f64(&t.lower_bound),
                    })
                })
                .collect();
            let summary = json!({
                "mode": "prop1",
                "schedule": out.schedule_label,
                "n_max": out.n_max,
                "first_stage": out.domain.first,
                "restrictions": out.restrictions.len(),
                "leaf": margin_summary(&out.extraction),
                "trace": trace,
            });
            Ok((Certificate::from_prop1(&out, &digest, config_json), summary))
        }
        Mode::Prop2 => {
            if cfg.within.is_some() {
                return Err(Error::InvalidArgument("within is only supported in prop1 mode".into()));
            }
            let p2 = prep
                .prop2
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("prop2 mode needs a schedule with blocks".into()))?;
            let nu_max = cfg
                .nu_max
                .ok_or_else(|| Error::InvalidArgument("prop2 mode needs nu_max".into()))?;
            let out = run_prop2(&prep.seq, &prep.schedule, p2, nu_max, cfg.engine_config())?;
            let leaves: Vec<Value> = out
                .leaves()
                .filter_map(|g| g.leaf.as_ref().map(|e| (g.id, e)))
                .map(|(id, e)| {
                    let mut v = margin_summary(e);
                    v["node"] = json!(id);
                    v
                })
                .collect();
            let summary = json!({
                "mode": "prop2",
                "schedule": out.schedule_label,
                "nu_max": out.nu_max,
                "blocks": out.blocks,
                "nodes": out.nodes.len(),
                "leaves": leaves,
            });
            Ok((Certificate::from_prop2(&out, &digest, config_json), summary))
        }
    }
}

fn cmd_verify(a: &VerifyArgs, prec: u32) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.certificate)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", a.certificate.display())))?;
    let cert: Value = serde_json::from_str(&text)?;
    if !cert.is_object() {
        return Err(Error::Parse("a certificate is a JSON object".into()));
    }
    let spec = load_sequence_spec(&a.sequence, None)?;
    let report = verify_certificate(&cert, &spec, prec);
    let pass = report.pass();
    let mut doc = report.to_json();
    doc["status"] = json!(if pass { "verified" } else { "failed" });
    Ok(Outcome {
        doc,
        code: if pass { EXIT_OK } else { EXIT_VERIFY },
    })
}

fn cmd_measure(a: &MeasureArgs, prec: u32) -> Result<Outcome> {
    let coeffs = parse_list(&a.a)?;
    if coeffs.iter().all(|c| *c == int(0)) {
        return Err(Error::InvalidArgument("a must be nonzero".into()));
    }
    let d = coeffs.len();
    let b = parse_rational(&a.b)?;
    let eps = parse_rational(&a.eps)?;
    if eps <= int(0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let p = NormSelector::parse(&a.p)?;
    let side = parse_rational(&a.r)?;
    let lo = match &a.v {
        Some(v) => parse_list(v)?,
        None => vec![int(0); d],
    };
    if lo.len() != d {
        return Err(Error::Dimension { expected: d, got: lo.len() });
    }
    let hi: Vec<ExactRational> = lo.iter().map(|x| x + &side).collect();
    let form = LinearForm::new(coeffs.clone(), b.clone())?;
    let norm = form.norm(&p, prec);
    let bound = cube_strip_bound(&norm, &eps, d, &p, &side, prec)?;
    let mut doc = json!({
        "d": d,
        "a": coeffs.iter().map(fmt_rational).collect::<Vec<_>>(),
        "b": fmt_rational(&b),
        "eps": fmt_rational(&eps),
        "p": p.label(),
        "region": {
            "lo": lo.iter().map(fmt_rational).collect::<Vec<_>>(),
            "hi": hi.iter().map(fmt_rational).collect::<Vec<_>>(),
        },
        "bound": crate::theorems::interval_json(&bound),
    });
    let pass = if d == 1 {
        let m = exact_bad_measure_1d(&coeffs[0], &b, &eps, &lo[0], &hi[0])?;
        let rel = &m / &side;
        doc["method"] = json!("exact");
        doc["measure"] = json!(fmt_rational(&m));
        doc["relative"] = json!(fmt_rational(&rel));
        rel <= *bound.lo()
    } else {
        let region = RationalBox { lo, hi };
        let vol = crate::numerics::to_f64(&region.volume());
        let est = mc_bad_measure(&BadSetSpec::new(form, eps, region)?, a.samples, a.seed)?;
        let (rel, se) = (est.estimate / vol, est.stderr / vol);
        doc["method"] = json!("monte-carlo");
        doc["mc"] = json!({
            "estimate": est.estimate,
            "stderr": est.stderr,
            "relative": rel,
            "relative_stderr": se,
            "hits": est.hits,
            "samples": est.samples,
            "seed": est.seed,
            "prng": PRNG_NAME,
        });
        rel <= bound.to_f64() + 4.0 * se
    };
    doc["pass"] = json!(pass);
    Ok(Outcome::ok(doc))
}

fn cmd_analyze(a: &AnalyzeArgs, prec: u32) -> Result<Outcome> {
    let (mut cfg, base) = base_config(a.config.as_ref(), a.sequence.as_ref(), a.schedule.as_ref(), a.n, &a.family)?;
    cfg.n_max = a.n_max.or(cfg.n_max);
    cfg.nu_max = a.nu_max.or(cfg.nu_max);
    let prep = cfg.prepare(base.as_deref(), prec)?;
    let n_max = prep.config.n_max.unwrap_or(prep.seq.len());
    let p2 = match (&prep.prop2, prep.config.nu_max) {
        (Some(p), Some(nu)) => Some((p, nu)),
        _ => None,
    };
    let report = condition_report(&prep.seq, &prep.schedule, n_max, p2);
    let mut doc = report.to_json();
    doc["pass"] = json!(report.pass());
    doc["parameters"] = prep.params;
    doc["schedule"] = schedule_json(&prep.schedule);
    Ok(Outcome::ok(doc))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let prec = default_precision(cli.precision)?;
    match &cli.cmd {
        Command::Bound(a) => cmd_bound(a, prec),
        Command::Construct(a) => cmd_construct(a, prec),
        Command::Verify(a) => cmd_verify(a, prec),
        Command::Measure(a) => cmd_measure(a, prec),
        Command::Analyze(a) => cmd_analyze(a, prec),
    }
}

/// Runs the command line on `args` (including the program name) and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be ≥ 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(o) => {
            let _ = writeln!(out, "{}", canonical_json(&o.doc));
            o.code
        }
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(err, "dyelim: {e}");
            let _ = writeln!(out, "{}", canonical_json(&error_json(&e)));
            code
        }
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
