//! `stream`: strictly sequential line protocol. Each decision is written
//! and flushed before the next input line is read.
//!
//! Unparsable or invalid lines produce `error,<line>,<message>` and are
//! otherwise skipped.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use sast_core::baselines::{fixed_threshold_step, GammaSequence, Lond, LordPlusPlus};
use sast_core::estimators::{PluginClfdr, PluginSettings, DEFAULT_BURN_IN, DEFAULT_REFRESH, DEFAULT_WINDOW};
use sast_core::model::{p_to_z_randomized, z_to_pvalue, AltParams, AltSpec, MixtureParams, NullParams};
use sast_core::sast::{BarrierMode, Decision, SastState};
use sast_core::simulation::{Method, PiPattern};

use crate::format::{self, sig};
use crate::{CliError, InputKind};

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// sast-dd, sast-or, sast-dd-nob, sast-or-nob, lond, lordpp, fixed[:c]
    #[arg(long, default_value = "sast-dd")]
    pub method: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub null_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub null_sd: f64,
    /// Barrier and estimation window length.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub d: usize,
    /// Leading lines that only warm the estimator (sast-dd only).
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_REFRESH)]
    pub refresh: usize,
    #[arg(long, value_enum, default_value_t = InputKind::Z)]
    pub input: InputKind,
    /// JSON model for sast-or: {"pattern": {...}, "m": 5000, "alt": {"mean": 3, "sd": 1}}.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Seeds the sign coin of the p-to-z transform.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = format::DEFAULT_PRECISION)]
    pub precision: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    pattern: PiPattern,
    /// Stream length for time-scaled patterns; later times reuse the value at `m`.
    #[serde(default)]
    m: Option<usize>,
    alt: AltParams,
}

fn load_model(path: &PathBuf, null: NullParams) -> Result<MixtureParams, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let spec: ModelSpec = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid model: {e}")))?;
    let needs_m = matches!(spec.pattern, PiPattern::Linear { .. } | PiPattern::Sine);
    let m = match spec.m {
        Some(m) if m > 0 => m,
        Some(_) => return Err(CliError::Config("invalid model field `m`: must be positive".into())),
        None if needs_m => return Err(CliError::Config("invalid model field `m`: required by this pattern".into())),
        None => usize::MAX,
    };
    spec.pattern
        .validate()
        .map_err(|e| CliError::Config(format!("invalid model field `pattern`: {e}")))?;
    let pattern = spec.pattern;
    MixtureParams::new(move |t| pattern.value(t.min(m), m), null, AltSpec::Fixed(spec.alt))
        .map_err(|e| CliError::Config(format!("invalid model: {e}")))
}

enum Rule {
    Oracle(SastState, MixtureParams),
    DataDriven {
        state: SastState,
        estimator: PluginClfdr,
        burn_left: usize,
        burn_index: i64,
    },
    Lond(Lond),
    Lord(LordPlusPlus),
    Fixed(f64),
}

enum Output {
    Silent,
    Decision {
        clfdr: Option<f64>,
        level: f64,
        decision: Decision,
    },
}

impl Rule {
    fn build(args: &StreamArgs, null: NullParams) -> Result<Self, CliError> {
        let method: Method = args.method.parse().map_err(|e: sast_core::Error| CliError::Config(e.to_string()))?;
        let cfg = |e: sast_core::Error| CliError::Config(e.to_string());
        let mode = match method {
            Method::SastOracleNoBarrier | Method::SastDataDrivenNoBarrier => BarrierMode::Disabled,
            _ => BarrierMode::Adaptive,
        };
        Ok(match method {
            Method::SastOracle | Method::SastOracleNoBarrier => {
                let path = args
                    .model
                    .as_ref()
                    .ok_or_else(|| CliError::Config("--model is required for sast-or".into()))?;
                Rule::Oracle(SastState::with_mode(args.alpha, args.d, mode).map_err(cfg)?, load_model(path, null)?)
            }
            Method::SastDataDriven | Method::SastDataDrivenNoBarrier => {
                let settings = PluginSettings {
                    d: args.d,
                    refresh: args.refresh,
                    burn_in: args.burn_in,
                    ..PluginSettings::default()
                };
                if args.burn_in < settings.min_ready() {
                    return Err(CliError::Config(format!(
                        "--burn-in must be at least {} for sast-dd",
                        settings.min_ready()
                    )));
                }
                Rule::DataDriven {
                    state: SastState::with_mode(args.alpha, args.d, mode).map_err(cfg)?,
                    estimator: PluginClfdr::new(settings, null).map_err(cfg)?,
                    burn_left: args.burn_in,
                    burn_index: 1 - args.burn_in as i64,
                }
            }
            Method::Lond => Rule::Lond(Lond::new(args.alpha, GammaSequence::default()).map_err(cfg)?),
            Method::LordPlusPlus => {
                Rule::Lord(LordPlusPlus::with_default_wealth(args.alpha, GammaSequence::default()).map_err(cfg)?)
            }
            Method::Fixed(c) => Rule::Fixed(c),
            other => return Err(CliError::Config(format!("method `{other}` is offline and cannot stream"))),
        })
    }

    fn uses_pvalues(&self) -> bool {
        matches!(self, Rule::Lond(_) | Rule::Lord(_) | Rule::Fixed(_))
    }

    /// `stat` is a z-score for SAST rules and a p-value for the others.
    fn step(&mut self, stat: f64) -> sast_core::Result<Output> {
        Ok(match self {
            Rule::Oracle(state, params) => {
                let r = state.step_oracle(stat, params)?;
                Output::Decision {
                    clfdr: Some(r.clfdr),
                    level: r.barrier,
                    decision: r.decision,
                }
            }
            Rule::DataDriven {
                state,
                estimator,
                burn_left,
                burn_index,
            } => {
                if *burn_left > 0 {
                    estimator.observe(*burn_index, stat)?;
                    *burn_left -= 1;
                    *burn_index += 1;
                    Output::Silent
                } else {
                    let r = state.step_datadriven(stat, estimator)?;
                    Output::Decision {
                        clfdr: Some(r.clfdr),
                        level: r.barrier,
                        decision: r.decision,
                    }
                }
            }
            Rule::Lond(rule) => {
                let level = rule.next_level();
                let decision = rule.step(stat)?;
                Output::Decision {
                    clfdr: None,
                    level,
                    decision,
                }
            }
            Rule::Lord(rule) => {
                let level = rule.next_level();
                let decision = rule.step(stat)?;
                Output::Decision {
                    clfdr: None,
                    level,
                    decision,
                }
            }
            Rule::Fixed(c) => Output::Decision {
                clfdr: None,
                level: *c,
                decision: fixed_threshold_step(stat, *c)?,
            },
        })
    }
}

fn parse_line(line: &str) -> Result<(&str, &str, f64), String> {
    let (index, value) = line
        .split_once(',')
        .ok_or_else(|| "expected `index,value`".to_string())?;
    let (index, value) = (index.trim(), value.trim());
    index
        .parse::<i64>()
        .map_err(|_| format!("index `{index}` is not an integer"))?;
    let v = value
        .parse::<f64>()
        .map_err(|_| format!("value `{value}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("value `{value}` is not finite"));
    }
    Ok((index, value, v))
}

pub fn run(args: &StreamArgs) -> Result<(), CliError> {
    let null = match args.input {
        InputKind::Z => NullParams::new(args.null_mean, args.null_sd).map_err(|e| CliError::Config(e.to_string()))?,
        InputKind::P => NullParams::standard(),
    };
    let mut rule = Rule::build(args, null)?;
    let mut coin = ChaCha8Rng::seed_from_u64(args.seed);
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let io_err = |e: io::Error| CliError::Runtime(format!("i/o failure: {e}"));

    for line in stdin.lock().lines() {
        let line = line.map_err(io_err)?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let result = parse_line(trimmed).and_then(|(index, value, v)| {
            let stat = match (args.input, rule.uses_pvalues()) {
                (InputKind::Z, false) => Ok(v),
                (InputKind::Z, true) => z_to_pvalue(v, &null),
                (InputKind::P, true) => Ok(v),
                (InputKind::P, false) => p_to_z_randomized(v, coin.random_bool(0.5)),
            }
            .map_err(|e| e.to_string())?;
            rule.step(stat).map(|o| (index, value, o)).map_err(|e| e.to_string())
        });
        match result {
            Ok((_, _, Output::Silent)) => continue,
            Ok((index, value, Output::Decision { clfdr, level, decision })) => {
                let clfdr = clfdr.map(|c| sig(c, args.precision)).unwrap_or_default();
                writeln!(out, "{index},{value},{clfdr},{},{decision}", sig(level, args.precision)).map_err(io_err)?;
            }
            Err(msg) => writeln!(out, "error,{trimmed},{msg}").map_err(io_err)?,
        }
        out.flush().map_err(io_err)?;
    }
    Ok(())
}
