//! Synthetic streams, online FDR/MDR evaluation and the replication runner.
//!
//! A stream has `burn_in + m` points. The burn-in prefix is drawn with the
//! pattern's value at `t = 1`, only warms the data-driven estimator, and is
//! never tested or scored.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fixed_threshold_step, GammaSequence, Lond, LordPlusPlus};
use crate::error::{Error, Result};
use crate::estimators::{
    Bandwidth, Kernel, PluginClfdr, PluginSettings, TauPolicy, DEFAULT_BURN_IN, DEFAULT_REFRESH, DEFAULT_WINDOW,
};
use crate::model::{clfdr_oracle, z_to_pvalue, AltParams, AltSpec, MixtureParams, NullParams};
use crate::offline::{bh, clfdr_stepwise, weighted_bh};
use crate::sast::{BarrierMode, DecisionRecord, SastState};

/// A pi-block `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSegment {
    pub start: usize,
    pub end: usize,
    pub pi: f64,
}

impl BlockSegment {
    pub fn new(start: usize, end: usize, pi: f64) -> Self {
        Self { start, end, pi }
    }

    fn contains(&self, t: usize) -> bool {
        t > self.start && t <= self.end
    }
}

/// User-supplied `pi(t, m)`.
#[derive(Clone)]
pub struct CustomPi(pub Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>);

impl fmt::Debug for CustomPi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomPi(..)")
    }
}

/// Non-null proportion as a function of time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PiPattern {
    /// Piecewise constant over half-open-left blocks; `baseline` elsewhere.
    Block {
        segments: Vec<BlockSegment>,
        #[serde(default)]
        baseline: f64,
    },
    Constant {
        pi: f64,
    },
    /// Linear from `lo` at `t = 1` to `hi` at `t = m`.
    Linear {
        lo: f64,
        hi: f64,
    },
    /// `(sin(2 pi t / m) + 1) / 4`.
    Sine,
    #[serde(skip)]
    Custom(CustomPi),
}

impl PiPattern {
    /// Block pattern: 0.6 on (1000, 1200] and (2000, 2200], 0.8 on
    /// (3000, 3200] and (4000, 4200], 0.01 elsewhere.
    pub fn setting1() -> Self {
        PiPattern::Block {
            segments: vec![
                BlockSegment::new(1, 1000, 0.01),
                BlockSegment::new(1000, 1200, 0.6),
                BlockSegment::new(1200, 2000, 0.01),
                BlockSegment::new(2000, 2200, 0.6),
                BlockSegment::new(2200, 3000, 0.01),
                BlockSegment::new(3000, 3200, 0.8),
                BlockSegment::new(3200, 4000, 0.01),
                BlockSegment::new(4000, 4200, 0.8),
                BlockSegment::new(4200, 5000, 0.01),
            ],
            baseline: 0.01,
        }
    }

    pub fn setting2() -> Self {
        PiPattern::Constant { pi: 0.05 }
    }

    pub fn setting3() -> Self {
        PiPattern::Linear { lo: 0.0, hi: 0.5 }
    }

    pub fn setting4() -> Self {
        PiPattern::Sine
    }

    /// Blocks [1001:1150], [2001:2150], [3001:3100], [4001:4150] at
    /// `pi_block`, 0.01 elsewhere.
    pub fn weighting_blocks(pi_block: f64) -> Self {
        PiPattern::Block {
            segments: vec![
                BlockSegment::new(1000, 1150, pi_block),
                BlockSegment::new(2000, 2150, pi_block),
                BlockSegment::new(3000, 3100, pi_block),
                BlockSegment::new(4000, 4150, pi_block),
            ],
            baseline: 0.01,
        }
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Send + Sync + 'static,
    {
        PiPattern::Custom(CustomPi(Arc::new(f)))
    }

    /// Checks block overlap and the range of scalar parameters.
    pub fn validate(&self) -> Result<()> {
        let check = |pi: f64| {
            if (0.0..=1.0).contains(&pi) {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: "pi",
                    reason: format!("proportion must lie in [0, 1], got {pi}"),
                })
            }
        };
        match self {
            PiPattern::Block { segments, baseline } => {
                check(*baseline)?;
                for s in segments {
                    check(s.pi)?;
                    if s.end <= s.start {
                        return Err(Error::InvalidParameter {
                            name: "segments",
                            reason: format!("empty block ({}, {}]", s.start, s.end),
                        });
                    }
                }
                for (i, a) in segments.iter().enumerate() {
                    for b in &segments[i + 1..] {
                        if a.start < b.end && b.start < a.end {
                            return Err(Error::OverlappingSegments {
                                a_start: a.start,
                                a_end: a.end,
                                b_start: b.start,
                                b_end: b.end,
                            });
                        }
                    }
                }
                Ok(())
            }
            PiPattern::Constant { pi } => check(*pi),
            PiPattern::Linear { lo, hi } => check(*lo).and(check(*hi)),
            PiPattern::Sine | PiPattern::Custom(_) => Ok(()),
        }
    }

    /// Value at `1 <= t <= m`; assumes [`PiPattern::validate`] passed.
    pub fn value(&self, t: usize, m: usize) -> f64 {
        match self {
            PiPattern::Block { segments, baseline } => segments
                .iter()
                .find(|s| s.contains(t))
                .map_or(*baseline, |s| s.pi),
            PiPattern::Constant { pi } => *pi,
            PiPattern::Linear { lo, hi } => {
                if m <= 1 {
                    *lo
                } else {
                    lo + (hi - lo) * (t - 1) as f64 / (m - 1) as f64
                }
            }
            PiPattern::Sine => ((2.0 * std::f64::consts::PI * t as f64 / m as f64).sin() + 1.0) / 4.0,
            PiPattern::Custom(CustomPi(f)) => f(t, m),
        }
    }
}

/// Validated lookup of the pattern at `t`.
pub fn pi_pattern_value(pattern: &PiPattern, t: usize, m: usize) -> Result<f64> {
    pattern.validate()?;
    if t == 0 || t > m {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("time {t} outside 1..={m}"),
        });
    }
    let pi = pattern.value(t, m);
    if (0.0..=1.0).contains(&pi) {
        Ok(pi)
    } else {
        Err(Error::InvalidParameter {
            name: "pi",
            reason: format!("pattern evaluates to {pi} at t = {t}"),
        })
    }
}

/// Rules the replication runner knows about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    SastOracle,
    SastOracleNoBarrier,
    SastDataDriven,
    SastDataDrivenNoBarrier,
    Lond,
    LordPlusPlus,
    Fixed(f64),
    /// Offline BH over the whole stream.
    Bh,
    /// Offline weighted BH with `w = 1 / (1 - pi)`.
    Sabha,
    /// Offline weighted BH with `w = pi / (1 - pi)`.
    Gap,
    /// Offline step-wise Clfdr rule over the whole stream.
    ClfdrRule,
}

impl Method {
    pub fn is_data_driven(self) -> bool {
        matches!(self, Method::SastDataDriven | Method::SastDataDrivenNoBarrier)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::SastOracle => f.write_str("sast-or"),
            Method::SastOracleNoBarrier => f.write_str("sast-or-nob"),
            Method::SastDataDriven => f.write_str("sast-dd"),
            Method::SastDataDrivenNoBarrier => f.write_str("sast-dd-nob"),
            Method::Lond => f.write_str("lond"),
            Method::LordPlusPlus => f.write_str("lordpp"),
            Method::Fixed(c) => write!(f, "fixed:{c}"),
            Method::Bh => f.write_str("bh"),
            Method::Sabha => f.write_str("sabha"),
            Method::Gap => f.write_str("gap"),
            Method::ClfdrRule => f.write_str("clfdr-rule"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sast-or" => Method::SastOracle,
            "sast-or-nob" => Method::SastOracleNoBarrier,
            "sast-dd" => Method::SastDataDriven,
            "sast-dd-nob" => Method::SastDataDrivenNoBarrier,
            "lond" => Method::Lond,
            "lordpp" => Method::LordPlusPlus,
            "fixed" => Method::Fixed(1e-4),
            "bh" => Method::Bh,
            "sabha" => Method::Sabha,
            "gap" => Method::Gap,
            "clfdr-rule" => Method::ClfdrRule,
            other => {
                let c = other
                    .strip_prefix("fixed:")
                    .and_then(|c| c.parse::<f64>().ok())
                    .filter(|c| *c > 0.0 && *c <= 1.0)
                    .ok_or_else(|| Error::UnknownMethod(other.to_string()))?;
                Method::Fixed(c)
            }
        })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}
fn default_refresh() -> usize {
    DEFAULT_REFRESH
}
fn default_d() -> usize {
    DEFAULT_WINDOW
}
fn default_reps() -> usize {
    1
}

/// `1500, 2000, ..., m` (or just `m` for short streams).
pub fn default_checkpoints(m: usize) -> Vec<usize> {
    let mut cps: Vec<usize> = (1500..=m).step_by(500).collect();
    if cps.last() != Some(&m) {
        cps.push(m);
    }
    cps
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub m: usize,
    pub mu: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub pattern: PiPattern,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_refresh")]
    pub refresh: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Empty means [`default_checkpoints`].
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    #[serde(default = "default_tau")]
    pub tau: TauPolicy,
    #[serde(default)]
    pub gamma_sequence: GammaSequence,
    /// LORD++ initial wealth; `alpha / 2` when absent.
    #[serde(default)]
    pub lordpp_w0: Option<f64>,
}

fn default_tau() -> TauPolicy {
    TauPolicy::BhAdaptive
}

impl SimConfig {
    /// Desk-scale defaults around `m`, `mu` and `pattern`.
    pub fn new(m: usize, mu: f64, pattern: PiPattern) -> Self {
        Self {
            m,
            mu,
            alpha: default_alpha(),
            pattern,
            reps: default_reps(),
            seed: 0,
            burn_in: DEFAULT_BURN_IN,
            refresh: DEFAULT_REFRESH,
            d: DEFAULT_WINDOW,
            checkpoints: Vec::new(),
            kernel: Kernel::Gaussian,
            bandwidth: Bandwidth::Silverman,
            tau: default_tau(),
            gamma_sequence: GammaSequence::InverseSquare,
            lordpp_w0: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::Config { field, reason });
        if self.m == 0 {
            return bad("m", "stream length must be positive".into());
        }
        if !self.mu.is_finite() {
            return bad("mu", format!("must be finite, got {}", self.mu));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if self.reps == 0 {
            return bad("reps", "need at least one replication".into());
        }
        if self.d < 2 {
            return bad("d", format!("window length must be at least 2, got {}", self.d));
        }
        if self.refresh == 0 {
            return bad("refresh", "must be positive".into());
        }
        if let Some(&t) = self.checkpoints.iter().find(|&&t| t == 0 || t > self.m) {
            return bad("checkpoints", format!("checkpoint {t} outside 1..={}", self.m));
        }
        if let Some(w0) = self.lordpp_w0 {
            if !(w0 > 0.0 && w0 <= self.alpha) {
                return bad("lordpp_w0", format!("must lie in (0, alpha], got {w0}"));
            }
        }
        if let Err(e) = self.pattern.validate() {
            return bad("pattern", e.to_string());
        }
        for t in 1..=self.m {
            let pi = self.pattern.value(t, self.m);
            if !(0.0..=1.0).contains(&pi) {
                return bad("pattern", format!("evaluates to {pi} at t = {t}"));
            }
        }
        if let Err(e) = self.plugin_settings().validate() {
            return bad("bandwidth", e.to_string());
        }
        Ok(())
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        if self.checkpoints.is_empty() {
            default_checkpoints(self.m)
        } else {
            self.checkpoints.clone()
        }
    }

    pub fn plugin_settings(&self) -> PluginSettings {
        PluginSettings {
            kernel: self.kernel,
            bandwidth: self.bandwidth,
            tau: self.tau,
            d: self.d,
            refresh: self.refresh,
            burn_in: self.burn_in,
        }
    }

    /// Known-parameter model: `N(0, 1)` null, `N(mu, 1)` alternative.
    pub fn mixture(&self) -> Result<MixtureParams> {
        let pattern = self.pattern.clone();
        let m = self.m;
        MixtureParams::new(
            move |t| pattern.value(t.clamp(1, m), m),
            NullParams::standard(),
            AltSpec::Fixed(AltParams::shift(self.mu)?),
        )
    }
}

/// SplitMix64 finaliser applied to `seed + (rep + 1) * golden`, so that
/// replication seeds do not depend on execution order.
pub fn rep_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed.wrapping_add(rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStream {
    pub burn_in: usize,
    pub theta: Vec<bool>,
    pub x: Vec<f64>,
}

impl SimStream {
    pub fn main_x(&self) -> &[f64] {
        &self.x[self.burn_in..]
    }

    pub fn main_theta(&self) -> &[bool] {
        &self.theta[self.burn_in..]
    }

    pub fn burn_in_x(&self) -> &[f64] {
        &self.x[..self.burn_in]
    }
}

/// Draws `burn_in + m` points; deterministic in `rep_seed`.
pub fn generate_stream(cfg: &SimConfig, rep_seed: u64) -> SimStream {
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let n = cfg.burn_in + cfg.m;
    let mut theta = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i + 1).saturating_sub(cfg.burn_in).max(1);
        let pi = cfg.pattern.value(t, cfg.m);
        let signal = rng.random::<f64>() < pi;
        let z: f64 = StandardNormal.sample(&mut rng);
        theta.push(signal);
        x.push(if signal { z + cfg.mu } else { z });
    }
    SimStream {
        burn_in: cfg.burn_in,
        theta,
        x,
    }
}

/// False and missed discovery proportions at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportions {
    pub fdp: f64,
    pub mdp: f64,
}

/// FDP and MDP over the first `t` decisions for every checkpoint `t`.
pub fn evaluate(decisions: &[bool], theta: &[bool], checkpoints: &[usize]) -> Result<Vec<Proportions>> {
    if decisions.len() != theta.len() {
        return Err(Error::LengthMismatch {
            left: decisions.len(),
            right: theta.len(),
        });
    }
    if let Some(&t) = checkpoints.iter().find(|&&t| t == 0 || t > decisions.len()) {
        return Err(Error::InvalidParameter {
            name: "checkpoints",
            reason: format!("checkpoint {t} outside 1..={}", decisions.len()),
        });
    }
    // Prefix counts: rejections, false rejections, signals, true rejections.
    let mut prefix = Vec::with_capacity(decisions.len() + 1);
    prefix.push([0usize; 4]);
    for (&d, &th) in decisions.iter().zip(theta) {
        let mut c = *prefix.last().expect("seeded");
        c[0] += d as usize;
        c[1] += (d && !th) as usize;
        c[2] += th as usize;
        c[3] += (d && th) as usize;
        prefix.push(c);
    }
    Ok(checkpoints
        .iter()
        .map(|&t| {
            let [r, v, s, tp] = prefix[t];
            let fdp = v as f64 / r.max(1) as f64;
            let mdp = if s == 0 { 0.0 } else { 1.0 - tp as f64 / s as f64 };
            Proportions { fdp, mdp }
        })
        .collect())
}

/// Runs one SAST variant over the main stream, handing every record and
/// the post-step state to `observer`.
pub fn run_sast<F>(cfg: &SimConfig, stream: &SimStream, method: Method, mut observer: F) -> Result<Vec<DecisionRecord>>
where
    F: FnMut(&DecisionRecord, &SastState),
{
    let mode = match method {
        Method::SastOracle | Method::SastDataDriven => BarrierMode::Adaptive,
        Method::SastOracleNoBarrier | Method::SastDataDrivenNoBarrier => BarrierMode::Disabled,
        other => {
            return Err(Error::InvalidParameter {
                name: "method",
                reason: format!("{other} is not a SAST variant"),
            })
        }
    };
    let mut state = SastState::with_mode(cfg.alpha, cfg.d, mode)?;
    let mut records = Vec::with_capacity(cfg.m);
    if method.is_data_driven() {
        let mut est = PluginClfdr::new(cfg.plugin_settings(), NullParams::standard())?;
        let burn = stream.burn_in_x();
        for (i, &x) in burn.iter().enumerate() {
            est.observe(i as i64 + 1 - burn.len() as i64, x)?;
        }
        for &x in stream.main_x() {
            let r = state.step_datadriven(x, &mut est)?;
            observer(&r, &state);
            records.push(r);
        }
    } else {
        let params = cfg.mixture()?;
        for &x in stream.main_x() {
            let r = state.step_oracle(x, &params)?;
            observer(&r, &state);
            records.push(r);
        }
    }
    Ok(records)
}

fn pvalues(stream: &SimStream) -> Result<Vec<f64>> {
    let null = NullParams::standard();
    stream.main_x().iter().map(|&x| z_to_pvalue(x, &null)).collect()
}

fn offline_mask(m: usize, rejected: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; m];
    for &i in rejected {
        mask[i] = true;
    }
    mask
}

/// Decisions of `method` on the main stream.
pub fn run_method(cfg: &SimConfig, stream: &SimStream, method: Method) -> Result<Vec<bool>> {
    let m = cfg.m;
    let weights = |f: fn(f64) -> f64| -> Vec<f64> {
        (1..=m)
            .map(|t| f(cfg.pattern.value(t, m)).clamp(1e-300, 1e300))
            .collect()
    };
    match method {
        Method::SastOracle | Method::SastOracleNoBarrier | Method::SastDataDriven | Method::SastDataDrivenNoBarrier => {
            Ok(run_sast(cfg, stream, method, |_, _| {})?
                .iter()
                .map(|r| r.decision.is_reject())
                .collect())
        }
        Method::Lond => {
            let mut rule = Lond::new(cfg.alpha, cfg.gamma_sequence)?;
            pvalues(stream)?
                .into_iter()
                .map(|p| rule.step(p).map(|d| d.is_reject()))
                .collect()
        }
        Method::LordPlusPlus => {
            let w0 = cfg.lordpp_w0.unwrap_or(cfg.alpha / 2.0);
            let mut rule = LordPlusPlus::new(cfg.alpha, w0, cfg.gamma_sequence)?;
            pvalues(stream)?
                .into_iter()
                .map(|p| rule.step(p).map(|d| d.is_reject()))
                .collect()
        }
        Method::Fixed(c) => pvalues(stream)?
            .into_iter()
            .map(|p| fixed_threshold_step(p, c).map(|d| d.is_reject()))
            .collect(),
        Method::Bh => Ok(offline_mask(m, &bh(&pvalues(stream)?, cfg.alpha)?)),
        Method::Sabha => {
            let w = weights(|pi| 1.0 / (1.0 - pi));
            Ok(offline_mask(m, &weighted_bh(&pvalues(stream)?, &w, cfg.alpha)?))
        }
        Method::Gap => {
            let w = weights(|pi| pi / (1.0 - pi));
            Ok(offline_mask(m, &weighted_bh(&pvalues(stream)?, &w, cfg.alpha)?))
        }
        Method::ClfdrRule => {
            let null = NullParams::standard();
            let alt = AltParams::shift(cfg.mu)?;
            let clfdrs = stream
                .main_x()
                .iter()
                .enumerate()
                .map(|(i, &x)| clfdr_oracle(x, cfg.pattern.value(i + 1, m), &null, &alt).map(|c| c.value()))
                .collect::<Result<Vec<f64>>>()?;
            Ok(offline_mask(m, clfdr_stepwise(&clfdrs, cfg.alpha)?.indices()))
        }
    }
}

/// Replication-averaged FDR and MDR at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalCurve {
    pub checkpoints: Vec<usize>,
    pub fdr: Vec<f64>,
    pub mdr: Vec<f64>,
    pub stderr_fdr: Vec<f64>,
    pub stderr_mdr: Vec<f64>,
}

impl EvalCurve {
    fn from_reps(checkpoints: Vec<usize>, per_rep: &[Vec<Proportions>]) -> Self {
        let n = per_rep.len() as f64;
        let mut curve = EvalCurve {
            fdr: Vec::with_capacity(checkpoints.len()),
            mdr: Vec::with_capacity(checkpoints.len()),
            stderr_fdr: Vec::with_capacity(checkpoints.len()),
            stderr_mdr: Vec::with_capacity(checkpoints.len()),
            checkpoints,
        };
        for k in 0..curve.checkpoints.len() {
            let (f_mean, f_se) = mean_stderr(per_rep.iter().map(|r| r[k].fdp), n);
            let (m_mean, m_se) = mean_stderr(per_rep.iter().map(|r| r[k].mdp), n);
            curve.fdr.push(f_mean);
            curve.stderr_fdr.push(f_se);
            curve.mdr.push(m_mean);
            curve.stderr_mdr.push(m_se);
        }
        curve
    }

    /// Index of checkpoint `t`, if present.
    pub fn position(&self, t: usize) -> Option<usize> {
        self.checkpoints.iter().position(|&c| c == t)
    }

    pub fn last(&self) -> (f64, f64, f64, f64) {
        let k = self.checkpoints.len() - 1;
        (self.fdr[k], self.stderr_fdr[k], self.mdr[k], self.stderr_mdr[k])
    }
}

fn mean_stderr<I: Iterator<Item = f64> + Clone>(values: I, n: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `sqrt(a^2 + b^2)` for two independent standard errors.
pub fn pooled_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Runs every method on `cfg.reps` replications (in parallel, one stream
/// per replication shared by all methods) and averages.
pub fn run_replications(cfg: &SimConfig, methods: &[Method]) -> Result<Vec<(Method, EvalCurve)>> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::Config {
            field: "methods",
            reason: "no methods requested".into(),
        });
    }
    if cfg.burn_in < 2 && methods.iter().any(|m| m.is_data_driven()) {
        return Err(Error::Config {
            field: "burn_in",
            reason: "data-driven methods need a burn-in of at least 2".into(),
        });
    }
    let checkpoints = cfg.checkpoints();
    let per_rep: Vec<Vec<Vec<Proportions>>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let stream = generate_stream(cfg, rep_seed(cfg.seed, rep));
            methods
                .iter()
                .map(|&method| {
                    let decisions = run_method(cfg, &stream, method)?;
                    evaluate(&decisions, stream.main_theta(), &checkpoints)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let reps: Vec<Vec<Proportions>> = per_rep.iter().map(|r| r[j].clone()).collect();
            (method, EvalCurve::from_reps(checkpoints.clone(), &reps))
        })
        .collect())
}
