//! Kernel estimators for the data-driven Clfdr.
//!
//! All estimators read a [`SlidingWindow`] of past observations. The time
//! kernel only ever sees indices strictly before the evaluation time, so the
//! weighting is one-sided and the current observation never contributes to
//! its own estimate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{null_density, z_to_pvalue, ClfdrScore, NullParams, DENSITY_FLOOR};
use crate::offline;

/// Upper clamp on the estimated non-null proportion is `1 - PI_EPS`.
pub const PI_EPS: f64 = 1e-10;
/// Level at which BH is run to pick the screening threshold.
pub const TAU_BH_LEVEL: f64 = 0.5;
/// Bandwidth used when the window values have no spread.
pub const FALLBACK_BANDWIDTH: f64 = 1.0;

pub const DEFAULT_WINDOW: usize = 1000;
pub const DEFAULT_REFRESH: usize = 200;
pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Unit-bandwidth kernel value.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `K_h(u) = K(u / h) / h`.
    pub fn scaled(self, u: f64, h: f64) -> f64 {
        self.eval(u / h) / h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kernel: Kernel,
    /// Time bandwidth in index steps.
    pub h_t: f64,
    /// Value bandwidth.
    pub h_x: f64,
    /// Window length.
    pub d: usize,
}

impl KernelConfig {
    pub fn new(kernel: Kernel, h_t: f64, h_x: f64, d: usize) -> Result<Self> {
        let cfg = Self { kernel, h_t, h_x, d };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, h) in [("h_t", self.h_t), ("h_x", self.h_x)] {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("bandwidth must be finite and > 0, got {h}"),
                });
            }
        }
        if self.d < 2 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("window length must be at least 2, got {}", self.d),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEntry {
    pub index: i64,
    pub x: f64,
    pub p: f64,
}

/// The most recent `capacity` observations, oldest first.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    entries: VecDeque<WindowEntry>,
    capacity: usize,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "window capacity must be positive".into(),
            });
        }
        Ok(Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn from_entries<I>(capacity: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64, f64)>,
    {
        let mut w = Self::new(capacity)?;
        for (index, x, p) in entries {
            w.push(index, x, p)?;
        }
        Ok(w)
    }

    /// Appends an observation, evicting the oldest when full.
    pub fn push(&mut self, index: i64, x: f64, p: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite { what: "x", value: x });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPValue(p));
        }
        if let Some(last) = self.entries.back() {
            if index <= last.index {
                return Err(Error::NonIncreasingIndex {
                    index,
                    last: last.index,
                });
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(WindowEntry { index, x, p });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &WindowEntry> + Clone + '_ {
        self.entries.iter()
    }

    pub fn last_index(&self) -> Option<i64> {
        self.entries.back().map(|e| e.index)
    }
}

/// Time weights `K_{h_t}(j - t)` of a window frozen at time `t`.
#[derive(Debug, Clone)]
pub struct TimeWeights {
    t: i64,
    weights: Vec<f64>,
    total: f64,
}

impl TimeWeights {
    pub fn build(window: &SlidingWindow, t: i64, cfg: &KernelConfig) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let mut weights = Vec::with_capacity(window.len());
        for e in window.iter() {
            if e.index >= t {
                return Err(Error::FutureIndex { index: e.index, t });
            }
            weights.push(cfg.kernel.scaled((e.index - t) as f64, cfg.h_t));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroTimeWeight { t });
        }
        Ok(Self { t, weights, total })
    }

    pub fn t(&self) -> i64 {
        self.t
    }
}

/// Conditional density estimate frozen at one time point; evaluating it at a
/// new `x` re-runs the value kernel over the stored window values.
#[derive(Debug, Clone)]
pub struct DensitySnapshot {
    xs: Vec<f64>,
    time: TimeWeights,
    kernel: Kernel,
    h_x: f64,
}

impl DensitySnapshot {
    pub fn build(window: &SlidingWindow, t: i64, cfg: &KernelConfig) -> Result<Self> {
        cfg.validate()?;
        let time = TimeWeights::build(window, t, cfg)?;
        Ok(Self {
            xs: window.iter().map(|e| e.x).collect(),
            time,
            kernel: cfg.kernel,
            h_x: cfg.h_x,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let num: f64 = self
            .xs
            .iter()
            .zip(&self.time.weights)
            .map(|(&xj, &w)| w * self.kernel.scaled(xj - x, self.h_x))
            .sum();
        num / self.time.total
    }
}

/// Time-weighted kernel density of the window evaluated at `x`.
pub fn estimate_density(window: &SlidingWindow, t: i64, x: f64, cfg: &KernelConfig) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite { what: "x", value: x });
    }
    Ok(DensitySnapshot::build(window, t, cfg)?.eval(x))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("screening threshold must lie in (0, 1), got {tau}"),
        })
    }
}

fn screened_pi(window: &SlidingWindow, weights: &TimeWeights, tau: f64) -> f64 {
    let above: f64 = window
        .iter()
        .zip(&weights.weights)
        .filter(|(e, _)| e.p > tau)
        .map(|(_, &w)| w)
        .sum();
    let raw = 1.0 - above / ((1.0 - tau) * weights.total);
    raw.clamp(0.0, 1.0 - PI_EPS)
}

/// Weighted screening estimate of the non-null proportion at `t`, clamped
/// into `[0, 1 - PI_EPS]`.
pub fn estimate_pi(window: &SlidingWindow, t: i64, tau: f64, cfg: &KernelConfig) -> Result<f64> {
    check_tau(tau)?;
    let weights = TimeWeights::build(window, t, cfg)?;
    Ok(screened_pi(window, &weights, tau))
}

/// How the screening threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "tau")]
pub enum TauPolicy {
    Fixed(f64),
    BhAdaptive,
}

impl Default for TauPolicy {
    fn default() -> Self {
        TauPolicy::Fixed(0.5)
    }
}

impl TauPolicy {
    pub fn resolve(&self, window: &SlidingWindow) -> Result<f64> {
        match *self {
            TauPolicy::Fixed(tau) => {
                check_tau(tau)?;
                Ok(tau)
            }
            TauPolicy::BhAdaptive => select_tau_bh(window),
        }
    }
}

/// Largest p-value rejected by BH at level 0.5 over the window; 0.5 when
/// nothing is rejected.
pub fn select_tau_bh(window: &SlidingWindow) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let ps: Vec<f64> = window.iter().map(|e| e.p).collect();
    let rejected = offline::bh(&ps, TAU_BH_LEVEL)?;
    let tau = rejected
        .iter()
        .map(|&i| ps[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if tau.is_finite() {
        // A zero p-value would make the screening set degenerate.
        Ok(tau.max(f64::MIN_POSITIVE))
    } else {
        Ok(TAU_BH_LEVEL)
    }
}

/// `min{(1 - pi_hat) f0 / f_hat, 1}` with the denominator floored.
pub fn plugin_clfdr(pi_hat: f64, f0: f64, f_hat: f64) -> Result<ClfdrScore> {
    let ratio = (1.0 - pi_hat) * f0 / f_hat.max(DENSITY_FLOOR);
    ClfdrScore::new(ratio.min(1.0))
}

/// Plug-in Clfdr of `x_t` at time `t` from the window.
pub fn estimate_clfdr(
    window: &SlidingWindow,
    t: i64,
    x_t: f64,
    null: &NullParams,
    cfg: &KernelConfig,
    tau: TauPolicy,
) -> Result<ClfdrScore> {
    let state = EstimatorState::build(window, t, null, cfg, tau)?;
    state.clfdr(x_t)
}

/// Silverman's rule `1.06 * sd * n^(-1/5)` for the index and value axes.
pub fn silverman_bandwidths(window: &SlidingWindow) -> Result<(f64, f64)> {
    let n = window.len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("Silverman's rule needs at least 2 entries, got {n}"),
        });
    }
    let factor = 1.06 * (n as f64).powf(-0.2);
    let sd_idx = sample_sd(window.iter().map(|e| e.index as f64));
    let sd_x = sample_sd(window.iter().map(|e| e.x));
    let h_t = factor * sd_idx;
    let h_x = if sd_x > 0.0 {
        factor * sd_x
    } else {
        FALLBACK_BANDWIDTH
    };
    Ok((h_t, h_x))
}

fn sample_sd<I: Iterator<Item = f64> + Clone>(values: I) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Everything needed to score new observations against a frozen window:
/// the density snapshot, the proportion estimate and the null.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    density: DensitySnapshot,
    pi_hat: f64,
    tau: f64,
    null: NullParams,
}

impl EstimatorState {
    pub fn build(
        window: &SlidingWindow,
        t: i64,
        null: &NullParams,
        cfg: &KernelConfig,
        tau: TauPolicy,
    ) -> Result<Self> {
        null.validate()?;
        let density = DensitySnapshot::build(window, t, cfg)?;
        let tau = tau.resolve(window)?;
        let pi_hat = screened_pi(window, &density.time, tau);
        Ok(Self {
            density,
            pi_hat,
            tau,
            null: *null,
        })
    }

    pub fn clfdr(&self, x: f64) -> Result<ClfdrScore> {
        let f0 = null_density(x, &self.null)?;
        plugin_clfdr(self.pi_hat, f0, self.density.eval(x))
    }

    pub fn density(&self, x: f64) -> f64 {
        self.density.eval(x)
    }

    pub fn pi_hat(&self) -> f64 {
        self.pi_hat
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t(&self) -> i64 {
        self.density.time.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Bandwidth {
    /// Re-derived from the window by Silverman's rule at every refresh.
    Silverman,
    Fixed { h_t: f64, h_x: f64 },
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Silverman
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PluginSettings {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    pub tau: TauPolicy,
    /// Window length `d`.
    pub d: usize,
    /// Steps between estimator refreshes.
    pub refresh: usize,
    /// Observations required before the first estimate.
    pub burn_in: usize,
}

impl Default for PluginSettings {
    fn default() -> Self {
        Self {
            kernel: Kernel::Gaussian,
            bandwidth: Bandwidth::Silverman,
            tau: TauPolicy::BhAdaptive,
            d: DEFAULT_WINDOW,
            refresh: DEFAULT_REFRESH,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

impl PluginSettings {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("window length must be at least 2, got {}", self.d),
            });
        }
        if self.refresh == 0 {
            return Err(Error::InvalidParameter {
                name: "refresh",
                reason: "refresh cadence must be positive".into(),
            });
        }
        if let Bandwidth::Fixed { h_t, h_x } = self.bandwidth {
            KernelConfig::new(self.kernel, h_t, h_x, self.d)?;
        }
        if let TauPolicy::Fixed(tau) = self.tau {
            check_tau(tau)?;
        }
        Ok(())
    }

    /// Burn-in actually enforced: Silverman's rule needs two points.
    pub fn min_ready(&self) -> usize {
        self.burn_in.max(2)
    }
}

/// Streaming plug-in Clfdr estimator.
///
/// Owns the sliding window, rebuilds its [`EstimatorState`] every
/// `refresh` steps and scores observations against the cached state in
/// between.
#[derive(Debug, Clone)]
pub struct PluginClfdr {
    settings: PluginSettings,
    null: NullParams,
    window: SlidingWindow,
    cache: Option<EstimatorState>,
}

impl PluginClfdr {
    pub fn new(settings: PluginSettings, null: NullParams) -> Result<Self> {
        settings.validate()?;
        null.validate()?;
        Ok(Self {
            window: SlidingWindow::new(settings.d)?,
            settings,
            null,
            cache: None,
        })
    }

    pub fn settings(&self) -> &PluginSettings {
        &self.settings
    }

    pub fn null(&self) -> &NullParams {
        &self.null
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub fn state(&self) -> Option<&EstimatorState> {
        self.cache.as_ref()
    }

    pub fn is_ready(&self) -> bool {
        self.window.len() >= self.settings.min_ready()
    }

    /// Adds an observation to the window; its p-value comes from the null.
    pub fn observe(&mut self, index: i64, x: f64) -> Result<()> {
        let p = z_to_pvalue(x, &self.null)?;
        self.window.push(index, x, p)
    }

    pub fn kernel_config(&self) -> Result<KernelConfig> {
        let (h_t, h_x) = match self.settings.bandwidth {
            Bandwidth::Silverman => silverman_bandwidths(&self.window)?,
            Bandwidth::Fixed { h_t, h_x } => (h_t, h_x),
        };
        KernelConfig::new(self.settings.kernel, h_t, h_x, self.settings.d)
    }

    fn needs_refresh(&self, t: i64) -> bool {
        match &self.cache {
            None => true,
            Some(s) => t - s.t() >= self.settings.refresh as i64 || t < s.t(),
        }
    }

    /// Estimated Clfdr of `x` at time `t`. Errors with `NotReady` until the
    /// burn-in has been observed.
    pub fn clfdr_at(&mut self, t: i64, x: f64) -> Result<ClfdrScore> {
        if !self.is_ready() {
            return Err(Error::NotReady {
                have: self.window.len(),
                need: self.settings.min_ready(),
            });
        }
        if self.needs_refresh(t) {
            let cfg = self.kernel_config()?;
            self.cache = Some(EstimatorState::build(
                &self.window,
                t,
                &self.null,
                &cfg,
                self.settings.tau,
            )?);
        }
        self.cache.as_ref().expect("refreshed above").clfdr(x)
    }
}
