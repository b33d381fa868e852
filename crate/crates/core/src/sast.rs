//! The sequential decision engine.
//!
//! Each step scores the new observation by its Clfdr, refreshes the barrier
//! from the step-wise rule run on the last `d` Clfdr values (the current one
//! included), and then rejects iff the Clfdr is below the barrier and the
//! running average of rejected Clfdr values stays within `alpha`.
//!
//! The rejected set is tracked only by its size and Clfdr sum. The spare
//! budget `alpha * |R| - sum(R)` is the knapsack capacity: rejecting a
//! Clfdr below `alpha` grows it, rejecting one above `alpha` consumes it.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::PluginClfdr;
use crate::model::{ClfdrScore, MixtureParams};
use crate::offline::max_prefix_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Accept,
}

impl Decision {
    pub fn is_reject(self) -> bool {
        self == Decision::Reject
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Reject => "reject",
            Decision::Accept => "accept",
        })
    }
}

/// Whether the barrier is learned from the window or pinned at one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierMode {
    #[default]
    Adaptive,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t: usize,
    pub x: f64,
    pub clfdr: f64,
    pub barrier: f64,
    pub decision: Decision,
    pub capacity_after: f64,
}

/// Last `capacity` Clfdr values, kept both in arrival order and sorted by
/// `(value, arrival)`.
#[derive(Debug, Clone)]
struct ClfdrWindow {
    capacity: usize,
    arrivals: VecDeque<(f64, u64)>,
    sorted: Vec<(f64, u64)>,
    next_seq: u64,
}

fn by_value_then_seq(a: &(f64, u64), b: &(f64, u64)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl ClfdrWindow {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            arrivals: VecDeque::with_capacity(capacity),
            sorted: Vec::with_capacity(capacity),
            next_seq: 0,
        }
    }

    fn push(&mut self, value: f64) {
        if self.arrivals.len() == self.capacity {
            let old = self.arrivals.pop_front().expect("full window");
            let pos = self
                .sorted
                .binary_search_by(|probe| by_value_then_seq(probe, &old))
                .expect("evicted entry is present");
            self.sorted.remove(pos);
        }
        let entry = (value, self.next_seq);
        self.next_seq += 1;
        let pos = self
            .sorted
            .binary_search_by(|probe| by_value_then_seq(probe, &entry))
            .unwrap_err();
        self.sorted.insert(pos, entry);
        self.arrivals.push_back(entry);
    }

    fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    fn sorted_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.sorted.iter().map(|e| e.0)
    }

    fn values(&self) -> Vec<f64> {
        self.arrivals.iter().map(|e| e.0).collect()
    }
}

/// State of one SAST stream.
#[derive(Debug, Clone)]
pub struct SastState {
    alpha: f64,
    t: usize,
    gamma: f64,
    rej_count: usize,
    rej_clfdr_sum: f64,
    window: ClfdrWindow,
    mode: BarrierMode,
    barrier_updated: bool,
}

impl SastState {
    /// Fresh state: empty rejection set, barrier initialised at `alpha`.
    pub fn new(alpha: f64, d: usize) -> Result<Self> {
        Self::with_mode(alpha, d, BarrierMode::Adaptive)
    }

    pub fn with_mode(alpha: f64, d: usize, mode: BarrierMode) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("level must lie in (0, 1), got {alpha}"),
            });
        }
        if d == 0 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "barrier window must hold at least one value".into(),
            });
        }
        Ok(Self {
            alpha,
            t: 0,
            gamma: match mode {
                BarrierMode::Adaptive => alpha,
                BarrierMode::Disabled => 1.0,
            },
            rej_count: 0,
            rej_clfdr_sum: 0.0,
            window: ClfdrWindow::new(d),
            mode,
            barrier_updated: false,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of steps taken so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn barrier(&self) -> f64 {
        self.gamma
    }

    pub fn mode(&self) -> BarrierMode {
        self.mode
    }

    pub fn rejections(&self) -> usize {
        self.rej_count
    }

    pub fn rejected_clfdr_sum(&self) -> f64 {
        self.rej_clfdr_sum
    }

    /// `alpha * |R| - sum of rejected Clfdr values`.
    pub fn capacity(&self) -> f64 {
        self.alpha * self.rej_count as f64 - self.rej_clfdr_sum
    }

    /// Running average of rejected Clfdr values (zero when nothing is
    /// rejected). Never exceeds `alpha`.
    pub fn rejected_average(&self) -> f64 {
        self.rej_clfdr_sum / self.rej_count.max(1) as f64
    }

    /// True once the barrier has moved off its initial value.
    pub fn barrier_updated(&self) -> bool {
        self.barrier_updated
    }

    /// Clfdr values in the barrier window, oldest first.
    pub fn window_values(&self) -> Vec<f64> {
        self.window.values()
    }

    /// Pushes a Clfdr value into the barrier window without deciding.
    pub fn push_clfdr(&mut self, clfdr: ClfdrScore) {
        self.window.push(clfdr.value());
    }

    /// Recomputes the barrier from the current window.
    ///
    /// If the smallest Clfdr exceeds `alpha` the barrier is kept. Otherwise
    /// with `k` the step-wise rejection count the barrier becomes the
    /// `(k + 1)`-th smallest value, or one when all values pass.
    pub fn update_barrier(&mut self) -> f64 {
        if self.mode == BarrierMode::Disabled || self.window.is_empty() {
            return self.gamma;
        }
        let smallest = self.window.sorted[0].0;
        if smallest > self.alpha {
            return self.gamma;
        }
        let k = max_prefix_count(self.window.sorted_values(), self.alpha);
        self.gamma = self.window.sorted.get(k).map_or(1.0, |e| e.0);
        self.barrier_updated = true;
        self.gamma
    }

    /// Rejects iff `clfdr < barrier` and the running average including
    /// `clfdr` stays within `alpha`; updates the rejection accounting.
    pub fn decide(&mut self, clfdr: ClfdrScore) -> Decision {
        let c = clfdr.value();
        let sum = self.rej_clfdr_sum + c;
        let n = self.rej_count + 1;
        if c < self.gamma && sum / n as f64 <= self.alpha {
            self.rej_clfdr_sum = sum;
            self.rej_count = n;
            Decision::Reject
        } else {
            Decision::Accept
        }
    }

    /// One full step on an already computed Clfdr.
    pub fn step_clfdr(&mut self, x: f64, clfdr: ClfdrScore) -> DecisionRecord {
        self.t += 1;
        self.push_clfdr(clfdr);
        let barrier = self.update_barrier();
        let decision = self.decide(clfdr);
        DecisionRecord {
            t: self.t,
            x,
            clfdr: clfdr.value(),
            barrier,
            decision,
            capacity_after: self.capacity(),
        }
    }

    /// Scores `x` with `source`, steps, then lets the source learn from `x`.
    pub fn step_with<S: ClfdrSource + ?Sized>(&mut self, x: f64, source: &mut S) -> Result<DecisionRecord> {
        let t = self.t + 1;
        let clfdr = source.clfdr(t, x)?;
        let record = self.step_clfdr(x, clfdr);
        source.observe(t, x)?;
        Ok(record)
    }

    /// Oracle step with known mixture parameters.
    pub fn step_oracle(&mut self, x: f64, params: &MixtureParams) -> Result<DecisionRecord> {
        let clfdr = params.clfdr(self.t + 1, x)?;
        Ok(self.step_clfdr(x, clfdr))
    }

    /// Data-driven step with the plug-in estimator; fails with
    /// [`Error::NotReady`] until the estimator has seen its burn-in.
    pub fn step_datadriven(&mut self, x: f64, estimator: &mut PluginClfdr) -> Result<DecisionRecord> {
        self.step_with(x, estimator)
    }
}

/// Anything that can score observation `x` at time `t`.
pub trait ClfdrSource {
    fn clfdr(&mut self, t: usize, x: f64) -> Result<ClfdrScore>;

    /// Called after the decision at `t` so the source can learn from `x`.
    fn observe(&mut self, _t: usize, _x: f64) -> Result<()> {
        Ok(())
    }
}

impl ClfdrSource for MixtureParams {
    fn clfdr(&mut self, t: usize, x: f64) -> Result<ClfdrScore> {
        MixtureParams::clfdr(self, t, x)
    }
}

impl ClfdrSource for PluginClfdr {
    fn clfdr(&mut self, t: usize, x: f64) -> Result<ClfdrScore> {
        self.clfdr_at(t as i64, x)
    }

    fn observe(&mut self, t: usize, x: f64) -> Result<()> {
        PluginClfdr::observe(self, t as i64, x)
    }
}
