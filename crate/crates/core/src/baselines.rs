//! Competing online rules driven by p-values: LOND, LORD++ and a fixed
//! threshold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sast::Decision;

/// Discount sequence `gamma_j`, `j >= 1`, summing to at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSequence {
    /// `gamma_j = 6 / (pi^2 j^2)`.
    #[default]
    InverseSquare,
    /// `gamma_j = 0.0722 log(max(j, 2)) / (j exp(sqrt(log j)))`, the
    /// slowly decaying choice common for LORD-type rules.
    LogDecay,
}

impl GammaSequence {
    pub fn value(self, j: usize) -> f64 {
        assert!(j >= 1, "gamma sequence is indexed from 1");
        let jf = j as f64;
        match self {
            GammaSequence::InverseSquare => 6.0 / (PI * PI * jf * jf),
            GammaSequence::LogDecay => 0.0722 * jf.max(2.0).ln() / (jf * jf.ln().sqrt().exp()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineState {
    pub t: usize,
    pub rejection_times: Vec<usize>,
    /// Remaining alpha-wealth; only maintained by LORD++.
    pub wealth: f64,
}

impl BaselineState {
    pub fn rejection_count(&self) -> usize {
        self.rejection_times.len()
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidPValue(p))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("level must lie in (0, 1), got {alpha}"),
        })
    }
}

/// LOND: test `t` at level `alpha * gamma_t * (D(t-1) + 1)`.
#[derive(Debug, Clone)]
pub struct Lond {
    alpha: f64,
    gamma: GammaSequence,
    state: BaselineState,
}

impl Lond {
    pub fn new(alpha: f64, gamma: GammaSequence) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            gamma,
            state: BaselineState::default(),
        })
    }

    pub fn state(&self) -> &BaselineState {
        &self.state
    }

    /// Level for the next hypothesis.
    pub fn next_level(&self) -> f64 {
        self.alpha * self.gamma.value(self.state.t + 1) * (self.state.rejection_count() + 1) as f64
    }

    pub fn step(&mut self, p: f64) -> Result<Decision> {
        check_p(p)?;
        let level = self.next_level();
        self.state.t += 1;
        if p <= level {
            self.state.rejection_times.push(self.state.t);
            Ok(Decision::Reject)
        } else {
            Ok(Decision::Accept)
        }
    }
}

/// LORD++:
/// `alpha_t = gamma_t w0 + (alpha - w0) gamma_{t - tau_1} + alpha * sum_{j >= 2} gamma_{t - tau_j}`.
#[derive(Debug, Clone)]
pub struct LordPlusPlus {
    alpha: f64,
    w0: f64,
    gamma: GammaSequence,
    state: BaselineState,
}

impl LordPlusPlus {
    pub fn new(alpha: f64, w0: f64, gamma: GammaSequence) -> Result<Self> {
        check_alpha(alpha)?;
        if !(w0 > 0.0 && w0 <= alpha) {
            return Err(Error::InvalidParameter {
                name: "w0",
                reason: format!("initial wealth must lie in (0, alpha], got {w0}"),
            });
        }
        Ok(Self {
            alpha,
            w0,
            gamma,
            state: BaselineState {
                wealth: w0,
                ..BaselineState::default()
            },
        })
    }

    /// Default initial wealth `alpha / 2`.
    pub fn with_default_wealth(alpha: f64, gamma: GammaSequence) -> Result<Self> {
        Self::new(alpha, alpha / 2.0, gamma)
    }

    pub fn state(&self) -> &BaselineState {
        &self.state
    }

    pub fn next_level(&self) -> f64 {
        let t = self.state.t + 1;
        let mut level = self.gamma.value(t) * self.w0;
        for (j, &tau) in self.state.rejection_times.iter().enumerate() {
            let g = self.gamma.value(t - tau);
            level += if j == 0 { (self.alpha - self.w0) * g } else { self.alpha * g };
        }
        level
    }

    pub fn step(&mut self, p: f64) -> Result<Decision> {
        check_p(p)?;
        let level = self.next_level();
        self.state.t += 1;
        self.state.wealth -= level;
        if p <= level {
            self.state.wealth += if self.state.rejection_times.is_empty() {
                self.alpha - self.w0
            } else {
                self.alpha
            };
            self.state.rejection_times.push(self.state.t);
            Ok(Decision::Reject)
        } else {
            Ok(Decision::Accept)
        }
    }
}

/// Reject iff `p <= c`.
pub fn fixed_threshold_step(p: f64, c: f64) -> Result<Decision> {
    check_p(p)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: format!("threshold must lie in (0, 1], got {c}"),
        });
    }
    Ok(if p <= c { Decision::Reject } else { Decision::Accept })
}
