//! Two-group Gaussian mixture model, the conditional local false discovery
//! rate (Clfdr) and conversions between z-scores and two-sided p-values.
//!
//! Observations follow
//!
//! ```text
//! theta_t ~ Bernoulli(pi_t),   X_t | theta_t ~ (1 - theta_t) F0 + theta_t F1t
//! ```
//!
//! with a known null `F0` and a possibly time-varying alternative `F1t`.
//! The Clfdr of an observation is the posterior probability that it is null:
//! `(1 - pi_t) f0(x) / ((1 - pi_t) f0(x) + pi_t f1t(x))`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Densities are floored here before they enter a ratio.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Gaussian null distribution `N(mean, sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullParams {
    pub mean: f64,
    pub sd: f64,
}

impl NullParams {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        check_gaussian("null", mean, sd)?;
        Ok(Self { mean, sd })
    }

    pub fn standard() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_gaussian("null", self.mean, self.sd)
    }
}

impl Default for NullParams {
    fn default() -> Self {
        Self::standard()
    }
}

/// Gaussian alternative `N(mean, sd^2)`; `mean` is the signal location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltParams {
    pub mean: f64,
    pub sd: f64,
}

impl AltParams {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        check_gaussian("alt", mean, sd)?;
        Ok(Self { mean, sd })
    }

    /// Unit-variance location shift, the family used in the simulations.
    pub fn shift(mean: f64) -> Result<Self> {
        Self::new(mean, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_gaussian("alt", self.mean, self.sd)
    }
}

fn check_gaussian(which: &'static str, mean: f64, sd: f64) -> Result<()> {
    if !mean.is_finite() {
        return Err(Error::InvalidParameter {
            name: which,
            reason: format!("mean must be finite, got {mean}"),
        });
    }
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::InvalidParameter {
            name: which,
            reason: format!("sd must be finite and > 0, got {sd}"),
        });
    }
    Ok(())
}

type PiFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;
type AltFn = Arc<dyn Fn(usize) -> AltParams + Send + Sync>;

/// Alternative component, either fixed or indexed by time.
#[derive(Clone)]
pub enum AltSpec {
    Fixed(AltParams),
    Varying(AltFn),
}

impl fmt::Debug for AltSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AltSpec::Fixed(a) => f.debug_tuple("Fixed").field(a).finish(),
            AltSpec::Varying(_) => f.write_str("Varying(..)"),
        }
    }
}

/// Time-indexed two-group mixture: non-null proportion `pi(t)`, null and
/// alternative components.
#[derive(Clone)]
pub struct MixtureParams {
    pi: PiFn,
    null: NullParams,
    alt: AltSpec,
}

impl fmt::Debug for MixtureParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixtureParams")
            .field("null", &self.null)
            .field("alt", &self.alt)
            .finish_non_exhaustive()
    }
}

impl MixtureParams {
    pub fn new<F>(pi: F, null: NullParams, alt: AltSpec) -> Result<Self>
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        null.validate()?;
        if let AltSpec::Fixed(a) = &alt {
            a.validate()?;
        }
        Ok(Self {
            pi: Arc::new(pi),
            null,
            alt,
        })
    }

    pub fn constant(pi: f64, null: NullParams, alt: AltParams) -> Result<Self> {
        check_proportion(pi)?;
        Self::new(move |_| pi, null, AltSpec::Fixed(alt))
    }

    /// Non-null proportion at time `t`, checked to lie in `[0, 1]`.
    pub fn pi_at(&self, t: usize) -> Result<f64> {
        let pi = (self.pi)(t);
        check_proportion(pi)?;
        Ok(pi)
    }

    pub fn null(&self) -> &NullParams {
        &self.null
    }

    pub fn alt_at(&self, t: usize) -> AltParams {
        match &self.alt {
            AltSpec::Fixed(a) => *a,
            AltSpec::Varying(f) => f(t),
        }
    }

    /// Oracle Clfdr of observation `x` arriving at time `t`.
    pub fn clfdr(&self, t: usize, x: f64) -> Result<ClfdrScore> {
        clfdr_oracle(x, self.pi_at(t)?, &self.null, &self.alt_at(t))
    }
}

fn check_proportion(pi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&pi) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "pi",
            reason: format!("proportion must lie in [0, 1], got {pi}"),
        })
    }
}

/// A Clfdr value, always inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ClfdrScore(f64);

impl ClfdrScore {
    /// Clamps into `[0, 1]`; rejects NaN.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::NonFinite {
                what: "clfdr",
                value,
            });
        }
        Ok(Self(value.clamp(0.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<ClfdrScore> for f64 {
    fn from(c: ClfdrScore) -> f64 {
        c.0
    }
}

fn check_finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what, value })
    }
}

fn gaussian_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

pub(crate) fn gaussian_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Null density `f0(x)`.
pub fn null_density(x: f64, null: &NullParams) -> Result<f64> {
    check_finite("x", x)?;
    null.validate()?;
    Ok(gaussian_pdf(x, null.mean, null.sd))
}

/// Clfdr under a Gaussian null and Gaussian alternative.
///
/// Evaluated in log space so far-tail observations never produce 0/0.
pub fn clfdr_oracle(x: f64, pi_t: f64, null: &NullParams, alt: &AltParams) -> Result<ClfdrScore> {
    check_finite("x", x)?;
    check_proportion(pi_t)?;
    if pi_t == 0.0 {
        return Ok(ClfdrScore(1.0));
    }
    if pi_t == 1.0 {
        return Ok(ClfdrScore(0.0));
    }
    let log_null = (1.0 - pi_t).ln() + gaussian_log_pdf(x, null.mean, null.sd);
    let log_alt = pi_t.ln() + gaussian_log_pdf(x, alt.mean, alt.sd);
    // 1 / (1 + exp(log_alt - log_null)), stable for either sign.
    let diff = log_alt - log_null;
    let value = if diff > 0.0 {
        let e = (-diff).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + diff.exp())
    };
    ClfdrScore::new(value)
}

/// Clfdr from an arbitrary alternative density.
///
/// Both densities are floored at [`DENSITY_FLOOR`]; if both underflow to zero
/// the posterior is undefined and an error is returned.
pub fn clfdr_with_density<F>(x: f64, pi_t: f64, null: &NullParams, alt_density: F) -> Result<ClfdrScore>
where
    F: Fn(f64) -> f64,
{
    check_finite("x", x)?;
    check_proportion(pi_t)?;
    let f0 = gaussian_pdf(x, null.mean, null.sd);
    let f1 = alt_density(x);
    if f1.is_nan() || f1 < 0.0 {
        return Err(Error::NonFinite {
            what: "alternative density",
            value: f1,
        });
    }
    if f0 <= 0.0 && f1 <= 0.0 {
        return Err(Error::DegenerateDensity { x });
    }
    let num = (1.0 - pi_t) * f0.max(DENSITY_FLOOR);
    let den = num + pi_t * f1.max(DENSITY_FLOOR);
    ClfdrScore::new(num / den)
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided p-value `2 * Phi(-|z - mean| / sd)`.
pub fn z_to_pvalue(z: f64, null: &NullParams) -> Result<f64> {
    check_finite("z", z)?;
    null.validate()?;
    let s = -(z - null.mean).abs() / null.sd;
    Ok((2.0 * std_normal_cdf(s)).min(1.0))
}

/// Maps a two-sided p-value to a z-score of random sign.
///
/// `|z| = |Phi^{-1}(p / 2)|`; `coin = true` gives the positive branch.
pub fn p_to_z_randomized(p: f64, coin: bool) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidPValue(p));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let magnitude = -std_normal_quantile(p / 2.0);
    Ok(if coin { magnitude } else { -magnitude })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n01() -> NullParams {
        NullParams::standard()
    }

    #[test]
    fn null_density_examples() {
        assert!((null_density(0.0, &n01()).unwrap() - 0.39894).abs() < 1e-5);
        assert!((null_density(2.0, &n01()).unwrap() - 0.05399).abs() < 1e-5);
        let empirical = NullParams::new(0.028, 0.618).unwrap();
        let want = 1.0 / (0.618 * (2.0 * PI).sqrt());
        assert!((null_density(0.028, &empirical).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.6455).abs() < 1e-4);
    }

    #[test]
    fn null_density_rejects_bad_input() {
        assert!(null_density(f64::NAN, &n01()).is_err());
        assert!(null_density(f64::INFINITY, &n01()).is_err());
        assert!(NullParams::new(0.0, 0.0).is_err());
        assert!(NullParams::new(0.0, -1.0).is_err());
    }

    #[test]
    fn clfdr_examples() {
        let alt = AltParams::shift(2.0).unwrap();
        assert_eq!(clfdr_oracle(1.3, 0.0, &n01(), &alt).unwrap().value(), 1.0);
        assert_eq!(clfdr_oracle(1.3, 1.0, &n01(), &alt).unwrap().value(), 0.0);
        let at0 = clfdr_oracle(0.0, 0.5, &n01(), &alt).unwrap().value();
        let at2 = clfdr_oracle(2.0, 0.5, &n01(), &alt).unwrap().value();
        assert!((at0 - 0.8808).abs() < 1e-4);
        assert!((at2 - 0.1192).abs() < 1e-4);
        assert!((at0 + at2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clfdr_far_tails_do_not_fail() {
        let alt = AltParams::shift(3.0).unwrap();
        let right = clfdr_oracle(80.0, 0.1, &n01(), &alt).unwrap().value();
        let left = clfdr_oracle(-80.0, 0.1, &n01(), &alt).unwrap().value();
        assert!(right > 0.0 && right < 1e-100);
        assert_eq!(left, 1.0);
    }

    #[test]
    fn clfdr_with_density_matches_gaussian_path() {
        let alt = AltParams::shift(2.0).unwrap();
        for &x in &[-1.0, 0.0, 0.7, 2.0, 3.5] {
            let a = clfdr_oracle(x, 0.3, &n01(), &alt).unwrap().value();
            let b = clfdr_with_density(x, 0.3, &n01(), |v| gaussian_pdf(v, 2.0, 1.0))
                .unwrap()
                .value();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn clfdr_with_density_both_zero_is_error() {
        let err = clfdr_with_density(1e6, 0.5, &n01(), |_| 0.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateDensity { .. }));
    }

    #[test]
    fn clfdr_rejects_bad_proportion() {
        let alt = AltParams::shift(2.0).unwrap();
        assert!(clfdr_oracle(0.0, 1.5, &n01(), &alt).is_err());
        assert!(clfdr_oracle(0.0, -0.1, &n01(), &alt).is_err());
    }

    #[test]
    fn z_to_pvalue_examples() {
        assert_eq!(z_to_pvalue(0.0, &n01()).unwrap(), 1.0);
        assert!((z_to_pvalue(1.96, &n01()).unwrap() - 0.05).abs() < 1e-4);
        assert!((z_to_pvalue(-1.96, &n01()).unwrap() - 0.05).abs() < 1e-4);
        let empirical = NullParams::new(0.028, 0.618).unwrap();
        let z = 0.028 + 1.96 * 0.618;
        assert!((z_to_pvalue(z, &empirical).unwrap() - 0.05).abs() < 1e-4);
        assert!(z_to_pvalue(f64::NAN, &n01()).is_err());
    }

    #[test]
    fn p_to_z_examples() {
        assert_eq!(p_to_z_randomized(1.0, false).unwrap(), 0.0);
        let up = p_to_z_randomized(0.05, true).unwrap();
        let down = p_to_z_randomized(0.05, false).unwrap();
        assert!((up - 1.959964).abs() < 1e-5);
        assert_eq!(up, -down);
        assert!(p_to_z_randomized(0.0, true).is_err());
        assert!(p_to_z_randomized(1.2, true).is_err());
        assert!(p_to_z_randomized(f64::NAN, true).is_err());
    }

    #[test]
    fn p_z_round_trip() {
        for &p in &[0.9, 0.5, 0.05, 1e-6] {
            for coin in [false, true] {
                let z = p_to_z_randomized(p, coin).unwrap();
                let back = z_to_pvalue(z, &n01()).unwrap();
                assert!((back - p).abs() < 1e-10, "p={p} coin={coin} back={back}");
            }
        }
    }

    #[test]
    fn right_tail_clfdr_is_non_increasing() {
        let alt = AltParams::shift(2.5).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let x = 2.5 + i as f64 * 0.08;
            let c = clfdr_oracle(x, 0.2, &n01(), &alt).unwrap().value();
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn mixture_checks_proportion() {
        let alt = AltParams::shift(2.0).unwrap();
        let m = MixtureParams::new(|t| t as f64 / 10.0, n01(), AltSpec::Fixed(alt)).unwrap();
        assert!(m.pi_at(5).is_ok());
        assert!(m.pi_at(11).is_err());
        assert!(MixtureParams::constant(1.2, n01(), alt).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clfdr_in_unit_interval(x in -50.0f64..50.0, pi in 0.0f64..=1.0, mu in -5.0f64..5.0, sd in 0.2f64..4.0) {
                let alt = AltParams::new(mu, sd).unwrap();
                let c = clfdr_oracle(x, pi, &NullParams::standard(), &alt).unwrap().value();
                prop_assert!((0.0..=1.0).contains(&c));
            }

            #[test]
            fn clfdr_endpoints_exact(x in -50.0f64..50.0, mu in -5.0f64..5.0) {
                let alt = AltParams::shift(mu).unwrap();
                prop_assert_eq!(clfdr_oracle(x, 0.0, &NullParams::standard(), &alt).unwrap().value(), 1.0);
                prop_assert_eq!(clfdr_oracle(x, 1.0, &NullParams::standard(), &alt).unwrap().value(), 0.0);
            }
        }
    }
}
