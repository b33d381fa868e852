//! Simultaneous (offline) reference procedures.
//!
//! These see a whole batch of statistics at once: Benjamini-Hochberg on raw
//! or weighted p-values, the step-wise Clfdr rule, and the oracle Clfdr
//! threshold `gamma_OR` of a stationary mixture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{clfdr_oracle, AltParams, NullParams};

/// Bisection tolerance for [`oracle_threshold_gamma`].
pub const GAMMA_TOLERANCE: f64 = 1e-4;
/// Batches used for the batch-means standard error of `gamma_OR`.
pub const GAMMA_BATCHES: usize = 10;

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

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable, so ties keep their original order.
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Benjamini-Hochberg step-up. Returns the rejected indices in ascending
/// index order.
pub fn bh(pvalues: &[f64], alpha: f64) -> Result<Vec<usize>> {
    check_alpha(alpha)?;
    if let Some(&p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidPValue(p));
    }
    let m = pvalues.len();
    let order = ascending_order(pvalues);
    let k = order
        .iter()
        .enumerate()
        .filter(|(rank, &i)| pvalues[i] <= (rank + 1) as f64 * alpha / m as f64)
        .map(|(rank, _)| rank + 1)
        .last()
        .unwrap_or(0);
    let mut rejected = order[..k].to_vec();
    rejected.sort_unstable();
    Ok(rejected)
}

/// BH on `min(p_i / w_i, 1)`.
pub fn weighted_bh(pvalues: &[f64], weights: &[f64], alpha: f64) -> Result<Vec<usize>> {
    if pvalues.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: pvalues.len(),
            right: weights.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: format!("weights must be finite and > 0, got {w}"),
        });
    }
    let adjusted: Vec<f64> = pvalues
        .iter()
        .zip(weights)
        .map(|(&p, &w)| if (0.0..=1.0).contains(&p) { (p / w).min(1.0) } else { p })
        .collect();
    bh(&adjusted, alpha)
}

/// Largest `j` such that the mean of the first `j` values is `<= alpha`;
/// `values` must already be in ascending order.
pub fn max_prefix_count<I>(sorted: I, alpha: f64) -> usize
where
    I: IntoIterator<Item = f64>,
{
    let mut sum = 0.0;
    let mut k = 0;
    for (j, v) in sorted.into_iter().enumerate() {
        sum += v;
        if sum / (j + 1) as f64 <= alpha {
            k = j + 1;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepwiseOutcome {
    NoRejection,
    Rejected {
        k: usize,
        /// `Clfdr_(k)`, the largest rejected value.
        threshold: f64,
        /// Indices of the `k` smallest values, in ascending index order.
        indices: Vec<usize>,
    },
}

impl StepwiseOutcome {
    pub fn count(&self) -> usize {
        match self {
            StepwiseOutcome::NoRejection => 0,
            StepwiseOutcome::Rejected { k, .. } => *k,
        }
    }

    pub fn indices(&self) -> &[usize] {
        match self {
            StepwiseOutcome::NoRejection => &[],
            StepwiseOutcome::Rejected { indices, .. } => indices,
        }
    }
}

/// Step-wise Clfdr rule: reject the `k` smallest Clfdr values, `k` the
/// largest count whose running average stays within `alpha`.
pub fn clfdr_stepwise(clfdrs: &[f64], alpha: f64) -> Result<StepwiseOutcome> {
    if let Some(&c) = clfdrs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidParameter {
            name: "clfdrs",
            reason: format!("Clfdr values must lie in [0, 1], got {c}"),
        });
    }
    let order = ascending_order(clfdrs);
    let k = max_prefix_count(order.iter().map(|&i| clfdrs[i]), alpha);
    if k == 0 {
        return Ok(StepwiseOutcome::NoRejection);
    }
    let threshold = clfdrs[order[k - 1]];
    let mut indices = order[..k].to_vec();
    indices.sort_unstable();
    Ok(StepwiseOutcome::Rejected {
        k,
        threshold,
        indices,
    })
}

/// Empirical marginal FDR curve of the thresholding rule `Clfdr < gamma`
/// over a fixed sample of Clfdr values.
#[derive(Debug, Clone)]
pub struct OracleMfdr {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl OracleMfdr {
    pub fn from_clfdrs(mut clfdrs: Vec<f64>) -> Self {
        clfdrs.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(clfdrs.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &c in &clfdrs {
            acc += c;
            prefix.push(acc);
        }
        Self {
            sorted: clfdrs,
            prefix,
        }
    }

    /// Draws `n` observations from the stationary mixture and records
    /// their oracle Clfdr values.
    pub fn sample<R: Rng>(pi: f64, null: &NullParams, alt: &AltParams, n: usize, rng: &mut R) -> Result<Self> {
        let null_dist = Normal::new(null.mean, null.sd).map_err(|e| Error::InvalidParameter {
            name: "null",
            reason: e.to_string(),
        })?;
        let alt_dist = Normal::new(alt.mean, alt.sd).map_err(|e| Error::InvalidParameter {
            name: "alt",
            reason: e.to_string(),
        })?;
        let mut clfdrs = Vec::with_capacity(n);
        for _ in 0..n {
            let signal = rng.random::<f64>() < pi;
            let x = if signal {
                alt_dist.sample(rng)
            } else {
                null_dist.sample(rng)
            };
            clfdrs.push(clfdr_oracle(x, pi, null, alt)?.value());
        }
        Ok(Self::from_clfdrs(clfdrs))
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Mean Clfdr among values `< gamma`; zero when none qualify.
    pub fn mfdr(&self, gamma: f64) -> f64 {
        let n = self.sorted.partition_point(|&c| c < gamma);
        if n == 0 {
            0.0
        } else {
            self.prefix[n] / n as f64
        }
    }

    /// `Q(1)`, the mFDR of rejecting every hypothesis with Clfdr below one.
    pub fn max_mfdr(&self) -> Option<f64> {
        let n = self.sorted.partition_point(|&c| c < 1.0);
        (n > 0).then(|| self.prefix[n] / n as f64)
    }

    /// Bisection for the largest `gamma` with `Q(gamma) <= alpha`.
    pub fn threshold(&self, alpha: f64, tol: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let max_mfdr = self.max_mfdr().unwrap_or(0.0);
        if !(alpha < max_mfdr) {
            return Err(Error::OracleThresholdUndefined { alpha, max_mfdr });
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.mfdr(mid) <= alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleThreshold {
    pub gamma: f64,
    /// Batch-means Monte-Carlo standard error.
    pub stderr: f64,
}

/// Oracle Clfdr threshold of a stationary mixture by Monte Carlo and
/// bisection.
pub fn oracle_threshold_gamma(
    pi: f64,
    null: &NullParams,
    alt: &AltParams,
    alpha: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<OracleThreshold> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::InvalidParameter {
            name: "pi",
            reason: format!("proportion must lie in [0, 1], got {pi}"),
        });
    }
    if mc_samples < GAMMA_BATCHES {
        return Err(Error::InvalidParameter {
            name: "mc_samples",
            reason: format!("need at least {GAMMA_BATCHES} samples, got {mc_samples}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = mc_samples / GAMMA_BATCHES;
    let mut all = Vec::with_capacity(mc_samples);
    let mut batch_gammas = Vec::with_capacity(GAMMA_BATCHES);
    for b in 0..GAMMA_BATCHES {
        let n = if b + 1 == GAMMA_BATCHES {
            mc_samples - batch * (GAMMA_BATCHES - 1)
        } else {
            batch
        };
        let q = OracleMfdr::sample(pi, null, alt, n, &mut rng)?;
        if let Ok(g) = q.threshold(alpha, GAMMA_TOLERANCE) {
            batch_gammas.push(g);
        }
        all.extend_from_slice(&q.sorted);
    }
    let gamma = OracleMfdr::from_clfdrs(all).threshold(alpha, GAMMA_TOLERANCE)?;
    let stderr = if batch_gammas.len() == GAMMA_BATCHES {
        let n = GAMMA_BATCHES as f64;
        let mean = batch_gammas.iter().sum::<f64>() / n;
        let var = batch_gammas.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(OracleThreshold { gamma, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bh_examples() {
        assert_eq!(bh(&[0.001, 0.02, 0.04, 0.5], 0.05).unwrap(), vec![0, 1]);
        assert_eq!(bh(&[1.0, 1.0, 1.0], 0.05).unwrap(), Vec::<usize>::new());
        assert_eq!(bh(&[0.04], 0.05).unwrap(), vec![0]);
        assert_eq!(bh(&[], 0.05).unwrap(), Vec::<usize>::new());
        // Step-up: a later rank can rescue earlier ones.
        assert_eq!(bh(&[0.03, 0.04, 0.045], 0.05).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn bh_rejects_invalid() {
        assert!(bh(&[0.5, 1.2], 0.05).is_err());
        assert!(bh(&[0.5], 0.0).is_err());
        assert!(bh(&[0.5], 1.0).is_err());
    }

    #[test]
    fn weighted_bh_examples() {
        let p = [0.001, 0.02, 0.04, 0.5];
        assert_eq!(weighted_bh(&p, &[1.0; 4], 0.05).unwrap(), bh(&p, 0.05).unwrap());
        assert_eq!(weighted_bh(&[0.08], &[2.0], 0.05).unwrap(), vec![0]);
        assert!(weighted_bh(&[0.01], &[0.1], 0.05).unwrap().is_empty());
        assert!(weighted_bh(&[0.01], &[0.0], 0.05).is_err());
        assert!(weighted_bh(&[0.01], &[-1.0], 0.05).is_err());
        assert!(weighted_bh(&[0.01, 0.2], &[1.0], 0.05).is_err());
        // Down-weighted p-values are clamped at one.
        assert!(weighted_bh(&[0.9], &[0.5], 0.05).unwrap().is_empty());
    }

    #[test]
    fn stepwise_examples() {
        match clfdr_stepwise(&[0.20, 0.01, 0.03], 0.05).unwrap() {
            StepwiseOutcome::Rejected { k, threshold, indices } => {
                assert_eq!(k, 2);
                assert_eq!(threshold, 0.03);
                assert_eq!(indices, vec![1, 2]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(clfdr_stepwise(&[0.2, 0.3], 0.05).unwrap(), StepwiseOutcome::NoRejection);
        assert_eq!(clfdr_stepwise(&[0.05], 0.05).unwrap().count(), 1);
        assert!(clfdr_stepwise(&[1.5], 0.05).is_err());
    }

    #[test]
    fn oracle_gamma_undefined_without_signal() {
        let err = oracle_threshold_gamma(0.0, &NullParams::standard(), &AltParams::shift(3.0).unwrap(), 0.05, 1000, 1)
            .unwrap_err();
        assert!(matches!(err, Error::OracleThresholdUndefined { .. }));
    }

    #[test]
    fn oracle_gamma_seed_agreement_and_monotone_in_alpha() {
        let null = NullParams::standard();
        let alt = AltParams::shift(3.0).unwrap();
        let a = oracle_threshold_gamma(0.5, &null, &alt, 0.05, 400_000, 11).unwrap();
        let b = oracle_threshold_gamma(0.5, &null, &alt, 0.05, 400_000, 12).unwrap();
        assert!((a.gamma - b.gamma).abs() < 2e-3, "{a:?} vs {b:?}");
        assert!(a.gamma > 0.05 && a.gamma < 1.0);
        assert!(a.stderr.is_finite() && a.stderr < 2e-3);
        let loose = oracle_threshold_gamma(0.5, &null, &alt, 0.1, 400_000, 11).unwrap();
        assert!(loose.gamma >= a.gamma);
    }

    #[test]
    fn oracle_gamma_is_reproducible() {
        let null = NullParams::standard();
        let alt = AltParams::shift(2.0).unwrap();
        let a = oracle_threshold_gamma(0.2, &null, &alt, 0.05, 20_000, 5).unwrap();
        let b = oracle_threshold_gamma(0.2, &null, &alt, 0.05, 20_000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_mfdr_is_nondecreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = OracleMfdr::sample(0.3, &NullParams::standard(), &AltParams::shift(2.5).unwrap(), 50_000, &mut rng)
            .unwrap();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let g = i as f64 / 1000.0;
            let v = q.mfdr(g);
            assert!(v + 1e-12 >= prev, "gamma {g}: {v} < {prev}");
            // Thresholding at gamma never averages above gamma.
            assert!(v <= g + 1e-12);
            prev = v;
        }
    }

    // Independent brute force: try every prefix size and keep the largest
    // one whose condition holds.
    fn bh_brute(p: &[f64], alpha: f64) -> Vec<usize> {
        let m = p.len();
        let mut best: Vec<usize> = Vec::new();
        for &cut in p {
            let set: Vec<usize> = (0..m).filter(|&i| p[i] <= cut).collect();
            if cut <= set.len() as f64 * alpha / m as f64 && set.len() > best.len() {
                best = set;
            }
        }
        best
    }

    fn stepwise_brute(c: &[f64], alpha: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.sort_by(|&a, &b| c[a].partial_cmp(&c[b]).unwrap());
        let mut best: Vec<usize> = Vec::new();
        for size in 1..=c.len() {
            let avg = idx[..size].iter().map(|&i| c[i]).sum::<f64>() / size as f64;
            if avg <= alpha {
                best = idx[..size].to_vec();
            }
        }
        best.sort_unstable();
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn bh_matches_brute_force(raw in proptest::collection::vec(0u32..=100, 1..=6), alpha_pct in 1u32..50) {
            let p: Vec<f64> = raw.iter().map(|&v| v as f64 / 100.0).collect();
            let alpha = alpha_pct as f64 / 100.0;
            prop_assert_eq!(bh(&p, alpha).unwrap(), bh_brute(&p, alpha));
        }

        #[test]
        fn stepwise_matches_brute_force(c in proptest::collection::vec(0.0f64..=0.3, 1..=12)) {
            let out = clfdr_stepwise(&c, 0.05).unwrap();
            let brute = stepwise_brute(&c, 0.05);
            prop_assert_eq!(out.indices(), &brute[..]);
            if let StepwiseOutcome::Rejected { threshold, indices, .. } = &out {
                let by_threshold: Vec<usize> = (0..c.len()).filter(|&i| c[i] <= *threshold).collect();
                prop_assert_eq!(&by_threshold, indices);
                let avg = indices.iter().map(|&i| c[i]).sum::<f64>() / indices.len() as f64;
                prop_assert!(avg <= 0.05);
            }
        }
    }
}
