use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sast_core::baselines::{GammaSequence, Lond, LordPlusPlus};
use sast_core::model::{clfdr_oracle, std_normal_cdf, std_normal_quantile, AltParams, NullParams};
use sast_core::simulation::{generate_stream, rep_seed, run_sast, Method, PiPattern, SimConfig};

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn baselines_control_fdr_on_null_streams() {
    let (alpha, m, reps) = (0.05, 5000, 200);
    let mut fdp_lond = Vec::with_capacity(reps);
    let mut fdp_lord = Vec::with_capacity(reps);
    for rep in 0..reps as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed(17, rep));
        let mut lond = Lond::new(alpha, GammaSequence::InverseSquare).unwrap();
        let mut lord = LordPlusPlus::with_default_wealth(alpha, GammaSequence::InverseSquare).unwrap();
        let (mut r_lond, mut r_lord) = (0usize, 0usize);
        for _ in 0..m {
            let p: f64 = rng.random();
            r_lond += lond.step(p).unwrap().is_reject() as usize;
            r_lord += lord.step(p).unwrap().is_reject() as usize;
        }
        // Every rejection is false on an all-null stream.
        fdp_lond.push((r_lond > 0) as u8 as f64);
        fdp_lord.push((r_lord > 0) as u8 as f64);
    }
    for (name, fdp) in [("lond", fdp_lond), ("lordpp", fdp_lord)] {
        let (fdr, se) = mean_se(&fdp);
        assert!(fdr <= alpha + 2.0 * se, "{name}: {fdr} +- {se}");
    }
}

/// `P(P > tau)` under `N(mu, 1)` with two-sided p-values.
fn alt_tail(mu: f64, tau: f64) -> f64 {
    let z = std_normal_quantile(1.0 - tau / 2.0);
    std_normal_cdf(z - mu) - std_normal_cdf(-z - mu)
}

#[test]
fn screened_proportion_is_conservative() {
    let null = NullParams::standard();
    for &pi in &[0.1, 0.5] {
        for &mu in &[2.0, 3.0] {
            for &tau in &[0.3, 0.5, 0.7] {
                let tail = (1.0 - pi) * (1.0 - tau) + pi * alt_tail(mu, tau);
                let pi_tau = 1.0 - tail / (1.0 - tau);
                assert!(pi_tau <= pi + 1e-15 && pi_tau >= 0.0, "pi {pi} mu {mu} tau {tau}: {pi_tau}");
                let alt = AltParams::shift(mu).unwrap();
                for i in 0..=60 {
                    let x = -3.0 + 0.15 * i as f64;
                    let exact = clfdr_oracle(x, pi, &null, &alt).unwrap().value();
                    let screened = clfdr_oracle(x, pi_tau, &null, &alt).unwrap().value();
                    assert!(screened >= exact - 1e-12);
                }
            }
        }
    }
}

#[test]
fn running_average_never_exceeds_alpha_on_heterogeneous_streams() {
    let mut cfg = SimConfig::new(3000, 2.5, PiPattern::custom(|t, _| if (t / 250) % 2 == 1 { 0.4 } else { 0.02 }));
    cfg.burn_in = 300;
    let stream = generate_stream(&cfg, 5);
    for method in [Method::SastOracle, Method::SastDataDriven] {
        let mut last_rejections = 0;
        let records = run_sast(&cfg, &stream, method, |r, s| {
            assert!(s.rejected_clfdr_sum() <= cfg.alpha * s.rejections() as f64 + 1e-12);
            assert!(s.barrier() >= cfg.alpha);
            if r.decision.is_reject() {
                assert!(r.clfdr < r.barrier);
                assert_eq!(s.rejections(), last_rejections + 1);
            }
            last_rejections = s.rejections();
        })
        .unwrap();
        assert_eq!(records.len(), cfg.m);
        assert!(last_rejections > 0, "{method} never rejected");
    }
}
