use sast_core::model::{AltParams, NullParams};
use sast_core::offline::oracle_threshold_gamma;
use sast_core::Error;

use crate::format;
use crate::CliError;

pub fn run(pi: f64, mu: f64, alpha: f64, samples: usize, seed: u64) -> Result<(), CliError> {
    let alt = AltParams::shift(mu).map_err(|e| CliError::Config(e.to_string()))?;
    match oracle_threshold_gamma(pi, &NullParams::standard(), &alt, alpha, samples, seed) {
        Ok(th) => {
            println!(
                "gamma_or {:.4} stderr {}",
                th.gamma,
                format::sig(th.stderr, format::DEFAULT_PRECISION)
            );
            Ok(())
        }
        Err(e @ Error::OracleThresholdUndefined { .. }) => Err(CliError::Runtime(e.to_string())),
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}
