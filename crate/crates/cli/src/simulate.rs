//! `simulate`: the config is a `SimConfig` JSON object plus a `methods`
//! array of rule ids.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use sast_core::simulation::{run_replications, Method, SimConfig};
use sast_core::Error;

use crate::format::sig;
use crate::CliError;

pub fn load(path: &Path) -> Result<(SimConfig, Vec<Method>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
    let methods = match value.as_object_mut().and_then(|o| o.remove("methods")) {
        Some(m) => serde_path_to_error::deserialize::<_, Vec<Method>>(m)
            .map_err(|e| CliError::Config(format!("invalid config field `methods{}`: {}", path_suffix(&e), e.inner())))?,
        None => return Err(CliError::Config("invalid config field `methods`: missing".into())),
    };
    let cfg: SimConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("invalid config field `{path}`: {}", e.inner()))
    })?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((cfg, methods))
}

fn path_suffix<E>(e: &serde_path_to_error::Error<E>) -> String {
    let p = e.path().to_string();
    if p == "." {
        String::new()
    } else {
        format!("[{p}]")
    }
}

pub fn run(path: &Path, seed: Option<u64>, out: Option<&Path>, precision: usize) -> Result<(), CliError> {
    let (mut cfg, methods) = load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let curves = run_replications(&cfg, &methods).map_err(|e| match e {
        Error::Config { .. } | Error::UnknownMethod(_) => CliError::Config(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(
            fs::File::create(p).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    let io_err = |e: io::Error| CliError::Runtime(format!("write failed: {e}"));
    writeln!(w, "method,t,fdr,mdr,stderr_fdr,stderr_mdr").map_err(io_err)?;
    for (method, curve) in &curves {
        for (k, t) in curve.checkpoints.iter().enumerate() {
            writeln!(
                w,
                "{method},{t},{},{},{},{}",
                sig(curve.fdr[k], precision),
                sig(curve.mdr[k], precision),
                sig(curve.stderr_fdr[k], precision),
                sig(curve.stderr_mdr[k], precision),
            )
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}
