//! JSON run configuration merged with command-line flags.
//!
//! Every subcommand's arguments are one struct of optional fields that is
//! both a clap `Args` and a serde type. A `--config` file is parsed into
//! the same struct (unknown keys are errors) and flags that were given
//! replace the file's values; nested sections merge key by key.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tlearn::baselines::GoldenSectionSpec;
use tlearn::denoise::AdmmParams;
use tlearn::train::{FailurePolicy, Init};

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (_, Value::Null) => {}
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                overlay(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

/// `flags` over the contents of `file`.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Path>) -> Result<T> {
    let flag_value = serde_json::to_value(flags)?;
    let Some(path) = file else {
        return Ok(serde_json::from_value(flag_value)?);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut merged: Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    if !merged.is_object() {
        bail!("config {} must hold a JSON object", path.display());
    }
    // reject unknown or mistyped keys before flags can mask them
    serde_json::from_value::<T>(merged.clone()).with_context(|| format!("config {}", path.display()))?;
    overlay(&mut merged, flag_value);
    Ok(serde_json::from_value(merged)?)
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AdmmArgs {
    /// Scale-free ADMM penalty
    #[arg(long = "admm-rho", id = "admm-rho")]
    pub rho: Option<f64>,
    #[arg(long = "admm-max-iters", id = "admm-max-iters")]
    pub max_iters: Option<usize>,
    /// Primal and dual residual tolerance
    #[arg(long = "admm-tol", id = "admm-tol")]
    pub tol: Option<f64>,
    #[arg(long = "admm-sign-window", id = "admm-sign-window")]
    pub sign_stability_window: Option<usize>,
    #[arg(long = "admm-penalty-updates", id = "admm-penalty-updates")]
    pub max_penalty_updates: Option<usize>,
}

impl AdmmArgs {
    pub fn params(&self) -> Result<AdmmParams> {
        let d = AdmmParams::default();
        let p = AdmmParams {
            rho: self.rho.unwrap_or(d.rho),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            primal_tol: self.tol.unwrap_or(d.primal_tol),
            dual_tol: self.tol.unwrap_or(d.dual_tol),
            sign_stability_window: self.sign_stability_window.unwrap_or(d.sign_stability_window),
            max_penalty_updates: self.max_penalty_updates.unwrap_or(d.max_penalty_updates),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct GoldenArgs {
    /// Lower end of the λ bracket
    #[arg(long = "golden-lo", id = "golden-lo")]
    pub lo: Option<f64>,
    #[arg(long = "golden-hi", id = "golden-hi")]
    pub hi: Option<f64>,
    #[arg(long = "golden-tol", id = "golden-tol")]
    pub tol: Option<f64>,
    #[arg(long = "golden-max-evals", id = "golden-max-evals")]
    pub max_evals: Option<usize>,
}

impl GoldenArgs {
    pub fn spec(&self) -> Result<GoldenSectionSpec> {
        let d = GoldenSectionSpec::default();
        let s = GoldenSectionSpec {
            lo: self.lo.unwrap_or(d.lo),
            hi: self.hi.unwrap_or(d.hi),
            tol: self.tol.unwrap_or(d.tol),
            max_evals: self.max_evals.unwrap_or(d.max_evals),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Identity,
    Zeros,
    Random,
    File,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    Skip,
    Abort,
}

impl From<PolicyArg> for FailurePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Skip => FailurePolicy::Skip,
            PolicyArg::Abort => FailurePolicy::Abort,
        }
    }
}

pub fn init_from(kind: Option<InitKind>, scale: Option<f64>, file: Option<&Path>) -> Result<Init> {
    Ok(match kind.unwrap_or(InitKind::Identity) {
        InitKind::Identity => Init::Identity,
        InitKind::Zeros => Init::Zeros,
        InitKind::Random => Init::RandomGaussian {
            scale: scale.unwrap_or(0.01),
        },
        InitKind::File => match file {
            Some(p) => Init::FromFile(p.to_path_buf()),
            None => bail!("--init file needs --init-file"),
        },
    })
}

/// Normalized σ from either unit; images quote σ on the 0–255 scale.
pub fn resolve_sigma(sigma: Option<f64>, sigma255: Option<f64>, default: f64) -> Result<f64> {
    let s = match (sigma, sigma255) {
        (Some(_), Some(_)) => bail!("give either sigma or sigma255, not both"),
        (Some(s), None) => s,
        (None, Some(s)) => s / 255.0,
        (None, None) => default,
    };
    if !(s >= 0.0 && s.is_finite()) {
        bail!("noise level must be a nonnegative number, got {s}");
    }
    Ok(s)
}
