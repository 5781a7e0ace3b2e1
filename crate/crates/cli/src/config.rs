use std::fmt;
use std::path::PathBuf;

use frk_core::oracle::Bc;
use frk_core::pcf::{load_spec, preset, FractalSpec};
use frk_core::Error;

use crate::{BcArg, CommonArgs, Format};

/// Default cap on oracle levels when `FRK_MAX_LEVEL` is unset.
pub const DEFAULT_MAX_LEVEL: usize = 30;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Largest series depth (longest word).
pub const MAX_DEPTH: usize = 32;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// A core failure, with an optional hint appended to the message.
    Core(Error, Option<String>),
    Io(std::io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
    /// Number of failed verify checks.
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e, _) if is_guard(e) => 2,
            CliError::VerifyFailed(_) => 3,
            _ => 1,
        }
    }
}

/// Mathematical guard failures (as opposed to bad input).
fn is_guard(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularResolvent { .. }
            | Error::SingularPrekernel { .. }
            | Error::SingularNeumann { .. }
            | Error::ForbiddenValue { .. }
            | Error::OnSpectrum { .. }
            | Error::NonConvergent { .. }
    )
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e, None) => write!(f, "{e}"),
            CliError::Core(e, Some(hint)) => write!(f, "{e}; {hint}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Csv(e) => write!(f, "{e}"),
            CliError::Json(e) => write!(f, "{e}"),
            CliError::VerifyFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e, None)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

/// Validated command-line settings.
pub struct RunConfig {
    pub fractal: String,
    pub spec: FractalSpec,
    pub lambda: f64,
    pub bc: Bc,
    pub depth: Option<usize>,
    pub quad: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub max_level: usize,
}

impl RunConfig {
    pub fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        if !args.lambda.is_finite() {
            return Err(CliError::Usage(format!("--lambda must be finite, got {}", args.lambda)));
        }
        if let Some(t) = args.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Usage(format!("--tol must be positive and finite, got {t}")));
            }
        }
        if let Some(d) = args.depth {
            if d > MAX_DEPTH {
                return Err(CliError::Usage(format!("--depth {d} exceeds the maximum {MAX_DEPTH}")));
            }
        }
        let max_level = max_level_from_env()?;
        if let Some(q) = args.quad {
            if q > max_level {
                return Err(CliError::Usage(format!("--quad {q} exceeds FRK_MAX_LEVEL = {max_level}")));
            }
        }
        Ok(RunConfig {
            fractal: args.fractal.clone(),
            spec: load_fractal(&args.fractal)?,
            lambda: args.lambda,
            bc: match args.bc {
                BcArg::Dirichlet => Bc::Dirichlet,
                BcArg::Neumann => Bc::Neumann,
            },
            depth: args.depth,
            quad: args.quad,
            format: args.format,
            out: args.out.clone(),
            tol: args.tol,
            seed: args.seed,
            max_level,
        })
    }

    /// Oracle level: --quad, else `default`, capped by FRK_MAX_LEVEL.
    pub fn oracle_level(&self, default: usize) -> usize {
        self.quad.unwrap_or(default.min(self.max_level))
    }
}

fn max_level_from_env() -> Result<usize, CliError> {
    match std::env::var("FRK_MAX_LEVEL") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("FRK_MAX_LEVEL must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_MAX_LEVEL),
    }
}

/// A preset name or a path to a JSON spec document.
pub fn load_fractal(name: &str) -> Result<FractalSpec, CliError> {
    match preset(name) {
        Ok(spec) => Ok(spec),
        Err(Error::NotAPreset(_)) if std::path::Path::new(name).exists() => {
            let text = std::fs::read_to_string(name)?;
            Ok(load_spec(&text)?)
        }
        Err(e) => Err(e.into()),
    }
}
