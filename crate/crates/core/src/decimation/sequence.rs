use super::{check_forbidden, Decimated};
use crate::error::{Error, Result};

/// Seeds are placed deep enough that the linearization error is negligible.
const SEED_SIZE: f64 = 1e-18;
const MAX_DEPTH: usize = 200;

/// A decimation sequence λ_0, λ_1, ... realizing `target = α lim β^m λ_m`.
#[derive(Clone, Debug)]
pub struct LambdaSequence {
    pub fractal: Decimated,
    pub target: f64,
    /// λ_0 ..= λ_D with D ≥ the requested depth.
    pub entries: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// |α β^M λ_M - target| at the requested depth M.
    pub residual: f64,
}

impl LambdaSequence {
    pub fn depth(&self) -> usize {
        self.entries.len() - 1
    }

    /// β^m λ_m.
    pub fn scaled(&self, m: usize) -> f64 {
        self.beta.powi(m as i32) * self.entries[m]
    }
}

/// Builds the sequence on the branch analytic at 0: seed
/// `λ_D = target / (α β^D)` and iterate the forward map down to λ_0.
pub fn lambda_sequence(fractal: Decimated, target: f64, depth: usize) -> Result<LambdaSequence> {
    if !target.is_finite() {
        return Err(Error::NonConvergent {
            what: "lambda sequence (non-finite target)".into(),
            level: 0,
            last: (target, target),
        });
    }
    let alpha = fractal.alpha();
    let beta = fractal.beta();
    let mut d = depth.max(1);
    while target != 0.0 && (target / (alpha * beta.powi(d as i32))).abs() > SEED_SIZE {
        d += 1;
        if d > MAX_DEPTH {
            return Err(Error::NonConvergent {
                what: "lambda sequence seed depth".into(),
                level: d,
                last: (target, target),
            });
        }
    }
    let mut entries = vec![0.0; d + 1];
    entries[d] = target / (alpha * beta.powi(d as i32));
    for m in (0..d).rev() {
        entries[m] = fractal.rho(entries[m + 1]);
        if !entries[m].is_finite() {
            return Err(Error::NonConvergent {
                what: "lambda sequence (forward map diverged)".into(),
                level: m,
                last: (entries[m + 1], entries[m]),
            });
        }
    }
    for (m, &v) in entries.iter().enumerate().skip(1) {
        check_forbidden(fractal, m, v)?;
    }
    // β^m λ_m must settle; compare the two deepest scaled entries.
    let a = beta.powi(d as i32 - 1) * entries[d - 1];
    let b = beta.powi(d as i32) * entries[d];
    if target != 0.0 && (a - b).abs() > 1e-12 * b.abs().max(1e-300) {
        return Err(Error::NonConvergent {
            what: "lambda sequence (β^m λ_m not Cauchy)".into(),
            level: d,
            last: (a, b),
        });
    }
    let m = depth.min(d);
    let residual = (alpha * beta.powi(m as i32) * entries[m] - target).abs();
    Ok(LambdaSequence {
        fractal,
        target,
        entries,
        alpha,
        beta,
        residual,
    })
}
