//! Spectral decimation for `sg` and `sg3`.
//!
//! Everything here uses the eigenvalue convention `-Δu = λu`; the kernel
//! engine converts a resolvent parameter `t` of `(t - Δ)` with `λ = -t`.

mod sequence;
mod sg;
mod sg3;

pub use sequence::{lambda_sequence, LambdaSequence};
pub use sg::sg_extension;
pub use sg3::{sg3_coefficients, sg3_extension, sg3_extension_residuals, sg3_side_sequences, sg3_tau_proof_form, Sg3Coefficients};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pcf::Kind;

/// Tolerance for landing on a forbidden value.
pub const FORBIDDEN_TOL: f64 = 1e-9;

/// Fractals with a spectral decimation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decimated {
    Sg,
    Sg3,
}

impl Decimated {
    pub fn from_kind(kind: Kind) -> Option<Self> {
        match kind {
            Kind::Sg => Some(Decimated::Sg),
            Kind::Sg3 => Some(Decimated::Sg3),
            _ => None,
        }
    }

    /// λ = α lim β^m λ_m.
    pub fn alpha(self) -> f64 {
        1.5
    }

    pub fn beta(self) -> f64 {
        match self {
            Decimated::Sg => 5.0,
            Decimated::Sg3 => 90.0 / 7.0,
        }
    }

    /// Values λ_m (m ≥ 1) may not take.
    pub fn forbidden(self) -> Vec<f64> {
        match self {
            Decimated::Sg => vec![2.0, 5.0, 6.0],
            Decimated::Sg3 => vec![3.0, 5.0, 3.0 - 5f64.sqrt(), 3.0 + 5f64.sqrt()],
        }
    }

    /// The forward map ϱ with λ_{m-1} = ϱ(λ_m).
    pub fn rho(self, z: f64) -> f64 {
        match self {
            Decimated::Sg => z * (5.0 - z),
            Decimated::Sg3 => 3.0 * (5.0 - z) * (4.0 - z) * (3.0 - z) * z / (14.0 - 3.0 * z),
        }
    }

    /// Eigenfunction extension matrices `{A_j(λ)}`, one per map.
    pub fn extension(self, lambda: f64) -> Result<Vec<DMatrix<f64>>> {
        check_forbidden(self, 1, lambda)?;
        Ok(match self {
            Decimated::Sg => sg_extension(lambda),
            Decimated::Sg3 => sg3_extension(lambda),
        })
    }
}

pub(crate) fn check_forbidden(fractal: Decimated, level: usize, value: f64) -> Result<()> {
    if fractal.forbidden().iter().any(|f| (value - f).abs() < FORBIDDEN_TOL) {
        return Err(Error::ForbiddenValue { level, value });
    }
    Ok(())
}

/// Extension matrices for the level-1 eigenvalue `lambda`.
pub fn extension_matrix(fractal: Decimated, lambda: f64) -> Result<Vec<DMatrix<f64>>> {
    fractal.extension(lambda)
}

/// τ(λ) for the sequence: the common factor of both boundary normal
/// derivatives of the eigenfunction with boundary data (1, 0, 0).
///
/// sg: `4λ / (3 λ0 (2 - λ1)) Π_{j≥2} (1 - λj/3)`;
/// sg3: `2λ / (3 λ0) Π_{j≥1} (1 - λj/4)(1 - λj/6) / (1 - 3λj/2 + λj²/4)`.
/// Both extend continuously to τ(0) = 1.
pub fn tau(seq: &LambdaSequence) -> Result<f64> {
    if seq.target == 0.0 {
        return Ok(1.0);
    }
    let e = &seq.entries;
    let (prefix, start) = match seq.fractal {
        Decimated::Sg => (4.0 * seq.target / (3.0 * e[0] * (2.0 - e[1])), 2),
        Decimated::Sg3 => (2.0 * seq.target / (3.0 * e[0]), 1),
    };
    if !prefix.is_finite() {
        return Err(Error::ForbiddenValue { level: 0, value: e[0] });
    }
    let factor = |z: f64| match seq.fractal {
        Decimated::Sg => 1.0 - z / 3.0,
        Decimated::Sg3 => (1.0 - z / 4.0) * (1.0 - z / 6.0) / (1.0 - 1.5 * z + 0.25 * z * z),
    };
    Ok(prefix * tail_product(&e[start..], factor))
}

/// Product of `factor(z)` over the entries, stopping once three consecutive
/// factors are within 1e-15 of 1.
pub(crate) fn tail_product(entries: &[f64], factor: impl Fn(f64) -> f64) -> f64 {
    let mut p = 1.0;
    let mut quiet = 0;
    for &z in entries {
        let f = factor(z);
        p *= f;
        if (1.0 - f).abs() < 1e-15 {
            quiet += 1;
            if quiet == 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    p
}

/// (∂_n u at the vertex where u = 1, ∂_n u at a vertex where u = 0) for the
/// λ-eigenfunction with boundary data (1, 0, 0): `((4 - λ0) τ / 2, -τ)`.
pub fn boundary_normal_derivs(seq: &LambdaSequence) -> Result<(f64, f64)> {
    let t = tau(seq)?;
    Ok(((4.0 - seq.entries[0]) * t / 2.0, -t))
}
