//! Dense graph oracle: renormalized Laplacians on V_m, spectra, discrete
//! resolvents, discrete η functions and normal derivatives.

mod flux;
mod normal;
mod operator;

pub use flux::{boundary_deviation, boundary_flux, boundary_schur};
pub use normal::{normal_derivative, normal_sum_at, MAX_REFINEMENT, NORMAL_TOL};
pub use operator::{DiscreteFunction, DiscreteOperator, VertexFunction, DENSE_CAP, SPECTRAL_GUARD};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pcf::FractalSpec;

/// Boundary condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

pub fn laplacian(spec: &FractalSpec, m: usize, bc: Bc) -> Result<DiscreteOperator> {
    DiscreteOperator::new(spec, m, bc)
}

/// Dirichlet eigenvalues of Δ_{μ,m} (negative), by increasing magnitude.
pub fn dirichlet_spectrum(spec: &FractalSpec, m: usize) -> Result<Vec<f64>> {
    Ok(laplacian(spec, m, Bc::Dirichlet)?.spectrum().to_vec())
}

/// Solves `(λ - Δ_{μ,m}) u = f` for `f` given on all of V_m.
pub fn discrete_resolvent(spec: &FractalSpec, m: usize, lambda: f64, f: &[f64], bc: Bc) -> Result<Vec<f64>> {
    laplacian(spec, m, bc)?.resolvent(lambda, f)
}

/// Discrete η_p at level m: `(λ - Δ) η = 0` inside, `η = δ_p` on V0.
pub fn eta_discrete(spec: &FractalSpec, lambda: f64, p: usize, m: usize) -> Result<DiscreteFunction> {
    let op = laplacian(spec, m, Bc::Dirichlet)?;
    let values = op.eta(lambda, p)?;
    Ok(DiscreteFunction { graph: op.graph, values })
}
