//! The kernel series `G(x, y) = Σ_w r_w Ψ^{(λ r_w μ_w)}(F_w^{-1} x, F_w^{-1} y)`,
//! the Neumann correction, and the interval closed forms.
//!
//! λ here is the parameter of `(λ - Δ)`. On sg and sg3 the cell data comes
//! from spectral decimation at `-λ`.

mod engine;
pub mod interval;
mod prekernel;
mod solver;
mod verify;

pub use engine::{KernelEngine, KernelEvaluation, ScaleKey, NEUMANN_GUARD, PREKERNEL_GUARD};
pub use prekernel::{sg3_b, sg3_det_g, sg3_det_g_single_tau, sg3_prekernel, sg_b, sg_prekernel, Prekernel};
pub use solver::{Backend, CellDtn, DISCRETE_CONSISTENCY, DISCRETE_LEVEL};
pub use verify::{cross_scale, telescoping, CrossScaleReport};

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::oracle::Bc;
use crate::pcf::{Address, FractalSpec, Word};

/// ψ_p^{(λ)}: the level-1 solution equal to 1 at p and 0 on the rest of V1.
pub struct PsiFunction {
    engine: Arc<KernelEngine>,
    pub p: usize,
}

impl PsiFunction {
    pub fn lambda(&self) -> f64 {
        self.engine.lambda()
    }

    pub fn backend(&self) -> Backend {
        self.engine.backend()
    }

    pub fn value(&self, x: &Address) -> Result<f64> {
        self.engine.psi_value(self.p, x)
    }
}

pub fn psi(spec: &FractalSpec, lambda: f64, p: usize) -> Result<PsiFunction> {
    let engine = KernelEngine::new(spec, lambda)?;
    engine.prekernel()?;
    Ok(PsiFunction {
        engine: Arc::new(engine),
        p,
    })
}

/// B^{(λ)}: summed cell normal derivatives of the ψ_p at V1 minus V0.
pub fn b_matrix(spec: &FractalSpec, lambda: f64) -> Result<DMatrix<f64>> {
    Ok(prekernel(spec, lambda)?.b.clone())
}

pub fn prekernel(spec: &FractalSpec, lambda: f64) -> Result<Arc<Prekernel>> {
    KernelEngine::new(spec, lambda)?.prekernel()
}

/// Ψ^{(λ)}(x, y).
pub fn psi_big(spec: &FractalSpec, lambda: f64, x: &Address, y: &Address) -> Result<f64> {
    KernelEngine::new(spec, lambda)?.big_psi(x, y)
}

pub fn dirichlet_kernel(spec: &FractalSpec, lambda: f64, x: &Address, y: &Address, depth: usize) -> Result<KernelEvaluation> {
    KernelEngine::new(spec, lambda)?.dirichlet(x, y, depth)
}

pub fn neumann_kernel(spec: &FractalSpec, lambda: f64, x: &Address, y: &Address, depth: usize) -> Result<KernelEvaluation> {
    KernelEngine::new(spec, lambda)?.neumann(x, y, depth)
}

pub fn interval_closed_form(lambda: f64, x: f64, y: f64, bc: Bc) -> Result<f64> {
    interval::closed_form(lambda, x, y, bc)
}

pub fn neumann_c_matrix(spec: &FractalSpec, lambda: f64) -> Result<DMatrix<f64>> {
    KernelEngine::new(spec, lambda)?.neumann_c()
}

/// `∫ G(x, y) f(y) dμ(y)` with `f(w, k)` the value of f on cell w at `F_w q_k`.
pub fn apply_resolvent(
    spec: &FractalSpec,
    lambda: f64,
    f: &dyn Fn(&Word, usize) -> f64,
    x: &Address,
    depth: usize,
    m_quad: usize,
    bc: Bc,
) -> Result<f64> {
    KernelEngine::new(spec, lambda)?.apply(x, f, m_quad, depth, bc)
}

pub fn cross_scale_check(spec: &FractalSpec, lambda: f64) -> Result<CrossScaleReport> {
    cross_scale(&KernelEngine::new(spec, lambda)?)
}

#[cfg(test)]
mod tests;
