use nalgebra::DMatrix;
use serde::Serialize;

use super::engine::KernelEngine;
use crate::error::Result;
use crate::linalg;
use crate::pcf::{Address, LevelGraph};

/// Residual of `Σ_s B_ps η_q(s) = -B_pq` (p in V1 minus V0, q in V0).
#[derive(Clone, Debug, Serialize)]
pub struct CrossScaleReport {
    pub lambda: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
    /// The same, divided by the largest |B_pq|.
    pub relative: f64,
}

pub fn cross_scale(engine: &KernelEngine) -> Result<CrossScaleReport> {
    let spec = engine.spec();
    let root = engine.root();
    let k = engine.level_one(&root)?;
    let ext = engine.extension(&root)?;
    let n0 = spec.n0;
    let interior = spec.interior_v1();
    let eta = DMatrix::from_fn(interior.len(), n0, |s, q| {
        let (j, l) = interior[s];
        ext[j][(l, q)]
    });
    let mut worst: f64 = 0.0;
    for p in 0..interior.len() {
        for q in 0..n0 {
            let lhs: f64 = (0..interior.len()).map(|s| k[(n0 + p, n0 + s)] * eta[(s, q)]).sum();
            worst = worst.max((lhs + k[(n0 + p, q)]).abs());
        }
    }
    let scale = linalg::max_abs(&k);
    Ok(CrossScaleReport {
        lambda: engine.lambda(),
        max_residual: worst,
        relative: worst / scale.max(f64::MIN_POSITIVE),
    })
}

/// Compares the kernel on V_n with the inverse of the assembled cell
/// operator `Σ_{|w|=n} r_w^{-1} E_w N^{(λ r_w μ_w)} E_w^T` restricted to
/// the interior of V_n. Returns the largest relative entry difference.
pub fn telescoping(engine: &KernelEngine, n: usize) -> Result<f64> {
    let spec = engine.spec();
    let graph = LevelGraph::build(spec, n);
    let size = graph.len();
    let mut k = DMatrix::zeros(size, size);
    for cell in &graph.cells {
        let dtn = engine.cell(&engine.key_of(&cell.word))?;
        for (a, &i) in cell.vertices.iter().enumerate() {
            for (b, &j) in cell.vertices.iter().enumerate() {
                k[(i, j)] += dtn.matrix[(a, b)] / cell.r;
            }
        }
    }
    let inner: Vec<usize> = graph.interior().collect();
    let inv = k
        .select_rows(&inner)
        .select_columns(&inner)
        .try_inverse()
        .ok_or(crate::Error::SingularPrekernel {
            lambda: engine.lambda(),
            condition: f64::INFINITY,
        })?;
    let scale = linalg::max_abs(&inv);
    let mut worst: f64 = 0.0;
    for (a, &i) in inner.iter().enumerate() {
        for (b, &j) in inner.iter().enumerate().skip(a) {
            let x = Address::Vertex(graph.vertices[i].clone());
            let y = Address::Vertex(graph.vertices[j].clone());
            let g = engine.dirichlet(&x, &y, n)?.value;
            worst = worst.max((g - inv[(a, b)]).abs());
        }
    }
    Ok(worst / scale)
}
