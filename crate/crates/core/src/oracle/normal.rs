use super::operator::VertexFunction;
use crate::error::{Error, Result};
use crate::pcf::{canonicalize, FractalSpec, Vertex, Word};

/// Deepest refinement tried before giving up.
pub const MAX_REFINEMENT: usize = 14;
/// Successive renormalized sums closer than this count as converged.
pub const NORMAL_TOL: f64 = 1e-9;

/// Boundary pieces (w, k) with q = F_w(q_k) over which the normal derivative sums.
fn pieces(spec: &FractalSpec, q: &Vertex, cell: Option<&Word>) -> Result<Vec<(Word, usize)>> {
    match cell {
        Some(w) => (0..spec.n0)
            .find(|&k| canonicalize(spec, w.clone(), k) == *q)
            .map(|k| vec![(w.clone(), k)])
            .ok_or_else(|| Error::UnsupportedAddress(format!("{q} is not a boundary point of cell {w}"))),
        None if q.level() == 0 => Ok(vec![(Word::empty(), q.k())]),
        None => Ok(q.siblings(spec)),
    }
}

/// The renormalized boundary sum after `n` refinements inside each piece:
/// `Σ r_w^{-1} r_{j^n}^{-1} Σ_l c_kl (u(q) - u(F_{w j^n} q_l))`.
/// `None` if `u` is not available that deep.
pub fn normal_sum_at(
    spec: &FractalSpec,
    u: &dyn VertexFunction,
    q: &Vertex,
    cell: Option<&Word>,
    n: usize,
) -> Result<Option<f64>> {
    let Some(uq) = u.value(q) else { return Ok(None) };
    let mut total = 0.0;
    for (w, k) in pieces(spec, q, cell)? {
        let j = spec.fixed_map(k);
        let (r_w, _, _) = spec.cell_scale(&w);
        let scale = 1.0 / (r_w * spec.r[j].powi(n as i32));
        let inner = w.extended(j, n);
        for l in 0..spec.n0 {
            let c = spec.conductances[(k, l)];
            if l == k || c == 0.0 {
                continue;
            }
            let Some(uy) = u.value(&canonicalize(spec, inner.clone(), l)) else {
                return Ok(None);
            };
            total += scale * c * (uq - uy);
        }
    }
    Ok(Some(total))
}

/// `∂_n u(q)` as the limit of renormalized boundary sums; restricted to
/// `cell` when given. Stops once two successive sums agree to 1e-9.
pub fn normal_derivative(
    spec: &FractalSpec,
    u: &dyn VertexFunction,
    q: &Vertex,
    cell: Option<&Word>,
) -> Result<f64> {
    let mut prev: Option<f64> = None;
    let mut last = (f64::NAN, f64::NAN);
    for n in 1..=MAX_REFINEMENT {
        let Some(cur) = normal_sum_at(spec, u, q, cell, n)? else {
            return Err(Error::NonConvergent {
                what: format!("normal derivative at {q} (function unavailable at refinement {n})"),
                level: n,
                last,
            });
        };
        if let Some(p) = prev {
            if (cur - p).abs() < NORMAL_TOL {
                return Ok(cur);
            }
        }
        last = (prev.unwrap_or(f64::NAN), cur);
        prev = Some(cur);
    }
    Err(Error::NonConvergent {
        what: format!("normal derivative at {q}"),
        level: MAX_REFINEMENT,
        last,
    })
}
