use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Culprit, Error, Result};
use crate::linalg;
use crate::pcf::FractalSpec;

/// Condition number of an eliminated block above which a level is refused.
const ELIMINATION_GUARD: f64 = 1e13;

/// Schur complement onto V0 of the level-m weak resolvent matrix
/// `L_m + t M_m` (renormalized stiffness plus lumped mass). Entry (p, q) is
/// the Gauss-Green normal derivative `E_m(η_p, h_q) + t ∫ η_p h_q dμ_m` of
/// the discrete η_p at q, which converges like (max r_j μ_j)^m.
///
/// Built by the exact recursion `S_0(t) = L_0 + t diag(a)`,
/// `S_n(t) = Schur_{V0} Σ_j r_j^{-1} E_j S_{n-1}(t r_j μ_j) E_j^T`, which
/// eliminates one level of interior vertices at a time. Only the deviation
/// `S_n - L_0` is carried, so deep levels keep full relative precision.
pub fn boundary_schur(spec: &FractalSpec, t: f64, m: usize) -> Result<DMatrix<f64>> {
    Ok(spec.laplacian0() + boundary_deviation(spec, t, m)?)
}

/// `S_m(t) - L_0`.
pub fn boundary_deviation(spec: &FractalSpec, t: f64, m: usize) -> Result<DMatrix<f64>> {
    let harmonic = Harmonic::new(spec);
    let mut memo = HashMap::new();
    deviation_rec(spec, &harmonic, t, m, &mut memo)
}

/// The level-1 harmonic blocks: H = Σ_j r_j^{-1} E_j L_0 E_j^T and the
/// harmonic extension Y = -H_II^{-1} H_IB.
struct Harmonic {
    h: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl Harmonic {
    fn new(spec: &FractalSpec) -> Self {
        let l0 = spec.laplacian0();
        let h = spec.assemble_level_one(|_| l0.clone());
        let (inner, bnd) = split(spec);
        let y = h
            .select_rows(&inner)
            .select_columns(&inner)
            .lu()
            .solve(&h.select_rows(&inner).select_columns(&bnd))
            .expect("validated specs have an invertible harmonic block");
        Harmonic { h, y: -y }
    }
}

fn split(spec: &FractalSpec) -> (Vec<usize>, Vec<usize>) {
    ((spec.n0..spec.v1_count()).collect(), (0..spec.n0).collect())
}

fn deviation_rec(
    spec: &FractalSpec,
    harmonic: &Harmonic,
    t: f64,
    m: usize,
    memo: &mut HashMap<(usize, u64), DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    if let Some(s) = memo.get(&(m, t.to_bits())) {
        return Ok(s.clone());
    }
    let d = if m == 0 {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            spec.n0,
            spec.harmonic_mass().iter().map(|a| t * a),
        ))
    } else {
        let mut cells = Vec::with_capacity(spec.j());
        for j in 0..spec.j() {
            cells.push(deviation_rec(spec, harmonic, t * spec.r[j] * spec.mu[j], m - 1, memo)?);
        }
        let d1 = spec.assemble_level_one(|j| cells[j].clone());
        eliminate_deviation(spec, harmonic, &d1, t)?
    };
    memo.insert((m, t.to_bits()), d.clone());
    Ok(d)
}

/// For K = H + D on V1: `Schur_{V0}(K) - L_0` computed from D alone, so no
/// two large numbers are ever subtracted.
fn eliminate_deviation(spec: &FractalSpec, harmonic: &Harmonic, d: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let (inner, bnd) = split(spec);
    let h = &harmonic.h;
    let block = |m: &DMatrix<f64>, r: &[usize], c: &[usize]| m.select_rows(r).select_columns(c);
    let k_ii = block(h, &inner, &inner) + block(d, &inner, &inner);
    if linalg::condition(&k_ii) > ELIMINATION_GUARD {
        return Err(Error::SingularResolvent {
            lambda: t,
            culprit: Culprit::Eigenvalue(t),
        });
    }
    let y = &harmonic.y;
    let d_bi = block(d, &bnd, &inner);
    // Deviation of the extension: X - Y = -K_II^{-1} (D_IB + D_II Y).
    let rhs = block(d, &inner, &bnd) + block(d, &inner, &inner) * y;
    let dx = k_ii.lu().solve(&rhs).ok_or(Error::SingularResolvent {
        lambda: t,
        culprit: Culprit::Eigenvalue(t),
    })?;
    // Schur(K) = K_BB + K_BI X with X = Y - dx, and H_BB + H_BI Y = L_0.
    let x = y - &dx;
    Ok(block(d, &bnd, &bnd) + &d_bi * &x - block(h, &bnd, &inner) * dx)
}

/// Discrete normal derivatives at level m of the discrete solutions η_p of
/// `(t - Δ_{μ,m}) η = 0`, `η = δ_p` on V0: entry (p, q) is the renormalized
/// boundary sum of η_p at q (symmetric). It differs from [`boundary_schur`] by
/// the corner mass term and converges only like (max μ_j)^m.
pub fn boundary_flux(spec: &FractalSpec, t: f64, m: usize) -> Result<DMatrix<f64>> {
    let mut s = boundary_schur(spec, t, m)?;
    for k in 0..spec.n0 {
        let mu_corner = spec.mu[spec.fixed_map(k)].powi(m as i32);
        s[(k, k)] -= t * mu_corner * spec.harmonic_mass()[k];
    }
    Ok(s)
}
