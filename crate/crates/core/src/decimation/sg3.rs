use nalgebra::DMatrix;

use super::{check_forbidden, tail_product, Decimated, LambdaSequence};
use crate::error::{Error, Result};

/// Extension weights at one level: a side point next to vertex a on side ab
/// receives `α u_a + β u_b + γ u_c`, the center `ρ (u_0 + u_1 + u_2)`.
#[derive(Clone, Copy, Debug)]
pub struct Sg3Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub phi: f64,
}

pub fn sg3_coefficients(l: f64) -> Sg3Coefficients {
    let phi = 3.0 * (5.0 - l) * (3.0 - l) * (4.0 - 6.0 * l + l * l);
    Sg3Coefficients {
        alpha: (96.0 - 109.0 * l + 33.0 * l * l - 3.0 * l * l * l) / phi,
        beta: (16.0 - 3.0 * l) * (3.0 - l) / phi,
        gamma: (36.0 - 7.0 * l) / phi,
        rho: 4.0 * (5.0 - l) * (3.0 - l) / phi,
        phi,
    }
}

/// Residuals of the four level-1 eigenvalue equations for data (1, 0, 0).
pub fn sg3_extension_residuals(l: f64) -> [f64; 4] {
    let c = sg3_coefficients(l);
    let (x, y, z, w) = (c.alpha, c.beta, c.gamma, c.rho);
    [
        (4.0 - l) * x - (1.0 + x + y + w),
        (4.0 - l) * y - (x + z + w),
        (4.0 - l) * z - (y + z + w),
        (4.0 - l) * w - 4.0 / 3.0 * (x + y + z),
    ]
}

/// Extension matrices in the preset's map order: corner cells 0..3 fixing
/// q_i, then middle cell 3 + l on the side opposite q_l.
pub fn sg3_extension(l: f64) -> Vec<DMatrix<f64>> {
    let c = sg3_coefficients(l);
    let third = |a: usize, b: usize| 3 - a - b;
    let side = |near: usize, far: usize| {
        let mut row = [0.0; 3];
        row[near] = c.alpha;
        row[far] = c.beta;
        row[third(near, far)] = c.gamma;
        row
    };
    let mut out = Vec::with_capacity(6);
    for i in 0..3 {
        let mut m = DMatrix::zeros(3, 3);
        for k in 0..3 {
            let row = if k == i {
                let mut e = [0.0; 3];
                e[i] = 1.0;
                e
            } else {
                side(i, k)
            };
            for (col, v) in row.iter().enumerate() {
                m[(k, col)] = *v;
            }
        }
        out.push(m);
    }
    for opposite in 0..3 {
        let mut m = DMatrix::zeros(3, 3);
        for a in 0..3 {
            let row = if a == opposite {
                [c.rho; 3]
            } else {
                side(a, third(a, opposite))
            };
            for (col, v) in row.iter().enumerate() {
                m[(a, col)] = *v;
            }
        }
        out.push(m);
    }
    out
}

/// τ via the product `Π (4-λj)(6-λj) / (6 (4 - 6λj + λj²))`.
pub fn sg3_tau_proof_form(seq: &LambdaSequence) -> Result<f64> {
    assert_eq!(seq.fractal, Decimated::Sg3);
    if seq.target == 0.0 {
        return Ok(1.0);
    }
    let e = &seq.entries;
    let prefix = 2.0 * seq.target / (3.0 * e[0]);
    let p = tail_product(&e[1..], |z| (4.0 - z) * (6.0 - z) / (6.0 * (4.0 - 6.0 * z + z * z)));
    Ok(prefix * p)
}

/// Side sequences `x_m` (with `u(F_0^m q_1) = 1 - x_m` for data (1,0,0)) and
/// `s_m = u(F_0^m q_1) + u(F_0^m q_2)` for data (0,1,0), for m = 0..=n.
pub fn sg3_side_sequences(seq: &LambdaSequence, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(seq.fractal, Decimated::Sg3);
    if n > seq.depth() {
        return Err(Error::NonConvergent {
            what: "side sequences deeper than the lambda sequence".into(),
            level: n,
            last: (0.0, 0.0),
        });
    }
    let e = &seq.entries;
    let mut xs = vec![1.0];
    let mut ss = vec![1.0];
    for m in 0..n {
        let z = e[m + 1];
        check_forbidden(Decimated::Sg3, m + 1, z)?;
        let ratio = if e[m] == 0.0 { 7.0 / 90.0 } else { z / e[m] };
        let delta = (4.0 - z) * (6.0 - z) * ratio / (4.0 - 6.0 * z + z * z);
        let x = z / 4.0 + delta * (xs[m] - e[m] / 4.0);
        xs.push(x);
        let c = sg3_coefficients(z);
        ss.push((14.0 - 3.0 * z) * (6.0 - z) / c.phi * ss[m]);
    }
    Ok((xs, ss))
}
