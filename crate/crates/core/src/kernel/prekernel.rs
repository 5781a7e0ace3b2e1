use nalgebra::DMatrix;
use serde::Serialize;

use crate::decimation::sg3_coefficients;

/// B^{(λ)} over V1 minus V0 and its inverse G^{(λ)}.
#[derive(Clone, Debug, Serialize)]
pub struct Prekernel {
    pub lambda: f64,
    #[serde(serialize_with = "rows")]
    pub b: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    pub g: DMatrix<f64>,
    /// σ_max of the level-one operator over σ_min(B).
    pub condition: f64,
    /// Whether `g` came from a closed form rather than a dense inverse.
    pub closed_form: bool,
}

fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().cloned().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Gasket prekernel from the cell-level sequence (λ0, τ):
/// `3 / (5 (5 - λ0)(2 - λ0) τ) [(3 - λ0) on the diagonal, 1 off it]`.
pub fn sg_prekernel(lambda0: f64, tau: f64) -> DMatrix<f64> {
    let c = 3.0 / (5.0 * (5.0 - lambda0) * (2.0 - lambda0) * tau);
    DMatrix::from_fn(3, 3, |p, q| if p == q { c * (3.0 - lambda0) } else { c })
}

/// Gasket B from the cell-level sequence: `(5/3) τ [(4 - λ0) diag, -1 off]`.
pub fn sg_b(lambda0: f64, tau: f64) -> DMatrix<f64> {
    let c = 5.0 / 3.0 * tau;
    DMatrix::from_fn(3, 3, |p, q| if p == q { c * (4.0 - lambda0) } else { -c })
}

/// Interior V1 indices of the sg3 preset around the hexagon, and the center.
const SG3_CYCLE: [usize; 6] = [0, 2, 3, 5, 4, 1];
const SG3_CENTER: usize = 6;

fn sg3_kappa(l: f64) -> [f64; 5] {
    [
        (3.0 - l) * (5.0 - l) * (6.0 - l),
        201.0 - 300.0 * l + 134.5 * l * l - 24.0 * l.powi(3) + 1.5 * l.powi(4),
        87.0 - 75.0 * l + 19.0 * l * l - 1.5 * l.powi(3),
        57.0 - 24.0 * l + 2.5 * l * l,
        51.0 - 15.0 * l + l * l,
    ]
}

/// SG3 prekernel from the cell-level sequence:
/// `14 / (15 (6 - λ0) τ φ(λ0))` times the κ matrix. Along the hexagon the
/// entry depends only on the cyclic distance d: κ2, κ3, κ4, κ5 for d = 0..3.
pub fn sg3_prekernel(lambda0: f64, tau: f64) -> DMatrix<f64> {
    let phi = sg3_coefficients(lambda0).phi;
    let c = 14.0 / (15.0 * (6.0 - lambda0) * tau * phi);
    let k = sg3_kappa(lambda0);
    let mut g = DMatrix::zeros(7, 7);
    g[(SG3_CENTER, SG3_CENTER)] = c * (2.0 - lambda0) * k[0];
    for (a, &p) in SG3_CYCLE.iter().enumerate() {
        g[(SG3_CENTER, p)] = c * k[0];
        g[(p, SG3_CENTER)] = c * k[0];
        for (b, &q) in SG3_CYCLE.iter().enumerate() {
            let d = (a as isize - b as isize).rem_euclid(6) as usize;
            g[(p, q)] = c * k[1 + d.min(6 - d)];
        }
    }
    g
}

/// SG3 B: `(15/7) τ` times (3/2)(4 - λ0) at the center, (4 - λ0) elsewhere
/// on the diagonal and -1 between 1-cell neighbours.
pub fn sg3_b(lambda0: f64, tau: f64, adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let c = 15.0 / 7.0 * tau;
    DMatrix::from_fn(7, 7, |p, q| {
        if p == q {
            let w = if p == SG3_CENTER { 1.5 } else { 1.0 };
            c * w * (4.0 - lambda0)
        } else {
            -c * adjacency[(p, q)]
        }
    })
}

/// `det G = (7/15)^7 · 6 (4 - 6λ0 + λ0²) / ((6 - λ0) φ(λ0)² τ^7)`.
pub fn sg3_det_g(lambda0: f64, tau: f64) -> f64 {
    sg3_det_g_with_power(lambda0, tau, 7)
}

/// The same expression with a single power of τ, as it is sometimes
/// printed; it agrees with the determinant only where τ = 1.
pub fn sg3_det_g_single_tau(lambda0: f64, tau: f64) -> f64 {
    sg3_det_g_with_power(lambda0, tau, 1)
}

fn sg3_det_g_with_power(lambda0: f64, tau: f64, power: i32) -> f64 {
    let phi = sg3_coefficients(lambda0).phi;
    (7.0f64 / 15.0).powi(7) * 6.0 * (4.0 - 6.0 * lambda0 + lambda0 * lambda0)
        / ((6.0 - lambda0) * phi * phi * tau.powi(power))
}
