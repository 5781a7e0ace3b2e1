//! Closed forms on the unit interval. `t` is the resolvent parameter of
//! `(t - d²/dx²)`; negative `t` continues through sin/cos.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pcf::locate_real;

/// |sin √-t| below this (with √-t past the first zero at 0) counts as
/// sitting on the spectrum.
const SPECTRUM_GUARD: f64 = 1e-10;

/// sinh(√t z) / √t for t ≥ 0, continued to t < 0.
fn sinh_over_root(t: f64, z: f64) -> f64 {
    if t > 0.0 {
        let r = t.sqrt();
        (r * z).sinh() / r
    } else if t < 0.0 {
        let w = (-t).sqrt();
        (w * z).sin() / w
    } else {
        z
    }
}

fn cosh_root(t: f64, z: f64) -> f64 {
    if t >= 0.0 {
        (t.sqrt() * z).cosh()
    } else {
        ((-t).sqrt() * z).cos()
    }
}

/// `-expm1(-2u) = 1 - e^{-2u}`, accurate for small u.
fn one_minus_exp(u: f64) -> f64 {
    -(-2.0 * u).exp_m1()
}

fn check_spectrum(t: f64) -> Result<()> {
    if t < -1.0 && ((-t).sqrt()).sin().abs() < SPECTRUM_GUARD {
        return Err(Error::OnSpectrum { lambda: t });
    }
    Ok(())
}

/// Dirichlet resolvent kernel `sinh(√t min) sinh(√t (1 - max)) / (√t sinh √t)`.
pub fn dirichlet(t: f64, x: f64, y: f64) -> Result<f64> {
    check_spectrum(t)?;
    let (lo, hi) = (x.min(y), x.max(y));
    if t > 0.0 {
        // Written with decaying exponentials so large t cannot overflow.
        let r = t.sqrt();
        let (a, b) = (r * lo, r * (1.0 - hi));
        return Ok((a + b - r).exp() * one_minus_exp(a) * one_minus_exp(b) / (2.0 * r * one_minus_exp(r)));
    }
    Ok(sinh_over_root(t, lo) * sinh_over_root(t, 1.0 - hi) / sinh_over_root(t, 1.0))
}

/// Neumann resolvent kernel `cosh(√t min) cosh(√t (1 - max)) / (√t sinh √t)`.
pub fn neumann(t: f64, x: f64, y: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(Error::OnSpectrum { lambda: t });
    }
    check_spectrum(t)?;
    let (lo, hi) = (x.min(y), x.max(y));
    if t > 0.0 {
        let r = t.sqrt();
        let (a, b) = (r * lo, r * (1.0 - hi));
        let plus = |u: f64| 1.0 + (-2.0 * u).exp();
        return Ok((a + b - r).exp() * plus(a) * plus(b) / (2.0 * r * one_minus_exp(r)));
    }
    Ok(cosh_root(t, lo) * cosh_root(t, 1.0 - hi) / (t * sinh_over_root(t, 1.0)))
}

/// Either boundary condition.
pub fn closed_form(t: f64, x: f64, y: f64, bc: crate::oracle::Bc) -> Result<f64> {
    match bc {
        crate::oracle::Bc::Dirichlet => dirichlet(t, x, y),
        crate::oracle::Bc::Neumann => neumann(t, x, y),
    }
}

/// η_k at x: the solution with η(q_l) = δ_kl (q_0 = 0, q_1 = 1).
pub fn eta(t: f64, k: usize, x: f64) -> f64 {
    let z = if k == 0 { 1.0 - x } else { x };
    if t > 0.0 {
        let r = t.sqrt();
        return (r * (z - 1.0)).exp() * one_minus_exp(r * z) / one_minus_exp(r);
    }
    sinh_over_root(t, z) / sinh_over_root(t, 1.0)
}

/// ψ for the midpoint: solves the equation on both halves with ψ(1/2) = 1.
pub fn psi(t: f64, x: f64) -> f64 {
    let z = x.min(1.0 - x);
    if t > 0.0 {
        let r = t.sqrt();
        return (r * (z - 0.5)).exp() * one_minus_exp(r * z) / one_minus_exp(0.5 * r);
    }
    sinh_over_root(t, z) / sinh_over_root(t, 0.5)
}

/// The prekernel entry `sinh(√t/2) / (2√t cosh(√t/2))`.
pub fn psi_coefficient(t: f64) -> f64 {
    sinh_over_root(t, 0.5) / (2.0 * cosh_root(t, 0.5))
}

/// Ψ(x, y) = coefficient · ψ(x) ψ(y).
pub fn big_psi(t: f64, x: f64, y: f64) -> f64 {
    psi_coefficient(t) * psi(t, x) * psi(t, y)
}

/// Neumann midpoint coefficient `cosh(√t/2) / (2√t sinh(√t/2))`.
pub fn neumann_coefficient(t: f64) -> f64 {
    cosh_root(t, 0.5) / (2.0 * t * sinh_over_root(t, 0.5))
}

/// Dirichlet-to-Neumann matrix `N_kl = ∂_n η_k(q_l)`.
pub fn dtn(t: f64) -> Result<DMatrix<f64>> {
    check_spectrum(t)?;
    let s = sinh_over_root(t, 1.0);
    let diag = cosh_root(t, 1.0) / s;
    let off = -1.0 / s;
    Ok(DMatrix::from_row_slice(2, 2, &[diag, off, off, diag]))
}

/// Extension matrices: the midpoint value of η is `1 / (2 cosh(√t/2))`.
pub fn extensions(t: f64) -> Vec<DMatrix<f64>> {
    let h = 0.5 / cosh_root(t, 0.5);
    vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, h, h]),
        DMatrix::from_row_slice(2, 2, &[h, h, 0.0, 1.0]),
    ]
}

/// The word series for the interval Dirichlet kernel truncated at depth
/// `depth`: `Σ_{|w| ≤ depth} 2^{-|w|} Ψ^{(t/4^|w|)}(F_w^{-1}x, F_w^{-1}y)`.
pub fn dirichlet_series(t: f64, x: f64, y: f64, depth: usize) -> f64 {
    series(x, y, depth, |n, a, b| big_psi(t / 4f64.powi(n as i32), a, b))
}

/// The Neumann analogue built from Φ_N (cosh profiles). It only reproduces
/// the Neumann kernel for points in different halves; see the tests.
pub fn neumann_midpoint_series(t: f64, x: f64, y: f64, depth: usize) -> f64 {
    series(x, y, depth, |n, a, b| {
        let s = t / 4f64.powi(n as i32);
        let phi = |z: f64| cosh_root(s, z.min(1.0 - z)) / cosh_root(s, 0.5);
        neumann_coefficient(s) * phi(a) * phi(b)
    })
}

fn series(x: f64, y: f64, depth: usize, term: impl Fn(usize, f64, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for n in 0..=depth {
        let cx = locate_real(x, n);
        let cy = locate_real(y, n);
        let scale = 0.5f64.powi(n as i32);
        for (w, a) in &cx {
            if let Some((_, b)) = cy.iter().find(|(v, _)| v == w) {
                total += scale * term(n, *a, *b);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_values() {
        assert!((psi(1.0, 0.25) - 0.25f64.sinh() / 0.5f64.sinh()).abs() < 1e-15);
        assert!((psi(1.0, 0.25) - 0.484772).abs() < 1e-6);
        assert!((big_psi(1.0, 0.5, 0.5) - 0.231059).abs() < 1e-6);
        assert!((dirichlet(1.0, 0.25, 0.5).unwrap() - 0.112011).abs() < 1e-6);
        assert!((neumann_coefficient(1.0) - 1.081977).abs() < 1e-6);
        assert_eq!(dirichlet(1.0, 0.0, 0.4).unwrap(), 0.0);
        let g = 0.5f64.sinh().powi(2) / 1.0f64.sinh();
        assert!((dirichlet(1.0, 0.5, 0.5).unwrap() - g).abs() < 1e-15);
        assert!((big_psi(1.0, 0.5, 0.5) - g).abs() < 1e-15);
    }

    #[test]
    fn continuation_is_smooth_through_zero() {
        for (x, y) in [(0.2f64, 0.7f64), (0.5, 0.5), (0.9, 0.1)] {
            let g0 = x.min(y) * (1.0 - x.max(y));
            for t in [1e-9, -1e-9, 0.0] {
                assert!((dirichlet(t, x, y).unwrap() - g0).abs() < 1e-9);
            }
            let a = dirichlet(1e-3, x, y).unwrap();
            let b = dirichlet(-1e-3, x, y).unwrap();
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn large_parameter_does_not_overflow() {
        let v = dirichlet(1e7, 0.5, 0.5).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!((v - 1.0 / (2.0 * 1e7f64.sqrt())).abs() < 1e-12);
        assert!(psi(1e8, 0.25).is_finite());
    }

    #[test]
    fn spectrum_is_refused() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(matches!(dirichlet(-pi2, 0.2, 0.3), Err(Error::OnSpectrum { .. })));
        assert!(matches!(neumann(0.0, 0.2, 0.3), Err(Error::OnSpectrum { .. })));
        assert!(matches!(neumann(-4.0 * pi2, 0.2, 0.3), Err(Error::OnSpectrum { .. })));
    }

    #[test]
    fn dtn_matches_derivatives() {
        let t = 2.3;
        let n = dtn(t).unwrap();
        let h = 1e-6;
        // ∂_n at 0 is -u'(0), at 1 is u'(1).
        let d0 = -(eta(t, 0, h) - eta(t, 0, 0.0)) / h;
        let d1 = (eta(t, 0, 1.0) - eta(t, 0, 1.0 - h)) / h;
        assert!((n[(0, 0)] - d0).abs() < 1e-5);
        assert!((n[(0, 1)] - d1).abs() < 1e-5);
        let e = extensions(t);
        assert!((e[0][(1, 0)] - eta(t, 0, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_series_reproduces_closed_form() {
        for t in [0.5, 1.0, 4.0] {
            for (x, y) in [(0.25, 0.5), (0.375, 0.8125), (0.5, 0.5), (0.125, 0.1875)] {
                let s = dirichlet_series(t, x, y, 12);
                assert!((s - dirichlet(t, x, y).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn midpoint_neumann_series_fails_inside_one_half() {
        let t = 1.0;
        // Opposite halves: a single term, and it is right.
        let ok = neumann_midpoint_series(t, 0.3, 0.7, 20);
        assert!((ok - neumann(t, 0.3, 0.7).unwrap()).abs() < 1e-12);
        // Same half: each subcell term carries a growing 2^m / t factor.
        let a = neumann_midpoint_series(t, 0.25, 0.25, 10);
        let b = neumann_midpoint_series(t, 0.25, 0.25, 20);
        assert!(b > 100.0 * a.abs().max(1.0), "{a} {b}");
        assert!((a - neumann(t, 0.25, 0.25).unwrap()).abs() > 1.0);
    }
}
