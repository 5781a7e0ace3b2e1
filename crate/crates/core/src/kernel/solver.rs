use nalgebra::DMatrix;

use super::interval;
use crate::decimation::{boundary_normal_derivs, lambda_sequence, Decimated};
use crate::error::{Error, Result};
use crate::linalg;
use crate::oracle::boundary_schur;
use crate::pcf::{FractalSpec, Kind};

/// Default level of the discrete backend.
pub const DISCRETE_LEVEL: usize = 30;
/// Relative disagreement allowed between the extrapolants at m and m - 1.
pub const DISCRETE_CONSISTENCY: f64 = 1e-7;

/// How cell-level data (normal derivatives of η, extension matrices) is
/// obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    /// sinh/cosh formulas on the unit interval.
    Interval,
    /// τ products and extension matrices from spectral decimation.
    Decimation(Decimated),
    /// Extrapolated discrete boundary flux at the given level.
    Discrete { level: usize },
}

impl Backend {
    pub fn for_spec(spec: &FractalSpec) -> Backend {
        match spec.kind {
            Kind::Interval => Backend::Interval,
            Kind::Sg => Backend::Decimation(Decimated::Sg),
            Kind::Sg3 => Backend::Decimation(Decimated::Sg3),
            Kind::Custom => Backend::Discrete { level: DISCRETE_LEVEL },
        }
    }

    pub fn is_closed_form(self) -> bool {
        !matches!(self, Backend::Discrete { .. })
    }

    pub fn label(self) -> String {
        match self {
            Backend::Interval => "closed-form".into(),
            Backend::Decimation(_) => "decimation".into(),
            Backend::Discrete { level } => format!("discrete(m={level})"),
        }
    }
}

/// Data of η^{(s)} on one cell.
#[derive(Clone, Debug)]
pub struct CellDtn {
    pub lambda: f64,
    /// `N_kl = ∂_n η_k(q_l)`.
    pub matrix: DMatrix<f64>,
    /// (λ_0, τ) of the decimation sequence for `-lambda`.
    pub decimation: Option<(f64, f64)>,
    /// Extension matrices when the backend has them in closed form.
    pub extension: Option<Vec<DMatrix<f64>>>,
}

pub(crate) fn cell_dtn(spec: &FractalSpec, backend: Backend, s: f64) -> Result<CellDtn> {
    match backend {
        Backend::Interval => Ok(CellDtn {
            lambda: s,
            matrix: interval::dtn(s)?,
            decimation: None,
            extension: Some(interval::extensions(s)),
        }),
        Backend::Decimation(f) => {
            let seq = lambda_sequence(f, -s, 8)?;
            let (at_one, at_zero) = boundary_normal_derivs(&seq)?;
            if !at_one.is_finite() || !at_zero.is_finite() {
                return Err(Error::OnSpectrum { lambda: s });
            }
            let n0 = spec.n0;
            let matrix = DMatrix::from_fn(n0, n0, |a, b| if a == b { at_one } else { at_zero });
            let tau = -at_zero;
            Ok(CellDtn {
                lambda: s,
                matrix,
                decimation: Some((seq.entries[0], tau)),
                extension: Some(f.extension(seq.entries[1])?),
            })
        }
        Backend::Discrete { level } => Ok(CellDtn {
            lambda: s,
            matrix: discrete_dtn(spec, s, level)?,
            decimation: None,
            extension: None,
        }),
    }
}

/// Extrapolated level-m variational normal derivatives (the Schur
/// complement of the weak resolvent form onto V0). The error of level m decays
/// geometrically; the ratio is measured from successive differences
/// (Aitken) and two overlapping extrapolants must agree.
fn discrete_dtn(spec: &FractalSpec, s: f64, level: usize) -> Result<DMatrix<f64>> {
    let level = level.max(4);
    let flux: Vec<DMatrix<f64>> = (level - 3..=level)
        .map(|m| boundary_schur(spec, s, m))
        .collect::<Result<_>>()?;
    let scale = linalg::max_abs(&flux[3]).max(1.0);
    let diff: Vec<DMatrix<f64>> = flux.windows(2).map(|w| &w[1] - &w[0]).collect();
    let extrapolate = |fine: &DMatrix<f64>, d_new: &DMatrix<f64>, d_old: &DMatrix<f64>| {
        if linalg::max_abs(d_new) < 1e-13 * scale {
            return fine.clone();
        }
        let rho = (d_new.dot(d_old) / d_old.dot(d_old)).clamp(0.0, 0.9);
        fine + d_new * (rho / (1.0 - rho))
    };
    let mut hi = extrapolate(&flux[3], &diff[2], &diff[1]);
    let lo = extrapolate(&flux[2], &diff[1], &diff[0]);
    let gap = linalg::max_abs(&(&hi - &lo));
    if gap > DISCRETE_CONSISTENCY * scale {
        return Err(Error::NonConvergent {
            what: format!("discrete normal derivatives at s = {s}"),
            level,
            last: (lo[(0, 0)], hi[(0, 0)]),
        });
    }
    linalg::symmetrize(&mut hi);
    Ok(hi)
}

/// Values at V1 of the η^{(s)} for every V0 index, from the cell data of
/// the children: `ext[j][(l, k)] = η_k(F_j q_l)`.
pub(crate) fn extension_from_children(spec: &FractalSpec, children: &[&CellDtn], s: f64) -> Result<Vec<DMatrix<f64>>> {
    let n0 = spec.n0;
    let n1 = spec.v1_count();
    let k = spec.assemble_level_one(|j| children[j].matrix.clone());
    let inner: Vec<usize> = (n0..n1).collect();
    let bnd: Vec<usize> = (0..n0).collect();
    let k_ii = k.select_rows(&inner).select_columns(&inner);
    let k_ib = k.select_rows(&inner).select_columns(&bnd);
    if linalg::condition(&k_ii) > 1e12 {
        return Err(Error::OnSpectrum { lambda: s });
    }
    let vals = k_ii
        .lu()
        .solve(&(-k_ib))
        .ok_or(Error::OnSpectrum { lambda: s })?;
    Ok((0..spec.j())
        .map(|j| {
            DMatrix::from_fn(n0, n0, |l, kk| {
                let v = spec.v1_index(j, l);
                if v < n0 {
                    if v == kk { 1.0 } else { 0.0 }
                } else {
                    vals[(v - n0, kk)]
                }
            })
        })
        .collect())
}
