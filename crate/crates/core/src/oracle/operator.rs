use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::Bc;
use crate::error::{Culprit, Error, Result};
use crate::pcf::{FractalSpec, LevelGraph, Vertex};

/// Largest number of unknowns the dense oracle accepts.
pub const DENSE_CAP: usize = 8192;

/// Relative distance to the spectrum below which a resolvent is refused.
pub const SPECTRAL_GUARD: f64 = 1e-8;

/// The renormalized graph Laplacian `Δ_{μ,m} u(x) = m_x^{-1} Σ c_xy (u(y) - u(x))`
/// on V_m, restricted to interior rows for Dirichlet conditions.
#[derive(Debug)]
pub struct DiscreteOperator {
    pub graph: LevelGraph,
    pub bc: Bc,
    /// Graph indices of the unknowns (interior for Dirichlet, all for Neumann).
    pub unknowns: Vec<usize>,
    /// Stiffness matrix over all of V_m (renormalized conductances).
    pub stiffness: DMatrix<f64>,
    spectrum: OnceLock<Vec<f64>>,
}

impl DiscreteOperator {
    pub fn new(spec: &FractalSpec, m: usize, bc: Bc) -> Result<Self> {
        let graph = LevelGraph::build(spec, m);
        let n = graph.len();
        let unknowns: Vec<usize> = match bc {
            Bc::Dirichlet => graph.interior().collect(),
            Bc::Neumann => (0..n).collect(),
        };
        if unknowns.len() > DENSE_CAP {
            return Err(Error::TooLarge {
                size: unknowns.len(),
                cap: DENSE_CAP,
            });
        }
        let mut stiffness = DMatrix::zeros(n, n);
        for &(a, b, c) in &graph.edges {
            stiffness[(a, a)] += c;
            stiffness[(b, b)] += c;
            stiffness[(a, b)] -= c;
            stiffness[(b, a)] -= c;
        }
        Ok(DiscreteOperator {
            graph,
            bc,
            unknowns,
            stiffness,
            spectrum: OnceLock::new(),
        })
    }

    pub fn level(&self) -> usize {
        self.graph.level
    }

    /// Dense Δ_{μ,m} over the unknowns.
    pub fn matrix(&self) -> DMatrix<f64> {
        let u = &self.unknowns;
        let mut a = -self.stiffness.select_rows(u).select_columns(u);
        for (r, &i) in u.iter().enumerate() {
            let inv = 1.0 / self.graph.mass[i];
            a.row_mut(r).scale_mut(inv);
        }
        a
    }

    /// Applies Δ_{μ,m} to a function on all of V_m; returns values on V_m
    /// (rows outside the unknowns are left at 0).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(u);
        let lu = &self.stiffness * v;
        let mut out = vec![0.0; u.len()];
        for &i in &self.unknowns {
            out[i] = -lu[i] / self.graph.mass[i];
        }
        out
    }

    /// Eigenvalues of Δ_{μ,m}, sorted by increasing magnitude.
    pub fn spectrum(&self) -> &[f64] {
        self.spectrum.get_or_init(|| {
            let u = &self.unknowns;
            let s: Vec<f64> = u.iter().map(|&i| self.graph.mass[i].sqrt().recip()).collect();
            let mut k = self.stiffness.select_rows(u).select_columns(u);
            for r in 0..u.len() {
                for c in 0..u.len() {
                    k[(r, c)] *= s[r] * s[c];
                }
            }
            let mut ev: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().map(|e| -e).collect();
            ev.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            ev
        })
    }

    /// Fails with the nearest eigenvalue when λ is within the guard distance.
    pub fn guard(&self, lambda: f64) -> Result<()> {
        let ev = self.spectrum();
        let scale = ev.iter().fold(0.0f64, |a, e| a.max(e.abs())).max(1.0);
        let nearest = ev
            .iter()
            .cloned()
            .min_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()));
        if let Some(e) = nearest {
            if (e - lambda).abs() <= SPECTRAL_GUARD * scale {
                return Err(Error::SingularResolvent {
                    lambda,
                    culprit: Culprit::Eigenvalue(e),
                });
            }
        }
        Ok(())
    }

    /// Solves (λ - Δ_{μ,m}) u = f on the unknowns with boundary data `g`
    /// (ignored for Neumann). In weak form: (λ M + L) u = M f.
    fn solve(&self, lambda: f64, f: &[f64], boundary: &[f64]) -> Result<Vec<f64>> {
        self.guard(lambda)?;
        let n = self.graph.len();
        let u = &self.unknowns;
        let mut a = self.stiffness.select_rows(u).select_columns(u);
        let mut rhs = DVector::zeros(u.len());
        for (r, &i) in u.iter().enumerate() {
            a[(r, r)] += lambda * self.graph.mass[i];
            rhs[r] = self.graph.mass[i] * f[i];
        }
        let mut full = vec![0.0; n];
        if self.bc == Bc::Dirichlet {
            for (k, &g) in boundary.iter().enumerate() {
                full[k] = g;
                if g != 0.0 {
                    for (r, &i) in u.iter().enumerate() {
                        rhs[r] -= self.stiffness[(i, k)] * g;
                    }
                }
            }
        }
        let sol = a.clone().lu().solve(&rhs).ok_or(Error::SingularResolvent {
            lambda,
            culprit: Culprit::Eigenvalue(lambda),
        })?;
        let res = (&a * &sol - &rhs).amax();
        let scale = rhs.amax().max(a.amax() * sol.amax());
        if scale > 0.0 && res > 1e-10 * scale {
            return Err(Error::NonConvergent {
                what: "dense resolvent solve".into(),
                level: self.level(),
                last: (res, scale),
            });
        }
        for (r, &i) in u.iter().enumerate() {
            full[i] = sol[r];
        }
        Ok(full)
    }

    /// Discrete resolvent `(λ - Δ_{μ,m})^{-1} f`, zero on V0 for Dirichlet.
    pub fn resolvent(&self, lambda: f64, f: &[f64]) -> Result<Vec<f64>> {
        self.solve(lambda, f, &vec![0.0; self.graph.n0])
    }

    /// Solution of (λ - Δ)η = 0 with η = δ_pq on V0 (Dirichlet operators only).
    pub fn eta(&self, lambda: f64, p: usize) -> Result<Vec<f64>> {
        assert_eq!(self.bc, Bc::Dirichlet, "eta needs Dirichlet rows");
        let mut g = vec![0.0; self.graph.n0];
        g[p] = 1.0;
        self.solve(lambda, &vec![0.0; self.graph.len()], &g)
    }

}

/// Something that can be evaluated on vertices of some levels.
pub trait VertexFunction {
    /// `None` when the vertex lies beyond the available resolution.
    fn value(&self, v: &Vertex) -> Option<f64>;
}

impl<F: Fn(&Vertex) -> Option<f64>> VertexFunction for F {
    fn value(&self, v: &Vertex) -> Option<f64> {
        self(v)
    }
}

/// Values on the vertices of one level graph.
#[derive(Clone, Debug)]
pub struct DiscreteFunction {
    pub graph: LevelGraph,
    pub values: Vec<f64>,
}

impl VertexFunction for DiscreteFunction {
    fn value(&self, v: &Vertex) -> Option<f64> {
        self.graph.index_of(v).map(|i| self.values[i])
    }
}
