use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::interval;
use super::prekernel::{sg3_prekernel, sg_prekernel, Prekernel};
use super::solver::{cell_dtn, extension_from_children, Backend, CellDtn};
use crate::decimation::Decimated;
use crate::error::{Culprit, Error, Result};
use crate::linalg;
use crate::oracle::Bc;
use crate::pcf::{
    canonicalize, interval_coordinate, interval_vertex, locate_real, locate_vertex, words_of_length, Address,
    FractalSpec, Kind, LevelGraph, Vertex, Word, MAX_WORD_LEN,
};

/// Condition number of B above which the prekernel is refused.
pub const PREKERNEL_GUARD: f64 = 1e12;
/// Condition number of the V0 normal-derivative matrix above which the
/// Neumann correction is refused.
pub const NEUMANN_GUARD: f64 = 1e12;
/// Scales sampled when estimating the constant of the truncation bound.
const TAIL_LEVELS: usize = 40;

/// Per scale-class letter counts of a word; all data of a cell depends on
/// its word only through this.
pub type ScaleKey = Vec<u16>;

/// One kernel value with its truncation information.
#[derive(Clone, Debug, Serialize)]
pub struct KernelEvaluation {
    pub x: String,
    pub y: String,
    pub lambda: f64,
    pub bc: Bc,
    /// Deepest word length summed.
    pub depth: usize,
    pub value: f64,
    /// Bound on the omitted tail; 0 when the series is already complete.
    pub bound: f64,
    /// S_0, ..., S_depth.
    pub partial_sums: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Point {
    Vertex(Vertex),
    /// Interval coordinate; `level` is the dyadic depth when finite.
    Real { x: f64, level: Option<usize> },
}

impl Point {
    fn level(&self) -> Option<usize> {
        match self {
            Point::Vertex(v) => Some(v.level()),
            Point::Real { level, .. } => *level,
        }
    }
}

/// Evaluates the kernel series for one spec and one resolvent parameter λ
/// of `(λ - Δ)`. Cell data is cached per scale key.
pub struct KernelEngine {
    spec: FractalSpec,
    lambda: f64,
    backend: Backend,
    dtn: RwLock<HashMap<ScaleKey, Arc<CellDtn>>>,
    ext: RwLock<HashMap<ScaleKey, Arc<Vec<DMatrix<f64>>>>>,
    pre: RwLock<HashMap<ScaleKey, Arc<Prekernel>>>,
}

fn cached<T>(
    map: &RwLock<HashMap<ScaleKey, Arc<T>>>,
    key: &ScaleKey,
    make: impl FnOnce() -> Result<T>,
) -> Result<Arc<T>> {
    if let Some(v) = map.read().unwrap().get(key) {
        return Ok(v.clone());
    }
    let v = Arc::new(make()?);
    Ok(map.write().unwrap().entry(key.clone()).or_insert(v).clone())
}

impl KernelEngine {
    pub fn new(spec: &FractalSpec, lambda: f64) -> Result<Self> {
        Self::with_backend(spec, lambda, Backend::for_spec(spec))
    }

    pub fn with_backend(spec: &FractalSpec, lambda: f64, backend: Backend) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::OnSpectrum { lambda });
        }
        if backend == Backend::Interval && spec.kind != Kind::Interval {
            return Err(Error::UnsupportedAddress("interval backend on a non-interval spec".into()));
        }
        Ok(KernelEngine {
            spec: spec.clone(),
            lambda,
            backend,
            dtn: RwLock::default(),
            ext: RwLock::default(),
            pre: RwLock::default(),
        })
    }

    pub fn spec(&self) -> &FractalSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Fills the caches for every scale reachable by words of length ≤ `depth`
    /// so later evaluations only read.
    pub fn prepare(&self, depth: usize) -> Result<()> {
        let mut frontier = vec![self.root()];
        for n in 0..=depth {
            for key in &frontier {
                self.prekernel_at(key).map_err(|e| self.blame(&self.representative(key), e))?;
            }
            if n < depth {
                let mut next: Vec<ScaleKey> = frontier
                    .iter()
                    .flat_map(|k| (0..self.spec.j()).map(move |j| self.child(k, j)))
                    .collect();
                next.sort();
                next.dedup();
                frontier = next;
            }
        }
        Ok(())
    }

    pub fn root(&self) -> ScaleKey {
        vec![0; self.spec.class_factors().len()]
    }

    pub fn key_of(&self, w: &Word) -> ScaleKey {
        let mut key = self.root();
        for &l in w.letters() {
            key[self.spec.scale_class(l as usize)] += 1;
        }
        key
    }

    fn child(&self, key: &ScaleKey, j: usize) -> ScaleKey {
        let mut k = key.clone();
        k[self.spec.scale_class(j)] += 1;
        k
    }

    /// A word with the given key, used for error messages.
    fn representative(&self, key: &ScaleKey) -> Word {
        let mut w = Word::empty();
        for (c, &n) in key.iter().enumerate() {
            let j = (0..self.spec.j()).find(|&j| self.spec.scale_class(j) == c).unwrap();
            for _ in 0..n {
                w.push(j);
            }
        }
        w
    }

    /// `λ · Π f_c^{n_c}`.
    pub fn param(&self, key: &ScaleKey) -> f64 {
        key.iter()
            .zip(self.spec.class_factors())
            .fold(self.lambda, |acc, (&n, &f)| acc * f.powi(n as i32))
    }

    fn blame(&self, w: &Word, e: Error) -> Error {
        match e {
            Error::SingularResolvent { .. }
            | Error::ForbiddenValue { .. }
            | Error::SingularPrekernel { .. }
            | Error::OnSpectrum { .. } => Error::SingularResolvent {
                lambda: self.lambda,
                culprit: Culprit::Word(w.clone()),
            },
            other => other,
        }
    }

    pub fn cell(&self, key: &ScaleKey) -> Result<Arc<CellDtn>> {
        cached(&self.dtn, key, || cell_dtn(&self.spec, self.backend, self.param(key)))
    }

    /// `ext[j][(l, k)] = η_k(F_j q_l)` at the scale of `key`.
    pub fn extension(&self, key: &ScaleKey) -> Result<Arc<Vec<DMatrix<f64>>>> {
        cached(&self.ext, key, || {
            if let Some(e) = &self.cell(key)?.extension {
                return Ok(e.clone());
            }
            let children = self.children(key)?;
            let refs: Vec<&CellDtn> = children.iter().map(|c| c.as_ref()).collect();
            extension_from_children(&self.spec, &refs, self.param(key))
        })
    }

    fn children(&self, key: &ScaleKey) -> Result<Vec<Arc<CellDtn>>> {
        (0..self.spec.j()).map(|j| self.cell(&self.child(key, j))).collect()
    }

    /// `Σ_j r_j^{-1} E_j N^{(λ r_j μ_j)} E_j^T` over V1, boundary first.
    pub fn level_one(&self, key: &ScaleKey) -> Result<DMatrix<f64>> {
        let children = self.children(key)?;
        Ok(self.spec.assemble_level_one(|j| children[j].matrix.clone()))
    }

    pub fn prekernel_at(&self, key: &ScaleKey) -> Result<Arc<Prekernel>> {
        cached(&self.pre, key, || {
            let lambda = self.param(key);
            let k = self.level_one(key)?;
            let n0 = self.spec.n0;
            let inner: Vec<usize> = (n0..k.nrows()).collect();
            let b = k.select_rows(&inner).select_columns(&inner);
            let condition = linalg::relative_condition(&k, &b);
            if condition.is_nan() || condition > PREKERNEL_GUARD {
                return Err(Error::SingularPrekernel { lambda, condition });
            }
            let decimation = self.cell(&self.child(key, 0))?.decimation;
            let (g, closed_form) = match (self.backend, decimation) {
                (Backend::Decimation(Decimated::Sg), Some((l0, tau))) => (sg_prekernel(l0, tau), true),
                (Backend::Decimation(Decimated::Sg3), Some((l0, tau))) => (sg3_prekernel(l0, tau), true),
                _ => {
                    let mut g = b
                        .clone()
                        .try_inverse()
                        .ok_or(Error::SingularPrekernel { lambda, condition })?;
                    linalg::symmetrize(&mut g);
                    (g, self.backend == Backend::Interval)
                }
            };
            Ok(Prekernel {
                lambda,
                b,
                g,
                condition,
                closed_form,
            })
        })
    }

    pub fn prekernel(&self) -> Result<Arc<Prekernel>> {
        self.prekernel_at(&self.root())
    }

    /// `η_{k'}(F_u q_k)` for every k', at the scale of `key`.
    fn eta_row(&self, key: &ScaleKey, u: &[u8], k: usize) -> Result<DVector<f64>> {
        let mut keys = Vec::with_capacity(u.len());
        let mut cur = key.clone();
        for &l in u {
            keys.push(cur.clone());
            cur = self.child(&cur, l as usize);
        }
        let mut row = DVector::from_fn(self.spec.n0, |i, _| if i == k { 1.0 } else { 0.0 });
        for (i, &l) in u.iter().enumerate().rev() {
            let ext = self.extension(&keys[i])?;
            row = ext[l as usize].tr_mul(&row);
        }
        Ok(row)
    }

    fn eta_at(&self, key: &ScaleKey, p: &Point) -> Result<DVector<f64>> {
        match p {
            Point::Vertex(v) => self.eta_row(key, v.word().letters(), v.k()),
            Point::Real { x, .. } => {
                let s = self.param(key);
                Ok(DVector::from_vec(vec![interval::eta(s, 0, *x), interval::eta(s, 1, *x)]))
            }
        }
    }

    /// `(ψ_p(v))_p` over V1 minus V0 at the scale of `key`.
    fn psi_at(&self, key: &ScaleKey, p: &Point) -> Result<DVector<f64>> {
        let n = self.spec.interior_v1().len();
        match p {
            Point::Real { x, .. } => Ok(DVector::from_element(1, interval::psi(self.param(key), *x))),
            Point::Vertex(v) => {
                let letters = v.word().letters();
                let mut out = DVector::zeros(n);
                match letters.len() {
                    0 => {}
                    1 => {
                        let p = self.spec.interior_index(letters[0] as usize, v.k()).expect("canonical level-1 vertex");
                        out[p] = 1.0;
                    }
                    _ => {
                        let j = letters[0] as usize;
                        let row = self.eta_row(&self.child(key, j), &letters[1..], v.k())?;
                        for k in 0..self.spec.n0 {
                            if let Some(p) = self.spec.interior_index(j, k) {
                                out[p] += row[k];
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// `Ψ(a, b) = Σ G_pq ψ_p(a) ψ_q(b)`, evaluated so that swapping a and b
    /// gives the identical floating-point result.
    fn big_psi_at(&self, key: &ScaleKey, a: &Point, b: &Point) -> Result<f64> {
        let pa = self.psi_at(key, a)?;
        if pa.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let pb = self.psi_at(key, b)?;
        let g = &self.prekernel_at(key)?.g;
        Ok(symmetric_form(g, &pa, &pb))
    }

    fn to_points(&self, x: &Address, y: &Address) -> Result<(Point, Point)> {
        let interval = self.spec.kind == Kind::Interval;
        let lift = |a: &Address| -> Result<Point> {
            match a {
                Address::Vertex(v) => Ok(Point::Vertex(v.clone())),
                Address::Real(t) if interval => Ok(match interval_vertex(&self.spec, *t) {
                    Some(v) => Point::Vertex(v),
                    None => Point::Real { x: *t, level: None },
                }),
                Address::Real(_) => Err(Error::UnsupportedAddress("real coordinate off the interval".into())),
            }
        };
        let (px, py) = (lift(x)?, lift(y)?);
        let mixed = matches!(px, Point::Real { .. }) || matches!(py, Point::Real { .. });
        if !mixed {
            return Ok((px, py));
        }
        if self.backend != Backend::Interval {
            return Err(Error::UnsupportedAddress("non-dyadic reals need the interval backend".into()));
        }
        let real = |p: Point| match p {
            Point::Vertex(v) => Point::Real {
                x: interval_coordinate(&v),
                level: Some(v.level()),
            },
            r => r,
        };
        Ok((real(px), real(py)))
    }

    /// Cells of level n containing both points, with both local points.
    fn common_cells(&self, x: &Point, y: &Point, n: usize) -> Vec<(Word, Point, Point)> {
        match (x, y) {
            (Point::Vertex(a), Point::Vertex(b)) => {
                let la = locate_vertex(&self.spec, a, n);
                let lb = locate_vertex(&self.spec, b, n);
                la.into_iter()
                    .filter_map(|(w, va)| {
                        lb.iter()
                            .find(|(u, _)| *u == w)
                            .map(|(_, vb)| (w, Point::Vertex(va), Point::Vertex(vb.clone())))
                    })
                    .collect()
            }
            (Point::Real { x: a, level: la }, Point::Real { x: b, level: lb }) => {
                let local = |level: &Option<usize>, s: f64| Point::Real {
                    x: s,
                    level: level.map(|l| l.saturating_sub(n)),
                };
                let ca = locate_real(*a, n);
                let cb = locate_real(*b, n);
                ca.into_iter()
                    .filter_map(|(w, sa)| {
                        cb.iter()
                            .find(|(u, _)| *u == w)
                            .map(|(_, sb)| (w, local(la, sa), local(lb, *sb)))
                    })
                    .collect()
            }
            _ => unreachable!("points are lifted to a common kind"),
        }
    }

    /// Series terms `T_n = Σ_{|w|=n} r_w Ψ^{(λ r_w μ_w)}(F_w^{-1}x, F_w^{-1}y)`.
    fn terms(&self, x: &Point, y: &Point, depth: usize) -> Result<Vec<f64>> {
        let finite = self.finite_length(x, y);
        let mut out = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            if finite.is_some_and(|f| n >= f) {
                out.push(0.0);
                continue;
            }
            let mut t = 0.0;
            for (w, a, b) in self.common_cells(x, y, n) {
                let key = self.key_of(&w);
                let (r_w, _, _) = self.spec.cell_scale(&w);
                t += r_w * self.big_psi_at(&key, &a, &b).map_err(|e| self.blame(&w, e))?;
            }
            out.push(t);
        }
        Ok(out)
    }

    fn finite_length(&self, x: &Point, y: &Point) -> Option<usize> {
        match (x.level(), y.level()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Constant C of the tail bound `C ρ^{M+1} / (1 - ρ)`:
    /// (cells sharing a point) · sup|ψ|² · sup_scales Σ|G_pq|, the sups taken
    /// over the first TAIL_LEVELS scales of every single-class path.
    pub fn tail_constant(&self) -> Result<f64> {
        let classes = self.spec.class_factors().len();
        let mut g_sup: f64 = 0.0;
        let mut psi_sup: f64 = 1.0;
        let samples = if self.lambda < 0.0 { Some(self.sample_points()) } else { None };
        for c in 0..classes {
            for n in 0..=TAIL_LEVELS {
                let mut key = self.root();
                key[c] = n as u16;
                let pre = self.prekernel_at(&key).map_err(|e| self.blame(&self.representative(&key), e))?;
                g_sup = g_sup.max(pre.g.iter().map(|v| v.abs()).sum());
                if let Some(points) = &samples {
                    for p in points {
                        psi_sup = psi_sup.max(self.psi_at(&key, p)?.amax());
                    }
                }
            }
        }
        Ok(self.multiplicity() as f64 * psi_sup * psi_sup * g_sup)
    }

    fn sample_points(&self) -> Vec<Point> {
        if self.backend == Backend::Interval {
            return (1..64).map(|i| Point::Real { x: i as f64 / 64.0 + 1e-3, level: None }).collect();
        }
        LevelGraph::build(&self.spec, 3)
            .vertices
            .into_iter()
            .map(Point::Vertex)
            .collect()
    }

    /// Largest number of level-1 cells meeting at one point.
    fn multiplicity(&self) -> usize {
        let mut count: HashMap<usize, usize> = HashMap::new();
        for row in &self.spec.gluing {
            for &id in row {
                *count.entry(id).or_default() += 1;
            }
        }
        count.into_values().max().unwrap_or(1).max(2)
    }

    /// Dirichlet kernel summed over words of length ≤ `depth`.
    pub fn dirichlet(&self, x: &Address, y: &Address, depth: usize) -> Result<KernelEvaluation> {
        let depth = depth.min(MAX_WORD_LEN);
        let (px, py) = self.to_points(x, y)?;
        self.prekernel().map_err(|e| self.blame(&Word::empty(), e))?;
        let terms = self.terms(&px, &py, depth)?;
        let mut partial_sums = Vec::with_capacity(terms.len());
        let mut s = 0.0;
        for t in &terms {
            s += t;
            partial_sums.push(s);
        }
        let complete = self.finite_length(&px, &py).is_some_and(|f| depth + 1 >= f);
        let bound = if complete {
            0.0
        } else {
            let rho = self.spec.max_r();
            self.tail_constant()? * rho.powi(depth as i32 + 1) / (1.0 - rho)
        };
        Ok(KernelEvaluation {
            x: x.to_string(),
            y: y.to_string(),
            lambda: self.lambda,
            bc: Bc::Dirichlet,
            depth,
            value: s,
            bound,
            partial_sums,
        })
    }

    /// Smallest depth whose tail bound is below `tol` (complete depth for
    /// pairs of junction points).
    pub fn depth_for(&self, x: &Address, y: &Address, tol: f64) -> Result<usize> {
        let (px, py) = self.to_points(x, y)?;
        if let Some(f) = self.finite_length(&px, &py) {
            return Ok(f.saturating_sub(1));
        }
        let c = self.tail_constant()?;
        let rho = self.spec.max_r();
        let mut m = 0;
        while m < MAX_WORD_LEN && c * rho.powi(m as i32 + 1) / (1.0 - rho) > tol {
            m += 1;
        }
        Ok(m)
    }

    /// `C = N^{-1}` with `N_pq = ∂_n η_p(q)` at level 0.
    pub fn neumann_c(&self) -> Result<DMatrix<f64>> {
        let n = self.cell(&self.root())?.matrix.clone();
        let condition = linalg::condition(&n);
        if condition.is_nan() || condition > NEUMANN_GUARD {
            return Err(Error::SingularNeumann {
                lambda: self.lambda,
                condition,
            });
        }
        let mut c = n.try_inverse().ok_or(Error::SingularNeumann {
            lambda: self.lambda,
            condition,
        })?;
        linalg::symmetrize(&mut c);
        Ok(c)
    }

    /// Neumann kernel: the Dirichlet series plus `Σ C_pq η_p(x) η_q(y)`.
    pub fn neumann(&self, x: &Address, y: &Address, depth: usize) -> Result<KernelEvaluation> {
        let c = self.neumann_c()?;
        let mut ev = self.dirichlet(x, y, depth)?;
        let (px, py) = self.to_points(x, y)?;
        let root = self.root();
        let ex = self.eta_at(&root, &px).map_err(|e| self.blame(&Word::empty(), e))?;
        let ey = self.eta_at(&root, &py).map_err(|e| self.blame(&Word::empty(), e))?;
        let corr = symmetric_form(&c, &ex, &ey);
        ev.value += corr;
        for s in &mut ev.partial_sums {
            *s += corr;
        }
        ev.bc = Bc::Neumann;
        Ok(ev)
    }

    pub fn kernel(&self, x: &Address, y: &Address, depth: usize, bc: Bc) -> Result<KernelEvaluation> {
        match bc {
            Bc::Dirichlet => self.dirichlet(x, y, depth),
            Bc::Neumann => self.neumann(x, y, depth),
        }
    }

    /// ψ_p at a point of the whole structure.
    pub fn psi_value(&self, p: usize, x: &Address) -> Result<f64> {
        let (px, _) = self.to_points(x, x)?;
        let v = self.psi_at(&self.root(), &px)?;
        v.get(p)
            .copied()
            .ok_or_else(|| Error::UnsupportedAddress(format!("no interior V1 vertex with index {p}")))
    }

    /// η_k at a point.
    pub fn eta_value(&self, k: usize, x: &Address) -> Result<f64> {
        let (px, _) = self.to_points(x, x)?;
        Ok(self.eta_at(&self.root(), &px)?[k])
    }

    pub fn big_psi(&self, x: &Address, y: &Address) -> Result<f64> {
        let (px, py) = self.to_points(x, y)?;
        self.big_psi_at(&self.root(), &px, &py)
    }

    /// `∫ G(x, y) f(y) dμ(y)` by the vertex rule
    /// `Σ_{|w|=m} μ_w Σ_k a_k G(x, F_w q_k) f_w(q_k)`, exact for functions
    /// that are piecewise harmonic at level m against the kernel's trace.
    pub fn apply(
        &self,
        x: &Address,
        f: &dyn Fn(&Word, usize) -> f64,
        m_quad: usize,
        depth: usize,
        bc: Bc,
    ) -> Result<f64> {
        let a = self.spec.harmonic_mass();
        let mut weights: BTreeMap<Vertex, f64> = BTreeMap::new();
        for w in words_of_length(self.spec.j(), m_quad) {
            let (_, mu, _) = self.spec.cell_scale(&w);
            for (k, ak) in a.iter().enumerate() {
                let v = f(&w, k);
                if v != 0.0 {
                    *weights.entry(canonicalize(&self.spec, w.clone(), k)).or_default() += mu * ak * v;
                }
            }
        }
        let mut total = 0.0;
        for (v, wt) in weights {
            if bc == Bc::Dirichlet && v.level() == 0 {
                continue;
            }
            total += wt * self.kernel(x, &Address::Vertex(v), depth, bc)?.value;
        }
        Ok(total)
    }
}

fn symmetric_form(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for p in 0..n {
        s += g[(p, p)] * (a[p] * b[p]);
        for q in p + 1..n {
            s += g[(p, q)] * (a[p] * b[q] + a[q] * b[p]);
        }
    }
    s
}
