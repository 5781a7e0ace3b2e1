use std::collections::HashMap;

use super::address::{canonicalize, Vertex};
use super::spec::FractalSpec;
use super::word::{words_of_length, Word};

/// The level-m approximating graph.
#[derive(Clone, Debug)]
pub struct LevelGraph {
    pub level: usize,
    /// Sorted by (level, word, k); the first n0 entries are V0.
    pub vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    /// Unordered edges (a < b) with renormalized conductance c / r_w.
    pub edges: Vec<(usize, usize, f64)>,
    pub degree: Vec<usize>,
    pub cells: Vec<Cell>,
    /// Lumped mass m_x = sum over cells w containing x of mu_w a_k.
    pub mass: Vec<f64>,
    pub n0: usize,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub word: Word,
    /// Vertex index of F_w(q_k) for each k.
    pub vertices: Vec<usize>,
    pub r: f64,
    pub mu: f64,
}

impl LevelGraph {
    pub fn build(spec: &FractalSpec, m: usize) -> LevelGraph {
        let words = words_of_length(spec.j(), m);
        let mut per_cell: Vec<Vec<Vertex>> = Vec::with_capacity(words.len());
        let mut all: Vec<Vertex> = Vec::new();
        for w in &words {
            let vs: Vec<Vertex> = (0..spec.n0).map(|k| canonicalize(spec, w.clone(), k)).collect();
            all.extend(vs.iter().cloned());
            per_cell.push(vs);
        }
        all.sort_by(|a, b| (a.level(), a.word(), a.k()).cmp(&(b.level(), b.word(), b.k())));
        all.dedup();
        let index: HashMap<Vertex, usize> = all.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();

        let n = all.len();
        let a = spec.harmonic_mass();
        let mut degree = vec![0; n];
        let mut mass = vec![0.0; n];
        let mut edge_map: HashMap<(usize, usize), f64> = HashMap::new();
        let mut cells = Vec::with_capacity(words.len());
        for (w, vs) in words.into_iter().zip(per_cell) {
            let (r, mu, _) = spec.cell_scale(&w);
            let ids: Vec<usize> = vs.iter().map(|v| index[v]).collect();
            for (k, &i) in ids.iter().enumerate() {
                degree[i] += 1;
                mass[i] += mu * a[k];
                for (l, &jdx) in ids.iter().enumerate().skip(k + 1) {
                    let c = spec.conductances[(k, l)];
                    if c > 0.0 {
                        *edge_map.entry((i.min(jdx), i.max(jdx))).or_insert(0.0) += c / r;
                    }
                }
            }
            cells.push(Cell { word: w, vertices: ids, r, mu });
        }
        let mut edges: Vec<(usize, usize, f64)> = edge_map.into_iter().map(|((a, b), c)| (a, b, c)).collect();
        edges.sort_by_key(|e| (e.0, e.1));
        LevelGraph {
            level: m,
            vertices: all,
            index,
            edges,
            degree,
            cells,
            mass,
            n0: spec.n0,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        i < self.n0
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        self.n0..self.len()
    }
}
