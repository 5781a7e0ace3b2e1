//! p.c.f. structures: presets, words, vertex addressing and level graphs.

mod address;
mod level;
mod spec;
mod word;

pub use address::{canonicalize, interval_coordinate, interval_vertex, locate, Address, Vertex};
pub(crate) use address::{locate_real, locate_vertex};
pub use level::{Cell, LevelGraph};
pub use spec::{load_spec, preset, ConductanceEntry, FractalSpec, GluingEntry, Kind, SpecDocument};
pub use word::{words_of_length, Word, MAX_WORD_LEN};

/// (r_w, mu_w, r_w * mu_w): the last factor rescales the spectral
/// parameter when descending into K_w.
pub fn cell_scale(spec: &FractalSpec, w: &Word) -> (f64, f64, f64) {
    spec.cell_scale(w)
}
