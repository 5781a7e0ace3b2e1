//! Small dense helpers shared by the oracle and the kernel engine.

use nalgebra::DMatrix;

/// Schur complement of `m` onto the index set `keep`, eliminating the rest.
/// Returns `None` when the eliminated block is singular.
pub fn schur_complement(m: &DMatrix<f64>, keep: &[usize]) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let mut is_kept = vec![false; n];
    for &k in keep {
        is_kept[k] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&i| !is_kept[i]).collect();
    let kb = m.select_rows(keep).select_columns(keep);
    if elim.is_empty() {
        return Some(kb);
    }
    let ii = m.select_rows(&elim).select_columns(&elim);
    let ib = m.select_rows(&elim).select_columns(keep);
    let bi = m.select_rows(keep).select_columns(&elim);
    let x = ii.lu().solve(&ib)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(kb - bi * x)
}

/// 2-norm condition number; infinite for singular input.
pub fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `σ_max(outer) / σ_min(inner)`: the conditioning of a block `inner`
/// measured against the operator it was cut from (catches 1x1 blocks).
pub fn relative_condition(outer: &DMatrix<f64>, inner: &DMatrix<f64>) -> f64 {
    let max = outer.clone().singular_values().max();
    let min = inner.clone().singular_values().min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `m` by its symmetric part.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schur_of_path_graph_is_series_resistor() {
        let l = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        let s = schur_complement(&l, &[0, 2]).unwrap();
        assert!((s[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s[(0, 1)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn singular_block_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(schur_complement(&m, &[0]).is_none());
        assert!(condition(&m).is_infinite());
    }
}
