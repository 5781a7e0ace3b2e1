use nalgebra::DMatrix;

/// `A_i(λ)` for the gasket: the fixed vertex keeps its value and the
/// midpoint between q_i and q_l gets `((4-λ)(u_i + u_l) + 2 u_o) / ((5-λ)(2-λ))`.
pub fn sg_extension(lambda: f64) -> Vec<DMatrix<f64>> {
    let d = (5.0 - lambda) * (2.0 - lambda);
    let near = (4.0 - lambda) / d;
    let far = 2.0 / d;
    (0..3)
        .map(|i| {
            DMatrix::from_fn(3, 3, |l, k| {
                if l == i {
                    if k == i { 1.0 } else { 0.0 }
                } else if k == i || k == l {
                    near
                } else {
                    far
                }
            })
        })
        .collect()
}
