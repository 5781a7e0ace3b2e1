use approx::assert_relative_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg;
use crate::pcf::{load_spec, preset, Address, LevelGraph, Vertex};
use crate::{Culprit, Error};

fn v(spec: &FractalSpec, s: &str) -> Address {
    Address::Vertex(Vertex::parse(spec, s).unwrap())
}

fn dyadic(rng: &mut ChaCha8Rng, depth: u32) -> f64 {
    let n = 1u64 << depth;
    rng.random_range(0..=n) as f64 / n as f64
}

#[test]
fn sg_harmonic_prekernel() {
    let spec = preset("sg").unwrap();
    let pre = prekernel(&spec, 0.0).unwrap();
    assert!(pre.closed_form);
    for p in 0..3 {
        for q in 0..3 {
            let want = if p == q { 9.0 / 50.0 } else { 3.0 / 50.0 };
            assert!((pre.g[(p, q)] - want).abs() < 1e-12);
            let b = if p == q { 20.0 / 3.0 } else { -5.0 / 3.0 };
            assert!((pre.b[(p, q)] - b).abs() < 1e-12);
        }
    }
}

#[test]
fn closed_prekernels_invert_b() {
    for name in ["sg", "sg3"] {
        let spec = preset(name).unwrap();
        for t in [-7.3, -1.0, 0.0, 0.4, 3.0, 25.0] {
            let pre = prekernel(&spec, t).unwrap();
            let numeric = pre.b.clone().try_inverse().unwrap();
            let scale = linalg::max_abs(&numeric);
            assert!(linalg::max_abs(&(&numeric - &pre.g)) < 1e-10 * scale.max(1.0), "{name} {t}");
            assert!(linalg::max_asymmetry(&pre.b) < 1e-12);
        }
    }
}

#[test]
fn sg3_b_matches_displayed_form() {
    let spec = preset("sg3").unwrap();
    let adjacency = {
        let n = spec.interior_v1().len();
        let mut a = DMatrix::zeros(n, n);
        for row in &spec.gluing {
            for &x in row {
                for &y in row {
                    if x != y && x >= spec.n0 && y >= spec.n0 {
                        let p = spec.interior_index_of_id(x).unwrap();
                        let q = spec.interior_index_of_id(y).unwrap();
                        a[(p, q)] += 1.0;
                    }
                }
            }
        }
        a
    };
    for t in [0.0, 0.8, -2.0] {
        let engine = KernelEngine::new(&spec, t).unwrap();
        let (l0, tau) = engine.cell(&vec![1]).unwrap().decimation.unwrap();
        let b = engine.prekernel().unwrap().b.clone();
        assert!(linalg::max_abs(&(&b - sg3_b(l0, tau, &adjacency))) < 1e-10, "{t}");
    }
    let b0 = b_matrix(&spec, 0.0).unwrap();
    assert_relative_eq!(b0[(6, 6)], 15.0 / 7.0 * 6.0, epsilon = 1e-12);
    assert_relative_eq!(b0[(0, 0)], 15.0 / 7.0 * 4.0, epsilon = 1e-12);
}

#[test]
fn sg3_determinant() {
    let spec = preset("sg3").unwrap();
    let at_zero = (7.0f64 / 15.0).powi(7) / 8100.0;
    let g0 = prekernel(&spec, 0.0).unwrap().g.clone();
    assert_relative_eq!(g0.determinant(), at_zero, max_relative = 1e-12);
    assert_relative_eq!(sg3_det_g(0.0, 1.0), at_zero, max_relative = 1e-14);
    for t in [-4.0, -0.5, 0.3, 2.0] {
        let engine = KernelEngine::new(&spec, t).unwrap();
        let (l0, tau) = engine.cell(&vec![1]).unwrap().decimation.unwrap();
        let det = engine.prekernel().unwrap().g.determinant();
        assert_relative_eq!(det, sg3_det_g(l0, tau), max_relative = 1e-9);
        assert!((det - sg3_det_g_single_tau(l0, tau)).abs() > 1e-6 * det.abs());
    }
}

#[test]
fn interval_prekernel_is_the_psi_coefficient() {
    let spec = preset("interval").unwrap();
    for t in [-5.0, 0.0, 1.0, 40.0] {
        let g = prekernel(&spec, t).unwrap().g[(0, 0)];
        assert_relative_eq!(g, interval::psi_coefficient(t), max_relative = 1e-13);
    }
}

#[test]
fn psi_is_kronecker_on_v1_and_bounded_when_harmonic() {
    for name in ["sg", "sg3"] {
        let spec = preset(name).unwrap();
        let g1 = LevelGraph::build(&spec, 1);
        for p in 0..spec.interior_v1().len() {
            let f = psi(&spec, 0.7, p).unwrap();
            for (i, x) in g1.vertices.iter().enumerate() {
                let want = if i >= spec.n0 && i - spec.n0 == p { 1.0 } else { 0.0 };
                assert_eq!(f.value(&Address::Vertex(x.clone())).unwrap(), want);
            }
        }
        let f = psi(&spec, 0.0, 0).unwrap();
        for x in LevelGraph::build(&spec, 3).vertices {
            let val = f.value(&Address::Vertex(x)).unwrap();
            assert!((-1e-12..=1.0 + 1e-12).contains(&val));
        }
    }
    let spec = preset("interval").unwrap();
    let f = psi(&spec, 1.0, 0).unwrap();
    assert_relative_eq!(f.value(&Address::Real(0.25)).unwrap(), 0.25f64.sinh() / 0.5f64.sinh(), epsilon = 1e-15);
}

#[test]
fn psi_matches_discrete_eta_inside_cells() {
    // ψ_p on cell j is η at parameter λ r_j μ_j pulled back by F_j.
    let spec = preset("sg").unwrap();
    let t = 2.5;
    let engine = KernelEngine::new(&spec, t).unwrap();
    let local = crate::oracle::eta_discrete(&spec, t / 5.0, 1, 6).unwrap();
    for s in ["12:2", "123:0", "1213:2"] {
        let x = Vertex::parse(&spec, s).unwrap();
        let inner = Vertex::new(&spec, x.word().suffix(1), x.k()).unwrap();
        // F_1 q_1 is interior index of (0, 1).
        let p = spec.interior_index(0, 1).unwrap();
        let got = engine.psi_value(p, &Address::Vertex(x)).unwrap();
        let want = crate::oracle::VertexFunction::value(&local, &inner).unwrap();
        assert!((got - want).abs() < 1e-3);
    }
}

#[test]
fn interval_series_matches_closed_form() {
    let spec = preset("interval").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for t in [0.5, 1.0, 4.0] {
        let engine = KernelEngine::new(&spec, t).unwrap();
        for _ in 0..30 {
            let (x, y) = (dyadic(&mut rng, 10), dyadic(&mut rng, 10));
            let ev = engine.dirichlet(&Address::Real(x), &Address::Real(y), 12).unwrap();
            assert_eq!(ev.bound, 0.0);
            assert!((ev.value - interval::dirichlet(t, x, y).unwrap()).abs() < 1e-12);
            let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
            let ev = engine.dirichlet(&Address::Real(x), &Address::Real(y), 32).unwrap();
            assert!((ev.value - interval::dirichlet(t, x, y).unwrap()).abs() < 1e-10);
        }
        let mid = engine.dirichlet(&Address::Real(0.5), &Address::Real(0.5), 0).unwrap();
        assert_eq!(mid.partial_sums.len(), 1);
    }
    let ev = dirichlet_kernel(&spec, 1.0, &Address::Real(0.5), &Address::Real(0.5), 5).unwrap();
    assert_relative_eq!(ev.value, 0.5f64.sinh().powi(2) / 1.0f64.sinh(), epsilon = 1e-15);
}

#[test]
fn green_function_limit() {
    let spec = preset("interval").unwrap();
    let ev = dirichlet_kernel(&spec, 1e-8, &Address::Real(0.25), &Address::Real(0.5), 3).unwrap();
    assert!((ev.value - 0.125).abs() < 1e-6);
}

#[test]
fn truncation_bounds_hold_and_decrease() {
    let spec = preset("interval").unwrap();
    let engine = KernelEngine::new(&spec, 3.0).unwrap();
    let x = Address::Real(1.0 / 3.0);
    let y = Address::Real(0.3);
    let full = engine.dirichlet(&x, &y, 32).unwrap().value;
    let mut last = f64::INFINITY;
    for m in 0..20 {
        let ev = engine.dirichlet(&x, &y, m).unwrap();
        assert!(ev.bound < last);
        assert!((full - ev.value).abs() <= ev.bound + 1e-15);
        last = ev.bound;
    }
}

#[test]
fn kernel_is_symmetric_and_vanishes_on_boundary() {
    for (name, t) in [("sg", 1.3), ("sg3", -0.8), ("interval", 2.0)] {
        let spec = preset(name).unwrap();
        let engine = KernelEngine::new(&spec, t).unwrap();
        let verts = LevelGraph::build(&spec, 2).vertices;
        for a in &verts {
            for b in &verts {
                let (x, y) = (Address::Vertex(a.clone()), Address::Vertex(b.clone()));
                let g1 = engine.dirichlet(&x, &y, 4).unwrap().value;
                let g2 = engine.dirichlet(&y, &x, 4).unwrap().value;
                assert_eq!(g1, g2);
                if a.level() == 0 || b.level() == 0 {
                    assert_eq!(g1, 0.0);
                }
            }
        }
    }
}

#[test]
fn kernel_on_vn_inverts_the_cell_operator() {
    for (name, t, n) in [("interval", 1.5, 4), ("sg", 0.7, 3), ("sg3", 2.0, 2), ("sg", -4.0, 2)] {
        let spec = preset(name).unwrap();
        let engine = KernelEngine::new(&spec, t).unwrap();
        assert!(telescoping(&engine, n).unwrap() < 1e-10, "{name}");
    }
}

#[test]
fn cross_scale_identity() {
    for name in ["interval", "sg", "sg3"] {
        let spec = preset(name).unwrap();
        for t in [-3.0, 0.0, 0.25, 5.0] {
            let r = cross_scale_check(&spec, t).unwrap();
            assert!(r.relative < 1e-10, "{name} {t} {}", r.relative);
        }
    }
}

#[test]
fn discrete_backend_agrees_with_closed_forms() {
    for (name, t) in [("sg", 1.1), ("sg3", -0.6), ("interval", 3.0)] {
        let spec = preset(name).unwrap();
        let exact = KernelEngine::new(&spec, t).unwrap();
        let numeric = KernelEngine::with_backend(&spec, t, Backend::Discrete { level: DISCRETE_LEVEL }).unwrap();
        let (a, b) = (exact.prekernel().unwrap(), numeric.prekernel().unwrap());
        assert!(!b.closed_form);
        assert!(linalg::max_abs(&(&a.g - &b.g)) < 1e-9, "{name}");
        let x = LevelGraph::build(&spec, 3).vertices;
        for (p, q) in [(4, 8), (7, 7), (5, 3)] {
            let (x, y) = (Address::Vertex(x[p].clone()), Address::Vertex(x[q].clone()));
            let g1 = exact.dirichlet(&x, &y, 3).unwrap().value;
            let g2 = numeric.dirichlet(&x, &y, 3).unwrap().value;
            assert!((g1 - g2).abs() < 1e-9);
        }
    }
}

#[test]
fn custom_interval_matches_closed_form() {
    let doc = r#"{"schema":1,"J":2,"r":[0.5,0.5],"mu":[0.5,0.5],"n0":2,
        "gluing":[{"cell":0,"boundary_index":0,"vertex_id":0},{"cell":0,"boundary_index":1,"vertex_id":2},
                  {"cell":1,"boundary_index":0,"vertex_id":2},{"cell":1,"boundary_index":1,"vertex_id":1}],
        "conductances":[{"u":0,"v":1,"c":1.0},{"u":1,"v":0,"c":1.0}]}"#;
    let spec = load_spec(doc).unwrap();
    assert_eq!(spec.kind, crate::pcf::Kind::Custom);
    let engine = KernelEngine::new(&spec, 2.0).unwrap();
    for (a, b) in [("1:1", "12:1"), ("21:1", "122:0")] {
        let (x, y) = (v(&spec, a), v(&spec, b));
        let g = engine.dirichlet(&x, &y, 5).unwrap().value;
        let cx = crate::pcf::interval_coordinate(&Vertex::parse(&spec, a).unwrap());
        let cy = crate::pcf::interval_coordinate(&Vertex::parse(&spec, b).unwrap());
        assert!((g - interval::dirichlet(2.0, cx, cy).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn neumann_c_matrix_properties() {
    for (name, t) in [("interval", 1.0), ("sg", 0.9), ("sg3", 2.2)] {
        let spec = preset(name).unwrap();
        let engine = KernelEngine::new(&spec, t).unwrap();
        let c = engine.neumann_c().unwrap();
        assert!(linalg::max_asymmetry(&c) < 1e-12);
        let n = engine.cell(&engine.root()).unwrap().matrix.clone();
        let id = DMatrix::<f64>::identity(spec.n0, spec.n0);
        assert!(linalg::max_abs(&(&c * &n - id)) < 1e-10);
    }
    let spec = preset("sg").unwrap();
    assert!(matches!(neumann_c_matrix(&spec, 0.0), Err(Error::SingularNeumann { .. })));
}

#[test]
fn interval_neumann_kernel() {
    let spec = preset("interval").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let engine = KernelEngine::new(&spec, 1.0).unwrap();
    for _ in 0..40 {
        let (x, y) = (dyadic(&mut rng, 8), dyadic(&mut rng, 8));
        let ev = engine.neumann(&Address::Real(x), &Address::Real(y), 10).unwrap();
        assert!((ev.value - interval::neumann(1.0, x, y).unwrap()).abs() < 1e-10);
        let back = engine.neumann(&Address::Real(y), &Address::Real(x), 10).unwrap();
        assert_eq!(ev.value, back.value);
    }
}

#[test]
fn apply_resolvent_basics() {
    let spec = preset("interval").unwrap();
    let one = |_: &crate::pcf::Word, _: usize| 1.0;
    let u = apply_resolvent(&spec, 0.0, &one, &Address::Real(0.5), 12, 8, crate::oracle::Bc::Dirichlet).unwrap();
    assert!((u - 0.125).abs() < 1e-3);
    let zero = |_: &crate::pcf::Word, _: usize| 0.0;
    let u = apply_resolvent(&spec, 1.0, &zero, &Address::Real(0.3), 12, 4, crate::oracle::Bc::Dirichlet).unwrap();
    assert_eq!(u, 0.0);
}

#[test]
fn singular_cells_are_named() {
    // Dirichlet eigenvalue -π² of the interval sits on every cell level
    // whose parameter is -(2π)^2 k²/4^n; at -4π² the whole interval fails.
    let spec = preset("interval").unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    let err = dirichlet_kernel(&spec, -4.0 * pi2, &Address::Real(0.3), &Address::Real(0.6), 3).unwrap_err();
    assert!(matches!(err, Error::SingularResolvent { culprit: Culprit::Word(_), .. }), "{err}");
}


#[test]
fn whole_interval_eigenvalue_is_refused_at_the_root() {
    let spec = preset("interval").unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    let err = dirichlet_kernel(&spec, -pi2, &Address::Real(0.3), &Address::Real(0.6), 3).unwrap_err();
    assert!(matches!(&err, Error::SingularResolvent { culprit: Culprit::Word(w), .. } if w.is_empty()), "{err}");
    // Tiny negative parameters are far from the spectrum.
    assert!(interval::dtn(-1e-20).is_ok());
    assert!(KernelEngine::new(&spec, -2.0).unwrap().tail_constant().is_ok());
}
