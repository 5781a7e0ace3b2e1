//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::Instant;

use frk_core::decimation::{boundary_normal_derivs, lambda_sequence, sg3_extension_residuals, Decimated};
use frk_core::kernel::{self, interval, sg3_det_g, KernelEngine};
use frk_core::linalg;
use frk_core::oracle::{boundary_flux, boundary_schur, discrete_resolvent, normal_sum_at, Bc};
use frk_core::pcf::{preset, words_of_length, Address, FractalSpec, LevelGraph, Vertex, Word};
use frk_core::Result;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn dyadic(rng: &mut ChaCha8Rng, depth: u32) -> f64 {
    let n = 1u64 << depth;
    rng.random_range(0..=n) as f64 / n as f64
}

fn vertex(spec: &FractalSpec, s: &str) -> Address {
    Address::Vertex(Vertex::parse(spec, s).expect("valid vertex"))
}

/// Least-squares geometric ratio of `diffs` (pairs of index and magnitude).
fn fitted_ratio(diffs: &[(usize, f64)]) -> f64 {
    let n = diffs.len() as f64;
    let (sx, sy) = diffs.iter().fold((0.0, 0.0), |(a, b), &(m, d)| (a + m as f64, b + d.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = diffs.iter().fold((0.0, 0.0), |(a, b), &(m, d)| {
        let dx = m as f64 - mx;
        (a + dx * (d.ln() - my), b + dx * dx)
    });
    (num / den).exp()
}

fn ac1() -> Result<Outcome> {
    let start = Instant::now();
    let spec = preset("interval")?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 4.0] {
        let engine = KernelEngine::new(&spec, t)?;
        for _ in 0..100 {
            let depth = rng.random_range(1..=10);
            let (x, y) = (dyadic(&mut rng, depth), dyadic(&mut rng, depth));
            let series = engine.dirichlet(&Address::Real(x), &Address::Real(y), 10)?.value;
            worst = worst.max((series - interval::dirichlet(t, x, y)?).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 5.0, format!("max |series - closed form| = {worst:.2e} (tol 1e-10), {secs:.2} s (limit 5 s)"))
}

fn ac2() -> Result<Outcome> {
    let spec = preset("interval")?;
    let engine = KernelEngine::new(&spec, 1e-8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (a, b) = if i % 2 == 0 { (rng.random::<f64>(), rng.random::<f64>()) } else { (dyadic(&mut rng, 8), dyadic(&mut rng, 8)) };
        let (x, y) = (a.min(b), a.max(b));
        let g = engine.dirichlet(&Address::Real(x), &Address::Real(y), 40)?.value;
        worst = worst.max((g - x * (1.0 - y)).abs());
    }
    outcome(worst <= 1e-6, format!("max |G - x(1-y)| = {worst:.2e} over 100 pairs (tol 1e-6)"))
}

fn ac3() -> Result<Outcome> {
    let spec = preset("sg")?;
    let g = &kernel::prekernel(&spec, 0.0)?.g;
    let mut worst: f64 = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            let want = if p == q { 9.0 / 50.0 } else { 3.0 / 50.0 };
            worst = worst.max((g[(p, q)] - want).abs());
        }
    }
    outcome(worst <= 1e-12, format!("diag {:.15}, off {:.15}, max deviation {worst:.2e} (tol 1e-12)", g[(0, 0)], g[(0, 1)]))
}

fn ac4() -> Result<Outcome> {
    let spec = preset("sg")?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut used, mut skipped): (f64, usize, usize) = (0.0, 0, 0);
    while used < 20 {
        let t = rng.random_range(-30.0..30.0);
        let pre = match kernel::prekernel(&spec, t) {
            Ok(pre) => pre,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let numeric = pre.b.clone().try_inverse().expect("guarded prekernel is invertible");
        let scale = linalg::max_abs(&numeric).max(1.0);
        worst = worst.max(linalg::max_abs(&(&numeric - &pre.g)) / scale);
        used += 1;
    }
    outcome(worst <= 1e-10, format!("max entry difference {worst:.2e} over 20 lambda in [-30, 30] ({skipped} guarded draws skipped; tol 1e-10)"))
}

fn ac5() -> Result<Outcome> {
    let spec = preset("sg3")?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut used): (f64, usize) = (0.0, 0);
    while used < 20 {
        let t = rng.random_range(-20.0..20.0);
        let engine = KernelEngine::new(&spec, t)?;
        let Ok(pre) = engine.prekernel() else { continue };
        let (l0, tau) = engine.cell(&vec![1])?.decimation.expect("decimation data");
        let numeric = pre.b.clone().try_inverse().expect("guarded prekernel is invertible").determinant();
        let formula = sg3_det_g(l0, tau);
        worst = worst.max(((numeric - formula) / formula).abs());
        used += 1;
    }
    let at_zero = kernel::prekernel(&spec, 0.0)?.b.clone().try_inverse().expect("invertible").determinant();
    let want = (7.0f64 / 15.0).powi(7) / 8100.0;
    let zero_err = ((at_zero - want) / want).abs();
    outcome(
        worst <= 1e-8 && zero_err <= 1e-8,
        format!("max relative error {worst:.2e} over 20 lambda; at 0: {at_zero:.6e} vs (7/15)^7/8100 = {want:.6e} (rel {zero_err:.1e}; tol 1e-8)"),
    )
}

fn ac6() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let forbidden = Decimated::Sg3.forbidden();
    let (mut worst, mut count): (f64, usize) = (0.0, 0);
    for _ in 0..20 {
        let target = rng.random_range(-50.0..50.0);
        let Ok(seq) = lambda_sequence(Decimated::Sg3, target, 8) else { continue };
        for &l in &seq.entries[1..] {
            if forbidden.iter().any(|f| (l - f).abs() < 1e-3) || (14.0 - 3.0 * l).abs() < 1e-3 {
                continue;
            }
            for r in sg3_extension_residuals(l) {
                worst = worst.max(r.abs());
            }
            count += 1;
        }
    }
    outcome(worst <= 1e-12 && count > 0, format!("max residual {worst:.2e} over {count} sampled lambda_m (tol 1e-12)"))
}

fn ac7() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, fractal) in [("sg", Decimated::Sg), ("sg3", Decimated::Sg3)] {
        let spec = preset(name)?;
        for lam in [0.0, 0.3, 1.0] {
            let (one, zero) = boundary_normal_derivs(&lambda_sequence(fractal, lam, 8)?)?;
            let schur = boundary_schur(&spec, -lam, 10)?;
            let flux = boundary_flux(&spec, -lam, 10)?;
            let err = |s: &DMatrix<f64>| {
                (1..spec.n0).fold((s[(0, 0)] - one).abs(), |e, q| e.max((s[(0, q)] - zero).abs()))
            };
            let (e, ef) = (err(&schur), err(&flux));
            pass &= e <= 1e-6;
            if lam == 0.0 {
                pass &= one == 2.0 && zero == -1.0 && (schur[(0, 0)] - 2.0).abs() <= 1e-6 && (schur[(0, 1)] + 1.0).abs() <= 1e-6;
            }
            parts.push(format!("{name} {lam}: ({one:.6}, {zero:.6}) err {e:.1e} [difference sums {ef:.1e}]"));
        }
    }
    outcome(pass, format!("level 10, tol 1e-6; {}", parts.join("; ")))
}

/// Relative error of the kernel quadrature against the discrete solve at
/// level m, for indicators of `cells`, observed at the interior of V_2.
fn ac8_case(spec: &FractalSpec, engine: &KernelEngine, m: usize, cells: &[Word]) -> Result<f64> {
    let graph = LevelGraph::build(spec, m);
    let a = spec.harmonic_mass();
    let points: Vec<Vertex> = LevelGraph::build(spec, 2).vertices.into_iter().filter(|v| v.level() > 0).collect();
    let mut worst: f64 = 0.0;
    for c in cells {
        let mut load = vec![0.0; graph.len()];
        for cell in graph.cells.iter().filter(|cell| c.is_prefix_of(&cell.word)) {
            for (k, &i) in cell.vertices.iter().enumerate() {
                load[i] += cell.mu * a[k];
            }
        }
        for (l, m_x) in load.iter_mut().zip(&graph.mass) {
            *l /= m_x;
        }
        let discrete = discrete_resolvent(spec, m, engine.lambda(), &load, Bc::Dirichlet)?;
        let f = |w: &Word, _: usize| if c.is_prefix_of(w) { 1.0 } else { 0.0 };
        let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
        for p in &points {
            let i = graph.index_of(p).expect("V_2 lies in V_m");
            let u = engine.apply(&Address::Vertex(p.clone()), &f, m, m + 2, Bc::Dirichlet)?;
            diff = diff.max((u - discrete[i]).abs());
            scale = scale.max(discrete[i].abs());
        }
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

fn ac8() -> Result<Outcome> {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, levels) in [("interval", [7, 9]), ("sg", [4, 6])] {
        let spec = preset(name)?;
        let engine = KernelEngine::new(&spec, 1.0)?;
        let mut cells: Vec<Word> = words_of_length(spec.j(), 1);
        cells.push(Word::parse("21", spec.j())?);
        let coarse = ac8_case(&spec, &engine, levels[0], &cells)?;
        let fine = ac8_case(&spec, &engine, levels[1], &cells)?;
        pass &= fine <= 1e-2 && fine < coarse;
        parts.push(format!("{name} m={}: {coarse:.2e}, m={}: {fine:.2e}", levels[0], levels[1]));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    outcome(pass, format!("lambda 1, relative error {} (tol 1e-2, decreasing), {secs:.1} s (limit 60 s)", parts.join("; ")))
}

fn ac9() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    let cases = [
        ("interval", None, 5..26),
        ("sg", Some("123".repeat(8) + ":0"), 3..21),
        ("sg3", Some("4".repeat(24) + ":0"), 3..21),
    ];
    for (name, word, range) in cases {
        let spec = preset(name)?;
        let engine = KernelEngine::new(&spec, 1.0)?;
        let x = match word {
            Some(s) => vertex(&spec, &s),
            None => Address::Real(1.0 / 3.0),
        };
        let sums = engine.dirichlet(&x, &x, 40)?.partial_sums;
        let diffs: Vec<(usize, f64)> = range
            .filter(|&m| m + 1 < sums.len())
            .map(|m| (m, (sums[m + 1] - sums[m]).abs()))
            .filter(|&(_, d)| d > 0.0)
            .collect();
        let rate = fitted_ratio(&diffs);
        let r = spec.max_r();
        let dev = (rate - r).abs() / r;
        pass &= dev <= 0.1 && diffs.len() >= 10;
        parts.push(format!("{name}: fitted {rate:.4} vs r {r:.4} ({:.1}%)", 100.0 * dev));
    }
    outcome(pass, format!("{} (tol 10%)", parts.join("; ")))
}

fn ac10() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["interval", "sg", "sg3"] {
        let spec = preset(name)?;
        let mut local: f64 = 0.0;
        for _ in 0..10 {
            let t = rng.random_range(-10.0..10.0);
            local = local.max(kernel::cross_scale_check(&spec, t)?.max_residual);
        }
        worst = worst.max(local);
        parts.push(format!("{name} {local:.1e}"));
    }
    outcome(worst <= 1e-8, format!("max residual over 10 lambda in [-10, 10]: {} (tol 1e-8)", parts.join(", ")))
}

fn ac11() -> Result<Outcome> {
    let spec = preset("interval")?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 4.0] {
        let engine = KernelEngine::new(&spec, t)?;
        for i in 0..40 {
            let (x, y) = if i % 2 == 0 { (rng.random::<f64>(), rng.random::<f64>()) } else { (dyadic(&mut rng, 10), dyadic(&mut rng, 10)) };
            let g = engine.neumann(&Address::Real(x), &Address::Real(y), 40)?.value;
            worst = worst.max((g - interval::neumann(t, x, y)?).abs());
        }
    }
    let sg = preset("sg")?;
    let engine = KernelEngine::new(&sg, 1.0)?;
    let x = vertex(&sg, "2:2");
    let u = |v: &Vertex| engine.neumann(&x, &Address::Vertex(v.clone()), 40).ok().map(|e| e.value);
    let mut sums = Vec::new();
    for n in [4, 6, 8] {
        let mut s: f64 = 0.0;
        for q in 0..sg.n0 {
            let d = normal_sum_at(&sg, &u, &Vertex::boundary(q), None, n)?.expect("kernel defined on V_*");
            s = s.max(d.abs());
        }
        sums.push(s);
    }
    let decays = sums.windows(2).all(|w| w[1] < w[0]);
    outcome(
        worst <= 1e-9 && decays,
        format!(
            "interval max |G_N - cosh form| = {worst:.2e} (tol 1e-9); sg max |normal sum| at m=4,6,8: {:.2e}, {:.2e}, {:.2e} (must decrease)",
            sums[0], sums[1], sums[2]
        ),
    )
}

fn ac12() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pass = true;
    let mut asym: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["interval", "sg", "sg3"] {
        let spec = preset(name)?;
        for _ in 0..10 {
            let t = rng.random_range(-10.0..10.0);
            asym = asym.max(linalg::max_asymmetry(&kernel::b_matrix(&spec, t)?));
        }
        let b0 = kernel::b_matrix(&spec, 0.0)?;
        let norms: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&t| kernel::b_matrix(&spec, t).map(|b| (b - &b0).norm()))
            .collect::<Result<_>>()?;
        pass &= norms.windows(2).all(|w| w[1] < w[0]) && norms[2] < 1e-4;
        parts.push(format!("{name} {:.1e}, {:.1e}, {:.1e}", norms[0], norms[1], norms[2]));
    }
    pass &= asym <= 1e-10;
    outcome(pass, format!("max asymmetry {asym:.1e} (tol 1e-10); |B(lambda) - B(0)| at 1e-2, 1e-4, 1e-6: {}", parts.join("; ")))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("interval closed form vs series", ac1),
        ("Green function limit", ac2),
        ("SG harmonic prekernel", ac3),
        ("SG closed-form prekernel vs inverse of B", ac4),
        ("SG3 determinant identity", ac5),
        ("SG3 extension system residuals", ac6),
        ("normal derivatives vs discrete oracle", ac7),
        ("kernel quadrature vs discrete resolvent", ac8),
        ("geometric convergence rate", ac9),
        ("cross-scale identity", ac10),
        ("Neumann kernel", ac11),
        ("B symmetry and B -> B(0)", ac12),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        println!("AC{:<2} {status} {title}: {detail} [{:.2} s]", i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
