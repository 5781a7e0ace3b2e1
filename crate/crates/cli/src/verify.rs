use frk_core::decimation::{boundary_normal_derivs, lambda_sequence, sg3_tau_proof_form, tau, Decimated};
use frk_core::kernel::{cross_scale, sg3_det_g, KernelEngine};
use frk_core::linalg;
use frk_core::oracle::{boundary_schur, discrete_resolvent, Bc};
use frk_core::pcf::{Address, FractalSpec, Kind, LevelGraph, Vertex, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::guarded;
use crate::config::{CliError, RunConfig};
use crate::output::write_json;
use crate::Suite;

const SYMMETRY_PAIRS: usize = 50;
const BOUNDARY_POINTS: usize = 20;
const DETG_SAMPLES: usize = 20;
/// Vertex pool size for sampled points on fractals.
const POOL_SIZE: usize = 2000;

#[derive(Serialize)]
struct Check {
    suite: &'static str,
    name: String,
    residual: f64,
    tol: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Report {
    fractal: String,
    lambda: f64,
    bc: Bc,
    seed: u64,
    checks: Vec<Check>,
    failed: usize,
    pass: bool,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    rng: ChaCha8Rng,
    checks: Vec<Check>,
}

impl Ctx<'_> {
    fn record(&mut self, suite: &'static str, name: String, residual: f64, default_tol: f64) {
        let tol = self.cfg.tol.unwrap_or(default_tol);
        self.checks.push(Check {
            suite,
            name,
            residual,
            tol,
            pass: residual <= tol,
        });
    }
}

pub fn run(cfg: &RunConfig, suites: &[Suite]) -> Result<(), CliError> {
    let engine = KernelEngine::new(&cfg.spec, cfg.lambda).map_err(|e| guarded(cfg, e))?;
    let mut ctx = Ctx {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        checks: Vec::new(),
    };
    for suite in suites {
        match suite {
            Suite::Symmetry => symmetry(&mut ctx, &engine)?,
            Suite::Boundary => boundary(&mut ctx, &engine)?,
            Suite::Oracle => oracle(&mut ctx, &engine)?,
            Suite::Crossscale => {
                let r = cross_scale(&engine).map_err(|e| guarded(cfg, e))?;
                ctx.record("crossscale", "sum_s B_ps eta_q(s) + B_pq".into(), r.max_residual, 1e-8);
            }
            Suite::Tau => tau_suite(&mut ctx, &engine)?,
            Suite::Detg => detg(&mut ctx)?,
        }
    }
    let failed = ctx.checks.iter().filter(|c| !c.pass).count();
    let report = Report {
        fractal: cfg.fractal.clone(),
        lambda: cfg.lambda,
        bc: cfg.bc,
        seed: cfg.seed,
        checks: ctx.checks,
        failed,
        pass: failed == 0,
    };
    write_json(cfg, &report)?;
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

/// Junction points of the deepest level with at most POOL_SIZE vertices.
fn vertex_pool(spec: &FractalSpec) -> Vec<Vertex> {
    let mut m = 1;
    while LevelGraph::build(spec, m + 1).len() <= POOL_SIZE && m < 8 {
        m += 1;
    }
    LevelGraph::build(spec, m).vertices
}

/// Random points: reals (dyadic or generic) on the interval, pool vertices otherwise.
fn sampler(spec: &FractalSpec) -> impl FnMut(&mut ChaCha8Rng) -> Address {
    let pool = if spec.kind == Kind::Interval { Vec::new() } else { vertex_pool(spec) };
    move |rng: &mut ChaCha8Rng| {
        if pool.is_empty() {
            if rng.random_bool(0.5) {
                Address::Real(rng.random::<f64>())
            } else {
                Address::Real(rng.random_range(0..=1024u32) as f64 / 1024.0)
            }
        } else {
            Address::Vertex(pool[rng.random_range(0..pool.len())].clone())
        }
    }
}

fn depth_of(cfg: &RunConfig, engine: &KernelEngine, x: &Address, y: &Address) -> Result<usize, CliError> {
    match cfg.depth {
        Some(d) => Ok(d),
        None => engine.depth_for(x, y, 1e-13).map_err(|e| guarded(cfg, e)),
    }
}

fn symmetry(ctx: &mut Ctx, engine: &KernelEngine) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let mut sample = sampler(&cfg.spec);
    let mut worst: f64 = 0.0;
    for _ in 0..SYMMETRY_PAIRS {
        let (x, y) = (sample(&mut ctx.rng), sample(&mut ctx.rng));
        let depth = depth_of(cfg, engine, &x, &y)?;
        let a = engine.kernel(&x, &y, depth, cfg.bc).map_err(|e| guarded(cfg, e))?.value;
        let b = engine.kernel(&y, &x, depth, cfg.bc).map_err(|e| guarded(cfg, e))?.value;
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    ctx.record("symmetry", format!("|G(x,y) - G(y,x)| over {SYMMETRY_PAIRS} pairs"), worst, 1e-12);
    Ok(())
}

fn boundary(ctx: &mut Ctx, engine: &KernelEngine) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let mut sample = sampler(&cfg.spec);
    let mut worst: f64 = 0.0;
    for _ in 0..BOUNDARY_POINTS {
        let x = sample(&mut ctx.rng);
        for q in 0..cfg.spec.n0 {
            let q = Address::Vertex(Vertex::boundary(q));
            let depth = depth_of(cfg, engine, &x, &q)?;
            let g = engine.dirichlet(&x, &q, depth).map_err(|e| guarded(cfg, e))?.value;
            worst = worst.max(g.abs());
        }
    }
    ctx.record("boundary", format!("|G_D(x, q)| for q in V0, {BOUNDARY_POINTS} points"), worst, 1e-14);
    Ok(())
}

/// Kernel quadrature against the discrete resolvent at the oracle level,
/// for f = 1 and the indicator of the first 1-cell.
fn oracle(ctx: &mut Ctx, engine: &KernelEngine) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let spec = &cfg.spec;
    let default = match spec.kind {
        Kind::Interval => 9,
        Kind::Sg => 5,
        Kind::Sg3 => 3,
        _ => 3,
    };
    let m = cfg.oracle_level(default);
    if m == 0 {
        return Err(CliError::Usage("the oracle suite needs a level of at least 1".into()));
    }
    let graph = LevelGraph::build(spec, m);
    let points: Vec<Vertex> = LevelGraph::build(spec, m.min(2))
        .vertices
        .into_iter()
        .filter(|v| cfg.bc == Bc::Neumann || v.level() > 0)
        .collect();
    let a = spec.harmonic_mass();
    let cell = Word::parse("1", spec.j())?;
    let cases: [(&str, Option<&Word>); 2] = [("f = 1", None), ("f = indicator of cell 1", Some(&cell))];
    for (label, within) in cases {
        let inside = |w: &Word| within.is_none_or(|c| c.is_prefix_of(w));
        let mut load = vec![0.0; graph.len()];
        for c in graph.cells.iter().filter(|c| inside(&c.word)) {
            for (k, &i) in c.vertices.iter().enumerate() {
                load[i] += c.mu * a[k];
            }
        }
        for (l, mass) in load.iter_mut().zip(&graph.mass) {
            *l /= mass;
        }
        let discrete = discrete_resolvent(spec, m, cfg.lambda, &load, cfg.bc).map_err(|e| guarded(cfg, e))?;
        let f = |w: &Word, _: usize| if inside(w) { 1.0 } else { 0.0 };
        let depth = cfg.depth.unwrap_or(m + 2);
        let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
        for p in &points {
            let i = graph.index_of(p).expect("coarse vertices lie in V_m");
            let u = engine
                .apply(&Address::Vertex(p.clone()), &f, m, depth, cfg.bc)
                .map_err(|e| guarded(cfg, e))?;
            diff = diff.max((u - discrete[i]).abs());
            scale = scale.max(discrete[i].abs());
        }
        ctx.record("oracle", format!("{label}, level {m}: relative error vs discrete resolvent"), diff / scale.max(f64::MIN_POSITIVE), 1e-3);
    }
    Ok(())
}

/// Boundary normal derivatives: decimation (sg, sg3) or the cell solver
/// (other fractals) against the discrete Gauss-Green boundary operator.
fn tau_suite(ctx: &mut Ctx, engine: &KernelEngine) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let spec = &cfg.spec;
    let fractal = Decimated::from_kind(spec.kind);
    let m = cfg.oracle_level(if fractal.is_some() { 10 } else { 16 });
    let discrete = boundary_schur(spec, cfg.lambda, m).map_err(|e| guarded(cfg, e))?;
    match fractal {
        Some(fractal) => {
            let seq = lambda_sequence(fractal, -cfg.lambda, 8).map_err(|e| guarded(cfg, e))?;
            let (one, zero) = boundary_normal_derivs(&seq).map_err(|e| guarded(cfg, e))?;
            let err = (1..spec.n0).fold((discrete[(0, 0)] - one).abs(), |e, q| e.max((discrete[(0, q)] - zero).abs()));
            ctx.record("tau", format!("decimation normal derivatives vs level-{m} discrete"), err, 1e-6);
            if fractal == Decimated::Sg3 {
                let t = tau(&seq).map_err(|e| guarded(cfg, e))?;
                let p = sg3_tau_proof_form(&seq).map_err(|e| guarded(cfg, e))?;
                ctx.record("tau", "sg3 tau: product form vs closed factor form".into(), (t - p).abs() / t.abs().max(1.0), 1e-12);
            }
        }
        None => {
            let exact = engine.cell(&engine.root()).map_err(|e| guarded(cfg, e))?;
            let err = linalg::max_abs(&(&exact.matrix - &discrete));
            ctx.record("tau", format!("cell normal derivatives vs level-{m} discrete"), err, 1e-6);
        }
    }
    Ok(())
}

/// det G against the closed determinant formula, λ sampled in [0, 0.5].
fn detg(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    if cfg.spec.kind != Kind::Sg3 {
        return Err(CliError::Usage(format!("the detg suite applies to sg3 only, not {}", cfg.fractal)));
    }
    for _ in 0..DETG_SAMPLES {
        let lambda = ctx.rng.random_range(0.0..0.5);
        let engine = KernelEngine::new(&cfg.spec, lambda).map_err(|e| guarded(cfg, e))?;
        let pre = engine.prekernel().map_err(|e| guarded(cfg, e))?;
        let numeric = pre.b.clone().try_inverse().map(|g| g.determinant()).unwrap_or(f64::NAN);
        let cell = engine.cell(&engine.key_of(&Word::parse("1", 6)?)).map_err(|e| guarded(cfg, e))?;
        let (l0, t) = cell.decimation.expect("sg3 cells carry decimation data");
        let formula = sg3_det_g(l0, t);
        let rel = ((numeric - formula) / formula).abs();
        ctx.record("detg", format!("det G at lambda = {lambda:.6}"), if rel.is_nan() { f64::INFINITY } else { rel }, 1e-8);
    }
    Ok(())
}
