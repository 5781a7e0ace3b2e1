use std::f64::consts::PI;
use std::io::Write;

use frk_core::decimation::{lambda_sequence, Decimated};
use frk_core::kernel::KernelEngine;
use frk_core::oracle::dirichlet_spectrum;
use frk_core::pcf::{Address, FractalSpec, Kind, LevelGraph};
use frk_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load_fractal, CliError, RunConfig, DEFAULT_TOL, MAX_DEPTH};
use crate::output::{write_json, write_rows, Row};

/// Most points per axis on the interval grid.
pub const MAX_RESOLUTION: usize = 1 << 12;
/// Deepest vertex level for fractal grids.
pub const MAX_GRID_LEVEL: usize = 8;
/// Interior size up to which the guard hint computes a graph spectrum.
const HINT_SIZE: usize = 400;

/// Attaches the nearest Dirichlet eigenvalue to guard failures.
pub fn guarded(cfg: &RunConfig, e: Error) -> CliError {
    let hint = match e {
        Error::SingularResolvent { .. } | Error::SingularPrekernel { .. } | Error::OnSpectrum { .. } => {
            nearest_eigenvalue(cfg)
        }
        Error::SingularNeumann { lambda: 0.0, .. } => {
            Some("0 is always a Neumann eigenvalue (constants)".to_string())
        }
        _ => None,
    };
    CliError::Core(e, hint)
}

fn nearest_eigenvalue(cfg: &RunConfig) -> Option<String> {
    let spec = &cfg.spec;
    let lambda = cfg.lambda;
    if spec.kind == Kind::Interval {
        let n = ((-lambda).max(0.0).sqrt() / PI).round().max(1.0);
        return Some(format!("nearest Dirichlet eigenvalue -(n pi)^2 = {:.12e} (n = {n})", -(n * PI).powi(2)));
    }
    let mut m = 1;
    while m < cfg.max_level && LevelGraph::build(spec, m + 1).len() <= HINT_SIZE {
        m += 1;
    }
    let ev = dirichlet_spectrum(spec, m).ok()?;
    let nearest = ev.into_iter().min_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()))?;
    Some(format!("nearest level-{m} graph Dirichlet eigenvalue {nearest:.12e}"))
}

fn engine(cfg: &RunConfig) -> Result<KernelEngine, CliError> {
    KernelEngine::new(&cfg.spec, cfg.lambda).map_err(|e| guarded(cfg, e))
}

fn depth_for(cfg: &RunConfig, engine: &KernelEngine, x: &Address, y: &Address) -> Result<usize, CliError> {
    match cfg.depth {
        Some(d) => Ok(d),
        None => engine
            .depth_for(x, y, cfg.tol.unwrap_or(DEFAULT_TOL))
            .map_err(|e| guarded(cfg, e)),
    }
}

fn rows_for(
    cfg: &RunConfig,
    engine: &KernelEngine,
    x: &Address,
    y: &Address,
    partial_sums: bool,
) -> Result<Vec<Row>, CliError> {
    let depth = depth_for(cfg, engine, x, y)?;
    let depths: Vec<usize> = if partial_sums { (0..=depth).collect() } else { vec![depth] };
    depths
        .into_iter()
        .map(|m| {
            let ev = engine.kernel(x, y, m, cfg.bc).map_err(|e| guarded(cfg, e))?;
            Ok(Row {
                x: x.to_string(),
                y: y.to_string(),
                lambda: cfg.lambda,
                value: ev.value,
                bound: ev.bound,
                m: ev.depth,
            })
        })
        .collect()
}

pub fn eval(cfg: &RunConfig, x: &str, y: &str) -> Result<(), CliError> {
    let x = Address::parse(&cfg.spec, x)?;
    let y = Address::parse(&cfg.spec, y)?;
    let engine = engine(cfg)?;
    let rows = rows_for(cfg, &engine, &x, &y, false)?;
    match cfg.format {
        crate::Format::Json => write_json(cfg, &rows[0]),
        crate::Format::Csv => write_rows(cfg, &rows),
    }
}

fn grid_points(spec: &FractalSpec, resolution: usize) -> Result<Vec<Address>, CliError> {
    if resolution == 0 {
        return Err(CliError::Usage("empty grid: --resolution must be at least 1".into()));
    }
    if spec.kind == Kind::Interval {
        if resolution > MAX_RESOLUTION {
            return Err(CliError::Usage(format!("--resolution {resolution} exceeds {MAX_RESOLUTION} points per axis")));
        }
        let n = (resolution + 1) as f64;
        return Ok((1..=resolution).map(|i| Address::Real(i as f64 / n)).collect());
    }
    if resolution > MAX_GRID_LEVEL {
        return Err(CliError::Usage(format!("--resolution is the vertex level on fractals; at most {MAX_GRID_LEVEL}")));
    }
    Ok(LevelGraph::build(spec, resolution).vertices.into_iter().map(Address::Vertex).collect())
}

/// Rows ordered by (x, y) in point order, independent of scheduling.
pub fn grid(cfg: &RunConfig, resolution: usize, partial_sums: bool) -> Result<(), CliError> {
    let points = grid_points(&cfg.spec, resolution)?;
    let engine = engine(cfg)?;
    let prepare = cfg.depth.unwrap_or(if cfg.spec.kind == Kind::Interval { MAX_DEPTH } else { resolution });
    engine.prepare(prepare).map_err(|e| guarded(cfg, e))?;
    let blocks: Vec<Vec<Row>> = points
        .par_iter()
        .map(|x| {
            let mut rows = Vec::new();
            for y in &points {
                rows.extend(rows_for(cfg, &engine, x, y, partial_sums)?);
            }
            Ok(rows)
        })
        .collect::<Result<_, CliError>>()?;
    let rows: Vec<Row> = blocks.into_iter().flatten().collect();
    write_rows(cfg, &rows)
}

#[derive(Serialize)]
struct SeqRow {
    m: usize,
    lambda_m: f64,
    beta_m_lambda_m: f64,
}

pub fn spectrum_seq(cfg: &RunConfig) -> Result<(), CliError> {
    let fractal = match cfg.spec.kind {
        Kind::Sg => Decimated::Sg,
        Kind::Sg3 => Decimated::Sg3,
        _ => {
            return Err(CliError::Usage(format!(
                "spectral decimation is available for sg and sg3, not {}",
                cfg.fractal
            )))
        }
    };
    let depth = cfg.depth.unwrap_or(10);
    let seq = lambda_sequence(fractal, cfg.lambda, depth).map_err(|e| guarded(cfg, e))?;
    let rows: Vec<SeqRow> = (0..=depth)
        .map(|m| SeqRow {
            m,
            lambda_m: seq.entries[m],
            beta_m_lambda_m: seq.scaled(m),
        })
        .collect();
    write_rows(cfg, &rows)
}

pub fn spec_check(cfg: &RunConfig, fractal: Option<&str>) -> Result<(), CliError> {
    let name = fractal.unwrap_or(&cfg.fractal);
    let spec = load_fractal(name)?;
    let summary = serde_json::json!({
        "ok": true,
        "fractal": name,
        "kind": spec.name(),
        "J": spec.j(),
        "n0": spec.n0,
        "max_r": spec.max_r(),
        "v1_interior": spec.interior_v1().len(),
    });
    match cfg.format {
        crate::Format::Json => write_json(cfg, &summary),
        crate::Format::Csv => {
            let mut out = crate::output::sink(cfg)?;
            writeln!(
                out,
                "ok: {name} ({}) J={} n0={} max_r={} interior V1 vertices={}",
                spec.name(),
                spec.j(),
                spec.n0,
                spec.max_r(),
                spec.interior_v1().len()
            )?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn spec_show(cfg: &RunConfig, fractal: Option<&str>) -> Result<(), CliError> {
    let spec = load_fractal(fractal.unwrap_or(&cfg.fractal))?;
    write_json(cfg, &spec.to_document())
}
