//! High-rate behavior: the Zador constant, convergence of `n^r D_n`, cell censuses
//! relative to a fixed interval, local diagnostics, and a quantizer sequence that is
//! asymptotically optimal without equalizing its cell moments.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::DensityModel;
use crate::error::{Error, Result};
use crate::gersho::{build_gersho, Method, Quantizer};
use crate::lloyd::{run_lloyd, Init};
use crate::moments::{density_power_integral, partial_moment, Order, SolverConfig};

/// `Q(r) = 2^(-r) / (1 + r)`.
pub fn quantization_coefficient(order: Order) -> f64 {
    order.zador_coefficient()
}

/// `integral_{[a,b]} h^(1/(1+r))`.
pub fn root_density_integral(model: &DensityModel, order: Order, a: f64, b: f64, cfg: &SolverConfig) -> Result<f64> {
    let (lo, hi) = model.support();
    let unbounded = a.max(lo).is_infinite() || b.min(hi).is_infinite();
    if unbounded && !model.root_density_integrable(order.r()) {
        return Err(Error::InfiniteZadorConstant);
    }
    density_power_integral(model, a, b, 1.0 / (1.0 + order.r()), cfg)
}

/// `C_0 = Q(r) (integral h^(1/(1+r)))^(1+r)`, the limit of `n^r` times the optimal
/// `n`-level distortion.
pub fn zador_constant(model: &DensityModel, order: Order, cfg: &SolverConfig) -> Result<f64> {
    let (lo, hi) = model.support();
    let root = root_density_integral(model, order, lo, hi, cfg)?;
    Ok(order.zador_coefficient() * root.powf(1.0 + order.r()))
}

/// Which quantizer sequence a convergence table follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Gersho,
    /// Lloyd iteration seeded with the Gersho quantizer of the same level.
    Lloyd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub distortion: f64,
    /// `n^r D_n`.
    pub scaled: f64,
    /// `scaled / C_0`; `None` when `C_0` is infinite.
    pub ratio: Option<f64>,
    /// `|C_0 - n^r D_n| n / ln n`; `None` for `n = 1` or infinite `C_0`.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LevelOutcome {
    pub n: usize,
    pub result: Result<(ConvergenceRow, Quantizer)>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    /// `None` when the Zador constant is infinite.
    pub zador: Option<f64>,
    pub levels: Vec<LevelOutcome>,
}

impl ConvergenceTable {
    pub fn rows(&self) -> impl Iterator<Item = &ConvergenceRow> {
        self.levels.iter().filter_map(|l| l.result.as_ref().ok().map(|(row, _)| row))
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &Error)> {
        self.levels.iter().filter_map(|l| l.result.as_ref().err().map(|e| (l.n, e)))
    }
}

fn row(n: usize, distortion: f64, order: Order, zador: Option<f64>) -> ConvergenceRow {
    let scaled = (n as f64).powf(order.r()) * distortion;
    ConvergenceRow {
        n,
        distortion,
        scaled,
        ratio: zador.map(|c| scaled / c),
        rate: zador.filter(|_| n > 1).map(|c| (c - scaled).abs() * n as f64 / (n as f64).ln()),
    }
}

/// One row per level, in the order given. Levels are built in parallel on the current
/// rayon pool; a failed level is reported in place without aborting the others.
pub fn convergence_table(
    model: &DensityModel,
    order: Order,
    levels: &[usize],
    construction: Construction,
    cfg: &SolverConfig,
) -> Result<ConvergenceTable> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::InvalidParameter("levels must be a nonempty list of positive integers".into()));
    }
    cfg.validate()?;
    cfg.check_model(model, order)?;
    let zador = match zador_constant(model, order, cfg) {
        Ok(c) => Some(c),
        Err(Error::InfiniteZadorConstant) => None,
        Err(e) => return Err(e),
    };
    let levels = levels
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let q = match construction {
                Construction::Gersho => build_gersho(model, n, order, cfg).map(|(q, _)| q),
                Construction::Lloyd => run_lloyd(model, n, order, Init::GershoSeed, cfg).map(|run| run.quantizer),
            };
            let result = q.map(|q| (row(n, q.distortion(), order, zador), q));
            LevelOutcome { n, result, elapsed: start.elapsed() }
        })
        .collect();
    Ok(ConvergenceTable { zador, levels })
}

/// Cell counts relative to an interval `I = [u, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Census {
    /// Cells contained in `I`.
    pub inside: usize,
    /// Cells disjoint from the interior of `I`.
    pub outside: usize,
    /// Cells meeting both the interior of `I` and its complement.
    pub straddling: usize,
}

fn snap(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

fn inside(cell: (f64, f64), u: f64, v: f64) -> bool {
    cell.0 >= u - snap(u) && cell.1 <= v + snap(v)
}

/// Census of the cells of `q` (restricted to its support) against `[u, v]`.
pub fn cell_census(q: &Quantizer, u: f64, v: f64) -> Result<Census> {
    if !(u.is_finite() && v.is_finite() && u <= v) {
        return Err(Error::InvalidInterval { a: u, b: v });
    }
    let mut census = Census { inside: 0, outside: 0, straddling: 0 };
    for (lo, hi) in q.cells() {
        let hi = hi.max(lo);
        if u < v && inside((lo, hi), u, v) {
            census.inside += 1;
        } else if u == v || hi <= u + snap(u) || lo >= v - snap(v) {
            census.outside += 1;
        } else {
            census.straddling += 1;
        }
    }
    Ok(census)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub n: usize,
    /// Fraction of cells inside `I`.
    pub point_density: f64,
    /// Share of the distortion accrued on `I`.
    pub error_density: f64,
    /// `sup |n mu(cell) - h(a)^(r/(1+r)) integral h^(1/(1+r))|` over cells inside `I`,
    /// `a` the codepoint. NaN when `C_0` is infinite.
    pub mass_deviation: f64,
    /// `sup |n^(1+r) W_a - C_0|` over cells inside `I`.
    pub g4_deviation: f64,
    /// Set when `C_0` is infinite and `g4_deviation` compares against `n^r D` instead.
    pub against_scaled: bool,
}

/// Local diagnostics of `q` on the compact interval `[u, v]`.
pub fn diagnostics(
    model: &DensityModel,
    q: &Quantizer,
    order: Order,
    u: f64,
    v: f64,
    cfg: &SolverConfig,
) -> Result<DiagnosticsRow> {
    if !(u.is_finite() && v.is_finite() && u < v) {
        return Err(Error::InvalidInterval { a: u, b: v });
    }
    if !(model.mass(u, v)? > 0.0) {
        return Err(Error::InvalidParameter(format!("[{u}, {v}] carries no mass")));
    }
    let q = q.clone().with_support(model);
    let n = q.level();
    let nf = n as f64;
    let r = order.r();

    let (lo, hi) = model.support();
    let root_total = match root_density_integral(model, order, lo, hi, cfg) {
        Ok(x) => Some(x),
        Err(Error::InfiniteZadorConstant) => None,
        Err(e) => return Err(e),
    };

    let mut total = 0.0;
    let mut on_interval = 0.0;
    let mut inside_moments = Vec::new();
    let mut mass_dev: f64 = 0.0;
    for (i, cell) in q.cells().enumerate() {
        let (a, b) = (cell.0, cell.1.max(cell.0));
        let c = q.codepoints()[i];
        let w = partial_moment(model, a, b, c, order, cfg)?;
        total += w;
        let (ia, ib) = (a.max(u), b.min(v));
        if ia < ib {
            on_interval += if ia == a && ib == b { w } else { partial_moment(model, ia, ib, c, order, cfg)? };
        }
        if inside((a, b), u, v) {
            inside_moments.push(w);
            if let Some(root) = root_total {
                let predicted = model.pdf(c).powf(r / (1.0 + r)) * root;
                mass_dev = mass_dev.max((nf * model.mass(a, b)? - predicted).abs());
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::ConstructionFailure("quantizer has zero distortion".into()));
    }

    let zador = root_total.map(|root| order.zador_coefficient() * root.powf(1.0 + r));
    let reference = zador.unwrap_or(nf.powf(r) * total);
    let g4 = inside_moments.iter().map(|w| (nf.powf(1.0 + r) * w - reference).abs()).fold(0.0, f64::max);

    Ok(DiagnosticsRow {
        n,
        point_density: inside_moments.len() as f64 / nf,
        error_density: on_interval / total,
        mass_deviation: if root_total.is_some() { mass_dev } else { f64::NAN },
        g4_deviation: g4,
        against_scaled: zador.is_none(),
    })
}

/// Default diagnostics interval: from the first to the last interior boundary of the
/// 8-level Gersho quantizer.
pub fn default_interval(model: &DensityModel, order: Order, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let (q, _) = build_gersho(model, 8, order, cfg)?;
    let b = q.boundaries();
    Ok((b[0], b[b.len() - 1]))
}

/// Quantizer of Uniform(0, 1) with first cell `[0, eps/n)` and `n - 1` equal cells on the
/// rest, codepoints at the cell midpoints. Asymptotically optimal, but its first cell
/// carries a vanishing share of the distortion at every level.
pub fn counterexample_quantizer(n: usize, eps: f64, order: Order) -> Result<Quantizer> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("counterexample needs n >= 2, got {n}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    let nf = n as f64;
    let first = eps / nf;
    let width = (1.0 - first) / (nf - 1.0);
    let boundaries: Vec<f64> = (0..n - 1).map(|k| first + k as f64 * width).collect();
    let mut codepoints = vec![0.5 * first];
    codepoints.extend((0..n - 1).map(|k| first + (k as f64 + 0.5) * width));
    let moment = |len: f64| order.zador_coefficient() * len.powf(1.0 + order.r());
    let mut moments = vec![moment(first)];
    moments.extend(std::iter::repeat_n(moment(width), n - 1));
    let distortion = moments.iter().sum();
    let uniform = DensityModel::uniform(0.0, 1.0)?;
    Ok(Quantizer::from_parts(order, boundaries, codepoints, moments, distortion, Method::Explicit, true)?
        .with_support(&uniform))
}
