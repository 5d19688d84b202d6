//! Lloyd-Max iteration: alternate nearest-point cells and per-cell optimal points.
//! Serves as the baseline of (locally) optimal quantizers.

use serde::Serialize;

use crate::distribution::DensityModel;
use crate::error::{Error, Result};
use crate::gersho::{build_gersho, Method, Quantizer};
use crate::moments::{cell_stats, Order, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydState {
    pub codepoints: Vec<f64>,
    pub iteration: usize,
    /// Largest codepoint displacement in the last step.
    pub last_move: f64,
}

impl LloydState {
    pub fn new(codepoints: Vec<f64>) -> Result<Self> {
        if codepoints.is_empty() {
            return Err(Error::InvalidParameter("Lloyd needs at least one codepoint".into()));
        }
        if !codepoints.iter().all(|c| c.is_finite()) || !codepoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("codepoints must be finite and strictly increasing".into()));
        }
        Ok(Self { codepoints, iteration: 0, last_move: f64::INFINITY })
    }

    /// Nearest-point boundaries of the current codepoints.
    pub fn boundaries(&self) -> Vec<f64> {
        midpoints(&self.codepoints)
    }
}

fn midpoints(c: &[f64]) -> Vec<f64> {
    c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Starting codepoints for [`run_lloyd`].
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Quantiles `(2i - 1) / (2n)`.
    QuantileGrid,
    /// Codepoints of the Gersho quantizer of the same level.
    GershoSeed,
    Explicit(Vec<f64>),
}

/// One Lloyd step: midpoint boundaries, then every codepoint moved to its cell's optimum.
pub fn lloyd_step(model: &DensityModel, state: &LloydState, order: Order, cfg: &SolverConfig) -> Result<LloydState> {
    let (lo, hi) = model.support();
    let bounds = state.boundaries();
    let mut next = Vec::with_capacity(state.codepoints.len());
    for i in 0..state.codepoints.len() {
        let a = if i == 0 { lo } else { bounds[i - 1].max(lo) };
        let b = if i == bounds.len() { hi } else { bounds[i].min(hi) };
        if !(a < b) {
            return Err(Error::DegenerateCell { index: i });
        }
        let s = cell_stats(model, a, b, order, cfg)?;
        if !(s.mass > 0.0) {
            return Err(Error::DegenerateCell { index: i });
        }
        next.push(s.center);
    }
    let last_move = next.iter().zip(&state.codepoints).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // Centroids of non-overlapping cells are nondecreasing; ties only arise from degenerate cells.
    if next.windows(2).any(|w| !(w[0] < w[1])) {
        let index = next.windows(2).position(|w| !(w[0] < w[1])).unwrap_or(0);
        return Err(Error::DegenerateCell { index });
    }
    Ok(LloydState { codepoints: next, iteration: state.iteration + 1, last_move })
}

/// Result of [`run_lloyd`].
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub quantizer: Quantizer,
    pub iterations: usize,
    /// False if the iteration limit was reached before the codepoints settled.
    pub converged: bool,
}

/// Iterate [`lloyd_step`] until the largest move drops below `cfg.root_tol` or
/// `cfg.max_lloyd_iter` steps have been taken.
pub fn run_lloyd(model: &DensityModel, n: usize, order: Order, init: Init, cfg: &SolverConfig) -> Result<LloydRun> {
    cfg.validate()?;
    cfg.check_model(model, order)?;
    if n == 0 {
        return Err(Error::InvalidParameter("level n must be at least 1".into()));
    }
    let start = match init {
        Init::QuantileGrid => (1..=n).map(|i| model.quantile((2 * i - 1) as f64 / (2 * n) as f64)).collect(),
        Init::GershoSeed => build_gersho(model, n, order, cfg)?.0.codepoints().to_vec(),
        Init::Explicit(c) => {
            if c.len() != n {
                return Err(Error::InvalidParameter(format!("expected {n} starting codepoints, got {}", c.len())));
            }
            c
        }
    };
    let mut state = LloydState::new(start)?;
    let mut converged = false;
    while state.iteration < cfg.max_lloyd_iter {
        state = lloyd_step(model, &state, order, cfg)?;
        if state.last_move < cfg.root_tol {
            converged = true;
            break;
        }
    }
    let quantizer =
        Quantizer::from_cells(model, order, state.boundaries(), state.codepoints.clone(), Method::Lloyd, cfg)?;
    Ok(LloydRun { quantizer, iterations: state.iteration, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::one_point_optimal;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn r2() -> Order {
        Order::new(2.0).unwrap()
    }

    #[test]
    fn uniform_grid_is_fixed_point() {
        let u = DensityModel::uniform(0.0, 1.0).unwrap();
        let c: Vec<f64> = (1..=8).map(|i| (2 * i - 1) as f64 / 16.0).collect();
        let next = lloyd_step(&u, &LloydState::new(c.clone()).unwrap(), r2(), &cfg()).unwrap();
        assert!(next.last_move < 1e-14);
        let run = run_lloyd(&u, 8, r2(), Init::QuantileGrid, &cfg()).unwrap();
        assert!(run.converged);
        assert!((run.quantizer.distortion() - 1.0 / 768.0).abs() < 1e-12);
    }

    #[test]
    fn single_level_takes_one_step() {
        let e = DensityModel::exponential(1.0).unwrap();
        let next = lloyd_step(&e, &LloydState::new(vec![7.0]).unwrap(), r2(), &cfg()).unwrap();
        assert!((next.codepoints[0] - 1.0).abs() < 1e-10);
        let run = run_lloyd(&e, 1, r2(), Init::QuantileGrid, &cfg()).unwrap();
        assert!((run.quantizer.codepoints()[0] - 1.0).abs() < 1e-10);
        assert!((run.quantizer.distortion() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_two_levels_from_symmetric_start() {
        let g = DensityModel::gaussian(0.0, 1.0).unwrap();
        let run = run_lloyd(&g, 2, r2(), Init::Explicit(vec![-1.0, 1.0]), &cfg()).unwrap();
        assert!(run.converged);
        assert!((run.quantizer.codepoints()[1] - 0.7978845608028654).abs() < 1e-9);
        assert!((run.quantizer.distortion() - 0.36338022763241866).abs() < 1e-9);
        assert_eq!(run.quantizer.method(), Method::Lloyd);
    }

    #[test]
    fn descent_is_monotone() {
        let cfg = cfg();
        for model in [DensityModel::gaussian(0.0, 1.0).unwrap(), DensityModel::exponential(2.0).unwrap()] {
            let mut state = LloydState::new((0..6).map(|i| 0.1 + 0.3 * i as f64).collect()).unwrap();
            let mut prev = f64::INFINITY;
            for _ in 0..40 {
                let q = Quantizer::from_cells(
                    &model,
                    r2(),
                    state.boundaries(),
                    state.codepoints.clone(),
                    Method::Lloyd,
                    &cfg,
                )
                .unwrap();
                assert!(q.distortion() <= prev + 1e-10);
                prev = q.distortion();
                state = lloyd_step(&model, &state, r2(), &cfg).unwrap();
            }
        }
    }

    #[test]
    fn converged_state_is_stationary() {
        let l = DensityModel::laplace(0.0, 1.0).unwrap();
        let order = Order::new(3.0).unwrap();
        let run = run_lloyd(&l, 5, order, Init::QuantileGrid, &cfg()).unwrap();
        assert!(run.converged);
        let q = &run.quantizer;
        for i in 0..5 {
            let (a, b) = q.cell(i);
            let c = one_point_optimal(&l, a, b, order, &cfg()).unwrap();
            assert!((c - q.codepoints()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_cell_is_degenerate() {
        let u = DensityModel::uniform(0.0, 1.0).unwrap();
        let state = LloydState::new(vec![0.5, 3.0, 4.0]).unwrap();
        assert!(matches!(lloyd_step(&u, &state, r2(), &cfg()), Err(Error::DegenerateCell { index: 1 })));
    }

    #[test]
    fn max_iterations_flags_non_convergence() {
        let g = DensityModel::gaussian(0.0, 1.0).unwrap();
        let cfg = SolverConfig { max_lloyd_iter: 2, ..SolverConfig::default() };
        let run = run_lloyd(&g, 6, r2(), Init::QuantileGrid, &cfg).unwrap();
        assert!(!run.converged);
        assert_eq!(run.iterations, 2);
    }
}
