//! Partial r-th moments of a cell and its optimal single codepoint.
//!
//! For a cell `[a, b]` and a center `c` the partial moment is
//! `integral_{[a,b]} |x - c|^r h(x) dx`. Its minimizer over `c` (the centroid of order `r`)
//! is unique for `r > 1`, and the minimal value is the cell moment `W(a, b)`, which is
//! continuous and nondecreasing in `b` and strictly increasing wherever mass is added.

use serde::{Deserialize, Serialize};

use crate::distribution::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions, Tail};
use crate::roots::{self, Tolerance};

/// Distortion exponent `r`; always strictly greater than one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Order(f64);

impl Order {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_finite() && r > 1.0 {
            Ok(Self(r))
        } else {
            Err(Error::InvalidParameter(format!("order r must be a finite number > 1, got {r}")))
        }
    }

    pub fn r(self) -> f64 {
        self.0
    }

    /// `Q(r) = 2^(-r) / (1 + r)`: the optimally centered r-th moment of the unit-length,
    /// unit-density interval. A cell of length `L` under constant density `h` has moment
    /// `Q(r) h L^(1+r)`.
    pub fn zador_coefficient(self) -> f64 {
        2f64.powf(-self.0) / (1.0 + self.0)
    }

    pub fn is_quadratic(self) -> bool {
        self.0 == 2.0
    }

    #[inline]
    pub(crate) fn pow_abs(self, d: f64) -> f64 {
        if self.is_quadratic() {
            d * d
        } else {
            d.abs().powf(self.0)
        }
    }
}

impl TryFrom<f64> for Order {
    type Error = Error;
    fn try_from(r: f64) -> Result<Self> {
        Order::new(r)
    }
}

impl From<Order> for f64 {
    fn from(o: Order) -> f64 {
        o.0
    }
}

/// Numerical tolerances shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub quad_rel_tol: f64,
    /// Absolute error floor; errors are otherwise controlled relative to `integral |f|`.
    pub quad_abs_tol: f64,
    /// Bracket width for root solves in x-units.
    pub root_tol: f64,
    /// Relative tolerance for root solves expressed in moment units.
    pub root_rel_tol: f64,
    pub max_root_iter: usize,
    pub max_quad_depth: u32,
    /// Length scale of the `t / (1 - t)` tail substitution; defaults to the model's scale.
    pub tail_scale: Option<f64>,
    /// Smallest exponent accepted by the construction entry points.
    pub min_order: f64,
    pub max_lloyd_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            quad_rel_tol: 1e-10,
            quad_abs_tol: 1e-300,
            root_tol: 1e-12,
            root_rel_tol: 1e-11,
            max_root_iter: 200,
            max_quad_depth: 60,
            tail_scale: None,
            min_order: 1.1,
            max_lloyd_iter: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("quad_rel_tol", self.quad_rel_tol),
            ("quad_abs_tol", self.quad_abs_tol),
            ("root_tol", self.root_tol),
            ("root_rel_tol", self.root_rel_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_root_iter == 0 || self.max_quad_depth == 0 || self.max_lloyd_iter == 0 {
            return Err(Error::InvalidParameter("iteration caps must be at least 1".into()));
        }
        if let Some(s) = self.tail_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("tail_scale must be positive, got {s}")));
            }
        }
        if !(self.min_order > 1.0) {
            return Err(Error::InvalidParameter(format!("min_order must exceed 1, got {}", self.min_order)));
        }
        Ok(())
    }

    /// Reject exponents below the configured minimum.
    pub fn check_order(&self, order: Order) -> Result<()> {
        if order.r() < self.min_order {
            return Err(Error::InvalidParameter(format!(
                "order r = {} is below the supported minimum {}",
                order.r(),
                self.min_order
            )));
        }
        Ok(())
    }

    /// Reject models whose `r`-th moment diverges; no finite-distortion quantizer exists.
    pub(crate) fn check_model(&self, model: &DensityModel, order: Order) -> Result<()> {
        self.check_order(order)?;
        if !model.has_finite_moment(order.r()) {
            return Err(Error::InvalidModel(format!("{model} has an infinite moment of order {}", order.r())));
        }
        Ok(())
    }

    pub(crate) fn quad(&self) -> QuadOptions {
        QuadOptions { rel_tol: self.quad_rel_tol, abs_tol: self.quad_abs_tol, max_depth: self.max_quad_depth }
    }

    pub(crate) fn x_tolerance(&self, f_abs: f64) -> Tolerance {
        Tolerance { x_abs: self.root_tol, f_abs, max_iter: self.max_root_iter }
    }
}

/// Mass, optimal center and optimally centered moment of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub mass: f64,
    pub center: f64,
    pub moment: f64,
}

pub(crate) fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_nan() || b.is_nan() || a > b {
        Err(Error::InvalidInterval { a, b })
    } else {
        Ok(())
    }
}

/// Integration edges for `[a, b]` clipped to the support, split at the model's
/// breakpoints and at `split` when it falls inside. `None` when the clipped cell is empty.
fn edges(model: &DensityModel, a: f64, b: f64, split: Option<f64>) -> Option<Vec<f64>> {
    let (slo, shi) = model.support();
    let lo = a.max(slo);
    let hi = b.min(shi);
    if !(lo < hi) {
        return None;
    }
    let mut e = Vec::with_capacity(4);
    e.push(lo);
    e.extend(model.breakpoints().iter().copied().filter(|&x| x > lo && x < hi));
    if let Some(c) = split.filter(|&c| c > lo && c < hi) {
        e.push(c);
    }
    if lo == f64::NEG_INFINITY && hi == f64::INFINITY && e.len() == 1 {
        e.push(model.median());
    }
    e.push(hi);
    e.sort_by(f64::total_cmp);
    e.dedup();
    Some(e)
}

/// Tail substitution for integrands growing like `|x|^growth h(x)^p`.
fn tail(model: &DensityModel, cfg: &SolverConfig, growth: f64, p: f64) -> Tail {
    let scale = cfg.tail_scale.unwrap_or_else(|| model.scale());
    let power = match model.tail_decay() {
        // integrand ~ x^(-k); the substitution leaves (1 - t)^(power (k - 1) - 1)
        Some(decay) => {
            let k = p * decay - growth;
            if k > 1.0 {
                (2.0 / (k - 1.0)).clamp(1.0, 64.0)
            } else {
                64.0
            }
        }
        None => 1.0,
    };
    Tail { scale, power }
}

/// `integral_{[a,b]} |x - c|^r h(x) dx`.
pub fn partial_moment(model: &DensityModel, a: f64, b: f64, c: f64, order: Order, cfg: &SolverConfig) -> Result<f64> {
    check_interval(a, b)?;
    let Some(e) = edges(model, a, b, Some(c)) else {
        return Ok(0.0);
    };
    let q = quadrature::integrate(
        |x| [order.pow_abs(x - c) * model.pdf(x)],
        &e,
        tail(model, cfg, order.r(), 1.0),
        &cfg.quad(),
    )?;
    Ok(q.value[0].max(0.0))
}

/// `integral_{[a,b]} h(x)^p dx`.
pub(crate) fn density_power_integral(model: &DensityModel, a: f64, b: f64, p: f64, cfg: &SolverConfig) -> Result<f64> {
    check_interval(a, b)?;
    let Some(e) = edges(model, a, b, None) else {
        return Ok(0.0);
    };
    let q = quadrature::integrate(|x| [model.pdf(x).powf(p)], &e, tail(model, cfg, 0.0, p), &cfg.quad())?;
    Ok(q.value[0])
}

/// Probability mass of `[a, b]` computed with the same quadrature as the moments.
fn mass_and_mean(model: &DensityModel, e: &[f64], cfg: &SolverConfig) -> Result<(f64, f64)> {
    let p = reference_point(model, e);
    let q = quadrature::integrate(
        |x| {
            let h = model.pdf(x);
            [h, (x - p) * h]
        },
        e,
        tail(model, cfg, 1.0, 1.0),
        &cfg.quad(),
    )?;
    let [m0, m1] = q.value;
    Ok((m0, if m0 > 0.0 { p + m1 / m0 } else { p }))
}

fn reference_point(model: &DensityModel, e: &[f64]) -> f64 {
    let (lo, hi) = (e[0], e[e.len() - 1]);
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => model.median(),
    }
}

/// Mass, centroid of order `r` and minimal moment of `[a, b]`.
///
/// Cells without mass report `mass = 0`, `moment = 0` and the clipped midpoint as center.
pub fn cell_stats(model: &DensityModel, a: f64, b: f64, order: Order, cfg: &SolverConfig) -> Result<CellStats> {
    check_interval(a, b)?;
    let Some(e) = edges(model, a, b, None) else {
        let c = if a.is_finite() && b.is_finite() { 0.5 * (a + b) } else { a.max(b.min(model.median())) };
        return Ok(CellStats { mass: 0.0, center: c, moment: 0.0 });
    };
    let (lo, hi) = (e[0], e[e.len() - 1]);

    if order.is_quadratic() {
        let p = reference_point(model, &e);
        let q = quadrature::integrate(
            |x| {
                let h = model.pdf(x);
                let d = x - p;
                [h, d * h, d * d * h]
            },
            &e,
            tail(model, cfg, 2.0, 1.0),
            &cfg.quad(),
        )?;
        let [m0, m1, m2] = q.value;
        if !(m0 > 0.0) {
            return Ok(CellStats { mass: 0.0, center: p.clamp(lo, hi), moment: 0.0 });
        }
        let center = (p + m1 / m0).clamp(lo, hi);
        let moment = (m2 - m1 * m1 / m0).max(0.0);
        return Ok(CellStats { mass: m0, center, moment });
    }

    let (mass, mean) = mass_and_mean(model, &e, cfg)?;
    if !(mass > 0.0) {
        return Ok(CellStats { mass: 0.0, center: mean.clamp(lo, hi), moment: 0.0 });
    }
    let center = centroid(model, lo, hi, mean.clamp(lo, hi), order, cfg)?;
    let moment = partial_moment(model, lo, hi, center, order, cfg)?;
    Ok(CellStats { mass, center, moment })
}

/// Derivative (up to the factor r) of the partial moment with respect to the center:
/// `integral sign(c - x) |x - c|^(r-1) h(x) dx`, strictly increasing in `c`.
fn centroid_slope(model: &DensityModel, lo: f64, hi: f64, c: f64, order: Order, cfg: &SolverConfig) -> Result<f64> {
    let Some(e) = edges(model, lo, hi, Some(c)) else {
        return Ok(0.0);
    };
    let s = order.r() - 1.0;
    let q = quadrature::integrate(
        |x| {
            let d = c - x;
            [d.signum() * d.abs().powf(s) * model.pdf(x)]
        },
        &e,
        tail(model, cfg, order.r() - 1.0, 1.0),
        &cfg.quad(),
    )?;
    Ok(q.value[0])
}

fn centroid(model: &DensityModel, lo: f64, hi: f64, guess: f64, order: Order, cfg: &SolverConfig) -> Result<f64> {
    let slope = |c: f64| centroid_slope(model, lo, hi, c, order, cfg);
    let g0 = slope(guess)?;
    if g0 == 0.0 {
        return Ok(guess);
    }
    // The centroid lies on the side where the slope has the opposite sign.
    let toward_hi = g0 < 0.0;
    let end = if toward_hi { hi } else { lo };
    let (a, fa, b, fb) = if end.is_finite() {
        let fe = slope(end)?;
        (guess, g0, end, fe)
    } else {
        let step = if toward_hi { model.scale() } else { -model.scale() };
        roots::expand(slope, guess, g0, step, 2000)?
    };
    let (a, fa, b, fb) = if a <= b { (a, fa, b, fb) } else { (b, fb, a, fa) };
    roots::brent(slope, a, b, fa, fb, cfg.x_tolerance(0.0))
}

/// Unique minimizer `c` of the partial moment over `[a, b]`; lies in the (clipped) cell.
pub fn one_point_optimal(model: &DensityModel, a: f64, b: f64, order: Order, cfg: &SolverConfig) -> Result<f64> {
    let s = cell_stats(model, a, b, order, cfg)?;
    if s.mass > 0.0 {
        Ok(s.center)
    } else {
        Err(Error::EmptyCell { a, b })
    }
}

/// Optimally centered moment `W(a, b)`; zero for cells without mass.
pub fn cell_moment(model: &DensityModel, a: f64, b: f64, order: Order, cfg: &SolverConfig) -> Result<f64> {
    Ok(cell_stats(model, a, b, order, cfg)?.moment)
}
