//! Non-atomic scalar distributions given by a density.
//!
//! Every model is immutable after construction. Built-in families answer mass and
//! quantile queries from closed-form distribution functions, choosing the lower or
//! upper tail representation so that far-tail masses keep their relative accuracy.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::roots::{self, Tolerance};

/// Parametric family (or tabulated density) underlying a [`DensityModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        stddev: f64,
    },
    Laplace {
        loc: f64,
        scale: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Pareto density `a c^a x^(-a-1)` on `[c, inf)` with tail exponent `a`.
    PowerTail {
        exponent: f64,
        cutoff: f64,
    },
    Tabulated(Tabulated),
}

/// Piecewise-linear density through sorted knots, normalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    xs: Vec<f64>,
    hs: Vec<f64>,
    /// `cum[i]` is the mass on `[xs[0], xs[i]]`.
    cum: Vec<f64>,
}

impl Tabulated {
    /// Build from `(x, h)` knots. Knots must be strictly increasing in `x` with finite,
    /// nonnegative `h`; at least four are required. Densities are renormalized and
    /// zero-density runs at either end are trimmed.
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 4 {
            return Err(Error::InvalidModel(format!("tabulated density needs at least 4 knots, got {}", knots.len())));
        }
        for (i, &(x, h)) in knots.iter().enumerate() {
            if !x.is_finite() || !h.is_finite() {
                return Err(Error::InvalidModel(format!("knot {i} is not finite: ({x}, {h})")));
            }
            if h < 0.0 {
                return Err(Error::InvalidModel(format!("knot {i} has negative density {h}")));
            }
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidModel("tabulated knots must be strictly increasing in x".into()));
        }

        // Trim so the hull of the knots is the support.
        let first = knots.iter().position(|k| k.1 > 0.0);
        let last = knots.iter().rposition(|k| k.1 > 0.0);
        let (Some(first), Some(last)) = (first, last) else {
            return Err(Error::InvalidModel("tabulated density is identically zero".into()));
        };
        let lo = first.saturating_sub(1);
        let hi = (last + 1).min(knots.len() - 1);
        let knots = &knots[lo..=hi];

        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let mut hs: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let mut cum = Vec::with_capacity(xs.len());
        cum.push(0.0);
        for i in 1..xs.len() {
            cum.push(cum[i - 1] + 0.5 * (xs[i] - xs[i - 1]) * (hs[i] + hs[i - 1]));
        }
        let total = *cum.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::InvalidModel("tabulated density has zero mass".into()));
        }
        hs.iter_mut().for_each(|h| *h /= total);
        cum.iter_mut().for_each(|c| *c /= total);
        Ok(Self { xs, hs, cum })
    }

    /// Read a CSV with header `x,h`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            h: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "h" {
            return Err(Error::Format(format!(
                "expected header `x,h`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut knots = Vec::new();
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))?;
            if row.x.is_nan() || row.h.is_nan() {
                return Err(Error::Format(format!("row {}: NaN value", line + 1)));
            }
            knots.push((row.x, row.h));
        }
        Self::new(&knots)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.hs.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        // index i with xs[i] <= x < xs[i+1]
        self.xs.partition_point(|&k| k <= x).saturating_sub(1).min(self.xs.len() - 2)
    }

    /// Left end of the zero-density stretch ending at `x`, or `x` itself.
    fn gap_start(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&v| v < x);
        if k == 0 || k >= self.xs.len() {
            return x;
        }
        let mut j = k - 1;
        if !(self.hs[j] == 0.0 && self.hs[j + 1] == 0.0) {
            return x;
        }
        while j > 0 && self.hs[j - 1] == 0.0 {
            j -= 1;
        }
        self.xs[j]
    }

    fn pdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if !(x >= self.xs[0] && x <= self.xs[n - 1]) {
            return 0.0;
        }
        let i = self.segment(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.hs[i] + t * (self.hs[i + 1] - self.hs[i])
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let i = self.segment(x);
        (self.cum[i] + 0.5 * (x - self.xs[i]) * (self.hs[i] + self.pdf(x))).min(1.0)
    }

    /// True when no stretch of zero density of positive length sits inside the hull.
    fn has_interval_support(&self) -> bool {
        !self.hs.windows(2).any(|w| w[0] == 0.0 && w[1] == 0.0)
    }
}

/// A non-atomic distribution on the real line described by its density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    family: Family,
    support_lo: f64,
    support_hi: f64,
    /// Breakpoints plus a fixed ladder of quantiles; integration pieces are split here so
    /// no piece is much wider than the bulk of the mass it carries.
    anchors: Vec<f64>,
}

const ANCHOR_LEVELS: [f64; 11] = [1e-9, 1e-6, 1e-3, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0 - 1e-3, 1.0 - 1e-6, 1.0 - 1e-9];

fn check(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidModel(msg.into()))
    }
}

impl DensityModel {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check(lo.is_finite() && hi.is_finite() && lo < hi, format!("uniform needs finite lo < hi, got ({lo}, {hi})"))?;
        Ok(Self { family: Family::Uniform { lo, hi }, support_lo: lo, support_hi: hi, anchors: Vec::new() })
    }

    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        check(
            mean.is_finite() && stddev.is_finite() && stddev > 0.0,
            format!("gaussian needs finite mean and stddev > 0, got ({mean}, {stddev})"),
        )?;
        Ok(Self::with_anchors(Self {
            family: Family::Gaussian { mean, stddev },
            support_lo: f64::NEG_INFINITY,
            support_hi: f64::INFINITY,
            anchors: Vec::new(),
        }))
    }

    pub fn laplace(loc: f64, scale: f64) -> Result<Self> {
        check(
            loc.is_finite() && scale.is_finite() && scale > 0.0,
            format!("laplace needs finite loc and scale > 0, got ({loc}, {scale})"),
        )?;
        Ok(Self::with_anchors(Self {
            family: Family::Laplace { loc, scale },
            support_lo: f64::NEG_INFINITY,
            support_hi: f64::INFINITY,
            anchors: Vec::new(),
        }))
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        check(rate.is_finite() && rate > 0.0, format!("exponential needs rate > 0, got {rate}"))?;
        Ok(Self::with_anchors(Self {
            family: Family::Exponential { rate },
            support_lo: 0.0,
            support_hi: f64::INFINITY,
            anchors: Vec::new(),
        }))
    }

    pub fn power_tail(exponent: f64, cutoff: f64) -> Result<Self> {
        check(
            exponent.is_finite() && exponent > 0.0 && cutoff.is_finite() && cutoff > 0.0,
            format!("power tail needs exponent > 0 and cutoff > 0, got ({exponent}, {cutoff})"),
        )?;
        Ok(Self::with_anchors(Self {
            family: Family::PowerTail { exponent, cutoff },
            support_lo: cutoff,
            support_hi: f64::INFINITY,
            anchors: Vec::new(),
        }))
    }

    pub fn tabulated(table: Tabulated) -> Self {
        let lo = table.xs[0];
        let hi = *table.xs.last().unwrap();
        Self::with_anchors(Self {
            family: Family::Tabulated(table),
            support_lo: lo,
            support_hi: hi,
            anchors: Vec::new(),
        })
    }

    fn with_anchors(mut self) -> Self {
        let mut anchors: Vec<f64> = match &self.family {
            Family::Uniform { .. } => Vec::new(),
            Family::Laplace { loc, .. } => vec![*loc],
            Family::Tabulated(t) => t.xs.clone(),
            _ => Vec::new(),
        };
        if !matches!(self.family, Family::Uniform { .. }) {
            anchors.extend(ANCHOR_LEVELS.iter().map(|&p| self.quantile(p)));
        }
        anchors.retain(|x| x.is_finite() && *x > self.support_lo && *x < self.support_hi);
        anchors.sort_by(f64::total_cmp);
        anchors.dedup();
        self.anchors = anchors;
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Closed support `[lo, hi]`; either end may be infinite.
    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    /// Density h(x); zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Family::Gaussian { mean, stddev } => {
                let z = (x - mean) / stddev;
                (-0.5 * z * z).exp() / (stddev * (2.0 * PI).sqrt())
            }
            Family::Laplace { loc, scale } => (-(x - loc).abs() / scale).exp() / (2.0 * scale),
            Family::Exponential { rate } => {
                if x >= 0.0 {
                    rate * (-rate * x).exp()
                } else {
                    0.0
                }
            }
            Family::PowerTail { exponent, cutoff } => {
                if x >= *cutoff {
                    exponent / cutoff * (cutoff / x).powf(exponent + 1.0)
                } else {
                    0.0
                }
            }
            Family::Tabulated(t) => t.pdf(x),
        }
    }

    /// Distribution function P(X <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match &self.family {
            Family::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Family::Gaussian { mean, stddev } => 0.5 * erfc(-(x - mean) / (stddev * SQRT_2)),
            Family::Laplace { loc, scale } => {
                if x < *loc {
                    0.5 * ((x - loc) / scale).exp()
                } else {
                    1.0 - 0.5 * (-(x - loc) / scale).exp()
                }
            }
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Family::PowerTail { exponent, cutoff } => {
                if x <= *cutoff {
                    0.0
                } else {
                    -(exponent * (cutoff / x).ln()).exp_m1()
                }
            }
            Family::Tabulated(t) => t.cdf(x),
        }
    }

    /// Survival function P(X > x), accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match &self.family {
            Family::Gaussian { mean, stddev } => 0.5 * erfc((x - mean) / (stddev * SQRT_2)),
            Family::Laplace { loc, scale } => {
                if x < *loc {
                    1.0 - 0.5 * ((x - loc) / scale).exp()
                } else {
                    0.5 * (-(x - loc) / scale).exp()
                }
            }
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Family::PowerTail { exponent, cutoff } => {
                if x <= *cutoff {
                    1.0
                } else {
                    (cutoff / x).powf(*exponent)
                }
            }
            Family::Uniform { .. } | Family::Tabulated(_) => 1.0 - self.cdf(x),
        }
    }

    pub fn median(&self) -> f64 {
        match &self.family {
            Family::Uniform { lo, hi } => 0.5 * (lo + hi),
            Family::Gaussian { mean, .. } => *mean,
            Family::Laplace { loc, .. } => *loc,
            Family::Exponential { rate } => std::f64::consts::LN_2 / rate,
            Family::PowerTail { exponent, cutoff } => cutoff * 2f64.powf(1.0 / exponent),
            Family::Tabulated(_) => self.quantile(0.5),
        }
    }

    /// Probability mass of `[a, b]`; endpoints may be infinite.
    pub fn mass(&self, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::InvalidInterval { a, b });
        }
        if a == b {
            return Ok(0.0);
        }
        let med = self.median();
        let m = if a >= med {
            self.sf(a) - self.sf(b)
        } else if b <= med {
            self.cdf(b) - self.cdf(a)
        } else {
            1.0 - self.cdf(a) - self.sf(b)
        };
        Ok(m.clamp(0.0, 1.0))
    }

    /// Smallest x with `cdf(x) >= p`, for `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p.is_nan() || !(0.0..=1.0).contains(&p) {
            return f64::NAN;
        }
        if p == 0.0 {
            return self.support_lo;
        }
        if p == 1.0 {
            return self.support_hi;
        }
        match &self.family {
            Family::Uniform { lo, hi } => lo + p * (hi - lo),
            Family::Gaussian { mean, stddev } => mean - stddev * SQRT_2 * erfc_inv(2.0 * p),
            Family::Laplace { loc, scale } => {
                if p < 0.5 {
                    loc + scale * (2.0 * p).ln()
                } else {
                    loc - scale * (2.0 * (1.0 - p)).ln()
                }
            }
            Family::Exponential { rate } => -(-p).ln_1p() / rate,
            Family::PowerTail { exponent, cutoff } => cutoff * (-(-p).ln_1p() / exponent).exp(),
            Family::Tabulated(t) => {
                let i = t.cum.partition_point(|&c| c < p).clamp(1, t.xs.len() - 1);
                let (a, b) = (t.xs[i - 1], t.xs[i]);
                let tol = Tolerance { x_abs: 1e-15 * (b - a).max(1.0), f_abs: 0.0, max_iter: 200 };
                roots::brent(|x| Ok(t.cdf(x) - p), a, b, t.cdf(a) - p, t.cdf(b) - p, tol).unwrap_or(0.5 * (a + b))
            }
        }
    }

    /// Characteristic length used to scale the tail mapping and initial search steps.
    pub fn scale(&self) -> f64 {
        match &self.family {
            Family::Uniform { lo, hi } => hi - lo,
            Family::Gaussian { stddev, .. } => *stddev,
            Family::Laplace { scale, .. } => *scale,
            Family::Exponential { rate } => 1.0 / rate,
            Family::PowerTail { cutoff, .. } => *cutoff,
            Family::Tabulated(t) => t.xs[t.xs.len() - 1] - t.xs[0],
        }
    }

    /// Sorted interior points at which integrals are split: kinks of the density
    /// (Laplace mode, tabulated knots) and a fixed ladder of quantiles.
    pub fn breakpoints(&self) -> &[f64] {
        &self.anchors
    }

    /// Center of reflection symmetry, when the model has one.
    pub fn symmetry_center(&self) -> Option<f64> {
        match &self.family {
            Family::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            Family::Gaussian { mean, .. } => Some(*mean),
            Family::Laplace { loc, .. } => Some(*loc),
            _ => None,
        }
    }

    /// Whether the support is a single (possibly unbounded) interval.
    pub fn support_is_interval(&self) -> bool {
        match &self.family {
            Family::Tabulated(t) => t.has_interval_support(),
            _ => true,
        }
    }

    /// Whether `integral h^(1/(1+r))` is finite, decided from the tail behaviour of the family.
    /// `k` when the density decays like `|x|^(-k)` in an infinite tail; `None` for
    /// exponentially decaying or compactly supported families.
    pub fn tail_decay(&self) -> Option<f64> {
        match &self.family {
            Family::PowerTail { exponent, .. } => Some(exponent + 1.0),
            _ => None,
        }
    }

    /// Smallest `y <= x` with no mass on `[y, x]`.
    pub fn gap_start(&self, x: f64) -> f64 {
        match &self.family {
            Family::Tabulated(t) => t.gap_start(x),
            _ => x,
        }
    }

    /// Whether `integral |x|^r h` is finite.
    pub fn has_finite_moment(&self, r: f64) -> bool {
        match &self.family {
            Family::PowerTail { exponent, .. } => *exponent > r,
            _ => true,
        }
    }

    pub fn root_density_integrable(&self, r: f64) -> bool {
        match &self.family {
            // h^(1/(1+r)) ~ x^(-(a+1)/(1+r))
            Family::PowerTail { exponent, .. } => *exponent > r,
            _ => true,
        }
    }

    /// Grid heuristic for weak unimodality: all superlevel sets `{h >= l}` for small
    /// `l > 0` must be single intervals.
    pub fn is_weakly_unimodal(&self, grid_size: usize) -> UnimodalityReport {
        let grid_size = grid_size.max(16);
        let lo = if self.support_lo.is_finite() { self.support_lo } else { self.quantile(1e-9) };
        let hi = if self.support_hi.is_finite() { self.support_hi } else { self.quantile(1.0 - 1e-9) };
        let step = (hi - lo) / (grid_size - 1) as f64;
        let values: Vec<f64> = (0..grid_size).map(|i| self.pdf(lo + step * i as f64)).collect();

        // A superlevel set {h >= l} splits at grid point j iff h_j < l <= min(max left, max right);
        // the first split therefore starts right above the lowest such valley value h_j.
        let mut left_max = vec![0.0f64; grid_size];
        for j in 1..grid_size {
            left_max[j] = left_max[j - 1].max(values[j - 1]);
        }
        let mut right_max = 0.0f64;
        let mut first_split: Option<f64> = None;
        for j in (0..grid_size).rev() {
            let ceiling = left_max[j].min(right_max);
            if values[j] < ceiling {
                first_split = Some(first_split.map_or(values[j], |s: f64| s.min(values[j])));
            }
            right_max = right_max.max(values[j]);
        }
        UnimodalityReport { pass: first_split.is_none_or(|l| l > 0.0), first_split_level: first_split }
    }
}

/// Outcome of [`DensityModel::is_weakly_unimodal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnimodalityReport {
    pub pass: bool,
    /// Lowest level `l` such that `{h >= l'}` is disconnected for levels `l'` slightly above `l`.
    pub first_split_level: Option<f64>,
}

impl fmt::Display for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Family::Gaussian { mean, stddev } => write!(f, "gauss:{mean},{stddev}"),
            Family::Laplace { loc, scale } => write!(f, "laplace:{loc},{scale}"),
            Family::Exponential { rate } => write!(f, "exp:{rate}"),
            Family::PowerTail { exponent, cutoff } => write!(f, "powertail:{exponent},{cutoff}"),
            Family::Tabulated(t) => {
                write!(f, "tabulated:{} knots on [{}, {}]", t.xs.len(), self.support_lo, self.support_hi)
            }
        }
    }
}

/// Parses `family:param,param`: `uniform:lo,hi`, `gauss:mean,sd` (also `gaussian`,
/// `normal`), `laplace:loc,scale`, `exp:rate` (also `exponential`),
/// `powertail:exponent,cutoff` (also `pareto`) and `tabulated:path/to/density.csv`.
impl FromStr for DensityModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, params) =
            s.split_once(':').ok_or_else(|| Error::InvalidModel(format!("expected family:params, got {s:?}")))?;
        let family = family.trim().to_ascii_lowercase();
        if family == "tabulated" {
            return Ok(Self::tabulated(Tabulated::from_csv_path(params.trim())?));
        }
        let p = params
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidModel(format!("bad parameter in {s:?}: {e}")))?;
        match (family.as_str(), p.as_slice()) {
            ("uniform", &[lo, hi]) => Self::uniform(lo, hi),
            ("gauss" | "gaussian" | "normal", &[mean, sd]) => Self::gaussian(mean, sd),
            ("laplace", &[loc, scale]) => Self::laplace(loc, scale),
            ("exp" | "exponential", &[rate]) => Self::exponential(rate),
            ("powertail" | "pareto", &[exponent, cutoff]) => Self::power_tail(exponent, cutoff),
            _ => Err(Error::InvalidModel(format!("unknown family or wrong parameter count in {s:?}"))),
        }
    }
}
