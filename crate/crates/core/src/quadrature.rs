//! Globally adaptive Gauss-Kronrod (G10/K21) integration of small vector-valued integrands.
//!
//! Pieces with an infinite endpoint are mapped onto `[0, 1)` through
//! `x = b + s * t / (1 - t)` (or its mirror image), where `s` is a length scale
//! supplied by the caller. Kronrod nodes never touch `t = 1`.

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_709_420,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// 10-point Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Hard cap on the number of live subintervals.
const MAX_INTERVALS: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Map {
    Identity,
    /// `x = origin + scale * ((1 - t)^(-power) - 1)`
    Right {
        origin: f64,
        tail: Tail,
    },
    /// `x = origin - scale * ((1 - t)^(-power) - 1)`
    Left {
        origin: f64,
        tail: Tail,
    },
}

/// Substitution for infinite pieces. `power = 1` gives the rational map
/// `t / (1 - t)`; larger powers stretch the tail so that algebraically decaying
/// integrands vanish at `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tail {
    pub scale: f64,
    pub power: f64,
}

impl Tail {
    #[cfg(test)]
    pub fn new(scale: f64) -> Self {
        Self { scale, power: 1.0 }
    }

    #[inline]
    fn offset(self, t: f64) -> (f64, f64) {
        let l = -(-t).ln_1p();
        let d = self.scale * (self.power * l).exp_m1();
        let jac = self.scale * self.power * ((self.power + 1.0) * l).exp();
        (d, jac)
    }
}

impl Map {
    #[inline]
    fn apply(self, t: f64) -> (f64, f64) {
        match self {
            Map::Identity => (t, 1.0),
            Map::Right { origin, tail } => {
                let (d, jac) = tail.offset(t);
                (origin + d, jac)
            }
            Map::Left { origin, tail } => {
                let (d, jac) = tail.offset(t);
                (origin - d, jac)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Segment<const N: usize> {
    lo: f64,
    hi: f64,
    map: Map,
    depth: u32,
    value: [f64; N],
    error: [f64; N],
    abs: [f64; N],
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Integral<const N: usize> {
    pub value: [f64; N],
}

fn rule<const N: usize, F>(f: &F, lo: f64, hi: f64, map: Map) -> ([f64; N], [f64; N], [f64; N])
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |t: f64| {
        let (x, jac) = map.apply(t);
        if !x.is_finite() || !jac.is_finite() {
            // the substitution overflowed deep in a tail where the integrand has vanished
            return [0.0; N];
        }
        let mut v = f(x);
        for c in v.iter_mut() {
            *c *= jac;
        }
        v
    };

    let fc = eval(center);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let mut resabs = [0.0; N];
    let mut samples = [([0.0; N], [0.0; N]); 10];
    for k in 0..N {
        kronrod[k] = WGK[10] * fc[k];
        resabs[k] = WGK[10] * fc[k].abs();
    }
    for (j, sample) in samples.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = eval(center - dx);
        let f2 = eval(center + dx);
        for k in 0..N {
            kronrod[k] += WGK[j] * (f1[k] + f2[k]);
            resabs[k] += WGK[j] * (f1[k].abs() + f2[k].abs());
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * (f1[k] + f2[k]);
            }
        }
        *sample = (f1, f2);
    }

    let mut error = [0.0; N];
    for k in 0..N {
        let mean = 0.5 * kronrod[k];
        let mut resasc = WGK[10] * (fc[k] - mean).abs();
        for (j, (f1, f2)) in samples.iter().enumerate() {
            resasc += WGK[j] * ((f1[k] - mean).abs() + (f2[k] - mean).abs());
        }
        let value = kronrod[k] * half;
        let abs = resabs[k] * half.abs();
        let asc = resasc * half.abs();
        let mut err = ((kronrod[k] - gauss[k]) * half).abs();
        if asc != 0.0 && err != 0.0 {
            err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
        }
        if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * abs);
        }
        kronrod[k] = value;
        resabs[k] = abs;
        error[k] = err;
    }
    (kronrod, error, resabs)
}

/// Integrate `f` over the union of consecutive pieces `[edges[i], edges[i+1]]`.
///
/// `edges` must be nondecreasing; only the first and last entry may be infinite.
/// `tail` sets the substitution used on infinite pieces.
pub(crate) fn integrate<const N: usize, F>(f: F, edges: &[f64], tail: Tail, opts: &QuadOptions) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let mut segments: Vec<Segment<N>> = Vec::new();
    let push = |segments: &mut Vec<Segment<N>>, lo: f64, hi: f64, map: Map| {
        let (value, error, abs) = rule(&f, lo, hi, map);
        segments.push(Segment { lo, hi, map, depth: 0, value, error, abs });
    };

    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a < b) {
            continue;
        }
        match (a.is_finite(), b.is_finite()) {
            (true, true) => push(&mut segments, a, b, Map::Identity),
            (true, false) => push(&mut segments, 0.0, 1.0, Map::Right { origin: a, tail }),
            (false, true) => push(&mut segments, 0.0, 1.0, Map::Left { origin: b, tail }),
            (false, false) => {
                push(&mut segments, 0.0, 1.0, Map::Left { origin: 0.0, tail });
                push(&mut segments, 0.0, 1.0, Map::Right { origin: 0.0, tail });
            }
        }
    }

    if segments.is_empty() {
        return Ok(Integral { value: [0.0; N] });
    }

    loop {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        let mut abs = [0.0; N];
        for s in &segments {
            for k in 0..N {
                value[k] += s.value[k];
                error[k] += s.error[k];
                abs[k] += s.abs[k];
            }
        }
        let tol: [f64; N] = std::array::from_fn(|k| opts.abs_tol.max(opts.rel_tol * abs[k]));
        if (0..N).all(|k| error[k] <= tol[k]) {
            return Ok(Integral { value });
        }

        // Split the segment carrying the largest tolerance-weighted error.
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.depth < opts.max_depth && splittable(s.lo, s.hi))
            .map(|(i, s)| {
                let w: f64 = (0..N).map(|k| s.error[k] / tol[k]).fold(0.0, f64::max);
                (i, w)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1));

        let Some((idx, weight)) = worst else {
            return Err(failure(&value, &error));
        };
        if weight == 0.0 || segments.len() >= MAX_INTERVALS {
            return Err(failure(&value, &error));
        }

        let s = segments.swap_remove(idx);
        let mid = 0.5 * (s.lo + s.hi);
        for (lo, hi) in [(s.lo, mid), (mid, s.hi)] {
            let (value, error, abs) = rule(&f, lo, hi, s.map);
            segments.push(Segment { lo, hi, map: s.map, depth: s.depth + 1, value, error, abs });
        }
    }
}

fn splittable(lo: f64, hi: f64) -> bool {
    let mid = 0.5 * (lo + hi);
    mid > lo && mid < hi && (hi - lo) > 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
}

fn failure<const N: usize>(value: &[f64; N], error: &[f64; N]) -> Error {
    let (k, _) = error.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap_or((0, &0.0));
    Error::QuadratureFailure { estimate: value[k], error: error[k] }
}
