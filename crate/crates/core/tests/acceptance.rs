//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits
//! nonzero if any failed. Built without the libtest harness so the summary is always
//! visible under `cargo test`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use gersho::asymptotics::{cell_census, counterexample_quantizer, default_interval, zador_constant};
use gersho::gersho::{build_by_doubling, build_gersho, verify_quantizer, Method, Quantizer, DEFAULT_VERIFY_TOL};
use gersho::io::quantizer_to_json;
use gersho::lloyd::{lloyd_step, LloydState};
use gersho::{cell_moment, one_point_optimal, DensityModel, Order, SolverConfig, Tabulated};
use proptest::test_runner::{Config, TestCaseError, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&SolverConfig) -> Outcome);

fn r2() -> Order {
    Order::new(2.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn gaussian() -> DensityModel {
    DensityModel::gaussian(0.0, 1.0).unwrap()
}

fn laplace() -> DensityModel {
    DensityModel::laplace(0.0, 1.0).unwrap()
}

fn exponential() -> DensityModel {
    DensityModel::exponential(1.0).unwrap()
}

fn uniform() -> DensityModel {
    DensityModel::uniform(0.0, 1.0).unwrap()
}

fn triangle() -> DensityModel {
    let knots: Vec<(f64, f64)> = (0..=40)
        .map(|i| {
            let x = i as f64 / 20.0;
            (x, 1.0 - (x - 1.0).abs())
        })
        .collect();
    DensityModel::tabulated(Tabulated::new(&knots).unwrap())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform_exactness(cfg: &SolverConfig) -> Outcome {
    let start = Instant::now();
    let u = uniform();
    let (mut worst_d, mut worst_b): (f64, f64) = (0.0, 0.0);
    for n in 1..=64usize {
        let (q, _) = build_gersho(&u, n, r2(), cfg).map_err(|e| format!("n = {n}: {e}"))?;
        worst_d = worst_d.max(rel(q.distortion(), 1.0 / (12.0 * (n * n) as f64)));
        for (i, b) in q.boundaries().iter().enumerate() {
            worst_b = worst_b.max((b - (i + 1) as f64 / n as f64).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_d <= 1e-8 && worst_b <= 1e-10 && secs < 5.0,
        format!("max rel D error {worst_d:.2e}, max boundary error {worst_b:.2e}, {secs:.2} s"),
    )
}

fn zador_constants(cfg: &SolverConfig) -> Outcome {
    let cases =
        [(uniform(), 1.0 / 12.0), (laplace(), 9.0), (gaussian(), PI * 3f64.sqrt() / 2.0), (exponential(), 2.25)];
    let mut worst: f64 = 0.0;
    for (m, c) in cases {
        let z = zador_constant(&m, r2(), cfg).map_err(|e| format!("{m}: {e}"))?;
        worst = worst.max(rel(z, c));
    }
    check(worst <= 1e-8, format!("max rel error {worst:.2e}"))
}

fn asymptotic_optimality(cfg: &SolverConfig) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [gaussian(), laplace(), exponential()] {
        let start = Instant::now();
        let c0 = zador_constant(&m, r2(), cfg).map_err(|e| e.to_string())?;
        let ratio = |n: usize| -> Result<f64, String> {
            let (q, _) = build_gersho(&m, n, r2(), cfg).map_err(|e| format!("{m} n = {n}: {e}"))?;
            Ok((n * n) as f64 * q.distortion() / c0)
        };
        let (r64, r1024) = (ratio(64)?, ratio(1024)?);
        let secs = start.elapsed().as_secs_f64();
        ok &= (r1024 - 1.0).abs() <= 0.05 && (r1024 - 1.0).abs() < (r64 - 1.0).abs() && secs < 120.0;
        parts.push(format!("{m}: {r64:.5} -> {r1024:.5} ({secs:.1} s)"));
    }
    check(ok, parts.join("; "))
}

fn two_level_gaussian(cfg: &SolverConfig) -> Outcome {
    let (q, _) = build_gersho(&gaussian(), 2, r2(), cfg).map_err(|e| e.to_string())?;
    let c = (2.0 / PI).sqrt();
    let dc = (q.codepoints()[0] + c).abs().max((q.codepoints()[1] - c).abs());
    let dd = (q.distortion() - (1.0 - 2.0 / PI)).abs();
    check(dc <= 1e-7 && dd <= 1e-7, format!("codepoint error {dc:.2e}, distortion error {dd:.2e}"))
}

fn monotonicity(cfg: &SolverConfig) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [gaussian(), exponential()] {
        let (u, v) = default_interval(&m, r2(), cfg).map_err(|e| e.to_string())?;
        let mut prev_share = f64::INFINITY;
        let mut prev_outside = 0;
        let mut share_breaks = Vec::new();
        let mut census_breaks = Vec::new();
        for n in 1..=64usize {
            let (q, _) = build_gersho(&m, n, r2(), cfg).map_err(|e| format!("{m} n = {n}: {e}"))?;
            let share = q.distortion() / n as f64;
            if share > prev_share + 1e-9 {
                share_breaks.push(n);
            }
            prev_share = share;
            let outside = cell_census(&q, u, v).map_err(|e| e.to_string())?.outside;
            if outside < prev_outside {
                census_breaks.push(n);
            }
            prev_outside = outside;
        }
        ok &= share_breaks.is_empty() && census_breaks.is_empty();
        parts.push(format!(
            "{m} on [{u:.4}, {v:.4}]: D_n/n breaks {share_breaks:?}, n2 breaks {census_breaks:?}, n2(64) = {prev_outside}"
        ));
    }
    check(ok, parts.join("; "))
}

fn distortion_uniqueness(cfg: &SolverConfig) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [uniform(), gaussian(), laplace(), exponential()] {
        let mut compared = Vec::new();
        let mut skipped = Vec::new();
        for k in 0..=6u32 {
            let n = 1usize << k;
            let (d, _) = build_by_doubling(&m, k, r2(), cfg).map_err(|e| format!("{m} k = {k}: {e}"))?;
            let v = verify_quantizer(&m, &d, r2(), DEFAULT_VERIFY_TOL, cfg);
            if v.passed() {
                let (g, _) = build_gersho(&m, n, r2(), cfg).map_err(|e| e.to_string())?;
                let err = rel(d.distortion(), g.distortion());
                ok &= err <= 1e-6;
                compared.push(n);
            } else {
                skipped.push(format!("{n} (spread {:.1e})", v.per_cell_spread));
            }
        }
        // equal splits are exact for the uniform density, so every level must qualify
        if matches!(m.family(), gersho::Family::Uniform { .. }) {
            ok &= compared.len() == 7;
        }
        parts.push(format!("{m}: agree at {compared:?}, not Gersho at [{}]", skipped.join(", ")));
    }
    check(ok, parts.join("; "))
}

fn counterexample(cfg: &SolverConfig) -> Outcome {
    let u = uniform();
    let q2 = counterexample_quantizer(2, 0.5, r2()).map_err(|e| e.to_string())?;
    let d2 = (q2.distortion() - 0.036458333333333336).abs();
    let mut g4_failures = 0;
    let mut tested = 0;
    let mut last_ratio = 0.0;
    for k in 1..=10u32 {
        let n = 1usize << k;
        let q = counterexample_quantizer(n, 0.5, r2()).map_err(|e| e.to_string())?;
        let v = verify_quantizer(&u, &q, r2(), DEFAULT_VERIFY_TOL, cfg);
        tested += 1;
        if !v.g4 {
            g4_failures += 1;
        }
        last_ratio = (n * n) as f64 * q.distortion() * 12.0;
    }
    check(
        (0.99..=1.01).contains(&last_ratio) && g4_failures == tested && d2 <= 1e-10,
        format!(
            "ratio at 1024 = {last_ratio:.6}, G4 failed at {g4_failures}/{tested} levels, |D_2 - 7/192| = {d2:.1e}"
        ),
    )
}

fn property_suite(cfg: &SolverConfig) -> Outcome {
    let families =
        [uniform(), gaussian(), laplace(), exponential(), DensityModel::power_tail(4.0, 1.0).unwrap(), triangle()];
    let order = Order::new(2.5).unwrap();

    for m in &families {
        let mut runner = TestRunner::new(Config { cases: 200, failure_persistence: None, ..Config::default() });
        let result = runner.run(&(1e-6f64..1.0 - 1e-6, 0.0f64..1.0, 0.0f64..1.0, 0u8..4), |(p, s, t, ends)| {
            let a = if ends == 1 { f64::NEG_INFINITY } else { m.quantile(p * 0.8) };
            let lo = a.max(m.support().0);
            let b1 = m.quantile(m.cdf(lo) + (1.0 - m.cdf(lo)) * s * 0.9 + 1e-9);
            let b2 = if ends == 2 { f64::INFINITY } else { m.quantile(m.cdf(b1) + (1.0 - m.cdf(b1)) * t * 0.9 + 1e-9) };
            let (b1, b2) = (b1.max(lo), b2.max(b1));
            let w1 = cell_moment(m, a, b1, order, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let w2 = cell_moment(m, a, b2, order, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if w1 > w2 * (1.0 + 1e-9) + 1e-300 {
                return Err(TestCaseError::fail(format!("W({a}, {b1}) = {w1} > W({a}, {b2}) = {w2}")));
            }
            if m.mass(a, b2).unwrap() > 0.0 {
                let c = one_point_optimal(m, a, b2, order, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
                if !(c >= a && c <= b2) {
                    return Err(TestCaseError::fail(format!("optimum {c} outside [{a}, {b2}]")));
                }
            }
            Ok(())
        });
        result.map_err(|e| format!("{m}: {e}"))?;
    }

    for m in [gaussian(), exponential(), triangle()] {
        let (lo, hi) = (m.quantile(0.02), m.quantile(0.9));
        let start: Vec<f64> = (0..7).map(|i| lo + (hi - lo) * (i as f64 / 6.0).powi(2)).collect();
        let mut state = LloydState::new(start).map_err(|e| e.to_string())?;
        let mut prev = f64::INFINITY;
        for _ in 0..30 {
            let q = Quantizer::from_cells(&m, r2(), state.boundaries(), state.codepoints.clone(), Method::Lloyd, cfg)
                .map_err(|e| e.to_string())?;
            if q.distortion() > prev + 1e-10 {
                return Err(format!("{m}: Lloyd distortion rose from {prev} to {}", q.distortion()));
            }
            prev = q.distortion();
            state = lloyd_step(&m, &state, r2(), cfg).map_err(|e| e.to_string())?;
        }
    }

    for m in [gaussian(), triangle()] {
        let first = quantizer_to_json(&build_gersho(&m, 33, r2(), cfg).map_err(|e| e.to_string())?.0)
            .map_err(|e| e.to_string())?;
        let second = quantizer_to_json(&build_gersho(&m, 33, r2(), cfg).map_err(|e| e.to_string())?.0)
            .map_err(|e| e.to_string())?;
        if first != second {
            return Err(format!("{m}: reruns differ"));
        }
    }
    Ok(format!("{} families x 200 brackets, Lloyd descent, bit-identical reruns", families.len()))
}

fn main() -> ExitCode {
    let cfg = SolverConfig::default();
    let criteria: [Criterion; 8] = [
        ("uniform exactness", uniform_exactness),
        ("Zador constants", zador_constants),
        ("asymptotic optimality at n = 1024", asymptotic_optimality),
        ("two-level Gaussian closed form", two_level_gaussian),
        ("per-cell distortion and outside-cell count monotone", monotonicity),
        ("doubling agrees with Gersho where it verifies", distortion_uniqueness),
        ("counterexample: optimal ratio without equal moments", counterexample),
        ("property suite", property_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run(&cfg) {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
