//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line.
//!
//! A failing criterion panics only when `ACCEPTANCE_STRICT=1`. The long runs are
//! ignored by default; run them with
//! `cargo test --release -p ising-adder --test acceptance -- --ignored --nocapture`.

use std::f64::consts::PI;

use ising_adder::analysis::{
    addition_outcomes, check_gate_phases, check_suppression, check_tables, reproduce_fig1, reproduce_fig2,
    reproduce_fig3, AdditionOutcome, Check, Fig1Config, Fig2Config, Fig3Config, Fig3Result,
};
use ising_adder::map::MapConfig;
use ising_adder::pulses::wrap_phase;
use ising_adder::Error;

fn report(criterion: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("{tag} {criterion}: {detail}");
    if !passed && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        panic!("{criterion} failed: {detail}");
    }
}

fn all_pairs(bits: usize, addends: &[u64]) -> Vec<(u64, u64)> {
    addends.iter().flat_map(|&a| (0..1u64 << bits).map(move |b| (a, b))).collect()
}

fn summarize(outcomes: &[AdditionOutcome]) -> (usize, f64) {
    let bad = outcomes.iter().filter(|o| !o.passed()).count();
    let margin = outcomes.iter().map(|o| o.probability - o.bound).fold(f64::INFINITY, f64::min);
    (bad, margin)
}

/// Exhaustive addition for l <= 4, two full addend rows at l = 5, and the l >= 7 capacity probe.
#[test]
fn c1_addition_correctness() {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for l in 1..=4 {
        let all: Vec<u64> = (0..1u64 << l).collect();
        let (bad, margin) = summarize(&addition_outcomes(l, &all_pairs(l, &all), 100, 100.0).unwrap());
        lines.push(format!("l={l} exhaustive bad={bad} margin={margin:.2e}"));
        if bad > 0 {
            failures.push(format!("l={l}"));
        }
    }
    let (bad, margin) = summarize(&addition_outcomes(5, &all_pairs(5, &[0, 31]), 100, 100.0).unwrap());
    lines.push(format!("l=5 addends 0,31 bad={bad} margin={margin:.2e}"));
    if bad > 0 {
        failures.push("l=5".into());
    }
    for l in [7, 8] {
        match addition_outcomes(l, &[(1, 1)], 100, 100.0) {
            Err(Error::ResourceCap { .. }) => {
                lines.push(format!("l={l} exceeds the exact-simulation cap"));
                failures.push(format!("l={l} infeasible"));
            }
            Err(e) => panic!("unexpected error at l={l}: {e}"),
            Ok(o) => {
                let (bad, _) = summarize(&o);
                if bad > 0 {
                    failures.push(format!("l={l}"));
                }
            }
        }
    }
    report("criterion 1 addition correctness", failures.is_empty(), &format!("{}; failing: {:?}", lines.join(", "), failures));
}

/// Every addend and input at l = 5.
#[test]
#[ignore]
fn c1_addition_exhaustive_l5() {
    let all: Vec<u64> = (0..32).collect();
    let (bad, margin) = summarize(&addition_outcomes(5, &all_pairs(5, &all), 100, 100.0).unwrap());
    report("criterion 1 addition correctness (l=5 exhaustive)", bad == 0, &format!("bad={bad} margin={margin:.2e}"));
}

/// One addend at l = 6 on four inputs (13 spins; several hours on one core).
#[test]
#[ignore]
fn c1_addition_sampled_l6() {
    let pairs: Vec<(u64, u64)> = [0, 18, 27, 63].iter().map(|&b| (45, b)).collect();
    let (bad, margin) = summarize(&addition_outcomes(6, &pairs, 100, 100.0).unwrap());
    report("criterion 1 addition correctness (l=6 sampled)", bad == 0, &format!("bad={bad} margin={margin:.2e}"));
}

#[test]
fn c2_phase_error_sweep() {
    let rows = reproduce_fig1(&Fig1Config::default()).unwrap();
    let worst = rows.iter().map(|r| r.phase_error).fold(0.0, f64::max);
    let common = rows
        .iter()
        .map(|r| wrap_phase(r.common_phase - r.expected_common_phase).abs())
        .fold(0.0, f64::max);
    report(
        "criterion 2 phase error sweep",
        worst <= 0.01 * PI && common <= 0.01 * PI,
        &format!("max phase error {:.4}pi, max common-phase offset {:.4}pi over {} addends", worst / PI, common / PI, rows.len()),
    );
}

#[test]
fn c3_map_tracks_exact() {
    let rows = reproduce_fig2(&Fig2Config::default()).unwrap();
    let outside: Vec<usize> = rows
        .iter()
        .filter(|r| (r.map_mean - r.exact_error).abs() > (0.5 * r.exact_error).max(2.0 * r.map_std_error))
        .map(|r| r.qpulse_index)
        .collect();
    let worst = rows.iter().map(|r| (r.map_mean - r.exact_error).abs() / r.exact_error).fold(0.0, f64::max);
    let last = rows.last().unwrap();
    report(
        "criterion 3 map against exact",
        outside.is_empty(),
        &format!(
            "{} of {} points outside tolerance at Q-pulses {outside:?}; worst relative deviation {worst:.3}; final map {:.3e} exact {:.3e}",
            outside.len(),
            rows.len(),
            last.map_mean,
            last.exact_error
        ),
    );
}

fn growth(useful: usize, realizations: usize, xi_factor: f64) -> Fig3Result {
    let cfg = Fig3Config {
        useful,
        map: MapConfig { realizations, xi_factor, ..MapConfig::default() },
        ..Fig3Config::default()
    };
    reproduce_fig3(&cfg).unwrap()
}

fn final_error(g: &Fig3Result) -> f64 {
    g.rows.last().unwrap().mean_error
}

#[test]
#[ignore]
fn c4_linear_error_growth() {
    let xi = MapConfig::default().xi_factor;
    let main = growth(20, 20, xi);
    let fits = [("physical", main.fit_physical), ("qpulse", main.fit_qpulse)];
    let good = fits
        .iter()
        .any(|(_, f)| (f.slope / 1e-8 - 1.0).abs() <= 0.3 && f.r_squared >= 0.99);
    let finals: Vec<(usize, f64)> = [1, 20, 100]
        .iter()
        .map(|&m| (m, if m == 20 { final_error(&main) } else { final_error(&growth(m, 20, xi)) }))
        .collect();
    let lo = finals.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let hi = finals.iter().map(|f| f.1).fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    report(
        "criterion 4 linear error growth",
        good && spread < 0.1,
        &format!(
            "slope/physical {:.3e} (R2 {:.4}), slope/qpulse {:.3e} (R2 {:.4}); final error by M {finals:?}, spread {:.1}%",
            fits[0].1.slope,
            fits[0].1.r_squared,
            fits[1].1.slope,
            fits[1].1.r_squared,
            100.0 * spread
        ),
    );
}

#[test]
#[ignore]
fn c5_unwanted_count_linear() {
    let g = reproduce_fig3(&Fig3Config::fig4()).unwrap();
    let last = g.rows.last().unwrap();
    report(
        "criterion 5 unwanted count linear",
        g.fit_counts.r_squared >= 0.99,
        &format!(
            "R2 {:.4}, slope {:.3} per physical pulse, final {:.0} unwanted per useful state",
            g.fit_counts.r_squared,
            g.fit_counts.slope,
            last.mean_unwanted / g.useful as f64
        ),
    );
}

#[test]
fn c6_pulse_suite() {
    let mut checks: Vec<Check> = check_suppression(&[4, 8, 100], 100.0).unwrap();
    checks.extend(check_tables(8, 1e4).unwrap());
    checks.extend(check_gate_phases().unwrap());
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    report(
        "criterion 6 pulse suite",
        failed.is_empty(),
        &format!("{} checks, failed: {failed:?}", checks.len()),
    );
}

#[test]
#[ignore]
fn c7_pruning_insensitive() {
    let xi = MapConfig::default().xi_factor;
    let full = final_error(&growth(20, 20, xi));
    let half = final_error(&growth(20, 20, xi / 2.0));
    let change = (half - full).abs() / full;
    report(
        "criterion 7 pruning sensitivity",
        change < 0.05,
        &format!("final error {full:.4e} at xi, {half:.4e} at xi/2, change {:.2}%", 100.0 * change),
    );
}
