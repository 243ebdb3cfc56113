use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use ising_adder::adder::{compile_full_adder, expected_global_phase, Protocol};
use ising_adder::analysis::{
    compare_exact_map, map_growth, reproduce_fig1, reproduce_fig2, reproduce_fig3, verify_with, Fig1Config,
    Fig2Config, Fig2Row, Fig3Config, Fig3Result,
};
use ising_adder::chain::{BasisState, ChainParams};
use ising_adder::exact::{phase_error, trace_csv, ExactConfig, ExactSimulator, TraceLevel};
use ising_adder::pulses::compute_aux;

use crate::config::{Addend, Initial, Overrides, Settings};
use crate::{CliError, Figure};

type Header = Vec<(String, String)>;

fn emit(out: Option<&Path>, command: &str, header: &Header, body: &str) -> Result<(), CliError> {
    let mut text = format!("# command={command}\n# version={}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in header {
        let _ = writeln!(text, "# {k}={v}");
    }
    text.push_str(body);
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn settings(o: Overrides) -> Result<Settings, CliError> {
    Settings::resolve(o.or(Overrides::defaults()))
}

fn chain(s: &Settings) -> Result<ChainParams, CliError> {
    Ok(ChainParams::for_adder(s.addend_bits, s.delta_omega)?)
}

fn protocol(s: &Settings) -> Result<Protocol, CliError> {
    Ok(compile_full_adder(s.addend_value()?, &compute_aux(s.k)?, &chain(s)?)?)
}

/// Map runs keep only magnitudes; useful-state phases do not enter the map.
fn real_initial(terms: &[(BasisState, Complex64)]) -> Vec<(BasisState, f64)> {
    terms.iter().map(|(s, c)| (s.clone(), c.norm())).collect()
}

fn push(h: &mut Header, key: &str, value: impl ToString) {
    h.push((key.to_string(), value.to_string()));
}

pub fn compile(o: Overrides, out: Option<&Path>) -> Result<(), CliError> {
    let s = settings(o)?;
    let p = protocol(&s)?;
    eprintln!(
        "qpulses={} physical_pulses={} total_time={}",
        p.qpulse_count(),
        p.physical_pulse_count(),
        p.total_time()
    );
    let header: Header = s.header().into_iter().filter(|(k, _)| k == "addend_bits" || k == "addend").collect();
    emit(out, "compile", &header, &p.to_text())
}

pub fn run_exact(o: Overrides, out: Option<&Path>) -> Result<(), CliError> {
    let s = settings(o)?;
    let chain = chain(&s)?;
    let mut sim = ExactSimulator::new(chain, ExactConfig::default())?;
    let initial = s.initial.resolve(s.addend_bits)?;
    let aux = compute_aux(s.k)?;
    let mut header = s.header();
    match &s.addend {
        Addend::Sweep => {
            let mut body = String::from("addend,phase_error,common_phase,expected_common_phase,probability_error\n");
            for a in 0..(1u64 << s.addend_bits) {
                let p = compile_full_adder(&a.into(), &aux, &chain)?;
                let run = sim.run(&initial, &p, TraceLevel::None)?;
                let m = phase_error(&initial, &run.final_state, &a.into(), &chain)?;
                let _ = writeln!(
                    body,
                    "{a},{:.9e},{:.9e},{:.9e},{:.9e}",
                    m.phase_error,
                    m.common_phase,
                    expected_global_phase(&p),
                    m.probability_error
                );
            }
            emit(out, "run-exact", &header, &body)
        }
        Addend::Value(a) => {
            let p = compile_full_adder(a, &aux, &chain)?;
            let run = sim.run(&initial, &p, TraceLevel::Errors)?;
            let m = phase_error(&initial, &run.final_state, a, &chain)?;
            push(&mut header, "phase_error", m.phase_error);
            push(&mut header, "common_phase", m.common_phase);
            push(&mut header, "expected_common_phase", expected_global_phase(&p));
            push(&mut header, "probability_error", m.probability_error);
            emit(out, "run-exact", &header, &trace_csv(&run.trace))
        }
    }
}

fn growth_header(h: &mut Header, g: &Fig3Result) {
    push(h, "reference_slope", g.reference_slope);
    push(h, "slope_per_physical_pulse", g.fit_physical.slope);
    push(h, "r2_physical", g.fit_physical.r_squared);
    push(h, "slope_per_qpulse", g.fit_qpulse.slope);
    push(h, "r2_qpulse", g.fit_qpulse.r_squared);
    push(h, "count_slope_per_physical_pulse", g.fit_counts.slope);
    push(h, "r2_counts", g.fit_counts.r_squared);
}

fn growth_body(g: &Fig3Result) -> String {
    let mut body = String::from("pulse_index,qpulse_index,mean_error,std_error,mean_unwanted,unwanted_per_useful\n");
    for r in &g.rows {
        let _ = writeln!(
            body,
            "{},{},{:.9e},{:.9e},{:.3},{:.3}",
            r.pulse_index,
            r.qpulse_index,
            r.mean_error,
            r.std_error,
            r.mean_unwanted,
            r.mean_unwanted / g.useful as f64
        );
    }
    body
}

fn comparison_body(rows: &[Fig2Row]) -> String {
    let mut body = String::from("pulse_index,qpulse_index,exact_error,map_mean,map_std_error\n");
    for r in rows {
        let _ = writeln!(
            body,
            "{},{},{:.9e},{:.9e},{:.9e}",
            r.pulse_index, r.qpulse_index, r.exact_error, r.map_mean, r.map_std_error
        );
    }
    body
}

pub fn run_map(o: Overrides, out: Option<&Path>) -> Result<(), CliError> {
    let s = settings(o)?;
    let p = protocol(&s)?;
    let initial = real_initial(&s.initial.resolve(s.addend_bits)?);
    let g = map_growth(&initial, &p, &s.map)?;
    let mut header = s.header();
    growth_header(&mut header, &g);
    emit(out, "run-map", &header, &growth_body(&g))
}

pub fn compare(o: Overrides, out: Option<&Path>) -> Result<(), CliError> {
    let s = settings(o)?;
    ExactSimulator::new(chain(&s)?, ExactConfig::default())?;
    let p = protocol(&s)?;
    let initial = real_initial(&s.initial.resolve(s.addend_bits)?);
    let rows = compare_exact_map(&initial, &p, &s.map)?;
    emit(out, "compare", &s.header(), &comparison_body(&rows))
}

fn unsupported(figure: Figure, fields: &[(&str, bool)]) -> Result<(), CliError> {
    match fields.iter().find(|f| f.1) {
        Some((name, _)) => Err(CliError::Usage(format!("{figure:?} does not take --{name}"))),
        None => Ok(()),
    }
}

fn explicit_numbers(text: &str) -> Result<Vec<u64>, CliError> {
    match Initial::parse(text)? {
        Initial::Explicit(t) => Ok(t.into_iter().map(|(b, _)| b).collect()),
        Initial::Random { .. } => Err(CliError::Usage("this figure needs an explicit list of initial numbers".into())),
    }
}

pub fn reproduce(figure: Figure, o: Overrides, out: Option<&Path>) -> Result<(), CliError> {
    let name = format!("reproduce {figure:?}").to_lowercase();
    match figure {
        Figure::Fig1 => {
            unsupported(
                figure,
                &[
                    ("addend", o.addend.is_some()),
                    ("xi-factor", o.xi_factor.is_some()),
                    ("realizations", o.realizations.is_some()),
                ],
            )?;
            let mut cfg = Fig1Config::default();
            cfg.k = o.k.unwrap_or(cfg.k);
            cfg.addend_bits = o.addend_bits.unwrap_or(cfg.addend_bits);
            if let Some(dw) = o.delta_omega {
                cfg.detuning_ratio = dw / compute_aux(cfg.k)?.omega;
            }
            if let Some(t) = &o.initial {
                cfg.states = explicit_numbers(t)?;
            }
            cfg.seed = o.seed.unwrap_or(cfg.seed);
            let rows = reproduce_fig1(&cfg)?;
            let mut h = Header::new();
            push(&mut h, "k", cfg.k);
            push(&mut h, "detuning_ratio", cfg.detuning_ratio);
            push(&mut h, "addend_bits", cfg.addend_bits);
            push(&mut h, "states", cfg.states.iter().map(u64::to_string).collect::<Vec<_>>().join(" "));
            push(&mut h, "seed", cfg.seed);
            let mut body = String::from(
                "addend,phase_error,phase_error_over_pi,common_phase,expected_common_phase,probability_error\n",
            );
            for r in rows {
                let _ = writeln!(
                    body,
                    "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                    r.addend,
                    r.phase_error,
                    r.phase_error / std::f64::consts::PI,
                    r.common_phase,
                    r.expected_common_phase,
                    r.probability_error
                );
            }
            emit(out, &name, &h, &body)
        }
        Figure::Fig2 => {
            let mut cfg = Fig2Config::default();
            cfg.k = o.k.unwrap_or(cfg.k);
            cfg.delta_omega = o.delta_omega.unwrap_or(cfg.delta_omega);
            cfg.addend_bits = o.addend_bits.unwrap_or(cfg.addend_bits);
            if let Some(a) = &o.addend {
                cfg.addend = a.parse().map_err(|_| CliError::Usage(format!("addend \"{a}\" is not a number")))?;
            }
            if let Some(t) = &o.initial {
                cfg.states = explicit_numbers(t)?;
            }
            cfg.map.xi_factor = o.xi_factor.unwrap_or(cfg.map.xi_factor);
            cfg.map.realizations = o.realizations.unwrap_or(cfg.map.realizations);
            cfg.map.rng_seed = o.seed.unwrap_or(cfg.map.rng_seed);
            ExactSimulator::new(ChainParams::for_adder(cfg.addend_bits, cfg.delta_omega)?, ExactConfig::default())?;
            let rows = reproduce_fig2(&cfg)?;
            let mut h = Header::new();
            push(&mut h, "k", cfg.k);
            push(&mut h, "delta_omega", cfg.delta_omega);
            push(&mut h, "addend_bits", cfg.addend_bits);
            push(&mut h, "addend", cfg.addend);
            push(&mut h, "states", cfg.states.iter().map(u64::to_string).collect::<Vec<_>>().join(" "));
            push(&mut h, "xi_factor", cfg.map.xi_factor);
            push(&mut h, "realizations", cfg.map.realizations);
            push(&mut h, "seed", cfg.map.rng_seed);
            emit(out, &name, &h, &comparison_body(&rows))
        }
        Figure::Fig3 | Figure::Fig4 => {
            unsupported(figure, &[("addend", o.addend.is_some())])?;
            let mut cfg = if figure == Figure::Fig3 { Fig3Config::default() } else { Fig3Config::fig4() };
            cfg.k = o.k.unwrap_or(cfg.k);
            cfg.delta_omega = o.delta_omega.unwrap_or(cfg.delta_omega);
            cfg.addend_bits = o.addend_bits.unwrap_or(cfg.addend_bits);
            if let Some(t) = &o.initial {
                match Initial::parse(t)? {
                    Initial::Random { useful, seed } => {
                        cfg.useful = useful;
                        cfg.seed = seed;
                    }
                    Initial::Explicit(_) => {
                        return Err(CliError::Usage("this figure draws its initial numbers: use random:M:seed".into()))
                    }
                }
            }
            cfg.map.xi_factor = o.xi_factor.unwrap_or(cfg.map.xi_factor);
            cfg.map.realizations = o.realizations.unwrap_or(cfg.map.realizations);
            cfg.map.rng_seed = o.seed.unwrap_or(cfg.map.rng_seed);
            let g = reproduce_fig3(&cfg)?;
            let mut h = Header::new();
            push(&mut h, "k", cfg.k);
            push(&mut h, "delta_omega", cfg.delta_omega);
            push(&mut h, "addend_bits", cfg.addend_bits);
            push(&mut h, "initial", format!("random:{}:{}", cfg.useful, cfg.seed));
            push(&mut h, "xi_factor", cfg.map.xi_factor);
            push(&mut h, "realizations", cfg.map.realizations);
            push(&mut h, "seed", cfg.map.rng_seed);
            growth_header(&mut h, &g);
            emit(out, &name, &h, &growth_body(&g))
        }
    }
}

pub fn verify(suppression_k: &[u32], out: Option<&Path>) -> Result<(), CliError> {
    let checks = verify_with(suppression_k)?;
    let mut body = String::from("check,passed,measured,bound\n");
    for c in &checks {
        let _ = writeln!(body, "{},{},{:.6e},{:.6e}", c.name, c.passed, c.measured, c.bound);
    }
    let mut h = Header::new();
    push(&mut h, "suppression_k", suppression_k.iter().map(u32::to_string).collect::<Vec<_>>().join(" "));
    emit(out, "verify", &h, &body)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Invariant { failed, total: checks.len() });
    }
    Ok(())
}
