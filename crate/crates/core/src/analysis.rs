//! Figure data, addition checks and the pulse-level verification suite.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;

use crate::adder::{
    compile_full_adder, expected_global_phase, gate_phase_report, gate_sequence, GatePosition, GatePulse, Protocol,
};
use crate::chain::{decode_sum, encode_addend_register, BasisState, ChainParams};
use crate::error::{domain, Error, Result};
use crate::exact::{phase_error, ExactConfig, ExactSimulator, TraceLevel};
use crate::map::{aggregate_realizations, realization_rng, run_realizations, MapConfig, MeanRow};
use crate::pulses::{
    acquired_phase, compute_aux, expand, local_config, rabi_2pik, resonant_flip, wrap_phase, QPulse, QPulseKind,
};

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), found: ys.len() });
    }
    if xs.len() < 2 {
        return domain("a line needs at least two points");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return domain("all abscissae are equal");
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// Uniform random `bits`-bit number.
pub fn random_number<R: Rng + ?Sized>(bits: usize, rng: &mut R) -> BigUint {
    let bytes: Vec<u8> = (0..bits.div_ceil(8)).map(|_| rng.gen()).collect();
    BigUint::from_bytes_le(&bytes) % (BigUint::from(1u8) << bits)
}

/// Normalized random complex coefficients.
pub fn random_coefficients<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Complex64> {
    let raw: Vec<Complex64> =
        (0..m).map(|_| crate::map::random_unit(rng) * rng.gen_range(0.2..1.0)).collect();
    let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|c| c / norm).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Config {
    pub k: u32,
    /// `delta_omega / Omega`.
    pub detuning_ratio: f64,
    pub addend_bits: usize,
    pub states: Vec<u64>,
    pub seed: u64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self { k: 8, detuning_ratio: 1e4, addend_bits: 5, states: vec![7, 12, 16, 27], seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig1Row {
    pub addend: u64,
    pub phase_error: f64,
    pub common_phase: f64,
    pub expected_common_phase: f64,
    pub probability_error: f64,
}

/// Phase error after adding every addend to a fixed superposition.
pub fn reproduce_fig1(cfg: &Fig1Config) -> Result<Vec<Fig1Row>> {
    let aux = compute_aux(cfg.k)?;
    let chain = ChainParams::for_adder(cfg.addend_bits, cfg.detuning_ratio * aux.omega)?;
    let mut rng = realization_rng(cfg.seed, 0);
    let coeffs = random_coefficients(cfg.states.len(), &mut rng);
    let initial: Vec<(BasisState, Complex64)> = cfg
        .states
        .iter()
        .zip(coeffs)
        .map(|(&b, c)| Ok((encode_addend_register(&b.into(), cfg.addend_bits)?, c)))
        .collect::<Result<_>>()?;
    let mut sim = ExactSimulator::new(chain, ExactConfig::default())?;
    let mut rows = Vec::new();
    for a in 0..(1u64 << cfg.addend_bits) {
        let protocol = compile_full_adder(&a.into(), &aux, &chain)?;
        let run = sim.run(&initial, &protocol, TraceLevel::None)?;
        let m = phase_error(&initial, &run.final_state, &a.into(), &chain)?;
        rows.push(Fig1Row {
            addend: a,
            phase_error: m.phase_error,
            common_phase: m.common_phase,
            expected_common_phase: expected_global_phase(&protocol),
            probability_error: m.probability_error,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Config {
    pub k: u32,
    pub delta_omega: f64,
    pub addend_bits: usize,
    pub states: Vec<u64>,
    pub addend: u64,
    pub map: MapConfig,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            k: 100,
            delta_omega: 100.0,
            addend_bits: 4,
            states: vec![2, 5, 11, 12],
            addend: 6,
            map: MapConfig { realizations: 100, ..MapConfig::default() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Row {
    pub pulse_index: usize,
    pub qpulse_index: usize,
    pub exact_error: f64,
    pub map_mean: f64,
    pub map_std_error: f64,
}

/// Exact and map error curves for one equal-weight superposition.
pub fn reproduce_fig2(cfg: &Fig2Config) -> Result<Vec<Fig2Row>> {
    let aux = compute_aux(cfg.k)?;
    let chain = ChainParams::for_adder(cfg.addend_bits, cfg.delta_omega)?;
    let protocol = compile_full_adder(&cfg.addend.into(), &aux, &chain)?;
    let amp = 1.0 / (cfg.states.len() as f64).sqrt();
    let useful: Vec<(BasisState, f64)> = cfg
        .states
        .iter()
        .map(|&b| Ok((encode_addend_register(&b.into(), cfg.addend_bits)?, amp)))
        .collect::<Result<_>>()?;
    compare_exact_map(&useful, &protocol, &cfg.map)
}

/// Exact error curve of `initial` next to the realization-averaged map curve.
pub fn compare_exact_map(initial: &[(BasisState, f64)], protocol: &Protocol, map: &MapConfig) -> Result<Vec<Fig2Row>> {
    let complex: Vec<(BasisState, Complex64)> =
        initial.iter().map(|(s, a)| (s.clone(), Complex64::new(*a, 0.0))).collect();
    let mut sim = ExactSimulator::new(*protocol.chain(), ExactConfig::default())?;
    let exact = sim.run(&complex, protocol, TraceLevel::Errors)?;
    let mean = aggregate_realizations(&run_realizations(initial, protocol, map)?)?;
    Ok(exact
        .trace
        .iter()
        .zip(&mean[1..])
        .map(|(e, m)| Fig2Row {
            pulse_index: e.pulse_index,
            qpulse_index: e.qpulse_index,
            exact_error: e.probability_error,
            map_mean: m.mean_error,
            map_std_error: m.std_error,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Config {
    pub k: u32,
    pub delta_omega: f64,
    pub addend_bits: usize,
    pub useful: usize,
    /// Seed for the addend and the initial numbers.
    pub seed: u64,
    pub map: MapConfig,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self {
            k: 100,
            delta_omega: 100.0,
            addend_bits: 1000,
            useful: 20,
            seed: 3,
            map: MapConfig { realizations: 20, ..MapConfig::default() },
        }
    }
}

impl Fig3Config {
    /// Unwanted-count series: the same chain with 100 realizations.
    pub fn fig4() -> Self {
        Self { map: MapConfig { realizations: 100, ..MapConfig::default() }, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Result {
    pub rows: Vec<MeanRow>,
    pub useful: usize,
    /// Error against physical pulse count.
    pub fit_physical: LinearFit,
    /// Error against Q-pulse count.
    pub fit_qpulse: LinearFit,
    /// Unwanted states per useful state against physical pulse count.
    pub fit_counts: LinearFit,
    pub reference_slope: f64,
}

/// Map error growth for random superpositions of `useful` numbers.
pub fn reproduce_fig3(cfg: &Fig3Config) -> Result<Fig3Result> {
    let aux = compute_aux(cfg.k)?;
    let chain = ChainParams::for_adder(cfg.addend_bits, cfg.delta_omega)?;
    let mut rng = realization_rng(cfg.seed, u64::MAX);
    let a = random_number(cfg.addend_bits, &mut rng);
    let protocol = compile_full_adder(&a, &aux, &chain)?;
    let amp = 1.0 / (cfg.useful as f64).sqrt();
    let mut initial: Vec<(BasisState, f64)> = Vec::with_capacity(cfg.useful);
    while initial.len() < cfg.useful {
        let s = encode_addend_register(&random_number(cfg.addend_bits, &mut rng), cfg.addend_bits)?;
        if initial.iter().all(|(t, _)| *t != s) {
            initial.push((s, amp));
        }
    }
    map_growth(&initial, &protocol, &cfg.map)
}

/// Realization-averaged map trace of `initial` with linear fits.
pub fn map_growth(initial: &[(BasisState, f64)], protocol: &Protocol, map: &MapConfig) -> Result<Fig3Result> {
    let rows = aggregate_realizations(&run_realizations(initial, protocol, map)?)?;
    let useful = initial.len();
    let col = |f: &dyn Fn(&MeanRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let err = col(&|r| r.mean_error);
    let fit_physical = linear_fit(&col(&|r| r.pulse_index as f64), &err)?;
    let fit_qpulse = linear_fit(&col(&|r| r.qpulse_index as f64), &err)?;
    let per_state = col(&|r| r.mean_unwanted / useful as f64);
    let fit_counts = linear_fit(&col(&|r| r.pulse_index as f64), &per_state)?;
    let chain = protocol.chain();
    Ok(Fig3Result {
        rows,
        useful,
        fit_physical,
        fit_qpulse,
        fit_counts,
        reference_slope: (protocol.aux().omega / chain.delta_omega()).powi(2),
    })
}

/// Outcome of adding `addend` to the basis input `input` on the exact simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditionOutcome {
    pub addend: u64,
    pub input: u64,
    pub decoded: BigUint,
    pub probability: f64,
    pub bound: f64,
}

impl AdditionOutcome {
    pub fn passed(&self) -> bool {
        self.decoded == BigUint::from(self.addend + self.input) && self.probability >= self.bound
    }
}

/// Runs `(addend, input)` pairs through the exact simulator.
pub fn addition_outcomes(
    addend_bits: usize,
    pairs: &[(u64, u64)],
    k: u32,
    delta_omega: f64,
) -> Result<Vec<AdditionOutcome>> {
    let aux = compute_aux(k)?;
    let chain = ChainParams::for_adder(addend_bits, delta_omega)?;
    let mut sim = ExactSimulator::new(chain, ExactConfig::default())?;
    let mut addends: Vec<u64> = pairs.iter().map(|p| p.0).collect();
    addends.sort_unstable();
    addends.dedup();
    let mut out = Vec::with_capacity(pairs.len());
    for a in addends {
        let inputs: Vec<u64> = pairs.iter().filter(|p| p.0 == a).map(|p| p.1).collect();
        let protocol = compile_full_adder(&a.into(), &aux, &chain)?;
        let bound = 1.0 - 2.0 * protocol.physical_pulse_count() as f64 * (aux.omega / delta_omega).powi(2);
        let states: Vec<BasisState> =
            inputs.iter().map(|&b| encode_addend_register(&b.into(), addend_bits)).collect::<Result<_>>()?;
        for (b, st) in inputs.iter().zip(sim.run_basis_batch(&states, &protocol)?) {
            let (s, p) = st.dominant();
            out.push(AdditionOutcome { addend: a, input: *b, decoded: decode_sum(&s, addend_bits), probability: p, bound });
        }
    }
    Ok(out)
}

/// One verified invariant with the measured value behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
}

impl Check {
    fn at_most(name: String, measured: f64, bound: f64) -> Self {
        Self { name, passed: measured <= bound, measured, bound }
    }
}

const KINDS: [QPulseKind; 5] =
    [QPulseKind::Q01, QPulseKind::Q00, QPulseKind::Q11, QPulseKind::Q0Edge, QPulseKind::Q1Edge];

/// Spins a Q-pulse of `kind` may target on a 3-spin chain.
fn targets(kind: QPulseKind) -> &'static [usize] {
    if kind.is_edge() {
        &[0, 2]
    } else {
        &[1]
    }
}

/// Probability that a suppressed pattern still flips, worst case over all kinds and patterns.
pub fn check_suppression(ks: &[u32], delta_omega: f64) -> Result<Vec<Check>> {
    let chain = ChainParams::new(3, delta_omega)?;
    let mut sim = ExactSimulator::new(chain, ExactConfig::default())?;
    let mut out = Vec::new();
    for &k in ks {
        let aux = compute_aux(k)?;
        let bound = 10.0 * (rabi_2pik(k) / delta_omega).powi(2);
        for kind in KINDS {
            let mut worst: f64 = 0.0;
            for &spin in targets(kind) {
                let q = QPulse::new(kind, spin, 0.3);
                for idx in 0..8 {
                    let s = BasisState::from_index(idx, 3);
                    if resonant_flip(kind, &s, spin) {
                        continue;
                    }
                    let mut st = crate::exact::DenseState::basis(&s);
                    for p in expand(&q, &aux, &chain, 0.0)? {
                        sim.apply_pulse(&mut st, &p)?;
                    }
                    worst = worst.max(st.probability(&s.flipped(spin)));
                }
            }
            out.push(Check::at_most(format!("suppression {kind} K={k}"), worst, bound));
        }
    }
    Ok(out)
}

/// Every table row against exact evolution on three spins.
pub fn check_tables(k: u32, detuning_ratio: f64) -> Result<Vec<Check>> {
    let aux = compute_aux(k)?;
    let chain = ChainParams::new(3, detuning_ratio * aux.omega)?;
    let mut sim = ExactSimulator::new(chain, ExactConfig::default())?;
    let (phi, t0) = (0.7, 13.0);
    let mut out = Vec::new();
    for kind in KINDS {
        for &spin in targets(kind) {
            let q = QPulse::new(kind, spin, phi);
            for idx in 0..8 {
                let s = BasisState::from_index(idx, 3);
                let config = local_config(&s, spin);
                // an edge rule ignores the far spin
                let far = if spin == 0 { 4 } else { 1 };
                if kind.is_edge() && idx & far != 0 {
                    continue;
                }
                let (want, flips) = acquired_phase(kind, config, phi, &aux)?;
                let mut st = crate::exact::DenseState::basis_at(&s, t0, &chain);
                for p in expand(&q, &aux, &chain, t0)? {
                    sim.apply_pulse(&mut st, &p)?;
                }
                let target = if flips { s.flipped(spin) } else { s.clone() };
                let c = st.interaction_amplitude(&target, &chain);
                let dev = if c.norm_sqr() > 0.5 { wrap_phase(c.arg() - want).abs() } else { PI };
                out.push(Check::at_most(format!("table {kind} spin {spin} {s}"), dev, 1e-2));
            }
        }
    }
    Ok(out)
}

/// Symbolic phase-correctedness and logic of every gate sequence.
pub fn check_gate_phases() -> Result<Vec<Check>> {
    let cases = [
        (GatePosition::Right, 3),
        (GatePosition::Right, 5),
        (GatePosition::Middle, 7),
        (GatePosition::Left, 5),
        (GatePosition::Left, 7),
    ];
    let mut out = Vec::new();
    for (pos, spins) in cases {
        for bit in [false, true] {
            out.push(check_gate(&gate_sequence(pos, bit, spins), pos, bit, spins)?);
        }
    }
    Ok(out)
}

/// One gate sequence; distinct acquired phases count as failures.
pub fn check_gate(seq: &[GatePulse], pos: GatePosition, bit: bool, spins: usize) -> Result<Check> {
    let r = gate_phase_report(seq, pos, bit, spins, false)?;
    let bad = r.cases.iter().filter(|c| !(c.phase - r.cases[0].phase).is_zero_mod_2pi()).count()
        + r.cases.iter().filter(|c| !c.logic_ok).count();
    Ok(Check {
        name: format!("gate {pos:?} F({}) on {spins} spins", bit as u8),
        passed: bad == 0,
        measured: bad as f64,
        bound: 0.0,
    })
}

/// Resonant-rule evolution against classical addition for random operands.
pub fn check_classical(addend_bits: usize, samples: usize, seed: u64) -> Result<Check> {
    let aux = compute_aux(100)?;
    let chain = ChainParams::for_adder(addend_bits, 100.0)?;
    let mut rng = realization_rng(seed, 0);
    let mut bad = 0;
    for _ in 0..samples {
        let a = random_number(addend_bits, &mut rng);
        let b = random_number(addend_bits, &mut rng);
        let protocol = compile_full_adder(&a, &aux, &chain)?;
        let mut s = encode_addend_register(&b, addend_bits)?;
        for i in 0..protocol.qpulse_count() {
            protocol.apply_ideal(i, &mut s);
        }
        if decode_sum(&s, addend_bits) != a + b {
            bad += 1;
        }
    }
    Ok(Check {
        name: format!("classical oracle l={addend_bits} x{samples}"),
        passed: bad == 0,
        measured: bad as f64,
        bound: 0.0,
    })
}

/// The whole pulse-level suite at its default parameters.
pub fn verify_all() -> Result<Vec<Check>> {
    verify_with(&[4, 8, 100])
}

/// The pulse-level suite with suppression checked at each of `suppression_k`.
pub fn verify_with(suppression_k: &[u32]) -> Result<Vec<Check>> {
    let mut out = check_suppression(suppression_k, 100.0)?;
    out.extend(check_tables(8, 1e4)?);
    out.extend(check_gate_phases()?);
    for l in [1, 2, 8, 64] {
        out.push(check_classical(l, 16, 5)?);
    }
    Ok(out)
}
