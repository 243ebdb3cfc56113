//! F-gate protocols, full-adder compilation and the protocol text format.

use std::fmt::Write as _;

use num_bigint::BigUint;

use crate::chain::{classical_full_adder, BasisState, ChainParams};
use crate::error::{domain, Error, Result};
use crate::pulses::{
    compute_aux, expand, local_config, phase_entry, resonant_flip, wrap_phase, AuxiliaryConstants, PhaseExpr,
    PulseParams, QPulse, QPulseKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GatePosition {
    Right,
    Middle,
    Left,
}

/// F-gate adding one addend bit around center spin `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FGate {
    pub addend_bit: bool,
    pub position: GatePosition,
    pub k: usize,
}

impl FGate {
    /// Gate for addend bit `j` of an `l`-bit adder.
    pub fn for_bit(j: usize, addend_bit: bool, addend_bits: usize) -> Self {
        let position = if j == 0 {
            GatePosition::Right
        } else if j + 1 == addend_bits {
            GatePosition::Left
        } else {
            GatePosition::Middle
        };
        Self { addend_bit, position, k: 2 * j + 1 }
    }

    pub fn validate(&self, spins: usize) -> Result<()> {
        let k = self.k;
        let ok = match self.position {
            GatePosition::Right => k == 1 && spins >= 3,
            GatePosition::Left => spins >= 5 && k + 2 == spins,
            GatePosition::Middle => k % 2 == 1 && k >= 3 && k + 4 <= spins,
        };
        if ok {
            Ok(())
        } else {
            domain(format!("{:?} gate cannot be centered on spin {k} of a {spins}-spin chain", self.position))
        }
    }
}

/// One row of a gate protocol: pulse kind, target relative to the center, phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatePulse {
    pub kind: QPulseKind,
    pub offset: i8,
    pub phase: PhaseExpr,
}

const fn gp(kind: QPulseKind, offset: i8, pi: i32, alpha: i32, gamma: i32, theta: i32, big_theta: i32) -> GatePulse {
    GatePulse { kind, offset, phase: PhaseExpr::half(pi, alpha, gamma, theta, big_theta) }
}

use QPulseKind::{Q0Edge as E0, Q1Edge as E1, Q00, Q01, Q11};

// Rows in application order; phases in half units of (pi, alpha, gamma, theta, Theta).
const MIDDLE_0: [GatePulse; 13] = [
    gp(Q11, 0, 0, 0, -2, 0, -4),
    gp(Q00, 1, 0, 28, 14, 2, -16),
    gp(Q00, 0, 1, 0, -8, -6, 8),
    gp(Q00, 1, 0, 10, 0, -2, 0),
    gp(Q11, -1, 2, 10, 10, 5, -14),
    gp(Q01, -1, 2, 4, 4, 2, -4),
    gp(Q01, -1, 0, 0, 0, 0, 0),
    gp(Q00, 0, 0, -22, -16, -4, 20),
    gp(Q01, 0, 2, -14, -10, -1, 14),
    gp(Q11, 0, 0, -2, 0, 2, 0),
    gp(Q00, -1, 0, 0, 0, 0, 0),
    gp(Q00, 0, 0, 0, 0, 0, 0),
    gp(Q01, 0, 0, 0, 0, 0, 0),
];

const MIDDLE_1: [GatePulse; 15] = [
    gp(Q11, 0, 2, 2, -4, -6, -8),
    gp(Q00, -1, -1, 2, 6, 3, -2),
    gp(Q01, -1, -1, 0, -2, 1, 6),
    gp(Q11, -1, -1, 2, -6, -1, 6),
    gp(Q11, 0, 0, -2, -8, -6, 0),
    gp(Q00, 0, -1, 0, 0, -2, 0),
    gp(Q00, 1, 0, 0, 0, 0, 0),
    gp(Q00, 0, 0, 0, 0, 0, 0),
    gp(Q00, 1, 0, 0, 0, 0, 0),
    gp(Q11, -1, 2, -2, -6, -1, 6),
    gp(Q01, 0, 0, 0, 0, 0, 0),
    gp(Q11, 0, 0, 0, 0, 0, 0),
    gp(Q00, -1, 0, 0, 0, 0, 0),
    gp(Q01, 0, 0, 0, 0, 0, 0),
    gp(Q11, 0, 0, 0, 0, 0, 0),
];

const LEFT_0: [GatePulse; 13] = [
    gp(Q11, 0, 0, 0, -2, -2, 0),
    gp(E0, 1, 0, 2, 14, 3, -16),
    gp(Q00, 0, -1, 0, -6, 0, 6),
    gp(E0, 1, 0, -2, 0, 0, 0),
    gp(Q11, -1, 2, 0, 10, 0, -14),
    gp(Q01, -1, 2, 4, 4, 2, -4),
    gp(Q01, -1, 0, 0, 0, 0, 0),
    gp(Q00, 0, 0, 0, -16, 0, 20),
    gp(Q01, 0, 2, 0, -10, 0, 14),
    gp(Q11, 0, 0, 4, 0, 0, 0),
    gp(Q00, -1, 0, -2, 0, -2, 0),
    gp(Q00, 0, 0, 8, 0, 3, 0),
    gp(Q01, 0, 0, 0, 0, 0, 0),
];

const LEFT_1: [GatePulse; 15] = [
    gp(Q11, 0, 2, -2, -4, -5, -4),
    gp(Q00, -1, -1, 2, 6, 2, -2),
    gp(Q01, -1, -1, 0, -2, 0, 6),
    gp(Q11, -1, -1, 2, -6, -2, 6),
    gp(Q11, 0, 0, -4, -8, -2, 4),
    gp(Q00, 0, 1, 2, -2, -4, -2),
    gp(E0, 1, 0, 0, 0, 1, 0),
    gp(Q00, 0, 0, 0, 0, 0, 0),
    gp(E0, 1, 0, 0, 0, 0, 0),
    gp(Q11, -1, 2, 0, -6, 0, 6),
    gp(Q01, 0, 0, 0, 0, 0, 0),
    gp(Q11, 0, 0, 2, 0, 1, 0),
    gp(Q00, -1, 0, 0, 0, 0, 0),
    gp(Q01, 0, 0, 0, 0, 0, 0),
    gp(Q11, 0, 0, 0, 0, 0, 0),
];

const RIGHT_0: [GatePulse; 3] = [
    gp(Q01, 0, -1, 6, 0, 0, 0),
    gp(Q01, 1, 0, 0, 0, 0, 0),
    gp(E1, -1, 0, 0, 0, 0, 0),
];

const RIGHT_1: [GatePulse; 2] = [gp(Q01, 0, 1, 8, 0, 0, 0), gp(E0, -1, 1, 4, 0, 0, 0)];

/// Protocol rows of a gate on a chain of `spins` spins. On a 3-spin chain the
/// right gate's pulse on spin 2 hits the edge and uses the edge variant.
pub fn gate_sequence(position: GatePosition, addend_bit: bool, spins: usize) -> Vec<GatePulse> {
    match (position, addend_bit) {
        (GatePosition::Right, false) => {
            let mut v = RIGHT_0.to_vec();
            if spins == 3 {
                v[1].kind = E1;
            }
            v
        }
        (GatePosition::Right, true) => RIGHT_1.to_vec(),
        (GatePosition::Middle, false) => MIDDLE_0.to_vec(),
        (GatePosition::Middle, true) => MIDDLE_1.to_vec(),
        (GatePosition::Left, false) => LEFT_0.to_vec(),
        (GatePosition::Left, true) => LEFT_1.to_vec(),
    }
}

/// Logical pulse with its phase kept symbolic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolicQPulse {
    pub kind: QPulseKind,
    pub k: usize,
    pub phase: PhaseExpr,
}

impl SymbolicQPulse {
    pub fn resolve(&self, aux: &AuxiliaryConstants) -> QPulse {
        QPulse::new(self.kind, self.k, wrap_phase(self.phase.eval(aux)))
    }
}

/// Symbolic pulse list of `g` on a chain of `spins` spins.
pub fn compile_fgate_symbolic(g: &FGate, spins: usize) -> Result<Vec<SymbolicQPulse>> {
    g.validate(spins)?;
    let seq = gate_sequence(g.position, g.addend_bit, spins);
    Ok(seq
        .iter()
        .map(|r| SymbolicQPulse { kind: r.kind, k: (g.k as isize + r.offset as isize) as usize, phase: r.phase })
        .collect())
}

pub fn compile_fgate(g: &FGate, aux: &AuxiliaryConstants, spins: usize) -> Result<Vec<QPulse>> {
    Ok(compile_fgate_symbolic(g, spins)?.iter().map(|q| q.resolve(aux)).collect())
}

/// Timed pulse program for one addend.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    chain: ChainParams,
    aux: AuxiliaryConstants,
    qpulses: Vec<QPulse>,
    symbolic: Option<Vec<PhaseExpr>>,
    schedule: Vec<PulseParams>,
    /// `schedule[starts[i]..starts[i + 1]]` realizes `qpulses[i]`.
    starts: Vec<usize>,
}

impl Protocol {
    /// Expands `qpulses` back to back from `t = 0`.
    pub fn from_qpulses(chain: ChainParams, aux: AuxiliaryConstants, qpulses: Vec<QPulse>) -> Result<Self> {
        let mut schedule = Vec::with_capacity(qpulses.len() * 2);
        let mut starts = Vec::with_capacity(qpulses.len() + 1);
        let mut t = 0.0;
        for q in &qpulses {
            starts.push(schedule.len());
            let pulses = expand(q, &aux, &chain, t)?;
            t = pulses.last().map_or(t, |p| p.end());
            schedule.extend(pulses);
        }
        starts.push(schedule.len());
        Ok(Self { chain, aux, qpulses, symbolic: None, schedule, starts })
    }

    pub fn chain(&self) -> &ChainParams {
        &self.chain
    }

    pub fn aux(&self) -> &AuxiliaryConstants {
        &self.aux
    }

    pub fn qpulses(&self) -> &[QPulse] {
        &self.qpulses
    }

    /// Symbolic phases, when compiled from the gate tables.
    pub fn symbolic_phases(&self) -> Option<&[PhaseExpr]> {
        self.symbolic.as_deref()
    }

    pub fn schedule(&self) -> &[PulseParams] {
        &self.schedule
    }

    /// Physical pulses of Q-pulse `i`.
    pub fn physical(&self, i: usize) -> &[PulseParams] {
        &self.schedule[self.starts[i]..self.starts[i + 1]]
    }

    /// Index of the first physical pulse of each Q-pulse.
    pub fn physical_start(&self, i: usize) -> usize {
        self.starts[i]
    }

    pub fn qpulse_count(&self) -> usize {
        self.qpulses.len()
    }

    pub fn physical_pulse_count(&self) -> usize {
        self.schedule.len()
    }

    pub fn total_time(&self) -> f64 {
        self.schedule.last().map_or(0.0, |p| p.end())
    }

    /// Resonant bit dynamics of Q-pulse `i` on `s`; returns whether it flipped.
    pub fn apply_ideal(&self, i: usize, s: &mut BasisState) -> bool {
        let q = &self.qpulses[i];
        let f = resonant_flip(q.kind, s, q.k);
        if f {
            s.flip(q.k);
        }
        f
    }

    /// Serializes the schedule, one physical pulse per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# spins={}", self.chain.spins());
        let _ = writeln!(out, "# K={}", self.aux.k);
        let _ = writeln!(out, "# omega0={}", self.chain.omega0());
        let _ = writeln!(out, "# delta_omega={}", self.chain.delta_omega());
        let _ = writeln!(out, "# qpulses={}", self.qpulse_count());
        let _ = writeln!(out, "# physical_pulses={}", self.physical_pulse_count());
        let _ = writeln!(out, "# total_time={}", self.total_time());
        let _ = writeln!(out, "# index kind k rabi nu tau phi t0");
        for (i, q) in self.qpulses.iter().enumerate() {
            for (j, p) in self.physical(i).iter().enumerate() {
                let kind = if j == 0 { q.kind.label().to_string() } else { format!("{}c", q.kind.label()) };
                let _ = writeln!(
                    out,
                    "{} {} {} {} {} {} {} {}",
                    self.starts[i] + j,
                    kind,
                    q.k,
                    p.rabi,
                    p.nu,
                    p.tau,
                    p.phi,
                    p.t0
                );
            }
        }
        out
    }

    /// Parses [`Protocol::to_text`] output and checks it against a fresh expansion.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut spins = None;
        let mut k_param = None;
        let mut omega0 = 0.0;
        let mut delta_omega = None;
        let mut qpulses = Vec::new();
        let mut lines_seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                if let Some((key, val)) = h.trim().split_once('=') {
                    let val = val.trim();
                    match key.trim() {
                        "spins" => spins = Some(val.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                        "K" => k_param = Some(val.parse::<u32>().map_err(|e| perr(e.to_string()))?),
                        "omega0" => omega0 = val.parse::<f64>().map_err(|e| perr(e.to_string()))?,
                        "delta_omega" => delta_omega = Some(val.parse::<f64>().map_err(|e| perr(e.to_string()))?),
                        _ => {}
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 8 {
                return Err(perr(format!("expected 8 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("{s}: {e}")));
            let index: usize = f[0].parse().map_err(|e| perr(format!("{}: {e}", f[0])))?;
            let k: usize = f[2].parse().map_err(|e| perr(format!("{}: {e}", f[2])))?;
            let p = PulseParams { rabi: num(f[3])?, nu: num(f[4])?, tau: num(f[5])?, phi: num(f[6])?, t0: num(f[7])? };
            let (label, correction) = match f[1].strip_suffix('c') {
                Some(base) => (base, true),
                None => (f[1], false),
            };
            let kind = QPulseKind::from_label(label).ok_or_else(|| perr(format!("unknown pulse kind {}", f[1])))?;
            if !correction {
                qpulses.push(QPulse::new(kind, k, p.phi));
            }
            lines_seen.push((line_no, index, p));
        }
        let missing = |what: &str| Error::Parse { line: 0, msg: format!("missing '# {what}=' header") };
        let spins = spins.ok_or_else(|| missing("spins"))?;
        let aux = compute_aux(k_param.ok_or_else(|| missing("K"))?)?;
        let chain = ChainParams::new(spins, delta_omega.ok_or_else(|| missing("delta_omega"))?)?.with_omega0(omega0);
        let proto = Self::from_qpulses(chain, aux, qpulses)?;
        if proto.schedule.len() != lines_seen.len() {
            return Err(Error::Parse { line: 0, msg: "composite pulses are incomplete".into() });
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        for (i, (line, index, p)) in lines_seen.iter().enumerate() {
            let q = &proto.schedule[i];
            let same = *index == i
                && close(p.rabi, q.rabi)
                && close(p.nu, q.nu)
                && close(p.tau, q.tau)
                && close(wrap_phase(p.phi - q.phi), 0.0)
                && close(p.t0, q.t0);
            if !same {
                return Err(Error::Parse { line: *line, msg: "pulse disagrees with the expanded schedule".into() });
            }
        }
        Ok(proto)
    }
}

/// Full-adder protocol adding `a` to an `l`-bit register.
pub fn compile_full_adder(a: &BigUint, aux: &AuxiliaryConstants, chain: &ChainParams) -> Result<Protocol> {
    let l = chain.addend_bits()?;
    if a.bits() > l as u64 {
        return domain(format!("addend {a} does not fit in {l} bits"));
    }
    let spins = chain.spins();
    let mut sym = Vec::new();
    for j in 0..l {
        let g = FGate::for_bit(j, a.bit(j as u64), l);
        sym.extend(compile_fgate_symbolic(&g, spins)?);
    }
    let qpulses = sym.iter().map(|q| q.resolve(aux)).collect();
    let mut p = Protocol::from_qpulses(*chain, *aux, qpulses)?;
    p.symbolic = Some(sym.iter().map(|q| q.phase).collect());
    Ok(p)
}

/// Checks the carry and addend layout of an encoded register.
pub fn validate_register(s: &BasisState, addend_bits: usize) -> Result<()> {
    if s.len() != 2 * addend_bits + 1 {
        return Err(Error::LengthMismatch { expected: 2 * addend_bits + 1, found: s.len() });
    }
    if s.bit(0) || (1..s.len()).step_by(2).any(|k| s.bit(k)) {
        return domain(format!("{s} has a set carry or sum slot"));
    }
    Ok(())
}

/// Classical result of adding `a` to the register `s`, gate by gate.
pub fn ideal_action(s: &BasisState, a: &BigUint, addend_bits: usize) -> Result<BasisState> {
    validate_register(s, addend_bits)?;
    if a.bits() > addend_bits as u64 {
        return domain(format!("addend {a} does not fit in {addend_bits} bits"));
    }
    let mut out = s.clone();
    for j in 0..addend_bits {
        let k = 2 * j + 1;
        let (c, b) = (out.bit(k - 1), out.bit(k + 1));
        let (sum, carry) = classical_full_adder(a.bit(j as u64), b, c);
        out.set(k - 1, sum);
        out.set(k, b);
        out.set(k + 1, carry);
    }
    Ok(out)
}

/// Phase every branch of the superposition acquires.
pub fn expected_global_phase(protocol: &Protocol) -> f64 {
    wrap_phase(-3.0 * protocol.aux().alpha)
}

/// Phase and logic of one gate on one input pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCase {
    pub input: BasisState,
    pub output: BasisState,
    pub phase: PhaseExpr,
    pub logic_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub position: GatePosition,
    pub addend_bit: bool,
    pub cases: Vec<GateCase>,
}

impl GateReport {
    /// All input patterns acquire the same phase modulo `2 pi`.
    pub fn is_phase_corrected(&self) -> bool {
        self.cases.windows(2).all(|w| (w[0].phase - w[1].phase).is_zero_mod_2pi())
    }

    pub fn logic_ok(&self) -> bool {
        self.cases.iter().all(|c| c.logic_ok)
    }

    pub fn common_phase(&self) -> Option<PhaseExpr> {
        self.is_phase_corrected().then(|| self.cases[0].phase.reduced())
    }
}

/// Runs `seq` symbolically over every input pattern a gate at `position` can
/// meet inside an adder on `spins` spins.
pub fn gate_phase_report(
    seq: &[GatePulse],
    position: GatePosition,
    addend_bit: bool,
    spins: usize,
    k_odd: bool,
) -> Result<GateReport> {
    let k = match position {
        GatePosition::Right => 1,
        GatePosition::Middle => 3,
        GatePosition::Left => spins.saturating_sub(2),
    };
    FGate { addend_bit, position, k }.validate(spins)?;
    // free inputs: addend bit b at k+1, carry c at k-1, earlier addend bit at k-2
    let patterns: Vec<(bool, bool, bool)> = match position {
        GatePosition::Right => vec![(false, false, false), (true, false, false)],
        _ => (0..8).map(|x| (x & 1 == 1, x & 2 == 2, x & 4 == 4)).collect(),
    };
    let mut cases = Vec::new();
    for (b, c, prev) in patterns {
        let mut s = BasisState::zeros(spins);
        s.set(k + 1, b);
        s.set(k - 1, c);
        if k >= 2 {
            s.set(k - 2, prev);
        }
        let input = s.clone();
        let mut phase = PhaseExpr::ZERO;
        for r in seq {
            let target = (k as isize + r.offset as isize) as usize;
            let e = phase_entry(r.kind, local_config(&s, target), k_odd)?;
            phase = phase + e.expr + e.phi_coeff * r.phase;
            if e.flip {
                s.flip(target);
            }
        }
        let (sum, carry) = classical_full_adder(addend_bit, b, c);
        let mut want = input.clone();
        want.set(k - 1, sum);
        want.set(k, b);
        want.set(k + 1, carry);
        cases.push(GateCase { logic_ok: s == want, input, output: s, phase });
    }
    Ok(GateReport { position, addend_bit, cases })
}
