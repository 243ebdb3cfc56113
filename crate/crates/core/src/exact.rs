//! Exact state-vector evolution under rectangular pulses.
//!
//! In the frame rotating at the carrier frequency the Hamiltonian of a pulse is
//! time independent, `H = diag(E - nu N) + couplings`, where `N` counts excited
//! spins. The carrier phase only enters through `exp(i phi N)`, so one
//! eigendecomposition per `(rabi, nu)` serves every pulse with that carrier.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{Mat, Parallelism, Side};
use num_bigint::BigUint;
use num_complex::Complex64;

use crate::adder::{ideal_action, Protocol};
use crate::chain::{energy_unchecked, BasisState, ChainParams};
use crate::error::{domain, Error, Result};
use crate::pulses::{wrap_phase, PulseParams};

/// Default ceiling on the chain length.
pub const DEFAULT_MAX_SPINS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorMethod {
    /// Eigendecomposition of the rotating-frame Hamiltonian.
    Eigen,
    /// Taylor series with scaling and squaring.
    ScalingSquaring,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactConfig {
    pub max_spins: usize,
    /// Upper bound on cached propagator data.
    pub cache_bytes: usize,
    pub method: PropagatorMethod,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self { max_spins: DEFAULT_MAX_SPINS, cache_bytes: 2 << 30, method: PropagatorMethod::Eigen }
    }
}

/// Full state vector in the lab frame at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    spins: usize,
    amps: Vec<Complex64>,
    time: f64,
}

impl DenseState {
    /// Superposition of basis states at `t = 0`, where the lab and
    /// interaction pictures coincide.
    pub fn from_superposition(spins: usize, terms: &[(BasisState, Complex64)]) -> Result<Self> {
        if spins > 30 {
            return domain(format!("{spins} spins is too many for a dense state"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << spins];
        for (s, c) in terms {
            if s.len() != spins {
                return Err(Error::LengthMismatch { expected: spins, found: s.len() });
            }
            amps[s.index()] += c;
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return domain(format!("initial superposition has norm^2 {norm}"));
        }
        Ok(Self { spins, amps, time: 0.0 })
    }

    pub fn basis(s: &BasisState) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << s.len()];
        amps[s.index()] = Complex64::new(1.0, 0.0);
        Self { spins: s.len(), amps, time: 0.0 }
    }

    /// Basis state with unit interaction-picture amplitude at time `t`.
    pub fn basis_at(s: &BasisState, t: f64, chain: &ChainParams) -> Self {
        let mut state = Self::basis(s);
        state.amps[s.index()] = Complex64::from_polar(1.0, -energy_unchecked(s, chain) * t);
        state.time = t;
        state
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn lab_amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probability(&self, s: &BasisState) -> f64 {
        self.amps[s.index()].norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Interaction-picture amplitude `exp(i E t) psi`.
    pub fn interaction_amplitude(&self, s: &BasisState, chain: &ChainParams) -> Complex64 {
        let e = energy_unchecked(s, chain);
        self.amps[s.index()] * Complex64::from_polar(1.0, e * self.time)
    }

    /// Most probable basis state and its probability.
    pub fn dominant(&self) -> (BasisState, f64) {
        let (i, p) = self
            .amps
            .iter()
            .map(|a| a.norm_sqr())
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p > best.1 { (i, p) } else { best });
        (BasisState::from_index(i as u64, self.spins), p)
    }
}

struct Eigen {
    vecs: Mat<f64>,
    vals: Vec<f64>,
    shift: f64,
}

struct Taylor {
    cos: Mat<f64>,
    sin: Mat<f64>,
    shift: f64,
}

enum Propagator {
    Eigen(Eigen),
    Taylor(Taylor),
}

impl Propagator {
    fn bytes(&self) -> usize {
        match self {
            Propagator::Eigen(e) => e.vecs.nrows() * e.vecs.ncols() * 8,
            Propagator::Taylor(t) => 2 * t.cos.nrows() * t.cos.ncols() * 8,
        }
    }
}

type Key = (u64, u64, u64);

struct Cache {
    budget: usize,
    used: usize,
    map: HashMap<Key, Arc<Propagator>>,
    order: VecDeque<Key>,
    built: usize,
}

impl Cache {
    fn get(&mut self, key: &Key) -> Option<Arc<Propagator>> {
        let hit = self.map.get(key).cloned();
        if hit.is_some() {
            if let Some(pos) = self.order.iter().position(|k| k == key) {
                self.order.remove(pos);
            }
            self.order.push_back(*key);
        }
        hit
    }

    fn insert(&mut self, key: Key, value: Arc<Propagator>) {
        let size = value.bytes();
        while self.used + size > self.budget {
            let Some(old) = self.order.pop_front() else { break };
            if let Some(v) = self.map.remove(&old) {
                self.used -= v.bytes();
            }
        }
        if size <= self.budget {
            self.used += size;
            self.map.insert(key, value);
            self.order.push_back(key);
        }
    }
}

/// Exact propagation engine for one chain.
pub struct ExactSimulator {
    chain: ChainParams,
    config: ExactConfig,
    energies: Vec<f64>,
    excited: Vec<u32>,
    cache: Cache,
}

/// Columns of complex vectors stored as `[re | im]`.
struct Block {
    data: Mat<f64>,
    cols: usize,
    time: f64,
}

impl ExactSimulator {
    pub fn new(chain: ChainParams, config: ExactConfig) -> Result<Self> {
        let spins = chain.spins();
        if spins > config.max_spins {
            return Err(Error::ResourceCap { spins, cap: config.max_spins });
        }
        let n = 1usize << spins;
        let mut energies = Vec::with_capacity(n);
        let mut excited = Vec::with_capacity(n);
        for i in 0..n {
            let s = BasisState::from_index(i as u64, spins);
            energies.push(energy_unchecked(&s, &chain));
            excited.push(s.count_ones());
        }
        let cache = Cache { budget: config.cache_bytes, used: 0, map: HashMap::new(), order: VecDeque::new(), built: 0 };
        Ok(Self { chain, config, energies, excited, cache })
    }

    pub fn chain(&self) -> &ChainParams {
        &self.chain
    }

    /// Number of propagators built so far, including rebuilt evictions.
    pub fn propagators_built(&self) -> usize {
        self.cache.built
    }

    /// Rotating-frame Hamiltonian of `pulse` as a dense complex matrix, `h[i][j] = <i|H|j>`.
    pub fn rotating_hamiltonian(&self, pulse: &PulseParams) -> Vec<Vec<Complex64>> {
        let n = self.energies.len();
        let mut h = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = Complex64::new(self.energies[i] - pulse.nu * self.excited[i] as f64, 0.0);
            for k in 0..self.chain.spins() {
                let sign = if i & (1 << k) != 0 { -1.0 } else { 1.0 };
                row[i ^ (1 << k)] = -0.5 * pulse.rabi * Complex64::from_polar(1.0, sign * pulse.phi);
            }
        }
        h
    }

    fn real_hamiltonian(&self, rabi: f64, nu: f64) -> (Mat<f64>, f64) {
        let n = self.energies.len();
        let diag: Vec<f64> = (0..n).map(|i| self.energies[i] - nu * self.excited[i] as f64).collect();
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shift = 0.5 * (lo + hi);
        let off = -0.5 * rabi;
        let h = Mat::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                diag[i] - shift
            } else if (i ^ j).is_power_of_two() {
                off
            } else {
                0.0
            }
        });
        (h, shift)
    }

    fn propagator(&mut self, pulse: &PulseParams) -> Arc<Propagator> {
        let key = match self.config.method {
            PropagatorMethod::Eigen => (pulse.rabi.to_bits(), pulse.nu.to_bits(), 0),
            PropagatorMethod::ScalingSquaring => (pulse.rabi.to_bits(), pulse.nu.to_bits(), pulse.tau.to_bits()),
        };
        if let Some(p) = self.cache.get(&key) {
            return p;
        }
        let (h, shift) = self.real_hamiltonian(pulse.rabi, pulse.nu);
        let prop = match self.config.method {
            PropagatorMethod::Eigen => {
                let evd = h.selfadjoint_eigendecomposition(Side::Lower);
                let vals = (0..h.nrows()).map(|i| evd.s().column_vector().read(i)).collect();
                Propagator::Eigen(Eigen { vecs: evd.u().to_owned(), vals, shift })
            }
            PropagatorMethod::ScalingSquaring => {
                let (cos, sin) = cos_sin_expm(&h, pulse.tau);
                Propagator::Taylor(Taylor { cos, sin, shift })
            }
        };
        self.cache.built += 1;
        let prop = Arc::new(prop);
        self.cache.insert(key, prop.clone());
        prop
    }

    fn apply_block(&mut self, block: &mut Block, pulse: &PulseParams) {
        if pulse.tau == 0.0 {
            return;
        }
        let prop = self.propagator(pulse);
        let n = self.energies.len();
        let m = block.cols;
        let spins = self.chain.spins();
        let enter = unit_powers(pulse.phi + pulse.nu * pulse.t0, spins);
        let leave = unit_powers(-(pulse.phi + pulse.nu * (pulse.t0 + pulse.tau)), spins);
        rotate_rows(&mut block.data, m, |i| enter[self.excited[i] as usize]);
        let shift = match &*prop {
            Propagator::Eigen(e) => {
                let mut y = Mat::<f64>::zeros(n, 2 * m);
                matmul(y.as_mut(), e.vecs.transpose(), block.data.as_ref(), None, 1.0, Parallelism::None);
                let phases: Vec<Complex64> = e.vals.iter().map(|w| Complex64::from_polar(1.0, -w * pulse.tau)).collect();
                rotate_rows(&mut y, m, |i| phases[i]);
                matmul(block.data.as_mut(), e.vecs.as_ref(), y.as_ref(), None, 1.0, Parallelism::None);
                e.shift
            }
            Propagator::Taylor(t) => {
                // (C - iS)(x + iy) = (Cx + Sy) + i(Cy - Sx)
                let re = block.data.as_ref().subcols(0, m).to_owned();
                let im = block.data.as_ref().subcols(m, m).to_owned();
                let mut new_re = Mat::<f64>::zeros(n, m);
                let mut new_im = Mat::<f64>::zeros(n, m);
                matmul(new_re.as_mut(), t.cos.as_ref(), re.as_ref(), None, 1.0, Parallelism::None);
                matmul(new_re.as_mut(), t.sin.as_ref(), im.as_ref(), Some(1.0), 1.0, Parallelism::None);
                matmul(new_im.as_mut(), t.cos.as_ref(), im.as_ref(), None, 1.0, Parallelism::None);
                matmul(new_im.as_mut(), t.sin.as_ref(), re.as_ref(), Some(1.0), -1.0, Parallelism::None);
                block.data = Mat::<f64>::from_fn(n, 2 * m, |i, j| if j < m { new_re.read(i, j) } else { new_im.read(i, j - m) });
                t.shift
            }
        };
        let global = Complex64::from_polar(1.0, -shift * pulse.tau);
        rotate_rows(&mut block.data, m, |i| leave[self.excited[i] as usize] * global);
        block.time = pulse.t0 + pulse.tau;
    }

    fn block_from(&self, states: &[&DenseState]) -> Result<Block> {
        let n = self.energies.len();
        let m = states.len();
        let time = states.first().map_or(0.0, |s| s.time);
        let mut data = Mat::<f64>::zeros(n, 2 * m);
        for (j, s) in states.iter().enumerate() {
            if s.spins != self.chain.spins() {
                return Err(Error::LengthMismatch { expected: self.chain.spins(), found: s.spins });
            }
            if s.time != time {
                return domain("batched states must share their time");
            }
            for i in 0..n {
                data.write(i, j, s.amps[i].re);
                data.write(i, j + m, s.amps[i].im);
            }
        }
        Ok(Block { data, cols: m, time })
    }

    fn unpack(&self, block: &Block, j: usize) -> DenseState {
        let n = self.energies.len();
        let m = block.cols;
        let amps = (0..n).map(|i| Complex64::new(block.data.read(i, j), block.data.read(i, j + m))).collect();
        DenseState { spins: self.chain.spins(), amps, time: block.time }
    }

    fn check_pulse(&self, state_time: f64, pulse: &PulseParams) -> Result<()> {
        if !(pulse.rabi > 0.0) || pulse.tau < 0.0 {
            return domain(format!("pulse needs rabi > 0 and tau >= 0, got {pulse:?}"));
        }
        if (pulse.t0 - state_time).abs() > 1e-9 * (1.0 + state_time.abs()) {
            return domain(format!("pulse starts at {} but the state is at {}", pulse.t0, state_time));
        }
        Ok(())
    }

    /// Advances `state` across one pulse.
    pub fn apply_pulse(&mut self, state: &mut DenseState, pulse: &PulseParams) -> Result<()> {
        self.check_pulse(state.time, pulse)?;
        let mut b = self.block_from(&[&*state])?;
        self.apply_block(&mut b, pulse);
        *state = self.unpack(&b, 0);
        state.time = pulse.t0 + pulse.tau;
        Ok(())
    }

    /// Runs `protocol` from the superposition `initial`, recording the
    /// probability error after each Q-pulse when `trace` is set.
    pub fn run(&mut self, initial: &[(BasisState, Complex64)], protocol: &Protocol, trace: TraceLevel) -> Result<ExactRun> {
        self.check_protocol(protocol)?;
        let state = DenseState::from_superposition(self.chain.spins(), initial)?;
        let mut useful: Vec<(BasisState, f64)> = initial.iter().map(|(s, c)| (s.clone(), c.norm_sqr())).collect();
        let mut block = self.block_from(&[&state])?;
        let mut rows = Vec::new();
        for i in 0..protocol.qpulse_count() {
            for pulse in protocol.physical(i) {
                self.check_pulse(block.time, pulse)?;
                self.apply_block(&mut block, pulse);
            }
            if trace != TraceLevel::None {
                for (s, _) in useful.iter_mut() {
                    protocol.apply_ideal(i, s);
                }
                let st = self.unpack(&block, 0);
                let error = useful.iter().map(|(s, p0)| (st.probability(s) - p0).abs()).sum();
                let amplitudes = (trace == TraceLevel::Amplitudes)
                    .then(|| useful.iter().map(|(s, _)| (s.clone(), st.interaction_amplitude(s, &self.chain))).collect());
                rows.push(ExactTraceRow {
                    pulse_index: protocol.physical_start(i + 1),
                    qpulse_index: i + 1,
                    probability_error: error,
                    norm_sqr: st.norm_sqr(),
                    amplitudes,
                });
            }
        }
        Ok(ExactRun { final_state: self.unpack(&block, 0), trace: rows })
    }

    /// Runs `protocol` on many basis states at once.
    pub fn run_basis_batch(&mut self, initial: &[BasisState], protocol: &Protocol) -> Result<Vec<DenseState>> {
        self.check_protocol(protocol)?;
        if initial.is_empty() {
            return Ok(Vec::new());
        }
        let states: Vec<DenseState> = initial.iter().map(DenseState::basis).collect();
        let refs: Vec<&DenseState> = states.iter().collect();
        let mut block = self.block_from(&refs)?;
        for pulse in protocol.schedule() {
            self.check_pulse(block.time, pulse)?;
            self.apply_block(&mut block, pulse);
        }
        Ok((0..initial.len()).map(|j| self.unpack(&block, j)).collect())
    }

    fn check_protocol(&self, protocol: &Protocol) -> Result<()> {
        if protocol.chain() != &self.chain {
            return domain("protocol was compiled for a different chain");
        }
        Ok(())
    }
}

fn unit_powers(angle: f64, spins: usize) -> Vec<Complex64> {
    let base = wrap_phase(angle);
    (0..=spins).map(|k| Complex64::from_polar(1.0, wrap_phase(base * k as f64))).collect()
}

fn rotate_rows(data: &mut Mat<f64>, m: usize, factor: impl Fn(usize) -> Complex64) {
    for i in 0..data.nrows() {
        let f = factor(i);
        for j in 0..m {
            let (re, im) = (data.read(i, j), data.read(i, j + m));
            data.write(i, j, re * f.re - im * f.im);
            data.write(i, j + m, re * f.im + im * f.re);
        }
    }
}

/// `cos(h t)` and `sin(h t)` for real symmetric `h`, so that
/// `exp(-i h t) = cos - i sin`.
fn cos_sin_expm(h: &Mat<f64>, t: f64) -> (Mat<f64>, Mat<f64>) {
    let n = h.nrows();
    let norm = (0..n)
        .map(|i| (0..n).map(|j| h.read(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = t / 2f64.powi(squarings);
    let b = Mat::<f64>::from_fn(n, n, |i, j| h.read(i, j) * scale);
    let b2 = &b * &b;
    let mut cos = Mat::<f64>::identity(n, n);
    let mut sin = b.clone();
    let mut even = Mat::<f64>::identity(n, n);
    let mut odd = b.clone();
    for k in 1..=12 {
        let k = k as f64;
        even = &even * &b2 * faer::scale(-1.0 / ((2.0 * k - 1.0) * (2.0 * k)));
        odd = &odd * &b2 * faer::scale(-1.0 / ((2.0 * k) * (2.0 * k + 1.0)));
        cos += &even;
        sin += &odd;
    }
    for _ in 0..squarings {
        let c2 = &cos * &cos - &sin * &sin;
        let s2 = (&cos * &sin) * faer::scale(2.0);
        cos = c2;
        sin = s2;
    }
    (cos, sin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLevel {
    None,
    Errors,
    Amplitudes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactTraceRow {
    pub pulse_index: usize,
    pub qpulse_index: usize,
    pub probability_error: f64,
    pub norm_sqr: f64,
    pub amplitudes: Option<Vec<(BasisState, Complex64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactRun {
    pub final_state: DenseState,
    pub trace: Vec<ExactTraceRow>,
}

/// CSV rendering of an exact trace.
pub fn trace_csv(rows: &[ExactTraceRow]) -> String {
    let mut out = String::from("pulse_index,qpulse_index,probability_error");
    let with_amps = rows.first().is_some_and(|r| r.amplitudes.is_some());
    if with_amps {
        out.push_str(",state,re,im");
    }
    out.push('\n');
    for r in rows {
        match &r.amplitudes {
            Some(a) if with_amps => {
                for (s, c) in a {
                    out.push_str(&format!(
                        "{},{},{:e},{},{:e},{:e}\n",
                        r.pulse_index, r.qpulse_index, r.probability_error, s, c.re, c.im
                    ));
                }
            }
            _ => out.push_str(&format!("{},{},{:e}\n", r.pulse_index, r.qpulse_index, r.probability_error)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub phase_error: f64,
    pub common_phase: f64,
    pub probability_error: f64,
}

/// Phase spread across the superposition after adding `a`.
pub fn phase_error(
    initial: &[(BasisState, Complex64)],
    final_state: &DenseState,
    a: &BigUint,
    chain: &ChainParams,
) -> Result<ErrorMetrics> {
    let l = chain.addend_bits()?;
    let mut shifts = Vec::with_capacity(initial.len());
    for (b, c0) in initial {
        let g = ideal_action(b, a, l)?;
        let c = final_state.interaction_amplitude(&g, chain);
        if c.norm() < 1e-6 {
            return Err(Error::DegenerateAmplitude { state: g.to_string(), magnitude: c.norm() });
        }
        shifts.push(c.arg() - c0.arg());
    }
    if shifts.is_empty() {
        return domain("empty superposition");
    }
    let anchor = shifts[0];
    let mean_dev = shifts.iter().map(|s| wrap_phase(s - anchor)).sum::<f64>() / shifts.len() as f64;
    let common = wrap_phase(anchor + mean_dev);
    let spread = shifts.iter().map(|s| wrap_phase(s - common).abs()).fold(0.0, f64::max);
    Ok(ErrorMetrics {
        phase_error: spread,
        common_phase: common,
        probability_error: probability_error_exact(initial, final_state, a, l)?,
    })
}

/// `sum_i | |C_{G_i}(T)|^2 - |C_{B_i}(0)|^2 |`.
pub fn probability_error_exact(
    initial: &[(BasisState, Complex64)],
    final_state: &DenseState,
    a: &BigUint,
    addend_bits: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (b, c0) in initial {
        let g = ideal_action(b, a, addend_bits)?;
        total += (final_state.probability(&g) - c0.norm_sqr()).abs();
    }
    Ok(total)
}

/// Bytes and eigendecompositions a run on `chain` would need.
pub fn resource_estimate(chain: &ChainParams) -> (usize, f64) {
    let n = 1usize << chain.spins();
    let bytes = n * n * 8;
    // faer's dense symmetric solver measured at ~1.2 s for n = 2048 on one core
    let seconds = 1.2 * (n as f64 / 2048.0).powi(3);
    (bytes, seconds)
}
