//! Perturbative quantum map.
//!
//! Useful states follow the resonant flip rules exactly. Every Q-pulse leaks
//! first-order amplitude into states carrying one extra nonresonant flip; the
//! physical pulses of a composite Q-pulse are combined coherently. Each map
//! step gives those amplitudes independent random phases and accumulates them
//! in a pruned ledger of unwanted states.

use std::fmt::Write as _;

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smallvec::{smallvec, SmallVec};

use crate::adder::Protocol;
use crate::chain::{energy_unchecked, BasisState, ChainParams, ISING_J};
use crate::error::{domain, Error, Result};
use crate::pulses::{flip_rule, rule_neighbors, PulseParams, QPulse};

/// Spins whose leakage bound falls below `xi / WINDOW_DIVISOR` are skipped.
pub const WINDOW_DIVISOR: f64 = 1.0;
const REANCHOR_EVERY: usize = 1024;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapConfig {
    /// Pruning threshold in units of `(Omega / delta_omega)^2 / M`.
    pub xi_factor: f64,
    pub realizations: usize,
    pub rng_seed: u64,
    pub track_counts: bool,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { xi_factor: 1e-3, realizations: 1, rng_seed: 0x5eed_2001, track_counts: true }
    }
}

impl MapConfig {
    /// Absolute pruning threshold for `useful` tracked states.
    pub fn threshold(&self, protocol: &Protocol, useful: usize) -> f64 {
        let r = protocol.aux().omega / protocol.chain().delta_omega();
        self.xi_factor * r * r / useful.max(1) as f64
    }
}

/// Generator for one realization.
pub fn realization_rng(seed: u64, realization: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    rng
}

/// Uniformly distributed point on the unit circle.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    loop {
        let x = 2.0 * rng.gen::<f64>() - 1.0;
        let y = 2.0 * rng.gen::<f64>() - 1.0;
        let r2 = x * x + y * y;
        if r2 > 1e-12 && r2 <= 1.0 {
            return Complex64::new(x, y) / r2.sqrt();
        }
    }
}

/// Detunings for a pulse on spin `k` leaking into spin `kp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub eta: f64,
    pub delta: f64,
    pub big_delta: f64,
    pub d: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub big_lambda: f64,
}

impl TransitionParams {
    /// Reference evaluation from the state energies.
    pub fn new(source: &BasisState, k: usize, kp: usize, pulse: &PulseParams, chain: &ChainParams) -> Result<Self> {
        let n = chain.spins();
        if source.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: source.len() });
        }
        if k >= n || kp >= n || k == kp {
            return domain(format!("need distinct spins below {n}, got {k} and {kp}"));
        }
        let e = |s: &BasisState| energy_unchecked(s, chain);
        let i = source;
        let j = i.flipped(k);
        let m = i.flipped(kp);
        let nn = j.flipped(kp);
        let sigma = if i.bit(kp) { -1.0 } else { 1.0 };
        let nu = pulse.nu;
        let (eta, delta, big_delta, base) = if !i.bit(k) {
            (1.0, e(&j) - e(i) - nu, e(&nn) - e(&m) - nu, e(&m) - e(i))
        } else {
            (-1.0, e(i) - e(&j) - nu, e(&m) - e(&nn) - nu, e(&nn) - e(&j))
        };
        let d = base - sigma * nu + 0.5 * (big_delta - delta);
        Ok(Self {
            eta,
            delta,
            big_delta,
            d,
            sigma,
            lambda: pulse.rabi.hypot(delta),
            big_lambda: pulse.rabi.hypot(big_delta),
        })
    }

    /// `(|C_m|, |C_n|)` at the end of a pulse of length `tau`.
    pub fn magnitudes(&self, rabi: f64, tau: f64) -> (f64, f64) {
        let e = Complex64::from_polar(1.0, self.d * tau);
        let (sl, cl) = (0.5 * self.lambda * tau).sin_cos();
        let (sb, cb) = (0.5 * self.big_lambda * tau).sin_cos();
        let w = Complex64::new(cl, self.eta * self.delta / self.lambda * sl);
        let scale = rabi / (2.0 * self.d.abs());
        let cm = (Complex64::from(cb) - w * e).norm();
        let cn = (Complex64::from(rabi / self.big_lambda * sb) - e * (rabi / self.lambda * sl)).norm();
        (scale * cm, scale * cn)
    }
}

/// One first-order leakage amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub state: BasisState,
    pub magnitude: f64,
    pub amplitude: Complex64,
}

/// All first-order partners of `source` under one pulse on spin `k`, with random phases.
///
/// Every `kp != k` yields the single flip `source ^ kp` and the double flip `source ^ k ^ kp`.
pub fn nonresonant_amplitudes<R: Rng + ?Sized>(
    source: &BasisState,
    k: usize,
    pulse: &PulseParams,
    chain: &ChainParams,
    rng: &mut R,
) -> Result<Vec<Contribution>> {
    let mut out = Vec::with_capacity(2 * chain.spins());
    for kp in (0..chain.spins()).filter(|&kp| kp != k) {
        let [cm, cn] = qpulse_leakage(source, k, kp, std::slice::from_ref(pulse), chain)?;
        let (cm, cn) = (cm.norm(), cn.norm());
        out.push(Contribution { state: source.flipped(kp), magnitude: cm, amplitude: cm * random_unit(rng) });
        out.push(Contribution {
            state: source.flipped(k).flipped(kp),
            magnitude: cn,
            amplitude: cn * random_unit(rng),
        });
    }
    Ok(out)
}

/// Transition frequency of spin `k` in `s`.
fn frequency(s: &BasisState, k: usize, chain: &ChainParams) -> f64 {
    let n = s.len();
    let mut f = chain.larmor(k);
    if k > 0 {
        f += 2.0 * ISING_J * s.z(k - 1);
    }
    if k + 1 < n {
        f += 2.0 * ISING_J * s.z(k + 1);
    }
    f
}

fn raise_sign(s: &BasisState, k: usize) -> f64 {
    if s.bit(k) {
        -1.0
    } else {
        1.0
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn mul(a: &Mat2, v: [Complex64; 2]) -> [Complex64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Real symmetric block `[[a, c], [c, b]]` in a rotating frame.
#[derive(Clone, Copy)]
struct Block {
    a: f64,
    b: f64,
    c: f64,
    mu: f64,
    r: f64,
}

impl Block {
    fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, mu: 0.5 * (a + b), r: (0.5 * (a - b)).hypot(c) }
    }

    fn propagator(&self, tau: f64) -> Mat2 {
        let g = Complex64::from_polar(1.0, -self.mu * tau);
        let (s, co) = (self.r * tau).sin_cos();
        let sr = if self.r > 0.0 { s / self.r } else { tau };
        let i = Complex64::i();
        [
            [g * (co - i * sr * (self.a - self.mu)), g * (-i * sr * self.c)],
            [g * (-i * sr * self.c), g * (co - i * sr * (self.b - self.mu))],
        ]
    }

    /// Eigenvalues with their projectors.
    fn spectrum(&self) -> [(f64, [[f64; 2]; 2]); 2] {
        let h = [[self.a - self.mu, self.c], [self.c, self.b - self.mu]];
        let proj = |sign: f64| {
            let x = if self.r > 0.0 { sign / self.r } else { 0.0 };
            let d = if self.r > 0.0 { 0.5 } else { 0.5 + 0.5 * sign };
            [[d + 0.5 * x * h[0][0], 0.5 * x * h[0][1]], [0.5 * x * h[1][0], d + 0.5 * x * h[1][1]]]
        };
        [(self.mu + self.r, proj(1.0)), (self.mu - self.r, proj(-1.0))]
    }
}

/// First-order block carrying `{i, j}` into `{m, n}` under the weak coupling `-rabi / 2`.
fn first_order(from: &Block, to: &Block, rabi: f64, tau: f64) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (b, q) in to.spectrum() {
        for (a, p) in from.spectrum() {
            let f = (Complex64::from_polar(1.0, -a * tau) - Complex64::from_polar(1.0, -b * tau)) * (0.5 * rabi / (b - a));
            for r in 0..2 {
                for c in 0..2 {
                    let qp = q[r][0] * p[0][c] + q[r][1] * p[1][c];
                    out[r][c] += f * qp;
                }
            }
        }
    }
    out
}

/// Frame change between consecutive physical pulses, as a phase per excitation.
fn frame_phase(prev: &PulseParams, next: &PulseParams) -> f64 {
    next.phi - prev.phi + (next.nu - prev.nu) * next.t0
}

/// First-order amplitudes in `pre ^ kp` and `pre ^ k ^ kp` after the physical pulses of one Q-pulse on `k`.
///
/// The four levels `pre`, `pre ^ k`, `pre ^ kp`, `pre ^ k ^ kp` are evolved in the rotating frame of
/// each pulse. The weak `kp` coupling is kept to first order. Each returned amplitude is fixed up to a
/// phase that depends on its target state only.
pub fn qpulse_leakage(
    pre: &BasisState,
    k: usize,
    kp: usize,
    physical: &[PulseParams],
    chain: &ChainParams,
) -> Result<[Complex64; 2]> {
    let n = chain.spins();
    if pre.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: pre.len() });
    }
    if k >= n || kp >= n || k == kp {
        return domain(format!("need distinct spins below {n}, got {k} and {kp}"));
    }
    let m = pre.flipped(kp);
    let ek = raise_sign(pre, k);
    let ekp = raise_sign(pre, kp);
    let excitations = [0.0, ek, ekp, ek + ekp];
    let mut ij = [Complex64::new(1.0, 0.0), ZERO];
    let mut mn = [ZERO; 2];
    for (x, p) in physical.iter().enumerate() {
        if x > 0 {
            let theta = frame_phase(&physical[x - 1], p);
            let ph = |e: f64| Complex64::from_polar(1.0, theta * e);
            ij = [ij[0], ij[1] * ph(excitations[1])];
            mn = [mn[0] * ph(excitations[2]), mn[1] * ph(excitations[3])];
        }
        let hj = ek * (frequency(pre, k, chain) - p.nu);
        let hm = ekp * (frequency(pre, kp, chain) - p.nu);
        let hn = hm + ek * (frequency(&m, k, chain) - p.nu);
        let a = Block::new(0.0, hj, -0.5 * p.rabi);
        let c = Block::new(hm, hn, -0.5 * p.rabi);
        let b = first_order(&a, &c, p.rabi, p.tau);
        let from_ij = mul(&b, ij);
        let kept = mul(&c.propagator(p.tau), mn);
        mn = [from_ij[0] + kept[0], from_ij[1] + kept[1]];
        ij = mul(&a.propagator(p.tau), ij);
    }
    Ok(mn)
}

/// One physical pulse with its window of phase factors.
struct SubPulse {
    p: PulseParams,
    lo: usize,
    /// `exp(-i (omega_kp - nu) tau)` for `kp` in the window.
    base: Vec<Complex64>,
    /// `exp(-i J c tau)` for Ising shifts `c = -2..=2`.
    ising: [Complex64; 5],
}

impl SubPulse {
    fn new(p: PulseParams, lo: usize, hi: usize, chain: &ChainParams) -> Self {
        let base = (lo..hi).map(|kp| Complex64::from_polar(1.0, -(chain.larmor(kp) - p.nu) * p.tau)).collect();
        let ising = std::array::from_fn(|i| Complex64::from_polar(1.0, -ISING_J * (i as f64 - 2.0) * p.tau));
        Self { p, lo, base, ising }
    }
}

/// Evolution of a useful source through one Q-pulse.
struct SourceTerms {
    /// Final amplitudes on `pre` and `pre ^ k`.
    column: [Complex64; 2],
}

impl SourceTerms {
    fn new(pre: &BasisState, k: usize, subs: &[SubPulse], chain: &ChainParams) -> Self {
        let ek = raise_sign(pre, k);
        let f = frequency(pre, k, chain);
        let mut v = [Complex64::new(1.0, 0.0), ZERO];
        for (x, sp) in subs.iter().enumerate() {
            if x > 0 {
                v[1] *= Complex64::from_polar(1.0, frame_phase(&subs[x - 1].p, &sp.p) * ek);
            }
            let a = Block::new(0.0, ek * (f - sp.p.nu), -0.5 * sp.p.rabi);
            v = mul(&a.propagator(sp.p.tau), v);
        }
        Self { column: v }
    }
}

/// Fast leakage amplitudes into `pre ^ kp` and `pre ^ k ^ kp`.
///
/// Away from `k` the `{m, n}` block is the `{i, j}` block shifted by a constant, so the whole Q-pulse
/// reduces to one scalar times the useful column.
#[inline]
fn leak(
    pre: &BasisState,
    st: &SourceTerms,
    subs: &[SubPulse],
    frame: &[Complex64; 2],
    chain: &ChainParams,
    k: usize,
    kp: usize,
) -> [Complex64; 2] {
    if kp + 1 == k || k + 1 == kp {
        let phys: SmallVec<[PulseParams; 2]> = subs.iter().map(|s| s.p).collect();
        return qpulse_leakage(pre, k, kp, &phys, chain).expect("validated spins");
    }
    let n = pre.len();
    let zl = if kp > 0 { pre.z(kp - 1) } else { 0.0 };
    let zr = if kp + 1 < n { pre.z(kp + 1) } else { 0.0 };
    let up = !pre.bit(kp);
    let sigma = if up { 1.0 } else { -1.0 };
    let idx = (2.0 * (zl + zr) + 2.0) as usize;
    let one = Complex64::new(1.0, 0.0);
    let mut g = ZERO;
    for (x, sp) in subs.iter().enumerate() {
        let s = sigma * (chain.larmor(kp) + 2.0 * ISING_J * (zl + zr) - sp.p.nu);
        let mut e = sp.base[kp - sp.lo] * sp.ising[idx];
        if !up {
            e = e.conj();
        }
        let gx = (one - e) * (0.5 * sp.p.rabi / s);
        g = if x == 0 {
            gx
        } else {
            let f = if up { frame[x - 1] } else { frame[x - 1].conj() };
            gx + e * f * g
        };
    }
    [g * st.column[0], g * st.column[1]]
}

type Delta = SmallVec<[u32; 4]>;

fn toggled(d: &[u32], k: u32) -> Delta {
    let mut out: Delta = d.iter().copied().filter(|&x| x != k).collect();
    if out.len() == d.len() {
        let at = out.partition_point(|&x| x < k);
        out.insert(at, k);
    }
    out
}

fn pair(a: usize, b: usize) -> Delta {
    let (a, b) = (a.min(b) as u32, a.max(b) as u32);
    smallvec![a, b]
}

/// Unwanted states descending from one useful state, keyed by the spins where they differ from it.
struct Family {
    singles: Vec<Complex64>,
    multi: HashMap<Delta, Complex64>,
    by_pos: HashMap<u32, SmallVec<[Delta; 2]>>,
}

impl Family {
    fn new(spins: usize) -> Self {
        Self { singles: vec![ZERO; spins], multi: HashMap::default(), by_pos: HashMap::default() }
    }

    fn get(&self, d: &[u32]) -> Complex64 {
        if d.len() == 1 {
            self.singles[d[0] as usize]
        } else {
            self.multi.get(d).copied().unwrap_or(ZERO)
        }
    }

    fn take(&mut self, d: &[u32]) -> Complex64 {
        if d.len() == 1 {
            return std::mem::replace(&mut self.singles[d[0] as usize], ZERO);
        }
        let Some(a) = self.multi.remove(d) else { return ZERO };
        for p in d {
            if let Some(list) = self.by_pos.get_mut(p) {
                list.retain(|x| x.as_slice() != d);
                if list.is_empty() {
                    self.by_pos.remove(p);
                }
            }
        }
        a
    }

    /// Stores `a` under `d`, which must not be present.
    fn put(&mut self, d: Delta, a: Complex64) {
        if d.len() == 1 {
            self.singles[d[0] as usize] = a;
            return;
        }
        for &p in &d {
            self.by_pos.entry(p).or_default().push(d.clone());
        }
        self.multi.insert(d, a);
    }

    fn update(&mut self, d: &[u32], a: Complex64) {
        if d.len() == 1 {
            self.singles[d[0] as usize] = a;
        } else if let Some(slot) = self.multi.get_mut(d) {
            *slot = a;
        } else {
            self.put(d.iter().copied().collect(), a);
        }
    }

    fn entries(&self) -> impl Iterator<Item = (Delta, Complex64)> + '_ {
        let singles = self
            .singles
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != ZERO)
            .map(|(p, a)| (smallvec![p as u32], *a));
        singles.chain(self.multi.iter().map(|(d, a)| (d.clone(), *a)))
    }
}

struct RelativeStore {
    families: Vec<Family>,
    count: usize,
    max_delta: usize,
    touched: Vec<(u32, Delta)>,
}

struct FullStore {
    map: HashMap<BasisState, Complex64>,
    useful: HashSet<BasisState>,
}

enum Store {
    Relative(RelativeStore),
    Full(FullStore),
}

/// Useful states with exact amplitudes plus the pruned ledger of unwanted ones.
pub struct StateLedger {
    chain: ChainParams,
    useful: Vec<(BasisState, f64)>,
    store: Store,
    total_error: f64,
    /// Pairwise Hamming distances between useful states, row-major.
    dist: Vec<u32>,
    steps: usize,
}

impl StateLedger {
    /// Ledger starting from the superposition `initial` of distinct basis states.
    pub fn new(chain: ChainParams, initial: &[(BasisState, f64)]) -> Result<Self> {
        if initial.is_empty() {
            return domain("the ledger needs at least one useful state");
        }
        let n = chain.spins();
        for (s, _) in initial {
            if s.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: s.len() });
            }
        }
        let norm: f64 = initial.iter().map(|(_, a)| a * a).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return domain(format!("useful amplitudes have squared norm {norm}, expected 1"));
        }
        let m = initial.len();
        let mut dist = vec![0u32; m * m];
        for i in 0..m {
            for j in 0..m {
                dist[i * m + j] = hamming(&initial[i].0, &initial[j].0);
                if i != j && dist[i * m + j] == 0 {
                    return domain(format!("useful state {} appears twice", initial[i].0));
                }
            }
        }
        let mut ledger = Self {
            chain,
            useful: initial.to_vec(),
            store: Store::Relative(RelativeStore {
                families: (0..m).map(|_| Family::new(n)).collect(),
                count: 0,
                max_delta: 0,
                touched: Vec::new(),
            }),
            total_error: 0.0,
            dist,
            steps: 0,
        };
        if n <= 64 || !ledger.relative_keys_safe(0) {
            ledger.use_full_keys();
        }
        Ok(ledger)
    }

    /// Equal-weight superposition of `states`.
    pub fn equal_superposition(chain: ChainParams, states: &[BasisState]) -> Result<Self> {
        let a = 1.0 / (states.len().max(1) as f64).sqrt();
        let initial: Vec<_> = states.iter().map(|s| (s.clone(), a)).collect();
        Self::new(chain, &initial)
    }

    pub fn chain(&self) -> &ChainParams {
        &self.chain
    }

    pub fn useful(&self) -> &[(BasisState, f64)] {
        &self.useful
    }

    /// Probability held by unwanted states.
    pub fn total_error(&self) -> f64 {
        self.total_error
    }

    pub fn unwanted_count(&self) -> usize {
        match &self.store {
            Store::Relative(r) => r.count,
            Store::Full(f) => f.map.len(),
        }
    }

    /// Whether unwanted states are stored relative to their useful parents.
    pub fn uses_relative_keys(&self) -> bool {
        matches!(self.store, Store::Relative(_))
    }

    /// All unwanted states with their amplitudes, sorted.
    pub fn unwanted(&self) -> Vec<(BasisState, Complex64)> {
        let mut out: Vec<(BasisState, Complex64)> = match &self.store {
            Store::Full(f) => f.map.iter().map(|(s, a)| (s.clone(), *a)).collect(),
            Store::Relative(r) => {
                let mut v = Vec::with_capacity(r.count);
                for (fam, (parent, _)) in r.families.iter().zip(&self.useful) {
                    for (d, a) in fam.entries() {
                        let mut s = parent.clone();
                        for &p in &d {
                            s.flip(p as usize);
                        }
                        v.push((s, a));
                    }
                }
                v
            }
        };
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Total squared norm of useful plus unwanted amplitudes.
    pub fn norm_sqr(&self) -> f64 {
        let u: f64 = self.useful.iter().map(|(_, a)| a * a).sum();
        u + self.exact_error()
    }

    /// Switches to keys holding the full basis state.
    pub fn use_full_keys(&mut self) {
        if let Store::Relative(_) = self.store {
            let map: HashMap<BasisState, Complex64> = self.unwanted().into_iter().collect();
            let useful = self.useful.iter().map(|(s, _)| s.clone()).collect();
            self.store = Store::Full(FullStore { map, useful });
        }
    }

    fn exact_error(&self) -> f64 {
        match &self.store {
            Store::Full(f) => f.map.values().map(|a| a.norm_sqr()).sum(),
            Store::Relative(r) => {
                r.families.iter().flat_map(|f| f.entries()).map(|(_, a)| a.norm_sqr()).sum()
            }
        }
    }

    /// Relative keys are unambiguous while useful states stay far apart.
    fn relative_keys_safe(&self, max_delta: usize) -> bool {
        let m = self.useful.len();
        let limit = 2 * max_delta.max(2) as u32;
        (0..m).all(|i| (i + 1..m).all(|j| self.dist[i * m + j] > limit))
    }

    /// Applies one Q-pulse realized by `physical` with pruning threshold `xi`.
    pub fn apply<R: Rng + ?Sized>(
        &mut self,
        q: &QPulse,
        physical: &[PulseParams],
        xi: f64,
        rng: &mut R,
    ) -> Result<()> {
        let n = self.chain.spins();
        q.validate(n)?;
        if physical.is_empty() || physical.len() > 2 {
            return domain(format!("a Q-pulse has one or two physical pulses, got {}", physical.len()));
        }
        if !(xi > 0.0) {
            return domain(format!("pruning threshold must be positive, got {xi}"));
        }
        if let Store::Relative(r) = &self.store {
            if !self.relative_keys_safe(r.max_delta) {
                log::info!("useful states came close; switching to full-state keys");
                self.use_full_keys();
            }
        }
        let flipped = self.flip_useful(q);
        self.follow_unwanted(q, &flipped);
        self.leak_all(q, physical, xi, &flipped, rng);
        self.prune(xi);
        Ok(())
    }

    fn flip_useful(&mut self, q: &QPulse) -> Vec<bool> {
        let n = self.chain.spins();
        let m = self.useful.len();
        let (l, r) = rule_neighbors(q.k, n);
        let mut flipped = Vec::with_capacity(m);
        for i in 0..m {
            let s = &mut self.useful[i].0;
            let f = flip_rule(q.kind, s.bit(l), s.bit(r));
            if f {
                s.flip(q.k);
                let b = self.useful[i].0.bit(q.k);
                for j in (0..m).filter(|&j| j != i) {
                    let d = &mut self.dist[i * m + j];
                    if self.useful[j].0.bit(q.k) == b {
                        *d -= 1;
                    } else {
                        *d += 1;
                    }
                    self.dist[j * m + i] = self.dist[i * m + j];
                }
            }
            flipped.push(f);
        }
        if let Store::Full(f) = &mut self.store {
            f.useful = self.useful.iter().map(|(s, _)| s.clone()).collect();
        }
        flipped
    }

    /// Moves unwanted states along the resonant rule.
    fn follow_unwanted(&mut self, q: &QPulse, flipped: &[bool]) {
        let n = self.chain.spins();
        let (lpos, rpos) = rule_neighbors(q.k, n);
        match &mut self.store {
            Store::Full(f) => {
                let moving: Vec<(BasisState, Complex64)> =
                    f.map.extract_if(|s, _| flip_rule(q.kind, s.bit(lpos), s.bit(rpos))).collect();
                for (mut s, a) in moving {
                    s.flip(q.k);
                    f.map.insert(s, a);
                }
            }
            Store::Relative(r) => {
                let positions: SmallVec<[usize; 2]> =
                    if lpos == rpos { smallvec![lpos] } else { smallvec![lpos, rpos] };
                for (pi, fam) in r.families.iter_mut().enumerate() {
                    let s = &self.useful[pi].0;
                    let mut cands: SmallVec<[Delta; 8]> = SmallVec::new();
                    for &p in &positions {
                        if fam.singles[p] != ZERO {
                            cands.push(smallvec![p as u32]);
                        }
                        if let Some(list) = fam.by_pos.get(&(p as u32)) {
                            cands.extend(list.iter().cloned());
                        }
                    }
                    cands.sort();
                    cands.dedup();
                    let mut moved: SmallVec<[(Delta, Complex64); 4]> = SmallVec::new();
                    for d in cands {
                        let l = s.bit(lpos) ^ d.contains(&(lpos as u32));
                        let rr = s.bit(rpos) ^ d.contains(&(rpos as u32));
                        if flip_rule(q.kind, l, rr) != flipped[pi] {
                            let a = fam.take(&d);
                            moved.push((toggled(&d, q.k as u32), a));
                        }
                    }
                    for (d, a) in moved {
                        r.max_delta = r.max_delta.max(d.len());
                        fam.put(d, a);
                    }
                }
            }
        }
    }

    fn leak_all<R: Rng + ?Sized>(
        &mut self,
        q: &QPulse,
        physical: &[PulseParams],
        xi: f64,
        flipped: &[bool],
        rng: &mut R,
    ) {
        let n = self.chain.spins();
        let k = q.k;
        let chain = self.chain;
        let dw = chain.delta_omega();
        let floor = xi / WINDOW_DIVISOR;
        let rabi: f64 = physical.iter().map(|p| p.rabi).sum();
        let reach = ((rabi / floor.sqrt() + 4.0 * ISING_J) / dw).floor() as usize;
        let lo = k.saturating_sub(reach);
        let hi = (k + reach + 1).min(n);
        let subs: SmallVec<[SubPulse; 2]> = physical.iter().map(|p| SubPulse::new(*p, lo, hi, &chain)).collect();
        let frame: [Complex64; 2] = std::array::from_fn(|x| match (subs.get(x), subs.get(x + 1)) {
            (Some(a), Some(b)) => Complex64::from_polar(1.0, frame_phase(&a.p, &b.p)),
            _ => ZERO,
        });
        let mut scratch = BasisState::zeros(0);

        for pi in 0..self.useful.len() {
            let (post, weight) = (&self.useful[pi].0, self.useful[pi].1);
            let fl = flipped[pi];
            let pre = if fl { post.flipped(k) } else { post.clone() };
            let terms = SourceTerms::new(&pre, k, &subs, &chain);
            let pairs_present: SmallVec<[u32; 8]> = match &self.store {
                Store::Relative(r) => r.families[pi]
                    .by_pos
                    .get(&(k as u32))
                    .map(|list| list.iter().filter(|d| d.len() == 2).map(|d| d[0] + d[1] - k as u32).collect())
                    .unwrap_or_default(),
                Store::Full(_) => SmallVec::new(),
            };

            for kp in (lo..hi).filter(|&kp| kp != k) {
                let [cm, cn] = leak(&pre, &terms, &subs, &frame, &chain, k, kp);
                let (single, double) = if fl { (cn, cm) } else { (cm, cn) };
                for (is_pair, amp) in [(false, single), (true, double)] {
                    let mag2 = weight * weight * amp.norm_sqr();
                    let present = match &mut self.store {
                        Store::Relative(r) => {
                            if is_pair {
                                pairs_present.contains(&(kp as u32))
                            } else {
                                r.families[pi].singles[kp] != ZERO
                            }
                        }
                        Store::Full(f) => {
                            scratch.clone_from(post);
                            scratch.flip(kp);
                            if is_pair {
                                scratch.flip(k);
                            }
                            if f.useful.contains(&scratch) {
                                continue;
                            }
                            f.map.contains_key(&scratch)
                        }
                    };
                    if !present && mag2 < xi {
                        continue;
                    }
                    let c = mag2.sqrt() * random_unit(rng);
                    match &mut self.store {
                        Store::Relative(r) => {
                            let d: Delta = if is_pair { pair(k, kp) } else { smallvec![kp as u32] };
                            let fam = &mut r.families[pi];
                            let old = fam.get(&d);
                            let new = old + c;
                            if old == ZERO {
                                if new.norm_sqr() < xi {
                                    continue;
                                }
                                r.count += 1;
                                r.max_delta = r.max_delta.max(d.len());
                            }
                            self.total_error += new.norm_sqr() - old.norm_sqr();
                            fam.update(&d, new);
                            r.touched.push((pi as u32, d));
                        }
                        Store::Full(f) => {
                            if present {
                                *f.map.get_mut(&scratch).expect("present key") += c;
                            } else if c.norm_sqr() >= xi {
                                f.map.insert(scratch.clone(), c);
                            }
                        }
                    }
                }
            }
        }
    }

    fn prune(&mut self, xi: f64) {
        self.steps += 1;
        match &mut self.store {
            Store::Full(f) => {
                f.map.retain(|_, a| a.norm_sqr() >= xi);
                self.total_error = f.map.values().map(|a| a.norm_sqr()).sum();
            }
            Store::Relative(r) => {
                for (pi, d) in r.touched.drain(..) {
                    let fam = &mut r.families[pi as usize];
                    let a = fam.get(&d);
                    if a != ZERO && a.norm_sqr() < xi {
                        fam.take(&d);
                        r.count -= 1;
                        self.total_error -= a.norm_sqr();
                    }
                }
                if self.steps.is_multiple_of(REANCHOR_EVERY) {
                    self.total_error = r.families.iter().flat_map(|f| f.entries()).map(|(_, a)| a.norm_sqr()).sum();
                }
            }
        }
        let u: f64 = self.useful.iter().map(|(_, a)| a * a).sum();
        let scale = ((1.0 - self.total_error).max(0.0) / u).sqrt();
        for (_, a) in &mut self.useful {
            *a *= scale;
        }
    }
}

fn hamming(a: &BasisState, b: &BasisState) -> u32 {
    a.words().iter().zip(b.words()).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Cumulative error after one Q-pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Physical pulses applied so far.
    pub pulse_index: usize,
    /// Q-pulses applied so far.
    pub qpulse_index: usize,
    pub cumulative_error: f64,
    pub unwanted_count: usize,
    pub useful_count: usize,
}

/// Error trace of one map realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrace {
    pub realization: u64,
    pub xi: f64,
    pub rows: Vec<TraceRow>,
}

impl ErrorTrace {
    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_error)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pulse_index,qpulse_index,cumulative_error,unwanted_count,useful_count\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.9e},{},{}",
                r.pulse_index, r.qpulse_index, r.cumulative_error, r.unwanted_count, r.useful_count
            );
        }
        out
    }
}

/// Runs realization `realization` of the map over the whole protocol.
pub fn run_map(
    initial: &[(BasisState, f64)],
    protocol: &Protocol,
    cfg: &MapConfig,
    realization: u64,
) -> Result<ErrorTrace> {
    let mut ledger = StateLedger::new(*protocol.chain(), initial)?;
    let xi = cfg.threshold(protocol, initial.len());
    let mut rng = realization_rng(cfg.rng_seed, realization);
    let m = initial.len();
    let mut rows = Vec::with_capacity(protocol.qpulse_count() + 1);
    rows.push(TraceRow { pulse_index: 0, qpulse_index: 0, cumulative_error: 0.0, unwanted_count: 0, useful_count: m });
    for (i, q) in protocol.qpulses().iter().enumerate() {
        ledger.apply(q, protocol.physical(i), xi, &mut rng)?;
        rows.push(TraceRow {
            pulse_index: protocol.physical_start(i + 1),
            qpulse_index: i + 1,
            cumulative_error: ledger.total_error(),
            unwanted_count: if cfg.track_counts { ledger.unwanted_count() } else { 0 },
            useful_count: m,
        });
    }
    Ok(ErrorTrace { realization, xi, rows })
}

/// Runs `cfg.realizations` independent realizations in parallel.
pub fn run_realizations(initial: &[(BasisState, f64)], protocol: &Protocol, cfg: &MapConfig) -> Result<Vec<ErrorTrace>> {
    (0..cfg.realizations as u64).into_par_iter().map(|r| run_map(initial, protocol, cfg, r)).collect()
}

/// Realization average at one trace point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanRow {
    pub pulse_index: usize,
    pub qpulse_index: usize,
    pub mean_error: f64,
    /// Standard error of the mean; zero for a single realization.
    pub std_error: f64,
    pub mean_unwanted: f64,
}

/// Averages equally long traces point by point.
pub fn aggregate_realizations(traces: &[ErrorTrace]) -> Result<Vec<MeanRow>> {
    let Some(first) = traces.first() else {
        return domain("no realizations to aggregate");
    };
    let len = first.rows.len();
    if let Some(t) = traces.iter().find(|t| t.rows.len() != len) {
        return Err(Error::LengthMismatch { expected: len, found: t.rows.len() });
    }
    let r = traces.len() as f64;
    Ok((0..len)
        .map(|i| {
            let xs = traces.iter().map(|t| t.rows[i].cumulative_error);
            let mean = xs.clone().sum::<f64>() / r;
            let var = if traces.len() > 1 {
                xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            MeanRow {
                pulse_index: first.rows[i].pulse_index,
                qpulse_index: first.rows[i].qpulse_index,
                mean_error: mean,
                std_error: (var / r).sqrt(),
                mean_unwanted: traces.iter().map(|t| t.rows[i].unwanted_count as f64).sum::<f64>() / r,
            }
        })
        .collect())
}

/// Averaged trace as CSV.
pub fn mean_csv(rows: &[MeanRow]) -> String {
    let mut out = String::from("pulse_index,qpulse_index,mean_error,std_error,mean_unwanted\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.9e},{:.3e},{:.1}",
            r.pulse_index, r.qpulse_index, r.mean_error, r.std_error, r.mean_unwanted
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adder::{compile_full_adder, ideal_action};
    use crate::chain::encode_addend_register;
    use crate::exact::{DenseState, ExactConfig, ExactSimulator};
    use crate::pulses::{compute_aux, expand, QPulseKind};
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn pulse(rabi: f64, nu: f64) -> PulseParams {
        PulseParams { rabi, nu, tau: PI / rabi, phi: 0.3, t0: 0.0 }
    }

    fn random_register(l: usize, rng: &mut impl Rng) -> BasisState {
        let b = BigUint::from_bytes_le(&(0..l.div_ceil(8)).map(|_| rng.gen::<u8>()).collect::<Vec<_>>());
        let b = b % (BigUint::from(1u8) << l);
        encode_addend_register(&b, l).unwrap()
    }

    #[test]
    fn fast_leakage_matches_reference() {
        let chain = ChainParams::new(9, 100.0).unwrap();
        let mut rng = realization_rng(7, 0);
        for trial in 0..200 {
            let src = BasisState::from_index(rng.gen_range(0..512), 9);
            let k = trial % 9;
            let rabi = [0.125, 0.05, 0.3][trial % 3];
            let nu = chain.larmor(k) + [0.0, 2.0, -2.0, 1.0, -1.0][trial % 5];
            let first = PulseParams { t0: 3.7, ..pulse(rabi, nu) };
            let second = PulseParams { rabi: 0.7 * rabi, nu: nu - 2.0, tau: 2.1 / rabi, phi: -0.9, t0: first.t0 + first.tau };
            let phys: &[PulseParams] = if trial % 2 == 0 { &[first] } else { &[first, second] };
            let subs: Vec<SubPulse> = phys.iter().map(|p| SubPulse::new(*p, 0, 9, &chain)).collect();
            let frame = [if phys.len() > 1 { Complex64::from_polar(1.0, frame_phase(&first, &second)) } else { ZERO }, ZERO];
            let st = SourceTerms::new(&src, k, &subs, &chain);
            for kp in (0..9).filter(|&kp| kp != k) {
                let fast = leak(&src, &st, &subs, &frame, &chain, k, kp);
                let reference = qpulse_leakage(&src, k, kp, phys, &chain).unwrap();
                for (f, r) in fast.iter().zip(&reference) {
                    assert!((f - r).norm() <= 1e-7 * r.norm() + 1e-12, "{src} k={k} kp={kp}: {f} vs {r}");
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_designed_pulses() {
        let chain = ChainParams::new(7, 100.0).unwrap();
        let aux = compute_aux(8).unwrap();
        for idx in 0..128 {
            let src = BasisState::from_index(idx, 7);
            for k in 1..6 {
                let q = QPulse::new(QPulseKind::Q01, k, 0.0);
                let p = expand(&q, &aux, &chain, 1.3).unwrap()[0];
                for kp in (0..7).filter(|&kp| kp != k) {
                    let (pm, pn) = TransitionParams::new(&src, k, kp, &p, &chain).unwrap().magnitudes(p.rabi, p.tau);
                    let [cm, cn] = qpulse_leakage(&src, k, kp, &[p], &chain).unwrap();
                    let scale = pm.max(pn);
                    assert!((cm.norm() - pm).abs() <= 2e-2 * scale + 1e-12, "{src} {k} {kp}: {} vs {pm}", cm.norm());
                    assert!((cn.norm() - pn).abs() <= 2e-2 * scale + 1e-12, "{src} {k} {kp}: {} vs {pn}", cn.norm());
                }
            }
        }
    }

    #[test]
    fn qpulse_leakage_matches_exact() {
        let chain = ChainParams::new(7, 100.0).unwrap();
        let mut sim = ExactSimulator::new(chain, ExactConfig::default()).unwrap();
        let mut rng = realization_rng(11, 0);
        for big_k in [8, 100] {
            let aux = compute_aux(big_k).unwrap();
            for kind in [QPulseKind::Q01, QPulseKind::Q00, QPulseKind::Q11, QPulseKind::Q0Edge, QPulseKind::Q1Edge] {
                let k = if matches!(kind, QPulseKind::Q0Edge | QPulseKind::Q1Edge) { 0 } else { 3 };
                for _ in 0..6 {
                    let src = BasisState::from_index(rng.gen_range(0..128), 7);
                    let t0 = rng.gen_range(0.0..50.0);
                    let q = QPulse::new(kind, k, rng.gen_range(-PI..PI));
                    let phys = expand(&q, &aux, &chain, t0).unwrap();
                    let mut state = DenseState::basis_at(&src, t0, &chain);
                    for p in &phys {
                        sim.apply_pulse(&mut state, p).unwrap();
                    }
                    let (mut predicted, mut exact) = (0.0, 0.0);
                    for kp in (0..7).filter(|&kp| kp != k) {
                        let amps = qpulse_leakage(&src, k, kp, &phys, &chain).unwrap();
                        for (target, a) in [src.flipped(kp), src.flipped(k).flipped(kp)].iter().zip(amps) {
                            let pe = state.probability(target);
                            let pm = a.norm_sqr();
                            if pm.max(pe) > 1e-9 {
                                assert!((pe / pm - 1.0).abs() < 0.05, "{kind:?} K={big_k} {src} -> {target}: exact {pe:.4e} map {pm:.4e}");
                            }
                            predicted += pm;
                            exact += pe;
                        }
                    }
                    assert!((exact / predicted - 1.0).abs() < 0.03, "{kind:?} K={big_k} {src}: {exact:.4e} vs {predicted:.4e}");
                }
            }
        }
    }

    #[test]
    fn detuning_tracks_distance() {
        let chain = ChainParams::new(7, 100.0).unwrap();
        for idx in 0..128 {
            let s = BasisState::from_index(idx, 7);
            for k in 0..7 {
                for off in [0.0, 2.0, -2.0, 1.0, -1.0] {
                    let p = pulse(0.1, chain.larmor(k) + off);
                    for kp in (0..7).filter(|&kp| kp != k) {
                        let tp = TransitionParams::new(&s, k, kp, &p, &chain).unwrap();
                        let gap = k.abs_diff(kp) as f64 * chain.delta_omega();
                        assert!((tp.d.abs() - gap).abs() <= 4.0 * ISING_J + 1e-9, "{s} {k} {kp} {off}: {}", tp.d);
                    }
                }
            }
        }
    }

    #[test]
    fn leakage_matches_exact_single_pulse() {
        let chain = ChainParams::new(7, 100.0).unwrap();
        let aux = compute_aux(8).unwrap();
        let mut sim = ExactSimulator::new(chain, ExactConfig::default()).unwrap();
        let mut rng = realization_rng(1, 0);
        for (src_idx, kind, k) in [(0b0000000, QPulseKind::Q01, 3), (0b0010100, QPulseKind::Q01, 3), (0b0001000, QPulseKind::Q00, 4)] {
            let src = BasisState::from_index(src_idx, 7);
            let q = QPulse::new(kind, k, 0.4);
            let phys = expand(&q, &aux, &chain, 0.0).unwrap();
            let mut state = DenseState::basis(&src);
            for p in &phys {
                sim.apply_pulse(&mut state, p).unwrap();
            }
            let contribs = nonresonant_amplitudes(&src, k, &phys[0], &chain, &mut rng).unwrap();
            let mut predicted = 0.0;
            let mut exact = 0.0;
            for c in contribs.iter().filter(|c| c.magnitude.powi(2) > 1e-10) {
                let pe = state.probability(&c.state);
                let pm = c.magnitude.powi(2);
                if kind == QPulseKind::Q01 {
                    assert!((pe / pm - 1.0).abs() < 0.05, "{} exact {pe:.3e} map {pm:.3e}", c.state);
                }
                predicted += pm;
                exact += pe;
            }
            assert!(predicted > 0.0 && (exact / predicted - 1.0).abs() < 0.5, "{exact:.3e} vs {predicted:.3e}");
        }
    }

    #[test]
    fn single_pulse_partners() {
        for spins in [9, 81] {
            let chain = ChainParams::new(spins, 100.0).unwrap();
            let aux = compute_aux(8).unwrap();
            let src = BasisState::zeros(spins);
            let mut ledger = StateLedger::new(chain, &[(src.clone(), 1.0)]).unwrap();
            assert_eq!(ledger.uses_relative_keys(), spins > 64);
            let k = spins / 2;
            let q = QPulse::new(QPulseKind::Q01, k, 0.0);
            let phys = expand(&q, &aux, &chain, 0.0).unwrap();
            let mut rng = realization_rng(3, 0);
            ledger.apply(&q, &phys, 1e-40, &mut rng).unwrap();
            let unwanted = ledger.unwanted();
            assert!(!unwanted.is_empty() && unwanted.len() <= 2 * (spins - 1));
            for (s, _) in &unwanted {
                let diff: Vec<usize> = (0..spins).filter(|&i| s.bit(i) != src.bit(i)).collect();
                assert!(matches!(diff.as_slice(), [a] if *a != k) || (diff.len() == 2 && diff.contains(&k)), "{s}");
            }
            assert!((ledger.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    fn run_ledger(spins_l: usize, m: usize, full: bool, seed: u64) -> (StateLedger, Vec<BasisState>, BigUint) {
        let chain = ChainParams::for_adder(spins_l, 100.0).unwrap();
        let aux = compute_aux(8).unwrap();
        let mut rng = realization_rng(seed, 99);
        let a = BigUint::from(0x5a5a_1234_u64) % (BigUint::from(1u8) << spins_l);
        let protocol = compile_full_adder(&a, &aux, &chain).unwrap();
        let mut states: Vec<BasisState> = Vec::new();
        while states.len() < m {
            let s = random_register(spins_l, &mut rng);
            if !states.contains(&s) {
                states.push(s);
            }
        }
        let mut ledger = StateLedger::equal_superposition(chain, &states).unwrap();
        if full {
            ledger.use_full_keys();
        }
        let xi = MapConfig::default().threshold(&protocol, m);
        let mut rng = realization_rng(seed, 0);
        for (i, q) in protocol.qpulses().iter().enumerate() {
            ledger.apply(q, protocol.physical(i), xi, &mut rng).unwrap();
            assert!((ledger.norm_sqr() - 1.0).abs() < 1e-10);
        }
        (ledger, states, a)
    }

    #[test]
    fn useful_states_follow_ideal_adder() {
        let (ledger, states, a) = run_ledger(6, 4, false, 5);
        for ((s, amp), init) in ledger.useful().iter().zip(&states) {
            assert_eq!(*s, ideal_action(init, &a, 6).unwrap());
            assert!((amp * amp - (1.0 - ledger.total_error()) / 4.0).abs() < 1e-12);
        }
        assert!(ledger.total_error() > 0.0);
    }

    #[test]
    fn relative_and_full_keys_agree() {
        let (rel, _, _) = run_ledger(40, 3, false, 11);
        let (full, _, _) = run_ledger(40, 3, true, 11);
        assert!(rel.uses_relative_keys() && !full.uses_relative_keys());
        assert_eq!(rel.unwanted_count(), full.unwanted_count());
        assert!((rel.total_error() / full.total_error() - 1.0).abs() < 1e-9);
        for ((s1, a1), (s2, a2)) in rel.unwanted().iter().zip(full.unwanted()) {
            assert_eq!(*s1, s2);
            assert!((a1 - a2).norm() < 1e-12 * a2.norm().max(1e-6));
        }
    }

    #[test]
    fn close_useful_states_fall_back_to_full_keys() {
        let chain = ChainParams::new(101, 100.0).unwrap();
        let a = BasisState::zeros(101);
        let b = a.flipped(50);
        let ledger = StateLedger::equal_superposition(chain, &[a, b]).unwrap();
        assert!(!ledger.uses_relative_keys());
    }

    #[test]
    fn random_phases_add_like_a_walk() {
        let mut rng = realization_rng(2, 0);
        let trials = 4000;
        let steps = 50;
        let mut mean = 0.0;
        for _ in 0..trials {
            let mut c = ZERO;
            for _ in 0..steps {
                let u = random_unit(&mut rng);
                assert!((u.norm() - 1.0).abs() < 1e-12);
                c += 1e-4 * u;
            }
            mean += c.norm_sqr() / trials as f64;
        }
        let expect = steps as f64 * 1e-8;
        assert!((mean / expect - 1.0).abs() < 0.06, "{mean} vs {expect}");
    }

    #[test]
    fn aggregate_checks_lengths() {
        let row = |e: f64| TraceRow { pulse_index: 1, qpulse_index: 1, cumulative_error: e, unwanted_count: 2, useful_count: 1 };
        let t = |e: f64| ErrorTrace { realization: 0, xi: 1.0, rows: vec![row(0.0), row(e)] };
        let mean = aggregate_realizations(&[t(1.0), t(3.0)]).unwrap();
        assert_eq!(mean[1].mean_error, 2.0);
        assert!((mean[1].std_error - 1.0).abs() < 1e-12);
        let mut short = t(1.0);
        short.rows.pop();
        assert!(matches!(aggregate_realizations(&[t(1.0), short]), Err(Error::LengthMismatch { .. })));
        assert!(aggregate_realizations(&[]).is_err());
    }

    #[test]
    fn ledger_rejects_bad_input() {
        let chain = ChainParams::new(5, 100.0).unwrap();
        let s = BasisState::zeros(5);
        assert!(StateLedger::new(chain, &[]).is_err());
        assert!(StateLedger::new(chain, &[(s.clone(), 0.5)]).is_err());
        assert!(StateLedger::new(chain, &[(BasisState::zeros(4), 1.0)]).is_err());
        let h = 0.5f64.sqrt();
        assert!(StateLedger::new(chain, &[(s.clone(), h), (s, h)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ledger_stays_normalized(idx in 0u64..512, k in 0usize..9, kind in 0usize..3, seed in 0u64..1000) {
            let chain = ChainParams::new(9, 100.0).unwrap();
            let aux = compute_aux(4).unwrap();
            let kind = [QPulseKind::Q01, QPulseKind::Q00, QPulseKind::Q11][kind];
            let k = k.clamp(1, 7);
            let mut ledger = StateLedger::new(chain, &[(BasisState::from_index(idx, 9), 1.0)]).unwrap();
            let mut rng = realization_rng(seed, 0);
            let mut t0 = 0.0;
            for step in 0..6 {
                let q = QPulse::new(kind, (k + step) % 7 + 1, 0.1);
                let phys = expand(&q, &aux, &chain, t0).unwrap();
                t0 = phys.last().unwrap().end();
                ledger.apply(&q, &phys, 1e-12, &mut rng).unwrap();
                prop_assert!((ledger.norm_sqr() - 1.0).abs() < 1e-12);
                prop_assert!(ledger.unwanted().iter().all(|(_, a)| a.norm_sqr() >= 1e-12));
            }
        }
    }
}
