//! Pulse parameters under the 2πK condition, Q-pulse expansion and acquired-phase tables.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::chain::{BasisState, ChainParams, ISING_J};
use crate::error::{domain, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Rabi frequencies and phase constants derived from `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryConstants {
    pub k: u32,
    pub k2: u32,
    pub kc: u32,
    pub omega: f64,
    pub omega2: f64,
    pub omega_c: f64,
    pub theta: f64,
    pub big_theta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl AuxiliaryConstants {
    /// Duration of the correction sub-pulse of a composite.
    pub fn tau_c(&self) -> f64 {
        2.0 * (PI + self.beta) / self.omega_c
    }

    pub fn k_is_odd(&self) -> bool {
        self.k % 2 == 1
    }
}

/// Rabi frequency completing `k` full rotations at detuning `2J` during a π-pulse.
pub fn rabi_2pik(k: u32) -> f64 {
    ISING_J / ((k as f64).powi(2) - 0.25).sqrt()
}

/// Constants for `K`, with `K2 = Kc = 2K`.
pub fn compute_aux(k: u32) -> Result<AuxiliaryConstants> {
    if k < 1 {
        return domain("K must be at least 1");
    }
    let k2 = 2 * k;
    let kc = 2 * k;
    let k2f = k2 as f64;
    let root = (k2f * k2f - 0.25).sqrt();
    let upper = (k2f * k2f + 0.75).sqrt();
    let theta = PI * root;
    let principal = (-(root / upper) * (0.5 * PI * upper).tan()).atan();

    for shift in [0.0, PI] {
        let aux = assemble(k, k2, kc, theta, principal + shift);
        if composite_branch_ok(&aux) {
            return Ok(aux);
        }
    }
    domain(format!("no branch of the correction-pulse phase validates for K = {k}"))
}

fn assemble(k: u32, k2: u32, kc: u32, theta: f64, big_theta: f64) -> AuxiliaryConstants {
    let k2f = k2 as f64;
    let kcf = kc as f64;
    let beta = (big_theta.sin() / (k2f * k2f - 0.25).sqrt()).atan();
    let x = PI * kcf / (PI + beta);
    AuxiliaryConstants {
        k,
        k2,
        kc,
        omega: rabi_2pik(k),
        omega2: 2.0 * ISING_J / (k2f * k2f - 0.25).sqrt(),
        omega_c: 2.0 * ISING_J / (x * x - 1.0).sqrt(),
        theta,
        big_theta,
        beta,
        gamma: ((PI * kcf).powi(2) - (PI + beta).powi(2)).sqrt(),
        alpha: PI * ((k as f64).powi(2) - 0.25).sqrt(),
    }
}

/// Runs the Q00 composite on a spin whose neighbors are mixed and checks that it
/// comes back with the tabulated phase.
fn composite_branch_ok(aux: &AuxiliaryConstants) -> bool {
    let f = 100.0;
    let mut c = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let tau1 = PI / aux.omega2;
    two_level_step(&mut c, f, aux.omega2, f + 2.0 * ISING_J, tau1, 0.0, 0.0);
    two_level_step(&mut c, f, aux.omega_c, f, aux.tau_c(), aux.theta + aux.big_theta, tau1);
    let want = PI + aux.theta / 2.0 + aux.big_theta;
    c[0].norm_sqr() > 1.0 - 1e-9 && wrap_phase(c[0].arg() - want).abs() < 1e-6
}

/// Exact interaction-picture evolution of one spin with transition frequency `f`
/// under a rectangular pulse.
pub(crate) fn two_level_step(
    c: &mut [Complex64; 2],
    f: f64,
    rabi: f64,
    nu: f64,
    tau: f64,
    phi: f64,
    t0: f64,
) {
    // rotating-frame H = [[0, -W e^{i phi}], [-W e^{-i phi}, d]], W = rabi/2, d = f - nu
    let d = f - nu;
    let w = rabi / 2.0;
    let half = d / 2.0;
    let r = (half * half + w * w).sqrt();
    let (s, co) = (r * tau).sin_cos();
    let sinc = if r > 0.0 { s / r } else { tau };
    let i = Complex64::i();
    // exp(-i tau (half*I + A)), A = [[-half, -W e^{i phi}], [-W e^{-i phi}, half]]
    let g = Complex64::from_polar(1.0, -half * tau);
    let a00 = Complex64::new(co, 0.0) - i * (-half) * sinc;
    let a11 = Complex64::new(co, 0.0) - i * half * sinc;
    let a01 = -i * (-w) * Complex64::from_polar(1.0, phi) * sinc;
    let a10 = -i * (-w) * Complex64::from_polar(1.0, -phi) * sinc;
    let t1 = t0 + tau;
    // lab -> rotating at t0, evolve, rotating -> lab, lab -> interaction at t1
    let b0 = c[0];
    let b1 = c[1] * Complex64::from_polar(1.0, -f * t0 + nu * t0);
    let n0 = g * (a00 * b0 + a01 * b1);
    let n1 = g * (a10 * b0 + a11 * b1);
    c[0] = n0;
    c[1] = n1 * Complex64::from_polar(1.0, -nu * t1 + f * t1);
}

/// Logical pulse families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QPulseKind {
    Q01,
    Q00,
    Q11,
    Q0Edge,
    Q1Edge,
}

impl QPulseKind {
    pub fn is_edge(self) -> bool {
        matches!(self, QPulseKind::Q0Edge | QPulseKind::Q1Edge)
    }

    pub fn is_composite(self) -> bool {
        matches!(self, QPulseKind::Q00 | QPulseKind::Q11)
    }

    pub fn label(self) -> &'static str {
        match self {
            QPulseKind::Q01 => "Q01",
            QPulseKind::Q00 => "Q00",
            QPulseKind::Q11 => "Q11",
            QPulseKind::Q0Edge => "Q0",
            QPulseKind::Q1Edge => "Q1",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "Q01" | "Q10" => QPulseKind::Q01,
            "Q00" => QPulseKind::Q00,
            "Q11" => QPulseKind::Q11,
            "Q0" => QPulseKind::Q0Edge,
            "Q1" => QPulseKind::Q1Edge,
            _ => return None,
        })
    }
}

impl fmt::Display for QPulseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A logical pulse on spin `k` with phase `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPulse {
    pub kind: QPulseKind,
    pub k: usize,
    pub phi: f64,
}

impl QPulse {
    pub fn new(kind: QPulseKind, k: usize, phi: f64) -> Self {
        Self { kind, k, phi }
    }

    pub fn validate(&self, spins: usize) -> Result<()> {
        let edge = self.k == 0 || self.k + 1 == spins;
        if self.k >= spins {
            return domain(format!("{} targets spin {} of a {spins}-spin chain", self.kind, self.k));
        }
        if self.kind.is_edge() != edge {
            return domain(format!("{} cannot act on spin {} of a {spins}-spin chain", self.kind, self.k));
        }
        Ok(())
    }
}

/// One rectangular pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    pub rabi: f64,
    pub nu: f64,
    pub tau: f64,
    pub phi: f64,
    pub t0: f64,
}

impl PulseParams {
    pub fn end(&self) -> f64 {
        self.t0 + self.tau
    }
}

/// Physical pulses realizing `q`, starting at `t0`.
pub fn expand(q: &QPulse, aux: &AuxiliaryConstants, p: &ChainParams, t0: f64) -> Result<Vec<PulseParams>> {
    q.validate(p.spins())?;
    let w = p.larmor(q.k);
    let single = |nu: f64| PulseParams { rabi: aux.omega, nu, tau: PI / aux.omega, phi: q.phi, t0 };
    Ok(match q.kind {
        QPulseKind::Q01 => vec![single(w)],
        QPulseKind::Q0Edge => vec![single(w + ISING_J)],
        QPulseKind::Q1Edge => vec![single(w - ISING_J)],
        QPulseKind::Q00 | QPulseKind::Q11 => {
            let sign = if q.kind == QPulseKind::Q00 { 1.0 } else { -1.0 };
            let first = PulseParams {
                rabi: aux.omega2,
                nu: w + sign * 2.0 * ISING_J,
                tau: PI / aux.omega2,
                phi: q.phi,
                t0,
            };
            let corr = sign * (aux.theta + 2.0 * ISING_J * t0 + aux.big_theta) + q.phi;
            let second = PulseParams { rabi: aux.omega_c, nu: w, tau: aux.tau_c(), phi: corr, t0: first.end() };
            vec![first, second]
        }
    })
}

/// Integer combination of `pi/2, alpha/2, gamma/2, theta/2, Theta/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseExpr {
    pub pi: i32,
    pub alpha: i32,
    pub gamma: i32,
    pub theta: i32,
    pub big_theta: i32,
}

impl PhaseExpr {
    pub const ZERO: PhaseExpr = PhaseExpr::half(0, 0, 0, 0, 0);

    /// Coefficients in units of half the symbol.
    pub const fn half(pi: i32, alpha: i32, gamma: i32, theta: i32, big_theta: i32) -> Self {
        Self { pi, alpha, gamma, theta, big_theta }
    }

    pub fn eval(&self, aux: &AuxiliaryConstants) -> f64 {
        0.5 * (self.pi as f64 * PI
            + self.alpha as f64 * aux.alpha
            + self.gamma as f64 * aux.gamma
            + self.theta as f64 * aux.theta
            + self.big_theta as f64 * aux.big_theta)
    }

    /// Exactly a multiple of `2 pi`.
    pub fn is_zero_mod_2pi(&self) -> bool {
        self.alpha == 0 && self.gamma == 0 && self.theta == 0 && self.big_theta == 0 && self.pi.rem_euclid(4) == 0
    }

    /// Representative with the `pi` coefficient reduced into `(-pi, pi]`.
    pub fn reduced(mut self) -> Self {
        let r = self.pi.rem_euclid(4);
        self.pi = if r > 2 { r - 4 } else { r };
        self
    }
}

impl Add for PhaseExpr {
    type Output = PhaseExpr;
    fn add(self, o: PhaseExpr) -> PhaseExpr {
        PhaseExpr::half(
            self.pi + o.pi,
            self.alpha + o.alpha,
            self.gamma + o.gamma,
            self.theta + o.theta,
            self.big_theta + o.big_theta,
        )
    }
}

impl Neg for PhaseExpr {
    type Output = PhaseExpr;
    fn neg(self) -> PhaseExpr {
        PhaseExpr::half(-self.pi, -self.alpha, -self.gamma, -self.theta, -self.big_theta)
    }
}

impl Sub for PhaseExpr {
    type Output = PhaseExpr;
    fn sub(self, o: PhaseExpr) -> PhaseExpr {
        self + (-o)
    }
}

impl Mul<PhaseExpr> for i32 {
    type Output = PhaseExpr;
    fn mul(self, e: PhaseExpr) -> PhaseExpr {
        PhaseExpr::half(self * e.pi, self * e.alpha, self * e.gamma, self * e.theta, self * e.big_theta)
    }
}

impl fmt::Display for PhaseExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = [
            (self.pi, "pi"),
            (self.alpha, "alpha"),
            (self.gamma, "gamma"),
            (self.theta, "theta"),
            (self.big_theta, "Theta"),
        ];
        let mut first = true;
        for (c, name) in terms {
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else if first { "" } else { "+" };
            let a = c.abs();
            let coeff = if a % 2 == 0 {
                if a == 2 { String::new() } else { format!("{}", a / 2) }
            } else {
                format!("{a}/2")
            };
            write!(f, "{sign}{coeff}{name}")?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Spin pattern around the driven spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalConfig {
    /// `(n_{k+1}, n_k, n_{k-1})`.
    Interior { left: bool, center: bool, right: bool },
    /// Edge spin and its only neighbor.
    Edge { spin: bool, neighbor: bool },
}

pub fn local_config(s: &BasisState, k: usize) -> LocalConfig {
    let n = s.len();
    assert!(k < n && n >= 2, "spin {k} out of range for {n} spins");
    if k == 0 {
        LocalConfig::Edge { spin: s.bit(0), neighbor: s.bit(1) }
    } else if k + 1 == n {
        LocalConfig::Edge { spin: s.bit(k), neighbor: s.bit(k - 1) }
    } else {
        LocalConfig::Interior { left: s.bit(k + 1), center: s.bit(k), right: s.bit(k - 1) }
    }
}

/// One table row: `expr + phi_coeff * phi`, and whether the spin flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseEntry {
    pub expr: PhaseExpr,
    pub phi_coeff: i32,
    pub flip: bool,
}

const fn row(pi: i32, alpha: i32, gamma: i32, theta: i32, big_theta: i32, phi_coeff: i32, flip: bool) -> PhaseEntry {
    PhaseEntry { expr: PhaseExpr::half(pi, alpha, gamma, theta, big_theta), phi_coeff, flip }
}

// Interior rows indexed by 4 n_{k+1} + 2 n_k + n_{k-1}.
const Q01_ROWS: [PhaseEntry; 8] = [
    row(0, -2, 0, 0, 0, 0, false),
    row(1, 0, 0, 0, 0, -1, true),
    row(0, 2, 0, 0, 0, 0, false),
    row(1, 0, 0, 0, 0, 1, true),
    row(1, 0, 0, 0, 0, -1, true),
    row(0, 2, 0, 0, 0, 0, false),
    row(1, 0, 0, 0, 0, 1, true),
    row(0, -2, 0, 0, 0, 0, false),
];

const Q00_ROWS: [PhaseEntry; 8] = [
    row(1, 0, 2, 0, 0, -1, true),
    row(2, 0, 0, 1, 2, 0, false),
    row(1, 0, -2, 0, 0, 1, true),
    row(2, 0, 0, -1, -2, 0, false),
    row(2, 0, 0, 1, 2, 0, false),
    row(0, 0, 2, 2, 0, 0, false),
    row(2, 0, 0, -1, -2, 0, false),
    row(0, 0, -2, -2, 0, 0, false),
];

const Q11_ROWS: [PhaseEntry; 8] = [
    row(0, 0, -2, -2, 0, 0, false),
    row(2, 0, 0, -1, -2, 0, false),
    row(0, 0, 2, 2, 0, 0, false),
    row(2, 0, 0, 1, 2, 0, false),
    row(2, 0, 0, -1, -2, 0, false),
    row(1, 0, -2, 0, 0, -1, true),
    row(2, 0, 0, 1, 2, 0, false),
    row(1, 0, 2, 0, 0, 1, true),
];

// Edge rows indexed by 2 n_edge + n_neighbor.
const Q0_ROWS: [PhaseEntry; 4] = [
    row(1, 0, 0, 0, 0, -1, true),
    row(0, 2, 0, 0, 0, 0, false),
    row(1, 0, 0, 0, 0, 1, true),
    row(0, -2, 0, 0, 0, 0, false),
];

const Q1_ROWS: [PhaseEntry; 4] = [
    row(0, -2, 0, 0, 0, 0, false),
    row(1, 0, 0, 0, 0, -1, true),
    row(0, 2, 0, 0, 0, 0, false),
    row(1, 0, 0, 0, 0, 1, true),
];

/// Symbolic table row for `kind` acting on `config`. For odd `K` the detuned
/// single pulses pick up an extra `pi`.
pub fn phase_entry(kind: QPulseKind, config: LocalConfig, k_odd: bool) -> Result<PhaseEntry> {
    let mut e = match (kind, config) {
        (QPulseKind::Q01 | QPulseKind::Q00 | QPulseKind::Q11, LocalConfig::Interior { left, center, right }) => {
            let i = 4 * left as usize + 2 * center as usize + right as usize;
            match kind {
                QPulseKind::Q01 => Q01_ROWS[i],
                QPulseKind::Q00 => Q00_ROWS[i],
                _ => Q11_ROWS[i],
            }
        }
        (QPulseKind::Q0Edge | QPulseKind::Q1Edge, LocalConfig::Edge { spin, neighbor }) => {
            let i = 2 * spin as usize + neighbor as usize;
            if kind == QPulseKind::Q0Edge {
                Q0_ROWS[i]
            } else {
                Q1_ROWS[i]
            }
        }
        _ => return domain(format!("{kind} does not act on a {config:?} pattern")),
    };
    if k_odd && !e.flip && !kind.is_composite() {
        e.expr.pi += 2;
    }
    Ok(e)
}

/// Phase acquired by a basis state under `kind`, and whether it flips spin `k`.
pub fn acquired_phase(kind: QPulseKind, config: LocalConfig, phi: f64, aux: &AuxiliaryConstants) -> Result<(f64, bool)> {
    let e = phase_entry(kind, config, aux.k_is_odd())?;
    Ok((wrap_phase(e.expr.eval(aux) + e.phi_coeff as f64 * phi), e.flip))
}

/// Positions read by the flip rule on spin `k`; an edge spin reads its only neighbor twice.
#[inline]
pub(crate) fn rule_neighbors(k: usize, spins: usize) -> (usize, usize) {
    let left = if k + 1 < spins { k + 1 } else { k - 1 };
    let right = if k > 0 { k - 1 } else { k + 1 };
    (left, right)
}

/// Flip rule of `kind` given the neighbor bits.
#[inline]
pub(crate) fn flip_rule(kind: QPulseKind, left: bool, right: bool) -> bool {
    match kind {
        QPulseKind::Q01 => left != right,
        QPulseKind::Q00 => !left && !right,
        QPulseKind::Q11 => left && right,
        QPulseKind::Q0Edge => !left,
        QPulseKind::Q1Edge => left,
    }
}

/// Resonant flip rule of `kind` on spin `k` of `s`.
#[inline]
pub fn resonant_flip(kind: QPulseKind, s: &BasisState, k: usize) -> bool {
    let (l, r) = rule_neighbors(k, s.len());
    flip_rule(kind, s.bit(l), s.bit(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior(bits: u8) -> LocalConfig {
        LocalConfig::Interior { left: bits & 4 != 0, center: bits & 2 != 0, right: bits & 1 != 0 }
    }

    #[test]
    fn aux_values() {
        let a = compute_aux(100).unwrap();
        assert!((a.omega - 0.01).abs() < 1e-6);
        assert!((a.theta - 628.3166).abs() < 1e-4);
        assert!((a.omega2 - a.omega).abs() / a.omega < 1e-4);
        assert!((a.omega_c - a.omega).abs() / a.omega < 1e-3);
        let a8 = compute_aux(8).unwrap();
        assert!((a8.omega - 0.125).abs() < 1e-3);
        assert!((1e4 * a8.omega - 1252.0).abs() < 1.0);
        assert!(compute_aux(0).is_err());
    }

    #[test]
    fn theta_matches_high_precision() {
        // pi * sqrt(39999.75) from a 30-digit evaluation
        let a = compute_aux(100).unwrap();
        assert!((a.theta - 628.316_567_219_482).abs() < 1e-9);
    }

    #[test]
    fn two_pi_k_identities() {
        for k in [1u32, 2, 3, 4, 8, 100, 1000] {
            let w = rabi_2pik(k);
            let turns = (w * w + 4.0).sqrt() * (PI / w);
            assert!((turns - 2.0 * PI * k as f64).abs() < 1e-9 * k as f64);
            let a = compute_aux(k).unwrap();
            let turns2 = (a.omega2.powi(2) + 16.0).sqrt() * (PI / a.omega2);
            assert!((turns2 - 2.0 * PI * a.k2 as f64).abs() < 1e-9 * k as f64);
        }
    }

    #[test]
    fn branch_is_validated_for_many_k() {
        for k in 1..=40 {
            let a = compute_aux(k).unwrap();
            assert!(composite_branch_ok(&a));
            let shifted = assemble(a.k, a.k2, a.kc, a.theta, a.big_theta + PI);
            assert!(!composite_branch_ok(&shifted), "both branches validate for K={k}");
        }
    }

    #[test]
    fn expand_shapes() {
        let a = compute_aux(100).unwrap();
        let p = ChainParams::for_adder(2, 100.0).unwrap();
        let q = expand(&QPulse::new(QPulseKind::Q01, 1, 0.0), &a, &p, 0.0).unwrap();
        assert_eq!(q.len(), 1);
        assert!((q[0].tau - PI / a.omega).abs() < 1e-12);
        assert!((q[0].tau - 100.0 * PI).abs() < 0.01);
        let q = expand(&QPulse::new(QPulseKind::Q00, 1, 0.0), &a, &p, 0.0).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].nu, 102.0);
        assert_eq!(q[1].t0, q[0].end());
        assert!((q[1].phi - (a.theta + a.big_theta)).abs() < 1e-12);
        let q = expand(&QPulse::new(QPulseKind::Q11, 1, 0.0), &a, &p, 0.0).unwrap();
        assert_eq!(q[0].nu, 98.0);
        assert!((q[1].phi + a.theta + a.big_theta).abs() < 1e-12);
        let q = expand(&QPulse::new(QPulseKind::Q0Edge, 0, 0.3), &a, &p, 5.0).unwrap();
        assert_eq!((q[0].nu, q[0].phi, q[0].t0), (1.0, 0.3, 5.0));
        assert!(expand(&QPulse::new(QPulseKind::Q0Edge, 2, 0.0), &a, &p, 0.0).is_err());
        assert!(expand(&QPulse::new(QPulseKind::Q01, 4, 0.0), &a, &p, 0.0).is_err());
    }

    #[test]
    fn composite_phase_tracks_start_time() {
        let a = compute_aux(4).unwrap();
        let p = ChainParams::for_adder(2, 100.0).unwrap();
        let q = expand(&QPulse::new(QPulseKind::Q00, 1, 0.2), &a, &p, 7.5).unwrap();
        assert!((q[1].phi - (a.theta + 0.2 + 2.0 * 7.5 + a.big_theta)).abs() < 1e-12);
    }

    #[test]
    fn table_examples() {
        let a = compute_aux(100).unwrap();
        let (ph, flip) = acquired_phase(QPulseKind::Q01, interior(0b000), 0.0, &a).unwrap();
        assert!(!flip && (ph - wrap_phase(-a.alpha)).abs() < 1e-12);
        let (ph, flip) = acquired_phase(QPulseKind::Q00, interior(0b100), 0.0, &a).unwrap();
        assert!(!flip && (ph - wrap_phase(PI + a.theta / 2.0 + a.big_theta)).abs() < 1e-12);
        let edge = LocalConfig::Edge { spin: false, neighbor: false };
        let (ph, flip) = acquired_phase(QPulseKind::Q0Edge, edge, 0.4, &a).unwrap();
        assert!(flip && (ph - (PI / 2.0 - 0.4)).abs() < 1e-12);
        assert!(acquired_phase(QPulseKind::Q0Edge, interior(0), 0.0, &a).is_err());
    }

    #[test]
    fn q01_antisymmetric_in_center_bit() {
        let a = compute_aux(8).unwrap();
        for outer in [0b000u8, 0b101] {
            let (p0, _) = acquired_phase(QPulseKind::Q01, interior(outer), 0.0, &a).unwrap();
            let (p1, _) = acquired_phase(QPulseKind::Q01, interior(outer | 0b010), 0.0, &a).unwrap();
            assert!(wrap_phase(p0 + p1).abs() < 1e-12);
        }
    }

    #[test]
    fn flip_rule_matches_tables() {
        for bits in 0..8u64 {
            let s = BasisState::from_index(bits, 3);
            for kind in [QPulseKind::Q01, QPulseKind::Q00, QPulseKind::Q11] {
                let e = phase_entry(kind, local_config(&s, 1), false).unwrap();
                assert_eq!(e.flip, resonant_flip(kind, &s, 1));
            }
            for k in [0, 2] {
                for kind in [QPulseKind::Q0Edge, QPulseKind::Q1Edge] {
                    let e = phase_entry(kind, local_config(&s, k), false).unwrap();
                    assert_eq!(e.flip, resonant_flip(kind, &s, k));
                }
            }
        }
    }

    #[test]
    fn odd_k_shifts_detuned_rows() {
        let even = phase_entry(QPulseKind::Q01, interior(0), false).unwrap();
        let odd = phase_entry(QPulseKind::Q01, interior(0), true).unwrap();
        assert_eq!(odd.expr.pi - even.expr.pi, 2);
        let c = phase_entry(QPulseKind::Q00, interior(0b100), true).unwrap();
        assert_eq!(c, phase_entry(QPulseKind::Q00, interior(0b100), false).unwrap());
    }

    #[test]
    fn phase_expr_display_and_reduce() {
        let e = PhaseExpr::half(1, 6, -2, 1, 0);
        assert_eq!(e.to_string(), "1/2pi+3alpha-gamma+1/2theta");
        assert_eq!(PhaseExpr::half(7, 0, 0, 0, 0).reduced().pi, -1);
        assert!(PhaseExpr::half(-8, 0, 0, 0, 0).is_zero_mod_2pi());
        assert!(!PhaseExpr::half(2, 0, 0, 0, 0).is_zero_mod_2pi());
    }

    #[test]
    fn two_level_resonant_pi_pulse_flips() {
        let a = compute_aux(8).unwrap();
        let mut c = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        two_level_step(&mut c, 50.0, a.omega, 50.0, PI / a.omega, 0.3, 2.0);
        assert!((c[1].norm_sqr() - 1.0).abs() < 1e-12);
        assert!(wrap_phase(c[1].arg() - (PI / 2.0 - 0.3)).abs() < 1e-9);
    }
}
