//! Ising spin chain: parameters, basis states, energies and the adder register layout.

use std::fmt;

use num_bigint::BigUint;

use crate::error::{domain, Error, Result};

/// Ising coupling. Everything else is measured in units of it.
pub const ISING_J: f64 = 1.0;

/// Physical constants of a linear chain with a uniform Larmor gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    spins: usize,
    omega0: f64,
    delta_omega: f64,
}

impl ChainParams {
    /// Chain of `spins` spins with Larmor spacing `delta_omega` and `omega0 = 0`.
    pub fn new(spins: usize, delta_omega: f64) -> Result<Self> {
        if spins < 2 {
            return domain(format!("a chain needs at least 2 spins, got {spins}"));
        }
        if !delta_omega.is_finite() || delta_omega < 10.0 * ISING_J {
            return domain(format!("delta_omega must be at least 10 J, got {delta_omega}"));
        }
        if delta_omega < 100.0 * ISING_J {
            log::warn!("delta_omega = {delta_omega} J is below 100 J; nonresonant errors will be large");
        }
        Ok(Self { spins, omega0: 0.0, delta_omega })
    }

    /// Chain holding an `addend_bits`-bit adder register, `L = 2l + 1`.
    pub fn for_adder(addend_bits: usize, delta_omega: f64) -> Result<Self> {
        if addend_bits == 0 {
            return domain("the adder needs at least one addend bit");
        }
        Self::new(2 * addend_bits + 1, delta_omega)
    }

    pub fn with_omega0(mut self, omega0: f64) -> Self {
        self.omega0 = omega0;
        self
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    /// `l` for an adder chain; errors if `L` is even.
    pub fn addend_bits(&self) -> Result<usize> {
        if self.spins % 2 == 1 {
            Ok(self.spins / 2)
        } else {
            domain(format!("a {}-spin chain is not an adder register", self.spins))
        }
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    /// Larmor frequency of spin `k`.
    pub fn larmor(&self, k: usize) -> f64 {
        self.omega0 + k as f64 * self.delta_omega
    }

    fn check(&self, s: &BasisState) -> Result<()> {
        if s.len() != self.spins {
            return Err(Error::LengthMismatch { expected: self.spins, found: s.len() });
        }
        Ok(())
    }
}

/// Computational basis label; bit `k` is the state of spin `k` (0 = along the field).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    len: usize,
    words: Box<[u64]>,
}

impl BasisState {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)].into_boxed_slice() }
    }

    /// State whose spin `k` is bit `k` of `index`. Requires `len <= 64`.
    pub fn from_index(index: u64, len: usize) -> Self {
        assert!(len <= 64, "from_index supports at most 64 spins");
        let mut s = Self::zeros(len);
        if len > 0 {
            let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
            s.words[0] = index & mask;
        }
        s
    }

    /// Bits listed from spin 0 upwards.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut s = Self::zeros(bits.len());
        for (k, b) in bits.into_iter().enumerate() {
            s.set(k, b);
        }
        s
    }

    /// Dense index (spin `k` is bit `k`). Requires `len <= 63`.
    pub fn index(&self) -> usize {
        assert!(self.len <= 63, "dense index needs at most 63 spins");
        self.words.first().copied().unwrap_or(0) as usize
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, k: usize) -> bool {
        debug_assert!(k < self.len);
        (self.words[k >> 6] >> (k & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, k: usize, value: bool) {
        assert!(k < self.len, "spin {k} out of range for {} spins", self.len);
        let m = 1u64 << (k & 63);
        if value {
            self.words[k >> 6] |= m;
        } else {
            self.words[k >> 6] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, k: usize) {
        assert!(k < self.len, "spin {k} out of range for {} spins", self.len);
        self.words[k >> 6] ^= 1u64 << (k & 63);
    }

    pub fn flipped(&self, k: usize) -> Self {
        let mut s = self.clone();
        s.flip(k);
        s
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Bit as `1/2 - n_k`.
    #[inline]
    pub(crate) fn z(&self, k: usize) -> f64 {
        if self.bit(k) {
            -0.5
        } else {
            0.5
        }
    }
}

impl fmt::Display for BasisState {
    /// Spin `L-1` first, as in `|b_{L-1} ... b_0>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for k in (0..self.len).rev() {
            write!(f, "{}", if self.bit(k) { '1' } else { '0' })?;
        }
        write!(f, ">")
    }
}

impl fmt::Debug for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// States of the neighbors of spin `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeighborConfig {
    Both0,
    Mixed,
    Both1,
    Edge0,
    Edge1,
}

impl NeighborConfig {
    /// Ising shift of the transition frequency relative to the Larmor frequency.
    pub fn ising_shift(self) -> f64 {
        match self {
            NeighborConfig::Both0 => 2.0 * ISING_J,
            NeighborConfig::Both1 => -2.0 * ISING_J,
            NeighborConfig::Mixed => 0.0,
            NeighborConfig::Edge0 => ISING_J,
            NeighborConfig::Edge1 => -ISING_J,
        }
    }
}

pub fn neighbor_config(s: &BasisState, k: usize) -> NeighborConfig {
    let n = s.len();
    assert!(k < n, "spin {k} out of range for {n} spins");
    let left = (k + 1 < n).then(|| s.bit(k + 1));
    let right = (k > 0).then(|| s.bit(k - 1));
    match (left, right) {
        (Some(a), Some(b)) if a != b => NeighborConfig::Mixed,
        (Some(false), Some(false)) => NeighborConfig::Both0,
        (Some(_), Some(_)) => NeighborConfig::Both1,
        (Some(false), None) | (None, Some(false)) => NeighborConfig::Edge0,
        (Some(true), None) | (None, Some(true)) => NeighborConfig::Edge1,
        (None, None) => panic!("a single spin has no neighbors"),
    }
}

/// Diagonal energy of `s`.
pub fn state_energy(s: &BasisState, p: &ChainParams) -> Result<f64> {
    p.check(s)?;
    Ok(energy_unchecked(s, p))
}

pub(crate) fn energy_unchecked(s: &BasisState, p: &ChainParams) -> f64 {
    let n = s.len();
    let mut e = 0.0;
    for k in 0..n {
        e -= p.larmor(k) * s.z(k);
    }
    for k in 0..n - 1 {
        e -= 2.0 * ISING_J * s.z(k) * s.z(k + 1);
    }
    e
}

/// `E(s with spin k flipped) - E(s)`.
#[inline]
pub fn flip_energy(s: &BasisState, k: usize, p: &ChainParams) -> f64 {
    let n = s.len();
    let mut f = p.larmor(k);
    if k > 0 {
        f += 2.0 * ISING_J * s.z(k - 1);
    }
    if k + 1 < n {
        f += 2.0 * ISING_J * s.z(k + 1);
    }
    2.0 * s.z(k) * f
}

/// Resonance frequency for flipping spin `k` of `s`.
pub fn transition_frequency(s: &BasisState, k: usize, p: &ChainParams) -> Result<f64> {
    p.check(s)?;
    if k >= s.len() {
        return domain(format!("spin {k} out of range for {} spins", s.len()));
    }
    Ok(p.larmor(k) + neighbor_config(s, k).ising_shift())
}

/// Register `|b^{l-1} 0 ... b^1 0 b^0 0 0>` holding `b` in the even spins from 2 up.
pub fn encode_addend_register(b: &BigUint, addend_bits: usize) -> Result<BasisState> {
    if addend_bits == 0 {
        return domain("the adder needs at least one addend bit");
    }
    if b.bits() > addend_bits as u64 {
        return domain(format!("addend {b} does not fit in {addend_bits} bits"));
    }
    let mut s = BasisState::zeros(2 * addend_bits + 1);
    for j in 0..addend_bits {
        if b.bit(j as u64) {
            s.set(2 * j + 2, true);
        }
    }
    Ok(s)
}

/// Reads the sum from spins `0, 2, ..., 2l`.
pub fn decode_sum(s: &BasisState, addend_bits: usize) -> BigUint {
    let mut out = BigUint::default();
    for j in 0..=addend_bits {
        if 2 * j < s.len() && s.bit(2 * j) {
            out.set_bit(j as u64, true);
        }
    }
    out
}

/// One-bit full adder, returning `(sum, carry)`.
pub fn classical_full_adder(a: bool, b: bool, c: bool) -> (bool, bool) {
    (a ^ b ^ c, (a & b) ^ (a & c) ^ (b & c))
}
