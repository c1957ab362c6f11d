//! Slater determinants as occupation bitmasks and the fermionic algebra of
//! particle-hole excitations.
//!
//! Spin orbitals are numbered `s = 2p + σ` with `σ = 0` for α and `σ = 1`
//! for β, so the two spin partners of spatial orbital `p` are adjacent. All
//! fermionic signs are computed in this interleaved ordering: acting with
//! `a_s` or `a†_s` contributes `(-1)^n` where `n` counts the occupied spin
//! orbitals with index below `s` at that moment.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcidump::MAX_ORBITALS;

/// Occupation of up to 32 spatial orbitals for each spin.
///
/// Field order gives the canonical ordering: lexicographic on
/// `(alpha_mask, beta_mask)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant {
    alpha: u32,
    beta: u32,
}

impl Determinant {
    pub const fn new(alpha_mask: u32, beta_mask: u32) -> Self {
        Self { alpha: alpha_mask, beta: beta_mask }
    }

    /// Builds a determinant from occupied spin-orbital indices.
    pub fn from_spin_orbitals(occupied: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &s in occupied {
            if s >= 2 * MAX_ORBITALS {
                return Err(Error::InvalidInput(format!("spin orbital {s} out of range")));
            }
            mask |= 1 << s;
        }
        Ok(Self::from_spin_mask(mask))
    }

    #[inline]
    pub const fn alpha_mask(&self) -> u32 {
        self.alpha
    }

    #[inline]
    pub const fn beta_mask(&self) -> u32 {
        self.beta
    }

    #[inline]
    pub const fn n_alpha(&self) -> u32 {
        self.alpha.count_ones()
    }

    #[inline]
    pub const fn n_beta(&self) -> u32 {
        self.beta.count_ones()
    }

    /// Interleaved spin-orbital occupation: bit `2p` is α of `p`, bit `2p+1` is β.
    #[inline]
    pub fn spin_mask(&self) -> u64 {
        spread_bits(self.alpha) | (spread_bits(self.beta) << 1)
    }

    #[inline]
    pub fn from_spin_mask(mask: u64) -> Self {
        Self { alpha: gather_bits(mask), beta: gather_bits(mask >> 1) }
    }

    /// Occupied spin orbitals in ascending order.
    pub fn occupied(&self) -> impl Iterator<Item = usize> {
        BitIter(self.spin_mask())
    }

    #[inline]
    pub fn is_occupied(&self, spin_orbital: usize) -> bool {
        self.spin_mask() >> spin_orbital & 1 == 1
    }

    /// Highest occupied spatial orbital + 1, or 0 for the vacuum.
    pub fn span(&self) -> usize {
        (32 - (self.alpha | self.beta).leading_zeros()) as usize
    }

    /// Renders as `a:<bits> b:<bits>`, bit 0 first.
    pub fn render(&self, n_orbitals: usize) -> String {
        format!("a:{} b:{}", bit_string(self.alpha, n_orbitals), bit_string(self.beta, n_orbitals))
    }
}

impl fmt::Display for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(self.span().max(1)))
    }
}

/// Little-endian bit string of the low `width` bits.
pub fn bit_string(mask: u32, width: usize) -> String {
    (0..width).map(|p| if mask >> p & 1 == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`bit_string`].
pub fn parse_bit_string(text: &str) -> Result<u32> {
    if text.len() > MAX_ORBITALS {
        return Err(Error::InvalidInput(format!("bit string '{text}' longer than 32")));
    }
    text.chars().enumerate().try_fold(0u32, |mask, (p, c)| match c {
        '0' => Ok(mask),
        '1' => Ok(mask | 1 << p),
        _ => Err(Error::InvalidInput(format!("bad bit string '{text}'"))),
    })
}

#[inline]
fn spread_bits(x: u32) -> u64 {
    let mut x = x as u64;
    x = (x | x << 16) & 0x0000_FFFF_0000_FFFF;
    x = (x | x << 8) & 0x00FF_00FF_00FF_00FF;
    x = (x | x << 4) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | x << 2) & 0x3333_3333_3333_3333;
    (x | x << 1) & 0x5555_5555_5555_5555
}

#[inline]
fn gather_bits(x: u64) -> u32 {
    let mut x = x & 0x5555_5555_5555_5555;
    x = (x | x >> 1) & 0x3333_3333_3333_3333;
    x = (x | x >> 2) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | x >> 4) & 0x00FF_00FF_00FF_00FF;
    x = (x | x >> 8) & 0x0000_FFFF_0000_FFFF;
    (x | x >> 16) as u32
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let s = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(s)
    }
}

/// Iterates set bits of a spin mask in ascending order.
pub(crate) fn bits(mask: u64) -> impl Iterator<Item = usize> {
    BitIter(mask)
}

#[inline]
pub(crate) fn spin_of(spin_orbital: usize) -> usize {
    spin_orbital & 1
}

#[inline]
pub(crate) fn spatial_of(spin_orbital: usize) -> usize {
    spin_orbital >> 1
}

/// Parity of the occupied spin orbitals strictly below `s`.
#[inline]
fn parity_below(mask: u64, s: u32) -> bool {
    (mask & ((1u64 << s) - 1)).count_ones() & 1 == 1
}

#[inline]
fn annihilate(mask: &mut u64, s: u32, odd: &mut bool) -> bool {
    if *mask >> s & 1 == 0 {
        return false;
    }
    *mask &= !(1 << s);
    *odd ^= parity_below(*mask, s);
    true
}

#[inline]
fn create(mask: &mut u64, s: u32, odd: &mut bool) -> bool {
    if *mask >> s & 1 == 1 {
        return false;
    }
    *odd ^= parity_below(*mask, s);
    *mask |= 1 << s;
    true
}

/// A determinant together with the fermionic sign picked up producing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedDeterminant {
    pub det: Determinant,
    /// Always `+1` or `-1`.
    pub phase: i8,
}

impl SignedDeterminant {
    #[inline]
    pub fn sign(&self) -> f64 {
        f64::from(self.phase)
    }
}

/// Spin-conserving single or double particle-hole excitation.
///
/// Indices are spin orbitals; doubles are stored with `i < j` and `a < b`.
/// The operator is `a†_a a_i` for singles and `a†_a a†_b a_j a_i` for doubles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExcitationOperator {
    Single { i: u8, a: u8 },
    Double { i: u8, j: u8, a: u8, b: u8 },
}

impl ExcitationOperator {
    pub fn single(i: usize, a: usize) -> Result<Self> {
        check_index(i)?;
        check_index(a)?;
        if i == a {
            return Err(Error::InvalidOperator(format!("single {i}->{a} moves nothing")));
        }
        if spin_of(i) != spin_of(a) {
            return Err(Error::InvalidOperator(format!("single {i}->{a} flips spin")));
        }
        Ok(Self::Single { i: i as u8, a: a as u8 })
    }

    /// Canonicalizes to `i < j`, `a < b`. The reordering sign is absorbed into
    /// the parameter that multiplies the operator, so it is not reported.
    pub fn double(i: usize, j: usize, a: usize, b: usize) -> Result<Self> {
        for s in [i, j, a, b] {
            check_index(s)?;
        }
        let (i, j) = (i.min(j), i.max(j));
        let (a, b) = (a.min(b), a.max(b));
        if i == j || a == b || i == a || i == b || j == a || j == b {
            return Err(Error::InvalidOperator(format!("double ({i},{j})->({a},{b}) repeats an index")));
        }
        if spin_of(i) + spin_of(j) != spin_of(a) + spin_of(b) {
            return Err(Error::InvalidOperator(format!("double ({i},{j})->({a},{b}) changes Sz")));
        }
        Ok(Self::Double { i: i as u8, j: j as u8, a: a as u8, b: b as u8 })
    }

    pub fn is_double(&self) -> bool {
        matches!(self, Self::Double { .. })
    }

    /// Spin orbitals emptied by the excitation.
    #[inline]
    pub fn hole_mask(&self) -> u64 {
        match *self {
            Self::Single { i, .. } => 1 << i,
            Self::Double { i, j, .. } => 1 << i | 1 << j,
        }
    }

    /// Spin orbitals filled by the excitation.
    #[inline]
    pub fn particle_mask(&self) -> u64 {
        match *self {
            Self::Single { a, .. } => 1 << a,
            Self::Double { a, b, .. } => 1 << a | 1 << b,
        }
    }

    /// Largest spin-orbital index touched.
    pub fn max_index(&self) -> usize {
        match *self {
            Self::Single { i, a } => i.max(a) as usize,
            Self::Double { i, j, a, b } => i.max(j).max(a).max(b) as usize,
        }
    }

    /// Acts on an interleaved spin mask; `None` if the action vanishes.
    #[inline]
    pub(crate) fn excite_mask(&self, mask: u64) -> Option<(u64, bool)> {
        let mut m = mask;
        let mut odd = false;
        let ok = match *self {
            Self::Single { i, a } => annihilate(&mut m, i.into(), &mut odd) && create(&mut m, a.into(), &mut odd),
            Self::Double { i, j, a, b } => {
                annihilate(&mut m, i.into(), &mut odd)
                    && annihilate(&mut m, j.into(), &mut odd)
                    && create(&mut m, b.into(), &mut odd)
                    && create(&mut m, a.into(), &mut odd)
            }
        };
        ok.then_some((m, odd))
    }

    /// Adjoint action: `a†_i a_a` or `a†_i a†_j a_b a_a`.
    #[inline]
    pub(crate) fn deexcite_mask(&self, mask: u64) -> Option<(u64, bool)> {
        let mut m = mask;
        let mut odd = false;
        let ok = match *self {
            Self::Single { i, a } => annihilate(&mut m, a.into(), &mut odd) && create(&mut m, i.into(), &mut odd),
            Self::Double { i, j, a, b } => {
                annihilate(&mut m, a.into(), &mut odd)
                    && annihilate(&mut m, b.into(), &mut odd)
                    && create(&mut m, j.into(), &mut odd)
                    && create(&mut m, i.into(), &mut odd)
            }
        };
        ok.then_some((m, odd))
    }
}

impl fmt::Display for ExcitationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Single { i, a } => write!(f, "single {i}->{a}"),
            Self::Double { i, j, a, b } => write!(f, "double ({i},{j})->({a},{b})"),
        }
    }
}

fn check_index(s: usize) -> Result<()> {
    if s >= 2 * MAX_ORBITALS {
        return Err(Error::InvalidOperator(format!("spin orbital {s} out of range")));
    }
    Ok(())
}

fn signed(result: Option<(u64, bool)>) -> Option<SignedDeterminant> {
    result.map(|(mask, odd)| SignedDeterminant {
        det: Determinant::from_spin_mask(mask),
        phase: if odd { -1 } else { 1 },
    })
}

/// Aufbau filling of the lowest `n_alpha` and `n_beta` spatial orbitals.
pub fn hartree_fock_reference(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> Result<Determinant> {
    if n_orbitals > MAX_ORBITALS {
        return Err(Error::OrbitalSpace(format!("{n_orbitals} orbitals exceeds {MAX_ORBITALS}")));
    }
    if n_alpha > n_orbitals || n_beta > n_orbitals {
        return Err(Error::OrbitalSpace(format!(
            "{n_alpha} alpha / {n_beta} beta electrons do not fit in {n_orbitals} orbitals"
        )));
    }
    let fill = |n: usize| if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    Ok(Determinant::new(fill(n_alpha), fill(n_beta)))
}

pub fn apply_excitation(det: Determinant, op: &ExcitationOperator) -> Option<SignedDeterminant> {
    signed(op.excite_mask(det.spin_mask()))
}

pub fn apply_deexcitation(det: Determinant, op: &ExcitationOperator) -> Option<SignedDeterminant> {
    signed(op.deexcite_mask(det.spin_mask()))
}

/// Number of electrons that must move to turn `d1` into `d2`.
#[inline]
pub fn excitation_degree(d1: Determinant, d2: Determinant) -> usize {
    (((d1.alpha ^ d2.alpha).count_ones() + (d1.beta ^ d2.beta).count_ones()) / 2) as usize
}

/// All determinants with the given electron counts, in canonical order.
pub fn enumerate_sector(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> Vec<Determinant> {
    let alphas = combinations(n_orbitals, n_alpha);
    let betas = combinations(n_orbitals, n_beta);
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &a in &alphas {
        for &b in &betas {
            out.push(Determinant::new(a, b));
        }
    }
    out
}

/// Bitmasks with `k` of the low `n` bits set, ascending.
pub fn combinations(n: usize, k: usize) -> Vec<u32> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let limit = (1u64 << n) - 1;
    let mut out = Vec::new();
    let mut v: u64 = (1u64 << k) - 1;
    while v <= limit {
        out.push(v as u32);
        // next permutation with the same popcount (Gosper's hack)
        let t = v | (v - 1);
        let w = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
        if w <= v {
            break;
        }
        v = w;
    }
    out
}

/// Number of `k`-subsets of `n`, saturating.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    usize::try_from(acc).unwrap_or(usize::MAX)
}
