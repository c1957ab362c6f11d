//! FCIDUMP integral files.
//!
//! Layout: a namelist header opened by `&FCI` (or `$FCI`) and closed by
//! `&END`, `$END` or `/`, then one record per line `value i j k l` with
//! 1-based spatial indices in chemists' notation. `i=j=k=l=0` is the scalar
//! core energy, `k=l=0` a one-electron integral, anything else `(ij|kl)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::determinant::{spatial_of, spin_of, Determinant};
use crate::error::{Error, Result};

/// Hard cap on spatial orbitals; one 32-bit mask per spin.
pub const MAX_ORBITALS: usize = 32;

#[inline]
fn pair_index(p: usize, q: usize) -> usize {
    let (hi, lo) = if p >= q { (p, q) } else { (q, p) };
    hi * (hi + 1) / 2 + lo
}

/// Molecular integrals over real spatial orbitals.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralStore {
    n_orbitals: usize,
    n_electrons: usize,
    ms2: i32,
    core_energy: f64,
    one_electron: Vec<f64>,
    // one slot per 8-fold symmetry class, keyed by pair_index(pair(pq), pair(rs))
    two_electron: Vec<f64>,
}

impl IntegralStore {
    /// Zero integrals over `n_orbitals` orbitals.
    pub fn new(n_orbitals: usize, n_electrons: usize, ms2: i32) -> Result<Self> {
        if n_orbitals == 0 || n_orbitals > MAX_ORBITALS {
            return Err(Error::OrbitalSpace(format!("NORB={n_orbitals} must lie in 1..={MAX_ORBITALS}")));
        }
        if n_electrons == 0 || n_electrons > 2 * n_orbitals {
            return Err(Error::OrbitalSpace(format!(
                "NELEC={n_electrons} incompatible with {n_orbitals} orbitals"
            )));
        }
        if ms2.unsigned_abs() as usize > n_electrons || (n_electrons as i64 + ms2 as i64) % 2 != 0 {
            return Err(Error::OrbitalSpace(format!("MS2={ms2} incompatible with NELEC={n_electrons}")));
        }
        let n_pairs = n_orbitals * (n_orbitals + 1) / 2;
        Ok(Self {
            n_orbitals,
            n_electrons,
            ms2,
            core_energy: 0.0,
            one_electron: vec![0.0; n_orbitals * n_orbitals],
            two_electron: vec![0.0; n_pairs * (n_pairs + 1) / 2],
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_fcidump(text)
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i32 {
        self.ms2
    }

    pub fn n_alpha(&self) -> usize {
        ((self.n_electrons as i64 + self.ms2 as i64) / 2) as usize
    }

    pub fn n_beta(&self) -> usize {
        ((self.n_electrons as i64 - self.ms2 as i64) / 2) as usize
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn set_core_energy(&mut self, value: f64) {
        self.core_energy = value;
    }

    /// `h_pq`, 0-based, unchecked beyond slice bounds.
    #[inline]
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.one_electron[p * self.n_orbitals + q]
    }

    /// `(pq|rs)`, 0-based.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_electron[pair_index(pair_index(p, q), pair_index(r, s))]
    }

    /// `h_pq` with 1-based indices.
    pub fn get_one_electron(&self, p: usize, q: usize) -> Result<f64> {
        self.check(&[p, q])?;
        Ok(self.h(p - 1, q - 1))
    }

    /// `(pq|rs)` with 1-based indices; zero if never set.
    pub fn get_two_electron(&self, p: usize, q: usize, r: usize, s: usize) -> Result<f64> {
        self.check(&[p, q, r, s])?;
        Ok(self.eri(p - 1, q - 1, r - 1, s - 1))
    }

    /// Sets `h_pq = h_qp`, 1-based.
    pub fn set_one_electron(&mut self, p: usize, q: usize, value: f64) -> Result<()> {
        self.check(&[p, q])?;
        let m = self.n_orbitals;
        self.one_electron[(p - 1) * m + (q - 1)] = value;
        self.one_electron[(q - 1) * m + (p - 1)] = value;
        Ok(())
    }

    /// Sets the whole symmetry class of `(pq|rs)`, 1-based.
    pub fn set_two_electron(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) -> Result<()> {
        self.check(&[p, q, r, s])?;
        let k = pair_index(pair_index(p - 1, q - 1), pair_index(r - 1, s - 1));
        self.two_electron[k] = value;
        Ok(())
    }

    fn check(&self, indices: &[usize]) -> Result<()> {
        match indices.iter().find(|&&x| x == 0 || x > self.n_orbitals) {
            Some(&index) => Err(Error::IndexOutOfRange { index, n_orbitals: self.n_orbitals }),
            None => Ok(()),
        }
    }

    /// Keeps the first `max_orbitals` orbitals, dropping the highest indices.
    pub fn window(&self, max_orbitals: usize) -> Result<Self> {
        if max_orbitals == 0 || max_orbitals > self.n_orbitals {
            return Err(Error::OrbitalSpace(format!(
                "window of {max_orbitals} orbitals outside 1..={}",
                self.n_orbitals
            )));
        }
        if max_orbitals == self.n_orbitals {
            return Ok(self.clone());
        }
        let mut out = Self::new(max_orbitals, self.n_electrons, self.ms2)?;
        if out.n_alpha() > max_orbitals || out.n_beta() > max_orbitals {
            return Err(Error::OrbitalSpace(format!(
                "{} electrons do not fit in {max_orbitals} orbitals",
                self.n_electrons
            )));
        }
        out.core_energy = self.core_energy;
        for p in 0..max_orbitals {
            for q in 0..max_orbitals {
                out.one_electron[p * max_orbitals + q] = self.h(p, q);
            }
        }
        let n_pairs = max_orbitals * (max_orbitals + 1) / 2;
        // pair indices of the retained orbitals are a prefix of the full range
        for pq in 0..n_pairs {
            for rs in 0..=pq {
                out.two_electron[pair_index(pq, rs)] = self.two_electron[pair_index(pq, rs)];
            }
        }
        Ok(out)
    }

    /// Serializes every nonzero integral in FCIDUMP layout.
    pub fn to_fcidump(&self) -> String {
        let m = self.n_orbitals;
        let mut out = String::new();
        let orbsym = vec!["1"; m].join(",");
        let _ = writeln!(out, " &FCI NORB={m},NELEC={},MS2={},", self.n_electrons, self.ms2);
        let _ = writeln!(out, "  ORBSYM={orbsym},");
        let _ = writeln!(out, "  ISYM=1,");
        let _ = writeln!(out, " &END");
        for p in 0..m {
            for q in 0..=p {
                for r in 0..m {
                    for s in 0..=r {
                        if pair_index(r, s) > pair_index(p, q) {
                            continue;
                        }
                        let v = self.eri(p, q, r, s);
                        if v != 0.0 {
                            let _ = writeln!(out, "{v:e} {} {} {} {}", p + 1, q + 1, r + 1, s + 1);
                        }
                    }
                }
            }
        }
        for p in 0..m {
            for q in 0..=p {
                let v = self.h(p, q);
                if v != 0.0 {
                    let _ = writeln!(out, "{v:e} {} {} 0 0", p + 1, q + 1);
                }
            }
        }
        let _ = writeln!(out, "{:e} 0 0 0 0", self.core_energy);
        out
    }
}

#[derive(Default)]
struct Header {
    norb: Option<usize>,
    nelec: Option<usize>,
    ms2: Option<i32>,
}

fn header_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses FCIDUMP text. Later duplicate records overwrite earlier ones;
/// `ORBSYM`, `ISYM` and unknown keys are read and ignored.
pub fn parse_fcidump(text: &str) -> Result<IntegralStore> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let mut header_text = String::new();
    let mut header_start = None;
    let mut closed = false;

    for (n, line) in lines.by_ref() {
        let trimmed = line.trim();
        if header_start.is_none() {
            if trimmed.is_empty() {
                continue;
            }
            let upper = trimmed.to_ascii_uppercase();
            let rest = upper
                .strip_prefix("&FCI")
                .or_else(|| upper.strip_prefix("$FCI"))
                .ok_or_else(|| header_error(n, "expected '&FCI' header"))?;
            header_start = Some(n);
            let (body, done) = split_terminator(rest);
            header_text.push_str(body);
            header_text.push(',');
            if done {
                closed = true;
                break;
            }
            continue;
        }
        let upper = trimmed.to_ascii_uppercase();
        let (body, done) = split_terminator(&upper);
        header_text.push_str(body);
        header_text.push(',');
        if done {
            closed = true;
            break;
        }
    }
    let start = header_start.ok_or_else(|| header_error(1, "missing '&FCI' header"))?;
    if !closed {
        return Err(header_error(start, "unterminated header (expected '&END' or '/')"));
    }

    let header = parse_header(&header_text, start)?;
    let norb = header.norb.ok_or_else(|| header_error(start, "header lacks NORB"))?;
    let nelec = header.nelec.ok_or_else(|| header_error(start, "header lacks NELEC"))?;
    if norb > MAX_ORBITALS {
        return Err(header_error(start, format!("NORB={norb} exceeds the limit of {MAX_ORBITALS}")));
    }
    let mut store = IntegralStore::new(norb, nelec, header.ms2.unwrap_or(0))
        .map_err(|e| header_error(start, e.to_string()))?;

    for (n, line) in lines {
        let mut fields = line.split_whitespace();
        let Some(first) = fields.next() else { continue };
        let value = parse_real(first).ok_or_else(|| header_error(n, format!("non-numeric value '{first}'")))?;
        let mut idx = [0usize; 4];
        for slot in &mut idx {
            let field = fields.next().ok_or_else(|| header_error(n, "expected four indices"))?;
            *slot = field
                .parse()
                .map_err(|_| header_error(n, format!("bad index '{field}'")))?;
            if *slot > norb {
                return Err(header_error(n, format!("index {} out of range 0..={norb}", *slot)));
            }
        }
        if fields.next().is_some() {
            return Err(header_error(n, "trailing fields after four indices"));
        }
        let [i, j, k, l] = idx;
        match (i, j, k, l) {
            (0, 0, 0, 0) => store.core_energy = value,
            (i, j, 0, 0) if i > 0 && j > 0 => store.set_one_electron(i, j, value)?,
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => store.set_two_electron(i, j, k, l, value)?,
            // orbital-energy records (i 0 0 0) carry no integral information
            (_, 0, 0, 0) => {}
            _ => return Err(header_error(n, format!("unsupported index pattern {i} {j} {k} {l}"))),
        }
    }
    Ok(store)
}

fn split_terminator(s: &str) -> (&str, bool) {
    for term in ["&END", "$END", "/"] {
        if let Some(pos) = s.find(term) {
            return (&s[..pos], true);
        }
    }
    (s, false)
}

fn parse_real(s: &str) -> Option<f64> {
    // Fortran writers sometimes emit 'D' exponents
    s.replace(['D', 'd'], "e").parse().ok().filter(|v: &f64| v.is_finite())
}

fn parse_header(text: &str, line: usize) -> Result<Header> {
    let mut header = Header::default();
    let mut key: Option<String> = None;
    // Values like ORBSYM=1,1,1 span several comma-separated tokens.
    for token in text.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
        let value = match token.split_once('=') {
            Some((k, v)) => {
                key = Some(k.trim().to_string());
                v.trim()
            }
            None => token,
        };
        if value.is_empty() {
            continue;
        }
        let Some(k) = key.as_deref() else {
            return Err(header_error(line, format!("unexpected header token '{token}'")));
        };
        let bad = |_| header_error(line, format!("bad value '{value}' for {k}"));
        match k {
            "NORB" => header.norb = Some(value.parse().map_err(bad)?),
            "NELEC" => header.nelec = Some(value.parse().map_err(bad)?),
            "MS2" => header.ms2 = Some(value.parse().map_err(bad)?),
            _ => {}
        }
    }
    Ok(header)
}

/// Diagonal Fock energies of each spin orbital.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalEnergies {
    /// Indexed by spin orbital `s = 2p + σ`.
    pub eps: Vec<f64>,
}

impl OrbitalEnergies {
    pub fn get(&self, spin_orbital: usize) -> f64 {
        self.eps[spin_orbital]
    }
}

/// `ε_s = h_ss + Σ_{t∈occ} [(ss|tt) − δ_{σs σt} (st|ts)]`.
pub fn orbital_energies(store: &IntegralStore, reference: Determinant) -> OrbitalEnergies {
    let m = store.n_orbitals();
    let occupied: Vec<usize> = reference.occupied().collect();
    let eps = (0..2 * m)
        .map(|s| {
            let p = spatial_of(s);
            occupied.iter().fold(store.h(p, p), |acc, &t| {
                let q = spatial_of(t);
                let exchange = if spin_of(s) == spin_of(t) { store.eri(p, q, q, p) } else { 0.0 };
                acc + store.eri(p, p, q, q) - exchange
            })
        })
        .collect();
    OrbitalEnergies { eps }
}

/// Largest off-diagonal element of the same-spin Fock matrix built on
/// `reference`. Nonzero values mean the orbitals are not canonical.
pub fn fock_off_diagonal_max(store: &IntegralStore, reference: Determinant) -> f64 {
    let m = store.n_orbitals();
    let occupied: Vec<usize> = reference.occupied().collect();
    let mut worst = 0.0f64;
    for s in 0..2 * m {
        for u in (s + 2..2 * m).step_by(2) {
            let (p, r) = (spatial_of(s), spatial_of(u));
            let f = occupied.iter().fold(store.h(p, r), |acc, &t| {
                let q = spatial_of(t);
                let exchange = if spin_of(s) == spin_of(t) { store.eri(p, q, q, r) } else { 0.0 };
                acc + store.eri(p, r, q, q) - exchange
            });
            worst = worst.max(f.abs());
        }
    }
    worst
}
