use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::patterns::pattern_spin;
use crate::{Error, Result};

/// Largest arity for which a function fits in one 64-bit truth table.
pub const MAX_FUNCTION_ARITY: usize = 6;
/// Largest arity for which all `2^(2^n)` functions may be enumerated.
pub const MAX_ENUMERATION_ARITY: usize = 3;

/// A Boolean function of `n ≤ 6` spins stored as a packed truth table.
///
/// Bit `gamma` of the table is set iff `f(s_gamma) = -1`, where `s_gamma`
/// is pattern `gamma` in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BooleanFunction {
    n: u8,
    bits: u64,
}

impl BooleanFunction {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        check_arity(n)?;
        if bits & !Self::mask(n) != 0 {
            return Err(Error::invalid(format!("truth table {bits:#x} has bits beyond 2^{n} patterns")));
        }
        Ok(BooleanFunction { n: n as u8, bits })
    }

    /// Construct without range checks; `bits` is masked to the valid width.
    #[inline]
    pub(crate) fn from_bits_unchecked(n: usize, bits: u64) -> Self {
        BooleanFunction { n: n as u8, bits: bits & Self::mask(n) }
    }

    /// Mask with the low `2^n` bits set.
    #[inline]
    pub fn mask(n: usize) -> u64 {
        let m = 1u32 << n;
        if m >= 64 {
            u64::MAX
        } else {
            (1u64 << m) - 1
        }
    }

    pub fn constant(n: usize, spin: i8) -> Result<Self> {
        check_arity(n)?;
        Ok(BooleanFunction { n: n as u8, bits: if spin < 0 { Self::mask(n) } else { 0 } })
    }

    /// The dictator `f(s) = s_m` (0-based `m`).
    pub fn dictator(n: usize, m: usize) -> Result<Self> {
        check_arity(n)?;
        if m >= n {
            return Err(Error::invalid(format!("coordinate {m} out of range for arity {n}")));
        }
        let spins: Vec<i8> = (0..1usize << n).map(|g| pattern_spin(n, g, m)).collect();
        Self::from_spins(n, &spins)
    }

    pub fn from_spins(n: usize, spins: &[i8]) -> Result<Self> {
        check_arity(n)?;
        if spins.len() != 1 << n {
            return Err(Error::ArityMismatch { expected: 1 << n, found: spins.len() });
        }
        let mut bits = 0u64;
        for (g, &s) in spins.iter().enumerate() {
            match s {
                1 => {}
                -1 => bits |= 1 << g,
                _ => return Err(Error::invalid(format!("spin value {s} is not ±1"))),
            }
        }
        Ok(BooleanFunction { n: n as u8, bits })
    }

    #[inline]
    pub fn arity(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn code(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn num_patterns(&self) -> usize {
        1 << self.n
    }

    #[inline]
    pub fn bit(&self, gamma: usize) -> bool {
        (self.bits >> gamma) & 1 == 1
    }

    #[inline]
    pub fn spin(&self, gamma: usize) -> i8 {
        1 - 2 * ((self.bits >> gamma) & 1) as i8
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.num_patterns()).map(|g| self.spin(g)).collect()
    }

    /// Output-negated function `-f`.
    #[inline]
    pub fn negate(&self) -> Self {
        BooleanFunction { n: self.n, bits: !self.bits & Self::mask(self.arity()) }
    }

    /// `f(-s) = -f(s)` for every pattern.
    pub fn is_odd(&self) -> bool {
        let n = self.arity();
        let m = 1u32 << n;
        // pattern M-1-g is the negation of pattern g: reverse the table
        let reversed = self.bits.reverse_bits() >> (64 - m);
        (self.bits ^ reversed) == Self::mask(n)
    }

    pub fn is_constant(&self) -> bool {
        self.bits == 0 || self.bits == Self::mask(self.arity())
    }

    pub fn hamming(&self, other: &Self) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    /// All `2^(2^n)` functions in code order.
    pub fn enumerate(n: usize) -> Result<impl Iterator<Item = BooleanFunction>> {
        if n == 0 || n > MAX_ENUMERATION_ARITY {
            return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_ENUMERATION_ARITY });
        }
        let count = 1u64 << (1u32 << n);
        Ok((0..count).map(move |b| BooleanFunction { n: n as u8, bits: b }))
    }

    /// Number of functions of arity `n`, as a float (exact for `n ≤ 5`).
    pub fn count(n: usize) -> f64 {
        2f64.powi(1 << n)
    }

    /// Hex form of the truth table (no `0x` prefix, at least one digit).
    pub fn hex(&self) -> String {
        format!("{:x}", self.bits)
    }
}

fn check_arity(n: usize) -> Result<()> {
    if n == 0 || n > MAX_FUNCTION_ARITY {
        return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_FUNCTION_ARITY });
    }
    Ok(())
}

impl fmt::Display for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}:{:#x}", self.n, self.bits)
    }
}

impl FromStr for BooleanFunction {
    type Err = Error;

    /// Parses `n=<arity>:0x<hex>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("expected 'n=<arity>:0x<hex>', got '{s}'"));
        let rest = s.trim().strip_prefix("n=").ok_or_else(bad)?;
        let (n, hex) = rest.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        let hex = hex.strip_prefix("0x").unwrap_or(hex);
        let bits = u64::from_str_radix(hex, 16).map_err(|_| bad())?;
        BooleanFunction::new(n, bits)
    }
}

impl TryFrom<String> for BooleanFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BooleanFunction> for String {
    fn from(f: BooleanFunction) -> String {
        f.to_string()
    }
}

/// Parse a bare hex truth table for arity `n` (`"8"`, `"0x8"`).
pub(crate) fn parse_hex(n: usize, hex: &str) -> Result<BooleanFunction> {
    let h = hex.trim();
    let h = h.strip_prefix("0x").unwrap_or(h);
    let bits = u64::from_str_radix(h, 16).map_err(|_| Error::Parse(format!("bad hex truth table '{hex}'")))?;
    BooleanFunction::new(n, bits)
}
