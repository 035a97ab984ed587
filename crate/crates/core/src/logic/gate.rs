use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::function::BooleanFunction;
use crate::{Error, Result};

/// Largest supported gate fan-in.
pub const MAX_FAN_IN: usize = 8;

/// Structural properties of a gate's truth table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateProperties {
    /// Outputs over all `2^k` input combinations sum to zero.
    pub balanced: bool,
    /// The table is an XOR of a subset of inputs, possibly negated.
    pub gf2_linear: bool,
    /// `g(S, ..., S) = S`.
    pub idempotent: bool,
}

/// A `k`-input Boolean gate.
///
/// The truth table is indexed like a `k`-ary [`BooleanFunction`]: input
/// combination `c` has input 1 as its most significant bit, a set bit meaning
/// spin −1, and table bit `c` is set iff the output is −1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Gate {
    k: u8,
    table: [u64; 4],
    properties: GateProperties,
}

impl Gate {
    pub fn from_outputs(k: usize, outputs: &[i8]) -> Result<Self> {
        if k == 0 || k > MAX_FAN_IN {
            return Err(Error::ArityOutOfRange { arity: k, min: 1, max: MAX_FAN_IN });
        }
        if outputs.len() != 1 << k {
            return Err(Error::ArityMismatch { expected: 1 << k, found: outputs.len() });
        }
        let mut table = [0u64; 4];
        for (c, &o) in outputs.iter().enumerate() {
            match o {
                1 => {}
                -1 => table[c >> 6] |= 1 << (c & 63),
                _ => return Err(Error::invalid(format!("gate output {o} is not ±1"))),
            }
        }
        Ok(Self::from_table_unchecked(k, table))
    }

    /// Gate from a rule evaluated on every input spin combination.
    pub fn from_fn(k: usize, rule: impl Fn(&[i8]) -> i8) -> Result<Self> {
        if k == 0 || k > MAX_FAN_IN {
            return Err(Error::ArityOutOfRange { arity: k, min: 1, max: MAX_FAN_IN });
        }
        let outputs: Vec<i8> = (0..1usize << k).map(|c| rule(&combination_spins(k, c))).collect();
        Self::from_outputs(k, &outputs)
    }

    /// Gate from a packed table of `2^k` bits (least significant word first).
    pub fn from_table(k: usize, table: &[u64]) -> Result<Self> {
        if k == 0 || k > MAX_FAN_IN {
            return Err(Error::ArityOutOfRange { arity: k, min: 1, max: MAX_FAN_IN });
        }
        let mut t = [0u64; 4];
        for (i, w) in table.iter().enumerate() {
            if i >= 4 {
                if *w != 0 {
                    return Err(Error::invalid("gate table longer than 256 bits"));
                }
                continue;
            }
            t[i] = *w;
        }
        let size = 1usize << k;
        for (i, w) in t.iter().enumerate() {
            let lo = i * 64;
            let valid = if size >= lo + 64 { u64::MAX } else if size <= lo { 0 } else { (1u64 << (size - lo)) - 1 };
            if w & !valid != 0 {
                return Err(Error::invalid(format!("gate table has bits beyond 2^{k} entries")));
            }
        }
        Ok(Self::from_table_unchecked(k, t))
    }

    fn from_table_unchecked(k: usize, table: [u64; 4]) -> Self {
        let mut g = Gate { k: k as u8, table, properties: GateProperties { balanced: false, gf2_linear: false, idempotent: false } };
        g.properties = g.compute_properties();
        g
    }

    /// `sgn(S1 + S2 + 1)`: −1 (True) only when both inputs are −1.
    pub fn and() -> Self {
        Self::from_fn(2, |s| if s[0] + s[1] + 1 > 0 { 1 } else { -1 }).unwrap()
    }

    /// `sgn(S1 + S2 − 1)`.
    pub fn or() -> Self {
        Self::from_fn(2, |s| if s[0] + s[1] - 1 > 0 { 1 } else { -1 }).unwrap()
    }

    /// Parity of `k` inputs in the ±1 convention: product of spins.
    pub fn xor(k: usize) -> Result<Self> {
        Self::from_fn(k, |s| s.iter().product())
    }

    /// `sgn(Σ S)` for odd `k`.
    pub fn majority(k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::invalid(format!("majority needs an odd fan-in, got {k}")));
        }
        Self::from_fn(k, |s| if s.iter().map(|&x| x as i32).sum::<i32>() > 0 { 1 } else { -1 })
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.k as usize
    }

    pub fn properties(&self) -> GateProperties {
        self.properties
    }

    /// Table bit of combination `c` (set means output −1).
    #[inline]
    pub fn table_bit(&self, c: usize) -> bool {
        (self.table[c >> 6] >> (c & 63)) & 1 == 1
    }

    #[inline]
    pub fn output(&self, c: usize) -> i8 {
        if self.table_bit(c) {
            -1
        } else {
            1
        }
    }

    pub fn table_words(&self) -> &[u64; 4] {
        &self.table
    }

    /// Gate output on an explicit input spin vector.
    pub fn eval(&self, spins: &[i8]) -> i8 {
        debug_assert_eq!(spins.len(), self.fan_in());
        let mut c = 0usize;
        for &s in spins {
            c = (c << 1) | (s < 0) as usize;
        }
        self.output(c)
    }

    /// Bit-parallel composition on packed truth tables.
    ///
    /// Each word holds one input function; the result is the gate applied
    /// pattern by pattern. Bits above the caller's pattern count are garbage
    /// and must be masked by the caller. Hot loops should build a
    /// [`ComposePlan`] once instead.
    #[inline]
    pub fn compose_words(&self, words: &[u64]) -> u64 {
        self.plan().apply(words)
    }

    /// Precomputed form of [`Gate::compose_words`].
    pub fn plan(&self) -> ComposePlan {
        let k = self.fan_in();
        let size = 1usize << k;
        let ones: u32 = self.table.iter().map(|w| w.count_ones()).sum();
        // sum of products over whichever output value has fewer table entries
        let want_set = (ones as usize) * 2 <= size;
        let mut flips = Vec::new();
        for c in (0..size).filter(|&c| self.table_bit(c) == want_set) {
            for j in 0..k {
                let bit = (c >> (k - 1 - j)) & 1;
                flips.push(if bit == 1 { 0 } else { u64::MAX });
            }
        }
        ComposePlan { k, flips, invert: !want_set }
    }

    /// `f(s) = g(f_1(s), ..., f_k(s))` for every pattern `s`.
    pub fn compose(&self, inputs: &[BooleanFunction]) -> Result<BooleanFunction> {
        if inputs.len() != self.fan_in() {
            return Err(Error::ArityMismatch { expected: self.fan_in(), found: inputs.len() });
        }
        let n = inputs[0].arity();
        if let Some(f) = inputs.iter().find(|f| f.arity() != n) {
            return Err(Error::ArityMismatch { expected: n, found: f.arity() });
        }
        let words: Vec<u64> = inputs.iter().map(|f| f.code()).collect();
        Ok(BooleanFunction::from_bits_unchecked(n, self.compose_words(&words)))
    }

    fn compute_properties(&self) -> GateProperties {
        let k = self.fan_in();
        let size = 1usize << k;
        let ones: usize = self.table.iter().map(|w| w.count_ones() as usize).sum();
        let balanced = ones * 2 == size;
        let idempotent = !self.table_bit(0) && self.table_bit(size - 1);
        let gf2_linear = (0..size).any(|subset| {
            let neg = self.table_bit(0);
            (0..size).all(|c| self.table_bit(c) == (((c & subset).count_ones() & 1 == 1) ^ neg))
        });
        GateProperties { balanced, gf2_linear, idempotent }
    }

    fn preset_name(&self) -> Option<&'static str> {
        let presets: [(&str, fn() -> Gate); 6] = [
            ("AND", Gate::and),
            ("OR", Gate::or),
            ("XOR2", || Gate::xor(2).unwrap()),
            ("XOR3", || Gate::xor(3).unwrap()),
            ("MAJ3", || Gate::majority(3).unwrap()),
            ("MAJ5", || Gate::majority(5).unwrap()),
        ];
        presets.iter().find(|(_, g)| g() == *self).map(|(n, _)| *n)
    }

    /// Table as hex, most significant digit first, `2^k / 4` digits (at least one).
    pub fn table_hex(&self) -> String {
        let size = 1usize << self.fan_in();
        let digits = (size / 4).max(1);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let bit = d * 4;
            let nibble = (self.table[bit >> 6] >> (bit & 63)) & 0xf;
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        s
    }
}

/// Sum-of-products form of a gate for repeated bit-parallel evaluation.
///
/// Each product term selects one input combination: the word of input `j`
/// is complemented where the combination has spin +1, and the AND over
/// inputs is set exactly at the patterns showing that combination. This is
/// the innermost kernel of circuit simulation and exact evolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComposePlan {
    k: usize,
    /// `k` complement masks per product term.
    flips: Vec<u64>,
    invert: bool,
}

impl ComposePlan {
    #[inline]
    pub fn apply(&self, words: &[u64]) -> u64 {
        debug_assert_eq!(words.len(), self.k);
        let mut out = 0u64;
        for term in self.flips.chunks_exact(self.k) {
            let mut t = u64::MAX;
            for (w, f) in words.iter().zip(term) {
                t &= w ^ f;
            }
            out |= t;
        }
        if self.invert {
            !out
        } else {
            out
        }
    }
}

/// Spins of input combination `c` for a `k`-input gate.
pub(crate) fn combination_spins(k: usize, c: usize) -> Vec<i8> {
    (0..k).map(|j| 1 - 2 * ((c >> (k - 1 - j)) & 1) as i8).collect()
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.preset_name() {
            Some(name) => write!(f, "{name}"),
            None => write!(f, "table:{}:{}", self.fan_in(), self.table_hex()),
        }
    }
}

impl FromStr for Gate {
    type Err = Error;

    /// Presets `AND`, `OR`, `XOR2`, `XOR3`, `MAJ3`, `MAJ5`; arbitrary tables
    /// as `table:<k>:<hex>` or `table:<hex>` (fan-in from the digit count,
    /// one digit meaning `k = 2`).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_uppercase().as_str() {
            "AND" => return Ok(Gate::and()),
            "OR" => return Ok(Gate::or()),
            "XOR2" | "XOR" => return Gate::xor(2),
            "XOR3" => return Gate::xor(3),
            "MAJ3" | "MAJ" => return Gate::majority(3),
            "MAJ5" => return Gate::majority(5),
            _ => {}
        }
        let rest = t
            .strip_prefix("table:")
            .ok_or_else(|| Error::Parse(format!("unknown gate '{t}' (AND, OR, XOR2, XOR3, MAJ3, MAJ5, table:<k>:<hex>)")))?;
        let (k, hex) = match rest.split_once(':') {
            Some((k, hex)) => (k.parse::<usize>().map_err(|_| Error::Parse(format!("bad fan-in '{k}'")))?, hex),
            None => {
                let h = rest.strip_prefix("0x").unwrap_or(rest);
                let k = match h.len() {
                    1 => 2,
                    2 => 3,
                    4 => 4,
                    8 => 5,
                    16 => 6,
                    32 => 7,
                    64 => 8,
                    _ => return Err(Error::Parse(format!("cannot infer fan-in from {} hex digits", h.len()))),
                };
                (k, rest)
            }
        };
        let hex = hex.strip_prefix("0x").unwrap_or(hex);
        if hex.is_empty() || hex.len() > 64 {
            return Err(Error::Parse(format!("bad gate table '{hex}'")));
        }
        let mut words = [0u64; 4];
        for (i, ch) in hex.chars().rev().enumerate() {
            let v = ch.to_digit(16).ok_or_else(|| Error::Parse(format!("bad hex digit '{ch}'")))? as u64;
            let bit = i * 4;
            words[bit >> 6] |= v << (bit & 63);
        }
        Gate::from_table(k, &words)
    }
}

impl TryFrom<String> for Gate {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Gate> for String {
    fn from(g: Gate) -> String {
        g.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preset_tables() {
        assert_eq!(Gate::and().table_words()[0], 0x8);
        assert_eq!(Gate::or().table_words()[0], 0xe);
        assert_eq!(Gate::xor(2).unwrap().table_words()[0], 0x6);
        assert_eq!(Gate::majority(3).unwrap().table_words()[0], 0xe8);
    }

    #[test]
    fn properties_of_presets() {
        let p = Gate::and().properties();
        assert_eq!(p, GateProperties { balanced: false, gf2_linear: false, idempotent: true });
        let p = Gate::majority(3).unwrap().properties();
        assert_eq!(p, GateProperties { balanced: true, gf2_linear: false, idempotent: true });
        let p = Gate::xor(2).unwrap().properties();
        assert!(p.balanced && p.gf2_linear && !p.idempotent);
        let p = Gate::xor(3).unwrap().properties();
        assert!(p.balanced && p.gf2_linear && p.idempotent);
        // negated XOR is still linear
        let nx = Gate::from_fn(2, |s| -s[0] * s[1]).unwrap();
        assert!(nx.properties().gf2_linear);
    }

    #[test]
    fn compose_and_of_dictators() {
        let s1 = BooleanFunction::dictator(2, 0).unwrap();
        let s2 = BooleanFunction::dictator(2, 1).unwrap();
        let and = Gate::and().compose(&[s1, s2]).unwrap();
        assert_eq!(and.code(), 0x8);
        let maj = Gate::majority(3).unwrap().compose(&[s1, s2, s2]).unwrap();
        assert_eq!(maj, s2);
    }

    #[test]
    fn compose_errors() {
        let s1 = BooleanFunction::dictator(2, 0).unwrap();
        let t = BooleanFunction::dictator(3, 0).unwrap();
        assert!(matches!(Gate::and().compose(&[s1]), Err(Error::ArityMismatch { .. })));
        assert!(matches!(Gate::and().compose(&[s1, t]), Err(Error::ArityMismatch { .. })));
        assert!(Gate::xor(9).is_err());
        assert!(Gate::majority(4).is_err());
    }

    #[test]
    fn parse_and_display() {
        for name in ["AND", "OR", "XOR2", "XOR3", "MAJ3", "MAJ5"] {
            let g: Gate = name.parse().unwrap();
            assert_eq!(g.to_string(), name);
        }
        assert_eq!("table:8".parse::<Gate>().unwrap(), Gate::and());
        assert_eq!("table:e8".parse::<Gate>().unwrap(), Gate::majority(3).unwrap());
        let g: Gate = "table:1:2".parse().unwrap();
        assert_eq!(g.fan_in(), 1);
        assert_eq!(g.to_string(), "table:1:2");
        assert_eq!(g.to_string().parse::<Gate>().unwrap(), g);
        assert!("table:2:1f".parse::<Gate>().is_err());
        assert!("NAND".parse::<Gate>().is_err());
        let j = serde_json::to_string(&Gate::majority(3).unwrap()).unwrap();
        assert_eq!(j, "\"MAJ3\"");
        assert_eq!(serde_json::from_str::<Gate>(&j).unwrap(), Gate::majority(3).unwrap());
    }

    fn random_gate(k: usize, table: [u64; 4]) -> Gate {
        let size = 1usize << k;
        let mut t = table;
        for (i, w) in t.iter_mut().enumerate() {
            let lo = i * 64;
            if size <= lo {
                *w = 0;
            } else if size < lo + 64 {
                *w &= (1u64 << (size - lo)) - 1;
            }
        }
        Gate::from_table(k, &t).unwrap()
    }

    proptest! {
        #[test]
        fn compose_matches_pointwise(k in 1usize..=4, n in 1usize..=6, table in any::<[u64; 4]>(), words in proptest::collection::vec(any::<u64>(), 4)) {
            let g = random_gate(k, table);
            let inputs: Vec<BooleanFunction> = words[..k].iter().map(|&w| BooleanFunction::from_bits_unchecked(n, w)).collect();
            let f = g.compose(&inputs).unwrap();
            for gamma in 0..1usize << n {
                let spins: Vec<i8> = inputs.iter().map(|h| h.spin(gamma)).collect();
                prop_assert_eq!(f.spin(gamma), g.eval(&spins));
            }
        }

        #[test]
        fn table_text_roundtrip(k in 1usize..=8, table in any::<[u64; 4]>()) {
            let g = random_gate(k, table);
            let back: Gate = g.to_string().parse().unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn linear_gates_detected(k in 1usize..=6, subset in any::<u8>(), neg in any::<bool>()) {
            let mask = (subset as usize) & ((1 << k) - 1);
            let g = Gate::from_fn(k, |s| {
                let mut p: i8 = if neg { -1 } else { 1 };
                for (j, &x) in s.iter().enumerate() {
                    if (mask >> (k - 1 - j)) & 1 == 1 { p *= x; }
                }
                p
            }).unwrap();
            prop_assert!(g.properties().gf2_linear);
        }
    }
}
