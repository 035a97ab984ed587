use crate::{Error, Result};

/// Largest arity for which all `2^n` patterns are materialized.
pub const MAX_PATTERN_ARITY: usize = 16;

/// Spin `m` (0-based) of pattern `gamma` (0-based) among the `2^n` patterns.
///
/// Pattern `gamma` reads the binary expansion of `gamma` with the first
/// coordinate as the most significant bit; bit 0 maps to +1.
#[inline]
pub fn pattern_spin(n: usize, gamma: usize, m: usize) -> i8 {
    debug_assert!(m < n);
    1 - 2 * ((gamma >> (n - 1 - m)) & 1) as i8
}

/// All `2^n` spin patterns in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSet {
    n: usize,
    spins: Vec<i8>,
}

pub fn enumerate_patterns(n: usize) -> Result<PatternSet> {
    PatternSet::new(n)
}

impl PatternSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_PATTERN_ARITY {
            return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_PATTERN_ARITY });
        }
        let count = 1usize << n;
        let mut spins = Vec::with_capacity(count * n);
        for gamma in 0..count {
            for m in 0..n {
                spins.push(pattern_spin(n, gamma, m));
            }
        }
        Ok(PatternSet { n, spins })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    /// Number of patterns, `M = 2^n`.
    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pattern(&self, gamma: usize) -> &[i8] {
        &self.spins[gamma * self.n..(gamma + 1) * self.n]
    }

    /// Index of the negated pattern `-s`.
    pub fn negation_index(&self, gamma: usize) -> usize {
        self.len() - 1 - gamma
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i8]> {
        self.spins.chunks(self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn n2_table() {
        let p = enumerate_patterns(2).unwrap();
        let rows: Vec<Vec<i8>> = p.iter().map(|r| r.to_vec()).collect();
        assert_eq!(rows, vec![vec![1, 1], vec![1, -1], vec![-1, 1], vec![-1, -1]]);
    }

    #[test]
    fn n1_table() {
        let p = enumerate_patterns(1).unwrap();
        assert_eq!(p.pattern(0), &[1]);
        assert_eq!(p.pattern(1), &[-1]);
    }

    #[test]
    fn arity_bounds() {
        assert!(matches!(enumerate_patterns(0), Err(Error::ArityOutOfRange { .. })));
        assert!(matches!(enumerate_patterns(17), Err(Error::ArityOutOfRange { .. })));
        assert_eq!(enumerate_patterns(16).unwrap().len(), 65536);
    }

    proptest! {
        #[test]
        fn negation_pairs(n in 1usize..=10) {
            let p = enumerate_patterns(n).unwrap();
            for g in 0..p.len() {
                let a = p.pattern(g);
                let b = p.pattern(p.negation_index(g));
                prop_assert!(a.iter().zip(b).all(|(x, y)| *x == -*y));
            }
        }

        #[test]
        fn patterns_are_distinct(n in 1usize..=8) {
            let p = enumerate_patterns(n).unwrap();
            let mut seen = std::collections::HashSet::new();
            for row in p.iter() {
                prop_assert!(seen.insert(row.to_vec()));
            }
        }
    }
}
