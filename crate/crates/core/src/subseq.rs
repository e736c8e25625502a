//! Strictly increasing index sequences `k = {k_j}` with density bookkeeping.
//!
//! Indices are natural numbers starting at 0, and `k_0` is the first term.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SubsequenceSpec {
    /// `k_j = j`.
    All,
    /// `k_j = step·j + offset`.
    Arithmetic { step: u64, offset: u64 },
    /// Complement of the perfect squares: 2, 3, 5, 6, 7, 8, 10, …
    NoSquares,
    /// Finite explicit list.
    List { terms: Vec<u64> },
    /// `k_j = ⌊j·num/den⌋` with `num ≥ den`, density `den/num`.
    Rate { num: u64, den: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsequence {
    spec: SubsequenceSpec,
}

fn isqrt(m: u64) -> u64 {
    let mut r = (m as f64).sqrt() as u64;
    while r * r > m {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= m {
        r += 1;
    }
    r
}

impl Subsequence {
    pub fn new(spec: SubsequenceSpec) -> Result<Self> {
        match &spec {
            SubsequenceSpec::Arithmetic { step, .. } if *step == 0 => return invalid("arithmetic step must be ≥ 1"),
            SubsequenceSpec::List { terms } => {
                if let Some(w) = terms.windows(2).find(|w| w[1] <= w[0]) {
                    return invalid(format!("list is not strictly increasing at {} → {}", w[0], w[1]));
                }
            }
            SubsequenceSpec::Rate { num, den } if *den == 0 || num < den => {
                return invalid("rate needs num ≥ den ≥ 1")
            }
            _ => {}
        }
        Ok(Self { spec })
    }

    pub fn all() -> Self {
        Self { spec: SubsequenceSpec::All }
    }

    pub fn arithmetic(step: u64, offset: u64) -> Result<Self> {
        Self::new(SubsequenceSpec::Arithmetic { step, offset })
    }

    pub fn no_squares() -> Self {
        Self { spec: SubsequenceSpec::NoSquares }
    }

    pub fn list(terms: Vec<u64>) -> Result<Self> {
        Self::new(SubsequenceSpec::List { terms })
    }

    pub fn spec(&self) -> &SubsequenceSpec {
        &self.spec
    }

    /// Number of terms, `None` for infinite sequences.
    pub fn len(&self) -> Option<usize> {
        match &self.spec {
            SubsequenceSpec::List { terms } => Some(terms.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// `k_j`, or `None` past the end of a finite list.
    pub fn term(&self, j: u64) -> Option<u64> {
        Some(match &self.spec {
            SubsequenceSpec::All => j,
            SubsequenceSpec::Arithmetic { step, offset } => step * j + offset,
            SubsequenceSpec::NoSquares => {
                // the j-th non-square is m + round(√m) with m = j + 1
                let m = j + 1;
                let r = isqrt(m);
                m + if m - r * r > r { r + 1 } else { r }
            }
            SubsequenceSpec::List { terms } => return terms.get(j as usize).copied(),
            SubsequenceSpec::Rate { num, den } => ((j as u128 * *num as u128) / *den as u128) as u64,
        })
    }

    /// `k_0, …, k_{n-1}`.
    pub fn prefix(&self, n: usize) -> Result<Vec<u64>> {
        (0..n as u64)
            .map(|j| self.term(j))
            .collect::<Option<Vec<_>>>()
            .map_or_else(|| invalid(format!("subsequence has fewer than {n} terms")), Ok)
    }

    pub fn contains(&self, m: u64) -> bool {
        match &self.spec {
            SubsequenceSpec::All => true,
            SubsequenceSpec::Arithmetic { step, offset } => m >= *offset && (m - offset) % step == 0,
            SubsequenceSpec::NoSquares => {
                let r = isqrt(m);
                r * r != m
            }
            SubsequenceSpec::List { terms } => terms.binary_search(&m).is_ok(),
            SubsequenceSpec::Rate { num, den } => {
                // smallest j with ⌊j·num/den⌋ ≥ m
                let j = (m as u128 * *den as u128).div_ceil(*num as u128) as u64;
                self.term(j) == Some(m)
            }
        }
    }

    /// Analytic density shipped with each generator.
    pub fn declared_density(&self) -> Option<f64> {
        match &self.spec {
            SubsequenceSpec::All | SubsequenceSpec::NoSquares => Some(1.0),
            SubsequenceSpec::Arithmetic { step, .. } => Some(1.0 / *step as f64),
            SubsequenceSpec::List { .. } => None,
            SubsequenceSpec::Rate { num, den } => Some(*den as f64 / *num as f64),
        }
    }

    /// `|{0, …, n} ∩ k| / (n + 1)`.
    pub fn empirical_density(&self, n: u64) -> f64 {
        let count = (0..=n).filter(|&m| self.contains(m)).count();
        count as f64 / (n + 1) as f64
    }

    /// `(max_{1 ≤ n ≤ n_max} k_n/n, k_{n_max}/n_max)`: a finite first entry
    /// witnesses positive lower density, the second estimates `1/d`.
    pub fn lower_density_witness(&self, n_max: u64) -> Result<(f64, f64)> {
        if n_max == 0 {
            return invalid("n_max must be ≥ 1");
        }
        let mut sup: f64 = 0.0;
        let mut last = 0.0;
        for n in 1..=n_max {
            let k = self
                .term(n)
                .ok_or_else(|| crate::Error::InvalidArgument(format!("subsequence has no term {n}")))?;
            last = k as f64 / n as f64;
            sup = sup.max(last);
        }
        Ok((sup, last))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_density_examples() {
        assert_eq!(Subsequence::all().empirical_density(37), 1.0);
        assert_eq!(Subsequence::arithmetic(2, 0).unwrap().empirical_density(9), 0.5);
        let d = Subsequence::no_squares().empirical_density(100_000);
        assert!((d - 1.0).abs() < 0.01);
    }

    #[test]
    fn lower_density_examples() {
        assert_eq!(Subsequence::arithmetic(2, 0).unwrap().lower_density_witness(50).unwrap(), (2.0, 2.0));
        assert_eq!(Subsequence::all().lower_density_witness(50).unwrap(), (1.0, 1.0));
        let (_, last) = Subsequence::no_squares().lower_density_witness(10_000).unwrap();
        assert!((last - 1.0).abs() < 0.02);
    }

    #[test]
    fn no_squares_enumeration() {
        let k = Subsequence::no_squares();
        assert_eq!(k.prefix(7).unwrap(), vec![2, 3, 5, 6, 7, 8, 10]);
        // brute-force oracle
        let oracle: Vec<u64> = (0..20_000u64).filter(|m| ((*m as f64).sqrt().round() as u64).pow(2) != *m).collect();
        assert_eq!(k.prefix(oracle.len() - 200).unwrap(), oracle[..oracle.len() - 200]);
    }

    #[test]
    fn list_validation() {
        assert!(Subsequence::list(vec![0, 1, 1]).is_err());
        let k = Subsequence::list(vec![1, 4, 9]).unwrap();
        assert_eq!(k.term(3), None);
        assert!(k.prefix(4).is_err());
        assert!(k.contains(4) && !k.contains(5));
    }

    #[test]
    fn membership_matches_generator() {
        let specs = [
            SubsequenceSpec::All,
            SubsequenceSpec::Arithmetic { step: 3, offset: 2 },
            SubsequenceSpec::NoSquares,
            SubsequenceSpec::Rate { num: 7, den: 4 },
        ];
        for spec in specs {
            let k = Subsequence::new(spec).unwrap();
            let terms = k.prefix(500).unwrap();
            let limit = *terms.last().unwrap();
            let members: Vec<u64> = (0..=limit).filter(|&m| k.contains(m)).collect();
            assert_eq!(members, terms, "{:?}", k.spec());
        }
    }

    #[test]
    fn specs_parse_from_json() {
        let k: SubsequenceSpec = serde_json::from_str(r#"{"type": "nosquares"}"#).unwrap();
        assert_eq!(k, SubsequenceSpec::NoSquares);
        let k: SubsequenceSpec = serde_json::from_str(r#"{"type": "arithmetic", "step": 2, "offset": 0}"#).unwrap();
        assert_eq!(Subsequence::new(k).unwrap().term(4), Some(8));
    }
}
