//! Stirling numbers of the second kind, Bell numbers, binomials and falling
//! factorials over arbitrary-precision integers.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision non-negative integer.
pub type Natural = BigUint;

/// Default largest `q_max` accepted by [`StirlingTable::build`].
pub const DEFAULT_TABLE_CAP: usize = 2048;

/// Full triangle `rows[q][j] = S(q, j)` for `0 <= j <= q <= q_max`.
///
/// Immutable once built; the Bell row sums are computed lazily, exactly once.
#[derive(Debug)]
pub struct StirlingTable {
    rows: Vec<Vec<Natural>>,
    bells: OnceLock<BellSequence>,
}

impl StirlingTable {
    pub fn build(q_max: usize) -> Result<Self> {
        Self::build_with_cap(q_max, DEFAULT_TABLE_CAP)
    }

    pub fn build_with_cap(q_max: usize, cap: usize) -> Result<Self> {
        if q_max > cap {
            return Err(Error::Capacity {
                requested: q_max,
                cap,
            });
        }
        let rows: Vec<Vec<Natural>> = StirlingRows::new().take(q_max + 1).collect();
        Ok(StirlingTable {
            rows,
            bells: OnceLock::new(),
        })
    }

    pub fn q_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, q: usize) -> Result<&[Natural]> {
        self.rows
            .get(q)
            .map(Vec::as_slice)
            .ok_or(Error::OutOfRange {
                what: "q",
                value: q as u64,
                max: self.q_max() as u64,
            })
    }

    /// `S(q, j)`; zero when `j > q`.
    pub fn get(&self, q: usize, j: usize) -> Result<Natural> {
        Ok(self.row(q)?.get(j).cloned().unwrap_or_default())
    }

    pub fn bells(&self) -> &BellSequence {
        self.bells.get_or_init(|| BellSequence {
            values: self.rows.iter().map(|r| r.iter().sum()).collect(),
        })
    }

    pub fn bell(&self, q: usize) -> Result<&Natural> {
        self.bells().get(q)
    }
}

/// Streams the rows of the Stirling triangle, keeping only the previous row.
#[derive(Debug, Default)]
pub struct StirlingRows {
    prev: Option<Vec<Natural>>,
}

impl StirlingRows {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Iterator for StirlingRows {
    type Item = Vec<Natural>;

    fn next(&mut self) -> Option<Vec<Natural>> {
        let row = match &self.prev {
            None => vec![Natural::one()],
            Some(prev) => {
                let q = prev.len();
                let mut row = Vec::with_capacity(q + 1);
                row.push(Natural::zero());
                for j in 1..=q {
                    let mut v = if j < q {
                        &prev[j] * j
                    } else {
                        Natural::zero()
                    };
                    v += &prev[j - 1];
                    row.push(v);
                }
                row
            }
        };
        self.prev = Some(row.clone());
        Some(row)
    }
}

/// `values[q] = B_q` for `0 <= q <= q_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BellSequence {
    values: Vec<Natural>,
}

impl BellSequence {
    /// Bell numbers from streamed Stirling rows, linear memory in `q_max`.
    pub fn streaming(q_max: usize) -> Self {
        BellSequence {
            values: StirlingRows::new()
                .take(q_max + 1)
                .map(|r| r.iter().sum())
                .collect(),
        }
    }

    pub fn from_values(values: Vec<Natural>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("a Bell sequence needs B_0".into()));
        }
        Ok(BellSequence { values })
    }

    pub fn q_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[Natural] {
        &self.values
    }

    pub fn get(&self, q: usize) -> Result<&Natural> {
        self.values.get(q).ok_or(Error::OutOfRange {
            what: "q",
            value: q as u64,
            max: self.q_max() as u64,
        })
    }

    /// Checks `B_{q+1} = Σ_k C(q, k)·B_k` for every `q < q_max`.
    ///
    /// Returns the first `q` at which the identity fails.
    pub fn verify_binomial_recurrence(&self) -> std::result::Result<(), usize> {
        for q in 0..self.q_max() {
            let mut c = Natural::one();
            let mut acc = Natural::zero();
            for k in 0..=q {
                acc += &c * &self.values[k];
                c = c * (q - k) / (k + 1);
            }
            if acc != self.values[q + 1] {
                return Err(q);
            }
        }
        Ok(())
    }
}

/// `C(n, k)`; zero when `k > n`.
pub fn binomial(n: &Natural, k: u64) -> Natural {
    if BigUint::from(k) > *n {
        return Natural::zero();
    }
    let mut acc = Natural::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `n (n-1) ··· (n-k+1)`; zero when `k > n`, one when `k = 0`.
pub fn falling_factorial(n: &Natural, k: u64) -> Natural {
    if BigUint::from(k) > *n {
        return Natural::zero();
    }
    (0..k).fold(Natural::one(), |acc, i| acc * (n - i))
}
