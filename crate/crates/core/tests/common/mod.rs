//! Oracles written independently of the library code paths.
#![allow(dead_code)]

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Average of `S_b^order` over all bins and all `N^M` assignments, exactly.
pub fn brute_moments(balls: usize, bins: usize, max_order: u32) -> Vec<BigRational> {
    let mut digits = vec![0usize; balls];
    let mut loads = vec![0u64; bins];
    let mut sums = vec![0u128; max_order as usize + 1];
    let total = (bins as u128).pow(balls as u32);
    for _ in 0..total {
        loads.iter_mut().for_each(|l| *l = 0);
        for &d in &digits {
            loads[d] += 1;
        }
        for &l in &loads {
            let mut p = 1u128;
            for r in 1..=max_order as usize {
                p *= l as u128;
                sums[r] += p;
            }
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < bins {
                break;
            }
            *d = 0;
        }
    }
    sums.iter()
        .map(|&s| BigRational::new(BigInt::from(s), BigInt::from(total * bins as u128)))
        .collect()
}

/// `counts[j]` = number of set partitions of `{1..q}` into `j` blocks, via
/// restricted growth strings.
pub fn partition_counts(q: usize) -> Vec<u64> {
    let mut counts = vec![0u64; q + 1];
    if q == 0 {
        counts[0] = 1;
        return counts;
    }
    fn rec(pos: usize, q: usize, blocks: usize, counts: &mut [u64]) {
        if pos == q {
            counts[blocks] += 1;
            return;
        }
        for b in 0..=blocks {
            rec(pos + 1, q, blocks.max(b + 1), counts);
        }
    }
    rec(1, q, 1, &mut counts);
    counts
}

/// Bell numbers `B_0..=B_n` from the Bell (Aitken) triangle.
pub fn bell_triangle(n: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::one()];
    let mut row = vec![BigUint::one()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for v in &row {
            let x = next.last().unwrap() + v;
            next.push(x);
        }
        out.push(next[0].clone());
        row = next;
    }
    out.truncate(n + 1);
    out
}

/// `log2(x)` to about 1e-15 relative accuracy from the top 64 bits.
pub fn log2_big(x: &BigUint) -> f64 {
    assert!(!x.is_zero());
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).log2();
    }
    let top = (x >> (bits - 64)).to_u64().unwrap();
    (top as f64).log2() + (bits - 64) as f64
}

pub fn log2_rational(r: &BigRational) -> f64 {
    let n = r.numer().to_biguint().expect("positive");
    let d = r.denom().to_biguint().expect("positive");
    log2_big(&n) - log2_big(&d)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}
