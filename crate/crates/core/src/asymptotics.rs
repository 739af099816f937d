//! Leading-order estimates `ln q - ln ln q - 1` for `max_j ln S(q,j) / q` and
//! `ln B_q / q`, tracked against the exact values.
//!
//! Nothing downstream consumes these estimates; certificates always use exact
//! Bell numbers. The residual scaled by `ln q / ln ln q` measures the implied
//! constant of the `O(ln ln q / ln q)` error term.
//!
//! The derivation of the Bell estimate from the Stirling one rests on the
//! sandwich `max_j S(q,j) <= B_q <= q · max_j S(q,j)`, which
//! [`stirling_bell_sandwich`] checks exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{BellSequence, Natural, StirlingRows};
use crate::error::{Error, Result};
use crate::interval::{ln2_interval, log2_interval, FloatInterval, DEFAULT_FRAC_BITS};

/// Regression bound on `|scaled_residual(q)|` for `8 <= q <= 1024`.
///
/// Measured maximum is 1.9704 at q = 8; the scaled residual decreases to
/// about 1.654 at q = 1024.
pub const SCALED_RESIDUAL_BOUND: (i64, i64) = (2, 1);

pub fn scaled_residual_bound() -> BigRational {
    BigRational::new(
        BigInt::from(SCALED_RESIDUAL_BOUND.0),
        BigInt::from(SCALED_RESIDUAL_BOUND.1),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymptoticEstimate {
    pub q: u32,
    /// `ln q - ln ln q - 1`
    pub estimate: FloatInterval,
    /// `ln B_q / q`
    pub exact: FloatInterval,
    pub residual: FloatInterval,
    /// `residual · ln q / ln ln q`
    pub scaled_residual: FloatInterval,
}

fn check_q(q: u32) -> Result<()> {
    if q < 3 {
        return Err(Error::Domain(format!(
            "q = {q}: the estimate needs ln ln q > 0, i.e. q >= 3"
        )));
    }
    Ok(())
}

fn ln_q_and_lnln_q(q: u32) -> Result<(FloatInterval, FloatInterval)> {
    let ln_q = FloatInterval::from_int(q as i64, DEFAULT_FRAC_BITS).ln()?;
    let lnln_q = ln_q.ln()?;
    Ok((ln_q, lnln_q))
}

/// Enclosure of `ln q - ln ln q - 1`, the leading terms of `max_j ln S(q,j) / q`.
pub fn stirling_max_log_estimate(q: u32) -> Result<FloatInterval> {
    check_q(q)?;
    let (ln_q, lnln_q) = ln_q_and_lnln_q(q)?;
    Ok(ln_q.sub(&lnln_q).add_int(-1))
}

/// Enclosure of the leading terms of `ln B_q / q`; same closed form.
pub fn bell_log_estimate(q: u32) -> Result<FloatInterval> {
    stirling_max_log_estimate(q)
}

/// Enclosure of `ln(v) / q` for a positive integer.
fn ln_per_q(v: &Natural, q: u32) -> Result<FloatInterval> {
    let ln2 = ln2_interval(DEFAULT_FRAC_BITS);
    log2_interval(v, DEFAULT_FRAC_BITS)?.mul(&ln2).div_int(q as u64)
}

pub fn estimate_residual(q: u32, bells: &BellSequence) -> Result<AsymptoticEstimate> {
    check_q(q)?;
    let (ln_q, lnln_q) = ln_q_and_lnln_q(q)?;
    let estimate = ln_q.sub(&lnln_q).add_int(-1);
    let exact = ln_per_q(bells.get(q as usize)?, q)?;
    let residual = exact.sub(&estimate);
    let scaled_residual = residual.mul(&ln_q).div(&lnln_q)?;
    Ok(AsymptoticEstimate {
        q,
        estimate,
        exact,
        residual,
        scaled_residual,
    })
}

/// One row of the exact check `max_j S(q,j) <= B_q <= q · max_j S(q,j)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub q: u32,
    /// The `j` attaining `max_j S(q,j)` (smallest such `j`).
    pub argmax: u32,
    /// `max_j ln S(q,j) / q`
    pub max_log_per_q: FloatInterval,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Streams Stirling rows `1..=q_max` and checks the sandwich on each.
pub fn stirling_bell_sandwich(q_max: u32) -> Result<Vec<SandwichRow>> {
    StirlingRows::new()
        .take(q_max as usize + 1)
        .enumerate()
        .skip(1)
        .map(|(q, row)| {
            let (argmax, max) = row
                .iter()
                .enumerate()
                .rev()
                .max_by(|a, b| a.1.cmp(b.1))
                .map(|(j, v)| (j, v.clone()))
                .unwrap_or_default();
            let bell: Natural = row.iter().sum();
            Ok(SandwichRow {
                q: q as u32,
                argmax: argmax as u32,
                max_log_per_q: ln_per_q(&max, q as u32)?,
                lower_holds: max <= bell,
                upper_holds: bell <= &max * q,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_match_closed_form() {
        let e = stirling_max_log_estimate(16).unwrap();
        assert!((e.approx() - 0.752_807_281_701_555).abs() < 1e-14);
        let e = stirling_max_log_estimate(64).unwrap();
        assert!((e.approx() - 1.733_636_534_713_281).abs() < 1e-14);
        assert_eq!(bell_log_estimate(64).unwrap(), stirling_max_log_estimate(64).unwrap());
        let e = bell_log_estimate(1024).unwrap();
        assert!((e.approx() - 3.995_399_633_187_071).abs() < 1e-14);
        let e = bell_log_estimate(3).unwrap();
        assert!((e.approx() - 0.004_564_461_051_410_675).abs() < 1e-14);
        assert!(e.width().to_f64() < 1e-70);
        assert!(bell_log_estimate(2).is_err());
        assert!(stirling_max_log_estimate(0).is_err());
    }

    #[test]
    fn residuals() {
        let bells = BellSequence::streaming(64);
        let r = estimate_residual(8, &bells).unwrap();
        // ln(4140)/8 = 1.04126...
        assert!((r.exact.approx() - (4140f64).ln() / 8.0).abs() < 1e-14);
        assert!((r.scaled_residual.approx() - 1.970_413_045_973_551_8).abs() < 1e-12);
        let r = estimate_residual(64, &bells).unwrap();
        assert!(r.scaled_residual.approx().is_finite());
        assert!(estimate_residual(65, &bells).is_err());
    }

    #[test]
    fn estimate_strictly_increasing() {
        let est: Vec<_> = (8..=200).map(|q| bell_log_estimate(q).unwrap()).collect();
        assert!(est.windows(2).all(|w| w[0].certainly_lt(&w[1])));
    }

    #[test]
    fn sandwich_small() {
        let rows = stirling_bell_sandwich(40).unwrap();
        assert_eq!(rows.len(), 40);
        assert!(rows.iter().all(|r| r.lower_holds && r.upper_holds));
        // S(4, 2) = 7 is the largest entry of row 4
        assert_eq!(rows[3].argmax, 2);
    }
}
