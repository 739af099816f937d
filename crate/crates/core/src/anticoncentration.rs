//! Paley–Zygmund lower bounds on the upper tail of a bin load.
//!
//! Two certificates for `Pr[S >= τ] >= p` when `M = N` balls and bins are
//! hashed `q`-wise independently (`q` even):
//!
//! * [`Variant::ExactMoment`]: Paley–Zygmund applied to `S^(q/2)` with the
//!   exact moments `E S^(q/2)` and `E S^q`, at a caller-chosen `θ`.
//! * [`Variant::BellBound`]: the closed form in Bell numbers,
//!   `τ = B_{q/2}^(2/q) / 2` and `p = (1 - q²/2M) · B_{q/2}² / (2 B_q)`.
//!
//! Thresholds are enclosures; every downstream claim reads `threshold.lo()`,
//! which only enlarges the event `{S >= τ}`. Probabilities are exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{BellSequence, Natural, StirlingTable};
use crate::error::{Error, Result};
use crate::interval::{root_interval, Dyadic, FloatInterval, DEFAULT_FRAC_BITS};
use crate::moments::{raw_moment, BallsBinsInstance};
use crate::wire::{exact_log2, RationalWire};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    ExactMoment,
    BellBound,
}

/// `Pr[S >= threshold] >= probability` for the load of any single bin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "CertificateWire", try_from = "CertificateWire")]
pub struct AntiConcentrationCertificate {
    pub q: u32,
    pub balls: Natural,
    pub threshold: FloatInterval,
    pub probability: BigRational,
    /// The probability term is non-positive and the certificate claims nothing.
    pub vacuous: bool,
    pub variant: Variant,
    /// Paley–Zygmund parameter, present for the exact-moment variant.
    pub theta: Option<BigRational>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct CertificateWire {
    q: u32,
    log2M: Option<u64>,
    balls: String,
    tau_lo: Dyadic,
    tau_hi: Dyadic,
    frac_bits: u32,
    p_num: String,
    p_den: String,
    vacuous: bool,
    variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<RationalWire>,
}

impl From<AntiConcentrationCertificate> for CertificateWire {
    fn from(c: AntiConcentrationCertificate) -> Self {
        let p = RationalWire::from(&c.probability);
        CertificateWire {
            q: c.q,
            log2M: exact_log2(&c.balls),
            balls: c.balls.to_string(),
            tau_lo: c.threshold.lo().clone(),
            tau_hi: c.threshold.hi().clone(),
            frac_bits: c.threshold.frac_bits(),
            p_num: p.num,
            p_den: p.den,
            vacuous: c.vacuous,
            variant: c.variant,
            theta: c.theta.as_ref().map(RationalWire::from),
        }
    }
}

impl TryFrom<CertificateWire> for AntiConcentrationCertificate {
    type Error = String;

    fn try_from(w: CertificateWire) -> std::result::Result<Self, String> {
        let balls: Natural = w.balls.parse().map_err(|_| "bad balls count".to_string())?;
        if let Some(k) = w.log2M {
            if exact_log2(&balls) != Some(k) {
                return Err(format!("log2M = {k} disagrees with balls = {balls}"));
            }
        }
        let threshold =
            FloatInterval::new(w.tau_lo, w.tau_hi, w.frac_bits).map_err(|e| e.to_string())?;
        let probability = BigRational::try_from(RationalWire {
            num: w.p_num,
            den: w.p_den,
        })?;
        let theta = w.theta.map(BigRational::try_from).transpose()?;
        Ok(AntiConcentrationCertificate {
            q: w.q,
            balls,
            threshold,
            probability,
            vacuous: w.vacuous,
            variant: w.variant,
            theta,
        })
    }
}

fn check_order(q: u32, q_max: usize) -> Result<()> {
    if !q.is_multiple_of(2) {
        return Err(Error::Precondition(format!("q = {q} must be even")));
    }
    if q < 4 {
        return Err(Error::Precondition(format!("q = {q} must be at least 4")));
    }
    if q as usize > q_max {
        return Err(Error::OutOfRange {
            what: "q",
            value: q as u64,
            max: q_max as u64,
        });
    }
    Ok(())
}

fn natural_to_rational(v: &Natural) -> BigRational {
    BigRational::from_integer(BigInt::from(v.clone()))
}

/// Exact-moment Paley–Zygmund certificate at parameter `theta`.
///
/// With `Y = S^(q/2)`: `Pr[Y >= θ·E Y] >= (1-θ)² (E Y)² / E Y²`, i.e.
/// `Pr[S >= (θ·E S^(q/2))^(2/q)] >= (1-θ)² (E S^(q/2))² / E S^q`.
pub fn pz_bound(
    inst: &BallsBinsInstance,
    theta: &BigRational,
    table: &StirlingTable,
) -> Result<AntiConcentrationCertificate> {
    let q = inst.independence();
    check_order(q, table.q_max())?;
    if !inst.is_balanced() {
        return Err(Error::Precondition(
            "anti-concentration certificates require M = N".into(),
        ));
    }
    if !theta.is_positive() || theta >= &BigRational::one() {
        return Err(Error::Precondition(format!("theta = {theta} must lie in (0, 1)")));
    }
    let half = q / 2;
    let lower_moment = raw_moment(inst, half, table)?.value;
    let top_moment = raw_moment(inst, q, table)?.value;
    let threshold = root_interval(&(theta * &lower_moment), half, DEFAULT_FRAC_BITS)?;
    let slack = BigRational::one() - theta;
    let probability = &slack * &slack * &lower_moment * &lower_moment / top_moment;
    Ok(AntiConcentrationCertificate {
        q,
        balls: inst.balls().clone(),
        threshold,
        vacuous: !probability.is_positive(),
        probability,
        variant: Variant::ExactMoment,
        theta: Some(theta.clone()),
    })
}

/// Bell-number certificate for `M = N = balls`:
/// `Pr[S >= B_{q/2}^(2/q) / 2] >= (1 - q²/2M) · B_{q/2}² / (2 B_q)`.
pub fn lemma2_certificate(
    q: u32,
    balls: &Natural,
    bells: &BellSequence,
) -> Result<AntiConcentrationCertificate> {
    check_order(q, bells.q_max())?;
    if balls.is_zero() {
        return Err(Error::Precondition("M >= 1".into()));
    }
    let half = q / 2;
    let b_half = natural_to_rational(bells.get(half as usize)?);
    let b_full = natural_to_rational(bells.get(q as usize)?);
    // (B_{q/2} / 2^{q/2})^{1/(q/2)} = B_{q/2}^{2/q} / 2
    let scaled = &b_half / BigRational::from_integer(BigInt::one() << half as usize);
    let threshold = root_interval(&scaled, half, DEFAULT_FRAC_BITS)?;
    let q_sq = BigInt::from(q as u64 * q as u64);
    let m = BigInt::from(balls.clone());
    let factor = BigRational::one() - BigRational::new(q_sq.clone(), &m * 2);
    let probability = factor * &b_half * &b_half / (b_full * BigInt::from(2));
    Ok(AntiConcentrationCertificate {
        q,
        balls: balls.clone(),
        threshold,
        vacuous: q_sq >= m * 2,
        probability,
        variant: Variant::BellBound,
        theta: None,
    })
}

/// Both certificates at `θ = 1/q`, and whether the Bell closed form is the
/// weaker of the two.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateOrdering {
    pub exact: AntiConcentrationCertificate,
    pub bell: AntiConcentrationCertificate,
    /// `bell.probability <= exact.probability`
    pub holds: bool,
}

pub fn certificate_ordering(
    q: u32,
    balls: &Natural,
    table: &StirlingTable,
) -> Result<CertificateOrdering> {
    let bell = lemma2_certificate(q, balls, table.bells())?;
    if bell.vacuous {
        return Err(Error::Vacuous { q });
    }
    let inst = BallsBinsInstance::balanced(balls.clone(), q)?;
    let theta = BigRational::new(BigInt::one(), BigInt::from(q));
    let exact = pz_bound(&inst, &theta, table)?;
    let holds = bell.probability <= exact.probability;
    Ok(CertificateOrdering { exact, bell, holds })
}

/// Exact check of the constants used at `θ = 1/q`:
/// `θ^(2/q) >= 1/2` (equivalently `q² <= 2^q`) and `(1-θ)² >= 1/2`.
pub fn theta_constants_hold(q: u32) -> (bool, bool) {
    let power_ok = BigInt::from(q as u64 * q as u64) <= BigInt::one() << q as usize;
    let slack = BigRational::one() - BigRational::new(BigInt::one(), BigInt::from(q));
    let square_ok = &slack * &slack >= BigRational::new(BigInt::one(), BigInt::from(2));
    (power_ok, square_ok)
}

impl AntiConcentrationCertificate {
    /// Smallest integer load at or above `τ.lo`; `{S >= τ.lo}` equals `{S >= t}`.
    pub fn integer_threshold(&self) -> BigInt {
        self.threshold.lo().ceil_int().max(BigInt::zero())
    }
}
