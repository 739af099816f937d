//! Exact raw moments of the load of one bin when `M` balls are thrown into
//! `N` bins by a `q`-wise independent hash, and the `M = N` moment sandwich.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{falling_factorial, Natural, StirlingTable};
use crate::error::{Error, Result};
use crate::interval::{log2_rational, root_interval, FloatInterval, DEFAULT_FRAC_BITS};
use crate::wire::{self, RationalWire};

/// `M` balls, `N` bins, hashing that is `independence`-wise independent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallsBinsInstance {
    #[serde(with = "wire::natural")]
    balls: Natural,
    #[serde(with = "wire::natural")]
    bins: Natural,
    independence: u32,
}

impl BallsBinsInstance {
    pub fn new(balls: Natural, bins: Natural, independence: u32) -> Result<Self> {
        if balls.is_zero() || bins.is_zero() {
            return Err(Error::Precondition("M >= 1 and N >= 1".into()));
        }
        if independence == 0 {
            return Err(Error::Precondition("independence q >= 1".into()));
        }
        Ok(BallsBinsInstance {
            balls,
            bins,
            independence,
        })
    }

    /// The `M = N` case.
    pub fn balanced(size: Natural, independence: u32) -> Result<Self> {
        Self::new(size.clone(), size, independence)
    }

    pub fn balls(&self) -> &Natural {
        &self.balls
    }

    pub fn bins(&self) -> &Natural {
        &self.bins
    }

    pub fn independence(&self) -> u32 {
        self.independence
    }

    pub fn is_balanced(&self) -> bool {
        self.balls == self.bins
    }
}

/// `E S^order` for an instance, exactly and as a log2 enclosure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "MomentWire", try_from = "MomentWire")]
pub struct MomentResult {
    pub instance: BallsBinsInstance,
    pub order: u32,
    pub value: BigRational,
    pub log2_value: FloatInterval,
}

#[derive(Serialize, Deserialize)]
struct MomentWire {
    #[serde(flatten)]
    instance: BallsBinsInstance,
    order: u32,
    num: String,
    den: String,
    log2_value: FloatInterval,
}

impl From<MomentResult> for MomentWire {
    fn from(m: MomentResult) -> Self {
        let RationalWire { num, den } = RationalWire::from(&m.value);
        MomentWire {
            instance: m.instance,
            order: m.order,
            num,
            den,
            log2_value: m.log2_value,
        }
    }
}

impl TryFrom<MomentWire> for MomentResult {
    type Error = String;

    fn try_from(w: MomentWire) -> std::result::Result<Self, String> {
        let value = BigRational::try_from(RationalWire {
            num: w.num,
            den: w.den,
        })?;
        Ok(MomentResult {
            instance: w.instance,
            order: w.order,
            value,
            log2_value: w.log2_value,
        })
    }
}

fn check_order(inst: &BallsBinsInstance, order: u32, table: &StirlingTable) -> Result<()> {
    if order == 0 {
        return Err(Error::Precondition("moment order >= 1".into()));
    }
    if order > inst.independence {
        return Err(Error::Precondition(format!(
            "moment order {order} exceeds independence q = {}; E S^{order} is not determined by q-wise independence",
            inst.independence
        )));
    }
    if order as usize > table.q_max() {
        return Err(Error::OutOfRange {
            what: "moment order",
            value: order as u64,
            max: table.q_max() as u64,
        });
    }
    Ok(())
}

/// `E S^order = Σ_j S(order, j) · (M)_j / N^j`, reduced.
pub fn raw_moment(
    inst: &BallsBinsInstance,
    order: u32,
    table: &StirlingTable,
) -> Result<MomentResult> {
    check_order(inst, order, table)?;
    let row = table.row(order as usize)?;
    // common denominator N^order
    let mut num = Natural::zero();
    let mut n_pow = Natural::one();
    for j in (0..=order as usize).rev() {
        if !row[j].is_zero() {
            num += &row[j] * falling_factorial(&inst.balls, j as u64) * &n_pow;
        }
        n_pow *= &inst.bins;
    }
    let den = inst.bins.pow(order);
    let value = BigRational::new(BigInt::from(num), BigInt::from(den));
    let log2_value = log2_rational(&value, DEFAULT_FRAC_BITS)?;
    Ok(MomentResult {
        instance: inst.clone(),
        order,
        value,
        log2_value,
    })
}

/// Enclosure of the moment norm `(E S^order)^(1/order)`.
pub fn moment_norm(
    inst: &BallsBinsInstance,
    order: u32,
    table: &StirlingTable,
) -> Result<FloatInterval> {
    let m = raw_moment(inst, order, table)?;
    root_interval(&m.value, order, DEFAULT_FRAC_BITS)
}

/// Bounds on `E S^order` when `M = N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSandwich {
    /// `∏_{i=1..order} (1 - (i-1)/M) · B_order`
    #[serde(with = "wire::rational")]
    pub lower: BigRational,
    /// `B_order`
    #[serde(with = "wire::natural")]
    pub upper: Natural,
    /// `(1 - Σ_{i=1..order} (i-1)/M) · B_order`, never above `lower`.
    #[serde(with = "wire::rational")]
    pub linearized: BigRational,
}

pub fn moment_sandwich(
    balls: &Natural,
    order: u32,
    table: &StirlingTable,
) -> Result<MomentSandwich> {
    if balls.is_zero() {
        return Err(Error::Precondition("M >= 1".into()));
    }
    let bell = table.bell(order as usize)?.clone();
    let bell_q = BigRational::from_integer(BigInt::from(bell.clone()));
    let m = BigInt::from(balls.clone());
    let product = BigRational::new(
        BigInt::from(falling_factorial(balls, order as u64)),
        m.pow(order),
    );
    let pairs = BigInt::from(order as u64 * (order as u64).saturating_sub(1) / 2);
    let linear = BigRational::one() - BigRational::new(pairs, m);
    Ok(MomentSandwich {
        lower: product * &bell_q,
        upper: bell,
        linearized: linear * bell_q,
    })
}
