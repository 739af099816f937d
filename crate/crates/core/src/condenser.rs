//! Parameters of min-entropy condensers built from `q`-universal hashing.
//!
//! A `(k, ℓ, ε)`-condenser maps any `k`-source to an output that is `ε`-close
//! to some distribution with `m - ℓ` bits of min-entropy. Closeness is read
//! jointly with the seed: the ideal output may depend on the seed and must
//! have min-entropy `m - ℓ` for every seed value. Averaged over the seed the
//! output of a hash family is exactly uniform, so no lower bound exists
//! without this convention.
//!
//! # Heavy-bin reduction
//!
//! Take `M = N = 2^k` and the flat source uniform on `2^k` inputs. For one
//! seed the output puts mass `load(b) / M` on bin `b`, and the closest
//! distribution whose point masses are at most `2^(ℓ-k)` is at distance
//! `Σ_b (load(b) - 2^ℓ)^+ / M`. An anti-concentration certificate
//! `Pr[load(b) >= τ] >= p` holds for every bin, so averaging over the seed
//! gives distance at least `p · (τ - 2^ℓ)`. At `2^ℓ = τ/2` this is
//! `ε* = p·τ/2` with `ℓ* = log2 τ - 1`. Every family with independence at
//! least `q` satisfies the certificate, so all of them fail at `(ℓ*, ε*)`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anticoncentration::{lemma2_certificate, AntiConcentrationCertificate};
use crate::combinatorics::BellSequence;
use crate::error::{Error, Result};
use crate::interval::{
    log2_dyadic, log2_interval, log2_rational, Dyadic, FloatInterval, DEFAULT_FRAC_BITS,
};
use crate::wire::{self, RationalWire};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondenserParams {
    pub input_bits: Option<u32>,
    pub output_bits: Option<u32>,
    pub source_entropy: Option<u32>,
    /// Entropy loss `ℓ` in bits.
    pub loss: FloatInterval,
    /// `log2(1/ε)`
    pub log2_inv_eps: FloatInterval,
    pub independence: u32,
    pub seed_bits: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    Positive,
    Impossible,
    Undetermined,
}

/// The numbers produced by the heavy-bin reduction from one certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeavyBinReduction {
    pub tau_lo: Dyadic,
    /// `log2(τ.lo) - 1`
    pub ell_star: FloatInterval,
    /// `p · τ.lo / 2`
    #[serde(with = "wire::rational")]
    pub epsilon_star: BigRational,
    pub log2_eps_star: FloatInterval,
}

/// Applies the reduction to any non-vacuous `M = N` certificate.
pub fn heavy_bin_reduction(cert: &AntiConcentrationCertificate) -> Result<HeavyBinReduction> {
    if cert.vacuous {
        return Err(Error::Vacuous { q: cert.q });
    }
    let tau_lo = cert.threshold.lo().clone();
    let ell_star = log2_dyadic(&tau_lo, DEFAULT_FRAC_BITS)?.add_int(-1);
    let epsilon_star =
        &cert.probability * tau_lo.to_rational() / BigRational::from_integer(BigInt::from(2));
    let log2_eps_star = log2_rational(&epsilon_star, DEFAULT_FRAC_BITS)?;
    Ok(HeavyBinReduction {
        tau_lo,
        ell_star,
        epsilon_star,
        log2_eps_star,
    })
}

impl HeavyBinReduction {
    /// Whether the certified region `{ℓ <= ℓ*, ε < ε*}` contains the pair.
    pub fn rules_out(&self, loss: &Dyadic, log2_inv_eps: &Dyadic) -> bool {
        loss <= self.ell_star.lo() && &log2_inv_eps.neg() < self.log2_eps_star.lo()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "VerdictWire", try_from = "VerdictWire")]
pub struct CondenserVerdict {
    pub params: CondenserParams,
    pub feasible: Feasibility,
    pub certificate: Option<AntiConcentrationCertificate>,
    pub reduction: Option<HeavyBinReduction>,
}

#[derive(Serialize, Deserialize)]
struct VerdictWire {
    q: u32,
    k: Option<u32>,
    ell_star: Option<FloatInterval>,
    log2_eps_star_lo: Option<Dyadic>,
    feasible: Feasibility,
    certificate: Option<AntiConcentrationCertificate>,
    reduction: Option<HeavyBinReduction>,
    params: CondenserParams,
}

impl From<CondenserVerdict> for VerdictWire {
    fn from(v: CondenserVerdict) -> Self {
        VerdictWire {
            q: v.params.independence,
            k: v.params.source_entropy,
            ell_star: v.reduction.as_ref().map(|r| r.ell_star.clone()),
            log2_eps_star_lo: v.reduction.as_ref().map(|r| r.log2_eps_star.lo().clone()),
            feasible: v.feasible,
            certificate: v.certificate,
            reduction: v.reduction,
            params: v.params,
        }
    }
}

impl TryFrom<VerdictWire> for CondenserVerdict {
    type Error = String;

    fn try_from(w: VerdictWire) -> std::result::Result<Self, String> {
        if w.q != w.params.independence || w.k != w.params.source_entropy {
            return Err("verdict header disagrees with its parameters".into());
        }
        if w.ell_star != w.reduction.as_ref().map(|r| r.ell_star.clone()) {
            return Err("ell_star disagrees with the reduction".into());
        }
        Ok(CondenserVerdict {
            params: w.params,
            feasible: w.feasible,
            certificate: w.certificate,
            reduction: w.reduction,
        })
    }
}

/// Parameters guaranteed by `q`-universal hashing with `q = ⌈log2(1/ε)⌉`:
/// `k = m` and loss `ℓ = log2 q`.
pub fn positive_params(log2_inv_eps: f64) -> Result<CondenserParams> {
    let e = Dyadic::from_f64(log2_inv_eps)?;
    if e <= Dyadic::one() {
        return Err(Error::Precondition(format!(
            "epsilon < 1/2 required, got log2(1/epsilon) = {log2_inv_eps}"
        )));
    }
    let q = e.ceil_int();
    let q = u32::try_from(q).map_err(|_| Error::OutOfRange {
        what: "log2(1/epsilon)",
        value: log2_inv_eps as u64,
        max: u32::MAX as u64,
    })?;
    Ok(CondenserParams {
        input_bits: None,
        output_bits: None,
        source_entropy: None,
        loss: log2_interval(&BigUint::from(q), DEFAULT_FRAC_BITS)?,
        log2_inv_eps: FloatInterval::point(e, DEFAULT_FRAC_BITS),
        independence: q,
        seed_bits: None,
    })
}

/// Checks `k > 2 log2 q`, i.e. `q² < 2^k`.
fn side_condition(q: u32, k: u32) -> bool {
    BigUint::from(q as u64 * q as u64) < BigUint::one() << k
}

/// Impossibility verdict for `q`-universal families with `M = N = 2^k`.
pub fn impossibility_certificate(q: u32, k: u32, bells: &BellSequence) -> Result<CondenserVerdict> {
    if k == 0 || !side_condition(q, k) {
        return Err(Error::SideCondition { q, k });
    }
    let balls = BigUint::one() << k;
    let cert = lemma2_certificate(q, &balls, bells)?;
    let reduction = if cert.vacuous {
        None
    } else {
        Some(heavy_bin_reduction(&cert)?)
    };
    let (feasible, loss, log2_inv_eps) = match &reduction {
        Some(r) => {
            let feasible = if r.ell_star.lo().is_negative() {
                Feasibility::Undetermined
            } else {
                Feasibility::Impossible
            };
            (feasible, r.ell_star.clone(), r.log2_eps_star.neg())
        }
        None => (
            Feasibility::Undetermined,
            FloatInterval::from_int(0, DEFAULT_FRAC_BITS),
            FloatInterval::from_int(0, DEFAULT_FRAC_BITS),
        ),
    };
    Ok(CondenserVerdict {
        params: CondenserParams {
            input_bits: Some(k),
            output_bits: Some(k),
            source_entropy: Some(k),
            loss,
            log2_inv_eps,
            independence: q,
            seed_bits: None,
        },
        feasible,
        certificate: Some(cert),
        reduction,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryOutcome {
    /// Inside the certified impossibility region.
    RuledOut,
    /// Covered by the positive parameters for this `q`.
    Guaranteed,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryAssessment {
    pub loss: f64,
    pub log2_inv_eps: f64,
    pub outcome: QueryOutcome,
}

impl CondenserVerdict {
    /// Classifies a requested `(ℓ, ε)` against this verdict and the positive
    /// parameters for the same `q`.
    pub fn assess(&self, loss: f64, log2_inv_eps: f64) -> Result<QueryAssessment> {
        let l = Dyadic::from_f64(loss)?;
        let e = Dyadic::from_f64(log2_inv_eps)?;
        if l.is_negative() || !e.is_positive() {
            return Err(Error::Precondition(
                "loss >= 0 and log2(1/epsilon) > 0 required".into(),
            ));
        }
        let q = self.params.independence;
        let ruled = self
            .reduction
            .as_ref()
            .is_some_and(|r| r.rules_out(&l, &e));
        let log2_q = log2_interval(&BigUint::from(q), DEFAULT_FRAC_BITS)?;
        let guaranteed = &l >= log2_q.hi() && e <= Dyadic::from_int(q as i64);
        let outcome = match (ruled, guaranteed) {
            (true, _) => QueryOutcome::RuledOut,
            (false, true) => QueryOutcome::Guaranteed,
            (false, false) => QueryOutcome::Undetermined,
        };
        Ok(QueryAssessment {
            loss,
            log2_inv_eps,
            outcome,
        })
    }
}

/// A known `(q, k, ℓ, log2(1/ε))` claim that a `q`-universal family is
/// not a condenser at those parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceClaim {
    pub q: u32,
    pub k: u32,
    pub loss: f64,
    pub log2_inv_eps: f64,
}

pub const REFERENCE_CLAIMS: &[ReferenceClaim] = &[ReferenceClaim {
    q: 64,
    k: 43,
    loss: 2.6,
    log2_inv_eps: 43.0,
}];

/// Side-by-side view of a reference claim and the certified numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub claim: ReferenceClaim,
    pub certified_ell_star: f64,
    pub certified_log2_inv_eps_star: f64,
    /// Whether the certified region contains the claimed pair.
    pub claim_ruled_out: bool,
    pub note: String,
}

pub fn reference_comparison(verdict: &CondenserVerdict) -> Option<ReferenceComparison> {
    let claim = REFERENCE_CLAIMS.iter().find(|c| {
        c.q == verdict.params.independence && Some(c.k) == verdict.params.source_entropy
    })?;
    let reduction = verdict.reduction.as_ref()?;
    let assessed = verdict.assess(claim.loss, claim.log2_inv_eps).ok()?;
    let claim_ruled_out = assessed.outcome == QueryOutcome::RuledOut;
    let ell = reduction.ell_star.approx();
    let eps = -reduction.log2_eps_star.approx();
    let note = if claim_ruled_out {
        "claimed pair lies inside the certified region".to_string()
    } else {
        format!(
            "claimed pair is not certified here: certified loss bound {ell:.4} vs claimed {}, certified log2(1/eps) bound {eps:.4} vs claimed {}",
            claim.loss, claim.log2_inv_eps
        )
    };
    Some(ReferenceComparison {
        claim: claim.clone(),
        certified_ell_star: ell,
        certified_log2_inv_eps_star: eps,
        claim_ruled_out,
        note,
    })
}

/// Impossibility verdicts for every even `q >= 4` admissible at a fixed `k`.
#[derive(Clone, Debug)]
pub struct CertificateLadder {
    k: u32,
    rungs: Vec<CondenserVerdict>,
    /// The last rung is the table's `q_max` rather than the side condition.
    table_limited: bool,
}

impl CertificateLadder {
    pub fn build(k: u32, bells: &BellSequence) -> Result<Self> {
        let mut qs = Vec::new();
        let mut q = 4u32;
        let mut table_limited = false;
        loop {
            if !side_condition(q, k) {
                break;
            }
            if q as usize > bells.q_max() {
                table_limited = true;
                break;
            }
            qs.push(q);
            q += 2;
        }
        let rungs = qs
            .into_par_iter()
            .map(|q| impossibility_certificate(q, k, bells))
            .collect::<Result<Vec<_>>>()?;
        Ok(CertificateLadder {
            k,
            rungs,
            table_limited,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn rungs(&self) -> &[CondenserVerdict] {
        &self.rungs
    }

    pub fn rung(&self, q: u32) -> Option<&CondenserVerdict> {
        self.rungs.iter().find(|r| r.params.independence == q)
    }

    /// `τ.lo` (hence `ℓ*`) nondecreasing and `ε*` strictly decreasing in `q`,
    /// by exact comparison over the whole ladder.
    pub fn is_monotone(&self) -> bool {
        self.rungs.windows(2).all(|w| match (&w[0].reduction, &w[1].reduction) {
            (Some(a), Some(b)) => a.tau_lo <= b.tau_lo && a.epsilon_star > b.epsilon_star,
            _ => false,
        })
    }
}

/// The largest even `q` whose certificate rules out `(loss, ε)`.
///
/// Every family with independence at least that `q` fails at these
/// parameters. Returns `None` when no rung rules the pair out, including the
/// trivial region `ε >= 1/2`.
pub fn necessary_independence(
    log2_inv_eps: f64,
    loss: f64,
    ladder: &CertificateLadder,
) -> Result<Option<u32>> {
    let e = Dyadic::from_f64(log2_inv_eps)?;
    let l = Dyadic::from_f64(loss)?;
    if l.is_negative() {
        return Err(Error::Precondition(format!("loss = {loss} must be >= 0")));
    }
    if e <= Dyadic::one() {
        return Ok(None);
    }
    let rungs = ladder.rungs();
    let eps_ok = |v: &CondenserVerdict| {
        v.reduction
            .as_ref()
            .is_some_and(|r| &e.neg() < r.log2_eps_star.lo())
    };
    let last = if ladder.is_monotone() {
        rungs.partition_point(eps_ok).checked_sub(1)
    } else {
        rungs.iter().rposition(|v| {
            v.reduction.as_ref().is_some_and(|r| r.rules_out(&l, &e))
        })
    };
    let Some(idx) = last else {
        return Ok(None);
    };
    let hit = &rungs[idx];
    if !hit.reduction.as_ref().is_some_and(|r| r.rules_out(&l, &e)) {
        return Ok(None);
    }
    if idx + 1 == rungs.len() && ladder.table_limited {
        return Err(Error::WindowExhausted {
            q_max: hit.params.independence,
        });
    }
    Ok(Some(hit.params.independence))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub log2_inv_eps: f64,
    /// Independence of the positive parameters, `⌈log2(1/ε)⌉`.
    pub q_plus: u32,
    /// Largest certified `q`, when any rung applies.
    pub q_minus: Option<u32>,
    /// `q_minus / log2(1/ε)`
    pub ratio: Option<f64>,
    pub ell_star: Option<FloatInterval>,
    pub log2_eps_star: Option<FloatInterval>,
    /// `1 - log log log(1/ε) / log log(1/ε)`, the shape of the asymptotic
    /// `1 - o(1)` factor with its constant set to one.
    pub asymptotic_shape: Option<f64>,
}

/// One row per `log2(1/ε)`: positive `q`, certified `q`, their ratio.
pub fn asymptotic_gap_report(
    log2_inv_eps: &[f64],
    loss: f64,
    ladder: &CertificateLadder,
) -> Result<Vec<GapRow>> {
    log2_inv_eps
        .iter()
        .map(|&e| {
            let q_plus = positive_params(e)?.independence;
            let q_minus = necessary_independence(e, loss, ladder)?;
            let rung = q_minus.and_then(|q| ladder.rung(q));
            let red = rung.and_then(|r| r.reduction.as_ref());
            let loglog = e.log2();
            let shape = (loglog > 1.0).then(|| 1.0 - loglog.log2() / loglog);
            Ok(GapRow {
                log2_inv_eps: e,
                q_plus,
                q_minus,
                ratio: q_minus.map(|q| q as f64 / e),
                ell_star: red.map(|r| r.ell_star.clone()),
                log2_eps_star: red.map(|r| r.log2_eps_star.clone()),
                asymptotic_shape: shape,
            })
        })
        .collect()
}

/// `{num, den}` of `ε*` for display.
pub fn epsilon_star_wire(r: &HeavyBinReduction) -> RationalWire {
    RationalWire::from(&r.epsilon_star)
}
