//! Polynomial hash families over GF(2^w), Monte Carlo load experiments and
//! exhaustive seed enumeration.
//!
//! A seed is the coefficient vector of a degree-`d` polynomial, highest
//! coefficient first; ball `x` lands in the bin given by the top
//! `output_bits` bits of the polynomial evaluated at `x`. Distinct balls are
//! then `(d + 1)`-wise independent and each is uniform over the bins.
//!
//! Sampling runs in fixed chunks of trials. Each trial draws its seed from a
//! ChaCha8 stream keyed by `(master_seed, trial)`, and chunk accumulators are
//! merged in chunk order, so reports do not depend on the thread count.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::StirlingTable;
use crate::error::{Error, Result};
use crate::gf2::{self, BinaryField};
use crate::interval::Dyadic;
use crate::moments::{raw_moment, BallsBinsInstance};
use crate::wire::RationalWire;

pub const DEFAULT_SEED_CAP: u64 = 1 << 24;
pub const DEFAULT_THROW_CAP: u64 = 1 << 30;

/// Largest supported `output_bits`; load vectors are held in memory.
pub const MAX_OUTPUT_BITS: u32 = 24;

/// Exhaustive assignment enumeration threshold for the independent oracle.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 20;

const CHUNK: u64 = 512;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct FamilyWire {
    field_bits: u32,
    degree: u32,
    output_bits: u32,
    modulus: String,
}

/// Degree-`d` polynomials over GF(2^w), truncated to `output_bits`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FamilyWire", into = "FamilyWire")]
pub struct HashFamilySpec {
    field_bits: u32,
    degree: u32,
    output_bits: u32,
    modulus: u128,
}

impl From<HashFamilySpec> for FamilyWire {
    fn from(s: HashFamilySpec) -> Self {
        FamilyWire {
            field_bits: s.field_bits,
            degree: s.degree,
            output_bits: s.output_bits,
            modulus: format!("{:x}", s.modulus),
        }
    }
}

impl TryFrom<FamilyWire> for HashFamilySpec {
    type Error = Error;

    fn try_from(w: FamilyWire) -> Result<Self> {
        let spec = HashFamilySpec::new(w.field_bits, w.degree, w.output_bits)?;
        let m = u128::from_str_radix(&w.modulus, 16)
            .map_err(|_| Error::Parse(format!("bad modulus {:?}", w.modulus)))?;
        if m != spec.modulus {
            return Err(Error::Precondition(format!(
                "modulus {m:x} is not the shipped modulus {:x} for w = {}",
                spec.modulus, w.field_bits
            )));
        }
        Ok(spec)
    }
}

impl HashFamilySpec {
    pub fn new(field_bits: u32, degree: u32, output_bits: u32) -> Result<Self> {
        let modulus = gf2::modulus(field_bits)?;
        if output_bits > field_bits {
            return Err(Error::Precondition(format!(
                "output_bits = {output_bits} exceeds field_bits = {field_bits}"
            )));
        }
        if field_bits < 64 && degree as u64 + 1 > 1u64 << field_bits {
            return Err(Error::Precondition(format!(
                "independence {} exceeds the field size 2^{field_bits}",
                degree as u64 + 1
            )));
        }
        Ok(HashFamilySpec {
            field_bits,
            degree,
            output_bits,
            modulus,
        })
    }

    /// `q`-wise independent family with `m = w`.
    pub fn balanced(field_bits: u32, independence: u32) -> Result<Self> {
        if independence == 0 {
            return Err(Error::Precondition("independence must be at least 1".into()));
        }
        Self::new(field_bits, independence - 1, field_bits)
    }

    pub fn field_bits(&self) -> u32 {
        self.field_bits
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn output_bits(&self) -> u32 {
        self.output_bits
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    pub fn independence(&self) -> u32 {
        self.degree + 1
    }

    pub fn seed_len(&self) -> usize {
        self.degree as usize + 1
    }

    /// `log2` of the number of seeds.
    pub fn seed_bits(&self) -> u64 {
        self.field_bits as u64 * self.seed_len() as u64
    }

    pub fn bins(&self) -> u64 {
        1 << self.output_bits
    }

    pub fn field_size(&self) -> u128 {
        1u128 << self.field_bits
    }
}

/// A family ready for evaluation.
#[derive(Clone, Debug)]
pub struct HashFamily {
    spec: HashFamilySpec,
    field: BinaryField,
    shift: u32,
}

impl HashFamily {
    pub fn new(spec: &HashFamilySpec) -> Result<Self> {
        let field = BinaryField::with_modulus(spec.field_bits, spec.modulus)?;
        Ok(HashFamily {
            shift: spec.field_bits - spec.output_bits,
            spec: spec.clone(),
            field,
        })
    }

    pub fn spec(&self) -> &HashFamilySpec {
        &self.spec
    }

    #[inline]
    fn bin_unchecked(&self, seed: &[u64], x: u64) -> u64 {
        let v = self.field.horner(seed, x);
        if self.shift == 64 {
            0
        } else {
            v >> self.shift
        }
    }

    pub fn evaluate(&self, seed: &[u64], x: u64) -> Result<u64> {
        if seed.len() != self.spec.seed_len() {
            return Err(Error::MalformedSeed {
                expected: self.spec.seed_len(),
                got: seed.len(),
            });
        }
        let mask = self.field.mask();
        if let Some(&c) = seed.iter().find(|&&c| c & !mask != 0) {
            return Err(Error::Precondition(format!(
                "seed coefficient {c:#x} is not an element of GF(2^{})",
                self.spec.field_bits
            )));
        }
        if x & !mask != 0 {
            return Err(Error::Precondition(format!(
                "ball {x:#x} is not an element of GF(2^{})",
                self.spec.field_bits
            )));
        }
        Ok(self.bin_unchecked(seed, x))
    }

    /// The seed with index `s` in `0..2^(w·(d+1))`.
    fn seed_from_index(&self, s: u64, out: &mut [u64]) {
        let w = self.spec.field_bits;
        let mask = self.field.mask();
        for (i, c) in out.iter_mut().enumerate() {
            *c = (s >> (w * i as u32)) & mask;
        }
    }

    fn fill_loads(&self, seed: &[u64], balls: u64, loads: &mut [u32]) {
        loads.iter_mut().for_each(|l| *l = 0);
        for x in 0..balls {
            loads[self.bin_unchecked(seed, x) as usize] += 1;
        }
    }
}

/// Bin index of ball `x` under `seed`.
pub fn evaluate_hash(spec: &HashFamilySpec, seed: &[u64], x: u64) -> Result<u64> {
    HashFamily::new(spec)?.evaluate(seed, x)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub family: HashFamilySpec,
    /// Balls are the field elements `0..balls`; `None` means the whole field.
    pub balls: Option<u64>,
    pub trials: u64,
    pub master_seed: u64,
    pub moment_orders: Vec<u32>,
    pub thresholds: Vec<Dyadic>,
    pub throw_cap: u64,
}

impl SimulationConfig {
    pub fn new(family: HashFamilySpec, trials: u64, master_seed: u64) -> Self {
        SimulationConfig {
            family,
            balls: None,
            trials,
            master_seed,
            moment_orders: Vec::new(),
            thresholds: Vec::new(),
            throw_cap: DEFAULT_THROW_CAP,
        }
    }

    pub fn ball_count(&self) -> u64 {
        self.balls.unwrap_or_else(|| {
            u64::try_from(self.family.field_size()).unwrap_or(u64::MAX)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Precondition("trials must be at least 1".into()));
        }
        if self.family.output_bits > MAX_OUTPUT_BITS {
            return Err(Error::OutOfRange {
                what: "output_bits",
                value: self.family.output_bits as u64,
                max: MAX_OUTPUT_BITS as u64,
            });
        }
        if let Some(b) = self.balls {
            if b as u128 > self.family.field_size() {
                return Err(Error::Precondition(format!(
                    "{b} balls exceed the field size 2^{}",
                    self.family.field_bits
                )));
            }
        }
        let q = self.family.independence();
        if let Some(&r) = self.moment_orders.iter().find(|&&r| r == 0 || r > q) {
            return Err(Error::Precondition(format!(
                "moment order {r} must lie in 1..={q}"
            )));
        }
        check_throws(self.ball_count(), self.trials, self.throw_cap)
    }
}

fn check_throws(balls: u64, trials: u64, cap: u64) -> Result<()> {
    let throws = balls as u128 * trials as u128;
    if throws > cap as u128 {
        return Err(Error::ResourceCap {
            what: "ball throws",
            requested: throws,
            cap: cap as u128,
        });
    }
    Ok(())
}

fn check_bins(bins: u64) -> Result<()> {
    if bins == 0 || bins > 1 << MAX_OUTPUT_BITS {
        return Err(Error::OutOfRange {
            what: "bins",
            value: bins,
            max: 1 << MAX_OUTPUT_BITS,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: u32,
    /// Mean over trials of the per-trial average of `S^order` over bins.
    pub mean: f64,
    pub std_error: Option<f64>,
    pub exact: Option<RationalWire>,
    /// `(mean - exact) / std_error`
    pub z_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub threshold: Dyadic,
    /// Fraction of (trial, bin) pairs with `S >= threshold`.
    pub frequency: f64,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadCount {
    pub load: u64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimulationSource {
    Polynomial(SimulationConfig),
    Independent {
        balls: u64,
        bins: u64,
        trials: u64,
        master_seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    Sampled,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub source: SimulationSource,
    pub mode: SimulationMode,
    /// Sampled trials, or enumerated assignments in exhaustive mode.
    pub trials: u64,
    pub balls: u64,
    pub bins: u64,
    pub standard_errors_defined: bool,
    pub moments: Vec<MomentEstimate>,
    pub tails: Vec<TailEstimate>,
    /// Number of (trial, bin) pairs per load value.
    pub histogram: Vec<LoadCount>,
}

/// Welford accumulator over per-trial statistic vectors.
#[derive(Clone, Debug, Default)]
struct Accumulator {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    hist: BTreeMap<u64, u64>,
}

impl Accumulator {
    fn new(stats: usize) -> Self {
        Accumulator {
            n: 0,
            mean: vec![0.0; stats],
            m2: vec![0.0; stats],
            hist: BTreeMap::new(),
        }
    }

    fn push(&mut self, xs: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(xs) {
            let d = x - *m;
            *m += d / n;
            *m2 += d * (x - *m);
        }
    }

    fn merge(&mut self, other: Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
        for (k, v) in other.hist {
            *self.hist.entry(k).or_default() += v;
        }
    }

    fn std_error(&self, i: usize) -> Option<f64> {
        (self.n > 1).then(|| {
            let n = self.n as f64;
            (self.m2[i] / (n - 1.0)).max(0.0).sqrt() / n.sqrt()
        })
    }
}

/// Integer cut-offs: `S >= t` iff `S >= ceil(t)` for integer loads.
fn integer_cuts(thresholds: &[Dyadic]) -> Vec<u64> {
    thresholds
        .iter()
        .map(|t| t.ceil_int().to_u64().unwrap_or(if t.is_negative() { 0 } else { u64::MAX }))
        .collect()
}

/// Per-trial statistics: bin averages of `S^r` then tail fractions.
fn summarize(
    loads: &[u32],
    orders: &[u32],
    cuts: &[u64],
    counts: &mut Vec<u64>,
    out: &mut Vec<f64>,
    hist: &mut BTreeMap<u64, u64>,
) {
    counts.clear();
    for &l in loads {
        let l = l as usize;
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
    }
    let bins = loads.len() as f64;
    out.clear();
    for &r in orders {
        let s: f64 = counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(l, &c)| c as f64 * (l as f64).powi(r as i32))
            .sum();
        out.push(s / bins);
    }
    for &cut in cuts {
        let heavy: u64 = counts.iter().skip(cut.min(usize::MAX as u64) as usize).sum();
        out.push(heavy as f64 / bins);
    }
    for (l, &c) in counts.iter().enumerate().filter(|&(_, &c)| c > 0) {
        *hist.entry(l as u64).or_default() += c;
    }
}

fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` trials in fixed chunks; `fill` writes the load vector of one trial.
fn sample<F>(trials: u64, bins: usize, orders: &[u32], cuts: &[u64], fill: F) -> Accumulator
where
    F: Fn(u64, &mut [u32]) + Sync,
{
    let stats = orders.len() + cuts.len();
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new(stats);
            let mut loads = vec![0u32; bins];
            let mut counts = Vec::new();
            let mut out = Vec::with_capacity(stats);
            for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                fill(trial, &mut loads);
                summarize(&loads, orders, cuts, &mut counts, &mut out, &mut acc.hist);
                acc.push(&out);
            }
            acc
        })
        .collect();
    partial.into_iter().fold(Accumulator::new(stats), |mut a, b| {
        a.merge(b);
        a
    })
}

fn exact_reference(balls: u64, bins: u64, q: u32, orders: &[u32]) -> Result<Vec<BigRational>> {
    let q_max = orders.iter().copied().max().unwrap_or(0);
    let table = StirlingTable::build(q_max as usize)?;
    let inst = BallsBinsInstance::new(BigUint::from(balls), BigUint::from(bins), q.max(q_max))?;
    orders
        .iter()
        .map(|&r| Ok(raw_moment(&inst, r, &table)?.value))
        .collect()
}

fn histogram(hist: BTreeMap<u64, u64>) -> Vec<LoadCount> {
    hist.into_iter().map(|(load, count)| LoadCount { load, count }).collect()
}

fn estimates(
    acc: &Accumulator,
    orders: &[u32],
    thresholds: &[Dyadic],
    exact: &[BigRational],
) -> (Vec<MomentEstimate>, Vec<TailEstimate>) {
    let moments = orders
        .iter()
        .enumerate()
        .map(|(i, &order)| {
            let se = acc.std_error(i);
            let ex = exact.get(i);
            let z = match (ex, se) {
                (Some(e), Some(se)) if se > 0.0 => e.to_f64().map(|e| (acc.mean[i] - e) / se),
                _ => None,
            };
            MomentEstimate {
                order,
                mean: acc.mean[i],
                std_error: se,
                exact: ex.map(RationalWire::from),
                z_score: z,
            }
        })
        .collect();
    let tails = thresholds
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let i = orders.len() + j;
            TailEstimate {
                threshold: t.clone(),
                frequency: acc.mean[i],
                std_error: acc.std_error(i),
            }
        })
        .collect();
    (moments, tails)
}

/// Monte Carlo run of a polynomial family.
pub fn run_trials(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let family = HashFamily::new(&config.family)?;
    let balls = config.ball_count();
    let bins = config.family.bins();
    let cuts = integer_cuts(&config.thresholds);
    let seed_len = config.family.seed_len();
    let mask = family.field.mask();
    let acc = sample(config.trials, bins as usize, &config.moment_orders, &cuts, |trial, loads| {
        let mut rng = trial_rng(config.master_seed, trial);
        let seed: Vec<u64> = (0..seed_len).map(|_| rng.gen::<u64>() & mask).collect();
        family.fill_loads(&seed, balls, loads);
    });
    let exact = exact_reference(balls, bins, config.family.independence(), &config.moment_orders)?;
    let (moments, tails) = estimates(&acc, &config.moment_orders, &config.thresholds, &exact);
    Ok(SimulationReport {
        source: SimulationSource::Polynomial(config.clone()),
        mode: SimulationMode::Sampled,
        trials: config.trials,
        balls,
        bins,
        standard_errors_defined: acc.n > 1,
        moments,
        tails,
        histogram: histogram(acc.hist),
    })
}

/// Exact distribution of one bin's load over all seeds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactLoadDistribution {
    pub seeds: u64,
    pub balls: u64,
    pub bins: u64,
    /// load -> number of seeds producing it
    pub counts: BTreeMap<u64, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub load: u64,
    #[serde(flatten)]
    pub probability: RationalWire,
}

impl ExactLoadDistribution {
    pub fn probability(&self, load: u64) -> BigRational {
        let c = self.counts.get(&load).copied().unwrap_or(0);
        BigRational::new(BigInt::from(c), BigInt::from(self.seeds))
    }

    pub fn support(&self) -> Vec<SupportPoint> {
        self.counts
            .keys()
            .map(|&load| SupportPoint {
                load,
                probability: RationalWire::from(&self.probability(load)),
            })
            .collect()
    }

    pub fn total(&self) -> BigRational {
        self.counts.keys().map(|&l| self.probability(l)).sum()
    }

    /// `E S^order`
    pub fn moment(&self, order: u32) -> BigRational {
        let num: BigInt = self
            .counts
            .iter()
            .map(|(&l, &c)| BigInt::from(l).pow(order) * c)
            .sum();
        BigRational::new(num, BigInt::from(self.seeds))
    }

    /// `Pr[S >= t]`
    pub fn tail(&self, t: &Dyadic) -> BigRational {
        let t = t.to_rational();
        let num: u64 = self
            .counts
            .iter()
            .filter(|&(&l, _)| BigRational::from_integer(BigInt::from(l)) >= t)
            .map(|(_, &c)| c)
            .sum();
        BigRational::new(BigInt::from(num), BigInt::from(self.seeds))
    }
}

fn check_seed_space(spec: &HashFamilySpec, cap: u64) -> Result<u64> {
    let bits = spec.seed_bits();
    if bits >= 64 || 1u64 << bits > cap {
        return Err(Error::ResourceCap {
            what: "seed enumeration",
            requested: if bits >= 128 { u128::MAX } else { 1u128 << bits },
            cap: cap as u128,
        });
    }
    Ok(1u64 << bits)
}

/// Enumerates every seed with all `2^w` field elements as balls and returns
/// the distribution of bin 0's load.
pub fn exact_small_oracle(spec: &HashFamilySpec) -> Result<ExactLoadDistribution> {
    exact_small_oracle_with_cap(spec, DEFAULT_SEED_CAP)
}

pub fn exact_small_oracle_with_cap(spec: &HashFamilySpec, cap: u64) -> Result<ExactLoadDistribution> {
    let seeds = check_seed_space(spec, cap)?;
    let family = HashFamily::new(spec)?;
    let balls = 1u64 << spec.field_bits;
    let mut counts = BTreeMap::new();
    let mut seed = vec![0u64; spec.seed_len()];
    for s in 0..seeds {
        family.seed_from_index(s, &mut seed);
        let load = (0..balls).filter(|&x| family.bin_unchecked(&seed, x) == 0).count() as u64;
        *counts.entry(load).or_default() += 1;
    }
    Ok(ExactLoadDistribution {
        seeds,
        balls,
        bins: spec.bins(),
        counts,
    })
}

/// Exact `E_seed Σ_b (S_b - t)^+ / M` over every seed, with all field
/// elements as balls.
pub fn exact_excess_mass(spec: &HashFamilySpec, t: &Dyadic) -> Result<BigRational> {
    let seeds = check_seed_space(spec, DEFAULT_SEED_CAP)?;
    check_bins(spec.bins())?;
    let family = HashFamily::new(spec)?;
    let balls = 1u64 << spec.field_bits;
    // integer loads: S > t iff S >= cut, with cut = ceil(t), plus one when t is an integer
    let mut cut = integer_cuts(std::slice::from_ref(t))[0];
    if cut != u64::MAX && Dyadic::from_int(cut as i64) == *t {
        cut += 1;
    }
    let mut loads = vec![0u32; spec.bins() as usize];
    let mut seed = vec![0u64; spec.seed_len()];
    let mut heavy_mass = 0u128;
    let mut heavy_bins = 0u128;
    for s in 0..seeds {
        family.seed_from_index(s, &mut seed);
        family.fill_loads(&seed, balls, &mut loads);
        for &l in &loads {
            if l as u64 >= cut {
                heavy_mass += l as u128;
                heavy_bins += 1;
            }
        }
    }
    let excess = BigRational::from_integer(BigInt::from(heavy_mass))
        - t.to_rational() * BigRational::from_integer(BigInt::from(heavy_bins));
    Ok(excess / BigRational::from_integer(BigInt::from(seeds as u128 * balls as u128)))
}

/// `M` balls thrown independently and uniformly into `N` bins.
///
/// When `N^M <= 2^20` every assignment is enumerated and the moment is exact.
pub fn independent_oracle(
    balls: u64,
    bins: u64,
    order: u32,
    trials: u64,
    master_seed: u64,
) -> Result<SimulationReport> {
    independent_oracle_with_cap(balls, bins, order, trials, master_seed, DEFAULT_THROW_CAP)
}

pub fn independent_oracle_with_cap(
    balls: u64,
    bins: u64,
    order: u32,
    trials: u64,
    master_seed: u64,
    throw_cap: u64,
) -> Result<SimulationReport> {
    check_bins(bins)?;
    if order == 0 {
        return Err(Error::Precondition("moment order must be at least 1".into()));
    }
    let source = SimulationSource::Independent {
        balls,
        bins,
        trials,
        master_seed,
    };
    let exact = exact_reference(balls, bins, order, &[order])?;
    let assignments = u32::try_from(balls)
        .ok()
        .and_then(|m| bins.checked_pow(m))
        .filter(|&a| a <= EXHAUSTIVE_LIMIT);
    if let Some(assignments) = assignments {
        return Ok(exhaustive_independent(balls, bins, order, assignments, source));
    }
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    check_throws(balls, trials, throw_cap)?;
    let orders = [order];
    let acc = sample(trials, bins as usize, &orders, &[], |trial, loads| {
        let mut rng = trial_rng(master_seed, trial);
        loads.iter_mut().for_each(|l| *l = 0);
        for _ in 0..balls {
            loads[rng.gen_range(0..bins) as usize] += 1;
        }
    });
    let (moments, tails) = estimates(&acc, &orders, &[], &exact);
    Ok(SimulationReport {
        source,
        mode: SimulationMode::Sampled,
        trials,
        balls,
        bins,
        standard_errors_defined: acc.n > 1,
        moments,
        tails,
        histogram: histogram(acc.hist),
    })
}

fn exhaustive_independent(
    balls: u64,
    bins: u64,
    order: u32,
    assignments: u64,
    source: SimulationSource,
) -> SimulationReport {
    let mut digits = vec![0u64; balls as usize];
    let mut loads = vec![0u64; bins as usize];
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    let mut total = BigUint::zero();
    for _ in 0..assignments {
        loads.iter_mut().for_each(|l| *l = 0);
        for &d in &digits {
            loads[d as usize] += 1;
        }
        for &l in &loads {
            total += BigUint::from(l).pow(order);
            *hist.entry(l).or_default() += 1;
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < bins {
                break;
            }
            *d = 0;
        }
    }
    let value = BigRational::new(
        BigInt::from(total),
        BigInt::from(assignments) * BigInt::from(bins),
    );
    SimulationReport {
        source,
        mode: SimulationMode::Exhaustive,
        trials: assignments,
        balls,
        bins,
        standard_errors_defined: true,
        moments: vec![MomentEstimate {
            order,
            mean: value.to_f64().unwrap_or(f64::NAN),
            std_error: Some(0.0),
            exact: Some(RationalWire::from(&value)),
            z_score: None,
        }],
        tails: Vec::new(),
        histogram: histogram(hist),
    }
}

impl SimulationReport {
    /// Exact moment of the given order, when one was attached.
    pub fn exact_moment(&self, order: u32) -> Option<BigRational> {
        self.moments
            .iter()
            .find(|m| m.order == order)
            .and_then(|m| m.exact.clone())
            .and_then(|w| BigRational::try_from(w).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anticoncentration::lemma2_certificate;
    use crate::combinatorics::BellSequence;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn constant_and_identity() {
        let spec = HashFamilySpec::new(2, 0, 2).unwrap();
        for x in 0..4 {
            assert_eq!(evaluate_hash(&spec, &[3], x).unwrap(), 3);
        }
        let spec = HashFamilySpec::new(2, 1, 2).unwrap();
        for x in 0..4 {
            assert_eq!(evaluate_hash(&spec, &[1, 0], x).unwrap(), x);
        }
        assert_eq!(
            evaluate_hash(&spec, &[1], 0),
            Err(Error::MalformedSeed { expected: 2, got: 1 })
        );
        assert!(evaluate_hash(&spec, &[1, 0], 4).is_err());
        assert!(HashFamilySpec::new(2, 4, 2).is_err());
        assert!(HashFamilySpec::new(2, 1, 3).is_err());
    }

    #[test]
    fn gf4_pairwise_distribution() {
        let d = exact_small_oracle(&HashFamilySpec::new(2, 1, 2).unwrap()).unwrap();
        assert_eq!(d.counts, BTreeMap::from([(0, 3), (1, 12), (4, 1)]));
        assert_eq!(d.total(), rat(1, 1));
        assert_eq!(d.moment(1), rat(1, 1));
        assert_eq!(d.moment(2), rat(7, 4));
        let d = exact_small_oracle(&HashFamilySpec::new(2, 0, 2).unwrap()).unwrap();
        assert_eq!(d.probability(0), rat(3, 4));
        assert_eq!(d.probability(4), rat(1, 4));
    }

    #[test]
    fn gf8_degree3_matches_closed_form() {
        let spec = HashFamilySpec::balanced(3, 4).unwrap();
        let d = exact_small_oracle(&spec).unwrap();
        assert_eq!(d.seeds, 1 << 12);
        let exact = exact_reference(8, 8, 4, &[1, 2, 3, 4]).unwrap();
        for (r, e) in (1..=4).zip(exact) {
            assert_eq!(d.moment(r), e, "order {r}");
        }
    }

    #[test]
    fn truncation_keeps_marginals_uniform() {
        for (w, d, m) in [(3u32, 1u32, 1u32), (3, 2, 2), (4, 1, 3), (4, 0, 2)] {
            let spec = HashFamilySpec::new(w, d, m).unwrap();
            let fam = HashFamily::new(&spec).unwrap();
            let seeds = 1u64 << spec.seed_bits();
            let mut seed = vec![0; spec.seed_len()];
            for x in 0..1u64 << w {
                let mut hits = vec![0u64; 1 << m];
                for s in 0..seeds {
                    fam.seed_from_index(s, &mut seed);
                    hits[fam.evaluate(&seed, x).unwrap() as usize] += 1;
                }
                assert!(hits.iter().all(|&h| h == seeds >> m), "w={w} d={d} m={m} x={x}");
            }
        }
    }

    #[test]
    fn independent_exhaustive() {
        let r = independent_oracle(3, 3, 2, 1, 0).unwrap();
        assert_eq!(r.mode, SimulationMode::Exhaustive);
        assert_eq!(r.trials, 27);
        assert_eq!(r.exact_moment(2), Some(rat(5, 3)));
        let r = independent_oracle(1, 1, 5, 1, 0).unwrap();
        assert_eq!(r.exact_moment(5), Some(rat(1, 1)));
        assert_eq!(r.histogram, vec![LoadCount { load: 1, count: 1 }]);
    }

    #[test]
    fn independent_sampling_near_exact() {
        let r = independent_oracle(64, 64, 3, 4000, 11).unwrap();
        assert_eq!(r.mode, SimulationMode::Sampled);
        let m = &r.moments[0];
        assert!(m.z_score.unwrap().abs() < 4.0, "{m:?}");
    }

    #[test]
    fn single_trial_flags_undefined_errors() {
        let mut cfg = SimulationConfig::new(HashFamilySpec::balanced(6, 2).unwrap(), 1, 5);
        cfg.moment_orders = vec![1, 2];
        let r = run_trials(&cfg).unwrap();
        assert!(!r.standard_errors_defined);
        assert!(r.moments.iter().all(|m| m.std_error.is_none()));
        // first moment is M/N exactly for every seed
        assert_eq!(r.moments[0].mean, 1.0);
    }

    #[test]
    fn caps_and_preconditions() {
        let mut cfg = SimulationConfig::new(HashFamilySpec::balanced(10, 2).unwrap(), 1 << 21, 0);
        assert!(matches!(run_trials(&cfg), Err(Error::ResourceCap { .. })));
        cfg.trials = 0;
        assert!(run_trials(&cfg).is_err());
        cfg.trials = 10;
        cfg.moment_orders = vec![3];
        assert!(run_trials(&cfg).is_err());
        assert!(exact_small_oracle(&HashFamilySpec::balanced(8, 4).unwrap()).is_err());
    }

    #[test]
    fn deterministic_across_pools() {
        let mut cfg = SimulationConfig::new(HashFamilySpec::balanced(8, 4).unwrap(), 3000, 99);
        cfg.moment_orders = vec![2, 4];
        cfg.thresholds = vec![Dyadic::from_int(2), Dyadic::pow2(-1)];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(&cfg).unwrap())
        };
        let a = serde_json::to_string(&run(1)).unwrap();
        let b = serde_json::to_string(&run(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moments_track_exact_values() {
        let mut cfg = SimulationConfig::new(HashFamilySpec::balanced(5, 4).unwrap(), 20_000, 7);
        cfg.moment_orders = vec![2, 3, 4];
        let r = run_trials(&cfg).unwrap();
        for m in &r.moments {
            assert!(m.z_score.unwrap().abs() < 4.0, "{m:?}");
        }
    }

    #[test]
    fn rare_constant_seeds_carry_the_fourth_moment() {
        // Over GF(2^8), the 2^-24 fraction of constant polynomials puts all 256
        // balls in one bin and contributes exactly 256^3 · 2^-24 = 1 to E S^4.
        let mut cfg = SimulationConfig::new(HashFamilySpec::balanced(8, 4).unwrap(), 20_000, 7);
        cfg.moment_orders = vec![4];
        let r = run_trials(&cfg).unwrap();
        let m = &r.moments[0];
        let exact = r.exact_moment(4).unwrap().to_f64().unwrap();
        let se = m.std_error.unwrap();
        assert!(r.histogram.iter().all(|c| c.load <= 3));
        assert!((m.mean - (exact - 1.0)).abs() < 4.0 * se, "{m:?}");
    }

    #[test]
    fn excess_mass_against_hand_count() {
        // GF(4) pairwise: per seed Σ_b (S_b - 1)^+ is 0 for a != 0 and 3 for a = 0
        let spec = HashFamilySpec::new(2, 1, 2).unwrap();
        let e = exact_excess_mass(&spec, &Dyadic::one()).unwrap();
        assert_eq!(e, rat(4 * 3, 16 * 4));
        let e = exact_excess_mass(&spec, &Dyadic::zero()).unwrap();
        assert_eq!(e, rat(1, 1));
    }

    #[test]
    fn tail_at_certificate_threshold() {
        let bells = BellSequence::streaming(8);
        let cert = lemma2_certificate(4, &BigUint::from(1u32 << 10), &bells).unwrap();
        let mut cfg = SimulationConfig::new(HashFamilySpec::balanced(10, 4).unwrap(), 2000, 3);
        cfg.thresholds = vec![cert.threshold.lo().clone()];
        let r = run_trials(&cfg).unwrap();
        let p = cert.probability.to_f64().unwrap();
        let t = &r.tails[0];
        assert!((0.0..=1.0).contains(&t.frequency));
        assert!(t.frequency >= p - 3.0 * t.std_error.unwrap());
    }

    #[test]
    fn report_round_trip() {
        let mut cfg = SimulationConfig::new(HashFamilySpec::balanced(4, 2).unwrap(), 50, 1);
        cfg.moment_orders = vec![2];
        cfg.thresholds = vec!["3*2^-1".parse().unwrap()];
        let r = run_trials(&cfg).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: SimulationReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        let bad = s.replace("\"modulus\":\"13\"", "\"modulus\":\"19\"");
        assert_ne!(bad, s);
        assert!(serde_json::from_str::<SimulationReport>(&bad).is_err());
    }
}
