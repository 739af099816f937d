//! Arithmetic in GF(2^w) for 2 <= w <= 64.
//!
//! Moduli come from a versioned data file shipped with the crate. Fields up
//! to 2^16 elements also get log/antilog tables for fast multiplication.

use crate::error::{Error, Result};

const MODULI: &str = include_str!("../data/irreducible_gf2.txt");

/// Version line expected in the moduli data file.
pub const MODULI_VERSION: u32 = 1;

const TABLE_MAX_WIDTH: u32 = 16;

/// Parses the shipped `(w, modulus)` table.
pub fn modulus_table() -> Result<Vec<(u32, u128)>> {
    let mut version = None;
    let mut out = Vec::new();
    for line in MODULI.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("version ") {
            version = v.parse::<u32>().ok();
            continue;
        }
        let (w, hex) = line
            .split_once(' ')
            .ok_or_else(|| Error::Parse(format!("bad moduli line {line:?}")))?;
        let w: u32 = w.parse().map_err(|_| Error::Parse(format!("bad width {w:?}")))?;
        let m = u128::from_str_radix(hex, 16)
            .map_err(|_| Error::Parse(format!("bad modulus {hex:?}")))?;
        out.push((w, m));
    }
    if version != Some(MODULI_VERSION) {
        return Err(Error::Parse(format!(
            "moduli table version {version:?}, expected {MODULI_VERSION}"
        )));
    }
    Ok(out)
}

/// The shipped irreducible modulus of degree `w`.
pub fn modulus(w: u32) -> Result<u128> {
    modulus_table()?
        .into_iter()
        .find(|&(width, _)| width == w)
        .map(|(_, m)| m)
        .ok_or(Error::OutOfRange {
            what: "field width w",
            value: w as u64,
            max: 64,
        })
}

/// Carry-less product of two 64-bit polynomials.
pub fn clmul(a: u64, b: u64) -> u128 {
    let mut r = 0u128;
    let a = a as u128;
    let mut b = b;
    let mut i = 0;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a << i;
        }
        b >>= 1;
        i += 1;
    }
    r
}

#[derive(Clone, Debug)]
struct LogTables {
    log: Vec<u32>,
    exp: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct BinaryField {
    width: u32,
    modulus: u128,
    tables: Option<LogTables>,
}

impl BinaryField {
    pub fn new(width: u32) -> Result<Self> {
        Self::with_modulus(width, modulus(width)?)
    }

    /// Field with an explicit modulus. The modulus must have degree `width`;
    /// irreducibility is the caller's responsibility.
    pub fn with_modulus(width: u32, modulus: u128) -> Result<Self> {
        if !(2..=64).contains(&width) {
            return Err(Error::OutOfRange {
                what: "field width w",
                value: width as u64,
                max: 64,
            });
        }
        if 127 - modulus.leading_zeros() != width {
            return Err(Error::Precondition(format!(
                "modulus {modulus:#x} does not have degree {width}"
            )));
        }
        let mut field = BinaryField {
            width,
            modulus,
            tables: None,
        };
        if width <= TABLE_MAX_WIDTH {
            field.tables = field.build_tables();
        }
        Ok(field)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    pub fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    fn reduce(&self, mut v: u128) -> u64 {
        let w = self.width;
        let mut top = 127 - v.leading_zeros().min(127);
        while v >> w != 0 {
            if (v >> top) & 1 == 1 {
                v ^= self.modulus << (top - w);
            }
            top -= 1;
        }
        v as u64
    }

    /// Shift-and-add multiplication, valid for every width.
    pub fn mul_slow(&self, a: u64, b: u64) -> u64 {
        self.reduce(clmul(a, b))
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        match &self.tables {
            Some(t) => {
                if a == 0 || b == 0 {
                    0
                } else {
                    t.exp[(t.log[a as usize] + t.log[b as usize]) as usize]
                }
            }
            None => self.mul_slow(a, b),
        }
    }

    pub fn pow(&self, mut base: u64, mut e: u128) -> u64 {
        let mut acc = 1u64;
        while e != 0 {
            if e & 1 == 1 {
                acc = self.mul_slow(acc, base);
            }
            base = self.mul_slow(base, base);
            e >>= 1;
        }
        acc
    }

    /// Evaluates `seed[0]·x^d + ... + seed[d]` by Horner's rule.
    #[inline]
    pub fn horner(&self, seed: &[u64], x: u64) -> u64 {
        match &self.tables {
            Some(t) if x != 0 => {
                let lx = t.log[x as usize];
                seed.iter().fold(0u64, |acc, &c| {
                    let prod = if acc == 0 {
                        0
                    } else {
                        t.exp[(t.log[acc as usize] + lx) as usize]
                    };
                    prod ^ c
                })
            }
            Some(_) => seed.last().copied().unwrap_or(0),
            None => seed.iter().fold(0u64, |acc, &c| self.mul_slow(acc, x) ^ c),
        }
    }

    fn build_tables(&self) -> Option<LogTables> {
        let order = (1u64 << self.width) - 1;
        let primes = prime_factors(order);
        let g = (2..=self.mask())
            .find(|&g| primes.iter().all(|&p| self.pow(g, (order / p) as u128) != 1))?;
        let mut log = vec![0u32; order as usize + 1];
        let mut exp = vec![0u64; 2 * order as usize];
        let mut v = 1u64;
        for i in 0..order as usize {
            exp[i] = v;
            exp[i + order as usize] = v;
            log[v as usize] = i as u32;
            v = self.mul_slow(v, g);
        }
        Some(LogTables { log, exp })
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}
