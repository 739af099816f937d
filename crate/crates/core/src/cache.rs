//! On-disk Bell number cache.
//!
//! Layout (little endian): magic `CBBELL`, `u32` version, `u64` count, then
//! for each `B_q` a `u64` byte length followed by the digits in base 256.
//! A file is accepted only if its length matches the declared records and
//! the spot values `B_0, B_1, B_2, B_5, B_10` are correct.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;

use crate::combinatorics::{BellSequence, Natural};
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"CBBELL";
pub const CACHE_VERSION: u32 = 1;
const SPOT_VALUES: [(usize, u64); 5] = [(0, 1), (1, 1), (2, 2), (5, 52), (10, 115_975)];

pub fn cache_path(dir: &Path) -> PathBuf {
    dir.join(format!("bell-v{CACHE_VERSION}.bin"))
}

pub fn encode(bells: &BellSequence) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(bells.values().len() as u64).to_le_bytes());
    for v in bells.values() {
        let bytes = v.to_bytes_le();
        out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Cache("truncated file".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn take_u64(buf: &mut &[u8]) -> Result<u64> {
    Ok(u64::from_le_bytes(take(buf, 8)?.try_into().expect("8 bytes")))
}

pub fn decode(bytes: &[u8]) -> Result<BellSequence> {
    let mut buf = bytes;
    if take(&mut buf, MAGIC.len())? != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut buf, 4)?.try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("version {version}, expected {CACHE_VERSION}")));
    }
    let count = take_u64(&mut buf)?;
    let mut values: Vec<Natural> = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let len = take_u64(&mut buf)?;
        let len = usize::try_from(len).map_err(|_| Error::Cache("record too long".into()))?;
        values.push(BigUint::from_bytes_le(take(&mut buf, len)?));
    }
    if !buf.is_empty() {
        return Err(Error::Cache(format!("{} trailing bytes", buf.len())));
    }
    for (q, expected) in SPOT_VALUES {
        if let Some(v) = values.get(q) {
            if *v != BigUint::from(expected) {
                return Err(Error::Cache(format!("spot check failed at B_{q}")));
            }
        }
    }
    BellSequence::from_values(values)
}

/// Bell numbers `B_0..=B_q_max`, read from `dir` when a valid cache covers
/// them and rebuilt (and rewritten) otherwise.
pub fn load_or_build(dir: &Path, q_max: usize) -> Result<BellSequence> {
    let path = cache_path(dir);
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(bells) = decode(&bytes) {
            if bells.q_max() >= q_max {
                return BellSequence::from_values(bells.values()[..=q_max].to_vec());
            }
        }
    }
    let bells = BellSequence::streaming(q_max);
    store(dir, &bells)?;
    Ok(bells)
}

pub fn store(dir: &Path, bells: &BellSequence) -> Result<()> {
    let io = |e: std::io::Error| Error::Cache(e.to_string());
    fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(".bell-v{CACHE_VERSION}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&encode(bells)).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, cache_path(dir)).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejections() {
        let bells = BellSequence::streaming(40);
        let bytes = encode(&bells);
        assert_eq!(decode(&bytes).unwrap(), bells);

        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(decode(&bad_magic).is_err());

        // corrupt B_5 = 52 in place: records 0..4 are one byte each
        let offset = 6 + 4 + 8 + 5 * 9 + 8;
        assert_eq!(bytes[offset], 52);
        let mut corrupt = bytes;
        corrupt[offset] = 53;
        assert_eq!(decode(&corrupt), Err(Error::Cache("spot check failed at B_5".into())));
    }

    #[test]
    fn load_or_build_reuses_and_extends() {
        let dir = tempfile::tempdir().unwrap();
        let a = load_or_build(dir.path(), 30).unwrap();
        assert_eq!(a.q_max(), 30);
        let b = load_or_build(dir.path(), 12).unwrap();
        assert_eq!(b.values(), &a.values()[..=12]);
        let c = load_or_build(dir.path(), 50).unwrap();
        assert_eq!(c, BellSequence::streaming(50));
        fs::write(cache_path(dir.path()), b"junk").unwrap();
        assert_eq!(load_or_build(dir.path(), 10).unwrap().get(10).unwrap(), &BigUint::from(115_975u32));
    }
}
