//! Columnar binary cache for (normalized) datasets.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "QFLOWCOL" | version u32 | provenance len u32 + UTF-8 bytes
//! has_stats u8 | [min f64 × 28, max f64 × 28] if has_stats
//! n u64 | 28 feature columns of n f64 | n attack codes u8 | n station codes u8
//! ```

use std::path::Path;

use super::dataset::{Dataset, NormStats};
use super::record::{AttackType, BaseStation, FlowRecord, N_FEATURES};
use super::DataError;

const MAGIC: &[u8; 8] = b"QFLOWCOL";
pub const CACHE_VERSION: u32 = 1;

/// Whether `bytes` start with the cache magic.
pub fn is_cache(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}

pub fn encode_cache(data: &Dataset) -> Vec<u8> {
    let n = data.len();
    let mut out = Vec::with_capacity(64 + n * (N_FEATURES * 8 + 2) + data.provenance.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(data.provenance.len() as u32).to_le_bytes());
    out.extend_from_slice(data.provenance.as_bytes());
    match &data.stats {
        Some(stats) => {
            out.push(1);
            for v in stats.min.iter().chain(&stats.max) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => out.push(0),
    }
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for j in 0..N_FEATURES {
        for r in &data.records {
            out.extend_from_slice(&r.features[j].to_le_bytes());
        }
    }
    out.extend(data.records.iter().map(|r| r.attack.code()));
    out.extend(data.records.iter().map(|r| match r.base_station {
        BaseStation::Bs1 => 1u8,
        BaseStation::Bs2 => 2u8,
    }));
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| DataError::Cache("truncated cache file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DataError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_cache(bytes: &[u8]) -> Result<Dataset, DataError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(DataError::Cache("not a flow cache file".into()));
    }
    let version = c.u32()?;
    if version != CACHE_VERSION {
        return Err(DataError::Cache(format!(
            "cache version {version}, expected {CACHE_VERSION}"
        )));
    }
    let plen = c.u32()? as usize;
    let provenance = std::str::from_utf8(c.take(plen)?)
        .map_err(|_| DataError::Cache("provenance is not UTF-8".into()))?
        .to_string();
    let stats = match c.take(1)?[0] {
        0 => None,
        1 => {
            let mut min = [0.0; N_FEATURES];
            let mut max = [0.0; N_FEATURES];
            for v in min.iter_mut().chain(max.iter_mut()) {
                *v = c.f64()?;
            }
            Some(NormStats { min, max })
        }
        other => return Err(DataError::Cache(format!("bad stats flag {other}"))),
    };
    let n = usize::try_from(c.u64()?).map_err(|_| DataError::Cache("record count overflow".into()))?;
    let expected = n
        .checked_mul(N_FEATURES * 8 + 2)
        .ok_or_else(|| DataError::Cache("record count overflow".into()))?;
    if bytes.len() - c.pos != expected {
        return Err(DataError::Cache(format!(
            "payload is {} bytes, expected {expected} for {n} records",
            bytes.len() - c.pos
        )));
    }
    let mut features = vec![[0.0; N_FEATURES]; n];
    for j in 0..N_FEATURES {
        for f in features.iter_mut() {
            f[j] = c.f64()?;
        }
    }
    let attacks = c.take(n)?;
    let stations = c.take(n)?;
    let records = features
        .into_iter()
        .zip(attacks.iter().zip(stations))
        .map(|(features, (&a, &s))| {
            let attack = AttackType::from_code(a)
                .ok_or_else(|| DataError::Cache(format!("bad attack code {a}")))?;
            let base_station = match s {
                1 => BaseStation::Bs1,
                2 => BaseStation::Bs2,
                _ => return Err(DataError::Cache(format!("bad station code {s}"))),
            };
            Ok(FlowRecord {
                features,
                attack,
                base_station,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        records,
        stats,
        provenance,
    })
}

pub fn save_cache(data: &Dataset, path: &Path) -> Result<(), DataError> {
    crate::fsutil::write_atomic(path, &encode_cache(data))?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<Dataset, DataError> {
    decode_cache(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let records = (0..5)
            .map(|i| {
                let mut features = [0.0; N_FEATURES];
                for (j, f) in features.iter_mut().enumerate() {
                    *f = (i * 31 + j) as f64 / 7.0;
                }
                FlowRecord {
                    features,
                    attack: AttackType::ALL[i % 9],
                    base_station: if i % 2 == 0 { BaseStation::Bs1 } else { BaseStation::Bs2 },
                }
            })
            .collect();
        let mut d = Dataset::new(records, "unit test");
        d.stats = Some(NormStats {
            min: [0.1; N_FEATURES],
            max: [f64::MAX; N_FEATURES],
        });
        d
    }

    #[test]
    fn round_trip_exact() {
        let d = sample();
        let bytes = encode_cache(&d);
        assert_eq!(decode_cache(&bytes).unwrap(), d);
        let empty = Dataset::new(vec![], "");
        assert_eq!(decode_cache(&encode_cache(&empty)).unwrap(), empty);
    }

    #[test]
    fn corrupt_input_rejected() {
        let bytes = encode_cache(&sample());
        assert!(decode_cache(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_cache(b"garbage!").is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode_cache(&bad), Err(DataError::Cache(_))));
    }
}
