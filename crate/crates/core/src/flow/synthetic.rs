//! Seeded generator of 5G-NIDD-shaped flow data, for tests and dry runs.
//!
//! Each (attack type, feature) pair gets a log-normal profile; the two base
//! stations apply a mild per-feature scale shift. TCP base sequence numbers
//! are left empty in the CSV for non-TCP traffic, as in the public dataset.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::record::{AttackType, BaseStation, FlowRecord, FEATURE_NAMES, N_FEATURES};
use super::DataError;

/// Flow-session counts per attack type as `(type, BS1, BS2)`.
pub const INVENTORY: [(AttackType, usize, usize); 9] = [
    (AttackType::Benign, 406_959, 70_778),
    (AttackType::UdpFlood, 175_811, 281_529),
    (AttackType::HttpFlood, 76_121, 64_691),
    (AttackType::SlowrateDos, 36_092, 37_032),
    (AttackType::TcpConnectScan, 10_022, 10_030),
    (AttackType::SynScan, 10_019, 10_024),
    (AttackType::UdpScan, 7_887, 8_019),
    (AttackType::SynFlood, 4_792, 4_929),
    (AttackType::IcmpFlood, 613, 542),
];

/// Index of the first TCP-only feature (SrcTCPBase); the rest of the row is TCP-only too.
const TCP_BASE_START: usize = 26;
// profiles are a property of the generator, not of the caller's seed
const PROFILE_SEED: u64 = 0x5EED_F10E;

fn is_tcp(attack: AttackType) -> bool {
    !matches!(
        attack,
        AttackType::UdpFlood | AttackType::UdpScan | AttackType::IcmpFlood
    )
}

/// Per-(type, station) counts at `scale`, each at least 1 when the full count is nonzero.
pub fn scaled_inventory(scale: f64) -> Vec<(AttackType, BaseStation, usize)> {
    let mut out = Vec::new();
    for (attack, bs1, bs2) in INVENTORY {
        for (station, n) in [(BaseStation::Bs1, bs1), (BaseStation::Bs2, bs2)] {
            let k = ((n as f64 * scale).round() as usize).max(1).min(n.max(1));
            out.push((attack, station, k));
        }
    }
    out
}

struct Profiles {
    log_mean: [[f64; N_FEATURES]; 9],
    station_shift: [[f64; N_FEATURES]; 2],
}

impl Profiles {
    fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(PROFILE_SEED);
        let mut log_mean = [[0.0; N_FEATURES]; 9];
        for row in log_mean.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.random_range(0.0..6.0);
            }
        }
        let mut station_shift = [[0.0; N_FEATURES]; 2];
        for v in station_shift[1].iter_mut() {
            *v = rng.random_range(-0.4..0.4);
        }
        Self {
            log_mean,
            station_shift,
        }
    }
}

/// Records in inventory order (type-major, BS1 before BS2).
pub fn synthesize(scale: f64, seed: u64) -> Result<Vec<FlowRecord>, DataError> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(DataError::Argument(format!("scale {scale} outside (0, 1]")));
    }
    let profiles = Profiles::new();
    let noise = Normal::new(0.0, 0.6).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for (attack, station, n) in scaled_inventory(scale) {
        let s = station as usize;
        for _ in 0..n {
            let mut features = [0.0; N_FEATURES];
            for (j, f) in features.iter_mut().enumerate() {
                if j >= TCP_BASE_START && !is_tcp(attack) {
                    continue;
                }
                let mu = profiles.log_mean[attack.code() as usize][j] + profiles.station_shift[s][j];
                *f = (mu + noise.sample(&mut rng)).exp().round();
            }
            records.push(FlowRecord {
                features,
                attack,
                base_station: station,
            });
        }
    }
    Ok(records)
}

/// Writes records with the default schema headers.
pub fn write_flows_csv<W: Write>(records: &[FlowRecord], writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.extend(["Label", "Attack Type", "BaseStation"]);
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = r
            .features
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if j >= TCP_BASE_START && !is_tcp(r.attack) {
                    String::new()
                } else {
                    v.to_string()
                }
            })
            .collect();
        row.push(if r.is_malicious() { "Malicious" } else { "Benign" }.into());
        row.push(r.attack.name().into());
        row.push(r.base_station.name().into());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
