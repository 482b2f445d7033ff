//! Subsampling, class balancing and the three experiment splits.
//!
//! Every operation is a deterministic function of `(data, seed)`. Output sets
//! keep the input record order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::record::{AttackType, BaseStation, FlowRecord};
use super::DataError;

// RNG streams keep the operations independent under one seed
const STREAM_EXP1: u64 = 1;
const STREAM_BALANCE: u64 = 2;
const STREAM_SUBSAMPLE: u64 = 3;
const STREAM_HOLDOUT: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `n` into per-group quotas proportional to `fraction` whose total is
/// `round(fraction · Σ sizes)`, using largest remainders (ties to the earlier group).
fn quotas(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&n| fraction * n as f64).collect();
    let mut q: Vec<usize> = exact
        .iter()
        .zip(sizes)
        .map(|(&e, &n)| (e.floor() as usize).min(n))
        .collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut assigned: usize = q.iter().sum();
    for &g in order.iter().cycle().take(sizes.len() * 2) {
        if assigned >= target {
            break;
        }
        if q[g] < sizes[g] {
            q[g] += 1;
            assigned += 1;
        }
    }
    q
}

/// Index-level stratified selection: returns a mask of chosen records.
fn stratified_pick<K: Ord + Copy>(
    records: &[FlowRecord],
    key: impl Fn(&FlowRecord) -> K,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(key(r)).or_default().push(i);
    }
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let q = quotas(&sizes, fraction);
    let mut picked = vec![false; records.len()];
    for (mut members, take) in groups.into_values().zip(q) {
        members.shuffle(rng);
        for &i in &members[..take] {
            picked[i] = true;
        }
    }
    picked
}

fn partition(records: &[FlowRecord], mask: &[bool]) -> (Vec<FlowRecord>, Vec<FlowRecord>) {
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for (r, &m) in records.iter().zip(mask) {
        if m {
            yes.push(r.clone());
        } else {
            no.push(r.clone());
        }
    }
    (yes, no)
}

fn with_tag(data: &Dataset, records: Vec<FlowRecord>, tag: &str) -> Dataset {
    let provenance = if data.provenance.is_empty() {
        tag.to_string()
    } else {
        format!("{} | {tag}", data.provenance)
    };
    Dataset::new(records, provenance)
}

/// Stratified random train/test split by label.
pub fn split_exp1(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::Argument(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mask = stratified_pick(&data.records, FlowRecord::is_malicious, ratio, &mut rng(seed, STREAM_EXP1));
    let (train, test) = partition(&data.records, &mask);
    Ok((
        with_tag(data, train, &format!("exp1 train ratio={ratio} seed={seed}")),
        with_tag(data, test, &format!("exp1 test ratio={ratio} seed={seed}")),
    ))
}

/// Downsamples the majority label to the minority count.
pub fn balance_classes(records: &[FlowRecord], seed: u64) -> Vec<FlowRecord> {
    let n_mal = records.iter().filter(|r| r.is_malicious()).count();
    let n_ben = records.len() - n_mal;
    let keep_each = n_mal.min(n_ben);
    let mut rng = rng(seed, STREAM_BALANCE);
    let mut mask = vec![true; records.len()];
    for malicious in [false, true] {
        let mut members: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].is_malicious() == malicious)
            .collect();
        if members.len() > keep_each {
            members.shuffle(&mut rng);
            for &i in &members[keep_each..] {
                mask[i] = false;
            }
        }
    }
    partition(records, &mask).0
}

/// Train on one base station, test on the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "bs1-to-bs2")]
    Bs1ToBs2,
    #[serde(rename = "bs2-to-bs1")]
    Bs2ToBs1,
}

impl Direction {
    pub fn source(self) -> BaseStation {
        match self {
            Direction::Bs1ToBs2 => BaseStation::Bs1,
            Direction::Bs2ToBs1 => BaseStation::Bs2,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Bs1ToBs2 => Direction::Bs2ToBs1,
            Direction::Bs2ToBs1 => Direction::Bs1ToBs2,
        }
    }
}

pub fn split_exp2(
    data: &Dataset,
    direction: Direction,
    balance: bool,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let src = direction.source();
    for station in [src, src.other()] {
        if !data.records.iter().any(|r| r.base_station == station) {
            return Err(DataError::Argument(format!(
                "no records from base station {}",
                station.name()
            )));
        }
    }
    let mask: Vec<bool> = data.records.iter().map(|r| r.base_station == src).collect();
    let (mut train, test) = partition(&data.records, &mask);
    if balance {
        train = balance_classes(&train, seed);
    }
    let tag = format!(
        "exp2 {}->{} balance={balance} seed={seed}",
        src.name(),
        src.other().name()
    );
    Ok((
        with_tag(data, train, &format!("{tag} train")),
        with_tag(data, test, &format!("{tag} test")),
    ))
}

/// Attack type(s) withheld from training in the leave-attack-out protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heldout {
    UdpFlood,
    HttpFlood,
    SlowrateDos,
    /// All minor scan/flood types merged into one test set.
    RemainType,
}

impl Heldout {
    pub const ALL: [Heldout; 4] = [
        Heldout::UdpFlood,
        Heldout::HttpFlood,
        Heldout::SlowrateDos,
        Heldout::RemainType,
    ];

    pub fn attack_types(self) -> &'static [AttackType] {
        match self {
            Heldout::UdpFlood => &[AttackType::UdpFlood],
            Heldout::HttpFlood => &[AttackType::HttpFlood],
            Heldout::SlowrateDos => &[AttackType::SlowrateDos],
            Heldout::RemainType => &AttackType::REMAIN,
        }
    }

    pub fn contains(self, attack: AttackType) -> bool {
        self.attack_types().contains(&attack)
    }

    pub fn name(self) -> &'static str {
        match self {
            Heldout::UdpFlood => "UDPFlood",
            Heldout::HttpFlood => "HTTPFlood",
            Heldout::SlowrateDos => "SlowrateDoS",
            Heldout::RemainType => "RemainType",
        }
    }
}

impl fmt::Display for Heldout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heldout {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Heldout::ALL
            .into_iter()
            .find(|h| h.name().eq_ignore_ascii_case(s.trim()))
            .or_else(|| s.trim().eq_ignore_ascii_case("remain").then_some(Heldout::RemainType))
            .ok_or_else(|| DataError::Argument(format!("unknown held-out attack type '{s}'")))
    }
}

/// Test on the held-out type(s); train on everything else, class-balanced.
pub fn split_exp3(data: &Dataset, heldout: Heldout, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    let mask: Vec<bool> = data.records.iter().map(|r| heldout.contains(r.attack)).collect();
    let (test, rest) = partition(&data.records, &mask);
    if test.is_empty() {
        return Err(DataError::Argument(format!("no {heldout} records in dataset")));
    }
    let train = balance_classes(&rest, seed);
    let tag = format!("exp3 heldout={heldout} seed={seed}");
    Ok((
        with_tag(data, train, &format!("{tag} train")),
        with_tag(data, test, &format!("{tag} test")),
    ))
}

/// Stratified-by-attack-type subsample of exactly `min(n, len)` records.
pub fn subsample(data: &Dataset, n: usize, seed: u64) -> Dataset {
    if n >= data.len() {
        return data.clone();
    }
    let fraction = n as f64 / data.len() as f64;
    let mask = stratified_pick(&data.records, |r| r.attack, fraction, &mut rng(seed, STREAM_SUBSAMPLE));
    with_tag(data, partition(&data.records, &mask).0, &format!("subsample n={n} seed={seed}"))
}

/// Holds back a label-stratified `fraction` of `data`; returns `(kept, held_back)`.
pub fn holdout_slice(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Argument(format!("holdout fraction {fraction} outside (0, 1)")));
    }
    let mask = stratified_pick(&data.records, FlowRecord::is_malicious, fraction, &mut rng(seed, STREAM_HOLDOUT));
    let (held, kept) = partition(&data.records, &mask);
    Ok((
        with_tag(data, kept, "training portion"),
        with_tag(data, held, &format!("held-back slice fraction={fraction}")),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::N_FEATURES;

    fn rec(i: usize, attack: AttackType, bs: BaseStation) -> FlowRecord {
        let mut features = [0.0; N_FEATURES];
        features[0] = i as f64;
        FlowRecord {
            features,
            attack,
            base_station: bs,
        }
    }

    fn ids(d: &Dataset) -> Vec<usize> {
        d.records.iter().map(|r| r.features[0] as usize).collect()
    }

    #[test]
    fn quotas_hit_rounded_total() {
        assert_eq!(quotas(&[5, 5], 0.7).iter().sum::<usize>(), 7);
        assert_eq!(quotas(&[477_737, 738_153], 0.7).iter().sum::<usize>(), 851_123);
        assert_eq!(quotas(&[1, 1, 1], 0.5).iter().sum::<usize>(), 2);
        assert_eq!(quotas(&[3], 1.0), vec![3]);
    }

    #[test]
    fn exp1_ten_records() {
        let recs: Vec<_> = (0..10)
            .map(|i| rec(i, if i < 6 { AttackType::Benign } else { AttackType::UdpFlood }, BaseStation::Bs1))
            .collect();
        let d = Dataset::new(recs, "");
        let (tr, te) = split_exp1(&d, 0.7, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        let (tr2, _) = split_exp1(&d, 0.7, 3).unwrap();
        assert_eq!(ids(&tr), ids(&tr2));
        let mut all = ids(&tr);
        all.extend(ids(&te));
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_exp1(&d, 1.0, 3).is_err());
    }

    #[test]
    fn balance_downsamples_majority() {
        let recs: Vec<_> = (0..12)
            .map(|i| rec(i, if i < 9 { AttackType::Benign } else { AttackType::SynScan }, BaseStation::Bs2))
            .collect();
        let out = balance_classes(&recs, 1);
        assert_eq!(out.len(), 6);
        assert_eq!(out.iter().filter(|r| r.is_malicious()).count(), 3);
    }

    #[test]
    fn exp2_directions_swap() {
        let recs: Vec<_> = (0..8)
            .map(|i| {
                rec(
                    i,
                    if i % 2 == 0 { AttackType::Benign } else { AttackType::HttpFlood },
                    if i < 5 { BaseStation::Bs1 } else { BaseStation::Bs2 },
                )
            })
            .collect();
        let d = Dataset::new(recs, "");
        let (a_tr, a_te) = split_exp2(&d, Direction::Bs1ToBs2, false, 0).unwrap();
        let (b_tr, b_te) = split_exp2(&d, Direction::Bs1ToBs2.reversed(), false, 0).unwrap();
        assert_eq!(ids(&a_tr), ids(&b_te));
        assert_eq!(ids(&a_te), ids(&b_tr));
        assert_eq!(a_tr.len(), 5);
        let only_bs1 = Dataset::new(d.records[..5].to_vec(), "");
        assert!(split_exp2(&only_bs1, Direction::Bs1ToBs2, false, 0).is_err());
    }

    #[test]
    fn exp3_holds_out_types() {
        let kinds = [
            AttackType::Benign,
            AttackType::Benign,
            AttackType::UdpFlood,
            AttackType::SynScan,
            AttackType::IcmpFlood,
            AttackType::HttpFlood,
        ];
        let recs: Vec<_> = (0..30).map(|i| rec(i, kinds[i % kinds.len()], BaseStation::Bs1)).collect();
        let d = Dataset::new(recs, "");
        let (tr, te) = split_exp3(&d, Heldout::RemainType, 9).unwrap();
        assert_eq!(te.len(), 10);
        assert!(te.records.iter().all(|r| AttackType::REMAIN.contains(&r.attack)));
        assert!(tr.records.iter().all(|r| !AttackType::REMAIN.contains(&r.attack)));
        assert_eq!(tr.n_malicious() * 2, tr.len());
        assert!("Smurf".parse::<Heldout>().is_err());
        assert_eq!("remaintype".parse::<Heldout>().unwrap(), Heldout::RemainType);
        assert!(split_exp3(&d, Heldout::SlowrateDos, 9).is_err());
    }

    #[test]
    fn subsample_is_stratified_and_exact() {
        let recs: Vec<_> = (0..1000)
            .map(|i| rec(i, if i % 10 == 0 { AttackType::SynFlood } else { AttackType::Benign }, BaseStation::Bs1))
            .collect();
        let d = Dataset::new(recs, "");
        let s = subsample(&d, 200, 5);
        assert_eq!(s.len(), 200);
        assert_eq!(s.n_malicious(), 20);
        assert_eq!(subsample(&d, 5000, 5).len(), 1000);
    }
}
