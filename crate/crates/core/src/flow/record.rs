use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

pub const N_FEATURES: usize = 28;

/// The fixed flow-feature set, in model input order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "Dur",
    "STtl",
    "dTtl",
    "TotPkts",
    "SrcPkts",
    "DstPkts",
    "TotBytes",
    "SrcBytes",
    "DstBytes",
    "Offset",
    "sMeanpktSz",
    "dMeanPktSz",
    "Load",
    "SrcLoad",
    "DstLoad",
    "Loss",
    "SrcLoss",
    "DstLoss",
    "SrcWin",
    "DstWin",
    "TcpRtt",
    "SynAck",
    "AckDat",
    "Rate",
    "SrcRate",
    "DstRate",
    "SrcTCPBase",
    "DstTCPBase",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackType {
    Benign,
    UdpFlood,
    HttpFlood,
    SlowrateDos,
    TcpConnectScan,
    SynScan,
    UdpScan,
    SynFlood,
    IcmpFlood,
}

impl AttackType {
    pub const ALL: [AttackType; 9] = [
        AttackType::Benign,
        AttackType::UdpFlood,
        AttackType::HttpFlood,
        AttackType::SlowrateDos,
        AttackType::TcpConnectScan,
        AttackType::SynScan,
        AttackType::UdpScan,
        AttackType::SynFlood,
        AttackType::IcmpFlood,
    ];

    /// Attack types merged into the single "remaining types" test set.
    pub const REMAIN: [AttackType; 5] = [
        AttackType::TcpConnectScan,
        AttackType::SynScan,
        AttackType::UdpScan,
        AttackType::SynFlood,
        AttackType::IcmpFlood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackType::Benign => "Benign",
            AttackType::UdpFlood => "UDPFlood",
            AttackType::HttpFlood => "HTTPFlood",
            AttackType::SlowrateDos => "SlowrateDoS",
            AttackType::TcpConnectScan => "TCPConnectScan",
            AttackType::SynScan => "SYNScan",
            AttackType::UdpScan => "UDPScan",
            AttackType::SynFlood => "SYNFlood",
            AttackType::IcmpFlood => "ICMPFlood",
        }
    }

    pub fn is_malicious(self) -> bool {
        self != AttackType::Benign
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl FromStr for AttackType {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        if key == "legitimate" || key == "normal" {
            return Ok(AttackType::Benign);
        }
        AttackType::ALL
            .into_iter()
            .find(|t| squash(t.name()) == key)
            .ok_or_else(|| DataError::Argument(format!("unknown attack type '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaseStation {
    Bs1,
    Bs2,
}

impl BaseStation {
    pub fn name(self) -> &'static str {
        match self {
            BaseStation::Bs1 => "BS1",
            BaseStation::Bs2 => "BS2",
        }
    }

    pub fn other(self) -> Self {
        match self {
            BaseStation::Bs1 => BaseStation::Bs2,
            BaseStation::Bs2 => BaseStation::Bs1,
        }
    }
}

impl FromStr for BaseStation {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match squash(s).as_str() {
            "bs1" | "1" | "basestation1" => Ok(BaseStation::Bs1),
            "bs2" | "2" | "basestation2" => Ok(BaseStation::Bs2),
            _ => Err(DataError::Argument(format!("unknown base station '{s}'"))),
        }
    }
}

/// Parses a benign/malicious label; `Ok(true)` means malicious.
pub(crate) fn parse_label(s: &str) -> Option<bool> {
    match squash(s).as_str() {
        "benign" | "normal" | "0" | "legitimate" => Some(false),
        "malicious" | "attack" | "1" => Some(true),
        _ => None,
    }
}

/// One labeled flow session. The benign/malicious label is derived from the
/// attack type, so the two can never disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub features: [f64; N_FEATURES],
    pub attack: AttackType,
    pub base_station: BaseStation,
}

impl FlowRecord {
    pub fn is_malicious(&self) -> bool {
        self.attack.is_malicious()
    }

    /// 1.0 for malicious, 0.0 for benign.
    pub fn label(&self) -> f64 {
        if self.is_malicious() {
            1.0
        } else {
            0.0
        }
    }
}
