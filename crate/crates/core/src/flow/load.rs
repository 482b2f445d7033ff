//! Flow-feature CSV ingestion.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{parse_label, AttackType, BaseStation, FlowRecord, FEATURE_NAMES, N_FEATURES};
use super::DataError;

/// Binds logical field names to CSV column headers. Header matching ignores
/// case and surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMap {
    /// Feature name → column header. Features not listed use their own name.
    pub features: BTreeMap<String, String>,
    pub label: String,
    pub attack_type: String,
    pub base_station: String,
}

impl Default for SchemaMap {
    fn default() -> Self {
        Self {
            features: BTreeMap::new(),
            label: "Label".into(),
            attack_type: "Attack Type".into(),
            base_station: "BaseStation".into(),
        }
    }
}

impl SchemaMap {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let map: SchemaMap =
            serde_json::from_str(text).map_err(|e| DataError::Schema(format!("schema map: {e}")))?;
        if let Some(unknown) = map.features.keys().find(|k| !FEATURE_NAMES.contains(&k.as_str())) {
            return Err(DataError::Schema(format!("schema map names unknown feature '{unknown}'")));
        }
        Ok(map)
    }

    pub fn from_path(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn column_for<'a>(&'a self, feature: &'a str) -> &'a str {
        self.features.get(feature).map_or(feature, String::as_str)
    }
}

/// Records plus ingestion counters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_skipped: usize,
    /// Skip reason → count.
    pub skip_reasons: BTreeMap<String, usize>,
    /// Feature name → number of rows where it was missing and set to 0.
    pub imputed: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct LoadedFlows {
    pub records: Vec<FlowRecord>,
    pub report: LoadReport,
}

fn norm_header(h: &str) -> String {
    h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase()
}

pub fn load_flows(path: &Path, schema: &SchemaMap) -> Result<LoadedFlows, DataError> {
    let file = File::open(path)?;
    load_flows_from_reader(file, schema)
}

pub fn load_flows_from_reader<R: Read>(
    reader: R,
    schema: &SchemaMap,
) -> Result<LoadedFlows, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(norm_header).collect();
    let find = |logical: &str, column: &str| -> Result<usize, DataError> {
        let want = norm_header(column);
        headers
            .iter()
            .position(|h| *h == want)
            .ok_or_else(|| DataError::MissingColumn(logical.to_string()))
    };
    let mut feature_cols = [0usize; N_FEATURES];
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        feature_cols[i] = find(name, schema.column_for(name))?;
    }
    let label_col = find("label", &schema.label)?;
    let attack_col = find("attack_type", &schema.attack_type)?;
    let station_col = find("base_station", &schema.base_station)?;

    let mut report = LoadReport::default();
    let mut imputed = [0usize; N_FEATURES];
    let mut records = Vec::new();
    let skip = |report: &mut LoadReport, reason: &str| {
        report.rows_skipped += 1;
        *report.skip_reasons.entry(reason.to_string()).or_default() += 1;
    };

    for row in rdr.records() {
        let row = row?;
        report.rows_read += 1;
        let field = |c: usize| row.get(c).unwrap_or("");

        let Ok(attack) = field(attack_col).parse::<AttackType>() else {
            skip(&mut report, "unknown attack type");
            continue;
        };
        match parse_label(field(label_col)) {
            Some(m) if m == attack.is_malicious() => {}
            Some(_) => {
                skip(&mut report, "label disagrees with attack type");
                continue;
            }
            None => {
                skip(&mut report, "unparsable label");
                continue;
            }
        }
        let Ok(base_station) = field(station_col).parse::<BaseStation>() else {
            skip(&mut report, "unknown base station");
            continue;
        };

        let mut features = [0.0; N_FEATURES];
        let mut missing = [false; N_FEATURES];
        let mut bad = false;
        for (i, &c) in feature_cols.iter().enumerate() {
            let raw = field(c);
            if raw.is_empty() {
                missing[i] = true;
                continue;
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => features[i] = v,
                _ => {
                    bad = true;
                    break;
                }
            }
        }
        if bad {
            skip(&mut report, "unparsable numeric field");
            continue;
        }
        for (count, m) in imputed.iter_mut().zip(missing) {
            *count += m as usize;
        }
        records.push(FlowRecord {
            features,
            attack,
            base_station,
        });
    }
    report.imputed = FEATURE_NAMES
        .iter()
        .zip(imputed)
        .filter(|(_, n)| *n > 0)
        .map(|(name, n)| (name.to_string(), n))
        .collect();
    Ok(LoadedFlows { records, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(skip: Option<&str>) -> String {
        let mut cols: Vec<&str> = FEATURE_NAMES
            .iter()
            .copied()
            .filter(|c| Some(*c) != skip)
            .collect();
        cols.extend(["Label", "Attack Type", "BaseStation"]);
        cols.join(",")
    }

    fn row(values: &[String], label: &str, attack: &str, bs: &str) -> String {
        let mut v = values.to_vec();
        v.extend([label.to_string(), attack.to_string(), bs.to_string()]);
        v.join(",")
    }

    fn full_row(i: usize) -> Vec<String> {
        (0..N_FEATURES).map(|j| format!("{}", i * 100 + j)).collect()
    }

    #[test]
    fn ten_valid_rows() {
        let mut csv = header(None) + "\n";
        for i in 0..10 {
            let (label, attack) = if i % 2 == 0 { ("Benign", "Benign") } else { ("Malicious", "UDPFlood") };
            csv += &(row(&full_row(i), label, attack, "BS1") + "\n");
        }
        let out = load_flows_from_reader(csv.as_bytes(), &SchemaMap::default()).unwrap();
        assert_eq!(out.records.len(), 10);
        assert_eq!(out.report.rows_skipped, 0);
        assert_eq!(out.records[3].features[2], 302.0);
        assert_eq!(out.records[3].attack, AttackType::UdpFlood);
    }

    #[test]
    fn missing_value_is_imputed_and_counted() {
        let mut values = full_row(1);
        values[N_FEATURES - 1] = String::new();
        let csv = format!("{}\n{}\n", header(None), row(&values, "Benign", "Benign", "BS2"));
        let out = load_flows_from_reader(csv.as_bytes(), &SchemaMap::default()).unwrap();
        assert_eq!(out.records[0].features[N_FEATURES - 1], 0.0);
        assert_eq!(out.report.imputed.get("DstTCPBase"), Some(&1));
    }

    #[test]
    fn missing_column_names_it() {
        let csv = header(Some("Dur")) + "\n";
        let err = load_flows_from_reader(csv.as_bytes(), &SchemaMap::default()).unwrap_err();
        assert!(matches!(&err, DataError::MissingColumn(c) if c == "Dur"));
        assert!(err.to_string().contains("Dur"));
    }

    #[test]
    fn unparsable_rows_are_skipped_and_counted() {
        let mut bad = full_row(2);
        bad[4] = "abc".into();
        let csv = format!(
            "{}\n{}\n{}\n{}\n",
            header(None),
            row(&bad, "Malicious", "SYNScan", "BS1"),
            row(&full_row(3), "Benign", "UDPFlood", "BS1"),
            row(&full_row(4), "Malicious", "SYNScan", "BS1"),
        );
        let out = load_flows_from_reader(csv.as_bytes(), &SchemaMap::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.report.rows_skipped, 2);
        assert_eq!(out.report.skip_reasons["unparsable numeric field"], 1);
        assert_eq!(out.report.skip_reasons["label disagrees with attack type"], 1);
    }

    #[test]
    fn schema_map_renames_and_case_folds() {
        let text = header(None)
            .replace("STtl", "sTtl")
            .replace("Attack Type", "Attack_Kind");
        let csv = format!("{text}\n{}\n", row(&full_row(0), "0", "benign", "1"));
        let schema =
            SchemaMap::from_json(r#"{"attack_type": "attack_kind"}"#).unwrap();
        let out = load_flows_from_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].base_station, BaseStation::Bs1);
        assert!(SchemaMap::from_json(r#"{"features": {"Nope": "x"}}"#).is_err());
    }
}
