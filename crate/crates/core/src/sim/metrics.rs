// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimDuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    AlertTime,
    FlowInstallTime,
    SharingTime,
    TotalTimeNet1,
    TotalTimeNet2,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [
        MetricName::AlertTime,
        MetricName::FlowInstallTime,
        MetricName::SharingTime,
        MetricName::TotalTimeNet1,
        MetricName::TotalTimeNet2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::AlertTime => "alert_time",
            MetricName::FlowInstallTime => "flow_install_time",
            MetricName::SharingTime => "sharing_time",
            MetricName::TotalTimeNet1 => "total_time_net1",
            MetricName::TotalTimeNet2 => "total_time_net2",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric `{0}`")]
pub struct UnknownMetric(pub String);

impl FromStr for MetricName {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMetric(s.to_owned()))
    }
}

/// One measured duration. Stored in microseconds so records compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetricRecord {
    pub name: MetricName,
    pub trial: u32,
    pub value: SimDuration,
}

impl MetricRecord {
    pub fn value_ms(&self) -> f64 {
        self.value.as_ms_f64()
    }
}

pub const CSV_HEADER: &str = "name,trial,value_ms";

/// Renders `name,trial,value_ms` rows under a header line.
pub fn to_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.name, r.trial, r.value_ms()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: MetricName,
    pub count: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Per-metric statistics, in [`MetricName::ALL`] order; absent metrics are skipped.
pub fn summarize(records: &[MetricRecord]) -> Vec<MetricSummary> {
    MetricName::ALL
        .into_iter()
        .filter_map(|name| {
            let values: Vec<u64> = records.iter().filter(|r| r.name == name).map(|r| r.value.as_us()).collect();
            if values.is_empty() {
                return None;
            }
            let sum: u128 = values.iter().map(|&v| u128::from(v)).sum();
            let mean_us = sum as f64 / values.len() as f64;
            Some(MetricSummary {
                name,
                count: values.len(),
                mean_ms: mean_us / 1000.0,
                min_ms: *values.iter().min().unwrap() as f64 / 1000.0,
                max_ms: *values.iter().max().unwrap() as f64 / 1000.0,
            })
        })
        .collect()
}
