//! Bandwidth-parameterized end-to-end latency model.
//!
//! Total latency for a task is modeled as cloud inference time plus uplink
//! transmission time: `mc * per_call_latency + uplink_bytes / bandwidth`.
//! Per-call latency is estimated from the cloud model's modality (text 2.0 s,
//! visual 4.0 s by default) and is configurable per profile and per method.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network profile '{0}' has non-positive or non-finite bandwidth")]
    BadBandwidth(String),

    #[error("unknown network profile '{0}'")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallModality {
    CloudText,
    CloudVisual,
}

impl CallModality {
    fn key(&self) -> &'static str {
        match self {
            CallModality::CloudText => "cloud_text",
            CallModality::CloudVisual => "cloud_visual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub name: String,
    pub bandwidth_bytes_per_s: f64,
    pub per_call_latency_s: BTreeMap<String, f64>,
}

impl NetworkProfile {
    pub fn new(name: &str, bandwidth_bytes_per_s: f64) -> Self {
        let mut per_call_latency_s = BTreeMap::new();
        per_call_latency_s.insert("cloud_text".into(), 2.0);
        per_call_latency_s.insert("cloud_visual".into(), 4.0);
        Self {
            name: name.into(),
            bandwidth_bytes_per_s,
            per_call_latency_s,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.bandwidth_bytes_per_s.is_finite() && self.bandwidth_bytes_per_s > 0.0) {
            return Err(NetError::BadBandwidth(self.name.clone()));
        }
        Ok(())
    }

    pub fn per_call(&self, modality: CallModality) -> f64 {
        self.per_call_latency_s
            .get(modality.key())
            .copied()
            .unwrap_or(2.0)
    }
}

/// The four-profile bandwidth ladder: WiFi 10 MB/s, 4G 1 MB/s, 3G 200 kB/s,
/// 2G 50 kB/s.
pub fn default_ladder() -> Vec<NetworkProfile> {
    vec![
        NetworkProfile::new("wifi", 10_000_000.0),
        NetworkProfile::new("4g", 1_000_000.0),
        NetworkProfile::new("3g", 200_000.0),
        NetworkProfile::new("2g", 50_000.0),
    ]
}

pub fn profile_by_name(name: &str) -> Result<NetworkProfile, NetError> {
    default_ladder()
        .into_iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| NetError::UnknownProfile(name.to_string()))
}

/// End-to-end latency in seconds: inference plus transmission.
pub fn latency(
    profile: &NetworkProfile,
    modality: CallModality,
    mc: f64,
    uplink_bytes: f64,
) -> f64 {
    mc * profile.per_call(modality) + uplink_bytes / profile.bandwidth_bytes_per_s
}

/// Latency with an explicit per-call constant, for methods whose cloud
/// inference time does not fit either modality default.
pub fn latency_with_per_call(
    profile: &NetworkProfile,
    per_call_s: f64,
    mc: f64,
    uplink_bytes: f64,
) -> f64 {
    mc * per_call_s + uplink_bytes / profile.bandwidth_bytes_per_s
}

/// One comparison row for the network scan: mean cloud calls, the per-call
/// inference constant, and the effective uplink volume per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub name: String,
    pub mc: f64,
    pub per_call_s: f64,
    pub uplink_kb: f64,
}

impl MethodRow {
    pub fn new(name: &str, mc: f64, per_call_s: f64, uplink_kb: f64) -> Self {
        Self {
            name: name.into(),
            mc,
            per_call_s,
            uplink_kb,
        }
    }

    pub fn uplink_bytes(&self) -> f64 {
        self.uplink_kb * 1000.0
    }
}

/// Reference method configurations for the latency comparison. Uplink volumes
/// are the effective per-task values consistent with the published
/// bandwidth/latency ladder for each method.
pub fn reference_method_rows() -> Vec<MethodRow> {
    vec![
        MethodRow::new("appagent", 6.46, 4.0, 60.0),
        MethodRow::new("m3a", 13.39, 4.0, 348.0),
        MethodRow::new("uground", 12.21, 4.0, 180.0),
        MethodRow::new("core", 6.46, 4.0, 45.0),
        MethodRow::new("ecoagent", 1.86, 3.075, 13.0),
        MethodRow::new("adec", 1.44, 2.0, 15.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_is_valid_and_ordered() {
        let ladder = default_ladder();
        assert_eq!(ladder.len(), 4);
        for p in &ladder {
            p.validate().unwrap();
        }
        for w in ladder.windows(2) {
            assert!(w[0].bandwidth_bytes_per_s > w[1].bandwidth_bytes_per_s);
        }
    }

    #[test]
    fn wifi_anchor() {
        let wifi = profile_by_name("wifi").unwrap();
        let no_uplink = latency(&wifi, CallModality::CloudText, 1.44, 0.0);
        assert!((no_uplink - 2.88).abs() < 1e-12);
        let with_uplink = latency(&wifi, CallModality::CloudText, 1.44, 15_000.0);
        assert!((with_uplink - 2.8815).abs() < 1e-12);
    }

    #[test]
    fn latency_monotone_in_bandwidth_and_uplink() {
        let ladder = default_ladder();
        for row in reference_method_rows() {
            let mut prev = f64::NEG_INFINITY;
            for p in &ladder {
                let l = latency_with_per_call(p, row.per_call_s, row.mc, row.uplink_bytes());
                assert!(l > prev, "{} not increasing as bandwidth drops", row.name);
                prev = l;
            }
        }
        let two_g = profile_by_name("2g").unwrap();
        let a = latency(&two_g, CallModality::CloudText, 1.0, 1000.0);
        let b = latency(&two_g, CallModality::CloudText, 1.0, 2000.0);
        assert!(b > a);
    }

    #[test]
    fn bad_bandwidth_rejected() {
        let mut p = NetworkProfile::new("x", 0.0);
        assert!(p.validate().is_err());
        p.bandwidth_bytes_per_s = f64::INFINITY;
        assert!(p.validate().is_err());
    }
}
