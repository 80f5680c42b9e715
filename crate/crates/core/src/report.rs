//! CSV and JSON serialization of run results.

use std::fmt::Write as _;

use serde::Serialize;

use crate::frame_model::AccessCategory;
use crate::metrics::{AcMetrics, MetricsReport};
use crate::scenario::Scenario;
use crate::scheduler::SchedulerPolicy;

pub const CSV_HEADER: &str =
    "policy,seed,ac,delivered,goodput_mbps,lat_mean_us,lat_p95_us,lat_max_us,jitter_us,retx,dropped,agg_efficiency";

const SWEEP_METRICS: [&str; 10] = [
    "delivered",
    "goodput_mbps",
    "lat_mean_us",
    "lat_p95_us",
    "lat_max_us",
    "jitter_us",
    "retx",
    "dropped",
    "agg_efficiency",
    "residual",
];

/// One row per (report, access category), reports in the given order.
pub fn to_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for m in &r.per_ac {
            writeln!(
                out,
                "{},{},{},{},{:.3},{:.3},{},{},{:.3},{},{},{:.3}",
                r.policy,
                r.seed,
                m.ac,
                m.delivered_msdus,
                m.goodput_mbps,
                m.latency_mean_us,
                m.latency_p95_us,
                m.latency_max_us,
                m.jitter_us,
                m.retransmitted_mpdus,
                m.dropped,
                r.aggregation_efficiency,
            )
            .expect("writing to a String");
        }
    }
    out
}

#[derive(Serialize)]
struct RunDocument<'a> {
    scenario: &'a Scenario,
    runs: &'a [MetricsReport],
}

/// The resolved scenario followed by every report.
pub fn to_json(scenario: &Scenario, reports: &[MetricsReport]) -> String {
    serde_json::to_string_pretty(&RunDocument { scenario, runs: reports }).expect("reports serialize")
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        let n = values.len();
        if n == 0 {
            return Spread { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Spread { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub policy: SchedulerPolicy,
    pub ac: AccessCategory,
    pub seeds: usize,
    /// Keyed like the CSV columns.
    pub metrics: Vec<(String, Spread)>,
}

fn sweep_values(m: &AcMetrics, r: &MetricsReport) -> [f64; 10] {
    [
        m.delivered_msdus as f64,
        m.goodput_mbps,
        m.latency_mean_us,
        m.latency_p95_us as f64,
        m.latency_max_us as f64,
        m.jitter_us,
        m.retransmitted_mpdus as f64,
        m.dropped as f64,
        r.aggregation_efficiency,
        m.residual as f64,
    ]
}

/// Aggregates reports across seeds, grouped by policy (first-seen order) then
/// access category.
pub fn summarize_sweep(reports: &[MetricsReport]) -> Vec<SweepRow> {
    let mut policies: Vec<SchedulerPolicy> = Vec::new();
    for r in reports {
        if !policies.contains(&r.policy) {
            policies.push(r.policy);
        }
    }
    let mut rows = Vec::new();
    for policy in policies {
        let group: Vec<&MetricsReport> = reports.iter().filter(|r| r.policy == policy).collect();
        for ac in AccessCategory::ALL {
            let samples: Vec<[f64; 10]> = group.iter().map(|r| sweep_values(r.ac(ac), r)).collect();
            let metrics = SWEEP_METRICS
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let column: Vec<f64> = samples.iter().map(|s| s[i]).collect();
                    (name.to_string(), Spread::of(&column))
                })
                .collect();
            rows.push(SweepRow { policy, ac, seeds: group.len(), metrics });
        }
    }
    rows
}

pub fn sweep_csv_header() -> String {
    let mut header = String::from("policy,seeds,ac");
    for name in SWEEP_METRICS {
        write!(header, ",{name}_mean,{name}_std").expect("writing to a String");
    }
    header
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = sweep_csv_header();
    out.push('\n');
    for row in rows {
        write!(out, "{},{},{}", row.policy, row.seeds, row.ac).expect("writing to a String");
        for (_, s) in &row.metrics {
            write!(out, ",{:.3},{:.3}", s.mean, s.std).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    scenario: &'a Scenario,
    seeds: &'a [u64],
    summary: &'a [SweepRow],
}

pub fn sweep_to_json(scenario: &Scenario, seeds: &[u64], rows: &[SweepRow]) -> String {
    serde_json::to_string_pretty(&SweepDocument { scenario, seeds, summary: rows }).expect("summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread() {
        let s = Spread::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, 5.0);
        assert!((s.std - 2.138_089_935).abs() < 1e-9);
        assert_eq!(Spread::of(&[3.0]), Spread { mean: 3.0, std: 0.0 });
    }

    #[test]
    fn sweep_header_shape() {
        let h = sweep_csv_header();
        assert!(h.starts_with("policy,seeds,ac,delivered_mean,delivered_std,goodput_mbps_mean"));
        assert_eq!(h.split(',').count(), 3 + 2 * SWEEP_METRICS.len());
    }
}
