//! Run statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::frame_model::{AccessCategory, Micros};
use crate::scheduler::SchedulerPolicy;

/// How latency is measured; copied into every report.
pub const LATENCY_DEFINITION: &str = "MSDU creation to block-ack confirmation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcMetrics {
    pub ac: AccessCategory,
    pub generated: u64,
    pub delivered_msdus: u64,
    pub delivered_payload_bytes: u64,
    /// Payload confirmed by the end of the run, over the run duration.
    pub goodput_mbps: f64,
    pub latency_mean_us: f64,
    pub latency_p95_us: u64,
    pub latency_max_us: u64,
    /// Mean absolute difference of consecutive latencies within a flow.
    pub jitter_us: f64,
    pub retransmitted_mpdus: u64,
    pub dropped: u64,
    pub dropped_retry_limit: u64,
    pub dropped_overflow: u64,
    /// Still queued or in flight when the run stopped.
    pub residual: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub policy: SchedulerPolicy,
    pub seed: u64,
    pub duration_us: Micros,
    pub rng: String,
    pub latency_definition: String,
    pub per_ac: Vec<AcMetrics>,
    pub goodput_mbps: f64,
    pub airtime_busy: f64,
    pub aggregation_efficiency: f64,
    pub transmissions: u64,
    /// MSDUs per transmission -> number of transmissions.
    pub aggregate_histogram: BTreeMap<usize, u64>,
}

impl MetricsReport {
    pub fn ac(&self, ac: AccessCategory) -> &AcMetrics {
        self.per_ac.iter().find(|m| m.ac == ac).expect("every category is reported")
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[u64], pct: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Default)]
pub(crate) struct AcAccumulator {
    pub generated: u64,
    pub delivered: u64,
    pub delivered_bytes: u64,
    pub goodput_bytes: u64,
    pub latencies: Vec<u64>,
    pub jitter_sum: u64,
    pub jitter_count: u64,
    pub retx: u64,
    pub dropped_retry: u64,
    pub dropped_overflow: u64,
    pub residual: u64,
}

impl AcAccumulator {
    pub(crate) fn finish(mut self, ac: AccessCategory, duration_us: Micros) -> AcMetrics {
        self.latencies.sort_unstable();
        let n = self.latencies.len();
        let mean = if n == 0 { 0.0 } else { self.latencies.iter().sum::<u64>() as f64 / n as f64 };
        AcMetrics {
            ac,
            generated: self.generated,
            delivered_msdus: self.delivered,
            delivered_payload_bytes: self.delivered_bytes,
            goodput_mbps: mbps(self.goodput_bytes, duration_us),
            latency_mean_us: mean,
            latency_p95_us: percentile(&self.latencies, 95.0),
            latency_max_us: self.latencies.last().copied().unwrap_or(0),
            jitter_us: if self.jitter_count == 0 { 0.0 } else { self.jitter_sum as f64 / self.jitter_count as f64 },
            retransmitted_mpdus: self.retx,
            dropped: self.dropped_retry + self.dropped_overflow,
            dropped_retry_limit: self.dropped_retry,
            dropped_overflow: self.dropped_overflow,
            residual: self.residual,
        }
    }
}

pub(crate) fn mbps(bytes: u64, duration_us: Micros) -> f64 {
    if duration_us == 0 {
        0.0
    } else {
        bytes as f64 * 8.0 / duration_us as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<u64> = (1..=20).collect();
        assert_eq!(percentile(&v, 95.0), 19);
        assert_eq!(percentile(&v, 100.0), 20);
        assert_eq!(percentile(&[5], 95.0), 5);
        assert_eq!(percentile(&[], 95.0), 0);
        assert_eq!(percentile(&[1, 2, 3], 0.0), 1);
    }
}
