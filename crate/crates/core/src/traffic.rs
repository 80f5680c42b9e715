//! Seedable per-flow traffic sources.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_model::{AccessCategory, FrameError, MacAddr, Micros, Msdu, MSDU_MAX_PAYLOAD};
use crate::rng::{flow_stream, substream, SimRng};

/// Address of the transmitting station.
pub const STATION_TX: MacAddr = MacAddr::local(0x0A);
/// Address of the (single) receiver.
pub const STATION_RX: MacAddr = MacAddr::local(0x0B);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("flow ended")]
    FlowEnded,
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrafficModel {
    Cbr { period_us: Micros, payload_bytes: usize },
    Poisson { rate_fps: f64, payload_bytes: usize },
    /// Constant-rate arrivals on the lattice `start + k * period`, kept only
    /// while inside an on-phase of the `on`/`off` cycle.
    OnOff { on_us: Micros, off_us: Micros, period_us: Micros, payload_bytes: usize },
}

impl TrafficModel {
    pub fn payload_bytes(&self) -> usize {
        match *self {
            TrafficModel::Cbr { payload_bytes, .. }
            | TrafficModel::Poisson { payload_bytes, .. }
            | TrafficModel::OnOff { payload_bytes, .. } => payload_bytes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub flow_id: u32,
    pub ac: AccessCategory,
    #[serde(flatten)]
    pub model: TrafficModel,
    pub start_us: Micros,
    pub stop_us: Micros,
    /// Always backlogged; the model's timing is ignored, its payload is used.
    pub saturated: bool,
}

impl FlowSpec {
    pub fn new(flow_id: u32, ac: AccessCategory, model: TrafficModel) -> Self {
        FlowSpec { flow_id, ac, model, start_us: 0, stop_us: Micros::MAX, saturated: false }
    }

    pub fn saturated(flow_id: u32, ac: AccessCategory, payload_bytes: usize) -> Self {
        FlowSpec {
            saturated: true,
            ..FlowSpec::new(flow_id, ac, TrafficModel::Cbr { period_us: 1, payload_bytes })
        }
    }

    pub fn payload_bytes(&self) -> usize {
        self.model.payload_bytes()
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        let invalid = |field, reason: String| Err(TrafficError::Invalid { field, reason });
        let payload = self.payload_bytes();
        if payload == 0 || payload > MSDU_MAX_PAYLOAD {
            return invalid("payload_bytes", format!("must be in 1..={MSDU_MAX_PAYLOAD}, got {payload}"));
        }
        if self.start_us >= self.stop_us {
            return invalid("start_us", format!("start {} must be before stop {}", self.start_us, self.stop_us));
        }
        if self.saturated {
            return Ok(());
        }
        match self.model {
            TrafficModel::Cbr { period_us: 0, .. } => invalid("period_us", "must be > 0".into()),
            TrafficModel::Poisson { rate_fps, .. } if !(rate_fps.is_finite() && rate_fps > 0.0) => {
                invalid("rate_fps", format!("must be > 0, got {rate_fps}"))
            }
            TrafficModel::OnOff { period_us, on_us, .. } if period_us == 0 || on_us == 0 => {
                invalid("period_us", "period and on-phase must be > 0".into())
            }
            _ => Ok(()),
        }
    }

    /// Builds the MSDU for one arrival of this flow.
    pub fn make_msdu(&self, id: u64, at: Micros) -> Result<Msdu, FrameError> {
        Msdu::zeroed(id, self.ac, STATION_RX, STATION_TX, self.payload_bytes(), at, self.flow_id)
    }
}

/// Next arrival time after `last` (the flow start for the first call).
pub fn next_arrival(flow: &FlowSpec, rng: &mut SimRng, last: Micros) -> Result<Micros, TrafficError> {
    if last >= flow.stop_us {
        return Err(TrafficError::FlowEnded);
    }
    let t = match flow.model {
        TrafficModel::Cbr { period_us, .. } => last + period_us,
        TrafficModel::Poisson { rate_fps, .. } => {
            let exp = Exp::new(rate_fps / 1e6).map_err(|e| TrafficError::Invalid {
                field: "rate_fps",
                reason: e.to_string(),
            })?;
            let gap: f64 = exp.sample(rng);
            last + (gap.round() as Micros).max(1)
        }
        TrafficModel::OnOff { on_us, off_us, period_us, .. } => {
            let cycle = on_us + off_us;
            let mut t = last + period_us;
            loop {
                if t >= flow.stop_us {
                    return Err(TrafficError::FlowEnded);
                }
                let phase = (t - flow.start_us) % cycle;
                if phase < on_us {
                    break t;
                }
                let next_on = t - phase + cycle;
                let k = (next_on - flow.start_us).div_ceil(period_us);
                t = flow.start_us + k * period_us;
            }
        }
    };
    if t >= flow.stop_us {
        Err(TrafficError::FlowEnded)
    } else {
        Ok(t)
    }
}

/// Iterator over one flow's arrival times.
pub struct FlowSource {
    spec: FlowSpec,
    rng: SimRng,
    last: Micros,
}

impl FlowSource {
    pub fn new(spec: FlowSpec, rng: SimRng) -> Self {
        FlowSource { last: spec.start_us, spec, rng }
    }
}

impl Iterator for FlowSource {
    type Item = Micros;

    fn next(&mut self) -> Option<Micros> {
        let t = next_arrival(&self.spec, &mut self.rng, self.last).ok()?;
        self.last = t;
        Some(t)
    }
}

/// Generates every non-saturated arrival before `horizon`, merged across flows
/// in `(time, flow index)` order with MSDU ids assigned in that order.
pub fn build_trace(flows: &[FlowSpec], seed: u64, horizon: Micros) -> Vec<Msdu> {
    let mut stamped: Vec<(Micros, usize)> = Vec::new();
    for (i, flow) in flows.iter().enumerate() {
        if flow.saturated {
            continue;
        }
        let clipped = FlowSpec { stop_us: flow.stop_us.min(horizon), ..*flow };
        if clipped.start_us >= clipped.stop_us {
            continue;
        }
        let source = FlowSource::new(clipped, substream(seed, flow_stream(i)));
        stamped.extend(source.map(|t| (t, i)));
    }
    stamped.sort_unstable();
    stamped
        .into_iter()
        .enumerate()
        .map(|(id, (t, i))| flows[i].make_msdu(id as u64, t).expect("validated flow payload"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrivals(flow: FlowSpec, seed: u64, n: usize) -> Vec<Micros> {
        FlowSource::new(flow, substream(seed, flow_stream(0))).take(n).collect()
    }

    #[test]
    fn cbr_arrivals() {
        let f = FlowSpec::new(1, AccessCategory::Voice, TrafficModel::Cbr { period_us: 20_000, payload_bytes: 160 });
        assert_eq!(arrivals(f, 0, 3), vec![20_000, 40_000, 60_000]);
    }

    #[test]
    fn cbr_flow_ends() {
        let f = FlowSpec {
            stop_us: 60_000,
            ..FlowSpec::new(1, AccessCategory::Voice, TrafficModel::Cbr { period_us: 20_000, payload_bytes: 160 })
        };
        assert_eq!(arrivals(f, 0, 10), vec![20_000, 40_000]);
        let mut rng = substream(0, 1);
        assert_eq!(next_arrival(&f, &mut rng, 40_000), Err(TrafficError::FlowEnded));
    }

    // Recorded once from the seeded generator (seed 42, stream 1).
    const POISSON_GOLDEN: [Micros; 8] = [1059, 1281, 1955, 5885, 6022, 7564, 7692, 7702];

    #[test]
    fn poisson_reproducible() {
        let f = FlowSpec::new(2, AccessCategory::BestEffort, TrafficModel::Poisson { rate_fps: 1000.0, payload_bytes: 1500 });
        let a = arrivals(f, 42, 8);
        assert_eq!(a, arrivals(f, 42, 8));
        assert_ne!(a, arrivals(f, 43, 8));
        assert_eq!(a, POISSON_GOLDEN);
    }

    #[test]
    fn on_off_respects_envelope() {
        let model = TrafficModel::OnOff { on_us: 10_000, off_us: 30_000, period_us: 3_000, payload_bytes: 1300 };
        let f = FlowSpec { start_us: 5_000, ..FlowSpec::new(3, AccessCategory::Video, model) };
        let times = arrivals(f, 0, 200);
        assert_eq!(&times[..4], &[8_000, 11_000, 14_000, 47_000]);
        for t in &times {
            assert!((t - 5_000) % 40_000 < 10_000, "{t} inside off-phase");
            assert_eq!((t - 5_000) % 3_000, 0);
        }
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn trace_merges_and_numbers() {
        let flows = [
            FlowSpec::new(1, AccessCategory::Voice, TrafficModel::Cbr { period_us: 20_000, payload_bytes: 160 }),
            FlowSpec::new(2, AccessCategory::Video, TrafficModel::Cbr { period_us: 10_000, payload_bytes: 1300 }),
            FlowSpec::saturated(3, AccessCategory::BestEffort, 1500),
        ];
        let trace = build_trace(&flows, 9, 50_000);
        let view: Vec<(Micros, u32, u64)> = trace.iter().map(|m| (m.created_at, m.flow_id, m.id)).collect();
        assert_eq!(
            view,
            vec![(10_000, 2, 0), (20_000, 1, 1), (20_000, 2, 2), (30_000, 2, 3), (40_000, 1, 4), (40_000, 2, 5)]
        );
        assert_eq!(trace[1].payload_len(), 160);
    }

    #[test]
    fn validation() {
        let bad = FlowSpec::new(1, AccessCategory::Voice, TrafficModel::Cbr { period_us: 0, payload_bytes: 160 });
        assert!(bad.validate().is_err());
        let bad = FlowSpec::new(1, AccessCategory::Voice, TrafficModel::Poisson { rate_fps: 0.0, payload_bytes: 160 });
        assert!(bad.validate().is_err());
        let bad = FlowSpec { start_us: 10, stop_us: 10, ..FlowSpec::saturated(1, AccessCategory::Video, 100) };
        assert!(bad.validate().is_err());
        assert!(FlowSpec::saturated(1, AccessCategory::Video, 3000).validate().is_err());
    }
}
