//! Discrete-event loop for one sender/receiver link.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::block_ack::{make_block_ack, BlockAck, BlockAckError, BA_FRAME_BYTES};
use crate::frame_model::{AccessCategory, Micros, Msdu, SeqNo};
use crate::metrics::{mbps, AcAccumulator, MetricsReport, LATENCY_DEFINITION};
use crate::phy::apply_errors;
use crate::rng::{substream, SimRng, CHANNEL_STREAM, RNG_ALGORITHM};
use crate::scenario::{Scenario, ScenarioError};
use crate::scheduler::{build_scheduler, SchedulerPolicy, TimerId, TxDescriptor, TxScheduler};
use crate::traffic::build_trace;

/// Transmission attempts after the first before an MPDU is dropped.
pub const RETRY_LIMIT: u8 = 7;
/// Time after the end of the run during which queued and in-flight frames may
/// still complete.
pub const DRAIN_GRACE_US: Micros = 10_000;
/// Frames kept outstanding per saturated flow.
pub const SATURATED_BACKLOG: usize = 128;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ScenarioError),
    #[error("conservation violated for {ac}: generated {generated} != delivered {delivered} + dropped {dropped} + residual {residual}")]
    Conservation { ac: AccessCategory, generated: u64, delivered: u64, dropped: u64, residual: u64 },
    #[error("exchange airtime {measured} µs, expected {expected} µs")]
    Airtime { measured: Micros, expected: Micros },
    #[error("MSDU {0} delivered twice")]
    DuplicateDelivery(u64),
    #[error("block ack: {0}")]
    BlockAck(#[from] BlockAckError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    TxComplete,
    BaReceived,
    Q1Expiry,
    Q23Expiry,
    /// Index into the arrival trace.
    Arrival(usize),
    /// A saturated flow starts.
    FlowWake,
    SimEnd,
    DrainEnd,
}

impl EventKind {
    /// Lower is served first at equal times.
    pub fn priority(self) -> u8 {
        match self {
            EventKind::TxComplete => 0,
            EventKind::BaReceived => 1,
            EventKind::Q1Expiry | EventKind::Q23Expiry => 2,
            EventKind::Arrival(_) | EventKind::FlowWake => 3,
            EventKind::SimEnd => 4,
            EventKind::DrainEnd => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: Micros,
    pub tie_seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (Micros, u8, u64) {
        (self.time, self.kind.priority(), self.tie_seq)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue of events ordered by `(time, priority, insertion order)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: Micros, kind: EventKind) {
        let tie_seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, tie_seq, kind }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct MsduMeta {
    ac: AccessCategory,
    flow: usize,
    created_at: Micros,
    payload: usize,
}

struct InFlight {
    desc: TxDescriptor,
    corrupted: Vec<bool>,
    started: Micros,
    ba: Option<BlockAck>,
}

struct Engine<'a> {
    scenario: &'a Scenario,
    trace: &'a [Msdu],
    scheduler: Box<dyn TxScheduler>,
    channel: SimRng,
    events: EventQueue,
    now: Micros,
    accepting: bool,
    in_flight: Option<InFlight>,
    armed: [Option<Micros>; 2],
    meta: Vec<MsduMeta>,
    delivered: Vec<bool>,
    outstanding: Vec<usize>,
    last_latency: Vec<Option<u64>>,
    acc: [AcAccumulator; 4],
    busy_us: Micros,
    air_bytes: u64,
    transmissions: u64,
    histogram: BTreeMap<usize, u64>,
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario, seed: u64, policy: SchedulerPolicy, trace: &'a [Msdu]) -> Self {
        let meta: Vec<MsduMeta> = trace
            .iter()
            .map(|m| MsduMeta {
                ac: m.ac,
                flow: scenario
                    .flows
                    .iter()
                    .position(|f| f.flow_id == m.flow_id)
                    .expect("trace belongs to the scenario"),
                created_at: m.created_at,
                payload: m.payload_len(),
            })
            .collect();
        let flows = scenario.flows.len();
        Engine {
            scenario,
            trace,
            scheduler: build_scheduler(crate::scheduler::SchedulerConfig { policy, ..scenario.scheduler }),
            channel: substream(seed, CHANNEL_STREAM),
            events: EventQueue::default(),
            now: 0,
            accepting: true,
            in_flight: None,
            armed: [None; 2],
            delivered: vec![false; meta.len()],
            meta,
            outstanding: vec![0; flows],
            last_latency: vec![None; flows],
            acc: Default::default(),
            busy_us: 0,
            air_bytes: 0,
            transmissions: 0,
            histogram: BTreeMap::new(),
        }
    }

    fn run(mut self, seed: u64) -> Result<MetricsReport, SimError> {
        let duration = self.scenario.duration_us;
        if !self.trace.is_empty() {
            self.events.push(self.trace[0].created_at, EventKind::Arrival(0));
        }
        for flow in self.scenario.flows.iter().filter(|f| f.saturated && f.start_us < duration) {
            self.events.push(flow.start_us, EventKind::FlowWake);
        }
        self.events.push(duration, EventKind::SimEnd);
        self.events.push(duration + DRAIN_GRACE_US, EventKind::DrainEnd);

        while let Some(event) = self.events.pop() {
            debug_assert!(event.time >= self.now, "event time went backwards");
            self.now = event.time;
            match event.kind {
                EventKind::Arrival(i) => {
                    if self.accepting {
                        self.admit(self.trace[i].clone());
                        if let Some(next) = self.trace.get(i + 1) {
                            self.events.push(next.created_at, EventKind::Arrival(i + 1));
                        }
                    }
                    self.poll();
                }
                EventKind::FlowWake => self.poll(),
                EventKind::Q1Expiry | EventKind::Q23Expiry => {
                    let slot = if event.kind == EventKind::Q1Expiry { 0 } else { 1 };
                    if self.armed[slot] == Some(self.now) {
                        self.armed[slot] = None;
                    }
                    // While the channel is busy the expiry stays pending and
                    // is served by the poll that follows the block ack.
                    self.poll();
                }
                EventKind::TxComplete => self.tx_complete()?,
                EventKind::BaReceived => {
                    self.ba_received()?;
                    self.poll();
                }
                EventKind::SimEnd => self.accepting = false,
                EventKind::DrainEnd => break,
            }
        }
        self.finish(seed)
    }

    fn admit(&mut self, msdu: Msdu) {
        let meta = self.meta[msdu.id as usize];
        let acc = &mut self.acc[meta.ac.index()];
        acc.generated += 1;
        self.outstanding[meta.flow] += 1;
        if self.scheduler.enqueue(msdu, self.now).is_err() {
            self.acc[meta.ac.index()].dropped_overflow += 1;
            self.outstanding[meta.flow] -= 1;
        }
    }

    fn top_up_saturated(&mut self) {
        for (i, flow) in self.scenario.flows.iter().enumerate() {
            if !flow.saturated || self.now < flow.start_us || self.now >= flow.stop_us {
                continue;
            }
            while self.outstanding[i] < SATURATED_BACKLOG {
                let id = self.meta.len() as u64;
                let msdu = flow.make_msdu(id, self.now).expect("validated flow payload");
                self.meta.push(MsduMeta { ac: flow.ac, flow: i, created_at: self.now, payload: msdu.payload_len() });
                self.delivered.push(false);
                let before = self.acc[flow.ac.index()].dropped_overflow;
                self.admit(msdu);
                if self.acc[flow.ac.index()].dropped_overflow != before {
                    break;
                }
            }
        }
    }

    fn poll(&mut self) {
        if self.in_flight.is_none() {
            if self.accepting {
                self.top_up_saturated();
            }
            if let Some(desc) = self.scheduler.next_transmission(self.now, true) {
                self.start(desc);
            }
        }
        self.sync_timers();
    }

    fn sync_timers(&mut self) {
        for (timer, at) in self.scheduler.deadlines() {
            let (slot, kind) = match timer {
                TimerId::Q1 => (0, EventKind::Q1Expiry),
                TimerId::Q23 => (1, EventKind::Q23Expiry),
            };
            let at = at.max(self.now);
            if self.armed[slot] != Some(at) && at > self.now {
                self.armed[slot] = Some(at);
                self.events.push(at, kind);
            }
        }
    }

    fn start(&mut self, desc: TxDescriptor) {
        let phy = &self.scenario.phy;
        let corrupted = apply_errors(&desc, phy, &mut self.channel);
        let data_end = self.now + phy.difs_us + phy.data_duration(desc.total_bytes);
        self.transmissions += 1;
        self.air_bytes += (desc.total_bytes + BA_FRAME_BYTES) as u64;
        *self.histogram.entry(desc.msdu_count()).or_default() += 1;
        let end = self.now + phy.exchange_duration(desc.total_bytes);
        let horizon = self.scenario.duration_us;
        self.busy_us += end.min(horizon) - self.now.min(horizon);
        self.events.push(data_end, EventKind::TxComplete);
        self.in_flight = Some(InFlight { desc, corrupted, started: self.now, ba: None });
    }

    fn tx_complete(&mut self) -> Result<(), SimError> {
        let flight = self.in_flight.as_mut().expect("TxComplete without a transmission");
        let start = flight.desc.units[0].seq_no;
        let received: Vec<SeqNo> = flight
            .desc
            .units
            .iter()
            .zip(&flight.corrupted)
            .filter(|(_, &bad)| !bad)
            .map(|(u, _)| u.seq_no)
            .collect();
        flight.ba = Some(make_block_ack(received, start)?);
        let phy = &self.scenario.phy;
        self.events.push(self.now + phy.sifs_us + phy.ba_duration(), EventKind::BaReceived);
        Ok(())
    }

    fn ba_received(&mut self) -> Result<(), SimError> {
        let flight = self.in_flight.take().expect("BaReceived without a transmission");
        let phy = &self.scenario.phy;
        let expected = phy.exchange_duration(flight.desc.total_bytes);
        let measured = self.now - flight.started;
        if measured != expected {
            return Err(SimError::Airtime { measured, expected });
        }
        let ba = flight.ba.expect("block ack built at TxComplete");
        let mut retry = Vec::new();
        for unit in flight.desc.units {
            if ba.is_received(unit.seq_no)? {
                for &id in &unit.contained_msdu_ids {
                    self.deliver(id)?;
                }
            } else if unit.retries >= RETRY_LIMIT {
                for &id in &unit.contained_msdu_ids {
                    let meta = self.meta[id as usize];
                    self.acc[meta.ac.index()].dropped_retry += 1;
                    self.outstanding[meta.flow] -= 1;
                }
            } else {
                let mut unit = unit;
                unit.retries += 1;
                self.acc[unit.ac.index()].retx += 1;
                retry.push(unit);
            }
        }
        if !retry.is_empty() {
            self.scheduler.requeue(retry, self.now);
        }
        Ok(())
    }

    fn deliver(&mut self, id: u64) -> Result<(), SimError> {
        let slot = &mut self.delivered[id as usize];
        if *slot {
            return Err(SimError::DuplicateDelivery(id));
        }
        *slot = true;
        let meta = self.meta[id as usize];
        let latency = self.now - meta.created_at;
        let acc = &mut self.acc[meta.ac.index()];
        acc.delivered += 1;
        acc.delivered_bytes += meta.payload as u64;
        if self.now <= self.scenario.duration_us {
            acc.goodput_bytes += meta.payload as u64;
        }
        acc.latencies.push(latency);
        if let Some(prev) = self.last_latency[meta.flow].replace(latency) {
            acc.jitter_sum += prev.abs_diff(latency);
            acc.jitter_count += 1;
        }
        self.outstanding[meta.flow] -= 1;
        Ok(())
    }

    fn finish(mut self, seed: u64) -> Result<MetricsReport, SimError> {
        let mut residual_ids = self.scheduler.queued_msdu_ids();
        if let Some(flight) = &self.in_flight {
            residual_ids.extend(flight.desc.units.iter().flat_map(|u| u.contained_msdu_ids.iter().copied()));
        }
        for id in residual_ids {
            self.acc[self.meta[id as usize].ac.index()].residual += 1;
        }
        let duration = self.scenario.duration_us;
        let mut per_ac = Vec::with_capacity(4);
        let mut goodput_bytes = 0;
        let mut delivered_bytes = 0;
        let acc = std::mem::take(&mut self.acc);
        // `AccessCategory::index` follows `ALL`.
        for (ac, a) in AccessCategory::ALL.into_iter().zip(acc) {
            goodput_bytes += a.goodput_bytes;
            delivered_bytes += a.delivered_bytes;
            let dropped = a.dropped_retry + a.dropped_overflow;
            if a.generated != a.delivered + dropped + a.residual {
                return Err(SimError::Conservation {
                    ac,
                    generated: a.generated,
                    delivered: a.delivered,
                    dropped,
                    residual: a.residual,
                });
            }
            per_ac.push(a.finish(ac, duration));
        }
        Ok(MetricsReport {
            scenario: self.scenario.name.clone(),
            policy: self.scheduler.policy(),
            seed,
            duration_us: duration,
            rng: RNG_ALGORITHM.to_string(),
            latency_definition: LATENCY_DEFINITION.to_string(),
            per_ac,
            goodput_mbps: mbps(goodput_bytes, duration),
            airtime_busy: if duration == 0 { 0.0 } else { self.busy_us as f64 / duration as f64 },
            aggregation_efficiency: if self.air_bytes == 0 {
                0.0
            } else {
                delivered_bytes as f64 / self.air_bytes as f64
            },
            transmissions: self.transmissions,
            aggregate_histogram: self.histogram,
        })
    }
}

/// Arrival trace for a scenario under `seed`, shared by every policy.
pub fn scenario_trace(scenario: &Scenario, seed: u64) -> Vec<Msdu> {
    build_trace(&scenario.flows, seed, scenario.duration_us)
}

/// Runs the scenario with its own seed and policy.
pub fn run(scenario: &Scenario) -> Result<MetricsReport, SimError> {
    run_seeded(scenario, scenario.seed, scenario.scheduler.policy)
}

pub fn run_seeded(scenario: &Scenario, seed: u64, policy: SchedulerPolicy) -> Result<MetricsReport, SimError> {
    scenario.validate_components()?;
    let trace = scenario_trace(scenario, seed);
    run_with_trace(scenario, seed, policy, &trace)
}

/// Replays a pre-generated arrival trace (see [`scenario_trace`]).
pub fn run_with_trace(
    scenario: &Scenario,
    seed: u64,
    policy: SchedulerPolicy,
    trace: &[Msdu],
) -> Result<MetricsReport, SimError> {
    scenario.validate_components()?;
    Engine::new(scenario, seed, policy, trace).run(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{FlowSpec, TrafficModel};

    #[test]
    fn event_order() {
        let mut q = EventQueue::default();
        q.push(10, EventKind::SimEnd);
        q.push(10, EventKind::Arrival(0));
        q.push(10, EventKind::Q23Expiry);
        q.push(10, EventKind::Q1Expiry);
        q.push(10, EventKind::BaReceived);
        q.push(10, EventKind::TxComplete);
        q.push(5, EventKind::DrainEnd);
        let kinds: Vec<EventKind> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::DrainEnd,
                EventKind::TxComplete,
                EventKind::BaReceived,
                EventKind::Q23Expiry,
                EventKind::Q1Expiry,
                EventKind::Arrival(0),
                EventKind::SimEnd,
            ]
        );
    }

    #[test]
    fn empty_scenario_reports_zeros() {
        let s = Scenario::default();
        let r = run(&s).unwrap();
        assert_eq!(r.transmissions, 0);
        assert_eq!(r.goodput_mbps, 0.0);
        assert!(r.per_ac.iter().all(|a| a.generated == 0 && a.delivered_msdus == 0));
    }

    #[test]
    fn single_voice_flow_is_lossless() {
        let s = Scenario {
            duration_us: 200_000,
            flows: vec![FlowSpec::new(
                1,
                AccessCategory::Voice,
                TrafficModel::Cbr { period_us: 20_000, payload_bytes: 160 },
            )],
            ..Scenario::default()
        };
        let r = run(&s).unwrap();
        let v = r.ac(AccessCategory::Voice);
        assert_eq!(v.generated, 9);
        assert_eq!(v.delivered_msdus, 9);
        // Timer, then DIFS + 40 + ceil(8*190/248) + SIFS + 40 + ceil(256/24).
        assert_eq!(v.latency_max_us, 500 + 34 + 47 + 16 + 51);
        assert_eq!(v.jitter_us, 0.0);
    }

    #[test]
    fn repeat_runs_identical() {
        let s = Scenario { duration_us: 300_000, phy: crate::phy::PhyProfile { ber: 1e-5, ..Default::default() }, ..Scenario::unsaturated_mixed() };
        let a = serde_json::to_string(&run(&s).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&s).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    fn engine_with_inflight(scenario: &Scenario, trace: &[Msdu], lost: &[usize], retries: u8) -> Vec<u64> {
        let mut engine = Engine::new(scenario, 0, SchedulerPolicy::FifoNoAgg, trace);
        for m in trace {
            engine.admit(m.clone());
        }
        let mut units = Vec::new();
        while let Some(d) = engine.scheduler.next_transmission(0, true) {
            let mut u = d.units.into_iter().next().unwrap();
            u.retries = retries;
            units.push(u);
        }
        let start = units[0].seq_no;
        let received: Vec<SeqNo> =
            units.iter().enumerate().filter(|(i, _)| !lost.contains(i)).map(|(_, u)| u.seq_no).collect();
        let desc = TxDescriptor::ampdu(units, crate::scheduler::QueueSource::Fifo);
        let exchange = scenario.phy.exchange_duration(desc.total_bytes);
        engine.in_flight = Some(InFlight {
            corrupted: vec![false; desc.units.len()],
            ba: Some(make_block_ack(received, start).unwrap()),
            started: 0,
            desc,
        });
        engine.now = exchange;
        engine.ba_received().unwrap();
        let dropped: u64 = engine.acc.iter().map(|a| a.dropped_retry).sum();
        let delivered: u64 = engine.acc.iter().map(|a| a.delivered).sum();
        assert_eq!(delivered as usize, trace.len() - lost.len());
        let mut queued = engine.scheduler.queued_msdu_ids();
        queued.push(dropped);
        queued
    }

    #[test]
    fn block_ack_requeues_only_missing() {
        let flow = FlowSpec::new(1, AccessCategory::Video, TrafficModel::Cbr { period_us: 10, payload_bytes: 500 });
        let scenario = Scenario { flows: vec![flow], ..Scenario::default() };
        let trace: Vec<Msdu> = (0..8).map(|i| flow.make_msdu(i, 0).unwrap()).collect();
        // Missing units go back in order; nothing else is touched.
        assert_eq!(engine_with_inflight(&scenario, &trace, &[2, 5], 0), vec![2, 5, 0]);
        assert_eq!(engine_with_inflight(&scenario, &trace, &[], 0), vec![0]);
        // At the retry limit they are dropped instead.
        assert_eq!(engine_with_inflight(&scenario, &trace, &[2, 5], RETRY_LIMIT), vec![2]);
    }
}
