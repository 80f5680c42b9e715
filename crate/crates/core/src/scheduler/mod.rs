//! Transmit schedulers: the access-category bi-scheduler and the comparison
//! baselines.
//!
//! Every scheduler owns its queues and the transmitter's sequence counter and
//! is polled by the engine whenever the channel goes idle or a timer fires.

mod baseline;
mod bi;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_model::{
    ampdu_total_len, pad_to_4, AggregateLimits, FrameError, FrameKind, MacAddr, Micros, Mpdu,
    Msdu, SeqNo, DELIMITER_LEN, MAC_HEADER_LEN, MSDU_MAX_PAYLOAD, FCS_LEN,
};

pub use baseline::{FifoScheduler, GreedyAmpduScheduler, GreedyAmsduScheduler};
pub use bi::{classify, BiScheduler, Route};

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchedulerPolicy {
    #[serde(rename = "bi")]
    Bi,
    #[serde(rename = "fifo")]
    FifoNoAgg,
    #[serde(rename = "ampdu-greedy")]
    GreedyAmpdu,
    /// Single-FIFO A-MSDU aggregation: one FCS per aggregate.
    #[serde(rename = "amsdu-greedy")]
    GreedyAmsdu,
}

impl SchedulerPolicy {
    /// The three policies compared side by side.
    pub const COMPARED: [SchedulerPolicy; 3] =
        [SchedulerPolicy::Bi, SchedulerPolicy::FifoNoAgg, SchedulerPolicy::GreedyAmpdu];

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerPolicy::Bi => "bi",
            SchedulerPolicy::FifoNoAgg => "fifo",
            SchedulerPolicy::GreedyAmpdu => "ampdu-greedy",
            SchedulerPolicy::GreedyAmsdu => "amsdu-greedy",
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchedulerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bi" => Ok(SchedulerPolicy::Bi),
            "fifo" => Ok(SchedulerPolicy::FifoNoAgg),
            "ampdu-greedy" => Ok(SchedulerPolicy::GreedyAmpdu),
            "amsdu-greedy" => Ok(SchedulerPolicy::GreedyAmsdu),
            other => Err(format!(
                "unknown scheduler `{other}` (expected bi, fifo, ampdu-greedy or amsdu-greedy)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub policy: SchedulerPolicy,
    pub q1_timer_us: Micros,
    pub q23_timer_us: Micros,
    /// Byte budget for a voice A-MSDU. Zero disables voice aggregation.
    pub q1_target_bytes: usize,
    pub q2_target_mpdus: usize,
    pub queue_capacity: usize,
    pub limits: AggregateLimits,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        let limits = AggregateLimits::default();
        SchedulerConfig {
            policy: SchedulerPolicy::Bi,
            q1_timer_us: 500,
            q23_timer_us: 2000,
            q1_target_bytes: limits.amsdu_max,
            q2_target_mpdus: 16,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            limits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("limits: {0}")]
    Limits(#[from] FrameError),
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, reason: String| Err(ConfigError::Invalid { field, reason });
        self.limits.validate()?;
        if self.q1_timer_us == 0 {
            return invalid("q1_timer_us", "must be > 0".into());
        }
        if self.q23_timer_us == 0 {
            return invalid("q23_timer_us", "must be > 0".into());
        }
        if self.q2_target_mpdus == 0 || self.q2_target_mpdus > self.limits.ampdu_max_mpdus {
            return invalid(
                "q2_target_mpdus",
                format!("must be in 1..={}, got {}", self.limits.ampdu_max_mpdus, self.q2_target_mpdus),
            );
        }
        if self.q1_target_bytes > self.limits.amsdu_max {
            return invalid(
                "q1_target_bytes",
                format!("must not exceed amsdu_max {}, got {}", self.limits.amsdu_max, self.q1_target_bytes),
            );
        }
        let largest_unit = DELIMITER_LEN + MAC_HEADER_LEN + MSDU_MAX_PAYLOAD + FCS_LEN;
        if self.limits.ampdu_max_bytes < largest_unit {
            return invalid(
                "ampdu_max_bytes",
                format!("must hold at least one full-size MPDU ({largest_unit} bytes)"),
            );
        }
        if self.queue_capacity == 0 {
            return invalid("queue_capacity", "must be > 0".into());
        }
        Ok(())
    }
}

/// Which queue(s) a transmission drew from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueueSource {
    Q1,
    Q2,
    Q3,
    Q2Q3,
    Fifo,
}

/// One scheduled transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxDescriptor {
    pub kind: FrameKind,
    /// MPDUs in transmission order. `PlainMsdu` and `Amsdu` carry exactly one.
    pub units: Vec<Mpdu>,
    pub source: QueueSource,
    /// On-air bytes excluding PHY preamble.
    pub total_bytes: usize,
}

impl TxDescriptor {
    /// A single MPDU sent on its own: plain MSDU or A-MSDU depending on its body.
    pub fn single(unit: Mpdu, source: QueueSource) -> Self {
        let kind = if unit.amsdu { FrameKind::Amsdu } else { FrameKind::PlainMsdu };
        TxDescriptor { kind, total_bytes: unit.total_len(), units: vec![unit], source }
    }

    pub fn ampdu(units: Vec<Mpdu>, source: QueueSource) -> Self {
        let lens: Vec<usize> = units.iter().map(Mpdu::total_len).collect();
        let total_bytes = ampdu_total_len(&lens).expect("scheduler built an invalid A-MPDU");
        TxDescriptor { kind: FrameKind::Ampdu, units, source, total_bytes }
    }

    pub fn msdu_count(&self) -> usize {
        self.units.iter().map(|u| u.contained_msdu_ids.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TimerId {
    Q1,
    Q23,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimerEffect {
    Armed(TimerId, Micros),
    Cleared(TimerId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedulerError {
    #[error("queue {queue:?} full ({capacity} frames), MSDU {msdu_id} dropped")]
    QueueOverflow { queue: QueueSource, capacity: usize, msdu_id: u64 },
}

/// Entries of the optional scheduler event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SchedEvent {
    Emitted { source: QueueSource, kind: FrameKind, units: usize },
    Timer(TimerEffect),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub time: Micros,
    pub event: SchedEvent,
}

/// Interface the engine drives.
pub trait TxScheduler: Send {
    fn policy(&self) -> SchedulerPolicy;

    /// Admits a new MSDU. On overflow the MSDU is tail-dropped.
    fn enqueue(&mut self, msdu: Msdu, now: Micros) -> Result<Vec<TimerEffect>, SchedulerError>;

    /// Puts unacknowledged MPDUs back at the head of their source queue, in
    /// the given order. Retry counters are maintained by the caller.
    fn requeue(&mut self, units: Vec<Mpdu>, now: Micros);

    fn next_transmission(&mut self, now: Micros, channel_idle: bool) -> Option<TxDescriptor>;

    /// Currently armed timers.
    fn deadlines(&self) -> Vec<(TimerId, Micros)>;

    /// IDs of every MSDU still held by the scheduler.
    fn queued_msdu_ids(&self) -> Vec<u64>;
}

pub fn build_scheduler(config: SchedulerConfig) -> Box<dyn TxScheduler> {
    match config.policy {
        SchedulerPolicy::Bi => Box::new(BiScheduler::new(config)),
        SchedulerPolicy::FifoNoAgg => Box::new(FifoScheduler::new(config)),
        SchedulerPolicy::GreedyAmpdu => Box::new(GreedyAmpduScheduler::new(config)),
        SchedulerPolicy::GreedyAmsdu => Box::new(GreedyAmsduScheduler::new(config)),
    }
}

/// Per-transmitter 12-bit counter. Numbers are handed out when a frame goes on
/// the air, so every aggregate carries a contiguous block.
#[derive(Debug, Clone, Default)]
pub(crate) struct SeqCounter {
    next: SeqNo,
}

impl SeqCounter {
    pub(crate) fn stamp(&mut self, units: &mut [Mpdu]) {
        for u in units {
            u.seq_no = self.next;
            self.next = self.next.next();
        }
    }
}

/// Accumulates MPDUs for an A-MPDU while respecting unit, byte and receiver
/// constraints.
pub(crate) struct AmpduBuilder {
    units: Vec<Mpdu>,
    bytes: usize,
    last_len: usize,
    max_units: usize,
    max_bytes: usize,
    receiver: Option<MacAddr>,
}

impl AmpduBuilder {
    pub(crate) fn new(max_units: usize, limits: &AggregateLimits) -> Self {
        AmpduBuilder {
            units: Vec::new(),
            bytes: 0,
            last_len: 0,
            max_units: max_units.min(limits.ampdu_max_mpdus),
            max_bytes: limits.ampdu_max_bytes,
            receiver: None,
        }
    }

    pub(crate) fn fits(&self, unit: &Mpdu) -> bool {
        if self.units.len() >= self.max_units {
            return false;
        }
        if self.receiver.is_some_and(|r| r != unit.receiver_addr) {
            return false;
        }
        let len = unit.total_len();
        let grown = if self.units.is_empty() {
            DELIMITER_LEN + len
        } else {
            self.bytes + pad_to_4(self.last_len) + DELIMITER_LEN + len
        };
        grown <= self.max_bytes
    }

    pub(crate) fn push(&mut self, unit: Mpdu) {
        let len = unit.total_len();
        self.bytes = if self.units.is_empty() {
            DELIMITER_LEN + len
        } else {
            self.bytes + pad_to_4(self.last_len) + DELIMITER_LEN + len
        };
        self.last_len = len;
        self.receiver = Some(unit.receiver_addr);
        self.units.push(unit);
    }

    /// Moves head-of-queue units in while they fit and `take_while` holds.
    /// Returns how many were taken.
    pub(crate) fn fill_from(
        &mut self,
        queue: &mut VecDeque<Mpdu>,
        limit: usize,
        take_while: impl Fn(&Mpdu) -> bool,
    ) -> usize {
        let mut taken = 0;
        while taken < limit {
            match queue.front() {
                Some(u) if take_while(u) && self.fits(u) => {
                    let u = queue.pop_front().expect("front checked");
                    self.push(u);
                    taken += 1;
                }
                _ => break,
            }
        }
        taken
    }

    pub(crate) fn len(&self) -> usize {
        self.units.len()
    }

    pub(crate) fn into_units(self) -> Vec<Mpdu> {
        self.units
    }
}

/// Puts `units` back at the head of `queue`, preserving their order.
pub(crate) fn push_front_all(queue: &mut VecDeque<Mpdu>, units: Vec<Mpdu>) {
    for u in units.into_iter().rev() {
        queue.push_front(u);
    }
}
