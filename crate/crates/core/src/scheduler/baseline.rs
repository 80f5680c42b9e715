//! Comparison baselines. All three keep every access category in one FIFO and
//! run no timers.

use std::collections::VecDeque;

use crate::codec::amsdu_mpdu;
use crate::frame_model::{fits_in_amsdu, pad_to_4, Micros, Mpdu, Msdu, AMSDU_SUBFRAME_HEADER_LEN};

use super::{
    push_front_all, AmpduBuilder, QueueSource, SchedulerConfig, SchedulerError, SchedulerPolicy,
    SeqCounter, TimerEffect, TimerId, TxDescriptor, TxScheduler,
};

fn overflow(config: &SchedulerConfig, msdu: &Msdu) -> SchedulerError {
    SchedulerError::QueueOverflow {
        queue: QueueSource::Fifo,
        capacity: config.queue_capacity,
        msdu_id: msdu.id,
    }
}

fn mpdu_ids(queue: &VecDeque<Mpdu>) -> impl Iterator<Item = u64> + '_ {
    queue.iter().flat_map(|u| u.contained_msdu_ids.iter().copied())
}

/// One plain MSDU per transmission, in arrival order.
#[derive(Debug)]
pub struct FifoScheduler {
    config: SchedulerConfig,
    queue: VecDeque<Mpdu>,
    seq: SeqCounter,
}

impl FifoScheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        FifoScheduler { config, queue: VecDeque::new(), seq: SeqCounter::default() }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

impl TxScheduler for FifoScheduler {
    fn policy(&self) -> SchedulerPolicy {
        SchedulerPolicy::FifoNoAgg
    }

    fn enqueue(&mut self, msdu: Msdu, _now: Micros) -> Result<Vec<TimerEffect>, SchedulerError> {
        if self.queue.len() >= self.config.queue_capacity {
            return Err(overflow(&self.config, &msdu));
        }
        self.queue.push_back(Mpdu::from_msdu(&msdu));
        Ok(Vec::new())
    }

    fn requeue(&mut self, units: Vec<Mpdu>, _now: Micros) {
        push_front_all(&mut self.queue, units);
    }

    fn next_transmission(&mut self, _now: Micros, channel_idle: bool) -> Option<TxDescriptor> {
        if !channel_idle {
            return None;
        }
        let mut unit = self.queue.pop_front()?;
        self.seq.stamp(std::slice::from_mut(&mut unit));
        Some(TxDescriptor::single(unit, QueueSource::Fifo))
    }

    fn deadlines(&self) -> Vec<(TimerId, Micros)> {
        Vec::new()
    }

    fn queued_msdu_ids(&self) -> Vec<u64> {
        mpdu_ids(&self.queue).collect()
    }
}

/// Sends an A-MPDU only once `q2_target_mpdus` frames are queued.
#[derive(Debug)]
pub struct GreedyAmpduScheduler {
    config: SchedulerConfig,
    queue: VecDeque<Mpdu>,
    seq: SeqCounter,
}

impl GreedyAmpduScheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        GreedyAmpduScheduler { config, queue: VecDeque::new(), seq: SeqCounter::default() }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

impl TxScheduler for GreedyAmpduScheduler {
    fn policy(&self) -> SchedulerPolicy {
        SchedulerPolicy::GreedyAmpdu
    }

    fn enqueue(&mut self, msdu: Msdu, _now: Micros) -> Result<Vec<TimerEffect>, SchedulerError> {
        if self.queue.len() >= self.config.queue_capacity {
            return Err(overflow(&self.config, &msdu));
        }
        self.queue.push_back(Mpdu::from_msdu(&msdu));
        Ok(Vec::new())
    }

    fn requeue(&mut self, units: Vec<Mpdu>, _now: Micros) {
        push_front_all(&mut self.queue, units);
    }

    fn next_transmission(&mut self, _now: Micros, channel_idle: bool) -> Option<TxDescriptor> {
        let target = self.config.q2_target_mpdus;
        if !channel_idle || self.queue.len() < target {
            return None;
        }
        let mut builder = AmpduBuilder::new(target, &self.config.limits);
        builder.fill_from(&mut self.queue, target, |_| true);
        let mut units = builder.into_units();
        self.seq.stamp(&mut units);
        Some(TxDescriptor::ampdu(units, QueueSource::Fifo))
    }

    fn deadlines(&self) -> Vec<(TimerId, Micros)> {
        Vec::new()
    }

    fn queued_msdu_ids(&self) -> Vec<u64> {
        mpdu_ids(&self.queue).collect()
    }
}

/// Builds full A-MSDUs (one FCS per aggregate) from a single FIFO. An
/// aggregate goes out once the head prefix can no longer grow: the next frame
/// would overflow `amsdu_max` or has a different category or destination.
/// Retransmissions go out first, unchanged.
#[derive(Debug)]
pub struct GreedyAmsduScheduler {
    config: SchedulerConfig,
    queue: VecDeque<Msdu>,
    retx: VecDeque<Mpdu>,
    seq: SeqCounter,
}

impl GreedyAmsduScheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        GreedyAmsduScheduler {
            config,
            queue: VecDeque::new(),
            retx: VecDeque::new(),
            seq: SeqCounter::default(),
        }
    }

    /// Length of the head prefix that forms one A-MSDU, and whether it is closed
    /// (cannot take the next queued frame).
    fn head_batch(&self) -> (usize, bool) {
        let Some(head) = self.queue.front() else {
            return (0, false);
        };
        let mut current = AMSDU_SUBFRAME_HEADER_LEN + head.payload_len();
        for (i, next) in self.queue.iter().enumerate().skip(1) {
            if next.ac.tid() != head.ac.tid()
                || next.dest_addr != head.dest_addr
                || !fits_in_amsdu(current, next.payload_len(), &self.config.limits)
            {
                return (i, true);
            }
            current += pad_to_4(current) + AMSDU_SUBFRAME_HEADER_LEN + next.payload_len();
        }
        (self.queue.len(), false)
    }
}

impl TxScheduler for GreedyAmsduScheduler {
    fn policy(&self) -> SchedulerPolicy {
        SchedulerPolicy::GreedyAmsdu
    }

    fn enqueue(&mut self, msdu: Msdu, _now: Micros) -> Result<Vec<TimerEffect>, SchedulerError> {
        if self.queue.len() + self.retx.len() >= self.config.queue_capacity {
            return Err(overflow(&self.config, &msdu));
        }
        self.queue.push_back(msdu);
        Ok(Vec::new())
    }

    fn requeue(&mut self, units: Vec<Mpdu>, _now: Micros) {
        push_front_all(&mut self.retx, units);
    }

    fn next_transmission(&mut self, _now: Micros, channel_idle: bool) -> Option<TxDescriptor> {
        if !channel_idle {
            return None;
        }
        let mut unit = match self.retx.pop_front() {
            Some(unit) => unit,
            None => {
                let (n, closed) = self.head_batch();
                if !closed {
                    return None;
                }
                let batch: Vec<Msdu> = self.queue.drain(..n).collect();
                if batch.len() == 1 {
                    Mpdu::from_msdu(&batch[0])
                } else {
                    amsdu_mpdu(&batch, &self.config.limits).expect("batch respects A-MSDU rules")
                }
            }
        };
        self.seq.stamp(std::slice::from_mut(&mut unit));
        Some(TxDescriptor::single(unit, QueueSource::Fifo))
    }

    fn deadlines(&self) -> Vec<(TimerId, Micros)> {
        Vec::new()
    }

    fn queued_msdu_ids(&self) -> Vec<u64> {
        self.queue.iter().map(|m| m.id).chain(mpdu_ids(&self.retx)).collect()
    }
}
