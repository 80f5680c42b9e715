//! The bi-scheduler.
//!
//! The outer stage routes voice into Q1, where frames wait (bounded by the Q1
//! timer) to be sent together as an A-MSDU, or alone when only one is
//! present. Everything else goes through the staging buffer B1 into the inner
//! stage: video into Q2, best effort and background into Q3. Q2 is sent as an
//! A-MPDU once it holds `q2_target_mpdus` frames; if the shared Q2/Q3 timer
//! fires first, whatever Q2 holds is topped up from the head of Q3. When Q1
//! and Q2 are due together, Q1 goes first and its timer is reset before Q2 is
//! served.

use std::collections::VecDeque;

use crate::codec::amsdu_mpdu;
use crate::frame_model::{fits_in_amsdu, AccessCategory, AggregateLimits, Micros, Mpdu, Msdu};

use super::{
    push_front_all, AmpduBuilder, LogEntry, QueueSource, SchedEvent, SchedulerConfig,
    SchedulerError, SchedulerPolicy, SeqCounter, TimerEffect, TimerId, TxDescriptor, TxScheduler,
};

/// Queue an MSDU is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Q1,
    Q2,
    Q3,
}

pub fn classify(msdu: &Msdu) -> Route {
    route_for(msdu.ac)
}

fn route_for(ac: AccessCategory) -> Route {
    match ac {
        AccessCategory::Voice => Route::Q1,
        AccessCategory::Video => Route::Q2,
        AccessCategory::BestEffort | AccessCategory::Background => Route::Q3,
    }
}

#[derive(Debug)]
pub struct BiScheduler {
    config: SchedulerConfig,
    q1: VecDeque<Msdu>,
    /// Unacknowledged Q1 frames, already built; served ahead of `q1`.
    q1_retx: VecDeque<Mpdu>,
    b1: Vec<Msdu>,
    q2: VecDeque<Mpdu>,
    q3: VecDeque<Mpdu>,
    q1_deadline: Option<Micros>,
    q23_deadline: Option<Micros>,
    seq: SeqCounter,
    log: Option<Vec<LogEntry>>,
}

impl BiScheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        BiScheduler {
            config,
            q1: VecDeque::new(),
            q1_retx: VecDeque::new(),
            b1: Vec::new(),
            q2: VecDeque::new(),
            q3: VecDeque::new(),
            q1_deadline: None,
            q23_deadline: None,
            seq: SeqCounter::default(),
            log: None,
        }
    }

    /// Starts recording timer and emission events.
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> &[LogEntry] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn q1_len(&self) -> usize {
        self.q1.len()
    }

    pub fn q2_len(&self) -> usize {
        self.q2.len()
    }

    pub fn q3_len(&self) -> usize {
        self.q3.len()
    }

    pub fn q1_deadline(&self) -> Option<Micros> {
        self.q1_deadline
    }

    pub fn q23_deadline(&self) -> Option<Micros> {
        self.q23_deadline
    }

    fn record(&mut self, now: Micros, event: SchedEvent) {
        if let Some(log) = self.log.as_mut() {
            log.push(LogEntry { time: now, event });
        }
    }

    fn set_timer(&mut self, timer: TimerId, deadline: Option<Micros>, now: Micros) -> TimerEffect {
        match timer {
            TimerId::Q1 => self.q1_deadline = deadline,
            TimerId::Q23 => self.q23_deadline = deadline,
        }
        let effect = match deadline {
            Some(at) => TimerEffect::Armed(timer, at),
            None => TimerEffect::Cleared(timer),
        };
        self.record(now, SchedEvent::Timer(effect));
        effect
    }

    fn q23_empty(&self) -> bool {
        self.q2.is_empty() && self.q3.is_empty()
    }

    /// After a Q2/Q3 service: re-arm if anything is left, otherwise cancel.
    fn reset_q23_timer(&mut self, now: Micros) {
        let deadline = (!self.q23_empty()).then(|| now + self.config.q23_timer_us);
        self.set_timer(TimerId::Q23, deadline, now);
    }

    fn emit(&mut self, now: Micros, mut desc: TxDescriptor) -> TxDescriptor {
        self.seq.stamp(&mut desc.units);
        self.record(
            now,
            SchedEvent::Emitted { source: desc.source, kind: desc.kind, units: desc.units.len() },
        );
        desc
    }

    fn overflow(&self, queue: QueueSource, msdu: &Msdu) -> SchedulerError {
        SchedulerError::QueueOverflow {
            queue,
            capacity: self.config.queue_capacity,
            msdu_id: msdu.id,
        }
    }

    /// Sends Q1: the longest head prefix that fits the voice byte budget,
    /// as an A-MSDU when it holds two or more MSDUs.
    pub fn on_q1_expiry(&mut self, now: Micros) -> Option<TxDescriptor> {
        let head = self.q1.pop_front()?;
        let mut batch = vec![head];
        if self.config.q1_target_bytes > 0 {
            let budget = AggregateLimits {
                amsdu_max: self.config.q1_target_bytes.min(self.config.limits.amsdu_max),
                ..self.config.limits
            };
            let mut current = crate::frame_model::amsdu_total_len(&[batch[0].payload_len()])
                .expect("non-empty payload");
            while let Some(next) = self.q1.front() {
                if next.dest_addr != batch[0].dest_addr
                    || !fits_in_amsdu(current, next.payload_len(), &budget)
                {
                    break;
                }
                current += crate::frame_model::pad_to_4(current)
                    + crate::frame_model::AMSDU_SUBFRAME_HEADER_LEN
                    + next.payload_len();
                batch.push(self.q1.pop_front().expect("front checked"));
            }
        }
        let unit = if batch.len() >= 2 {
            amsdu_mpdu(&batch, &self.config.limits).expect("voice batch respects A-MSDU rules")
        } else {
            Mpdu::from_msdu(&batch[0])
        };
        let desc = self.emit(now, TxDescriptor::single(unit, QueueSource::Q1));
        let deadline = (!self.q1.is_empty()).then(|| now + self.config.q1_timer_us);
        self.set_timer(TimerId::Q1, deadline, now);
        Some(desc)
    }

    /// Sends the first `q2_target_mpdus` video MPDUs once Q2 has that many.
    pub fn on_q2_ready(&mut self, now: Micros) -> Option<TxDescriptor> {
        let target = self.config.q2_target_mpdus;
        if self.q2.len() < target {
            return None;
        }
        let mut builder = AmpduBuilder::new(target, &self.config.limits);
        builder.fill_from(&mut self.q2, target, |_| true);
        let desc = self.emit(now, TxDescriptor::ampdu(builder.into_units(), QueueSource::Q2));
        self.reset_q23_timer(now);
        Some(desc)
    }

    /// Shared-timer expiry: all of Q2 (up to the target) topped up with
    /// head-of-Q3 frames; Q3 alone when Q2 is empty.
    pub fn on_q23_expiry(&mut self, now: Micros) -> Option<TxDescriptor> {
        if self.q23_empty() {
            return None;
        }
        let target = self.config.q2_target_mpdus;
        let mut builder = AmpduBuilder::new(target, &self.config.limits);
        let video = builder.fill_from(&mut self.q2, target, |_| true);
        let backfill = builder.fill_from(&mut self.q3, target - builder.len(), |_| true);
        let source = match (video > 0, backfill > 0) {
            (true, true) => QueueSource::Q2Q3,
            (true, false) => QueueSource::Q2,
            _ => QueueSource::Q3,
        };
        let desc = self.emit(now, TxDescriptor::ampdu(builder.into_units(), source));
        self.reset_q23_timer(now);
        Some(desc)
    }

    /// Retransmissions waiting at the head of Q2/Q3 go out without waiting for
    /// the target size.
    fn retx_aggregate(&mut self, now: Micros) -> Option<TxDescriptor> {
        let is_retx = |m: &Mpdu| m.retries > 0;
        if !self.q2.front().is_some_and(is_retx) && !self.q3.front().is_some_and(is_retx) {
            return None;
        }
        let max = self.config.limits.ampdu_max_mpdus;
        let mut builder = AmpduBuilder::new(max, &self.config.limits);
        let from_q2 = builder.fill_from(&mut self.q2, max, is_retx);
        let from_q3 = builder.fill_from(&mut self.q3, max - builder.len(), is_retx);
        let source = match (from_q2 > 0, from_q3 > 0) {
            (true, true) => QueueSource::Q2Q3,
            (true, false) => QueueSource::Q2,
            _ => QueueSource::Q3,
        };
        let desc = self.emit(now, TxDescriptor::ampdu(builder.into_units(), source));
        if self.q23_empty() {
            self.set_timer(TimerId::Q23, None, now);
        }
        Some(desc)
    }

    fn q1_due(&self, now: Micros) -> bool {
        !self.q1.is_empty()
            && (self.config.q1_target_bytes == 0 || self.q1_deadline.is_some_and(|d| d <= now))
    }
}

impl TxScheduler for BiScheduler {
    fn policy(&self) -> SchedulerPolicy {
        SchedulerPolicy::Bi
    }

    fn enqueue(&mut self, msdu: Msdu, now: Micros) -> Result<Vec<TimerEffect>, SchedulerError> {
        let cap = self.config.queue_capacity;
        let mut effects = Vec::new();
        match classify(&msdu) {
            Route::Q1 => {
                if self.q1.len() + self.q1_retx.len() >= cap {
                    return Err(self.overflow(QueueSource::Q1, &msdu));
                }
                if self.q1.is_empty() {
                    effects.push(self.set_timer(TimerId::Q1, Some(now + self.config.q1_timer_us), now));
                }
                self.q1.push_back(msdu);
            }
            Route::Q2 | Route::Q3 => {
                // B1 has no residence time: stage, then sort straight into Q2/Q3.
                self.b1.push(msdu);
                for msdu in std::mem::take(&mut self.b1) {
                    let (queue, source) = match classify(&msdu) {
                        Route::Q2 => (&self.q2, QueueSource::Q2),
                        _ => (&self.q3, QueueSource::Q3),
                    };
                    if queue.len() >= cap {
                        return Err(self.overflow(source, &msdu));
                    }
                    if self.q23_empty() {
                        effects.push(self.set_timer(
                            TimerId::Q23,
                            Some(now + self.config.q23_timer_us),
                            now,
                        ));
                    }
                    let mpdu = Mpdu::from_msdu(&msdu);
                    match source {
                        QueueSource::Q2 => self.q2.push_back(mpdu),
                        _ => self.q3.push_back(mpdu),
                    }
                }
            }
        }
        Ok(effects)
    }

    fn requeue(&mut self, units: Vec<Mpdu>, now: Micros) {
        let (mut voice, mut video, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for u in units {
            match route_for(u.ac) {
                Route::Q1 => voice.push(u),
                Route::Q2 => video.push(u),
                Route::Q3 => rest.push(u),
            }
        }
        push_front_all(&mut self.q1_retx, voice);
        let was_empty = self.q23_empty();
        push_front_all(&mut self.q2, video);
        push_front_all(&mut self.q3, rest);
        if was_empty && !self.q23_empty() {
            self.set_timer(TimerId::Q23, Some(now + self.config.q23_timer_us), now);
        }
    }

    fn next_transmission(&mut self, now: Micros, channel_idle: bool) -> Option<TxDescriptor> {
        if !channel_idle {
            return None;
        }
        if let Some(unit) = self.q1_retx.pop_front() {
            return Some(self.emit(now, TxDescriptor::single(unit, QueueSource::Q1)));
        }
        if self.q1_due(now) {
            return self.on_q1_expiry(now);
        }
        if self.q2.len() >= self.config.q2_target_mpdus {
            return self.on_q2_ready(now);
        }
        if self.q23_deadline.is_some_and(|d| d <= now) && !self.q23_empty() {
            return self.on_q23_expiry(now);
        }
        self.retx_aggregate(now)
    }

    fn deadlines(&self) -> Vec<(TimerId, Micros)> {
        let mut out = Vec::new();
        if let Some(d) = self.q1_deadline {
            out.push((TimerId::Q1, d));
        }
        if let Some(d) = self.q23_deadline {
            out.push((TimerId::Q23, d));
        }
        out
    }

    fn queued_msdu_ids(&self) -> Vec<u64> {
        self.q1
            .iter()
            .map(|m| m.id)
            .chain(self.q1_retx.iter().flat_map(|u| u.contained_msdu_ids.iter().copied()))
            .chain(self.q2.iter().flat_map(|u| u.contained_msdu_ids.iter().copied()))
            .chain(self.q3.iter().flat_map(|u| u.contained_msdu_ids.iter().copied()))
            .collect()
    }
}
