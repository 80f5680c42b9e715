//! Airtime accounting and the bit-error channel model.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block_ack::BA_FRAME_BYTES;
use crate::frame_model::{FrameKind, Micros, DELIMITER_LEN};
use crate::scheduler::TxDescriptor;

/// Highest data rate accepted in a profile, Mb/s.
pub const MAX_DATA_RATE_MBPS: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// PHY timing and error parameters. Rates are in Mb/s (bits per µs).
///
/// Defaults: 248 Mb/s data rate (the 802.11n maximum bit rate commonly quoted
/// next to a ~74 Mb/s measured throughput), 24 Mb/s basic rate for control
/// frames, 40 µs preamble, SIFS 16 µs, DIFS 34 µs, error-free channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyProfile {
    pub data_rate_mbps: f64,
    pub basic_rate_mbps: f64,
    pub preamble_us: Micros,
    pub sifs_us: Micros,
    pub difs_us: Micros,
    pub ber: f64,
}

impl Default for PhyProfile {
    fn default() -> Self {
        PhyProfile {
            data_rate_mbps: 248.0,
            basic_rate_mbps: 24.0,
            preamble_us: 40,
            sifs_us: 16,
            difs_us: 34,
            ber: 0.0,
        }
    }
}

impl PhyProfile {
    pub fn validate(&self) -> Result<(), PhyError> {
        let rate_ok = |r: f64| r.is_finite() && r > 0.0 && r <= MAX_DATA_RATE_MBPS;
        if !rate_ok(self.data_rate_mbps) {
            return Err(PhyError::Invalid {
                field: "data_rate_mbps",
                reason: format!("must be in (0, {MAX_DATA_RATE_MBPS}], got {}", self.data_rate_mbps),
            });
        }
        if !rate_ok(self.basic_rate_mbps) {
            return Err(PhyError::Invalid {
                field: "basic_rate_mbps",
                reason: format!("must be in (0, {MAX_DATA_RATE_MBPS}], got {}", self.basic_rate_mbps),
            });
        }
        if !(0.0..=1.0).contains(&self.ber) {
            return Err(PhyError::Invalid {
                field: "ber",
                reason: format!("out of range [0, 1]: {}", self.ber),
            });
        }
        Ok(())
    }

    /// Airtime of a data-rate transmission of `bytes`.
    pub fn data_duration(&self, bytes: usize) -> Micros {
        tx_duration(bytes, self.data_rate_mbps, self.preamble_us)
    }

    /// Airtime of a block ack at the basic rate.
    pub fn ba_duration(&self) -> Micros {
        tx_duration(BA_FRAME_BYTES, self.basic_rate_mbps, self.preamble_us)
    }

    /// DIFS + aggregate + SIFS + BA.
    pub fn exchange_duration(&self, bytes: usize) -> Micros {
        self.difs_us + self.data_duration(bytes) + self.sifs_us + self.ba_duration()
    }
}

/// `preamble + ceil(8 * bytes / rate)`. The rate is quantised to kb/s so the
/// division is exact integer arithmetic.
pub fn tx_duration(bytes: usize, rate_mbps: f64, preamble_us: Micros) -> Micros {
    let rate_kbps = (rate_mbps * 1000.0).round().max(1.0) as u128;
    let bit_ms = 8 * bytes as u128 * 1000;
    preamble_us + bit_ms.div_ceil(rate_kbps) as Micros
}

/// Probability that at least one of `8 * len_bytes` bits is flipped.
pub fn unit_error_prob(len_bytes: usize, ber: f64) -> f64 {
    if len_bytes == 0 || ber <= 0.0 {
        return 0.0;
    }
    if ber >= 1.0 {
        return 1.0;
    }
    -((8 * len_bytes) as f64 * (-ber).ln_1p()).exp_m1()
}

/// Draws per-unit corruption flags for a transmission. An A-MPDU gets one
/// independent draw per MPDU (delimiter included); a plain MSDU or A-MSDU is a
/// single MPDU with a single FCS, so it gets one draw for the whole frame.
pub fn apply_errors<R: Rng + ?Sized>(desc: &TxDescriptor, profile: &PhyProfile, rng: &mut R) -> Vec<bool> {
    let draw = |rng: &mut R, len: usize| {
        let p = unit_error_prob(len, profile.ber);
        p > 0.0 && rng.random::<f64>() < p
    };
    match desc.kind {
        FrameKind::Ampdu => desc
            .units
            .iter()
            .map(|m| draw(rng, DELIMITER_LEN + m.total_len()))
            .collect(),
        FrameKind::PlainMsdu | FrameKind::Amsdu => {
            let len = desc.units.iter().map(|m| m.total_len()).sum();
            vec![draw(rng, len)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::amsdu_mpdu;
    use crate::frame_model::{AccessCategory, MacAddr, Mpdu, Msdu};

    #[test]
    fn duration_examples() {
        assert_eq!(tx_duration(1000, 100.0, 0), 80);
        assert_eq!(tx_duration(3100, 248.0, 40), 140);
        assert_eq!(tx_duration(0, 248.0, 40), 40);
        // 12240 bits / 248 = 49.35 -> 50
        assert_eq!(tx_duration(1530, 248.0, 40), 90);
    }

    #[test]
    fn default_ba_airtime() {
        // 256 bits at 24 Mb/s = 10.67 -> 11, plus preamble.
        assert_eq!(PhyProfile::default().ba_duration(), 51);
    }

    #[test]
    fn duration_monotone() {
        let mut prev = 0;
        for bytes in (0..5000).step_by(37) {
            let d = tx_duration(bytes, 248.0, 40);
            assert!(d >= prev);
            assert!(tx_duration(bytes, 300.0, 40) <= d);
            prev = d;
        }
    }

    #[test]
    fn error_prob_examples() {
        assert_eq!(unit_error_prob(1500, 0.0), 0.0);
        assert_eq!(unit_error_prob(1, 1.0), 1.0);
        assert_eq!(unit_error_prob(0, 0.5), 0.0);
        // 1 - (1 - 1e-5)^12000 evaluated as 1 - exp(12000 * ln(1 - 1e-5)),
        // ln(1 - x) = -x - x^2/2 - ... = -1.00000500003e-5
        let exact = 1.0 - (-0.120_000_600_004f64).exp();
        let p = unit_error_prob(1500, 1e-5);
        assert!((p - 0.1131).abs() < 1e-4, "{p}");
        assert!((p - exact).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(PhyProfile::default().validate().is_ok());
        let bad = PhyProfile { ber: 1.5, ..Default::default() };
        assert!(matches!(bad.validate(), Err(PhyError::Invalid { field: "ber", .. })));
        let bad = PhyProfile { data_rate_mbps: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let fast = PhyProfile { data_rate_mbps: 600.0, ..Default::default() };
        assert!(fast.validate().is_ok());
    }

    fn units(n: usize, payload: usize) -> Vec<Mpdu> {
        (0..n as u64)
            .map(|id| {
                let m = Msdu::zeroed(id, AccessCategory::Video, MacAddr::local(2), MacAddr::local(1), payload, 0, 0);
                Mpdu::from_msdu(&m.unwrap())
            })
            .collect()
    }

    fn mask(flags: &[bool]) -> u64 {
        flags.iter().enumerate().fold(0, |acc, (i, &f)| acc | (f as u64) << i)
    }

    // Recorded once: seed 2024, channel stream.
    const AMPDU_64_FLAGS: u64 = 0x4010200080000040;

    #[test]
    fn corruption_flags() {
        use crate::rng::{substream, CHANNEL_STREAM};
        use crate::scheduler::{QueueSource, TxDescriptor};

        let clean = PhyProfile::default();
        let lossy = PhyProfile { ber: 1e-5, ..Default::default() };
        let mut rng = substream(2024, CHANNEL_STREAM);
        let ampdu = TxDescriptor::ampdu(units(64, 1500), QueueSource::Q2);
        assert!(apply_errors(&ampdu, &clean, &mut rng).iter().all(|&f| !f));

        let mut rng = substream(2024, CHANNEL_STREAM);
        let flags = apply_errors(&ampdu, &lossy, &mut rng);
        assert_eq!(flags.len(), 64);
        assert_eq!(mask(&flags), AMPDU_64_FLAGS);

        let dead = PhyProfile { ber: 1.0, ..Default::default() };
        let voice: Vec<Msdu> = (0..3)
            .map(|id| Msdu::zeroed(id, AccessCategory::Voice, MacAddr::local(2), MacAddr::local(1), 100, 0, 0).unwrap())
            .collect();
        let amsdu = TxDescriptor::single(amsdu_mpdu(&voice, &Default::default()).unwrap(), QueueSource::Q1);
        assert_eq!(apply_errors(&amsdu, &dead, &mut rng), vec![true]);
    }
}
