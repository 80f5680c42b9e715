//! Frame and aggregate domain types plus the size/padding arithmetic shared by
//! the codec, the schedulers and the airtime model.

use std::fmt;

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation time in microseconds.
pub type Micros = u64;

/// A-MSDU subframe header: DA (6) + SA (6) + Length (2).
pub const AMSDU_SUBFRAME_HEADER_LEN: usize = 14;
/// QoS data MAC header length.
pub const MAC_HEADER_LEN: usize = 26;
pub const FCS_LEN: usize = 4;
pub const DELIMITER_LEN: usize = 4;
pub const DELIMITER_SIGNATURE: u8 = 0x4E;
/// Largest MPDU expressible in the 12-bit delimiter length field.
pub const DELIMITER_MAX_MPDU_LEN: usize = 0x0FFF;

pub const MSDU_MAX_PAYLOAD: usize = 2304;
pub const AMSDU_MAX_SHORT: usize = 3839;
pub const AMSDU_MAX_LONG: usize = 7935;
pub const AMPDU_MAX_BYTES: usize = 65_535;
/// Upper bound accepted for a configured A-MPDU byte cap (20-bit length).
pub const AMPDU_MAX_BYTES_CEILING: usize = 1_048_575;
pub const AMPDU_MAX_MPDUS: usize = 64;

const SEQ_MODULUS: u16 = 4096;

static ZERO_SLAB: [u8; 8192] = [0; 8192];

/// Zero-filled payload of `len` bytes backed by a static slab (no allocation).
pub(crate) fn zero_payload(len: usize) -> Bytes {
    Bytes::from_static(&ZERO_SLAB[..len])
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("invalid MSDU payload length {0} (must be 1..=2304)")]
    InvalidPayload(usize),
    #[error("aggregate has no members")]
    EmptyAggregate,
    #[error("MPDU length {0} does not fit the 12-bit delimiter length field")]
    DelimiterOverflow(usize),
    #[error("invalid aggregate limits: {0}")]
    InvalidLimits(String),
}

/// QoS access category. Ordering follows priority: `Voice` is the greatest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessCategory {
    Background,
    BestEffort,
    Video,
    Voice,
}

impl AccessCategory {
    /// All categories, highest priority first.
    pub const ALL: [AccessCategory; 4] = [
        AccessCategory::Voice,
        AccessCategory::Video,
        AccessCategory::BestEffort,
        AccessCategory::Background,
    ];

    /// Traffic identifier (user priority) carried in the QoS control field.
    pub fn tid(self) -> u8 {
        match self {
            AccessCategory::Background => 1,
            AccessCategory::BestEffort => 0,
            AccessCategory::Video => 5,
            AccessCategory::Voice => 6,
        }
    }

    pub fn from_tid(tid: u8) -> Option<Self> {
        match tid {
            1 | 2 => Some(AccessCategory::Background),
            0 | 3 => Some(AccessCategory::BestEffort),
            4 | 5 => Some(AccessCategory::Video),
            6 | 7 => Some(AccessCategory::Voice),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccessCategory::Background => "background",
            AccessCategory::BestEffort => "best_effort",
            AccessCategory::Video => "video",
            AccessCategory::Voice => "voice",
        }
    }

    pub fn index(self) -> usize {
        match self {
            AccessCategory::Voice => 0,
            AccessCategory::Video => 1,
            AccessCategory::BestEffort => 2,
            AccessCategory::Background => 3,
        }
    }
}

impl fmt::Display for AccessCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AccessCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "voice" | "vo" => Ok(AccessCategory::Voice),
            "video" | "vi" => Ok(AccessCategory::Video),
            "best_effort" | "besteffort" | "be" => Ok(AccessCategory::BestEffort),
            "background" | "bk" => Ok(AccessCategory::Background),
            other => Err(format!("unknown access category `{other}`")),
        }
    }
}

/// What a transmission (or a serialized frame) carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    PlainMsdu,
    Amsdu,
    Ampdu,
}

impl FrameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::PlainMsdu => "plain_msdu",
            FrameKind::Amsdu => "amsdu",
            FrameKind::Ampdu => "ampdu",
        }
    }
}

impl std::str::FromStr for FrameKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain_msdu" => Ok(FrameKind::PlainMsdu),
            "amsdu" => Ok(FrameKind::Amsdu),
            "ampdu" => Ok(FrameKind::Ampdu),
            other => Err(format!("unknown frame kind `{other}`")),
        }
    }
}

/// 48-bit MAC address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const fn new(octets: [u8; 6]) -> Self {
        MacAddr(octets)
    }

    /// Locally administered address with the low bytes taken from `n`.
    pub const fn local(n: u32) -> Self {
        let b = n.to_be_bytes();
        MacAddr([0x02, 0x00, b[0], b[1], b[2], b[3]])
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

/// 12-bit sequence number, arithmetic modulo 4096.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SeqNo(u16);

impl SeqNo {
    pub const MODULUS: u16 = SEQ_MODULUS;

    pub fn new(value: u16) -> Self {
        SeqNo(value % SEQ_MODULUS)
    }

    pub fn value(self) -> u16 {
        self.0
    }

    pub fn next(self) -> Self {
        self.wrapping_add(1)
    }

    pub fn wrapping_add(self, n: u16) -> Self {
        SeqNo(((self.0 as u32 + n as u32) % SEQ_MODULUS as u32) as u16)
    }

    /// Forward distance from `start` to `self`, modulo 4096.
    pub fn offset_from(self, start: SeqNo) -> u16 {
        (self.0 + SEQ_MODULUS - start.0) % SEQ_MODULUS
    }
}

impl fmt::Display for SeqNo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An upper-layer packet handed to the MAC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msdu {
    pub id: u64,
    pub ac: AccessCategory,
    pub dest_addr: MacAddr,
    pub src_addr: MacAddr,
    pub payload: Bytes,
    pub created_at: Micros,
    pub flow_id: u32,
}

impl Msdu {
    pub fn new(
        id: u64,
        ac: AccessCategory,
        dest_addr: MacAddr,
        src_addr: MacAddr,
        payload: Bytes,
        created_at: Micros,
        flow_id: u32,
    ) -> Result<Self, FrameError> {
        check_payload_len(payload.len())?;
        Ok(Msdu { id, ac, dest_addr, src_addr, payload, created_at, flow_id })
    }

    /// MSDU whose payload is `payload_len` zero bytes.
    pub fn zeroed(
        id: u64,
        ac: AccessCategory,
        dest_addr: MacAddr,
        src_addr: MacAddr,
        payload_len: usize,
        created_at: Micros,
        flow_id: u32,
    ) -> Result<Self, FrameError> {
        check_payload_len(payload_len)?;
        Ok(Msdu {
            id,
            ac,
            dest_addr,
            src_addr,
            payload: zero_payload(payload_len),
            created_at,
            flow_id,
        })
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }
}

fn check_payload_len(len: usize) -> Result<(), FrameError> {
    if len == 0 || len > MSDU_MAX_PAYLOAD {
        Err(FrameError::InvalidPayload(len))
    } else {
        Ok(())
    }
}

/// One decoded A-MSDU subframe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmsduSubframe {
    pub da: MacAddr,
    pub sa: MacAddr,
    pub payload: Bytes,
    pub pad_len: usize,
}

impl AmsduSubframe {
    /// Value of the 16-bit length field.
    pub fn length(&self) -> u16 {
        self.payload.len() as u16
    }
}

/// A MAC frame: 26-byte QoS header, body, 4-byte FCS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mpdu {
    pub seq_no: SeqNo,
    pub receiver_addr: MacAddr,
    pub transmitter_addr: MacAddr,
    pub ac: AccessCategory,
    /// Body carries an A-MSDU rather than a single MSDU.
    pub amsdu: bool,
    pub body: Bytes,
    pub retries: u8,
    pub contained_msdu_ids: Vec<u64>,
}

impl Mpdu {
    /// Wraps a single MSDU. The sequence number is assigned when the frame is
    /// put on the air.
    pub fn from_msdu(msdu: &Msdu) -> Self {
        Mpdu {
            seq_no: SeqNo::default(),
            receiver_addr: msdu.dest_addr,
            transmitter_addr: msdu.src_addr,
            ac: msdu.ac,
            amsdu: false,
            body: msdu.payload.clone(),
            retries: 0,
            contained_msdu_ids: vec![msdu.id],
        }
    }

    pub fn body_len(&self) -> usize {
        self.body.len()
    }

    pub fn total_len(&self) -> usize {
        mpdu_len(self.body.len())
    }
}

pub fn mpdu_len(body_len: usize) -> usize {
    MAC_HEADER_LEN + body_len + FCS_LEN
}

/// Per-MPDU delimiter inside an A-MPDU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MpduDelimiter {
    pub reserved: u8,
    pub mpdu_length: u16,
    pub crc8: u8,
    pub signature: u8,
}

impl MpduDelimiter {
    pub fn new(mpdu_length: usize) -> Result<Self, FrameError> {
        if mpdu_length > DELIMITER_MAX_MPDU_LEN {
            return Err(FrameError::DelimiterOverflow(mpdu_length));
        }
        let mut d = MpduDelimiter {
            reserved: 0,
            mpdu_length: mpdu_length as u16,
            crc8: 0,
            signature: DELIMITER_SIGNATURE,
        };
        d.crc8 = crate::codec::crc8(&d.header_bytes());
        Ok(d)
    }

    /// The two bytes the CRC covers: `reserved` in the low nibble, length above.
    fn header_bytes(&self) -> [u8; 2] {
        let word = ((self.mpdu_length & 0x0FFF) << 4) | (self.reserved as u16 & 0x0F);
        word.to_le_bytes()
    }

    pub fn to_bytes(&self) -> [u8; DELIMITER_LEN] {
        let h = self.header_bytes();
        [h[0], h[1], self.crc8, self.signature]
    }

    /// Parses four bytes; `None` unless both CRC and signature check out.
    pub fn parse(bytes: [u8; DELIMITER_LEN]) -> Option<Self> {
        if bytes[3] != DELIMITER_SIGNATURE || crate::codec::crc8(&bytes[..2]) != bytes[2] {
            return None;
        }
        let word = u16::from_le_bytes([bytes[0], bytes[1]]);
        Some(MpduDelimiter {
            reserved: (word & 0x0F) as u8,
            mpdu_length: word >> 4,
            crc8: bytes[2],
            signature: bytes[3],
        })
    }
}

/// Size limits applied while building aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateLimits {
    pub amsdu_max: usize,
    pub ampdu_max_bytes: usize,
    pub ampdu_max_mpdus: usize,
}

impl Default for AggregateLimits {
    fn default() -> Self {
        AggregateLimits {
            amsdu_max: AMSDU_MAX_SHORT,
            ampdu_max_bytes: AMPDU_MAX_BYTES,
            ampdu_max_mpdus: AMPDU_MAX_MPDUS,
        }
    }
}

impl AggregateLimits {
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.amsdu_max != AMSDU_MAX_SHORT && self.amsdu_max != AMSDU_MAX_LONG {
            return Err(FrameError::InvalidLimits(format!(
                "amsdu_max must be {AMSDU_MAX_SHORT} or {AMSDU_MAX_LONG}, got {}",
                self.amsdu_max
            )));
        }
        if self.ampdu_max_bytes == 0 || self.ampdu_max_bytes > AMPDU_MAX_BYTES_CEILING {
            return Err(FrameError::InvalidLimits(format!(
                "ampdu_max_bytes must be in 1..={AMPDU_MAX_BYTES_CEILING}, got {}",
                self.ampdu_max_bytes
            )));
        }
        if self.ampdu_max_mpdus == 0 || self.ampdu_max_mpdus > AMPDU_MAX_MPDUS {
            return Err(FrameError::InvalidLimits(format!(
                "ampdu_max_mpdus must be in 1..={AMPDU_MAX_MPDUS}, got {}",
                self.ampdu_max_mpdus
            )));
        }
        Ok(())
    }
}

/// Bytes needed to bring `len` up to the next multiple of four.
pub fn pad_to_4(len: usize) -> usize {
    (4 - len % 4) % 4
}

/// Padding after an A-MSDU subframe. The final subframe is never padded.
pub fn subframe_pad_len(payload_len: usize, is_last: bool) -> Result<usize, FrameError> {
    if payload_len == 0 {
        return Err(FrameError::InvalidPayload(0));
    }
    if is_last {
        return Ok(0);
    }
    Ok(pad_to_4(AMSDU_SUBFRAME_HEADER_LEN + payload_len))
}

/// Serialized length of an A-MSDU built from the given payload lengths.
pub fn amsdu_total_len(payload_lens: &[usize]) -> Result<usize, FrameError> {
    if payload_lens.is_empty() {
        return Err(FrameError::EmptyAggregate);
    }
    let last = payload_lens.len() - 1;
    payload_lens.iter().enumerate().try_fold(0, |acc, (i, &len)| {
        Ok(acc + AMSDU_SUBFRAME_HEADER_LEN + len + subframe_pad_len(len, i == last)?)
    })
}

/// Serialized length of an A-MPDU built from MPDUs of the given total lengths.
pub fn ampdu_total_len(mpdu_lens: &[usize]) -> Result<usize, FrameError> {
    if mpdu_lens.is_empty() {
        return Err(FrameError::EmptyAggregate);
    }
    let last = mpdu_lens.len() - 1;
    mpdu_lens.iter().enumerate().try_fold(0, |acc, (i, &len)| {
        if len > DELIMITER_MAX_MPDU_LEN {
            return Err(FrameError::DelimiterOverflow(len));
        }
        let pad = if i == last { 0 } else { pad_to_4(len) };
        Ok(acc + DELIMITER_LEN + len + pad)
    })
}

/// Whether one more subframe of `next_payload` bytes can be appended to an
/// A-MSDU currently `current_len` bytes long (0 = empty) without exceeding
/// `limits.amsdu_max`. The current last subframe gets re-padded first.
pub fn fits_in_amsdu(current_len: usize, next_payload: usize, limits: &AggregateLimits) -> bool {
    let base = if current_len == 0 { 0 } else { current_len + pad_to_4(current_len) };
    base + AMSDU_SUBFRAME_HEADER_LEN + next_payload <= limits.amsdu_max
}
