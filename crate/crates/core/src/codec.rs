//! Bit-exact A-MSDU / A-MPDU serialization.
//!
//! ## Wire format
//!
//! MPDU (QoS data), multi-byte header fields little-endian:
//!
//! | Field       | Bytes | Notes                                   |
//! |-------------|-------|-----------------------------------------|
//! | Frame ctl   | 2     | `0x88 0x00` (QoS data)                  |
//! | Duration    | 2     | zero                                    |
//! | Addr1 (RA)  | 6     | receiver                                |
//! | Addr2 (TA)  | 6     | transmitter                             |
//! | Addr3       | 6     | receiver (BSSID)                        |
//! | Seq ctl     | 2     | `seq << 4`, fragment 0                  |
//! | QoS ctl     | 2     | TID in bits 0-3, bit 7 = A-MSDU present |
//! | Body        | n     |                                         |
//! | FCS         | 4     | CRC-32 over header and body             |
//!
//! A-MSDU subframe: `[DA:6][SA:6][len:2 big-endian][payload][pad 0-3]`, the
//! final subframe unpadded.
//!
//! A-MPDU: per MPDU `[delimiter:4][mpdu][pad 0-3]`, final MPDU unpadded. The
//! delimiter is `[reserved:4 | length:12]` as a little-endian u16, a CRC-8 over
//! those two bytes, then the signature `0x4E`.

use bytes::Bytes;
use thiserror::Error;

use crate::frame_model::{
    ampdu_total_len, pad_to_4, subframe_pad_len, AccessCategory, AggregateLimits, AmsduSubframe,
    FrameError, FrameKind, MacAddr, Mpdu, MpduDelimiter, Msdu, SeqNo, AMSDU_SUBFRAME_HEADER_LEN,
    DELIMITER_LEN, FCS_LEN, MAC_HEADER_LEN,
};

const FRAME_CONTROL_QOS_DATA: [u8; 2] = [0x88, 0x00];
const QOS_AMSDU_PRESENT: u16 = 0x0080;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("A-MSDU members carry different traffic identifiers")]
    MixedTid,
    #[error("A-MSDU members have different destination addresses")]
    MixedDestination,
    #[error("A-MPDU members are addressed to different receivers")]
    MixedReceiver,
    #[error("{0} MPDUs exceed the A-MPDU unit limit")]
    TooManyMpdus(usize),
    #[error("aggregate length {len} exceeds limit {max}")]
    LimitExceeded { len: usize, max: usize },
    #[error("subframe at offset {offset} runs past the end of the frame")]
    TruncatedSubframe { offset: usize },
    #[error("expected a {expected:?} frame, got {found:?}")]
    WrongKind { expected: FrameKind, found: FrameKind },
    #[error("frame check sequence mismatch")]
    FcsMismatch,
    #[error("malformed MPDU: {0}")]
    Malformed(&'static str),
}

const fn crc8_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static CRC8_TABLE: [u8; 256] = crc8_table();

/// CRC-8, polynomial 0x07, init 0, unreflected, no final xor.
pub fn crc8(data: &[u8]) -> u8 {
    data.iter().fold(0u8, |crc, &b| CRC8_TABLE[(crc ^ b) as usize])
}

/// Standard reflected CRC-32 (IEEE 802.3) used as the MPDU FCS.
pub fn fcs32(data: &[u8]) -> u32 {
    crc32fast::hash(data)
}

/// A serialized frame: a single MPDU, an A-MSDU body, or an A-MPDU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteFrame {
    pub bytes: Vec<u8>,
    pub kind: FrameKind,
}

impl ByteFrame {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Outcome of scanning an A-MPDU.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeReport {
    pub recovered: Vec<Mpdu>,
    /// `(offset, length)` of byte ranges that yielded no MPDU.
    pub skipped_regions: Vec<(usize, usize)>,
    pub crc_failures: usize,
}

fn write_mpdu(out: &mut Vec<u8>, mpdu: &Mpdu) {
    let start = out.len();
    out.extend_from_slice(&FRAME_CONTROL_QOS_DATA);
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&mpdu.receiver_addr.octets());
    out.extend_from_slice(&mpdu.transmitter_addr.octets());
    out.extend_from_slice(&mpdu.receiver_addr.octets());
    out.extend_from_slice(&(mpdu.seq_no.value() << 4).to_le_bytes());
    let mut qos = mpdu.ac.tid() as u16;
    if mpdu.amsdu {
        qos |= QOS_AMSDU_PRESENT;
    }
    out.extend_from_slice(&qos.to_le_bytes());
    out.extend_from_slice(&mpdu.body);
    let fcs = fcs32(&out[start..]);
    out.extend_from_slice(&fcs.to_le_bytes());
}

/// Serializes one MPDU (header, body, FCS).
pub fn encode_mpdu(mpdu: &Mpdu) -> ByteFrame {
    let mut bytes = Vec::with_capacity(mpdu.total_len());
    write_mpdu(&mut bytes, mpdu);
    ByteFrame { bytes, kind: FrameKind::PlainMsdu }
}

fn mac_at(buf: &[u8], at: usize) -> MacAddr {
    let mut o = [0u8; 6];
    o.copy_from_slice(&buf[at..at + 6]);
    MacAddr(o)
}

/// Parses and FCS-checks one serialized MPDU.
pub fn decode_mpdu(buf: &[u8]) -> Result<Mpdu, CodecError> {
    if buf.len() < MAC_HEADER_LEN + FCS_LEN {
        return Err(CodecError::Malformed("shorter than header plus FCS"));
    }
    let split = buf.len() - FCS_LEN;
    let fcs = u32::from_le_bytes([buf[split], buf[split + 1], buf[split + 2], buf[split + 3]]);
    if fcs32(&buf[..split]) != fcs {
        return Err(CodecError::FcsMismatch);
    }
    if buf[..2] != FRAME_CONTROL_QOS_DATA {
        return Err(CodecError::Malformed("not a QoS data frame"));
    }
    let seq_ctl = u16::from_le_bytes([buf[22], buf[23]]);
    let qos = u16::from_le_bytes([buf[24], buf[25]]);
    let ac = AccessCategory::from_tid((qos & 0x0F) as u8)
        .ok_or(CodecError::Malformed("TID outside 0..=7"))?;
    Ok(Mpdu {
        seq_no: SeqNo::new(seq_ctl >> 4),
        receiver_addr: mac_at(buf, 4),
        transmitter_addr: mac_at(buf, 10),
        ac,
        amsdu: qos & QOS_AMSDU_PRESENT != 0,
        body: Bytes::copy_from_slice(&buf[MAC_HEADER_LEN..split]),
        retries: 0,
        contained_msdu_ids: Vec::new(),
    })
}

/// Serializes MSDUs into an A-MSDU body.
pub fn encode_amsdu(msdus: &[Msdu], limits: &AggregateLimits) -> Result<ByteFrame, CodecError> {
    let first = msdus.first().ok_or(FrameError::EmptyAggregate)?;
    if msdus.iter().any(|m| m.ac.tid() != first.ac.tid()) {
        return Err(CodecError::MixedTid);
    }
    if msdus.iter().any(|m| m.dest_addr != first.dest_addr) {
        return Err(CodecError::MixedDestination);
    }
    let lens: Vec<usize> = msdus.iter().map(Msdu::payload_len).collect();
    if let Some(&bad) = lens.iter().find(|&&l| l == 0 || l > crate::frame_model::MSDU_MAX_PAYLOAD) {
        return Err(FrameError::InvalidPayload(bad).into());
    }
    let total = crate::frame_model::amsdu_total_len(&lens)?;
    if total > limits.amsdu_max {
        return Err(CodecError::LimitExceeded { len: total, max: limits.amsdu_max });
    }
    let mut bytes = Vec::with_capacity(total);
    let last = msdus.len() - 1;
    for (i, m) in msdus.iter().enumerate() {
        bytes.extend_from_slice(&m.dest_addr.octets());
        bytes.extend_from_slice(&m.src_addr.octets());
        bytes.extend_from_slice(&(m.payload_len() as u16).to_be_bytes());
        bytes.extend_from_slice(&m.payload);
        let pad = subframe_pad_len(m.payload_len(), i == last)?;
        bytes.resize(bytes.len() + pad, 0);
    }
    debug_assert_eq!(bytes.len(), total);
    Ok(ByteFrame { bytes, kind: FrameKind::Amsdu })
}

/// Splits an A-MSDU body back into its subframes.
pub fn decode_amsdu(frame: &ByteFrame) -> Result<Vec<AmsduSubframe>, CodecError> {
    if frame.kind != FrameKind::Amsdu {
        return Err(CodecError::WrongKind { expected: FrameKind::Amsdu, found: frame.kind });
    }
    let buf = &frame.bytes;
    let mut out = Vec::new();
    let mut off = 0;
    while off < buf.len() {
        if off + AMSDU_SUBFRAME_HEADER_LEN > buf.len() {
            return Err(CodecError::TruncatedSubframe { offset: off });
        }
        let len = u16::from_be_bytes([buf[off + 12], buf[off + 13]]) as usize;
        let body = off + AMSDU_SUBFRAME_HEADER_LEN;
        if len == 0 || body + len > buf.len() {
            return Err(CodecError::TruncatedSubframe { offset: off });
        }
        let end = body + len;
        let pad = if end == buf.len() { 0 } else { pad_to_4(end - off) };
        if end + pad > buf.len() {
            return Err(CodecError::TruncatedSubframe { offset: off });
        }
        out.push(AmsduSubframe {
            da: mac_at(buf, off),
            sa: mac_at(buf, off + 6),
            payload: Bytes::copy_from_slice(&buf[body..end]),
            pad_len: pad,
        });
        off = end + pad;
    }
    if out.is_empty() {
        return Err(FrameError::EmptyAggregate.into());
    }
    Ok(out)
}

/// Builds the single MPDU that carries `msdus` as an A-MSDU body. The
/// sequence number is left at zero for the transmitter to assign.
pub fn amsdu_mpdu(msdus: &[Msdu], limits: &AggregateLimits) -> Result<Mpdu, CodecError> {
    let frame = encode_amsdu(msdus, limits)?;
    let first = &msdus[0];
    Ok(Mpdu {
        seq_no: SeqNo::default(),
        receiver_addr: first.dest_addr,
        transmitter_addr: first.src_addr,
        ac: first.ac,
        amsdu: true,
        body: Bytes::from(frame.bytes),
        retries: 0,
        contained_msdu_ids: msdus.iter().map(|m| m.id).collect(),
    })
}

/// Serializes delimiter-prefixed MPDUs into an A-MPDU.
pub fn encode_ampdu(mpdus: &[Mpdu], limits: &AggregateLimits) -> Result<ByteFrame, CodecError> {
    let first = mpdus.first().ok_or(FrameError::EmptyAggregate)?;
    if mpdus.len() > limits.ampdu_max_mpdus {
        return Err(CodecError::TooManyMpdus(mpdus.len()));
    }
    if mpdus.iter().any(|m| m.receiver_addr != first.receiver_addr) {
        return Err(CodecError::MixedReceiver);
    }
    let lens: Vec<usize> = mpdus.iter().map(Mpdu::total_len).collect();
    let total = ampdu_total_len(&lens)?;
    if total > limits.ampdu_max_bytes {
        return Err(CodecError::LimitExceeded { len: total, max: limits.ampdu_max_bytes });
    }
    let mut bytes = Vec::with_capacity(total);
    let last = mpdus.len() - 1;
    for (i, (m, &len)) in mpdus.iter().zip(&lens).enumerate() {
        bytes.extend_from_slice(&MpduDelimiter::new(len)?.to_bytes());
        write_mpdu(&mut bytes, m);
        if i != last {
            bytes.resize(bytes.len() + pad_to_4(len), 0);
        }
    }
    debug_assert_eq!(bytes.len(), total);
    Ok(ByteFrame { bytes, kind: FrameKind::Ampdu })
}

/// Scans an A-MPDU for delimiters and extracts every MPDU that passes its FCS.
pub fn decode_ampdu(frame: &ByteFrame) -> Result<DecodeReport, CodecError> {
    if frame.kind != FrameKind::Ampdu {
        return Err(CodecError::WrongKind { expected: FrameKind::Ampdu, found: frame.kind });
    }
    Ok(scan_ampdu(&frame.bytes))
}

/// Delimiter scan over raw A-MPDU bytes. An invalid delimiter advances the
/// scan by four bytes. An MPDU failing its FCS is counted and the scan resumes
/// four bytes past its delimiter, since the delimiter itself may be a false
/// match inside corrupted data.
pub fn scan_ampdu(buf: &[u8]) -> DecodeReport {
    let mut report = DecodeReport::default();
    let mut skip_start: Option<usize> = None;
    let mut off = 0;

    let close_skip = |report: &mut DecodeReport, skip_start: &mut Option<usize>, end: usize| {
        if let Some(s) = skip_start.take() {
            if end > s {
                report.skipped_regions.push((s, end - s));
            }
        }
    };

    while off + DELIMITER_LEN <= buf.len() {
        let mut head = [0u8; DELIMITER_LEN];
        head.copy_from_slice(&buf[off..off + DELIMITER_LEN]);
        if let Some(delim) = MpduDelimiter::parse(head) {
            let len = delim.mpdu_length as usize;
            let body = off + DELIMITER_LEN;
            if len >= MAC_HEADER_LEN + FCS_LEN && body + len <= buf.len() {
                match decode_mpdu(&buf[body..body + len]) {
                    Ok(mpdu) => {
                        close_skip(&mut report, &mut skip_start, off);
                        report.recovered.push(mpdu);
                        off = (body + len + pad_to_4(len)).min(buf.len());
                        continue;
                    }
                    Err(CodecError::FcsMismatch) => report.crc_failures += 1,
                    Err(_) => {}
                }
            }
        }
        skip_start.get_or_insert(off);
        off += DELIMITER_LEN;
    }
    if off < buf.len() {
        skip_start.get_or_insert(off);
    }
    close_skip(&mut report, &mut skip_start, buf.len());
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_model::amsdu_total_len;

    // Shift-register reference, one bit at a time.
    fn crc8_oracle(data: &[u8]) -> u8 {
        let mut reg: u8 = 0;
        for &byte in data {
            for i in (0..8).rev() {
                let inbit = (byte >> i) & 1;
                let top = reg >> 7;
                reg <<= 1;
                if top ^ inbit == 1 {
                    reg ^= 0x07;
                }
            }
        }
        reg
    }

    fn crc32_oracle(data: &[u8]) -> u32 {
        let mut crc = 0xFFFF_FFFFu32;
        for &byte in data {
            crc ^= byte as u32;
            for _ in 0..8 {
                crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
            }
        }
        !crc
    }

    #[test]
    fn crc8_check_values() {
        assert_eq!(crc8_oracle(b"123456789"), 0xF4);
        assert_eq!(crc8(&[]), 0x00);
        assert_eq!(crc8(b"123456789"), 0xF4);
        assert_eq!(crc8(&[0x00]), 0x00);
        for n in 0..=255u8 {
            let data = [n, n.wrapping_mul(31), 0x4E];
            assert_eq!(crc8(&data), crc8_oracle(&data));
        }
    }

    #[test]
    fn fcs32_check_values() {
        assert_eq!(crc32_oracle(b"123456789"), 0xCBF4_3926);
        assert_eq!(fcs32(&[]), 0);
        assert_eq!(fcs32(b"123456789"), 0xCBF4_3926);
        let data: Vec<u8> = (0..=255).collect();
        assert_eq!(fcs32(&data), crc32_oracle(&data));
        assert_eq!(fcs32(&data), fcs32(&data));
    }

    fn msdu(id: u64, ac: AccessCategory, dest: u32, len: usize) -> Msdu {
        let payload: Vec<u8> = (0..len).map(|i| (i as u8).wrapping_add(id as u8)).collect();
        Msdu::new(id, ac, MacAddr::local(dest), MacAddr::local(100), payload.into(), 0, 0).unwrap()
    }

    #[test]
    fn amsdu_two_fifty_byte_msdus() {
        let limits = AggregateLimits::default();
        let frame = encode_amsdu(
            &[msdu(1, AccessCategory::Voice, 1, 50), msdu(2, AccessCategory::Voice, 1, 50)],
            &limits,
        )
        .unwrap();
        assert_eq!(frame.len(), 128);
        assert_eq!(frame.len(), amsdu_total_len(&[50, 50]).unwrap());
    }

    #[test]
    fn amsdu_rejects_mixed_members() {
        let limits = AggregateLimits::default();
        let err = encode_amsdu(
            &[msdu(1, AccessCategory::Voice, 1, 50), msdu(2, AccessCategory::Video, 1, 50)],
            &limits,
        );
        assert_eq!(err, Err(CodecError::MixedTid));
        let err = encode_amsdu(
            &[msdu(1, AccessCategory::Voice, 1, 50), msdu(2, AccessCategory::Voice, 2, 50)],
            &limits,
        );
        assert_eq!(err, Err(CodecError::MixedDestination));
        let big: Vec<Msdu> = (0..3).map(|i| msdu(i, AccessCategory::Voice, 1, 1500)).collect();
        assert!(matches!(encode_amsdu(&big, &limits), Err(CodecError::LimitExceeded { .. })));
        assert_eq!(encode_amsdu(&[], &limits), Err(FrameError::EmptyAggregate.into()));
    }

    #[test]
    fn amsdu_single_roundtrip() {
        let m = msdu(9, AccessCategory::Voice, 1, 100);
        let frame = encode_amsdu(std::slice::from_ref(&m), &AggregateLimits::default()).unwrap();
        assert_eq!(frame.len(), 114);
        let sub = decode_amsdu(&frame).unwrap();
        assert_eq!(sub.len(), 1);
        assert_eq!((sub[0].da, sub[0].sa, &sub[0].payload), (m.dest_addr, m.src_addr, &m.payload));
    }

    #[test]
    fn amsdu_padding_discarded() {
        let a = msdu(1, AccessCategory::Voice, 1, 51);
        let b = msdu(2, AccessCategory::Voice, 1, 51);
        let frame = encode_amsdu(&[a.clone(), b.clone()], &AggregateLimits::default()).unwrap();
        assert_eq!(frame.len(), 133);
        let sub = decode_amsdu(&frame).unwrap();
        assert_eq!(sub[0].payload, a.payload);
        assert_eq!(sub[0].pad_len, 3);
        assert_eq!(sub[1].payload, b.payload);
        assert_eq!(sub[1].pad_len, 0);
    }

    #[test]
    fn amsdu_truncated_length_field() {
        let mut bytes = vec![0u8; 74];
        bytes[12..14].copy_from_slice(&500u16.to_be_bytes());
        let frame = ByteFrame { bytes, kind: FrameKind::Amsdu };
        assert_eq!(decode_amsdu(&frame), Err(CodecError::TruncatedSubframe { offset: 0 }));
    }

    fn mpdu(seq: u16, ra: u32, body_len: usize) -> Mpdu {
        let body: Vec<u8> = (0..body_len).map(|i| (i * 7 + seq as usize) as u8).collect();
        Mpdu {
            seq_no: SeqNo::new(seq),
            receiver_addr: MacAddr::local(ra),
            transmitter_addr: MacAddr::local(100),
            ac: AccessCategory::BestEffort,
            amsdu: false,
            body: body.into(),
            retries: 0,
            contained_msdu_ids: Vec::new(),
        }
    }

    #[test]
    fn mpdu_roundtrip() {
        let m = mpdu(4095, 1, 70);
        let frame = encode_mpdu(&m);
        assert_eq!(frame.len(), 100);
        assert_eq!(decode_mpdu(&frame.bytes).unwrap(), m);
        let mut bad = frame.bytes.clone();
        bad[40] ^= 0x10;
        assert_eq!(decode_mpdu(&bad), Err(CodecError::FcsMismatch));
    }

    #[test]
    fn ampdu_single_and_errors() {
        let limits = AggregateLimits::default();
        let frame = encode_ampdu(&[mpdu(1, 1, 70)], &limits).unwrap();
        assert_eq!(frame.len(), 104);
        let many: Vec<Mpdu> = (0..65).map(|i| mpdu(i, 1, 10)).collect();
        assert_eq!(encode_ampdu(&many, &limits), Err(CodecError::TooManyMpdus(65)));
        assert_eq!(
            encode_ampdu(&[mpdu(1, 1, 10), mpdu(2, 2, 10)], &limits),
            Err(CodecError::MixedReceiver)
        );
        let huge: Vec<Mpdu> = (0..40).map(|i| mpdu(i, 1, 2000)).collect();
        assert!(matches!(encode_ampdu(&huge, &limits), Err(CodecError::LimitExceeded { .. })));
    }

    // Hand-computed layout of three 4-aligned MPDUs (body 98 -> 128 bytes each):
    // delimiters at 0, 132, 264; total 396.
    fn three_mpdus() -> (Vec<Mpdu>, ByteFrame) {
        let mpdus: Vec<Mpdu> = (0..3).map(|i| mpdu(10 + i, 1, 98)).collect();
        let frame = encode_ampdu(&mpdus, &AggregateLimits::default()).unwrap();
        assert_eq!(frame.len(), 396);
        (mpdus, frame)
    }

    #[test]
    fn ampdu_clean_roundtrip() {
        let (mpdus, frame) = three_mpdus();
        let report = decode_ampdu(&frame).unwrap();
        assert_eq!(report.recovered, mpdus);
        assert!(report.skipped_regions.is_empty());
        assert_eq!(report.crc_failures, 0);
    }

    #[test]
    fn corrupted_first_delimiter_skips_first_region() {
        let (mpdus, mut frame) = three_mpdus();
        frame.bytes[1] ^= 0x04;
        let report = decode_ampdu(&frame).unwrap();
        assert_eq!(report.recovered, mpdus[1..].to_vec());
        assert_eq!(report.skipped_regions, vec![(0, 132)]);
        assert_eq!(report.crc_failures, 0);
    }

    #[test]
    fn corrupted_body_counts_crc_failure() {
        let (mpdus, mut frame) = three_mpdus();
        frame.bytes[132 + 4 + 60] ^= 0x01;
        let report = decode_ampdu(&frame).unwrap();
        assert_eq!(report.recovered, vec![mpdus[0].clone(), mpdus[2].clone()]);
        assert_eq!(report.crc_failures, 1);
        assert_eq!(report.skipped_regions, vec![(132, 132)]);
    }

    #[test]
    fn trailing_garbage_is_skipped() {
        let (_, mut frame) = three_mpdus();
        frame.bytes.truncate(300);
        let report = scan_ampdu(&frame.bytes);
        assert_eq!(report.recovered.len(), 2);
        assert_eq!(report.skipped_regions, vec![(264, 36)]);
    }
}
