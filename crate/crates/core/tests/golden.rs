//! Golden wire-format corpus under `tests/golden/`.
//!
//! Each `.bin` is an encoder output listed in `MANIFEST` with its kind, length
//! and CRC-32. Set `AGGSIM_REGEN_GOLDEN=1` to rewrite the corpus after an
//! intentional format change.

use std::fmt::Write as _;
use std::path::PathBuf;

use aggsim_core::codec::{amsdu_mpdu, decode_amsdu, decode_ampdu, decode_mpdu, encode_amsdu, encode_ampdu, encode_mpdu, fcs32, ByteFrame};
use aggsim_core::frame_model::{AccessCategory, AggregateLimits, FrameKind, MacAddr, Mpdu, Msdu, SeqNo};
use bytes::Bytes;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn patterned(id: u64, ac: AccessCategory, len: usize) -> Msdu {
    let payload: Vec<u8> = (0..len).map(|i| (i * 7 + id as usize * 31) as u8).collect();
    Msdu::new(id, ac, MacAddr::local(0x0B), MacAddr::local(0x0A), Bytes::from(payload), 0, 1).unwrap()
}

fn numbered(mut units: Vec<Mpdu>, start: u16) -> Vec<Mpdu> {
    for (i, u) in units.iter_mut().enumerate() {
        u.seq_no = SeqNo::new(start).wrapping_add(i as u16);
    }
    units
}

fn corpus() -> Vec<(&'static str, &'static str, ByteFrame)> {
    let limits = AggregateLimits::default();
    let voice: Vec<Msdu> = (0..3).map(|i| patterned(i, AccessCategory::Voice, 160 + i as usize)).collect();
    let video: Vec<Mpdu> =
        (0..3).map(|i| Mpdu::from_msdu(&patterned(10 + i, AccessCategory::Video, 98))).collect();
    let mixed = vec![
        Mpdu::from_msdu(&patterned(20, AccessCategory::Video, 1300)),
        amsdu_mpdu(&voice, &limits).unwrap(),
        Mpdu::from_msdu(&patterned(21, AccessCategory::BestEffort, 1)),
    ];
    let wrap = numbered(
        (0..4).map(|i| Mpdu::from_msdu(&patterned(30 + i, AccessCategory::Background, 64))).collect(),
        4094,
    );
    let mut single = Mpdu::from_msdu(&patterned(40, AccessCategory::BestEffort, 1500));
    single.seq_no = SeqNo::new(0x123);
    vec![
        ("mpdu_be_1500", "single best-effort MPDU, seq 0x123", encode_mpdu(&single)),
        ("amsdu_voice_3", "A-MSDU body of three voice MSDUs (160..162 B)", encode_amsdu(&voice, &limits).unwrap()),
        ("ampdu_video_3", "three 98-byte video MPDUs, seq 100..102", encode_ampdu(&numbered(video, 100), &limits).unwrap()),
        ("ampdu_mixed", "video MPDU, voice A-MSDU MPDU, 1-byte best-effort MPDU", encode_ampdu(&numbered(mixed, 7), &limits).unwrap()),
        ("ampdu_seq_wrap", "four background MPDUs across the 4095 -> 0 wrap", encode_ampdu(&wrap, &limits).unwrap()),
    ]
}

fn manifest(entries: &[(&str, &str, ByteFrame)]) -> String {
    let mut out = String::from("# name kind bytes crc32 description\n");
    for (name, desc, frame) in entries {
        writeln!(out, "{name}.bin {} {} {:08x} {desc}", frame.kind.as_str(), frame.len(), fcs32(&frame.bytes)).unwrap();
    }
    out
}

#[test]
fn corpus_matches_encoder() {
    let entries = corpus();
    if std::env::var_os("AGGSIM_REGEN_GOLDEN").is_some() {
        std::fs::create_dir_all(dir()).unwrap();
        for (name, _, frame) in &entries {
            std::fs::write(dir().join(format!("{name}.bin")), &frame.bytes).unwrap();
        }
        std::fs::write(dir().join("MANIFEST"), manifest(&entries)).unwrap();
    }
    let on_disk = std::fs::read_to_string(dir().join("MANIFEST")).expect("golden MANIFEST present");
    assert_eq!(on_disk, manifest(&entries), "MANIFEST out of date");
    for (name, _, frame) in &entries {
        let bytes = std::fs::read(dir().join(format!("{name}.bin"))).unwrap();
        assert_eq!(bytes, frame.bytes, "{name}.bin differs from encoder output");
    }
}

#[test]
fn corpus_decodes() {
    for line in std::fs::read_to_string(dir().join("MANIFEST")).unwrap().lines().filter(|l| !l.starts_with('#')) {
        let mut fields = line.split_whitespace();
        let (file, kind, len) = (fields.next().unwrap(), fields.next().unwrap(), fields.next().unwrap());
        let bytes = std::fs::read(dir().join(file)).unwrap();
        assert_eq!(bytes.len(), len.parse::<usize>().unwrap(), "{file}");
        let kind: FrameKind = kind.parse().unwrap();
        let frame = ByteFrame { bytes, kind };
        match kind {
            FrameKind::PlainMsdu => {
                let m = decode_mpdu(&frame.bytes).unwrap();
                assert_eq!(m.seq_no, SeqNo::new(0x123));
                assert_eq!(m.body_len(), 1500);
            }
            FrameKind::Amsdu => assert_eq!(decode_amsdu(&frame).unwrap().len(), 3),
            FrameKind::Ampdu => {
                let report = decode_ampdu(&frame).unwrap();
                assert!(report.skipped_regions.is_empty() && report.crc_failures == 0, "{file}");
                assert!(report.recovered.len() >= 3, "{file}");
            }
        }
    }
}

#[test]
fn known_layout() {
    // Three 98-byte bodies: 128-byte MPDUs, delimiters at 0, 132 and 264.
    let frame = &corpus()[2].2;
    assert_eq!(frame.len(), 396);
    for (off, seq) in [(0, 100u16), (132, 101), (264, 102)] {
        assert_eq!(&frame.bytes[off..off + 2], &(128u16 << 4).to_le_bytes());
        assert_eq!(frame.bytes[off + 3], 0x4E);
        let seqctl = u16::from_le_bytes([frame.bytes[off + 4 + 22], frame.bytes[off + 4 + 23]]);
        assert_eq!(seqctl >> 4, seq);
    }
}
