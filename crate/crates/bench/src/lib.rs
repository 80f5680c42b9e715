//! Fixtures shared by the criterion benches.

use aggsim_core::frame_model::{AccessCategory, MacAddr, Mpdu, Msdu};
use aggsim_core::traffic::FlowSpec;
use aggsim_core::Scenario;

/// `n` MPDUs of `payload` bytes each, numbered from zero.
pub fn mpdus(n: usize, payload: usize) -> Vec<Mpdu> {
    msdus(n, payload)
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut u = Mpdu::from_msdu(m);
            u.seq_no = aggsim_core::SeqNo::new(i as u16);
            u
        })
        .collect()
}

pub fn msdus(n: usize, payload: usize) -> Vec<Msdu> {
    (0..n as u64)
        .map(|id| {
            Msdu::zeroed(id, AccessCategory::BestEffort, MacAddr::local(2), MacAddr::local(1), payload, 0, 1)
                .expect("valid payload")
        })
        .collect()
}

/// One saturated 1500-byte video flow for `duration_us`.
pub fn saturated_video(duration_us: u64) -> Scenario {
    Scenario {
        name: "bench-saturated".into(),
        duration_us,
        flows: vec![FlowSpec::saturated(1, AccessCategory::Video, 1500)],
        ..Scenario::default()
    }
}
