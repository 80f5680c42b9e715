//! Discrete-event simulation of an 802.11n sender/receiver link with frame
//! aggregation.
//!
//! The pieces, bottom up:
//!
//! * [`frame_model`] and [`codec`]: MSDU/MPDU types and the A-MSDU / A-MPDU
//!   wire formats, including delimiter resynchronisation on decode.
//! * [`block_ack`]: compressed block-ack bitmaps.
//! * [`scheduler`]: the access-category bi-scheduler and comparison baselines.
//! * [`traffic`], [`phy`]: seeded traffic sources and the airtime / bit-error
//!   channel model.
//! * [`engine`], [`metrics`], [`scenario`], [`report`]: the event loop, its
//!   statistics, the scenario config format and CSV/JSON output.
//!
//! ```
//! use aggsim_core::{engine, Scenario};
//!
//! let scenario = Scenario { duration_us: 100_000, ..Scenario::unsaturated_mixed() };
//! let report = engine::run(&scenario).unwrap();
//! assert!(report.per_ac.iter().all(|ac| ac.generated == ac.delivered_msdus + ac.dropped + ac.residual));
//! ```

pub mod block_ack;
pub mod codec;
pub mod engine;
pub mod frame_model;
pub mod metrics;
pub mod phy;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod scheduler;
pub mod traffic;

pub use block_ack::{make_block_ack, missing_seqs, BlockAck};
pub use codec::{ByteFrame, CodecError, DecodeReport};
pub use engine::{run, run_seeded, run_with_trace, SimError};
pub use frame_model::{AccessCategory, AggregateLimits, FrameKind, MacAddr, Micros, Mpdu, Msdu, SeqNo};
pub use metrics::{AcMetrics, MetricsReport};
pub use phy::PhyProfile;
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};
pub use scheduler::{SchedulerConfig, SchedulerPolicy, TxDescriptor, TxScheduler};
pub use traffic::{FlowSpec, TrafficModel};
