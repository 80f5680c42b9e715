//! Scenario description and its text config format.
//!
//! ```text
//! # comment (also allowed after a value)
//! [general]
//! name = unsaturated-mixed
//! duration_ms = 1000        # or duration_us
//! seed = 1
//!
//! [phy]
//! data_rate_mbps = 248
//! basic_rate_mbps = 24
//! preamble_us = 40
//! sifs_us = 16
//! difs_us = 34
//! ber = 0
//!
//! [scheduler]
//! policy = bi               # bi | fifo | ampdu-greedy | amsdu-greedy
//! q1_timer_us = 500
//! q23_timer_us = 2000
//! q1_target_bytes = 3839    # defaults to amsdu_max; 0 disables voice aggregation
//! q2_target_mpdus = 16
//! amsdu_max = 3839          # 3839 | 7935
//! ampdu_max_bytes = 65535
//! ampdu_max_mpdus = 64
//! queue_capacity = 1024
//!
//! [flow]                    # repeat once per flow
//! id = 1                    # defaults to the flow's position, from 1
//! ac = voice                # voice | video | best_effort | background
//! model = cbr               # cbr | poisson | onoff
//! period_us = 20000         # cbr, onoff
//! rate_fps = 500            # poisson
//! on_us = 100000            # onoff
//! off_us = 100000           # onoff
//! payload_bytes = 160
//! start_us = 0
//! stop_us = 5000000         # defaults to the end of the run
//! saturated = false         # true: always backlogged, model ignored
//! ```
//!
//! Every section except `[flow]` is optional and may appear at most once.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_model::{AccessCategory, AggregateLimits, Micros};
use crate::phy::{PhyError, PhyProfile};
use crate::scheduler::{ConfigError, SchedulerConfig, SchedulerPolicy};
use crate::traffic::{FlowSpec, TrafficError, TrafficModel};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{key}: {reason}")]
    Validation { key: String, reason: String },
}

impl ScenarioError {
    fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Validation { key: key.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub duration_us: Micros,
    pub seed: u64,
    pub phy: PhyProfile,
    pub scheduler: SchedulerConfig,
    pub flows: Vec<FlowSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            duration_us: 1_000_000,
            seed: 0,
            phy: PhyProfile::default(),
            scheduler: SchedulerConfig::default(),
            flows: Vec::new(),
        }
    }
}

impl Scenario {
    /// Voice CBR 160 B every 20 ms, video on/off bursts of 1300 B every 2 ms
    /// (100 ms on, 100 ms off) and Poisson best effort 1500 B at 500 frames/s.
    pub fn unsaturated_mixed() -> Self {
        Scenario {
            name: "unsaturated-mixed".into(),
            flows: vec![
                FlowSpec::new(1, AccessCategory::Voice, TrafficModel::Cbr { period_us: 20_000, payload_bytes: 160 }),
                FlowSpec::new(
                    2,
                    AccessCategory::Video,
                    TrafficModel::OnOff { on_us: 100_000, off_us: 100_000, period_us: 2_000, payload_bytes: 1300 },
                ),
                FlowSpec::new(
                    3,
                    AccessCategory::BestEffort,
                    TrafficModel::Poisson { rate_fps: 500.0, payload_bytes: 1500 },
                ),
            ],
            ..Scenario::default()
        }
    }

    /// Checks every component; an empty flow list is allowed.
    pub fn validate_components(&self) -> Result<(), ScenarioError> {
        if self.duration_us == 0 {
            return Err(ScenarioError::validation("general.duration_us", "must be > 0"));
        }
        self.phy.validate().map_err(|PhyError::Invalid { field, reason }| {
            ScenarioError::validation(format!("phy.{field}"), reason)
        })?;
        self.scheduler.validate().map_err(|e| match e {
            ConfigError::Invalid { field, reason } => ScenarioError::validation(format!("scheduler.{field}"), reason),
            ConfigError::Limits(e) => ScenarioError::validation("scheduler.limits", e.to_string()),
        })?;
        let mut ids = Vec::new();
        for (i, flow) in self.flows.iter().enumerate() {
            flow.validate().map_err(|e| match e {
                TrafficError::Invalid { field, reason } => {
                    ScenarioError::validation(format!("flow[{}].{field}", i + 1), reason)
                }
                TrafficError::FlowEnded => ScenarioError::validation(format!("flow[{}]", i + 1), "ended"),
            })?;
            if ids.contains(&flow.flow_id) {
                return Err(ScenarioError::validation(
                    format!("flow[{}].id", i + 1),
                    format!("duplicate flow id {}", flow.flow_id),
                ));
            }
            ids.push(flow.flow_id);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.validate_components()?;
        if self.flows.is_empty() {
            return Err(ScenarioError::validation("flow", "at least one [flow] block is required"));
        }
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

struct Entry {
    line: usize,
    value: String,
}

struct Section {
    name: String,
    line: usize,
    entries: HashMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ScenarioError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| ScenarioError::Parse {
                line: e.line,
                message: format!("{}.{key}: cannot parse `{}`: {err}", self.name, e.value),
            }),
        }
    }

    fn finish(self) -> Result<(), ScenarioError> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            Some((key, e)) => Err(ScenarioError::Parse {
                line: e.line,
                message: format!("unknown key `{key}` in [{}]", self.name),
            }),
            None => Ok(()),
        }
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ScenarioError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::Parse { line, message: format!("malformed section header `{content}`") })?
                .trim()
                .to_string();
            if !matches!(name.as_str(), "general" | "phy" | "scheduler" | "flow") {
                return Err(ScenarioError::Parse { line, message: format!("unknown section [{name}]") });
            }
            if name != "flow" && sections.iter().any(|s| s.name == name) {
                return Err(ScenarioError::Parse { line, message: format!("section [{name}] repeated") });
            }
            sections.push(Section { name, line, entries: HashMap::new() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ScenarioError::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
        let key = key.trim().to_string();
        let value = value.trim().trim_matches('"').to_string();
        let section = sections
            .last_mut()
            .ok_or_else(|| ScenarioError::Parse { line, message: "key outside of any section".into() })?;
        if section.entries.contains_key(&key) {
            return Err(ScenarioError::Parse { line, message: format!("duplicate key `{key}`") });
        }
        section.entries.insert(key, Entry { line, value });
    }
    Ok(sections)
}

fn parse_flow(section: &mut Section, index: usize) -> Result<FlowSpec, ScenarioError> {
    let key = |k: &str| format!("flow[{index}].{k}");
    let flow_id = section.parse("id")?.unwrap_or(index as u32);
    let ac: AccessCategory = section
        .parse("ac")?
        .ok_or_else(|| ScenarioError::validation(key("ac"), "missing"))?;
    let saturated = section.parse("saturated")?.unwrap_or(false);
    let payload_bytes = section
        .parse("payload_bytes")?
        .ok_or_else(|| ScenarioError::validation(key("payload_bytes"), "missing"))?;
    let model_name: Option<String> = section.parse("model")?;
    let period_us = section.parse("period_us")?;
    let rate_fps = section.parse("rate_fps")?;
    let on_us = section.parse("on_us")?;
    let off_us = section.parse("off_us")?;
    let require = |v: Option<Micros>, k: &str| v.ok_or_else(|| ScenarioError::validation(key(k), "missing"));
    let model = match (model_name.as_deref(), saturated) {
        (None, true) => TrafficModel::Cbr { period_us: 1, payload_bytes },
        (None, false) => return Err(ScenarioError::validation(key("model"), "missing")),
        (Some("cbr"), _) => TrafficModel::Cbr { period_us: require(period_us, "period_us")?, payload_bytes },
        (Some("poisson"), _) => TrafficModel::Poisson {
            rate_fps: rate_fps.ok_or_else(|| ScenarioError::validation(key("rate_fps"), "missing"))?,
            payload_bytes,
        },
        (Some("onoff"), _) => TrafficModel::OnOff {
            on_us: require(on_us, "on_us")?,
            off_us: require(off_us, "off_us")?,
            period_us: require(period_us, "period_us")?,
            payload_bytes,
        },
        (Some(other), _) => {
            return Err(ScenarioError::validation(key("model"), format!("unknown model `{other}`")));
        }
    };
    Ok(FlowSpec {
        flow_id,
        ac,
        model,
        start_us: section.parse("start_us")?.unwrap_or(0),
        stop_us: section.parse("stop_us")?.unwrap_or(Micros::MAX),
        saturated,
    })
}

/// Parses and validates a scenario file's contents.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut scenario = Scenario::default();
    let mut flow_index = 0;
    for mut section in split_sections(text)? {
        match section.name.as_str() {
            "general" => {
                if let Some(name) = section.take("name") {
                    scenario.name = name.value;
                }
                let ms: Option<Micros> = section.parse("duration_ms")?;
                let us: Option<Micros> = section.parse("duration_us")?;
                match (ms, us) {
                    (Some(_), Some(_)) => {
                        return Err(ScenarioError::Parse {
                            line: section.line,
                            message: "give either duration_ms or duration_us, not both".into(),
                        });
                    }
                    (Some(ms), None) => scenario.duration_us = ms.saturating_mul(1000),
                    (None, Some(us)) => scenario.duration_us = us,
                    (None, None) => {}
                }
                if let Some(seed) = section.parse("seed")? {
                    scenario.seed = seed;
                }
            }
            "phy" => {
                let phy = &mut scenario.phy;
                if let Some(v) = section.parse("data_rate_mbps")? {
                    phy.data_rate_mbps = v;
                }
                if let Some(v) = section.parse("basic_rate_mbps")? {
                    phy.basic_rate_mbps = v;
                }
                if let Some(v) = section.parse("preamble_us")? {
                    phy.preamble_us = v;
                }
                if let Some(v) = section.parse("sifs_us")? {
                    phy.sifs_us = v;
                }
                if let Some(v) = section.parse("difs_us")? {
                    phy.difs_us = v;
                }
                if let Some(v) = section.parse("ber")? {
                    phy.ber = v;
                }
            }
            "scheduler" => {
                let s = &mut scenario.scheduler;
                let policy: Option<SchedulerPolicy> = section.parse("policy")?;
                if let Some(p) = policy {
                    s.policy = p;
                }
                let mut limits = AggregateLimits::default();
                if let Some(v) = section.parse("amsdu_max")? {
                    limits.amsdu_max = v;
                }
                if let Some(v) = section.parse("ampdu_max_bytes")? {
                    limits.ampdu_max_bytes = v;
                }
                if let Some(v) = section.parse("ampdu_max_mpdus")? {
                    limits.ampdu_max_mpdus = v;
                }
                s.limits = limits;
                s.q1_target_bytes = section.parse("q1_target_bytes")?.unwrap_or(limits.amsdu_max);
                if let Some(v) = section.parse("q1_timer_us")? {
                    s.q1_timer_us = v;
                }
                if let Some(v) = section.parse("q23_timer_us")? {
                    s.q23_timer_us = v;
                }
                if let Some(v) = section.parse("q2_target_mpdus")? {
                    s.q2_target_mpdus = v;
                }
                if let Some(v) = section.parse("queue_capacity")? {
                    s.queue_capacity = v;
                }
            }
            _ => {
                flow_index += 1;
                let flow = parse_flow(&mut section, flow_index)?;
                scenario.flows.push(flow);
            }
        }
        section.finish()?;
    }
    scenario.validate()?;
    Ok(scenario)
}
