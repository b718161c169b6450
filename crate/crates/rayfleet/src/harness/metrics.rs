//! Metrics JSON: one entry per ring step, flattened across epochs.

use rayfleet_core::wavefront::FrameMetrics;
use serde::Serialize;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Doc<'a> {
    epochs: Vec<Step<'a>>,
    wall_ms: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Step<'a> {
    epoch: u32,
    kind: &'a str,
    active_rays: u64,
    step: u32,
    per_rank: Vec<PerRank>,
}

#[derive(Serialize)]
struct PerRank {
    sent: u64,
    recv: u64,
    bytes: u64,
}

pub fn to_json(m: &FrameMetrics) -> String {
    let doc = Doc {
        epochs: m
            .steps
            .iter()
            .map(|s| Step {
                epoch: s.epoch,
                kind: s.kind.as_str(),
                active_rays: s.active_rays,
                step: s.step,
                per_rank: s.per_rank.iter().map(|r| PerRank { sent: r.sent, recv: r.recv, bytes: r.bytes }).collect(),
            })
            .collect(),
        wall_ms: m.wall_ms,
    };
    serde_json::to_string_pretty(&doc).expect("metrics serialize")
}
