//! Data-parallel path tracing by ray forwarding.
//!
//! Each rank holds part of the scene and is home to a span of pixels. Rays are
//! processed in wave-fronts, one per bounce. A trace epoch runs N lock-step
//! rounds of "intersect against local data, pass the batch to the next rank",
//! so every ray meets every rank exactly once and returns home carrying its
//! globally closest hit. Shading happens at home, where the pixel's radiance
//! accumulates without further communication.
//!
//! Results do not depend on the rank count or on which rank holds which
//! primitive: random numbers are keyed by (pixel, sample, bounce, dimension),
//! closest hits are a min-reduction with id tie-break, volume samples sit at
//! globally aligned positions, and per-brick volume results are combined in
//! depth order at home.

mod epoch;
mod kernels;
mod pipeline;
mod ray;

pub use epoch::{occlusion_epoch, trace_epoch, EpochKind, EpochLog, EpochRecord, StepRecord};
pub use kernels::{
    composite_segments, generate_primary, local_process_path, local_process_shadow, resolve_shadows,
    shade_and_bounce, shade_raycast, DistributedAccum, Phase, VolumeComposite, RR_START_BOUNCE,
};
pub use pipeline::{gather_frame, gather_metrics, render_distributed, render_span, FrameJob, FrameMetrics, RankStep};
pub use ray::{PathRay, RayRecord, ShadowRay, WaveFront, WaveKind, WireError, PATH_RAY_BASE_BYTES, SHADOW_RAY_BASE_BYTES};

use alloc::string::String;

use crate::collective::CommError;

#[derive(Clone, Debug, PartialEq)]
pub enum TraceError {
    Comm(CommError),
    /// A ray accumulated more volume segments than its record can carry.
    SegmentOverflow { pixel: u32, capacity: usize },
    Wire(String),
}

impl From<CommError> for TraceError {
    fn from(e: CommError) -> Self {
        TraceError::Comm(e)
    }
}

impl From<WireError> for TraceError {
    fn from(e: WireError) -> Self {
        TraceError::Wire(alloc::format!("{e}"))
    }
}

impl core::fmt::Display for TraceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TraceError::Comm(e) => write!(f, "{e}"),
            TraceError::SegmentOverflow { pixel, capacity } => {
                write!(f, "ray for pixel {pixel} exceeded {capacity} volume segments")
            }
            TraceError::Wire(msg) => write!(f, "malformed wave-front: {msg}"),
        }
    }
}
