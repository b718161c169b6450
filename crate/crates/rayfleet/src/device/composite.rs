//! Pass-through compositing: each rank renders what it holds, then one
//! RGBA-z fragment per rank per pixel is depth-composited by the pixel's
//! owner and the spans are gathered at rank 0.

use rayfleet_core::composite::{build_fragments, composite_and_gather, CompositeContext};
use rayfleet_core::render::render_local;
use rayfleet_core::wavefront::FrameMetrics;

use super::{FrameResult, RenderJob};
use crate::api::ApiError;
use crate::comm::Endpoint;

pub(super) fn render(comm: &mut dyn Endpoint, job: &RenderJob, context: Option<&CompositeContext>) -> Result<FrameResult, ApiError> {
    let fresh;
    let ctx = match context {
        Some(c) if c.width == job.width && c.height == job.height && c.ranks == comm.size() => c,
        _ => {
            fresh = CompositeContext::new(job.width, job.height, comm.size());
            &fresh
        }
    };
    let local = render_local(&job.scene, &job.camera, &job.lights, &job.settings, job.width, job.height);
    let fragments = build_fragments(&local.color, &local.depth).map_err(|e| ApiError::RenderFailed(e.to_string()))?;
    let frame = composite_and_gather(comm, ctx, &fragments, job.settings.background, 0)?;
    let metrics = frame.as_ref().map(|_| FrameMetrics::default());
    Ok(FrameResult { frame, metrics })
}
