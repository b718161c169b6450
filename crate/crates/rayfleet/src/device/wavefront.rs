//! Ray forwarding: the whole frame is traced cooperatively and each rank
//! accumulates the pixels it is home to.

use rayfleet_core::wavefront::{gather_metrics, render_distributed, TraceError};

use super::{FrameResult, RenderJob};
use crate::api::ApiError;
use crate::comm::Endpoint;

pub(super) fn render(comm: &mut dyn Endpoint, job: &RenderJob) -> Result<FrameResult, ApiError> {
    let (frame, log) = render_distributed(comm, &job.frame_job(), 0).map_err(|e| match e {
        TraceError::Comm(c) => ApiError::TransportDown(c),
        other => ApiError::RenderFailed(other.to_string()),
    })?;
    let metrics = gather_metrics(comm, &log, 0)?;
    Ok(FrameResult { frame, metrics })
}
