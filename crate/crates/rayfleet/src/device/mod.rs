//! The two rendering back-ends behind [`crate::api::Device`].

mod composite;
mod wavefront;

use rayfleet_core::camera::PerspectiveCamera;
use rayfleet_core::composite::CompositeContext;
use rayfleet_core::lights::Lights;
use rayfleet_core::render::{FrameBuffer, RenderSettings};
use rayfleet_core::scene::LocalScene;
use rayfleet_core::wavefront::{FrameJob, FrameMetrics};

use crate::api::ApiError;
use crate::comm::Endpoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviceKind {
    /// Render locally, then deep-composite one fragment per rank per pixel.
    Composite,
    /// Forward ray wave-fronts around the ring so every ray sees every rank.
    Wavefront,
}

impl std::str::FromStr for DeviceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "composite" => Ok(DeviceKind::Composite),
            "wavefront" => Ok(DeviceKind::Wavefront),
            _ => Err(format!("unknown device {s:?} (expected composite or wavefront)")),
        }
    }
}

/// Immutable inputs of one frame on one rank.
#[derive(Debug)]
pub struct RenderJob {
    pub scene: LocalScene,
    pub camera: PerspectiveCamera,
    pub lights: Lights,
    pub settings: RenderSettings,
    pub width: u32,
    pub height: u32,
}

impl RenderJob {
    pub fn frame_job(&self) -> FrameJob<'_> {
        FrameJob {
            scene: &self.scene,
            camera: &self.camera,
            lights: &self.lights,
            settings: &self.settings,
            width: self.width,
            height: self.height,
        }
    }
}

/// What rank 0 keeps of a finished frame; other ranks hold `None`s.
#[derive(Clone, Debug, Default)]
pub struct FrameResult {
    pub frame: Option<FrameBuffer>,
    pub metrics: Option<FrameMetrics>,
}

pub(crate) fn render(
    kind: DeviceKind,
    comm: &mut dyn Endpoint,
    job: &RenderJob,
    context: Option<&CompositeContext>,
) -> Result<FrameResult, ApiError> {
    match kind {
        DeviceKind::Composite => composite::render(comm, job, context),
        DeviceKind::Wavefront => wavefront::render(comm, job),
    }
}
