//! Single-rank rendering: the wave-front pipeline over a group of one.

use alloc::vec;
use alloc::vec::Vec;

use crate::camera::PerspectiveCamera;
use crate::collective::Solo;
use crate::composite::MISS_DEPTH;
use crate::lights::Lights;
use crate::scene::LocalScene;
use crate::wavefront::{render_distributed, FrameJob};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    /// Closest hit with local shading only.
    Raycast,
    PathTracer,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    pub mode: RenderMode,
    pub spp: u32,
    pub max_bounces: u32,
    pub background: [f32; 4],
    pub seed: u64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings { mode: RenderMode::Raycast, spp: 1, max_bounces: 5, background: [0.0, 0.0, 0.0, 1.0], seed: 0 }
    }
}

impl RenderSettings {
    pub fn is_valid(&self) -> bool {
        self.spp >= 1 && self.max_bounces >= 1 && self.background.iter().all(|c| c.is_finite())
    }
}

/// Linear float RGBA plus distance-to-first-hit, row-major from the bottom row.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f32; 4]>,
    pub depth: Vec<f32>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let p = width as usize * height as usize;
        FrameBuffer { width, height, color: vec![[0.0; 4]; p], depth: vec![MISS_DEPTH; p] }
    }

    pub fn pixels(&self) -> usize {
        self.color.len()
    }
}

/// Renders the whole frame from local content only.
pub fn render_local(
    scene: &LocalScene,
    camera: &PerspectiveCamera,
    lights: &Lights,
    settings: &RenderSettings,
    width: u32,
    height: u32,
) -> FrameBuffer {
    let job = FrameJob { scene, camera, lights, settings, width, height };
    // a group of one neither communicates nor overflows segment slots
    let (fb, _) = render_distributed(&mut Solo, &job, 0).expect("single-rank render cannot fail");
    fb.expect("rank 0 of one always holds the frame")
}
