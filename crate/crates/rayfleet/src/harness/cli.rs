//! Flags shared by `dprender` and `dpdrive`.

use std::path::PathBuf;

use clap::Args;
use rayfleet_core::render::RenderMode;

use super::launch::{HarnessError, RenderJob, TransportKind};
use super::scene::{base_dir, load};
use super::world::FrameSetup;
use crate::device::DeviceKind;

fn parse_size(s: &str) -> Result<[u32; 2], String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("`{s}` is not WxH"))?;
    let dim = |v: &str| v.parse::<u32>().ok().filter(|&d| d > 0).ok_or_else(|| format!("`{v}` is not a positive size"));
    Ok([dim(w)?, dim(h)?])
}

fn parse_mode(s: &str) -> Result<RenderMode, String> {
    match s {
        "raycast" => Ok(RenderMode::Raycast),
        "pathtracer" => Ok(RenderMode::PathTracer),
        _ => Err(format!("unknown renderer `{s}` (raycast|pathtracer)")),
    }
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// composite or wavefront
    #[arg(long, default_value = "wavefront")]
    pub device: DeviceKind,
    /// raycast or pathtracer
    #[arg(long, default_value = "pathtracer", value_parser = parse_mode)]
    pub renderer: RenderMode,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub ranks: u32,
    /// inproc (threads) or tcp (child processes)
    #[arg(long, default_value = "inproc")]
    pub transport: TransportKind,
    #[arg(long)]
    pub scene: PathBuf,
    /// WxH, overrides the scene
    #[arg(long, value_parser = parse_size)]
    pub size: Option<[u32; 2]>,
    #[arg(long)]
    pub spp: Option<u32>,
    #[arg(long)]
    pub bounces: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    pub fn job(&self) -> Result<RenderJob, HarnessError> {
        let scene = load(&self.scene).map_err(HarnessError::Other)?;
        let mut setup = FrameSetup::from_scene(&scene, self.renderer);
        if let Some(s) = self.size {
            setup.size = s;
        }
        if let Some(s) = self.spp {
            setup.spp = s;
        }
        if let Some(b) = self.bounces {
            setup.bounces = b;
        }
        if let Some(s) = self.seed {
            setup.seed = s;
        }
        Ok(RenderJob { device: self.device, scene, base_dir: base_dir(&self.scene), setup })
    }
}

/// Exit codes shared by the tools.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DIFF: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
