//! Trace epochs: N lock-step rounds of local processing and ring forwarding.

use alloc::vec::Vec;

use super::kernels::{local_process_path, local_process_shadow, resolve_shadows, DistributedAccum, Phase};
use super::ray::{PathRay, RayRecord, ShadowRay, WaveFront};
use super::TraceError;
use crate::collective::Collective;
use crate::scene::LocalScene;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpochKind {
    Path,
    /// Second pass over path rays marching volume bricks up to the resolved hit.
    Volume,
    Shadow,
}

impl EpochKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EpochKind::Path => "path",
            EpochKind::Volume => "volume",
            EpochKind::Shadow => "shadow",
        }
    }
}

/// What this rank sent and received in one ring step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepRecord {
    pub sent: u64,
    pub recv: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochRecord {
    pub kind: EpochKind,
    /// Rays in flight across all ranks when the epoch began.
    pub active_rays: u64,
    pub steps: Vec<StepRecord>,
}

/// This rank's per-epoch counters for one frame.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EpochLog {
    pub epochs: Vec<EpochRecord>,
}

fn ring_epoch<R, C, F>(
    comm: &mut C,
    mut rays: Vec<R>,
    capacity: usize,
    kind: EpochKind,
    active_rays: u64,
    log: &mut EpochLog,
    mut process: F,
) -> Result<Vec<R>, TraceError>
where
    R: RayRecord,
    C: Collective + ?Sized,
    F: FnMut(&mut [R]) -> Result<(), TraceError>,
{
    let n = comm.size();
    let mut steps = Vec::with_capacity(n);
    for step in 0..n {
        process(&mut rays)?;
        let mut wave = WaveFront::new(capacity, rays);
        wave.epoch_step = step as u32;
        let sent = wave.len() as u64;
        if n == 1 {
            // forwarding to ourselves: skip the copy, count what would travel
            let bytes = 16 + wave.len() * R::record_size(capacity);
            steps.push(StepRecord { sent, recv: sent, bytes: bytes as u64 });
            rays = wave.rays;
            continue;
        }
        let bytes = wave.encode();
        let len = bytes.len() as u64;
        let received = comm.ring_forward(bytes)?;
        let wave = WaveFront::<R>::decode(&received, capacity)?;
        steps.push(StepRecord { sent, recv: wave.len() as u64, bytes: len });
        rays = wave.rays;
    }
    log.epochs.push(EpochRecord { kind, active_rays, steps });
    Ok(rays)
}

/// Resolves a path wave-front globally: every ray meets every rank once and
/// ends up back at its home rank.
///
/// `active_rays` is the global wave-front size; callers already all-reduce it
/// to decide whether to run the epoch at all.
pub fn trace_epoch<C: Collective + ?Sized>(
    comm: &mut C,
    scene: &LocalScene,
    rays: Vec<PathRay>,
    phase: Phase,
    capacity: usize,
    active_rays: u64,
    log: &mut EpochLog,
) -> Result<Vec<PathRay>, TraceError> {
    let kind = match phase {
        Phase::Surfaces => EpochKind::Path,
        Phase::Volumes => EpochKind::Volume,
    };
    ring_epoch(comm, rays, capacity, kind, active_rays, log, |batch| {
        local_process_path(scene, batch, phase, capacity)
    })
}

/// Circulates shadow rays and adds the surviving light at home.
pub fn occlusion_epoch<C: Collective + ?Sized>(
    comm: &mut C,
    scene: &LocalScene,
    rays: Vec<ShadowRay>,
    capacity: usize,
    active_rays: u64,
    log: &mut EpochLog,
    accum: &mut DistributedAccum,
) -> Result<(), TraceError> {
    let mut rays = ring_epoch(comm, rays, capacity, EpochKind::Shadow, active_rays, log, |batch| {
        local_process_shadow(scene, batch, capacity)
    })?;
    resolve_shadows(&mut rays, accum);
    Ok(())
}
