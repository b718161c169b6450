//! Whole-frame driver: samples, bounces, epochs, and the gather at the root.

use alloc::vec::Vec;

use super::epoch::{occlusion_epoch, trace_epoch, EpochKind, EpochLog, StepRecord};
use super::kernels::{generate_primary, shade_and_bounce, shade_raycast, DistributedAccum, Phase};
use super::TraceError;
use crate::camera::PerspectiveCamera;
use crate::collective::{all_reduce_sum, Collective, CommError};
use crate::composite::{Fragment, FRAGMENT_BYTES};
use crate::lights::Lights;
use crate::render::{FrameBuffer, RenderMode, RenderSettings};
use crate::scene::LocalScene;
use crate::span::PixelSpan;

/// Everything one rank needs to take part in a frame.
#[derive(Clone, Copy, Debug)]
pub struct FrameJob<'a> {
    pub scene: &'a LocalScene,
    pub camera: &'a PerspectiveCamera,
    /// Must be identical on every rank; shading happens at the home rank.
    pub lights: &'a Lights,
    pub settings: &'a RenderSettings,
    pub width: u32,
    pub height: u32,
}

/// Renders this rank's owned pixels. Collaborative: every rank must call it
/// with the same settings, camera and resolution.
pub fn render_span<C: Collective + ?Sized>(
    comm: &mut C,
    job: &FrameJob<'_>,
    log: &mut EpochLog,
) -> Result<DistributedAccum, TraceError> {
    let pixels = job.width as usize * job.height as usize;
    let span = PixelSpan::owned(comm.rank(), comm.size(), pixels);
    // one segment slot per brick in the whole world bounds what a ray collects
    let capacity = all_reduce_sum(comm, job.scene.bricks.len() as u64)? as usize;
    let mut accum = DistributedAccum::new(span);
    let s = job.settings;
    for sample in 0..s.spp {
        let mut wave = generate_primary(job.camera, span, job.width, job.height, sample, s.seed);
        loop {
            let active = all_reduce_sum(comm, wave.len() as u64)?;
            if active == 0 {
                break;
            }
            wave = trace_epoch(comm, job.scene, wave, Phase::Surfaces, capacity, active, log)?;
            if capacity > 0 {
                wave = trace_epoch(comm, job.scene, wave, Phase::Volumes, capacity, active, log)?;
            }
            match s.mode {
                RenderMode::Raycast => {
                    shade_raycast(&mut wave, job.lights, s, &mut accum);
                    break;
                }
                RenderMode::PathTracer => {
                    let (next, shadows) = shade_and_bounce(&mut wave, job.lights, s, &mut accum);
                    let active_shadows = all_reduce_sum(comm, shadows.len() as u64)?;
                    if active_shadows > 0 {
                        occlusion_epoch(comm, job.scene, shadows, capacity, active_shadows, log, &mut accum)?;
                    }
                    wave = next;
                }
            }
        }
        accum.sample_count += 1;
    }
    Ok(accum)
}

/// Ships every rank's resolved span to `root` (20 bytes per pixel: RGBA then
/// depth) and assembles the frame there.
pub fn gather_frame<C: Collective + ?Sized>(
    comm: &mut C,
    accum: &DistributedAccum,
    width: u32,
    height: u32,
    root: usize,
) -> Result<Option<FrameBuffer>, CommError> {
    let mut payload = Vec::with_capacity(accum.span.len() * FRAGMENT_BYTES);
    for i in 0..accum.span.len() {
        Fragment { rgba: accum.resolved(i), z: accum.depth[i] }.encode_into(&mut payload);
    }
    let n = comm.size();
    let Some(parts) = comm.gather_to(root, payload)? else {
        return Ok(None);
    };
    let pixels = width as usize * height as usize;
    let mut fb = FrameBuffer::new(width, height);
    for (src, bytes) in parts.iter().enumerate() {
        let span = PixelSpan::owned(src, n, pixels);
        if bytes.len() != span.len() * FRAGMENT_BYTES {
            return Err(CommError::TransportDown {
                peer: Some(src),
                reason: alloc::format!("gathered span has {} bytes, expected {}", bytes.len(), span.len() * FRAGMENT_BYTES),
            });
        }
        for (i, chunk) in bytes.chunks_exact(FRAGMENT_BYTES).enumerate() {
            let f = Fragment::decode(chunk);
            fb.color[span.start + i] = f.rgba;
            fb.depth[span.start + i] = f.z;
        }
    }
    Ok(Some(fb))
}

/// Renders and gathers; the frame is `Some` only at `root`.
pub fn render_distributed<C: Collective + ?Sized>(
    comm: &mut C,
    job: &FrameJob<'_>,
    root: usize,
) -> Result<(Option<FrameBuffer>, EpochLog), TraceError> {
    let mut log = EpochLog::default();
    let accum = render_span(comm, job, &mut log)?;
    let fb = gather_frame(comm, &accum, job.width, job.height, root)?;
    Ok((fb, log))
}

/// One ring step of one epoch, with every rank's counters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankStep {
    pub epoch: u32,
    pub kind: EpochKind,
    pub active_rays: u64,
    pub step: u32,
    pub per_rank: Vec<StepRecord>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameMetrics {
    pub steps: Vec<RankStep>,
    /// Filled in by whoever owns a clock.
    pub wall_ms: f64,
}

impl FrameMetrics {
    /// Total rays sent by all ranks during epoch `epoch`.
    pub fn sent_in_epoch(&self, epoch: u32) -> u64 {
        self.steps.iter().filter(|s| s.epoch == epoch).flat_map(|s| &s.per_rank).map(|r| r.sent).sum()
    }

    pub fn epoch_count(&self) -> u32 {
        self.steps.last().map_or(0, |s| s.epoch + 1)
    }
}

fn kind_code(kind: EpochKind) -> u8 {
    match kind {
        EpochKind::Path => 0,
        EpochKind::Volume => 1,
        EpochKind::Shadow => 2,
    }
}

/// Collects every rank's epoch log at `root`. Logs line up because epochs run
/// in lock-step.
pub fn gather_metrics<C: Collective + ?Sized>(
    comm: &mut C,
    log: &EpochLog,
    root: usize,
) -> Result<Option<FrameMetrics>, CommError> {
    let mut payload = Vec::new();
    for e in &log.epochs {
        payload.push(kind_code(e.kind));
        payload.extend_from_slice(&e.active_rays.to_le_bytes());
        payload.extend_from_slice(&(e.steps.len() as u32).to_le_bytes());
        for s in &e.steps {
            for v in [s.sent, s.recv, s.bytes] {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let Some(parts) = comm.gather_to(root, payload)? else {
        return Ok(None);
    };
    let mut steps: Vec<RankStep> = Vec::new();
    let malformed = |src| CommError::TransportDown { peer: Some(src), reason: "malformed metrics".into() };
    for (src, bytes) in parts.iter().enumerate() {
        let mut rest: &[u8] = bytes;
        let mut take = |n: usize| -> Result<&[u8], CommError> {
            if rest.len() < n {
                return Err(malformed(src));
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            Ok(head)
        };
        let u64_of = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
        let mut row = 0usize;
        let mut epoch = 0u32;
        let mut remaining = bytes.len();
        while remaining > 0 {
            let kind = match take(1)?[0] {
                0 => EpochKind::Path,
                1 => EpochKind::Volume,
                2 => EpochKind::Shadow,
                _ => return Err(malformed(src)),
            };
            let active_rays = u64_of(take(8)?);
            let nsteps = u32::from_le_bytes(take(4)?.try_into().unwrap());
            for step in 0..nsteps {
                let rec = StepRecord { sent: u64_of(take(8)?), recv: u64_of(take(8)?), bytes: u64_of(take(8)?) };
                if src == 0 {
                    steps.push(RankStep { epoch, kind, active_rays, step, per_rank: Vec::with_capacity(parts.len()) });
                }
                let slot = steps.get_mut(row).ok_or_else(|| malformed(src))?;
                if slot.epoch != epoch || slot.step != step || slot.kind != kind {
                    return Err(malformed(src));
                }
                slot.per_rank.push(rec);
                row += 1;
            }
            remaining -= 13 + 24 * nsteps as usize;
            epoch += 1;
        }
        if row != steps.len() {
            return Err(malformed(src));
        }
    }
    Ok(Some(FrameMetrics { steps, wall_ms: 0.0 }))
}
