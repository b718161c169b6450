//! A minimal handle/parameter/commit object model with data-parallel
//! semantics.
//!
//! Frames and worlds get a global identity from the order in which each rank
//! creates them. Everything else is local to the rank that created it.
//! `render_frame`, waiting `get_property` on a world, and the final release
//! of the device are collaborative: every rank must make the same call.

mod params;
mod snapshot;

pub use params::{digest_params, ArrayData, ElementType, Fnv1a, Handle, ParamValue};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::thread::JoinHandle;
use std::time::Instant;

use rayfleet_core::composite::CompositeContext;
use rayfleet_core::render::FrameBuffer;
use rayfleet_core::wavefront::FrameMetrics;
use rayfleet_core::Aabb;

use crate::comm::{CommError, Endpoint};
use crate::device::{self, DeviceKind, FrameResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    Device,
    Frame,
    World,
    Camera,
    Renderer,
    Surface,
    Geometry,
    Material,
    Volume,
    SpatialField,
    Light,
    Array,
}

impl ObjectKind {
    fn supports(self, subtype: &str) -> bool {
        let allowed: &[&str] = match self {
            ObjectKind::Device => &[],
            ObjectKind::Frame | ObjectKind::World | ObjectKind::Surface => &["default"],
            ObjectKind::Camera => &["perspective"],
            ObjectKind::Renderer => &["raycast", "pathtracer"],
            ObjectKind::Geometry => &["triangle", "sphere"],
            ObjectKind::Material => &["matte"],
            ObjectKind::Volume => &["transferFunction1D"],
            ObjectKind::SpatialField => &["structuredRegular"],
            ObjectKind::Light => &["directional", "ambient"],
            ObjectKind::Array => &["data"],
        };
        allowed.contains(&subtype)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaitMode {
    Wait,
    NoWait,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("unknown {kind:?} subtype {subtype:?}")]
    UnknownSubtype { kind: ObjectKind, subtype: String },
    #[error("invalid handle {0}")]
    InvalidHandle(Handle),
    #[error("handle {0} was already released")]
    DoubleRelease(Handle),
    #[error("validation failed: {0}")]
    ValidationError(String),
    #[error("ranks disagree on frame state (digests {digests:x?})")]
    ConsistencyError { digests: Vec<u64> },
    #[error("frame {0} has never been rendered")]
    NoRenderInFlight(Handle),
    #[error("unknown frame channel {0:?}")]
    UnknownChannel(String),
    #[error("transport down: {0}")]
    TransportDown(CommError),
    #[error("render failed: {0}")]
    RenderFailed(String),
}

impl From<CommError> for ApiError {
    fn from(e: CommError) -> Self {
        ApiError::TransportDown(e)
    }
}

#[derive(Clone, Debug)]
pub struct ObjectRecord {
    pub handle: Handle,
    pub kind: ObjectKind,
    pub subtype: String,
    pub staged: BTreeMap<String, ParamValue>,
    pub committed: BTreeMap<String, ParamValue>,
    pub ref_count: u32,
    /// Per-rank creation ordinal; frames and worlds only.
    pub ordinal: Option<u64>,
}

type Outcome = (Box<dyn Endpoint>, Result<FrameResult, ApiError>);

#[derive(Default)]
struct FrameState {
    /// Compositing device only: pixel ownership for this frame.
    context: Option<CompositeContext>,
    in_flight: Option<JoinHandle<Outcome>>,
    /// Last completed frame; what `map_frame` exposes.
    front: Option<FrameResult>,
    /// Error from the last render, reported once by `frame_ready`.
    failed: Option<ApiError>,
}

/// Read-only view of a mapped frame channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameView<'a> {
    pub width: u32,
    pub height: u32,
    /// False on ranks other than 0: dimensions are 0×0 and data is empty.
    pub defined: bool,
    pub data: ChannelData<'a>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelData<'a> {
    Color(&'a [[f32; 4]]),
    Depth(&'a [f32]),
}

/// The device handle every rank starts with.
pub const DEVICE: Handle = 1;

pub struct Device {
    kind: DeviceKind,
    endpoint: Option<Box<dyn Endpoint>>,
    rank: usize,
    size: usize,
    objects: HashMap<Handle, ObjectRecord>,
    frames: HashMap<Handle, FrameState>,
    bounds_cache: HashMap<Handle, [f32; 6]>,
    released: HashSet<Handle>,
    next_handle: Handle,
    next_frame_ordinal: u64,
    next_world_ordinal: u64,
    /// Frame whose render currently owns the endpoint.
    busy: Option<Handle>,
    device_refs: u32,
}

impl Device {
    pub fn new(endpoint: Box<dyn Endpoint>, kind: DeviceKind) -> Device {
        let rank = endpoint.rank();
        let size = endpoint.size();
        Device {
            kind,
            endpoint: Some(endpoint),
            rank,
            size,
            objects: HashMap::new(),
            frames: HashMap::new(),
            bounds_cache: HashMap::new(),
            released: HashSet::new(),
            next_handle: DEVICE + 1,
            next_frame_ordinal: 0,
            next_world_ordinal: 0,
            busy: None,
            device_refs: 1,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> DeviceKind {
        self.kind
    }

    fn alive(&self) -> Result<(), ApiError> {
        if self.device_refs == 0 {
            Err(ApiError::InvalidHandle(DEVICE))
        } else {
            Ok(())
        }
    }

    fn record(&self, h: Handle) -> Result<&ObjectRecord, ApiError> {
        self.alive()?;
        self.objects.get(&h).ok_or(ApiError::InvalidHandle(h))
    }

    fn record_mut(&mut self, h: Handle) -> Result<&mut ObjectRecord, ApiError> {
        self.alive()?;
        self.objects.get_mut(&h).ok_or(ApiError::InvalidHandle(h))
    }

    pub fn object(&self, h: Handle) -> Result<&ObjectRecord, ApiError> {
        self.record(h)
    }

    /// Local only; frames and worlds take the next creation ordinal.
    pub fn new_object(&mut self, kind: ObjectKind, subtype: &str) -> Result<Handle, ApiError> {
        self.alive()?;
        if !kind.supports(subtype) {
            return Err(ApiError::UnknownSubtype { kind, subtype: subtype.to_string() });
        }
        let ordinal = match kind {
            ObjectKind::Frame => {
                self.next_frame_ordinal += 1;
                Some(self.next_frame_ordinal - 1)
            }
            ObjectKind::World => {
                self.next_world_ordinal += 1;
                Some(self.next_world_ordinal - 1)
            }
            _ => None,
        };
        let handle = self.next_handle;
        self.next_handle += 1;
        self.objects.insert(
            handle,
            ObjectRecord {
                handle,
                kind,
                subtype: subtype.to_string(),
                staged: BTreeMap::new(),
                committed: BTreeMap::new(),
                ref_count: 1,
                ordinal,
            },
        );
        if kind == ObjectKind::Frame {
            self.frames.insert(handle, FrameState::default());
        }
        Ok(handle)
    }

    pub fn set_parameter(&mut self, h: Handle, name: &str, value: ParamValue) -> Result<(), ApiError> {
        self.record_mut(h)?.staged.insert(name.to_string(), value);
        Ok(())
    }

    pub fn unset_parameter(&mut self, h: Handle, name: &str) -> Result<(), ApiError> {
        self.record_mut(h)?.staged.remove(name);
        Ok(())
    }

    /// Local only. A frame commit that changes the size resizes the frame's
    /// compositing context on the compositing device.
    pub fn commit_parameters(&mut self, h: Handle) -> Result<(), ApiError> {
        let rec = self.record(h)?;
        let mut merged = rec.committed.clone();
        merged.extend(rec.staged.iter().map(|(k, v)| (k.clone(), v.clone())));
        let size = if rec.kind == ObjectKind::Frame { frame_size(&merged)? } else { None };
        let rec = self.record_mut(h)?;
        rec.committed = merged;
        rec.staged.clear();
        if let (Some((w, h_px)), DeviceKind::Composite) = (size, self.kind) {
            let ranks = self.size;
            let state = self.frames.get_mut(&h).expect("frames have state");
            match &mut state.context {
                Some(ctx) => {
                    ctx.resize(w, h_px);
                }
                None => state.context = Some(CompositeContext::new(w, h_px, ranks)),
            }
        }
        Ok(())
    }

    /// The compositing context bound to `frame`, if this is a compositing
    /// device and the frame has a committed size.
    pub fn composite_context(&self, frame: Handle) -> Option<&CompositeContext> {
        self.frames.get(&frame)?.context.as_ref()
    }

    pub fn retain(&mut self, h: Handle) -> Result<(), ApiError> {
        if h == DEVICE {
            self.alive()?;
            self.device_refs += 1;
            return Ok(());
        }
        self.record_mut(h)?.ref_count += 1;
        Ok(())
    }

    /// Local, except the device's last reference: that one is collaborative
    /// and returns once every rank has released it.
    pub fn release(&mut self, h: Handle) -> Result<(), ApiError> {
        if h == DEVICE {
            if self.device_refs == 0 {
                return Err(ApiError::DoubleRelease(DEVICE));
            }
            self.device_refs -= 1;
            if self.device_refs > 0 {
                return Ok(());
            }
            return self.teardown();
        }
        if self.released.contains(&h) {
            return Err(ApiError::DoubleRelease(h));
        }
        let rec = self.record_mut(h)?;
        rec.ref_count -= 1;
        if rec.ref_count > 0 {
            return Ok(());
        }
        if self.busy == Some(h) {
            self.finish_render()?;
        }
        self.objects.remove(&h);
        self.frames.remove(&h);
        self.bounds_cache.remove(&h);
        self.released.insert(h);
        Ok(())
    }

    fn teardown(&mut self) -> Result<(), ApiError> {
        let pending = self.finish_render();
        let mut ep = self.endpoint.take().expect("endpoint is home when idle");
        let barrier = ep.barrier();
        ep.shutdown();
        self.objects.clear();
        self.frames.clear();
        pending?;
        barrier.map_err(ApiError::from)
    }

    /// Joins the render holding the endpoint, if any, and files its result.
    fn finish_render(&mut self) -> Result<(), ApiError> {
        let Some(frame) = self.busy.take() else {
            return Ok(());
        };
        let state = self.frames.get_mut(&frame).expect("busy frame has state");
        let worker = state.in_flight.take().expect("busy frame has a worker");
        let (ep, result) = worker.join().map_err(|_| ApiError::RenderFailed("render worker panicked".into()))?;
        self.endpoint = Some(ep);
        match result {
            Ok(r) => state.front = Some(r),
            Err(e) => state.failed = Some(e),
        }
        Ok(())
    }

    fn endpoint(&mut self) -> Result<&mut Box<dyn Endpoint>, ApiError> {
        self.finish_render()?;
        Ok(self.endpoint.as_mut().expect("endpoint is home when idle"))
    }

    fn handle_token(&self, h: Handle) -> Vec<u8> {
        match self.objects.get(&h) {
            Some(r) => {
                let mut t = vec![r.kind as u8];
                if let Some(o) = r.ordinal {
                    t.extend_from_slice(&o.to_le_bytes());
                }
                t
            }
            None => vec![0xFF],
        }
    }

    /// Digest of the committed frame, renderer and camera, plus the frame's
    /// creation ordinal.
    fn frame_digest(&self, frame: &ObjectRecord) -> u64 {
        let token = |h: Handle| self.handle_token(h);
        let mut hash = Fnv1a::default();
        hash.write(&frame.ordinal.unwrap_or(0).to_le_bytes());
        digest_params(&mut hash, &frame.subtype, &frame.committed, &token);
        for name in ["renderer", "camera"] {
            match frame.committed.get(name).and_then(|v| match v {
                ParamValue::Object(h) => self.objects.get(h),
                _ => None,
            }) {
                Some(r) => digest_params(&mut hash, &r.subtype, &r.committed, &token),
                None => hash.write(&[0xFF]),
            }
        }
        hash.finish()
    }

    /// Collaborative: barriers all ranks, checks they agree on the frame,
    /// then starts rendering on a worker. Collect with [`Device::frame_ready`].
    pub fn render_frame(&mut self, frame: Handle) -> Result<(), ApiError> {
        let rec = self.record(frame)?;
        if rec.kind != ObjectKind::Frame {
            return Err(ApiError::InvalidHandle(frame));
        }
        self.finish_render()?;
        let rec = self.record(frame)?;
        let digest = self.frame_digest(rec);
        let job = snapshot::build_job(&self.objects, rec);
        let mut msg = vec![job.is_ok() as u8];
        msg.extend_from_slice(&digest.to_le_bytes());
        let parts = self.endpoint()?.all_gather(msg)?;
        let mut digests = Vec::with_capacity(parts.len());
        let mut all_ok = true;
        for p in &parts {
            if p.len() != 9 {
                return Err(ApiError::TransportDown(CommError::Usage("malformed render handshake".into())));
            }
            all_ok &= p[0] == 1;
            digests.push(u64::from_le_bytes(p[1..].try_into().unwrap()));
        }
        let job = job?;
        if !all_ok {
            return Err(ApiError::ValidationError("another rank rejected its frame state".into()));
        }
        if digests.iter().any(|&d| d != digests[0]) {
            return Err(ApiError::ConsistencyError { digests });
        }
        let kind = self.kind;
        let context = self.frames[&frame].context;
        let mut ep = self.endpoint.take().expect("endpoint is home when idle");
        let worker = std::thread::Builder::new()
            .name(format!("rayfleet-render-{}", self.rank))
            .spawn(move || {
                let start = Instant::now();
                let mut result = device::render(kind, &mut *ep, &job, context.as_ref());
                if let Ok(r) = &mut result {
                    if let Some(m) = &mut r.metrics {
                        m.wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    }
                }
                (ep, result)
            })
            .map_err(|e| ApiError::RenderFailed(e.to_string()))?;
        let state = self.frames.get_mut(&frame).expect("frames have state");
        state.in_flight = Some(worker);
        state.failed = None;
        self.busy = Some(frame);
        Ok(())
    }

    /// `Wait` blocks until this rank's part of the frame, gather included,
    /// is done. A render that failed reports its error here, once.
    pub fn frame_ready(&mut self, frame: Handle, mode: WaitMode) -> Result<bool, ApiError> {
        let rec = self.record(frame)?;
        if rec.kind != ObjectKind::Frame {
            return Err(ApiError::InvalidHandle(frame));
        }
        if self.busy == Some(frame) {
            let finished = self.frames[&frame].in_flight.as_ref().is_none_or(|w| w.is_finished());
            if mode == WaitMode::NoWait && !finished {
                return Ok(false);
            }
            self.finish_render()?;
        }
        let state = self.frames.get_mut(&frame).expect("frames have state");
        if let Some(e) = state.failed.take() {
            return Err(e);
        }
        if state.front.is_none() {
            return Err(ApiError::NoRenderInFlight(frame));
        }
        Ok(true)
    }

    /// The last completed frame. Rank 0 sees the whole image; other ranks get
    /// an undefined 0×0 view.
    pub fn map_frame(&self, frame: Handle, channel: &str) -> Result<FrameView<'_>, ApiError> {
        let rec = self.record(frame)?;
        if rec.kind != ObjectKind::Frame {
            return Err(ApiError::InvalidHandle(frame));
        }
        let empty = |data| FrameView { width: 0, height: 0, defined: false, data };
        let fb = self.frames[&frame].front.as_ref().and_then(|f| f.frame.as_ref());
        match channel {
            "color" => Ok(match fb {
                Some(fb) => FrameView { width: fb.width, height: fb.height, defined: true, data: ChannelData::Color(&fb.color) },
                None => empty(ChannelData::Color(&[])),
            }),
            "depth" => Ok(match fb {
                Some(fb) => FrameView { width: fb.width, height: fb.height, defined: true, data: ChannelData::Depth(&fb.depth) },
                None => empty(ChannelData::Depth(&[])),
            }),
            other => Err(ApiError::UnknownChannel(other.to_string())),
        }
    }

    /// Application side channel over the device's group, for drivers that
    /// broadcast their own commands. Waits for any render in flight.
    pub fn broadcast(&mut self, root: usize, bytes: Vec<u8>) -> Result<Vec<u8>, ApiError> {
        Ok(self.endpoint()?.broadcast(root, bytes)?)
    }

    /// The whole last frame buffer, rank 0 only.
    pub fn frame_buffer(&self, frame: Handle) -> Option<&FrameBuffer> {
        self.frames.get(&frame)?.front.as_ref()?.frame.as_ref()
    }

    /// Exchange counters of the last completed frame, rank 0 only.
    pub fn frame_metrics(&self, frame: Handle) -> Option<&FrameMetrics> {
        self.frames.get(&frame)?.front.as_ref()?.metrics.as_ref()
    }

    /// World `"bounds"` with `Wait` is collaborative and identical on every
    /// rank; with `NoWait` it returns the last such answer, if any.
    pub fn get_property(&mut self, h: Handle, name: &str, mode: WaitMode) -> Result<Option<ParamValue>, ApiError> {
        let rec = self.record(h)?;
        match (rec.kind, name) {
            (ObjectKind::World, "bounds") => {
                if mode == WaitMode::NoWait {
                    return Ok(self.bounds_cache.get(&h).map(|b| ParamValue::Box3(*b)));
                }
                let local = snapshot::world_bounds(&self.objects, rec).unwrap_or(Aabb::EMPTY);
                let mut bytes = Vec::with_capacity(24);
                for v in local.min.to_array().into_iter().chain(local.max.to_array()) {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                let parts = self.endpoint()?.all_gather(bytes)?;
                let mut out = Aabb::EMPTY;
                for p in parts {
                    let f: Vec<f32> = p.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
                    if f.len() != 6 {
                        return Err(ApiError::TransportDown(CommError::Usage("malformed bounds".into())));
                    }
                    out = out.union(Aabb::new(
                        rayfleet_core::Vec3::new(f[0], f[1], f[2]),
                        rayfleet_core::Vec3::new(f[3], f[4], f[5]),
                    ));
                }
                let b = [out.min.x, out.min.y, out.min.z, out.max.x, out.max.y, out.max.z];
                self.bounds_cache.insert(h, b);
                Ok(Some(ParamValue::Box3(b)))
            }
            (ObjectKind::Geometry | ObjectKind::Surface, "bounds") => {
                Ok(snapshot::local_bounds(&self.objects, rec).map(|b| {
                    ParamValue::Box3([b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z])
                }))
            }
            _ => Ok(None),
        }
    }
}

impl Drop for Device {
    fn drop(&mut self) {
        // a device dropped without its final release still hands the
        // endpoint back and closes it, but does not synchronise
        let _ = self.finish_render();
        if let Some(ep) = self.endpoint.as_mut() {
            ep.shutdown();
        }
    }
}

fn frame_size(params: &BTreeMap<String, ParamValue>) -> Result<Option<(u32, u32)>, ApiError> {
    match params.get("size") {
        None => Ok(None),
        Some(ParamValue::Int2([w, h])) if *w > 0 && *h > 0 && *w <= u32::MAX as i64 && *h <= u32::MAX as i64 => {
            Ok(Some((*w as u32, *h as u32)))
        }
        Some(v) => Err(ApiError::ValidationError(format!("frame size must be two positive integers, got {v:?}"))),
    }
}
