//! Ray records and their fixed-size little-endian wire layout.

use alloc::vec::Vec;

use crate::geometry::{Ray, RAY_T_MIN};
use crate::math::Vec3;
use crate::volume::{Segment, ShadowSegment};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireError {
    Truncated { needed: usize, available: usize },
    WrongKind { expected: u8, found: u8 },
    CapacityMismatch { expected: u32, found: u32 },
    SegmentCount { count: u8, capacity: usize },
}

impl core::fmt::Display for WireError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            WireError::Truncated { needed, available } => write!(f, "need {needed} bytes, have {available}"),
            WireError::WrongKind { expected, found } => write!(f, "expected wave kind {expected}, found {found}"),
            WireError::CapacityMismatch { expected, found } => {
                write!(f, "segment capacity {found} does not match {expected}")
            }
            WireError::SegmentCount { count, capacity } => write!(f, "{count} segments exceed capacity {capacity}"),
        }
    }
}

struct Writer<'a>(&'a mut Vec<u8>);

impl Writer<'_> {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: Vec3) {
        self.f32(v.x);
        self.f32(v.y);
        self.f32(v.z);
    }
    fn zeros(&mut self, n: usize) {
        self.0.resize(self.0.len() + n, 0);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, at: 0 }
    }
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.at..self.at + N]);
        self.at += N;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
    fn vec3(&mut self) -> Vec3 {
        Vec3::new(self.f32(), self.f32(), self.f32())
    }
    fn skip(&mut self, n: usize) {
        self.at += n;
    }
}

/// A path-tracing ray plus everything it learns on its trip around the ring.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRay {
    pub pixel: u32,
    pub sample: u32,
    pub bounce: u8,
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_min: f32,
    pub t_max: f32,
    pub throughput: Vec3,
    /// `+inf` exactly when `best_prim == u64::MAX`.
    pub best_t: f32,
    pub best_prim: u64,
    pub hit_normal: Vec3,
    pub hit_albedo: Vec3,
    pub hit_emission: Vec3,
    pub hit_opacity: f32,
    pub segments: Vec<Segment>,
}

impl PathRay {
    pub fn new(pixel: u32, sample: u32, bounce: u8, ray: Ray, throughput: Vec3) -> Self {
        PathRay {
            pixel,
            sample,
            bounce,
            origin: ray.origin,
            dir: ray.dir,
            t_min: ray.t_min,
            t_max: ray.t_max,
            throughput,
            best_t: f32::INFINITY,
            best_prim: u64::MAX,
            hit_normal: Vec3::ZERO,
            hit_albedo: Vec3::ZERO,
            hit_emission: Vec3::ZERO,
            hit_opacity: 0.0,
            segments: Vec::new(),
        }
    }

    pub fn ray(&self) -> Ray {
        Ray { origin: self.origin, dir: self.dir, t_min: self.t_min, t_max: self.t_max }
    }

    pub fn has_hit(&self) -> bool {
        self.best_prim != u64::MAX
    }
}

/// Visibility query toward the directional light.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowRay {
    pub pixel: u32,
    pub contribution: Vec3,
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_max: f32,
    /// Zero once any rank reports an opaque blocker; otherwise one until the
    /// home rank folds in the volume segments.
    pub transmittance: Vec3,
    pub segments: Vec<ShadowSegment>,
}

impl ShadowRay {
    pub fn new(pixel: u32, contribution: Vec3, origin: Vec3, dir: Vec3) -> Self {
        ShadowRay {
            pixel,
            contribution,
            origin,
            dir,
            t_max: f32::INFINITY,
            transmittance: Vec3::ONE,
            segments: Vec::new(),
        }
    }

    pub fn ray(&self) -> Ray {
        Ray { origin: self.origin, dir: self.dir, t_min: RAY_T_MIN, t_max: self.t_max }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WaveKind {
    Path = 1,
    Shadow = 2,
}

/// Serialization of one ray into a fixed-size record. The record size depends
/// on the run's segment capacity, which every rank agrees on.
pub trait RayRecord: Sized {
    const KIND: WaveKind;
    fn record_size(capacity: usize) -> usize;
    fn encode(&self, capacity: usize, out: &mut Vec<u8>);
    fn decode(bytes: &[u8], capacity: usize) -> Result<Self, WireError>;
}

/// Fixed part of a [`PathRay`] record; each segment slot adds 28 bytes.
pub const PATH_RAY_BASE_BYTES: usize = 108;
const PATH_SEGMENT_BYTES: usize = 28;
/// Fixed part of a [`ShadowRay`] record; each segment slot adds 12 bytes.
pub const SHADOW_RAY_BASE_BYTES: usize = 60;
const SHADOW_SEGMENT_BYTES: usize = 12;

impl RayRecord for PathRay {
    const KIND: WaveKind = WaveKind::Path;

    fn record_size(capacity: usize) -> usize {
        PATH_RAY_BASE_BYTES + capacity * PATH_SEGMENT_BYTES
    }

    fn encode(&self, capacity: usize, out: &mut Vec<u8>) {
        debug_assert!(self.segments.len() <= capacity);
        let mut w = Writer(out);
        w.u32(self.pixel);
        w.u32(self.sample);
        w.u8(self.bounce);
        w.u8(self.segments.len() as u8);
        w.zeros(2);
        w.vec3(self.origin);
        w.vec3(self.dir);
        w.f32(self.t_min);
        w.f32(self.t_max);
        w.vec3(self.throughput);
        w.f32(self.best_t);
        w.u64(self.best_prim);
        w.vec3(self.hit_normal);
        w.vec3(self.hit_albedo);
        w.vec3(self.hit_emission);
        w.f32(self.hit_opacity);
        for s in &self.segments {
            w.f32(s.t0);
            w.f32(s.t1);
            for c in s.rgba {
                w.f32(c);
            }
            w.f32(s.t_half);
        }
        w.zeros((capacity - self.segments.len()) * PATH_SEGMENT_BYTES);
    }

    fn decode(bytes: &[u8], capacity: usize) -> Result<Self, WireError> {
        let needed = Self::record_size(capacity);
        if bytes.len() < needed {
            return Err(WireError::Truncated { needed, available: bytes.len() });
        }
        let mut r = Reader::new(bytes);
        let pixel = r.u32();
        let sample = r.u32();
        let bounce = r.u8();
        let count = r.u8();
        if count as usize > capacity {
            return Err(WireError::SegmentCount { count, capacity });
        }
        r.skip(2);
        let mut ray = PathRay {
            pixel,
            sample,
            bounce,
            origin: r.vec3(),
            dir: r.vec3(),
            t_min: r.f32(),
            t_max: r.f32(),
            throughput: r.vec3(),
            best_t: r.f32(),
            best_prim: r.u64(),
            hit_normal: r.vec3(),
            hit_albedo: r.vec3(),
            hit_emission: r.vec3(),
            hit_opacity: r.f32(),
            segments: Vec::with_capacity(count as usize),
        };
        for _ in 0..count {
            ray.segments.push(Segment {
                t0: r.f32(),
                t1: r.f32(),
                rgba: [r.f32(), r.f32(), r.f32(), r.f32()],
                t_half: r.f32(),
            });
        }
        Ok(ray)
    }
}

impl RayRecord for ShadowRay {
    const KIND: WaveKind = WaveKind::Shadow;

    fn record_size(capacity: usize) -> usize {
        SHADOW_RAY_BASE_BYTES + capacity * SHADOW_SEGMENT_BYTES
    }

    fn encode(&self, capacity: usize, out: &mut Vec<u8>) {
        debug_assert!(self.segments.len() <= capacity);
        let mut w = Writer(out);
        w.u32(self.pixel);
        w.u8(self.segments.len() as u8);
        w.zeros(3);
        w.vec3(self.contribution);
        w.vec3(self.origin);
        w.vec3(self.dir);
        w.f32(self.t_max);
        w.vec3(self.transmittance);
        for s in &self.segments {
            w.f32(s.t0);
            w.f32(s.t1);
            w.f32(s.transmittance);
        }
        w.zeros((capacity - self.segments.len()) * SHADOW_SEGMENT_BYTES);
    }

    fn decode(bytes: &[u8], capacity: usize) -> Result<Self, WireError> {
        let needed = Self::record_size(capacity);
        if bytes.len() < needed {
            return Err(WireError::Truncated { needed, available: bytes.len() });
        }
        let mut r = Reader::new(bytes);
        let pixel = r.u32();
        let count = r.u8();
        if count as usize > capacity {
            return Err(WireError::SegmentCount { count, capacity });
        }
        r.skip(3);
        let mut ray = ShadowRay {
            pixel,
            contribution: r.vec3(),
            origin: r.vec3(),
            dir: r.vec3(),
            t_max: r.f32(),
            transmittance: r.vec3(),
            segments: Vec::with_capacity(count as usize),
        };
        for _ in 0..count {
            ray.segments.push(ShadowSegment { t0: r.f32(), t1: r.f32(), transmittance: r.f32() });
        }
        Ok(ray)
    }
}

const HEADER_BYTES: usize = 16;

/// One bounce's batch of rays of a single kind.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFront<R> {
    pub epoch_step: u32,
    /// Segment slots per record; identical on every rank for a frame.
    pub capacity: usize,
    pub rays: Vec<R>,
}

impl<R: RayRecord> WaveFront<R> {
    pub fn new(capacity: usize, rays: Vec<R>) -> Self {
        WaveFront { epoch_step: 0, capacity, rays }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// Header (kind u8, 3 pad, epoch step u32, count u32, capacity u32) then
    /// one fixed-size record per ray.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.rays.len() * R::record_size(self.capacity));
        {
            let mut w = Writer(&mut out);
            w.u8(R::KIND as u8);
            w.zeros(3);
            w.u32(self.epoch_step);
            w.u32(self.rays.len() as u32);
            w.u32(self.capacity as u32);
        }
        for r in &self.rays {
            r.encode(self.capacity, &mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8], capacity: usize) -> Result<Self, WireError> {
        if bytes.len() < HEADER_BYTES {
            return Err(WireError::Truncated { needed: HEADER_BYTES, available: bytes.len() });
        }
        let mut r = Reader::new(bytes);
        let kind = r.u8();
        if kind != R::KIND as u8 {
            return Err(WireError::WrongKind { expected: R::KIND as u8, found: kind });
        }
        r.skip(3);
        let epoch_step = r.u32();
        let count = r.u32() as usize;
        let cap = r.u32();
        if cap as usize != capacity {
            return Err(WireError::CapacityMismatch { expected: capacity as u32, found: cap });
        }
        let size = R::record_size(capacity);
        let needed = HEADER_BYTES + count * size;
        if bytes.len() != needed {
            return Err(WireError::Truncated { needed, available: bytes.len() });
        }
        let rays = bytes[HEADER_BYTES..]
            .chunks_exact(size)
            .map(|rec| R::decode(rec, capacity))
            .collect::<Result<Vec<R>, _>>()?;
        Ok(WaveFront { epoch_step, capacity, rays })
    }
}
