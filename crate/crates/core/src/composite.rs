//! Sort-last deep compositing with one RGBA-z fragment per rank per pixel.
//!
//! Each rank renders its own data into a full-frame fragment buffer. Parallel
//! direct send then hands every rank all N fragments of its owned pixel span;
//! the owner sorts them by depth and blends front to back. Composited spans
//! are gathered at the root. Because depth carries the ordering, ranks never
//! need to agree on a compositing order up front.

use alloc::vec::Vec;

use crate::collective::{Collective, CommError};
use crate::render::FrameBuffer;
use crate::span::PixelSpan;

/// Depth written for pixels where nothing was hit.
pub const MISS_DEPTH: f32 = f32::MAX;

/// Encoded size of one fragment: four `f32` colour channels and one `f32` depth.
pub const FRAGMENT_BYTES: usize = 20;

/// Non-premultiplied colour with Euclidean depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fragment {
    pub rgba: [f32; 4],
    pub z: f32,
}

impl Fragment {
    pub fn is_miss(&self) -> bool {
        self.z == MISS_DEPTH
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        for c in self.rgba {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&self.z.to_le_bytes());
    }

    pub fn decode(bytes: &[u8]) -> Fragment {
        let f = |i: usize| f32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
        Fragment { rgba: [f(0), f(4), f(8), f(12)], z: f(16) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeMismatch {
    pub color: usize,
    pub depth: usize,
}

impl core::fmt::Display for SizeMismatch {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "colour plane has {} pixels but depth plane has {}", self.color, self.depth)
    }
}

pub fn build_fragments(color: &[[f32; 4]], depth: &[f32]) -> Result<Vec<Fragment>, SizeMismatch> {
    if color.len() != depth.len() {
        return Err(SizeMismatch { color: color.len(), depth: depth.len() });
    }
    Ok(color.iter().zip(depth).map(|(&rgba, &z)| Fragment { rgba, z }).collect())
}

/// Per-frame compositing state: image size and pixel ownership.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositeContext {
    pub width: u32,
    pub height: u32,
    pub ranks: usize,
}

impl CompositeContext {
    pub fn new(width: u32, height: u32, ranks: usize) -> Self {
        CompositeContext { width, height, ranks }
    }

    pub fn pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn span(&self, rank: usize) -> PixelSpan {
        PixelSpan::owned(rank, self.ranks, self.pixels())
    }

    /// Returns whether anything changed.
    pub fn resize(&mut self, width: u32, height: u32) -> bool {
        let changed = (self.width, self.height) != (width, height);
        self.width = width;
        self.height = height;
        changed
    }
}

/// Fragments received for an owned span: `fragments[i * ranks + s]` is rank
/// `s`'s fragment for pixel `span.start + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OwnedFragments {
    pub span: PixelSpan,
    pub ranks: usize,
    pub fragments: Vec<Fragment>,
}

impl OwnedFragments {
    pub fn pixel(&self, i: usize) -> &[Fragment] {
        &self.fragments[i * self.ranks..(i + 1) * self.ranks]
    }
}

/// Parallel direct send: every rank ships the fragments of rank `d`'s span to
/// rank `d`, in pixel order, [`FRAGMENT_BYTES`] each.
pub fn direct_send_exchange<C: Collective + ?Sized>(
    comm: &mut C,
    ctx: &CompositeContext,
    fragments: &[Fragment],
) -> Result<OwnedFragments, CommError> {
    let n = comm.size();
    if fragments.len() != ctx.pixels() || ctx.ranks != n {
        return Err(CommError::Usage(alloc::format!(
            "{} fragments for a {}x{} context over {} ranks (group has {n})",
            fragments.len(),
            ctx.width,
            ctx.height,
            ctx.ranks
        )));
    }
    let outbox: Vec<Vec<u8>> = (0..n)
        .map(|d| {
            let span = ctx.span(d);
            let mut buf = Vec::with_capacity(span.len() * FRAGMENT_BYTES);
            for f in &fragments[span.start..span.end] {
                f.encode_into(&mut buf);
            }
            buf
        })
        .collect();
    let inbox = comm.exchange_spans(outbox)?;
    let span = ctx.span(comm.rank());
    let mut out = Vec::with_capacity(span.len() * n);
    for i in 0..span.len() {
        for (src, bytes) in inbox.iter().enumerate() {
            let at = i * FRAGMENT_BYTES;
            let chunk = bytes.get(at..at + FRAGMENT_BYTES).ok_or_else(|| CommError::TransportDown {
                peer: Some(src),
                reason: alloc::format!("short fragment span: {} bytes", bytes.len()),
            })?;
            out.push(Fragment::decode(chunk));
        }
    }
    Ok(OwnedFragments { span, ranks: n, fragments: out })
}

/// Front-to-back over operator on fragments indexed by source rank.
///
/// Fragments are ordered by depth, ties by source rank. Miss fragments all
/// carry the background, so at most one (the lowest-ranked) is blended; when
/// every rank hit something, `background` is blended last instead. The
/// result is premultiplied-by-coverage: `c += (1-a)·aᵢ·cᵢ`, `a += (1-a)·aᵢ`.
pub fn composite_pixel(fragments: &[Fragment], background: [f32; 4]) -> [f32; 4] {
    let mut order: Vec<usize> = (0..fragments.len()).collect();
    order.sort_by(|&a, &b| fragments[a].z.total_cmp(&fragments[b].z).then(a.cmp(&b)));
    let mut acc = [0.0f32; 4];
    let mut blend = |rgba: [f32; 4]| {
        let w = (1.0 - acc[3]) * rgba[3];
        acc[0] += w * rgba[0];
        acc[1] += w * rgba[1];
        acc[2] += w * rgba[2];
        acc[3] += w;
    };
    let mut backdrop = background;
    for &i in &order {
        let f = &fragments[i];
        if f.is_miss() {
            backdrop = f.rgba;
            break;
        }
        blend(f.rgba);
    }
    blend(backdrop);
    acc
}

/// Composites the owned span, then gathers colour and min-depth at `root`.
/// Returns the assembled frame at the root, `None` elsewhere.
pub fn composite_and_gather<C: Collective + ?Sized>(
    comm: &mut C,
    ctx: &CompositeContext,
    fragments: &[Fragment],
    background: [f32; 4],
    root: usize,
) -> Result<Option<FrameBuffer>, CommError> {
    let owned = direct_send_exchange(comm, ctx, fragments)?;
    let mut payload = Vec::with_capacity(owned.span.len() * FRAGMENT_BYTES);
    for i in 0..owned.span.len() {
        let frags = owned.pixel(i);
        let rgba = composite_pixel(frags, background);
        let z = frags.iter().fold(MISS_DEPTH, |m, f| m.min(f.z));
        Fragment { rgba, z }.encode_into(&mut payload);
    }
    let Some(parts) = comm.gather_to(root, payload)? else {
        return Ok(None);
    };
    let mut fb = FrameBuffer::new(ctx.width, ctx.height);
    for (src, bytes) in parts.iter().enumerate() {
        let span = ctx.span(src);
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
