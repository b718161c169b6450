//! Binary BVH with longest-axis median splits.
//!
//! Node boxes are tested with a slab interval widened by a few ulps so a
//! primitive lying exactly on a box face is never culled; together with the
//! `(t, prim_id)` ordering this makes traversal agree exactly with testing
//! every primitive.

use alloc::vec::Vec;

use crate::geometry::{closer, Primitive, Ray};
use crate::math::{Aabb, Vec3};

pub const MAX_LEAF_SIZE: usize = 4;

/// `(1 + 2·gamma(3))` from the robust ray/box literature, with gamma(n) = nε/(1-nε).
const SLAB_WIDEN: f32 = 1.0 + 2.0 * (3.0 * (f32::EPSILON * 0.5)) / (1.0 - 3.0 * (f32::EPSILON * 0.5));

#[derive(Clone, Copy, Debug)]
enum NodeKind {
    Leaf { start: u32, count: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Closest primitive along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimHit {
    pub t: f32,
    pub prim_id: u64,
    /// Index into [`Bvh::primitives`].
    pub index: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    prims: Vec<Primitive>,
}

impl Bvh {
    pub fn build(mut prims: Vec<Primitive>) -> Bvh {
        let mut nodes = Vec::new();
        if !prims.is_empty() {
            let len = prims.len();
            build_recursive(&mut nodes, &mut prims, 0, len);
        }
        Bvh { nodes, prims }
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.prims
    }

    pub fn is_empty(&self) -> bool {
        self.prims.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map_or(Aabb::EMPTY, |n| n.bounds)
    }

    /// Closest hit with `t` in `[t_min, t_max]`; equal `t` resolves to the
    /// smaller global id.
    pub fn closest_hit(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<PrimHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = inverse_dir(ray.dir);
        let mut best: Option<PrimHit> = None;
        let mut best_t = t_max;
        let mut stack: [u32; 64] = [0; 64];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if slab(&node.bounds, ray.origin, inv, t_min, best_t).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for i in start as usize..(start + count) as usize {
                        let p = &self.prims[i];
                        if let Some(t) = p.intersect(ray, t_min, best_t) {
                            let better = match best {
                                None => true,
                                Some(b) => closer(t, p.prim_id, b.t, b.prim_id),
                            };
                            if better {
                                best = Some(PrimHit { t, prim_id: p.prim_id, index: i });
                                best_t = t;
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = slab(&self.nodes[left as usize].bounds, ray.origin, inv, t_min, best_t);
                    let dr = slab(&self.nodes[right as usize].bounds, ray.origin, inv, t_min, best_t);
                    // push the farther child first so the nearer one pops first
                    match (dl, dr) {
                        (Some(l), Some(r)) => {
                            if l <= r {
                                stack[sp] = right;
                                stack[sp + 1] = left;
                            } else {
                                stack[sp] = left;
                                stack[sp + 1] = right;
                            }
                            sp += 2;
                        }
                        (Some(_), None) => {
                            stack[sp] = left;
                            sp += 1;
                        }
                        (None, Some(_)) => {
                            stack[sp] = right;
                            sp += 1;
                        }
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    /// True when any primitive is hit with `t` in `[t_min, t_max)`.
    pub fn any_hit(&self, ray: &Ray, t_min: f32, t_max: f32) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = inverse_dir(ray.dir);
        let mut stack: [u32; 64] = [0; 64];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if slab(&node.bounds, ray.origin, inv, t_min, t_max).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for p in &self.prims[start as usize..(start + count) as usize] {
                        if let Some(t) = p.intersect(ray, t_min, t_max) {
                            if t < t_max {
                                return true;
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack[sp] = left;
                    stack[sp + 1] = right;
                    sp += 2;
                }
            }
        }
        false
    }
}

/// Brute-force closest hit over a primitive list; the reference the BVH must match.
pub fn brute_force_closest(prims: &[Primitive], ray: &Ray, t_min: f32, t_max: f32) -> Option<(f32, u64)> {
    let mut best: Option<(f32, u64)> = None;
    for p in prims {
        if let Some(t) = p.intersect(ray, t_min, t_max) {
            if best.is_none_or(|(bt, bid)| closer(t, p.prim_id, bt, bid)) {
                best = Some((t, p.prim_id));
            }
        }
    }
    best
}

fn inverse_dir(d: Vec3) -> Vec3 {
    Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z)
}

/// Widened slab test; returns the entry distance. NaN slab products (origin on
/// a slab plane with a zero direction component) leave the interval open.
#[inline]
fn slab(b: &Aabb, o: Vec3, inv: Vec3, t_min: f32, t_max: f32) -> Option<f32> {
    let mut t0 = t_min;
    let mut t1 = t_max;
    for axis in 0..3 {
        let mut near = (b.min[axis] - o[axis]) * inv[axis];
        let mut far = (b.max[axis] - o[axis]) * inv[axis];
        if near > far {
            core::mem::swap(&mut near, &mut far);
        }
        far *= SLAB_WIDEN;
        if near > t0 {
            t0 = near;
        }
        if far < t1 {
            t1 = far;
        }
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

fn build_recursive(nodes: &mut Vec<Node>, prims: &mut [Primitive], start: usize, end: usize) -> u32 {
    let slice = &mut prims[start..end];
    let bounds = slice.iter().fold(Aabb::EMPTY, |b, p| b.union(p.bounds()));
    let index = nodes.len() as u32;
    if slice.len() <= MAX_LEAF_SIZE {
        nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf { start: start as u32, count: slice.len() as u32 },
        });
        return index;
    }
    let centroids = slice.iter().fold(Aabb::EMPTY, |b, p| b.grow(p.bounds().centroid()));
    let axis = centroids.longest_axis();
    slice.sort_unstable_by(|a, b| {
        let ca = a.bounds().centroid()[axis];
        let cb = b.bounds().centroid()[axis];
        ca.total_cmp(&cb).then(a.prim_id.cmp(&b.prim_id))
    });
    nodes.push(Node { bounds, kind: NodeKind::Leaf { start: 0, count: 0 } });
    let mid = start + slice.len() / 2;
    let left = build_recursive(nodes, prims, start, mid);
    let right = build_recursive(nodes, prims, mid, end);
    nodes[index as usize].kind = NodeKind::Inner { left, right };
    index
}
