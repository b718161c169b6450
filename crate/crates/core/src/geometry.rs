//! Rays, primitives, and their intersection tests.
//!
//! Triangle tests use the Möller-Trumbore formulation and accept hits from
//! both sides. All arithmetic is plain `f32` multiply/add; rustc never
//! contracts these into fused multiply-adds, which keeps results identical
//! between the BVH and the brute-force path and across rank counts.

use alloc::vec::Vec;

use crate::math::{Aabb, Vec3};

/// Parametric offset applied to every ray's start.
pub const RAY_T_MIN: f32 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_min: f32,
    pub t_max: f32,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray { origin, dir, t_min: RAY_T_MIN, t_max: f32::INFINITY }
    }

    #[inline]
    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Closest intersection with its shading payload. The normal is unit length
/// and faces the ray origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f32,
    pub prim_id: u64,
    pub normal: Vec3,
    pub albedo: Vec3,
    pub emission: Vec3,
    pub opacity: f32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
}

impl Triangle {
    pub fn bounds(&self) -> Aabb {
        Aabb::EMPTY.grow(self.v0).grow(self.v1).grow(self.v2)
    }

    pub fn is_degenerate(&self) -> bool {
        (self.v1 - self.v0).cross(self.v2 - self.v0).is_zero()
    }

    /// Möller-Trumbore; returns `t` when the hit lies in `[t_min, t_max]`.
    #[inline]
    pub fn intersect(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<f32> {
        let e1 = self.v1 - self.v0;
        let e2 = self.v2 - self.v0;
        let p = ray.dir.cross(e2);
        let det = e1.dot(p);
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv_det = 1.0 / det;
        let s = ray.origin - self.v0;
        let u = s.dot(p) * inv_det;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(e1);
        let v = ray.dir.dot(q) * inv_det;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(q) * inv_det;
        (t >= t_min && t <= t_max).then_some(t)
    }

    pub fn geometric_normal(&self) -> Vec3 {
        (self.v1 - self.v0).cross(self.v2 - self.v0).normalize()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f32,
}

impl Sphere {
    pub fn bounds(&self) -> Aabb {
        let r = Vec3::splat(self.radius);
        Aabb::new(self.center - r, self.center + r)
    }

    /// Analytic test assuming a unit-length ray direction.
    #[inline]
    pub fn intersect(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<f32> {
        let oc = ray.origin - self.center;
        let b = oc.dot(ray.dir);
        let c = oc.dot(oc) - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let root = libm::sqrtf(disc);
        let near = -b - root;
        if near >= t_min && near <= t_max {
            return Some(near);
        }
        let far = -b + root;
        (far >= t_min && far <= t_max).then_some(far)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Triangle(Triangle),
    Sphere(Sphere),
}

/// A shape with its global identity and material slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub prim_id: u64,
    pub material: u32,
}

impl Primitive {
    pub fn bounds(&self) -> Aabb {
        match &self.shape {
            Shape::Triangle(t) => t.bounds(),
            Shape::Sphere(s) => s.bounds(),
        }
    }

    #[inline]
    pub fn intersect(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<f32> {
        match &self.shape {
            Shape::Triangle(t) => t.intersect(ray, t_min, t_max),
            Shape::Sphere(s) => s.intersect(ray, t_min, t_max),
        }
    }

    /// Unit geometric normal at `t`, flipped to face the ray origin.
    pub fn facing_normal(&self, ray: &Ray, t: f32) -> Vec3 {
        let n = match &self.shape {
            Shape::Triangle(tri) => tri.geometric_normal(),
            Shape::Sphere(s) => ((ray.at(t) - s.center) * (1.0 / s.radius)).normalize(),
        };
        if n.dot(ray.dir) > 0.0 {
            -n
        } else {
            n
        }
    }
}

/// Closest-hit ordering: smaller `t` wins, equal `t` goes to the smaller id.
#[inline]
pub fn closer(t: f32, id: u64, best_t: f32, best_id: u64) -> bool {
    t < best_t || (t == best_t && id < best_id)
}

/// Indexed triangle mesh as handed over by an application.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub positions: Vec<Vec3>,
    pub indices: Vec<[u32; 3]>,
    pub global_prim_base: u64,
}

impl TriangleMesh {
    pub fn indices_in_range(&self) -> bool {
        let n = self.positions.len() as u64;
        self.indices.iter().flatten().all(|&i| (i as u64) < n)
    }

    pub fn triangle(&self, i: usize) -> Triangle {
        let [a, b, c] = self.indices[i];
        Triangle {
            v0: self.positions[a as usize],
            v1: self.positions[b as usize],
            v2: self.positions[c as usize],
        }
    }

    pub fn degenerate_count(&self) -> usize {
        (0..self.indices.len()).filter(|&i| self.triangle(i).is_degenerate()).count()
    }

    pub fn primitives(&self, material: u32) -> impl Iterator<Item = Primitive> + '_ {
        (0..self.indices.len()).map(move |i| Primitive {
            shape: Shape::Triangle(self.triangle(i)),
            prim_id: self.global_prim_base + i as u64,
            material,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SphereSet {
    pub centers: Vec<Vec3>,
    pub radii: Vec<f32>,
    pub global_prim_base: u64,
}

impl SphereSet {
    pub fn primitives(&self, material: u32) -> impl Iterator<Item = Primitive> + '_ {
        self.centers.iter().zip(&self.radii).enumerate().map(move |(i, (&center, &radius))| Primitive {
            shape: Shape::Sphere(Sphere { center, radius }),
            prim_id: self.global_prim_base + i as u64,
            material,
        })
    }
}
