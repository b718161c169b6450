//! The portion of the world one rank holds.

use alloc::vec::Vec;

use crate::bvh::Bvh;
use crate::geometry::{Hit, Primitive, Ray, SphereSet, TriangleMesh};
use crate::math::{Aabb, Vec3};
use crate::volume::VolumeBrick;

/// Diffuse material. `emission` is radiance leaving the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub albedo: Vec3,
    pub opacity: f32,
    pub emission: Vec3,
}

impl Default for Material {
    fn default() -> Self {
        Material { albedo: Vec3::splat(0.8), opacity: 1.0, emission: Vec3::ZERO }
    }
}

impl Material {
    pub fn is_valid(&self) -> bool {
        let unit = |v: f32| (0.0..=1.0).contains(&v);
        unit(self.albedo.x)
            && unit(self.albedo.y)
            && unit(self.albedo.z)
            && self.opacity > 0.0
            && self.opacity <= 1.0
            && self.emission.x >= 0.0
            && self.emission.y >= 0.0
            && self.emission.z >= 0.0
    }
}

#[derive(Default)]
pub struct SceneBuilder {
    prims: Vec<Primitive>,
    materials: Vec<Material>,
    bricks: Vec<VolumeBrick>,
}

impl SceneBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn material_slot(&mut self, m: Material) -> u32 {
        self.materials.push(m);
        (self.materials.len() - 1) as u32
    }

    pub fn add_mesh(&mut self, mesh: &TriangleMesh, material: Material) -> &mut Self {
        let slot = self.material_slot(material);
        self.prims.extend(mesh.primitives(slot));
        self
    }

    pub fn add_spheres(&mut self, spheres: &SphereSet, material: Material) -> &mut Self {
        let slot = self.material_slot(material);
        self.prims.extend(spheres.primitives(slot));
        self
    }

    pub fn add_brick(&mut self, brick: VolumeBrick) -> &mut Self {
        self.bricks.push(brick);
        self
    }

    pub fn build(self) -> LocalScene {
        LocalScene { bvh: Bvh::build(self.prims), materials: self.materials, bricks: self.bricks }
    }
}

#[derive(Debug, Default)]
pub struct LocalScene {
    pub bvh: Bvh,
    pub materials: Vec<Material>,
    pub bricks: Vec<VolumeBrick>,
}

impl LocalScene {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn bounds(&self) -> Aabb {
        self.bricks.iter().fold(self.bvh.bounds(), |b, v| b.union(v.bounds()))
    }

    /// Closest surface hit with its shading payload.
    pub fn intersect(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<Hit> {
        let h = self.bvh.closest_hit(ray, t_min, t_max)?;
        let prim = &self.bvh.primitives()[h.index];
        let m = self.materials[prim.material as usize];
        Some(Hit {
            t: h.t,
            prim_id: h.prim_id,
            normal: prim.facing_normal(ray, h.t),
            albedo: m.albedo,
            emission: m.emission,
            opacity: m.opacity,
        })
    }

    pub fn occluded(&self, ray: &Ray, t_min: f32, t_max: f32) -> bool {
        self.bvh.any_hit(ray, t_min, t_max)
    }
}
