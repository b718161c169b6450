//! Per-ray work: primary generation, local intersection, and shading at home.
//!
//! Every function here treats rays independently; results never depend on
//! the order rays sit in a batch.

use alloc::vec::Vec;
use core::f32::consts::PI;

use super::ray::{PathRay, ShadowRay};
use super::TraceError;
use crate::camera::PerspectiveCamera;
use crate::composite::MISS_DEPTH;
use crate::geometry::{closer, Ray, RAY_T_MIN};
use crate::lights::Lights;
use crate::math::Vec3;
use crate::render::RenderSettings;
use crate::rng::{rng_f32, RngKey};
use crate::scene::LocalScene;
use crate::span::PixelSpan;
use crate::volume::Segment;

/// Russian roulette applies to paths whose current bounce is at least this.
pub const RR_START_BOUNCE: u8 = 3;
const RR_MIN_CONTINUE: f32 = 0.05;
const RR_MAX_CONTINUE: f32 = 0.95;

const DIM_JITTER_X: u16 = 0;
const DIM_JITTER_Y: u16 = 1;
const DIM_BOUNCE_U: u16 = 2;
const DIM_BOUNCE_V: u16 = 3;
const DIM_ROULETTE: u16 = 4;

/// Which part of the local scene a path-ray pass tests against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Closest opaque surface; updates the best-hit payload.
    Surfaces,
    /// Marches local bricks over `[t_min, best_t)` and appends segments.
    /// Runs after the surface pass has resolved `best_t` globally.
    Volumes,
}

/// Radiance sums for the pixels a rank is home to.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributedAccum {
    pub span: PixelSpan,
    pub rgb_sum: Vec<Vec3>,
    pub alpha_sum: Vec<f32>,
    pub depth: Vec<f32>,
    pub sample_count: u32,
}

impl DistributedAccum {
    pub fn new(span: PixelSpan) -> Self {
        DistributedAccum {
            span,
            rgb_sum: alloc::vec![Vec3::ZERO; span.len()],
            alpha_sum: alloc::vec![0.0; span.len()],
            depth: alloc::vec![MISS_DEPTH; span.len()],
            sample_count: 0,
        }
    }

    #[inline]
    fn slot(&self, pixel: u32) -> usize {
        debug_assert!(self.span.contains(pixel as usize));
        pixel as usize - self.span.start
    }

    #[inline]
    fn add(&mut self, pixel: u32, v: Vec3) {
        let i = self.slot(pixel);
        self.rgb_sum[i] += v;
    }

    /// Averaged RGBA for slot `i`.
    pub fn resolved(&self, i: usize) -> [f32; 4] {
        let n = self.sample_count.max(1) as f32;
        let c = self.rgb_sum[i] / n;
        [c.x, c.y, c.z, self.alpha_sum[i] / n]
    }
}

/// One jittered primary ray per owned pixel.
pub fn generate_primary(
    camera: &PerspectiveCamera,
    span: PixelSpan,
    width: u32,
    height: u32,
    sample: u32,
    seed: u64,
) -> Vec<PathRay> {
    span.iter()
        .map(|p| {
            let pixel = p as u32;
            let jx = rng_f32(RngKey::new(seed, pixel, sample, 0, DIM_JITTER_X));
            let jy = rng_f32(RngKey::new(seed, pixel, sample, 0, DIM_JITTER_Y));
            let ray = camera.generate_ray(pixel % width, pixel / width, width, height, [jx, jy]);
            debug_assert!(pixel / width < height);
            PathRay::new(pixel, sample, 0, ray, Vec3::ONE)
        })
        .collect()
}

/// Tests path rays against this rank's data.
pub fn local_process_path(
    scene: &LocalScene,
    rays: &mut [PathRay],
    phase: Phase,
    capacity: usize,
) -> Result<(), TraceError> {
    match phase {
        Phase::Surfaces => {
            if scene.bvh.is_empty() {
                return Ok(());
            }
            for r in rays.iter_mut() {
                let ray = r.ray();
                let t_hi = r.t_max.min(r.best_t);
                if let Some(h) = scene.intersect(&ray, r.t_min, t_hi) {
                    if closer(h.t, h.prim_id, r.best_t, r.best_prim) {
                        r.best_t = h.t;
                        r.best_prim = h.prim_id;
                        r.hit_normal = h.normal;
                        r.hit_albedo = h.albedo;
                        r.hit_emission = h.emission;
                        r.hit_opacity = h.opacity;
                    }
                }
            }
        }
        Phase::Volumes => {
            if scene.bricks.is_empty() {
                return Ok(());
            }
            for r in rays.iter_mut() {
                let ray = r.ray();
                let t_hi = r.t_max.min(r.best_t);
                for brick in &scene.bricks {
                    if let Some(seg) = brick.march(&ray, r.t_min, t_hi) {
                        if r.segments.len() >= capacity {
                            return Err(TraceError::SegmentOverflow { pixel: r.pixel, capacity });
                        }
                        r.segments.push(seg);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Tests shadow rays against local surfaces and bricks. An opaque blocker
/// zeroes the transmittance; bricks append per-brick transmittance.
pub fn local_process_shadow(scene: &LocalScene, rays: &mut [ShadowRay], capacity: usize) -> Result<(), TraceError> {
    for r in rays.iter_mut() {
        let ray = r.ray();
        if !scene.bvh.is_empty() && scene.occluded(&ray, ray.t_min, r.t_max) {
            r.transmittance = Vec3::ZERO;
        }
        for brick in &scene.bricks {
            if let Some(seg) = brick.transmittance(&ray, ray.t_min, r.t_max) {
                if r.segments.len() >= capacity {
                    return Err(TraceError::SegmentOverflow { pixel: r.pixel, capacity });
                }
                r.segments.push(seg);
            }
        }
    }
    Ok(())
}

/// Result of blending a ray's volume segments front to back.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeComposite {
    /// Premultiplied colour and accumulated alpha.
    pub rgba: [f32; 4],
    /// Depth at which accumulated alpha first reaches 0.5, if it does.
    pub half_depth: Option<f32>,
}

/// Sorts segments by depth and blends them with the over operator.
///
/// When the 0.5-alpha crossing happens inside the first contributing segment
/// its own recorded sample depth is used; a crossing inside a later segment
/// resolves to that segment's entry depth.
pub fn composite_segments(segments: &mut [Segment]) -> VolumeComposite {
    segments.sort_by(|a, b| {
        a.t0.total_cmp(&b.t0)
            .then(a.t1.total_cmp(&b.t1))
            .then_with(|| a.rgba.map(f32::to_bits).cmp(&b.rgba.map(f32::to_bits)))
    });
    let mut acc = [0.0f32; 4];
    let mut half_depth = None;
    for s in segments.iter() {
        let before = acc[3];
        let w = 1.0 - acc[3];
        acc[0] += w * s.rgba[0];
        acc[1] += w * s.rgba[1];
        acc[2] += w * s.rgba[2];
        acc[3] += w * s.rgba[3];
        if half_depth.is_none() && acc[3] >= 0.5 {
            half_depth = Some(if before == 0.0 { s.t_half.min(s.t1) } else { s.t0 });
        }
    }
    VolumeComposite { rgba: acc, half_depth }
}

/// Depth written for a resolved primary ray.
fn primary_depth(r: &PathRay, vol: &VolumeComposite) -> f32 {
    match vol.half_depth {
        Some(t) if !r.has_hit() || t < r.best_t => t,
        _ if r.has_hit() => r.best_t,
        _ => MISS_DEPTH,
    }
}

fn local_shading(r: &PathRay, lights: &Lights) -> Vec3 {
    let direct = match &lights.directional {
        Some(l) => l.irradiance * r.hit_normal.dot(l.to_light()).max(0.0),
        None => Vec3::ZERO,
    };
    r.hit_albedo * (lights.ambient + direct)
}

/// Local shading only: no shadow or bounce rays. Consumes the wave-front.
pub fn shade_raycast(rays: &mut [PathRay], lights: &Lights, settings: &RenderSettings, accum: &mut DistributedAccum) {
    let bg = settings.background;
    for r in rays.iter_mut() {
        let vol = composite_segments(&mut r.segments);
        let (surface, surface_alpha) = if r.has_hit() {
            (local_shading(r, lights), r.hit_opacity)
        } else {
            (Vec3::new(bg[0], bg[1], bg[2]), bg[3])
        };
        let (color, alpha) = if vol.rgba[3] == 0.0 {
            (surface, surface_alpha)
        } else {
            let va = vol.rgba[3];
            let a = va + (1.0 - va) * surface_alpha;
            let premult = Vec3::new(vol.rgba[0], vol.rgba[1], vol.rgba[2]) + surface * ((1.0 - va) * surface_alpha);
            (premult / a, a)
        };
        let i = accum.slot(r.pixel);
        if r.sample == 0 {
            accum.depth[i] = primary_depth(r, &vol);
        }
        accum.rgb_sum[i] += color;
        accum.alpha_sum[i] += alpha;
    }
}

/// Cosine-weighted direction about `n` from two uniform numbers.
fn cosine_direction(n: Vec3, u1: f32, u2: f32) -> Vec3 {
    let sign = if n.z >= 0.0 { 1.0 } else { -1.0 };
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let tangent = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let bitangent = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    let r = libm::sqrtf(u1);
    let phi = 2.0 * PI * u2;
    let x = r * libm::cosf(phi);
    let y = r * libm::sinf(phi);
    let z = libm::sqrtf((1.0 - u1).max(0.0));
    (tangent * x + bitangent * y + n * z).normalize()
}

/// Path-tracing shading at the home rank. Returns the next bounce's path
/// rays and the shadow rays toward the directional light.
pub fn shade_and_bounce(
    rays: &mut [PathRay],
    lights: &Lights,
    settings: &RenderSettings,
    accum: &mut DistributedAccum,
) -> (Vec<PathRay>, Vec<ShadowRay>) {
    let bg = settings.background;
    let miss_radiance = lights.ambient + Vec3::new(bg[0], bg[1], bg[2]);
    let mut next = Vec::new();
    let mut shadows = Vec::new();
    for r in rays.iter_mut() {
        let vol = composite_segments(&mut r.segments);
        if r.bounce == 0 {
            let i = accum.slot(r.pixel);
            if r.sample == 0 {
                accum.depth[i] = primary_depth(r, &vol);
            }
            accum.alpha_sum[i] += 1.0;
        }
        let mut throughput = r.throughput;
        if vol.rgba[3] > 0.0 {
            accum.add(r.pixel, throughput * Vec3::new(vol.rgba[0], vol.rgba[1], vol.rgba[2]));
            throughput = throughput * (1.0 - vol.rgba[3]);
        }
        if !r.has_hit() {
            accum.add(r.pixel, throughput * miss_radiance);
            continue;
        }
        if !r.hit_emission.is_zero() {
            accum.add(r.pixel, throughput * r.hit_emission);
        }
        let n = r.hit_normal;
        let p = r.origin + r.dir * r.best_t;
        let offset = p + n * RAY_T_MIN;
        if let Some(light) = &lights.directional {
            let to_light = light.to_light();
            let cos = n.dot(to_light).max(0.0);
            let contribution = throughput * r.hit_albedo * (cos / PI) * light.irradiance;
            if !contribution.is_zero() {
                shadows.push(ShadowRay::new(r.pixel, contribution, offset, to_light));
            }
        }
        if r.bounce as u32 + 1 >= settings.max_bounces {
            continue;
        }
        let key = |dim| RngKey::new(settings.seed, r.pixel, r.sample, r.bounce as u16, dim);
        let dir = cosine_direction(n, rng_f32(key(DIM_BOUNCE_U)), rng_f32(key(DIM_BOUNCE_V)));
        // cos/pi of the BRDF cancels against the cosine-weighted pdf
        throughput *= r.hit_albedo;
        if r.bounce >= RR_START_BOUNCE {
            let q = throughput.max_component().clamp(RR_MIN_CONTINUE, RR_MAX_CONTINUE);
            if rng_f32(key(DIM_ROULETTE)) >= q {
                continue;
            }
            throughput = throughput / q;
        }
        if throughput.is_zero() {
            continue;
        }
        next.push(PathRay::new(r.pixel, r.sample, r.bounce + 1, Ray::new(offset, dir), throughput));
    }
    (next, shadows)
}

/// Folds per-brick transmittance in depth order and adds the light's
/// contribution at the home rank.
pub fn resolve_shadows(rays: &mut [ShadowRay], accum: &mut DistributedAccum) {
    for r in rays.iter_mut() {
        if r.transmittance.is_zero() {
            continue;
        }
        r.segments.sort_by(|a, b| a.t0.total_cmp(&b.t0).then(a.t1.total_cmp(&b.t1)));
        let t = r.segments.iter().fold(1.0f32, |t, s| t * s.transmittance);
        let transmittance = r.transmittance * t;
        if !transmittance.is_zero() {
            accum.add(r.pixel, r.contribution * transmittance);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SphereSet, TriangleMesh};
    use crate::lights::DirectionalLight;
    use crate::render::RenderMode;
    use crate::scene::{Material, SceneBuilder};
    use alloc::vec;

    fn settings(mode: RenderMode) -> RenderSettings {
        RenderSettings { mode, spp: 1, max_bounces: 5, background: [0.0, 0.0, 0.0, 1.0], seed: 1 }
    }

    fn one_ray(pixel: u32) -> PathRay {
        PathRay::new(pixel, 0, 0, Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)), Vec3::ONE)
    }

    #[test]
    fn miss_adds_ambient() {
        let lights = Lights { directional: None, ambient: Vec3::splat(0.1) };
        let mut accum = DistributedAccum::new(PixelSpan { start: 0, end: 1 });
        let (next, shadows) = shade_and_bounce(&mut [one_ray(0)], &lights, &settings(RenderMode::PathTracer), &mut accum);
        assert!(next.is_empty() && shadows.is_empty());
        assert_eq!(accum.rgb_sum[0], Vec3::splat(0.1));
    }

    #[test]
    fn bounce_weight_equals_albedo() {
        let lights = Lights::default();
        let mut r = one_ray(0);
        r.best_t = 2.0;
        r.best_prim = 0;
        r.hit_normal = Vec3::new(0.0, 0.0, -1.0);
        r.hit_albedo = Vec3::new(0.3, 0.5, 0.7);
        let mut accum = DistributedAccum::new(PixelSpan { start: 0, end: 1 });
        let (next, _) = shade_and_bounce(&mut [r], &lights, &settings(RenderMode::PathTracer), &mut accum);
        assert_eq!(next.len(), 1);
        assert_eq!(next[0].throughput, Vec3::new(0.3, 0.5, 0.7));
        assert_eq!(next[0].bounce, 1);
        assert!(next[0].dir.dot(Vec3::new(0.0, 0.0, -1.0)) > 0.0);
    }

    #[test]
    fn cosine_directions_stay_in_hemisphere() {
        for (i, n) in [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.6, 0.0, 0.8)]
            .into_iter()
            .enumerate()
        {
            for k in 0..1000u32 {
                let u1 = rng_f32(RngKey::new(i as u64, k, 0, 0, 0));
                let u2 = rng_f32(RngKey::new(i as u64, k, 0, 0, 1));
                let d = cosine_direction(n, u1, u2);
                assert!(d.dot(n) >= 0.0);
                assert!((d.length() - 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn missing_local_geometry_leaves_ray_unchanged() {
        let mut b = SceneBuilder::new();
        b.add_spheres(
            &SphereSet { centers: vec![Vec3::new(10.0, 0.0, 0.0)], radii: vec![1.0], global_prim_base: 0 },
            Material::default(),
        );
        let scene = b.build();
        let mut rays = vec![one_ray(0)];
        let before = rays.clone();
        local_process_path(&scene, &mut rays, Phase::Surfaces, 0).unwrap();
        local_process_path(&scene, &mut rays, Phase::Volumes, 0).unwrap();
        assert_eq!(rays, before);
    }

    #[test]
    fn shadow_blocked_locally_is_zero() {
        let mut b = SceneBuilder::new();
        b.add_mesh(
            &TriangleMesh {
                positions: vec![Vec3::new(-1.0, -1.0, 1.0), Vec3::new(3.0, -1.0, 1.0), Vec3::new(-1.0, 3.0, 1.0)],
                indices: vec![[0, 1, 2]],
                global_prim_base: 0,
            },
            Material::default(),
        );
        let scene = b.build();
        let mut rays = vec![ShadowRay::new(0, Vec3::ONE, Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0))];
        local_process_shadow(&scene, &mut rays, 0).unwrap();
        assert_eq!(rays[0].transmittance, Vec3::ZERO);
    }

    #[test]
    fn unobstructed_shadow_adds_full_contribution() {
        let mut accum = DistributedAccum::new(PixelSpan { start: 4, end: 6 });
        let mut rays = vec![ShadowRay::new(5, Vec3::new(0.25, 0.5, 1.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0))];
        local_process_shadow(&LocalScene::empty(), &mut rays, 0).unwrap();
        resolve_shadows(&mut rays, &mut accum);
        assert_eq!(accum.rgb_sum[1], Vec3::new(0.25, 0.5, 1.0));
    }

    #[test]
    fn raycast_shading_formula() {
        let lights = Lights {
            directional: Some(DirectionalLight { direction: Vec3::new(0.0, 0.0, 1.0), irradiance: Vec3::ONE }),
            ambient: Vec3::splat(0.1),
        };
        let mut r = one_ray(0);
        r.best_t = 1.0;
        r.best_prim = 3;
        r.hit_normal = Vec3::new(0.0, 0.0, -1.0);
        r.hit_albedo = Vec3::ONE;
        r.hit_opacity = 1.0;
        let mut accum = DistributedAccum::new(PixelSpan { start: 0, end: 1 });
        shade_raycast(&mut [r], &lights, &settings(RenderMode::Raycast), &mut accum);
        assert_eq!(accum.rgb_sum[0], Vec3::splat(1.1));
        assert_eq!(accum.alpha_sum[0], 1.0);
        assert_eq!(accum.depth[0], 1.0);
    }

    #[test]
    fn segment_order_does_not_matter() {
        let a = Segment { t0: 1.0, t1: 2.0, rgba: [0.2, 0.1, 0.0, 0.3], t_half: f32::INFINITY };
        let b = Segment { t0: 2.0, t1: 3.0, rgba: [0.0, 0.3, 0.1, 0.6], t_half: 2.5 };
        let x = composite_segments(&mut [a, b]);
        let y = composite_segments(&mut [b, a]);
        assert_eq!(x, y);
        assert_eq!(x.half_depth, Some(2.0));
        assert_eq!(composite_segments(&mut [b]).half_depth, Some(2.5));
    }
}
