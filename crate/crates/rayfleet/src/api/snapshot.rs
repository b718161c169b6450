//! Turns committed objects into the immutable inputs of one render.

use std::collections::{BTreeMap, HashMap};

use rayfleet_core::camera::PerspectiveCamera;
use rayfleet_core::geometry::{SphereSet, TriangleMesh};
use rayfleet_core::lights::{DirectionalLight, Lights};
use rayfleet_core::render::{RenderMode, RenderSettings};
use rayfleet_core::scene::{LocalScene, Material, SceneBuilder};
use rayfleet_core::volume::{ControlPoint, StructuredField, TransferFunction1D, VolumeBrick};
use rayfleet_core::{Aabb, Vec3};

use super::{frame_size, ApiError, ArrayData, Handle, ObjectKind, ObjectRecord, ParamValue};
use crate::device::RenderJob;

type Objects = HashMap<Handle, ObjectRecord>;
type Params = BTreeMap<String, ParamValue>;

fn invalid(msg: impl Into<String>) -> ApiError {
    ApiError::ValidationError(msg.into())
}

fn float(p: &Params, name: &str, default: f32) -> Result<f32, ApiError> {
    match p.get(name) {
        None => Ok(default),
        Some(ParamValue::Float(v)) => Ok(*v),
        Some(v) => Err(invalid(format!("{name}: expected float, got {v:?}"))),
    }
}

fn float2(p: &Params, name: &str, default: [f32; 2]) -> Result<[f32; 2], ApiError> {
    match p.get(name) {
        None => Ok(default),
        Some(ParamValue::Float2(v)) => Ok(*v),
        Some(v) => Err(invalid(format!("{name}: expected float2, got {v:?}"))),
    }
}

fn vec3(p: &Params, name: &str, default: Vec3) -> Result<Vec3, ApiError> {
    match p.get(name) {
        None => Ok(default),
        Some(ParamValue::Float3(v)) => Ok(Vec3::from_array(*v)),
        Some(v) => Err(invalid(format!("{name}: expected float3, got {v:?}"))),
    }
}

fn float4(p: &Params, name: &str, default: [f32; 4]) -> Result<[f32; 4], ApiError> {
    match p.get(name) {
        None => Ok(default),
        Some(ParamValue::Float4(v)) => Ok(*v),
        Some(v) => Err(invalid(format!("{name}: expected float4, got {v:?}"))),
    }
}

fn int(p: &Params, name: &str, default: i64) -> Result<i64, ApiError> {
    match p.get(name) {
        None => Ok(default),
        Some(ParamValue::Int(v)) => Ok(*v),
        Some(v) => Err(invalid(format!("{name}: expected int, got {v:?}"))),
    }
}

fn object<'a>(objs: &'a Objects, p: &Params, name: &str, kind: ObjectKind) -> Result<Option<&'a ObjectRecord>, ApiError> {
    match p.get(name) {
        None => Ok(None),
        Some(ParamValue::Object(h)) => {
            let r = objs.get(h).ok_or(ApiError::InvalidHandle(*h))?;
            if r.kind != kind {
                return Err(invalid(format!("{name}: expected a {kind:?}, got a {:?}", r.kind)));
            }
            Ok(Some(r))
        }
        Some(v) => Err(invalid(format!("{name}: expected an object, got {v:?}"))),
    }
}

fn required<'a>(objs: &'a Objects, p: &Params, name: &str, kind: ObjectKind) -> Result<&'a ObjectRecord, ApiError> {
    object(objs, p, name, kind)?.ok_or_else(|| invalid(format!("missing {name}")))
}

/// Inline array, or an Array object holding one in `"value"`.
fn array<'a>(objs: &'a Objects, p: &'a Params, name: &str) -> Result<Option<&'a ArrayData>, ApiError> {
    match p.get(name) {
        None => Ok(None),
        Some(ParamValue::Array(a)) => Ok(Some(a)),
        Some(ParamValue::Object(_)) => {
            let r = required(objs, p, name, ObjectKind::Array)?;
            match r.committed.get("value") {
                Some(ParamValue::Array(a)) => Ok(Some(a)),
                _ => Err(invalid(format!("{name}: array object has no value"))),
            }
        }
        Some(v) => Err(invalid(format!("{name}: expected an array, got {v:?}"))),
    }
}

fn typed<T>(a: Option<&ArrayData>, name: &str, f: impl Fn(&ArrayData) -> Option<T>) -> Result<Option<T>, ApiError> {
    a.map(|a| f(a).ok_or_else(|| invalid(format!("{name}: wrong element type {:?}", a.element()))))
        .transpose()
}

fn handles<'a>(objs: &'a Objects, p: &'a Params, name: &str, kind: ObjectKind) -> Result<Vec<&'a ObjectRecord>, ApiError> {
    let Some(list) = typed(array(objs, p, name)?, name, ArrayData::as_handles)? else {
        return Ok(Vec::new());
    };
    list.iter()
        .map(|h| {
            let r = objs.get(h).ok_or(ApiError::InvalidHandle(*h))?;
            if r.kind != kind {
                return Err(invalid(format!("{name}: expected {kind:?} handles, found a {:?}", r.kind)));
            }
            Ok(r)
        })
        .collect()
}

fn material(objs: &Objects, surface: &ObjectRecord) -> Result<Material, ApiError> {
    let Some(m) = object(objs, &surface.committed, "material", ObjectKind::Material)? else {
        return Ok(Material::default());
    };
    let d = Material::default();
    let p = &m.committed;
    let mat = Material {
        albedo: vec3(p, "color", d.albedo)?,
        opacity: float(p, "opacity", d.opacity)?,
        emission: vec3(p, "emission", d.emission)?,
    };
    if !mat.is_valid() {
        return Err(invalid(format!("matte material out of range: {mat:?}")));
    }
    Ok(mat)
}

enum Geometry {
    Mesh(TriangleMesh),
    Spheres(SphereSet),
}

fn geometry(objs: &Objects, g: &ObjectRecord) -> Result<Geometry, ApiError> {
    let p = &g.committed;
    let base = int(p, "globalPrimBase", 0)?;
    if base < 0 {
        return Err(invalid("globalPrimBase must be non-negative"));
    }
    let positions = typed(array(objs, p, "vertex.position")?, "vertex.position", ArrayData::as_vec3)?
        .ok_or_else(|| invalid("geometry needs vertex.position"))?;
    match g.subtype.as_str() {
        "triangle" => {
            let indices = match typed(array(objs, p, "primitive.index")?, "primitive.index", ArrayData::as_u32x3)? {
                Some(i) => i,
                None => {
                    if positions.len() % 3 != 0 {
                        return Err(invalid("unindexed triangles need a multiple of three vertices"));
                    }
                    (0..positions.len() as u32 / 3).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect()
                }
            };
            let mesh = TriangleMesh { positions, indices, global_prim_base: base as u64 };
            if !mesh.indices_in_range() {
                return Err(invalid("primitive.index refers past the vertex array"));
            }
            Ok(Geometry::Mesh(mesh))
        }
        "sphere" => {
            let radii = match typed(array(objs, p, "vertex.radius")?, "vertex.radius", ArrayData::as_f32)? {
                Some(r) if r.len() == positions.len() => r,
                Some(_) => return Err(invalid("vertex.radius length differs from vertex.position")),
                None => vec![float(p, "radius", 1.0)?; positions.len()],
            };
            if radii.iter().any(|&r| !(r > 0.0)) {
                return Err(invalid("sphere radii must be positive"));
            }
            Ok(Geometry::Spheres(SphereSet { centers: positions, radii, global_prim_base: base as u64 }))
        }
        other => Err(invalid(format!("geometry subtype {other}"))),
    }
}

fn brick(objs: &Objects, v: &ObjectRecord) -> Result<VolumeBrick, ApiError> {
    let p = &v.committed;
    let f = required(objs, p, "value", ObjectKind::SpatialField)?;
    let fp = &f.committed;
    let dims = match fp.get("dims") {
        Some(ParamValue::Int3(d)) if d.iter().all(|&x| (0..=u32::MAX as i64).contains(&x)) => {
            [d[0] as u32, d[1] as u32, d[2] as u32]
        }
        other => return Err(invalid(format!("field dims: expected int3, got {other:?}"))),
    };
    let values = typed(array(objs, fp, "data")?, "data", ArrayData::as_f32)?.ok_or_else(|| invalid("field needs data"))?;
    let field = StructuredField::new(dims, vec3(fp, "origin", Vec3::ZERO)?, vec3(fp, "spacing", Vec3::ONE)?, values)
        .map_err(|e| invalid(e.to_string()))?;
    let (lo, hi) = {
        let r = float2(p, "valueRange", [0.0, 1.0])?;
        (r[0], r[1])
    };
    let positions = typed(array(objs, p, "controlPoint.position")?, "controlPoint.position", ArrayData::as_f32)?;
    let colors = typed(array(objs, p, "controlPoint.color")?, "controlPoint.color", ArrayData::as_f32x4)?;
    let points = match (positions, colors) {
        (Some(pos), Some(col)) if pos.len() == col.len() => {
            pos.into_iter().zip(col).map(|(position, rgba)| ControlPoint { position, rgba }).collect()
        }
        (None, None) => vec![
            ControlPoint { position: lo, rgba: [0.0; 4] },
            ControlPoint { position: hi, rgba: [1.0; 4] },
        ],
        _ => return Err(invalid("controlPoint.position and controlPoint.color must come together and match")),
    };
    let tf = TransferFunction1D::new((lo, hi), points, float(p, "densityScale", 1.0)?).map_err(|e| invalid(e.to_string()))?;
    let step = p.get("stepSize").map(|_| float(p, "stepSize", 0.0)).transpose()?;
    VolumeBrick::new(field, tf, step).map_err(|e| invalid(e.to_string()))
}

fn world_scene(objs: &Objects, world: &ObjectRecord) -> Result<(LocalScene, Lights), ApiError> {
    let mut b = SceneBuilder::new();
    for s in handles(objs, &world.committed, "surface", ObjectKind::Surface)? {
        let g = required(objs, &s.committed, "geometry", ObjectKind::Geometry)?;
        let m = material(objs, s)?;
        match geometry(objs, g)? {
            Geometry::Mesh(mesh) => b.add_mesh(&mesh, m),
            Geometry::Spheres(set) => b.add_spheres(&set, m),
        };
    }
    for v in handles(objs, &world.committed, "volume", ObjectKind::Volume)? {
        b.add_brick(brick(objs, v)?);
    }
    let mut lights = Lights::default();
    for l in handles(objs, &world.committed, "light", ObjectKind::Light)? {
        let p = &l.committed;
        match l.subtype.as_str() {
            "directional" => {
                if lights.directional.is_some() {
                    return Err(invalid("at most one directional light is supported"));
                }
                let direction = vec3(p, "direction", Vec3::new(0.0, 0.0, -1.0))?;
                if direction.is_zero() || !direction.is_finite() {
                    return Err(invalid("directional light needs a nonzero direction"));
                }
                lights.directional =
                    Some(DirectionalLight { direction: direction.normalize(), irradiance: vec3(p, "irradiance", Vec3::ONE)? });
            }
            _ => lights.ambient += vec3(p, "radiance", Vec3::ONE)?,
        }
    }
    if !lights.is_valid() {
        return Err(invalid("light values must be non-negative"));
    }
    Ok((b.build(), lights))
}

pub(super) fn world_bounds(objs: &Objects, world: &ObjectRecord) -> Result<Aabb, ApiError> {
    Ok(world_scene(objs, world)?.0.bounds())
}

pub(super) fn local_bounds(objs: &Objects, rec: &ObjectRecord) -> Option<Aabb> {
    let g = match rec.kind {
        ObjectKind::Surface => required(objs, &rec.committed, "geometry", ObjectKind::Geometry).ok()?,
        _ => rec,
    };
    let mut b = SceneBuilder::new();
    match geometry(objs, g).ok()? {
        Geometry::Mesh(m) => b.add_mesh(&m, Material::default()),
        Geometry::Spheres(s) => b.add_spheres(&s, Material::default()),
    };
    Some(b.build().bounds())
}

pub(super) fn build_job(objs: &Objects, frame: &ObjectRecord) -> Result<RenderJob, ApiError> {
    let fp = &frame.committed;
    let (width, height) = frame_size(fp)?.ok_or_else(|| invalid("frame has no size"))?;
    let world = required(objs, fp, "world", ObjectKind::World)?;
    let cam = required(objs, fp, "camera", ObjectKind::Camera)?;
    let ren = required(objs, fp, "renderer", ObjectKind::Renderer)?;
    let cp = &cam.committed;
    let camera = PerspectiveCamera::new(
        vec3(cp, "position", Vec3::ZERO)?,
        vec3(cp, "direction", Vec3::new(0.0, 0.0, -1.0))?,
        vec3(cp, "up", Vec3::new(0.0, 1.0, 0.0))?,
        float(cp, "fovy", 60.0)?,
        float(cp, "aspect", width as f32 / height as f32)?,
    )
    .map_err(|e| invalid(e.to_string()))?;
    let rp = &ren.committed;
    let positive = |name: &str, default: i64| -> Result<u32, ApiError> {
        let v = int(rp, name, default)?;
        u32::try_from(v).ok().filter(|&v| v >= 1).ok_or_else(|| invalid(format!("{name} must be a positive integer")))
    };
    let settings = RenderSettings {
        mode: if ren.subtype == "pathtracer" { RenderMode::PathTracer } else { RenderMode::Raycast },
        spp: positive("pixelSamples", 1)?,
        max_bounces: positive("maxPathLength", 5)?,
        background: float4(rp, "background", [0.0, 0.0, 0.0, 1.0])?,
        seed: int(rp, "seed", 0)? as u64,
    };
    if !settings.is_valid() {
        return Err(invalid("renderer background must be finite"));
    }
    let (scene, lights) = world_scene(objs, world)?;
    Ok(RenderJob { scene, camera, lights, settings, width, height })
}
