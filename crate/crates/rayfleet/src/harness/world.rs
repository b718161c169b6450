//! Builds one rank's share of a scene through the object API.

use std::path::Path;

use rayfleet_core::render::RenderMode;
use rayfleet_core::Vec3;

use super::scene::{
    assign_rank, brick_nodes, generate_box_grid, grid_box, parse_obj, scatter_spheres, volume_values, Assign, Mesh,
    Policy, SceneFile, Shape,
};
use crate::api::{ApiError, ArrayData, Device, Handle, ObjectKind, ParamValue};

/// Per-run overrides of the scene's renderer block.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSetup {
    pub mode: RenderMode,
    pub size: [u32; 2],
    pub spp: u32,
    pub bounces: u32,
    pub seed: u64,
}

impl FrameSetup {
    pub fn from_scene(scene: &SceneFile, mode: RenderMode) -> FrameSetup {
        FrameSetup {
            mode,
            size: scene.size,
            spp: scene.renderer.spp,
            bounces: scene.renderer.bounces,
            seed: scene.renderer.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankObjects {
    pub frame: Handle,
    pub world: Handle,
    pub camera: Handle,
    pub renderer: Handle,
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("{0}")]
    Scene(String),
    #[error(transparent)]
    Api(#[from] ApiError),
}

/// Maximal runs `[start, end)` of consecutive units owned by `rank`.
fn runs(count: u64, rank: usize, owner: impl Fn(u64) -> usize) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for i in 0..count {
        if owner(i) != rank {
            continue;
        }
        match out.last_mut() {
            Some(r) if r.1 == i => r.1 = i + 1,
            _ => out.push((i, i + 1)),
        }
    }
    out
}

struct Builder<'a> {
    dev: &'a mut Device,
    surfaces: Vec<Handle>,
    volumes: Vec<Handle>,
}

impl Builder<'_> {
    fn object(&mut self, kind: ObjectKind, subtype: &str, params: Vec<(&str, ParamValue)>) -> Result<Handle, ApiError> {
        let h = self.dev.new_object(kind, subtype)?;
        for (name, value) in params {
            self.dev.set_parameter(h, name, value)?;
        }
        self.dev.commit_parameters(h)?;
        Ok(h)
    }

    fn surface(&mut self, geometry: Handle, material: Handle) -> Result<(), ApiError> {
        let s = self.object(
            ObjectKind::Surface,
            "default",
            vec![("geometry", ParamValue::Object(geometry)), ("material", ParamValue::Object(material))],
        )?;
        self.surfaces.push(s);
        Ok(())
    }

    fn mesh(&mut self, mesh: &Mesh, base: u64, material: Handle) -> Result<(), ApiError> {
        let g = self.object(
            ObjectKind::Geometry,
            "triangle",
            vec![
                ("vertex.position", ParamValue::Array(ArrayData::from_vec3(&mesh.positions))),
                ("primitive.index", ParamValue::Array(ArrayData::from_u32x3(&mesh.indices))),
                ("globalPrimBase", ParamValue::Int(base as i64)),
            ],
        )?;
        self.surface(g, material)
    }
}

/// Creates this rank's world, camera, renderer and frame, all committed.
pub fn build_rank(dev: &mut Device, scene: &SceneFile, base_dir: &Path, setup: &FrameSetup) -> Result<RankObjects, BuildError> {
    let rank = dev.rank();
    let ranks = dev.size();
    let mut b = Builder { dev, surfaces: Vec::new(), volumes: Vec::new() };
    let mut prim_base = 0u64;
    for (entity_no, e) in scene.entities.iter().enumerate() {
        let m = &e.material;
        let mut material = None;
        let mut material_handle = |b: &mut Builder<'_>| -> Result<Handle, ApiError> {
            if let Some(h) = material {
                return Ok(h);
            }
            let h = b.object(
                ObjectKind::Material,
                "matte",
                vec![
                    ("color", ParamValue::Float3(m.albedo)),
                    ("opacity", ParamValue::Float(m.opacity)),
                    ("emission", ParamValue::Float3(m.emission)),
                ],
            )?;
            material = Some(h);
            Ok(h)
        };
        let assign = e.assign.unwrap_or(Assign::Policy(Policy::Roundrobin));
        let owner = |i: u64| assign_rank(assign, e.assign_seed, i, ranks);
        match &e.shape {
            Shape::Triangles(t) => {
                let mesh = match &t.obj {
                    Some(path) => {
                        let p = base_dir.join(path);
                        let text = std::fs::read_to_string(&p).map_err(|err| BuildError::Scene(format!("{}: {err}", p.display())))?;
                        parse_obj(&text).map_err(BuildError::Scene)?
                    }
                    None => Mesh {
                        positions: t.positions.iter().map(|p| Vec3::from_array(*p)).collect(),
                        indices: if t.indices.is_empty() {
                            (0..t.positions.len() as u32 / 3).map(|k| [3 * k, 3 * k + 1, 3 * k + 2]).collect()
                        } else {
                            t.indices.clone()
                        },
                    },
                };
                let count = mesh.indices.len() as u64;
                for (s, end) in runs(count, rank, owner) {
                    let part = Mesh { positions: mesh.positions.clone(), indices: mesh.indices[s as usize..end as usize].to_vec() };
                    let mat = material_handle(&mut b)?;
                    b.mesh(&part, prim_base + s, mat)?;
                }
                prim_base += count;
            }
            Shape::Spheres(sp) => {
                let (centers, radii) = match &sp.scatter {
                    Some(s) => scatter_spheres(s),
                    None => (sp.centers.clone(), sp.radii.clone()),
                };
                if centers.len() != radii.len() {
                    return Err(BuildError::Scene(format!("entity {entity_no}: centers and radii differ in length")));
                }
                let count = centers.len() as u64;
                for (s, end) in runs(count, rank, owner) {
                    let (s, end) = (s as usize, end as usize);
                    let c: Vec<Vec3> = centers[s..end].iter().map(|p| Vec3::from_array(*p)).collect();
                    let mat = material_handle(&mut b)?;
                    let g = b.object(
                        ObjectKind::Geometry,
                        "sphere",
                        vec![
                            ("vertex.position", ParamValue::Array(ArrayData::from_vec3(&c))),
                            ("vertex.radius", ParamValue::Array(ArrayData::from_f32(&radii[s..end]))),
                            ("globalPrimBase", ParamValue::Int((prim_base + s as u64) as i64)),
                        ],
                    )?;
                    b.surface(g, mat)?;
                }
                prim_base += count;
            }
            Shape::BoxGrid(spec) => {
                if spec.n == 0 {
                    return Err(BuildError::Scene(format!("entity {entity_no}: box grid needs n >= 1")));
                }
                let boxes = spec.n.pow(3) as u64;
                let mine: Vec<u32> = match e.assign {
                    None => generate_box_grid(spec, ranks).swap_remove(rank),
                    Some(_) => (0..boxes).filter(|&i| owner(i) == rank).map(|i| i as u32).collect(),
                };
                let mut k = 0;
                while k < mine.len() {
                    let start = mine[k];
                    let mut end = start + 1;
                    while k + 1 < mine.len() && mine[k + 1] == end {
                        k += 1;
                        end += 1;
                    }
                    k += 1;
                    let mut mesh = Mesh::default();
                    for i in start..end {
                        let one = grid_box(spec, i);
                        let off = mesh.positions.len() as u32;
                        mesh.positions.extend(one.positions);
                        mesh.indices.extend(one.indices.iter().map(|t| t.map(|v| v + off)));
                    }
                    let mat = material_handle(&mut b)?;
                    b.mesh(&mesh, prim_base + 12 * start as u64, mat)?;
                }
                prim_base += 12 * boxes;
            }
            Shape::Volume(v) => {
                let counts = v.bricks;
                if v.dims.iter().any(|&d| d < 2) {
                    return Err(BuildError::Scene(format!("entity {entity_no}: volume dims must be at least 2")));
                }
                if (0..3).any(|a| counts[a] == 0 || counts[a] > v.dims[a] - 1) {
                    return Err(BuildError::Scene(format!("entity {entity_no}: brick counts must be in 1..dims-1")));
                }
                let total = counts.iter().map(|&c| c as u64).product::<u64>();
                let mine: Vec<u64> = (0..total).filter(|&i| owner(i) == rank).collect();
                if mine.is_empty() {
                    continue;
                }
                let values = volume_values(v, base_dir).map_err(BuildError::Scene)?;
                let tf_pos: Vec<f32> = v.tf.points.iter().map(|p| p[0]).collect();
                let tf_col: Vec<[f32; 4]> = v.tf.points.iter().map(|p| [p[1], p[2], p[3], p[4]]).collect();
                for i in mine {
                    let idx = [i % counts[0] as u64, (i / counts[0] as u64) % counts[1] as u64, i / (counts[0] as u64 * counts[1] as u64)];
                    let r: Vec<(u32, u32)> = (0..3).map(|a| brick_nodes(v.dims[a], counts[a], idx[a] as u32)).collect();
                    let sub = [r[0].1 - r[0].0 + 1, r[1].1 - r[1].0 + 1, r[2].1 - r[2].0 + 1];
                    let mut data = Vec::with_capacity(sub.iter().map(|&d| d as usize).product());
                    for z in r[2].0..=r[2].1 {
                        for y in r[1].0..=r[1].1 {
                            let row = (z as usize * v.dims[1] as usize + y as usize) * v.dims[0] as usize;
                            data.extend_from_slice(&values[row + r[0].0 as usize..=row + r[0].1 as usize]);
                        }
                    }
                    let origin = [0, 1, 2].map(|a| v.origin[a] + r[a].0 as f32 * v.spacing[a]);
                    let field = b.object(
                        ObjectKind::SpatialField,
                        "structuredRegular",
                        vec![
                            ("dims", ParamValue::Int3(sub.map(|d| d as i64))),
                            ("origin", ParamValue::Float3(origin)),
                            ("spacing", ParamValue::Float3(v.spacing)),
                            ("data", ParamValue::Array(ArrayData::from_f32(&data))),
                        ],
                    )?;
                    let mut params = vec![
                        ("value", ParamValue::Object(field)),
                        ("valueRange", ParamValue::Float2(v.tf.domain)),
                        ("controlPoint.position", ParamValue::Array(ArrayData::from_f32(&tf_pos))),
                        ("controlPoint.color", ParamValue::Array(ArrayData::from_f32x4(&tf_col))),
                        ("densityScale", ParamValue::Float(v.tf.density_scale)),
                    ];
                    // every brick must march the same global step, so it is
                    // fixed from the whole field, not from the brick
                    let step = v.step.unwrap_or(v.spacing[0].min(v.spacing[1]).min(v.spacing[2]));
                    params.push(("stepSize", ParamValue::Float(step)));
                    let vol = b.object(ObjectKind::Volume, "transferFunction1D", params)?;
                    b.volumes.push(vol);
                }
            }
        }
    }

    let mut lights = Vec::new();
    if let Some(d) = &scene.lights.directional {
        lights.push(b.object(
            ObjectKind::Light,
            "directional",
            vec![("direction", ParamValue::Float3(d.direction)), ("irradiance", ParamValue::Float3(d.irradiance))],
        )?);
    }
    if let Some(a) = scene.lights.ambient {
        lights.push(b.object(ObjectKind::Light, "ambient", vec![("radiance", ParamValue::Float3(a))])?);
    }
    let surfaces = std::mem::take(&mut b.surfaces);
    let volumes = std::mem::take(&mut b.volumes);
    let world = b.object(
        ObjectKind::World,
        "default",
        vec![
            ("surface", ParamValue::Array(ArrayData::from_handles(&surfaces))),
            ("volume", ParamValue::Array(ArrayData::from_handles(&volumes))),
            ("light", ParamValue::Array(ArrayData::from_handles(&lights))),
        ],
    )?;
    let camera = b.object(ObjectKind::Camera, "perspective", Vec::new())?;
    set_camera(b.dev, camera, scene, setup.size)?;
    let renderer = b.object(
        ObjectKind::Renderer,
        match setup.mode {
            RenderMode::Raycast => "raycast",
            RenderMode::PathTracer => "pathtracer",
        },
        vec![
            ("background", ParamValue::Float4(scene.renderer.background)),
            ("pixelSamples", ParamValue::Int(setup.spp as i64)),
            ("maxPathLength", ParamValue::Int(setup.bounces as i64)),
            ("seed", ParamValue::Int(setup.seed as i64)),
        ],
    )?;
    let frame = b.object(
        ObjectKind::Frame,
        "default",
        vec![
            ("size", ParamValue::Int2([setup.size[0] as i64, setup.size[1] as i64])),
            ("world", ParamValue::Object(world)),
            ("camera", ParamValue::Object(camera)),
            ("renderer", ParamValue::Object(renderer)),
        ],
    )?;
    Ok(RankObjects { frame, world, camera, renderer })
}

/// Sets and commits the scene camera for an image of `size`.
pub fn set_camera(dev: &mut Device, camera: Handle, scene: &SceneFile, size: [u32; 2]) -> Result<(), BuildError> {
    let (dir, up) = scene.camera.frame().map_err(BuildError::Scene)?;
    dev.set_parameter(camera, "position", ParamValue::Float3(scene.camera.position))?;
    dev.set_parameter(camera, "direction", ParamValue::vec3(dir))?;
    dev.set_parameter(camera, "up", ParamValue::vec3(up))?;
    dev.set_parameter(camera, "fovy", ParamValue::Float(scene.camera.fovy))?;
    dev.set_parameter(camera, "aspect", ParamValue::Float(size[0] as f32 / size[1] as f32))?;
    dev.commit_parameters(camera)?;
    Ok(())
}
