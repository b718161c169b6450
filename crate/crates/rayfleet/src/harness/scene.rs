//! The `rayfleet-scene/1` JSON format, its generators, and the split of a
//! scene across ranks.
//!
//! Every entity is cut into units (triangles, spheres, boxes, or volume
//! bricks) and each unit is assigned to one rank. Primitive ids are handed
//! out in scene order before the split, so they do not depend on the rank
//! count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use rayfleet_core::rng::splitmix64;
use rayfleet_core::Vec3;

pub const SCHEMA: &str = "rayfleet-scene/1";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SceneFile {
    pub schema: String,
    pub camera: CameraSpec,
    #[serde(default)]
    pub lights: LightsSpec,
    #[serde(default)]
    pub renderer: RendererSpec,
    #[serde(default = "default_size")]
    pub size: [u32; 2],
    pub entities: Vec<Entity>,
}

fn default_size() -> [u32; 2] {
    [256, 256]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CameraSpec {
    pub position: [f32; 3],
    #[serde(default)]
    pub direction: Option<[f32; 3]>,
    #[serde(default)]
    pub look_at: Option<[f32; 3]>,
    #[serde(default = "default_up")]
    pub up: [f32; 3],
    /// Vertical field of view in degrees.
    #[serde(default = "default_fovy")]
    pub fovy: f32,
}

fn default_up() -> [f32; 3] {
    [0.0, 1.0, 0.0]
}

fn default_fovy() -> f32 {
    45.0
}

impl CameraSpec {
    /// Unit view direction and an up vector orthogonal to it.
    pub fn frame(&self) -> Result<(Vec3, Vec3), String> {
        let pos = Vec3::from_array(self.position);
        let dir = match (self.direction, self.look_at) {
            (Some(d), None) => Vec3::from_array(d),
            (None, Some(t)) => Vec3::from_array(t) - pos,
            _ => return Err("camera needs exactly one of direction and lookAt".into()),
        }
        .normalize();
        let up = Vec3::from_array(self.up);
        let right = dir.cross(up);
        if dir.is_zero() || right.length() < 1e-6 {
            return Err("camera direction is zero or parallel to up".into());
        }
        Ok((dir, right.cross(dir).normalize()))
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct LightsSpec {
    #[serde(default)]
    pub directional: Option<DirectionalSpec>,
    #[serde(default)]
    pub ambient: Option<[f32; 3]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct DirectionalSpec {
    /// Direction the light travels, away from the light.
    pub direction: [f32; 3],
    #[serde(default = "ones")]
    pub irradiance: [f32; 3],
}

fn ones() -> [f32; 3] {
    [1.0; 3]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RendererSpec {
    #[serde(default = "default_background")]
    pub background: [f32; 4],
    #[serde(default = "one")]
    pub spp: u32,
    #[serde(default = "five")]
    pub bounces: u32,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RendererSpec {
    fn default() -> Self {
        RendererSpec { background: default_background(), spp: 1, bounces: 5, seed: 0 }
    }
}

fn default_background() -> [f32; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

fn one() -> u32 {
    1
}

fn five() -> u32 {
    5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Entity {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default)]
    pub material: MaterialSpec,
    #[serde(default)]
    pub assign: Option<Assign>,
    /// Seed for `"hashed"` assignment; box grids use their own seed.
    #[serde(default)]
    pub assign_seed: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Shape {
    Triangles(TrianglesSpec),
    Spheres(SpheresSpec),
    BoxGrid(BoxGridSpec),
    Volume(VolumeSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TrianglesSpec {
    #[serde(default)]
    pub positions: Vec<[f32; 3]>,
    #[serde(default)]
    pub indices: Vec<[u32; 3]>,
    /// Wavefront OBJ file, relative to the scene file.
    #[serde(default)]
    pub obj: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SpheresSpec {
    #[serde(default)]
    pub centers: Vec<[f32; 3]>,
    #[serde(default)]
    pub radii: Vec<f32>,
    /// Procedural alternative: `count` spheres scattered in a box.
    #[serde(default)]
    pub scatter: Option<ScatterSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ScatterSpec {
    pub count: usize,
    pub min: [f32; 3],
    pub max: [f32; 3],
    pub radius: [f32; 2],
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct BoxGridSpec {
    pub n: u32,
    pub box_size: f32,
    pub gap: f32,
    #[serde(default)]
    pub seed: u64,
    /// Centre of the grid.
    #[serde(default)]
    pub center: [f32; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct VolumeSpec {
    pub dims: [u32; 3],
    #[serde(default)]
    pub origin: [f32; 3],
    #[serde(default = "ones")]
    pub spacing: [f32; 3],
    /// Little-endian float32, x fastest, relative to the scene file.
    #[serde(default)]
    pub raw: Option<PathBuf>,
    #[serde(default)]
    pub checker: Option<CheckerSpec>,
    /// Number of bricks along each axis.
    #[serde(default = "one_brick")]
    pub bricks: [u32; 3],
    pub tf: TfSpec,
    /// March step; defaults to the smallest spacing component.
    #[serde(default)]
    pub step: Option<f32>,
}

fn one_brick() -> [u32; 3] {
    [1; 3]
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CheckerSpec {
    /// Cells per checker square along each axis.
    pub cell: u32,
    #[serde(default)]
    pub low: f32,
    #[serde(default = "one_f")]
    pub high: f32,
}

fn one_f() -> f32 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TfSpec {
    pub domain: [f32; 2],
    /// `[position, r, g, b, a]` rows in ascending position.
    pub points: Vec<[f32; 5]>,
    #[serde(default = "one_f")]
    pub density_scale: f32,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct MaterialSpec {
    #[serde(default = "default_albedo")]
    pub albedo: [f32; 3],
    #[serde(default = "one_f")]
    pub opacity: f32,
    #[serde(default)]
    pub emission: [f32; 3],
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec { albedo: default_albedo(), opacity: 1.0, emission: [0.0; 3] }
    }
}

fn default_albedo() -> [f32; 3] {
    [0.8; 3]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Assign {
    /// Everything to one rank (taken modulo the rank count).
    Rank(usize),
    Policy(Policy),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Roundrobin,
    Hashed,
}

/// Rank for unit `i` of an entity.
pub fn assign_rank(assign: Assign, seed: u64, i: u64, ranks: usize) -> usize {
    match assign {
        Assign::Rank(r) => r % ranks,
        Assign::Policy(Policy::Roundrobin) => (i % ranks as u64) as usize,
        Assign::Policy(Policy::Hashed) => (splitmix64(seed ^ i) % ranks as u64) as usize,
    }
}

pub fn load(path: &Path) -> Result<SceneFile, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let scene: SceneFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if scene.schema != SCHEMA {
        return Err(format!("{}: schema {:?}, expected {SCHEMA:?}", path.display(), scene.schema));
    }
    Ok(scene)
}

/// A triangle list with its own vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub positions: Vec<Vec3>,
    pub indices: Vec<[u32; 3]>,
}

/// The 12 triangles of an axis-aligned box, in a fixed order.
pub fn box_mesh(min: Vec3, max: Vec3) -> Mesh {
    let c = |x: bool, y: bool, z: bool| {
        Vec3::new(if x { max.x } else { min.x }, if y { max.y } else { min.y }, if z { max.z } else { min.z })
    };
    let positions = vec![
        c(false, false, false),
        c(true, false, false),
        c(true, true, false),
        c(false, true, false),
        c(false, false, true),
        c(true, false, true),
        c(true, true, true),
        c(false, true, true),
    ];
    let quads = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [3, 7, 6, 2], [0, 4, 7, 3], [1, 2, 6, 5]];
    let indices = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    Mesh { positions, indices }
}

/// Box `i` of an `n³` grid, x fastest.
pub fn grid_box(spec: &BoxGridSpec, i: u32) -> Mesh {
    let n = spec.n;
    let (ix, iy, iz) = (i % n, (i / n) % n, i / (n * n));
    let pitch = spec.box_size + spec.gap;
    let half_span = (n as f32 - 1.0) * 0.5;
    let at = |k: u32, c: f32| c + (k as f32 - half_span) * pitch - spec.box_size * 0.5;
    let min = Vec3::new(at(ix, spec.center[0]), at(iy, spec.center[1]), at(iz, spec.center[2]));
    box_mesh(min, min + Vec3::splat(spec.box_size))
}

/// Box indices held by each rank; box `i` goes to `splitmix64(seed ^ i) mod N`.
pub fn generate_box_grid(spec: &BoxGridSpec, ranks: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); ranks];
    for i in 0..spec.n.pow(3) {
        out[assign_rank(Assign::Policy(Policy::Hashed), spec.seed, i as u64, ranks)].push(i);
    }
    out
}

/// Triangulated OBJ: `v` and `f` records only; polygons become fans.
pub fn parse_obj(text: &str) -> Result<Mesh, String> {
    let mut mesh = Mesh::default();
    for (line_no, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let v: Vec<f32> = it.take(3).map(|s| s.parse::<f32>()).collect::<Result<_, _>>().map_err(|e| {
                    format!("obj line {}: {e}", line_no + 1)
                })?;
                if v.len() != 3 {
                    return Err(format!("obj line {}: vertex needs three coordinates", line_no + 1));
                }
                mesh.positions.push(Vec3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let n = mesh.positions.len() as i64;
                let idx: Vec<u32> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let k: i64 = first.parse().map_err(|_| format!("obj line {}: bad index {tok:?}", line_no + 1))?;
                        let k = if k < 0 { n + k } else { k - 1 };
                        if k < 0 || k >= n {
                            return Err(format!("obj line {}: index {tok} out of range", line_no + 1));
                        }
                        Ok(k as u32)
                    })
                    .collect::<Result<_, String>>()?;
                if idx.len() < 3 {
                    return Err(format!("obj line {}: face needs three vertices", line_no + 1));
                }
                for k in 1..idx.len() - 1 {
                    mesh.indices.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

/// Cheap deterministic scatter for procedural sphere fields.
pub fn scatter_spheres(s: &ScatterSpec) -> (Vec<[f32; 3]>, Vec<f32>) {
    let unit = |k: u64| (splitmix64(s.seed ^ k) >> 40) as f32 / (1u64 << 24) as f32;
    let mut centers = Vec::with_capacity(s.count);
    let mut radii = Vec::with_capacity(s.count);
    for i in 0..s.count as u64 {
        let c = [0, 1, 2].map(|a| s.min[a] + (s.max[a] - s.min[a]) * unit(i * 4 + a as u64));
        centers.push(c);
        radii.push(s.radius[0] + (s.radius[1] - s.radius[0]) * unit(i * 4 + 3));
    }
    (centers, radii)
}

/// Node values of a volume entity, x fastest.
pub fn volume_values(v: &VolumeSpec, base_dir: &Path) -> Result<Vec<f32>, String> {
    let [dx, dy, dz] = v.dims;
    let n = dx as usize * dy as usize * dz as usize;
    match (&v.raw, &v.checker) {
        (Some(raw), None) => {
            let path = base_dir.join(raw);
            let bytes = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            if bytes.len() != n * 4 {
                return Err(format!("{}: {} bytes, expected {}", path.display(), bytes.len(), n * 4));
            }
            Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        }
        (None, Some(c)) => {
            if c.cell == 0 {
                return Err("checker cell must be positive".into());
            }
            let mut out = Vec::with_capacity(n);
            for z in 0..dz {
                for y in 0..dy {
                    for x in 0..dx {
                        let parity = (x / c.cell + y / c.cell + z / c.cell) % 2;
                        out.push(if parity == 0 { c.low } else { c.high });
                    }
                }
            }
            Ok(out)
        }
        _ => Err("volume needs exactly one of raw and checker".into()),
    }
}

/// Node range `[first, last]` of brick `k` of `count` along an axis of `dims`
/// nodes. Neighbouring bricks share their boundary nodes so every cell is
/// whole in exactly one brick.
pub fn brick_nodes(dims: u32, count: u32, k: u32) -> (u32, u32) {
    let cells = dims as u64 - 1;
    let at = |k: u32| (k as u64 * cells / count as u64) as u32;
    (at(k), at(k + 1))
}

pub fn base_dir(scene_path: &Path) -> PathBuf {
    scene_path.parent().map(Path::to_path_buf).unwrap_or_default()
}
