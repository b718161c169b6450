//! Structured scalar fields, 1D transfer functions, and brick marching.
//!
//! Samples along a ray are taken at absolute parameters `t = (i + 0.5)·Δt`
//! for integer `i`, never relative to where the ray enters a brick. Splitting
//! a volume into bricks therefore never moves a sample; each sample falls in
//! exactly one brick because brick intervals are half-open.

use alloc::vec::Vec;

use crate::geometry::Ray;
use crate::math::{Aabb, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeError {
    DimsTooSmall,
    ValueCountMismatch { expected: usize, actual: usize },
    SpacingNotPositive,
    EmptyDomain,
    NoControlPoints,
    ControlPointsUnsorted,
    ControlPointOutsideDomain,
    NegativeDensityScale,
    StepNotPositive,
}

impl core::fmt::Display for VolumeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            VolumeError::DimsTooSmall => f.write_str("field dims must be at least 2 per axis"),
            VolumeError::ValueCountMismatch { expected, actual } => {
                write!(f, "field expects {expected} values, got {actual}")
            }
            VolumeError::SpacingNotPositive => f.write_str("field spacing must be positive"),
            VolumeError::EmptyDomain => f.write_str("transfer function domain must satisfy lo < hi"),
            VolumeError::NoControlPoints => f.write_str("transfer function needs a control point"),
            VolumeError::ControlPointsUnsorted => f.write_str("control points must be sorted by position"),
            VolumeError::ControlPointOutsideDomain => f.write_str("control point lies outside the domain"),
            VolumeError::NegativeDensityScale => f.write_str("density scale must be non-negative"),
            VolumeError::StepNotPositive => f.write_str("march step must be positive"),
        }
    }
}

/// Node-centred scalar grid, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredField {
    dims: [u32; 3],
    origin: Vec3,
    spacing: Vec3,
    values: Vec<f32>,
}

impl StructuredField {
    pub fn new(dims: [u32; 3], origin: Vec3, spacing: Vec3, values: Vec<f32>) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d < 2) {
            return Err(VolumeError::DimsTooSmall);
        }
        let expected = dims.iter().map(|&d| d as usize).product();
        if values.len() != expected {
            return Err(VolumeError::ValueCountMismatch { expected, actual: values.len() });
        }
        if !(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0) {
            return Err(VolumeError::SpacingNotPositive);
        }
        Ok(StructuredField { dims, origin, spacing, values })
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn bounds(&self) -> Aabb {
        let cells = Vec3::new(
            (self.dims[0] - 1) as f32,
            (self.dims[1] - 1) as f32,
            (self.dims[2] - 1) as f32,
        );
        Aabb::new(self.origin, self.origin + cells * self.spacing)
    }

    #[inline]
    pub fn node(&self, x: u32, y: u32, z: u32) -> f32 {
        let [dx, dy, _] = self.dims;
        self.values[(x as usize) + (dx as usize) * ((y as usize) + (dy as usize) * (z as usize))]
    }

    /// Trilinear sample; `None` outside the field's box.
    pub fn sample(&self, p: Vec3) -> Option<f32> {
        self.bounds().contains(p).then(|| self.sample_clamped(p))
    }

    /// Trilinear sample with grid coordinates clamped into the field.
    pub fn sample_clamped(&self, p: Vec3) -> f32 {
        let mut cell = [0u32; 3];
        let mut frac = [0.0f32; 3];
        for axis in 0..3 {
            let g = (p[axis] - self.origin[axis]) / self.spacing[axis];
            let max_cell = (self.dims[axis] - 2) as f32;
            let g = g.clamp(0.0, max_cell + 1.0);
            let c = libm::floorf(g).min(max_cell);
            cell[axis] = c as u32;
            frac[axis] = g - c;
        }
        let [x, y, z] = cell;
        let [fx, fy, fz] = frac;
        let lerp = |a: f32, b: f32, t: f32| a + (b - a) * t;
        let c00 = lerp(self.node(x, y, z), self.node(x + 1, y, z), fx);
        let c10 = lerp(self.node(x, y + 1, z), self.node(x + 1, y + 1, z), fx);
        let c01 = lerp(self.node(x, y, z + 1), self.node(x + 1, y, z + 1), fx);
        let c11 = lerp(self.node(x, y + 1, z + 1), self.node(x + 1, y + 1, z + 1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlPoint {
    pub position: f32,
    pub rgba: [f32; 4],
}

/// Piecewise-linear RGBA map; alpha is multiplied by `density_scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction1D {
    domain: (f32, f32),
    points: Vec<ControlPoint>,
    density_scale: f32,
}

impl TransferFunction1D {
    pub fn new(domain: (f32, f32), points: Vec<ControlPoint>, density_scale: f32) -> Result<Self, VolumeError> {
        if !(domain.0 < domain.1) {
            return Err(VolumeError::EmptyDomain);
        }
        if points.is_empty() {
            return Err(VolumeError::NoControlPoints);
        }
        if points.windows(2).any(|w| w[0].position > w[1].position) {
            return Err(VolumeError::ControlPointsUnsorted);
        }
        if points.iter().any(|p| p.position < domain.0 || p.position > domain.1) {
            return Err(VolumeError::ControlPointOutsideDomain);
        }
        if !(density_scale >= 0.0) {
            return Err(VolumeError::NegativeDensityScale);
        }
        Ok(TransferFunction1D { domain, points, density_scale })
    }

    pub fn domain(&self) -> (f32, f32) {
        self.domain
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }

    pub fn density_scale(&self) -> f32 {
        self.density_scale
    }

    pub fn eval(&self, s: f32) -> [f32; 4] {
        let s = s.clamp(self.domain.0, self.domain.1);
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        let mut rgba = if s <= first.position {
            first.rgba
        } else if s >= last.position {
            last.rgba
        } else {
            let i = self.points.partition_point(|p| p.position <= s);
            let (a, b) = (self.points[i - 1], self.points[i]);
            let w = (s - a.position) / (b.position - a.position);
            let mut out = [0.0; 4];
            for c in 0..4 {
                out[c] = a.rgba[c] + (b.rgba[c] - a.rgba[c]) * w;
            }
            out
        };
        rgba[3] *= self.density_scale;
        rgba
    }
}

/// Emission-absorption result of marching one brick, premultiplied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub t0: f32,
    pub t1: f32,
    pub rgba: [f32; 4],
    /// First sample at which this segment's own alpha reaches 0.5, else +inf.
    pub t_half: f32,
}

/// Transmittance across one brick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShadowSegment {
    pub t0: f32,
    pub t1: f32,
    pub transmittance: f32,
}

/// A field with its transfer function and march step; the unit a rank owns.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeBrick {
    pub field: StructuredField,
    pub tf: TransferFunction1D,
    pub step: f32,
}

impl VolumeBrick {
    pub fn new(field: StructuredField, tf: TransferFunction1D, step: Option<f32>) -> Result<Self, VolumeError> {
        let s = field.spacing();
        let step = step.unwrap_or(s.x.min(s.y).min(s.z));
        if !(step > 0.0 && step.is_finite()) {
            return Err(VolumeError::StepNotPositive);
        }
        Ok(VolumeBrick { field, tf, step })
    }

    pub fn bounds(&self) -> Aabb {
        self.field.bounds()
    }

    /// Sample indices `i` with `(i + 0.5)·step` in `[enter, exit)`.
    fn sample_range(&self, enter: f32, exit: f32) -> impl Iterator<Item = f32> + '_ {
        let step = self.step;
        let at = move |i: u64| (i as f32 + 0.5) * step;
        let mut i = libm::ceilf(enter / step - 0.5).max(0.0) as u64;
        while i > 0 && at(i - 1) >= enter {
            i -= 1;
        }
        while at(i) < enter {
            i += 1;
        }
        (i..).map(at).take_while(move |&t| t < exit)
    }

    /// Per-sample opacity after step-length correction, and emitted colour.
    #[inline]
    fn classify(&self, p: Vec3) -> (f32, [f32; 3]) {
        let rgba = self.tf.eval(self.field.sample_clamped(p));
        let alpha = 1.0 - libm::expf(-rgba[3] * self.step);
        (alpha, [rgba[0], rgba[1], rgba[2]])
    }

    /// Front-to-back march over `[t_lo, t_hi)` clipped to the brick. `None`
    /// when no sample position falls inside.
    pub fn march(&self, ray: &Ray, t_lo: f32, t_hi: f32) -> Option<Segment> {
        let (enter, exit) = self.bounds().clip_ray(ray.origin, ray.dir, t_lo, t_hi)?;
        let mut acc = [0.0f32; 4];
        let mut t_half = f32::INFINITY;
        let mut any = false;
        for t in self.sample_range(enter, exit) {
            any = true;
            let (alpha, c) = self.classify(ray.at(t));
            let w = (1.0 - acc[3]) * alpha;
            acc[0] += w * c[0];
            acc[1] += w * c[1];
            acc[2] += w * c[2];
            acc[3] += w;
            if acc[3] >= 0.5 && t_half == f32::INFINITY {
                t_half = t;
            }
        }
        (any && enter < exit).then_some(Segment { t0: enter, t1: exit, rgba: acc, t_half })
    }

    /// Product of `(1 - alpha)` over the samples in `[t_lo, t_hi)`.
    pub fn transmittance(&self, ray: &Ray, t_lo: f32, t_hi: f32) -> Option<ShadowSegment> {
        let (enter, exit) = self.bounds().clip_ray(ray.origin, ray.dir, t_lo, t_hi)?;
        let mut tr = 1.0f32;
        let mut any = false;
        for t in self.sample_range(enter, exit) {
            any = true;
            let (alpha, _) = self.classify(ray.at(t));
            tr *= 1.0 - alpha;
        }
        (any && enter < exit).then_some(ShadowSegment { t0: enter, t1: exit, transmittance: tr })
    }
}
