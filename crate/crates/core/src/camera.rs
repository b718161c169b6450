use crate::geometry::Ray;
use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CameraError {
    DirectionNotUnit,
    UpNotUnit,
    UpParallel,
    FovyOutOfRange,
    AspectNotPositive,
}

impl core::fmt::Display for CameraError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            CameraError::DirectionNotUnit => "camera direction must be unit length",
            CameraError::UpNotUnit => "camera up must be unit length",
            CameraError::UpParallel => "camera up is parallel to direction",
            CameraError::FovyOutOfRange => "fovy must lie in (0, 180) degrees",
            CameraError::AspectNotPositive => "aspect must be positive",
        };
        f.write_str(msg)
    }
}

/// Pinhole camera. `fovy` is the full vertical field of view in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerspectiveCamera {
    pub position: Vec3,
    pub direction: Vec3,
    pub up: Vec3,
    pub fovy: f32,
    pub aspect: f32,
    right: Vec3,
    true_up: Vec3,
    tan_half: f32,
}

impl PerspectiveCamera {
    pub fn new(position: Vec3, direction: Vec3, up: Vec3, fovy: f32, aspect: f32) -> Result<Self, CameraError> {
        if (direction.dot(direction) - 1.0).abs() > 1e-6 {
            return Err(CameraError::DirectionNotUnit);
        }
        if (up.dot(up) - 1.0).abs() > 1e-6 {
            return Err(CameraError::UpNotUnit);
        }
        if !(fovy > 0.0 && fovy < 180.0) {
            return Err(CameraError::FovyOutOfRange);
        }
        if !(aspect > 0.0 && aspect.is_finite()) {
            return Err(CameraError::AspectNotPositive);
        }
        let right = direction.cross(up);
        if right.length() < 1e-6 {
            return Err(CameraError::UpParallel);
        }
        let right = right.normalize();
        let true_up = right.cross(direction);
        let tan_half = libm::tanf(fovy * (core::f32::consts::PI / 180.0) * 0.5);
        Ok(PerspectiveCamera { position, direction, up, fovy, aspect, right, true_up, tan_half })
    }

    /// Ray through normalized image coordinates `(u, v)` in `[0, 1]²`,
    /// origin at the bottom-left.
    pub fn ray_through(&self, u: f32, v: f32) -> Ray {
        let sx = (2.0 * u - 1.0) * self.tan_half * self.aspect;
        let sy = (2.0 * v - 1.0) * self.tan_half;
        let dir = (self.direction + self.right * sx + self.true_up * sy).normalize();
        Ray::new(self.position, dir)
    }

    pub fn generate_ray(&self, px: u32, py: u32, width: u32, height: u32, jitter: [f32; 2]) -> Ray {
        let u = (px as f32 + jitter[0]) / width as f32;
        let v = (py as f32 + jitter[1]) / height as f32;
        self.ray_through(u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(fovy: f32) -> PerspectiveCamera {
        PerspectiveCamera::new(Vec3::ZERO, Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 1.0, 0.0), fovy, 1.0).unwrap()
    }

    #[test]
    fn center_pixel_looks_along_direction() {
        for fovy in [10.0, 45.0, 90.0, 150.0] {
            let r = cam(fovy).generate_ray(2, 2, 5, 5, [0.5, 0.5]);
            assert!((r.dir - Vec3::new(0.0, 0.0, -1.0)).length() < 1e-6);
        }
    }

    #[test]
    fn top_edge_is_elevated_by_half_fovy() {
        // fovy 90: the top edge of the image sits at tan(45°) = 1 above the axis.
        let r = cam(90.0).ray_through(0.5, 1.0);
        let elevation = libm::atan2f(r.dir.y, -r.dir.z).to_degrees();
        assert!((elevation - 45.0).abs() < 1e-4, "{elevation}");
    }

    #[test]
    fn generation_is_deterministic() {
        let c = cam(60.0);
        assert_eq!(c.generate_ray(3, 7, 16, 9, [0.25, 0.75]), c.generate_ray(3, 7, 16, 9, [0.25, 0.75]));
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = Vec3::new(0.0, 0.0, -1.0);
        let up = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(PerspectiveCamera::new(Vec3::ZERO, d, up, 0.0, 1.0), Err(CameraError::FovyOutOfRange));
        assert_eq!(PerspectiveCamera::new(Vec3::ZERO, d, d, 60.0, 1.0), Err(CameraError::UpParallel));
        assert_eq!(
            PerspectiveCamera::new(Vec3::ZERO, d * 2.0, up, 60.0, 1.0),
            Err(CameraError::DirectionNotUnit)
        );
    }
}
