use crate::math::Vec3;

/// Directional light; `direction` points away from the light, into the scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalLight {
    pub direction: Vec3,
    pub irradiance: Vec3,
}

impl DirectionalLight {
    /// Unit vector from a surface toward the light.
    pub fn to_light(&self) -> Vec3 {
        (-self.direction).normalize()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Lights {
    pub directional: Option<DirectionalLight>,
    pub ambient: Vec3,
}

impl Lights {
    pub fn is_valid(&self) -> bool {
        let non_neg = |v: Vec3| v.x >= 0.0 && v.y >= 0.0 && v.z >= 0.0;
        non_neg(self.ambient) && self.directional.is_none_or(|d| non_neg(d.irradiance))
    }
}
