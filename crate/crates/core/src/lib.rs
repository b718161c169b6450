//! Pure kernels for data-parallel rendering.
//!
//! Everything here is `no_std` + `alloc`: geometry and BVH traversal,
//! structured-volume marching, the counter-based RNG, the single-fragment deep
//! compositor, and the wave-front ray-forwarding path tracer. Rank-to-rank
//! movement of bytes is abstracted behind [`Collective`], so the same code
//! drives a single-rank render and an N-rank render.
//!
//! Floating-point work is single precision and routes every transcendental
//! through `libm`, so results are bit-identical across platforms and rank
//! counts.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bvh;
pub mod camera;
pub mod collective;
pub mod composite;
pub mod geometry;
pub mod lights;
pub mod math;
pub mod render;
pub mod rng;
pub mod scene;
pub mod span;
pub mod volume;
pub mod wavefront;

pub use collective::{Collective, CommError, Solo};
pub use math::{Aabb, Vec3};
