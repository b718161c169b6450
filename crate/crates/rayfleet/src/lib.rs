//! Data-parallel rendering over a group of ranks: transports, the object API
//! with its collaborative semantics, the compositing and ray-forwarding
//! devices, and the pieces behind the command-line tools.

pub mod api;
pub mod comm;
pub mod device;
pub mod harness;

pub use rayfleet_core as kernels;
