//! Pieces behind the command-line tools: scene files, image IO and diffs,
//! launching ranks, and the scripted driver.

pub mod cli;
pub mod diff;
pub mod drive;
pub mod image;
pub mod launch;
pub mod metrics;
pub mod scene;
pub mod world;
