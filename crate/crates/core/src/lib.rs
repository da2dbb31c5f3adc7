//! Virtual line-laser scanner: a deterministic ray caster with ground-truth
//! passes, plus camera/laser calibration, stripe extraction and
//! triangulation.

pub mod calib;
pub mod camera;
pub mod extract;
pub mod geom;
pub mod image;
pub mod laser;
pub mod recon;
pub mod render;
pub mod scene;
