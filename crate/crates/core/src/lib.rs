//! LiDAR sliding-window-map aided GNSS positioning in urban canyons: NLOS
//! detection by ray marching through an accumulated point cloud, reflector
//! search and delay correction, and weighted least squares positioning.

pub mod frames;
pub mod kvfile;
pub mod measmodel;
pub mod nlos;
pub mod pipeline;
pub mod scenesim;
pub mod solver;
pub mod swm;
