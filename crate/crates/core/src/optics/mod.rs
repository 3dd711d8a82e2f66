//! Optical data model: materials, layers, stacks and the cavity assembly.

mod assembly;
mod config;
mod material;
mod stack;

pub use assembly::{AssemblyLayout, CavityAssembly, Mirror, SegmentThicknesses};
pub use config::{AssemblyConfig, LayerConfig, MaterialConfig, MembraneConfig, MirrorConfig};
pub use material::{Material, Medium};
pub use stack::{build_quarter_wave_stack, Layer, LayerStack};
