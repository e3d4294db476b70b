//! Periodic physical Ehrenfest Wind-Tree billiard: scatterer geometry,
//! corridor structure, billiard dynamics and diffusion statistics.

pub mod corridors;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod presets;
pub mod report;
pub mod stats;
pub mod vec2;

pub use error::{Error, Result};
pub use geometry::{BoundaryKind, ModelParams, ScattererBoundary, ScattererKind};
pub use vec2::Vec2;
