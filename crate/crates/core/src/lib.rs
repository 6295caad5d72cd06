//! Desk-scale laboratory for the rapid decay property of finitely generated
//! groups: word metrics, convolution operator norms, group extensions and
//! subgroup distortion, all checked exactly on finite balls.

pub mod cayley;
pub mod config;
pub mod convolution;
pub mod distortion;
pub mod extension;
pub mod fit;
pub mod group;
