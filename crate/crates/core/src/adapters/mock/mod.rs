//! Deterministic adapters backed by the lexicon and scene descriptions.
//!
//! Mock images are a [`SceneSpec`](crate::asset::SceneSpec) plus a raster
//! rendered from it with a fixed rule, so every output is reproducible
//! byte for byte from its inputs.

mod image;
mod language;

pub use image::{object_mask, render_scene, MockImage};
pub use language::MockLanguage;
