//! Model adapter interfaces.
//!
//! Engines never talk to models directly: every text transformation goes
//! through a [`LanguageAdapter`] and every raster operation through an
//! [`ImageAdapter`]. Adapters are pure with respect to the document; the
//! engine resolves reference assets and attaches provenance to results.

mod hash;
pub mod mock;
pub mod remote;

use std::sync::Arc;

use thiserror::Error;

use crate::asset::ImageAsset;
use crate::brush::BrushMode;
use crate::fragment::{Fragment, FragmentEdit, FragmentType};
use crate::geometry::{Mask, Rect};
use crate::request::GenerationRequest;

pub use hash::{fnv1a64, Fnv1a};

pub type AdapterResult<T> = std::result::Result<T, AdapterError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimit(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("asset has no scene description")]
    NoScene,
    #[error("no object under the control points")]
    SegmentationEmpty,
    #[error("mask does not match the reference asset")]
    MaskMismatch,
    #[error("only {available} distinct values available, {wanted} requested")]
    InsufficientVariety { wanted: usize, available: usize },
}

/// Variant prompts along one dimension, as requested by generative containers.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSet {
    pub dimension: FragmentType,
    pub prompts: Vec<String>,
}

pub trait LanguageAdapter: Send + Sync {
    fn id(&self) -> &str;

    /// Splits a prompt into `[type, value]` fragments.
    fn decompose(&self, prompt: &str) -> AdapterResult<Vec<Fragment>>;

    /// `k` new values of the fragment's type, none equal to the input.
    fn vary_values(&self, fragment: &Fragment, context: &str, k: usize) -> AdapterResult<Vec<Fragment>>;

    /// Fragments of types not yet present in `existing`.
    fn suggest_types(&self, prompt: &str, existing: &[Fragment]) -> AdapterResult<Vec<Fragment>>;

    /// Renders the fragment set of `base` after applying `edits`.
    fn compose(&self, base: &str, edits: &[FragmentEdit]) -> AdapterResult<String>;

    /// Describes an asset, or only the part selected by `mask`.
    fn describe(&self, asset: &ImageAsset, mask: Option<&Mask>) -> AdapterResult<String>;

    fn merge(&self, prompts: &[String]) -> AdapterResult<String>;

    /// Picks up style or content attributes, optionally inside a pixel region.
    fn extract(&self, asset: &ImageAsset, region: Option<&Rect>, mode: BrushMode) -> AdapterResult<String>;

    fn derive_variant_prompts(&self, prompt: &str, grounding: Option<&str>, count: usize) -> AdapterResult<VariantSet>;

    /// Combines the source prompt, the description of the selected segment and
    /// the brush prompt into the prompt sent with an inpaint request.
    fn craft_inpaint_prompt(
        &self,
        source_prompt: &str,
        segment_description: &str,
        brush_prompt: &str,
        mode: BrushMode,
    ) -> AdapterResult<String>;

    /// `k` distinct fragments serving the task described by `prompt`.
    fn generate_set(&self, prompt: &str, k: usize) -> AdapterResult<Vec<Fragment>>;
}

pub trait ImageAdapter: Send + Sync {
    fn id(&self) -> &str;

    /// txt2img and img2img.
    fn generate(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<ImageAsset>;

    /// Masked inpaint and outpaint.
    fn inpaint(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<ImageAsset>;

    /// Object mask selected by control points given in asset pixel coordinates.
    fn segment(&self, asset: &ImageAsset, points: &[(f64, f64)]) -> AdapterResult<Mask>;
}

/// The pair of adapters an engine works with.
#[derive(Clone)]
pub struct Adapters {
    pub language: Arc<dyn LanguageAdapter>,
    pub image: Arc<dyn ImageAdapter>,
}

impl Adapters {
    pub fn mock(default_size: u32) -> Self {
        let lexicon = Arc::new(crate::lexicon::Lexicon::builtin());
        Self::mock_with(lexicon, default_size)
    }

    pub fn mock_with(lexicon: Arc<crate::lexicon::Lexicon>, default_size: u32) -> Self {
        Adapters {
            language: Arc::new(mock::MockLanguage::new(lexicon.clone())),
            image: Arc::new(mock::MockImage::new(lexicon, default_size, default_size)),
        }
    }
}

impl std::fmt::Debug for Adapters {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Adapters")
            .field("language", &self.language.id())
            .field("image", &self.image.id())
            .finish()
    }
}
