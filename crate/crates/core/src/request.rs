//! Adapter-agnostic description of a generation job.

use serde::{Deserialize, Serialize};

use crate::asset::{AssetId, ImageAsset};
use crate::error::{Error, Result};
use crate::geometry::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Txt2img,
    Img2img,
    Inpaint,
    Outpaint,
}

/// Knobs forwarded to image adapters. Ranges are enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawControls")]
pub struct GenerationControls {
    pub content_weight: f64,
    pub style_weight: f64,
    pub denoise_strength: f64,
    pub guidance: f64,
    pub emphasis_weight: f64,
    pub op_kind: OpKind,
}

#[derive(Deserialize)]
struct RawControls {
    content_weight: f64,
    style_weight: f64,
    denoise_strength: f64,
    guidance: f64,
    emphasis_weight: f64,
    op_kind: OpKind,
}

impl TryFrom<RawControls> for GenerationControls {
    type Error = Error;

    fn try_from(r: RawControls) -> Result<Self> {
        GenerationControls::new(r.content_weight, r.style_weight, r.denoise_strength, r.guidance, r.emphasis_weight, r.op_kind)
    }
}

/// Weight pair used when a generation should preserve style over content.
pub const STYLE_PRESERVING: (f64, f64) = (0.3, 0.8);
/// Weight pair used when a generation should preserve content over style.
pub const CONTENT_PRESERVING: (f64, f64) = (0.8, 0.3);

impl GenerationControls {
    pub fn new(
        content_weight: f64,
        style_weight: f64,
        denoise_strength: f64,
        guidance: f64,
        emphasis_weight: f64,
        op_kind: OpKind,
    ) -> Result<Self> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidRequest(format!("{name} {v} outside 0..1")))
            }
        };
        unit("content_weight", content_weight)?;
        unit("style_weight", style_weight)?;
        unit("denoise_strength", denoise_strength)?;
        if !(guidance.is_finite() && guidance > 0.0) {
            return Err(Error::InvalidRequest(format!("guidance {guidance} must be positive")));
        }
        if !(1.0..=2.0).contains(&emphasis_weight) {
            return Err(Error::InvalidRequest(format!("emphasis_weight {emphasis_weight} outside 1..2")));
        }
        Ok(GenerationControls { content_weight, style_weight, denoise_strength, guidance, emphasis_weight, op_kind })
    }

    pub fn txt2img() -> Self {
        Self::new(0.5, 0.5, 1.0, 7.0, 1.0, OpKind::Txt2img).expect("valid defaults")
    }

    /// `(content_weight, style_weight)` preset for the given op.
    pub fn weighted(op_kind: OpKind, (content_weight, style_weight): (f64, f64)) -> Self {
        let denoise = match op_kind {
            OpKind::Txt2img => 1.0,
            OpKind::Img2img => 0.6,
            OpKind::Inpaint | OpKind::Outpaint => 0.75,
        };
        Self::new(content_weight, style_weight, denoise, 7.0, 1.0, op_kind).expect("valid preset")
    }

    pub fn with_emphasis(mut self, weight: f64) -> Result<Self> {
        self = Self::new(self.content_weight, self.style_weight, self.denoise_strength, self.guidance, weight, self.op_kind)?;
        Ok(self)
    }

    /// Style mode when the style control dominates the content control.
    pub fn style_dominant(&self) -> bool {
        self.style_weight > self.content_weight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    #[serde(default)]
    pub reference_assets: Vec<AssetId>,
    #[serde(default)]
    pub mask: Option<Mask>,
    pub controls: GenerationControls,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn txt2img(prompt: impl Into<String>, seed: u64) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            reference_assets: Vec::new(),
            mask: None,
            controls: GenerationControls::txt2img(),
            seed,
        }
    }

    /// Checks the request against the resolved reference assets.
    pub fn validate(&self, references: &[ImageAsset]) -> Result<()> {
        if self.prompt.trim().is_empty() && self.controls.op_kind == OpKind::Txt2img {
            return Err(Error::InvalidRequest("txt2img needs a prompt".into()));
        }
        if references.len() != self.reference_assets.len()
            || references.iter().zip(&self.reference_assets).any(|(a, id)| &a.id != id)
        {
            return Err(Error::InvalidRequest("reference assets do not match the request".into()));
        }
        match self.controls.op_kind {
            OpKind::Img2img | OpKind::Inpaint | OpKind::Outpaint if references.is_empty() => {
                return Err(Error::InvalidRequest(format!("{:?} needs a reference asset", self.controls.op_kind)));
            }
            OpKind::Inpaint | OpKind::Outpaint if self.mask.is_none() => {
                return Err(Error::InvalidRequest("masked operation without a mask".into()));
            }
            _ => {}
        }
        if let (Some(mask), Some(first)) = (&self.mask, references.first()) {
            if mask.dims() != first.dims() {
                return Err(Error::MaskMismatch);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controls_enforce_ranges() {
        assert!(GenerationControls::new(1.1, 0.5, 0.5, 7.0, 1.0, OpKind::Img2img).is_err());
        assert!(GenerationControls::new(0.5, 0.5, 0.5, 0.0, 1.0, OpKind::Img2img).is_err());
        assert!(GenerationControls::new(0.5, 0.5, 0.5, 7.0, 2.5, OpKind::Img2img).is_err());
        assert!(GenerationControls::new(0.5, 0.5, 0.5, 7.0, 2.0, OpKind::Img2img).is_ok());
        let json = r#"{"content_weight":2,"style_weight":0,"denoise_strength":0,"guidance":1,"emphasis_weight":1,"op_kind":"inpaint"}"#;
        assert!(serde_json::from_str::<GenerationControls>(json).is_err());
    }

    #[test]
    fn mask_must_match_first_reference() {
        let asset = ImageAsset::new(2, 2, vec![0; 16], None).unwrap();
        let mut req = GenerationRequest {
            prompt: "x".into(),
            reference_assets: vec![asset.id.clone()],
            mask: Some(Mask::new(3, 2)),
            controls: GenerationControls::weighted(OpKind::Inpaint, CONTENT_PRESERVING),
            seed: 1,
        };
        assert!(matches!(req.validate(std::slice::from_ref(&asset)), Err(Error::MaskMismatch)));
        req.mask = Some(Mask::new(2, 2));
        assert!(req.validate(&[asset]).is_ok());
    }
}
