//! Fillable brushes: a prompt picked up from text or an example, applied by
//! stroking over an image.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::asset::AssetId;
use crate::document::{ElementId, Payload};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::request::{GenerationControls, GenerationRequest, OpKind, CONTENT_PRESERVING, STYLE_PRESERVING};
use crate::scheduler::{DebounceClass, JobId};
use crate::workspace::{ElementInit, JobSpec, Work, Workspace};

/// Arc length per control point.
pub const POINT_SPACING: f64 = 32.0;
pub const MIN_POINTS: usize = 4;
pub const MAX_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrushMode {
    #[default]
    Style,
    Content,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrushState {
    pub prompt: String,
    pub mode: BrushMode,
    /// Applications so far, per target element.
    #[serde(default)]
    pub emphasis: BTreeMap<ElementId, u32>,
    pub filled: bool,
}

impl BrushState {
    pub fn new(prompt: &str, mode: BrushMode) -> Self {
        let prompt = prompt.trim().to_string();
        BrushState { filled: !prompt.is_empty(), prompt, mode, emphasis: BTreeMap::new() }
    }

    pub fn applications(&self, target: &ElementId) -> u32 {
        self.emphasis.get(target).copied().unwrap_or(0)
    }

    /// Same brush with its emphasis forgotten.
    pub fn reset(&self) -> Self {
        BrushState::new(&self.prompt, self.mode)
    }
}

/// A polyline in target-image pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub points: Vec<(f64, f64)>,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_width() -> f64 {
    8.0
}

impl Stroke {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Stroke { points, width: default_width() }
    }
}

/// Prompt weight of the `n`th application to the same target.
pub fn emphasis_weight(n: u32) -> f64 {
    (1.0 + 0.25 * (n.max(1) - 1) as f64).min(2.0)
}

/// Control points spaced evenly by arc length along the clamped stroke,
/// both endpoints included.
pub fn resample_stroke(stroke: &Stroke, (width, height): (u32, u32)) -> Result<Vec<(f64, f64)>> {
    if stroke.points.len() < 2 {
        return Err(Error::MalformedPayload("a stroke needs at least two points".into()));
    }
    if stroke.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::MalformedPayload("stroke points must be finite".into()));
    }
    let max_x = width.saturating_sub(1) as f64;
    let max_y = height.saturating_sub(1) as f64;
    let pts: Vec<(f64, f64)> = stroke.points.iter().map(|&(x, y)| (x.clamp(0.0, max_x), y.clamp(0.0, max_y))).collect();
    let segs: Vec<f64> = pts.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).collect();
    let length: f64 = segs.iter().sum();
    if length <= 0.0 {
        return Err(Error::DegenerateStroke);
    }
    let count = ((length / POINT_SPACING).floor() as usize).clamp(MIN_POINTS, MAX_POINTS);
    let step = length / (count - 1) as f64;
    let mut out = Vec::with_capacity(count);
    let (mut seg, mut walked) = (0, 0.0);
    for i in 0..count {
        if i == count - 1 {
            out.push(*pts.last().expect("two points"));
            break;
        }
        let at = step * i as f64;
        while seg < segs.len() - 1 && walked + segs[seg] < at {
            walked += segs[seg];
            seg += 1;
        }
        let t = if segs[seg] > 0.0 { ((at - walked) / segs[seg]).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push((a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t));
    }
    Ok(out)
}

/// Comma tokens of both prompts, first occurrence wins.
fn join_prompts(a: &str, b: &str) -> String {
    let mut tokens: Vec<String> = Vec::new();
    for t in a.split(',').chain(b.split(',')) {
        let t = crate::fragment::normalize_text(t);
        if !t.is_empty() && !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    tokens.join(", ")
}

impl Workspace {
    fn set_brush(&mut self, id: &ElementId, state: BrushState) -> Result<()> {
        self.doc_mut().set_payload(id, Payload::Brush(state))
    }

    pub fn fill_brush_from_text(&mut self, id: &ElementId, prompt: &str, mode: BrushMode) -> Result<()> {
        self.brush(id)?;
        if prompt.trim().is_empty() {
            return Err(Error::EmptyPrompt);
        }
        self.set_brush(id, BrushState::new(prompt, mode))
    }

    /// Picks up style or content attributes of an asset, optionally inside
    /// a pixel region, and returns the new brush prompt.
    pub fn fill_brush_from_example(
        &mut self,
        id: &ElementId,
        asset: &AssetId,
        region: Option<&Rect>,
        mode: BrushMode,
    ) -> Result<String> {
        self.brush(id)?;
        let asset = self.doc().asset(asset).map_err(|_| Error::UnknownAsset(asset.to_string()))?;
        let prompt = self.adapters().language.extract(asset, region, mode).map_err(Error::from_adapter)?;
        if prompt.trim().is_empty() {
            return Err(Error::ExtractionEmpty(match mode {
                BrushMode::Style => "style",
                BrushMode::Content => "content",
            }));
        }
        self.set_brush(id, BrushState::new(&prompt, mode))?;
        Ok(prompt)
    }

    /// Segments what the stroke selects and schedules an inpaint of it.
    pub fn apply_brush(&mut self, brush_id: &ElementId, target: &ElementId, stroke: &Stroke) -> Result<JobId> {
        let brush = self.brush(brush_id)?.clone();
        if !brush.filled {
            return Err(Error::UnfilledBrush(brush_id.clone()));
        }
        let body = match self.image(target) {
            Ok(b) => b.clone(),
            Err(Error::WrongKind { .. }) => return Err(Error::UnknownTarget(target.clone())),
            Err(e) => return Err(e),
        };
        let asset_id = body.asset.clone().ok_or_else(|| Error::UnknownTarget(target.clone()))?;
        let asset = self.doc().asset(&asset_id)?.clone();
        let points = resample_stroke(stroke, asset.dims())?;
        let mask = self.adapters().image.segment(&asset, &points).map_err(Error::from_adapter)?;
        if mask.is_empty() {
            return Err(Error::SegmentationEmpty);
        }
        let language = self.adapters().language.clone();
        let segment = language.describe(&asset, Some(&mask)).map_err(Error::from_adapter)?;
        let source = self.image_prompt(&body).unwrap_or_default();
        let prompt = language
            .craft_inpaint_prompt(&source, &segment, &brush.prompt, brush.mode)
            .map_err(Error::from_adapter)?;
        let n = brush.applications(target) + 1;
        let weights = match brush.mode {
            BrushMode::Style => STYLE_PRESERVING,
            BrushMode::Content => CONTENT_PRESERVING,
        };
        let request = GenerationRequest {
            prompt,
            reference_assets: vec![asset_id],
            mask: Some(mask),
            controls: GenerationControls::weighted(OpKind::Inpaint, weights).with_emphasis(emphasis_weight(n))?,
            seed: body.seed,
        };
        request.validate(std::slice::from_ref(&asset))?;
        let job = self.submit(target, DebounceClass::Immediate, JobSpec::new(Work::Requests(vec![request]), "brush"))?;
        let mut updated = brush;
        updated.emphasis.insert(target.clone(), n);
        self.set_brush(brush_id, updated)?;
        Ok(job)
    }

    /// A new brush next to `b` carrying the union of both prompts.
    pub fn combine_brushes(&mut self, a: &ElementId, b: &ElementId) -> Result<ElementId> {
        let first = self.brush(a)?.clone();
        let second = self.brush(b)?.clone();
        for (id, s) in [(a, &first), (b, &second)] {
            if !s.filled {
                return Err(Error::UnfilledBrush(id.clone()));
            }
        }
        let mode = if first.mode == BrushMode::Style || second.mode == BrushMode::Style {
            BrushMode::Style
        } else {
            BrushMode::Content
        };
        let rect = self.doc().element(b)?.rect;
        let prompt = join_prompts(&first.prompt, &second.prompt);
        self.create_element(rect.translated(rect.w + 16.0, 0.0), ElementInit::Brush { prompt, mode })
    }
}
