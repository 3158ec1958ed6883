//! Transformative lenses: a prompt-bearing region that re-synthesizes the
//! content below it.
//!
//! A lens covers the image elements under it and the results of lower lenses
//! that have generated at least once. Its request is an outpaint over a crop
//! of that content in lens-local pixels: covered areas are preserved, the
//! rest of the lens is generated.

use serde::{Deserialize, Serialize};

use crate::asset::{AssetId, ImageAsset, SceneObject, SceneSpec};
use crate::document::{Element, ElementId, ElementKind, Payload};
use crate::error::{Error, Result};
use crate::geometry::{Mask, Rect};
use crate::request::{GenerationControls, GenerationRequest, OpKind, CONTENT_PRESERVING};
use crate::scheduler::{DebounceClass, JobId};
use crate::workspace::{Call, JobSpec, Work, Workspace};

/// Largest lens side, in pixels, used for its masks and results.
pub const MAX_LENS_PIXELS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensState {
    #[serde(default)]
    pub prompt: String,
    #[serde(default)]
    pub last_result: Option<AssetId>,
    /// Mirrors the client's hover fade; never triggers generation.
    #[serde(default)]
    pub faded: bool,
    #[serde(default)]
    pub pending_job: Option<JobId>,
}

impl LensState {
    pub fn new(prompt: &str) -> Self {
        LensState { prompt: prompt.trim().to_string(), last_result: None, faded: false, pending_job: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensComposition {
    /// Covered images and lower lens results, ascending z.
    pub covered: Vec<ElementId>,
    pub preserve_mask: Mask,
    pub generate_mask: Mask,
    pub composite_prompt: String,
}

/// Pixel size of a lens rect.
pub fn lens_pixels(rect: &Rect) -> (u32, u32) {
    let side = |v: f64| (v.round() as u32).clamp(1, MAX_LENS_PIXELS);
    (side(rect.w), side(rect.h))
}

/// `inner` in the normalized coordinates of `outer`.
fn local(outer: &Rect, inner: &Rect) -> Rect {
    Rect {
        x: (inner.x - outer.x) / outer.w,
        y: (inner.y - outer.y) / outer.h,
        w: inner.w / outer.w,
        h: inner.h / outer.h,
    }
}

struct Source<'a> {
    element: &'a Element,
    asset: &'a ImageAsset,
    prompt: String,
}

impl Workspace {
    /// Image elements below the lens whose rect overlaps it, ascending z.
    pub fn covered_elements(&self, lens: &ElementId) -> Result<Vec<ElementId>> {
        self.lens(lens)?;
        let el = self.doc().element(lens)?;
        Ok(self
            .doc()
            .elements_by_z()
            .take_while(|e| e.z < el.z)
            .filter(|e| e.kind() == ElementKind::Image && e.rect.intersects(&el.rect))
            .map(|e| e.id.clone())
            .collect())
    }

    /// Lenses intersecting `region`, ascending z.
    pub fn resolve_lens_stack(&self, region: &Rect) -> Vec<ElementId> {
        self.doc()
            .elements_by_z()
            .filter(|e| e.kind() == ElementKind::Lens && e.rect.intersects(region))
            .map(|e| e.id.clone())
            .collect()
    }

    /// Lenses above z-level `z` that overlap `region`.
    pub(crate) fn lenses_above(&self, z: i64, region: &Rect) -> Vec<ElementId> {
        self.doc()
            .elements_by_z()
            .filter(|e| e.z > z && e.kind() == ElementKind::Lens && e.rect.intersects(region))
            .map(|e| e.id.clone())
            .collect()
    }

    fn lens_sources(&self, lens: &ElementId) -> Result<(&Element, Vec<Source<'_>>)> {
        self.lens(lens)?;
        let el = self.doc().element(lens)?;
        let mut sources = Vec::new();
        for e in self.doc().elements_by_z().take_while(|e| e.z < el.z) {
            if !e.rect.intersects(&el.rect) {
                continue;
            }
            let (asset_id, prompt) = match &e.payload {
                Payload::Image(b) => match &b.asset {
                    Some(a) => (a, self.image_prompt(b).unwrap_or_default()),
                    None => continue,
                },
                Payload::Lens(l) => match &l.last_result {
                    Some(a) => {
                        let prompt = self.doc().asset(a)?.provenance.as_ref().map(|p| p.prompt.clone()).unwrap_or_default();
                        (a, prompt)
                    }
                    None => continue,
                },
                _ => continue,
            };
            sources.push(Source { element: e, asset: self.doc().asset(asset_id)?, prompt });
        }
        Ok((el, sources))
    }

    pub fn build_composition(&self, lens: &ElementId) -> Result<LensComposition> {
        let (el, sources) = self.lens_sources(lens)?;
        let state = self.lens(lens)?;
        if state.prompt.trim().is_empty() && sources.is_empty() {
            return Err(Error::BlankLensNoPrompt(lens.clone()));
        }
        let (w, h) = lens_pixels(&el.rect);
        let mut preserve = Mask::new(w, h);
        for s in &sources {
            let overlap = s.element.rect.intersection(&el.rect).expect("sources intersect the lens");
            preserve.union_with(&Mask::from_region(w, h, &local(&el.rect, &overlap)));
        }
        let mut prompts = vec![state.prompt.clone()];
        prompts.extend(sources.iter().map(|s| s.prompt.clone()));
        let composite_prompt = self.adapters().language.merge(&prompts).map_err(Error::from_adapter)?;
        Ok(LensComposition {
            covered: sources.iter().map(|s| s.element.id.clone()).collect(),
            generate_mask: preserve.complement(),
            preserve_mask: preserve,
            composite_prompt,
        })
    }

    /// The crop of covered content in lens-local pixels, with its scene.
    fn lens_crop(&self, el: &Element, sources: &[Source<'_>]) -> Result<ImageAsset> {
        let (w, h) = lens_pixels(&el.rect);
        let mut raster = vec![0u8; w as usize * h as usize * 4];
        let mut objects = Vec::new();
        for s in sources {
            let overlap = s.element.rect.intersection(&el.rect).expect("sources intersect the lens");
            let region = Mask::from_region(w, h, &local(&el.rect, &overlap));
            let (aw, ah) = s.asset.dims();
            for (px, py) in region.iter_set() {
                let cx = el.rect.x + (px as f64 + 0.5) / w as f64 * el.rect.w;
                let cy = el.rect.y + (py as f64 + 0.5) / h as f64 * el.rect.h;
                let sx = (((cx - s.element.rect.x) / s.element.rect.w * aw as f64).floor() as i64).clamp(0, aw as i64 - 1);
                let sy = (((cy - s.element.rect.y) / s.element.rect.h * ah as f64).floor() as i64).clamp(0, ah as i64 - 1);
                let i = (py as usize * w as usize + px as usize) * 4;
                raster[i..i + 4].copy_from_slice(&s.asset.pixel(sx as u32, sy as u32));
            }
            for obj in s.asset.scene.iter().flat_map(|sc| &sc.objects) {
                let r = &s.element.rect;
                let on_canvas = Rect {
                    x: r.x + obj.region.x * r.w,
                    y: r.y + obj.region.y * r.h,
                    w: obj.region.w * r.w,
                    h: obj.region.h * r.h,
                };
                let Some(clipped) = on_canvas.intersection(&el.rect) else { continue };
                let mut region = local(&el.rect, &clipped);
                region.x = region.x.clamp(0.0, 1.0);
                region.y = region.y.clamp(0.0, 1.0);
                region.w = region.w.min(1.0 - region.x);
                region.h = region.h.min(1.0 - region.y);
                if region.w <= 0.0 || region.h <= 0.0 {
                    continue;
                }
                objects.push(SceneObject { region, ..obj.clone() });
            }
        }
        ImageAsset::new(w, h, raster, Some(SceneSpec { objects }))
    }

    /// The outpaint call for a lens and the assets it draws on.
    pub(crate) fn lens_call(&self, lens: &ElementId) -> Result<(Call, Vec<AssetId>)> {
        let composition = self.build_composition(lens)?;
        let (el, sources) = self.lens_sources(lens)?;
        let crop = self.lens_crop(el, &sources)?;
        let request = GenerationRequest {
            prompt: composition.composite_prompt,
            reference_assets: vec![crop.id.clone()],
            mask: Some(composition.generate_mask),
            controls: GenerationControls::weighted(OpKind::Outpaint, CONTENT_PRESERVING),
            seed: self.element_seed(lens, 0),
        };
        let parents = sources.iter().map(|s| s.asset.id.clone()).collect();
        Ok((Call { request, references: vec![crop] }, parents))
    }

    /// Queues a debounced re-synthesis of the lens.
    pub fn regenerate_lens(&mut self, lens: &ElementId) -> Result<JobId> {
        self.build_composition(lens)?;
        self.submit(lens, DebounceClass::LensIdle, JobSpec::new(Work::Lens, "lens"))
    }

    /// Mirrors the client's hover fade. Never schedules work.
    pub fn set_lens_faded(&mut self, lens: &ElementId, faded: bool) -> Result<()> {
        self.lens(lens)?;
        self.doc_mut().update_payload(lens, |p| {
            if let Payload::Lens(l) = p {
                l.faded = faded;
            }
            Ok(())
        })
    }
}
