use std::sync::Arc;

use crate::adapters::{AdapterError, AdapterResult, Fnv1a, ImageAdapter};
use crate::asset::{ImageAsset, SceneObject, SceneSpec};
use crate::fragment::Fragment;
use crate::geometry::{pixel_span, Mask, Rect};
use crate::lexicon::Lexicon;
use crate::request::{GenerationRequest, OpKind};

/// Fraction of an object's pixels the mask must cover before inpainting
/// rewrites the object.
pub const REWRITE_OVERLAP: f64 = 0.5;

const TAG_TYPES: [&str; 3] = ["style", "tone", "color"];

/// Scene-rendering image adapter.
#[derive(Debug, Clone)]
pub struct MockImage {
    lexicon: Arc<Lexicon>,
    width: u32,
    height: u32,
}

pub fn object_mask(width: u32, height: u32, region: &Rect) -> Mask {
    Mask::from_region(width, height, region)
}

fn rgba(hash: u64) -> [u8; 4] {
    [hash as u8, (hash >> 8) as u8, (hash >> 16) as u8, 255]
}

/// Background from the first color tag in the scene, then each object's
/// region in list order, colored by label and first style tag. The seed
/// enters every color.
pub fn render_scene(scene: &SceneSpec, seed: u64, width: u32, height: u32) -> Vec<u8> {
    let first_color = scene.objects.iter().find_map(|o| o.color_tags.first()).map(String::as_str).unwrap_or("");
    let bg = rgba(Fnv1a::default().str("background").str(first_color).u64(seed).finish());
    let mut raster: Vec<u8> = bg.iter().copied().cycle().take(width as usize * height as usize * 4).collect();
    for obj in &scene.objects {
        let style = obj.style_tags.first().map(String::as_str).unwrap_or("");
        let color = rgba(Fnv1a::default().str("object").str(&obj.label).str(style).u64(seed).finish());
        let xs = pixel_span(obj.region.x, obj.region.w, width);
        for y in pixel_span(obj.region.y, obj.region.h, height) {
            let row = y as usize * width as usize;
            for x in xs.clone() {
                let i = (row + x as usize) * 4;
                raster[i..i + 4].copy_from_slice(&color);
            }
        }
    }
    raster
}

fn values_of<'a>(frags: &'a [Fragment], ftype: &'a str) -> impl Iterator<Item = &'a String> + 'a {
    frags.iter().filter(move |f| f.ftype.as_str() == ftype).map(|f| &f.value)
}

fn push_unique(list: &mut Vec<String>, value: &str) {
    if !list.iter().any(|v| v == value) {
        list.push(value.to_string());
    }
}

impl MockImage {
    pub fn new(lexicon: Arc<Lexicon>, width: u32, height: u32) -> Self {
        MockImage { lexicon, width, height }
    }

    fn fragments(&self, prompt: &str) -> Vec<Fragment> {
        let mut frags = self.lexicon.scan(prompt);
        self.lexicon.sort(&mut frags);
        frags
    }

    /// One object per content fragment; every tag fragment on every object.
    pub fn scene_for_prompt(&self, prompt: &str) -> SceneSpec {
        let frags = self.fragments(prompt);
        let labels: Vec<&String> = values_of(&frags, "content").collect();
        let n = labels.len();
        let objects = labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let region = if n == 1 {
                    Rect { x: 0.25, y: 0.25, w: 0.5, h: 0.5 }
                } else {
                    Rect { x: i as f64 / n as f64, y: 0.25, w: 1.0 / n as f64, h: 0.5 }
                };
                let mut obj = SceneObject::new(label, region);
                for t in TAG_TYPES {
                    let tags = obj.tags_mut(t).expect("tag type");
                    for v in values_of(&frags, t) {
                        push_unique(tags, v);
                    }
                }
                obj
            })
            .collect();
        SceneSpec { objects }
    }

    fn check(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<()> {
        request.validate(references).map_err(|e| match e {
            crate::error::Error::MaskMismatch => AdapterError::MaskMismatch,
            other => AdapterError::InvalidRequest(other.to_string()),
        })
    }

    /// Replaces an object's tags with the prompt's tags, type by type.
    fn retag(obj: &mut SceneObject, frags: &[Fragment]) {
        for t in TAG_TYPES {
            let new: Vec<String> = values_of(frags, t).cloned().collect();
            if !new.is_empty() {
                *obj.tags_mut(t).expect("tag type") = new;
            }
        }
    }

    fn inpaint_scene(&self, request: &GenerationRequest, base: &ImageAsset, mask: &Mask) -> AdapterResult<ImageAsset> {
        let scene = base.scene.as_ref().ok_or(AdapterError::NoScene)?;
        let frags = self.fragments(&request.prompt);
        let style_mode = request.controls.style_dominant();
        let new_label = values_of(&frags, "content").next().cloned();
        let mut out_scene = scene.clone();
        for obj in &mut out_scene.objects {
            let own = object_mask(base.width, base.height, &obj.region);
            let area = own.count();
            if area == 0 || (mask.intersection_count(&own) as f64) < REWRITE_OVERLAP * area as f64 {
                continue;
            }
            Self::retag(obj, &frags);
            if !style_mode {
                if let Some(label) = &new_label {
                    obj.label = label.clone();
                }
            }
        }
        let rendered = render_scene(&out_scene, request.seed, base.width, base.height);
        let mut raster = base.raster.as_ref().clone();
        for (x, y) in mask.iter_set() {
            let i = (y as usize * base.width as usize + x as usize) * 4;
            raster[i..i + 4].copy_from_slice(&rendered[i..i + 4]);
        }
        ImageAsset::new(base.width, base.height, raster, Some(out_scene))
            .map_err(|e| AdapterError::InvalidRequest(e.to_string()))
    }

    fn outpaint_scene(&self, request: &GenerationRequest, base: &ImageAsset) -> AdapterResult<ImageAsset> {
        let frags = self.fragments(&request.prompt);
        let mut scene = base.scene.clone().unwrap_or_default();
        let mut backdrops: Vec<SceneObject> = values_of(&frags, "content")
            .filter(|label| !scene.objects.iter().any(|o| &o.label == *label))
            .map(|label| SceneObject::new(label, Rect { x: 0.0, y: 0.0, w: 1.0, h: 1.0 }))
            .collect();
        backdrops.append(&mut scene.objects);
        scene.objects = backdrops;
        for obj in &mut scene.objects {
            Self::retag(obj, &frags);
        }
        let raster = render_scene(&scene, request.seed, base.width, base.height);
        ImageAsset::new(base.width, base.height, raster, Some(scene)).map_err(|e| AdapterError::InvalidRequest(e.to_string()))
    }
}

impl ImageAdapter for MockImage {
    fn id(&self) -> &str {
        "mock-image"
    }

    fn generate(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<ImageAsset> {
        self.check(request, references)?;
        let (width, height) = match request.controls.op_kind {
            OpKind::Txt2img => (self.width, self.height),
            OpKind::Img2img => references[0].dims(),
            other => return Err(AdapterError::InvalidRequest(format!("{other:?} goes through inpaint"))),
        };
        let mut scene = self.scene_for_prompt(&request.prompt);
        if request.controls.style_weight >= 0.5 {
            if let Some(reference) = references.iter().find_map(|r| r.scene.as_ref()) {
                let copied: Vec<&String> = reference.objects.iter().flat_map(|o| o.style_tags.iter()).collect();
                for obj in &mut scene.objects {
                    for tag in &copied {
                        push_unique(&mut obj.style_tags, tag);
                    }
                }
            }
        }
        let raster = render_scene(&scene, request.seed, width, height);
        ImageAsset::new(width, height, raster, Some(scene)).map_err(|e| AdapterError::InvalidRequest(e.to_string()))
    }

    fn inpaint(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<ImageAsset> {
        self.check(request, references)?;
        let base = &references[0];
        let mask = request.mask.as_ref().expect("validated");
        match request.controls.op_kind {
            OpKind::Inpaint => self.inpaint_scene(request, base, mask),
            OpKind::Outpaint => self.outpaint_scene(request, base),
            other => Err(AdapterError::InvalidRequest(format!("{other:?} goes through generate"))),
        }
    }

    fn segment(&self, asset: &ImageAsset, points: &[(f64, f64)]) -> AdapterResult<Mask> {
        let scene = asset.scene.as_ref().ok_or(AdapterError::NoScene)?;
        let pixels: Vec<(u32, u32)> = points
            .iter()
            .map(|&(x, y)| {
                let px = x.floor().clamp(0.0, asset.width.saturating_sub(1) as f64) as u32;
                let py = y.floor().clamp(0.0, asset.height.saturating_sub(1) as f64) as u32;
                (px, py)
            })
            .collect();
        let mut best: Option<(usize, u64, usize)> = None;
        for (index, obj) in scene.objects.iter().enumerate() {
            let xs = pixel_span(obj.region.x, obj.region.w, asset.width);
            let ys = pixel_span(obj.region.y, obj.region.h, asset.height);
            let area = xs.len() as u64 * ys.len() as u64;
            let count = pixels.iter().filter(|(x, y)| xs.contains(x) && ys.contains(y)).count();
            if count == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((c, a, _)) => count > c || (count == c && area < a),
            };
            if better {
                best = Some((count, area, index));
            }
        }
        let (_, _, index) = best.ok_or(AdapterError::SegmentationEmpty)?;
        Ok(object_mask(asset.width, asset.height, &scene.objects[index].region))
    }
}
