use std::sync::Arc;

use crate::adapters::{AdapterError, AdapterResult, Fnv1a, LanguageAdapter, VariantSet};
use crate::asset::{ImageAsset, SceneObject};
use crate::brush::BrushMode;
use crate::fragment::{normalize_text, Fragment, FragmentEdit, FragmentOrigin, FragmentType};
use crate::geometry::{Mask, Rect};
use crate::lexicon::Lexicon;

use super::image::object_mask;

/// Lexicon-driven language adapter.
#[derive(Debug, Clone)]
pub struct MockLanguage {
    lexicon: Arc<Lexicon>,
}

impl MockLanguage {
    pub fn new(lexicon: Arc<Lexicon>) -> Self {
        MockLanguage { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Canonical comma-joined rendering of a fragment set.
    pub fn render(&self, fragments: &[Fragment]) -> String {
        let mut sorted = fragments.to_vec();
        self.lexicon.sort(&mut sorted);
        sorted.dedup_by(|a, b| a.same_as(b));
        sorted.iter().map(|f| f.value.as_str()).collect::<Vec<_>>().join(", ")
    }

    fn scan_sorted(&self, text: &str) -> Vec<Fragment> {
        let mut found = self.lexicon.scan(text);
        self.lexicon.sort(&mut found);
        found
    }

    /// Ordered candidates for variations of `fragment`, excluding the input.
    fn variation_candidates(&self, fragment: &Fragment) -> Vec<String> {
        let list = self.lexicon.values(&fragment.ftype);
        let mut out: Vec<String> = Vec::new();
        let mut push = |v: &String| {
            if *v != fragment.value && !out.contains(v) {
                out.push(v.clone());
            }
        };
        if fragment.ftype == FragmentType::content() {
            for v in self.lexicon.synonyms(&fragment.value) {
                push(v);
            }
        }
        let start = list.iter().position(|v| *v == fragment.value).map(|i| i + 1).unwrap_or(0);
        for i in 0..list.len() {
            push(&list[(start + i) % list.len()]);
        }
        out
    }

    fn objects_in<'a>(&self, asset: &'a ImageAsset, mask: Option<&Mask>) -> AdapterResult<Vec<&'a SceneObject>> {
        let scene = asset.scene.as_ref().ok_or(AdapterError::NoScene)?;
        Ok(scene
            .objects
            .iter()
            .filter(|obj| match mask {
                None => true,
                Some(mask) => {
                    let own = object_mask(asset.width, asset.height, &obj.region);
                    let area = own.count();
                    area > 0 && mask.intersection_count(&own) * 2 >= area
                }
            })
            .collect())
    }
}

impl LanguageAdapter for MockLanguage {
    fn id(&self) -> &str {
        "mock-language"
    }

    fn decompose(&self, prompt: &str) -> AdapterResult<Vec<Fragment>> {
        if prompt.trim().is_empty() {
            return Err(AdapterError::InvalidRequest("empty prompt".into()));
        }
        Ok(self.scan_sorted(prompt))
    }

    fn vary_values(&self, fragment: &Fragment, _context: &str, k: usize) -> AdapterResult<Vec<Fragment>> {
        let candidates = self.variation_candidates(fragment);
        if candidates.len() < k {
            return Err(AdapterError::InsufficientVariety { wanted: k, available: candidates.len() });
        }
        Ok(candidates
            .into_iter()
            .take(k)
            .map(|value| Fragment {
                ftype: fragment.ftype.clone(),
                value,
                origin: FragmentOrigin::Suggested,
            })
            .collect())
    }

    fn suggest_types(&self, prompt: &str, existing: &[Fragment]) -> AdapterResult<Vec<Fragment>> {
        let mut out = Vec::new();
        for ftype in self.lexicon.types() {
            if existing.iter().any(|f| &f.ftype == ftype) {
                continue;
            }
            let values = self.lexicon.values(ftype);
            if values.is_empty() {
                continue;
            }
            let pick = Fnv1a::default().str(&normalize_text(prompt)).str(ftype.as_str()).finish() as usize % values.len();
            out.push(Fragment {
                ftype: ftype.clone(),
                value: values[pick].clone(),
                origin: FragmentOrigin::Suggested,
            });
        }
        out.sort_by(|a, b| a.ftype.cmp(&b.ftype));
        Ok(out)
    }

    fn compose(&self, base: &str, edits: &[FragmentEdit]) -> AdapterResult<String> {
        let mut set = self.scan_sorted(base);
        for edit in edits {
            edit.apply_to(&mut set).map_err(|e| AdapterError::InvalidRequest(e.to_string()))?;
        }
        Ok(self.render(&set))
    }

    fn describe(&self, asset: &ImageAsset, mask: Option<&Mask>) -> AdapterResult<String> {
        let frags: Vec<Fragment> = self.objects_in(asset, mask)?.into_iter().flat_map(SceneObject::fragments).collect();
        Ok(self.render(&frags))
    }

    fn merge(&self, prompts: &[String]) -> AdapterResult<String> {
        Ok(prompts.iter().map(|p| normalize_text(p)).filter(|p| !p.is_empty()).collect::<Vec<_>>().join(", "))
    }

    fn extract(&self, asset: &ImageAsset, region: Option<&Rect>, mode: BrushMode) -> AdapterResult<String> {
        let Some(scene) = asset.scene.as_ref() else {
            return Ok(String::new());
        };
        let norm = region.map(|r| Rect {
            x: r.x / asset.width as f64,
            y: r.y / asset.height as f64,
            w: r.w / asset.width as f64,
            h: r.h / asset.height as f64,
        });
        let mut values: Vec<String> = Vec::new();
        for obj in scene.objects.iter().filter(|o| norm.is_none_or(|r| r.intersects(&o.region))) {
            let picked: Vec<&String> = match mode {
                BrushMode::Style => obj.style_tags.iter().collect(),
                BrushMode::Content => vec![&obj.label],
            };
            for v in picked {
                if !values.contains(v) {
                    values.push(v.clone());
                }
            }
        }
        Ok(values.join(", "))
    }

    fn derive_variant_prompts(&self, prompt: &str, grounding: Option<&str>, count: usize) -> AdapterResult<VariantSet> {
        let own = self.scan_sorted(prompt);
        let dimension = self
            .lexicon
            .named_type(prompt)
            .or_else(|| own.iter().any(|f| f.ftype == FragmentType::content()).then(FragmentType::content))
            .unwrap_or_else(FragmentType::style);

        // grounding fragments, overridden type by type by the container prompt
        let mut base: Vec<Fragment> = grounding.map(|g| self.scan_sorted(g)).unwrap_or_default();
        for f in &own {
            base.retain(|b| b.ftype != f.ftype || own.iter().any(|o| o.same_as(b)));
        }
        for f in &own {
            if !base.iter().any(|b| b.same_as(f)) {
                base.push(f.clone());
            }
        }
        self.lexicon.sort(&mut base);

        let anchor = base.iter().position(|f| f.ftype == dimension);
        let variants: Vec<Fragment> = match anchor {
            Some(i) => {
                // a value already in the set would collapse into a duplicate prompt
                let candidates: Vec<String> = self
                    .variation_candidates(&base[i])
                    .into_iter()
                    .filter(|v| !base.iter().any(|b| b.ftype == dimension && &b.value == v))
                    .collect();
                if candidates.len() < count {
                    return Err(AdapterError::InsufficientVariety { wanted: count, available: candidates.len() });
                }
                candidates
                    .into_iter()
                    .take(count)
                    .map(|value| Fragment { ftype: dimension.clone(), value, origin: FragmentOrigin::Suggested })
                    .collect()
            }
            None => {
                let values = self.lexicon.values(&dimension);
                if values.len() < count {
                    return Err(AdapterError::InsufficientVariety { wanted: count, available: values.len() });
                }
                values
                    .iter()
                    .take(count)
                    .map(|v| Fragment { ftype: dimension.clone(), value: v.clone(), origin: FragmentOrigin::Suggested })
                    .collect()
            }
        };
        let prompts = variants
            .into_iter()
            .map(|variant| {
                let mut set = base.clone();
                match anchor {
                    Some(i) => set[i] = variant,
                    None => set.push(variant),
                }
                self.render(&set)
            })
            .collect();
        Ok(VariantSet { dimension, prompts })
    }

    fn craft_inpaint_prompt(
        &self,
        source_prompt: &str,
        segment_description: &str,
        brush_prompt: &str,
        mode: BrushMode,
    ) -> AdapterResult<String> {
        let mut set = self.scan_sorted(segment_description);
        if set.is_empty() {
            set = self.scan_sorted(source_prompt);
        }
        let brush: Vec<Fragment> = self
            .scan_sorted(brush_prompt)
            .into_iter()
            .filter(|f| mode == BrushMode::Content || f.ftype != FragmentType::content())
            .collect();
        for f in &brush {
            set.retain(|s| s.ftype != f.ftype);
        }
        set.extend(brush.iter().cloned());
        let mut crafted = self.render(&set);
        if brush.is_empty() {
            let raw = normalize_text(brush_prompt);
            if !raw.is_empty() {
                crafted = if crafted.is_empty() { raw } else { format!("{crafted}, {raw}") };
            }
        }
        Ok(crafted)
    }

    fn generate_set(&self, prompt: &str, k: usize) -> AdapterResult<Vec<Fragment>> {
        let own = self.scan_sorted(prompt);
        let dimension = self
            .lexicon
            .named_type(prompt)
            .or_else(|| own.first().map(|f| f.ftype.clone()))
            .unwrap_or_else(FragmentType::style);
        let values = self.lexicon.values(&dimension);
        if values.len() < k {
            return Err(AdapterError::InsufficientVariety { wanted: k, available: values.len() });
        }
        let start = own
            .iter()
            .find(|f| f.ftype == dimension)
            .and_then(|f| self.lexicon.value_rank(&f.value))
            .unwrap_or(0);
        Ok((0..k)
            .map(|i| Fragment {
                ftype: dimension.clone(),
                value: values[(start + i) % values.len()].clone(),
                origin: FragmentOrigin::Suggested,
            })
            .collect())
    }
}
