//! Prompt fragments on image elements: decomposition, suggestions,
//! variations and recomposition.

use crate::document::{ElementId, Payload};
use crate::error::{Error, Result};
use crate::fragment::{Fragment, FragmentEdit, FragmentRow};
use crate::scheduler::{DebounceClass, JobId};
use crate::workspace::{JobSpec, Work, Workspace};

impl Workspace {
    /// At most `max_fragments` distinct fragments of `prompt`.
    pub fn decompose_prompt(&self, prompt: &str) -> Result<Vec<Fragment>> {
        if prompt.trim().is_empty() {
            return Err(Error::EmptyPrompt);
        }
        let mut out: Vec<Fragment> = Vec::new();
        for f in self.adapters().language.decompose(prompt).map_err(Error::from_adapter)? {
            if !out.iter().any(|o| o.same_as(&f)) {
                out.push(f);
            }
        }
        out.truncate(self.config().max_fragments);
        Ok(out)
    }

    /// Fragments of types absent from `existing`, capped at `max_fragments`.
    pub fn suggest_fragment_types(&self, prompt: &str, existing: &[Fragment]) -> Result<Vec<Fragment>> {
        let mut out = self.adapters().language.suggest_types(prompt, existing).map_err(Error::from_adapter)?;
        out.retain(|f| !existing.iter().any(|e| e.ftype == f.ftype));
        out.truncate(self.config().max_fragments);
        if out.is_empty() {
            return Err(Error::NoMoreTypes);
        }
        Ok(out)
    }

    /// `k` new values for the fragment's type.
    pub fn vary_fragment(&self, fragment: &Fragment, context: &str, k: usize) -> Result<Vec<Fragment>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let out = self.adapters().language.vary_values(fragment, context, k).map_err(Error::from_adapter)?;
        let mut seen: Vec<&str> = Vec::new();
        for f in &out {
            if f.ftype != fragment.ftype || f.value == fragment.value || seen.contains(&f.value.as_str()) {
                return Err(Error::Adapter(crate::adapters::AdapterError::MalformedResponse(format!(
                    "variation {f} of {fragment} is not a fresh value of the same type"
                ))));
            }
            seen.push(&f.value);
        }
        Ok(out)
    }

    /// Canonical prompt of `base` after `edits`.
    pub fn compose_prompt(&self, base: &str, edits: &[FragmentEdit]) -> Result<String> {
        let mut set = if base.trim().is_empty() {
            Vec::new()
        } else {
            self.adapters().language.decompose(base).map_err(Error::from_adapter)?
        };
        for edit in edits {
            edit.apply_to(&mut set)?;
        }
        self.adapters().language.compose(base, edits).map_err(Error::from_adapter)
    }

    /// The prompt an image element is steered by, describing its content
    /// when nothing else is known.
    fn resolve_prompt(&self, id: &ElementId) -> Result<String> {
        let body = self.image(id)?;
        if let Some(p) = self.image_prompt(body) {
            return Ok(p);
        }
        let asset = body.asset.as_ref().ok_or(Error::EmptyPrompt)?;
        let asset = self.doc().asset(asset)?;
        let described = self.adapters().language.describe(asset, None).map_err(Error::from_adapter)?;
        if described.trim().is_empty() {
            return Err(Error::EmptyPrompt);
        }
        Ok(described)
    }

    fn set_row(&mut self, id: &ElementId, row: FragmentRow) -> Result<()> {
        self.doc_mut().update_payload(id, |p| {
            if let Payload::Image(b) = p {
                b.row = Some(row);
            }
            Ok(())
        })
    }

    /// The fragment row of an image, computed on first reveal.
    pub fn reveal_fragments(&mut self, id: &ElementId) -> Result<FragmentRow> {
        if let Some(row) = &self.image(id)?.row {
            return Ok(row.clone());
        }
        let prompt = self.resolve_prompt(id)?;
        let row = FragmentRow::from_fragments(&self.decompose_prompt(&prompt)?);
        self.set_row(id, row.clone())?;
        Ok(row)
    }

    /// Appends fragments of new types to the image's row.
    pub fn extend_fragment_types(&mut self, id: &ElementId) -> Result<Vec<Fragment>> {
        let mut row = self.reveal_fragments(id)?;
        let prompt = self.resolve_prompt(id)?;
        let added = self.suggest_fragment_types(&prompt, &row.fragments)?;
        for f in &added {
            row.push_base(f.clone());
        }
        self.set_row(id, row)?;
        Ok(added)
    }

    /// Adds `k` variations of `fragment` to the column under its type.
    pub fn expand_fragment(&mut self, id: &ElementId, fragment: &Fragment, k: usize) -> Result<Vec<Fragment>> {
        let mut row = self.reveal_fragments(id)?;
        let prompt = self.resolve_prompt(id)?;
        let out = self.vary_fragment(fragment, &prompt, k)?;
        row.expand(&out);
        self.set_row(id, row)?;
        Ok(out)
    }

    /// Recomposes the image prompt and schedules a coalesced regeneration.
    pub fn apply_fragment_edit(&mut self, id: &ElementId, edit: FragmentEdit) -> Result<JobId> {
        let base = self.resolve_prompt(id)?;
        let composed = self.compose_prompt(&base, std::slice::from_ref(&edit))?;
        if composed.trim().is_empty() {
            return Err(Error::EmptyPrompt);
        }
        let fragments = self.adapters().language.decompose(&composed).map_err(Error::from_adapter)?;
        let before = self.doc().element(id)?.payload.clone();
        self.doc_mut().update_payload(id, |p| {
            if let Payload::Image(b) = p {
                b.prompt = composed.clone();
                if let Some(row) = &mut b.row {
                    row.rebase(&fragments);
                }
            }
            Ok(())
        })?;
        let spec = JobSpec { work: Work::Refresh, edits: vec![edit], cause: "fragment".into() };
        match self.submit(id, DebounceClass::EditCoalesce, spec) {
            Ok(job) => Ok(job),
            Err(e) => {
                self.doc_mut().set_payload(id, before)?;
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asset::ImageAsset;
    use crate::lexicon::Lexicon;
    use crate::workspace::tests::{image, rect, workspace};
    use crate::workspace::{ElementInit, ReportStatus};
    use proptest::prelude::*;

    fn f(t: &str, v: &str) -> Fragment {
        Fragment::new(t, v).unwrap()
    }

    fn pairs(frags: &[Fragment]) -> Vec<(String, String)> {
        frags.iter().map(|f| (f.ftype.to_string(), f.value.clone())).collect()
    }

    fn p(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn decomposition_examples() {
        let (ws, _) = workspace();
        let got = ws.decompose_prompt("an enchanting illustration of a castle").unwrap();
        assert_eq!(pairs(&got), p(&[("content", "castle"), ("style", "illustration"), ("tone", "enchanting")]));
        let got = ws.decompose_prompt("a watercolor fortress, pastel").unwrap();
        assert_eq!(pairs(&got), p(&[("content", "fortress"), ("style", "watercolor"), ("color", "pastel")]));
        assert_eq!(ws.decompose_prompt("  ").unwrap_err().code(), "empty-prompt");
    }

    #[test]
    fn decomposition_is_capped() {
        let (ws, _) = workspace();
        let got = ws.decompose_prompt("castle, heron, owl, fox, forest, lighthouse, watercolor").unwrap();
        assert_eq!(got.len(), 5);
    }

    #[test]
    fn variations() {
        let (ws, _) = workspace();
        let got = ws.vary_fragment(&f("style", "illustration"), "", 3).unwrap();
        assert_eq!(got.iter().map(|f| f.value.as_str()).collect::<Vec<_>>(), ["watercolor", "oil painting", "pixel art"]);
        let got = ws.vary_fragment(&f("content", "castle"), "", 2).unwrap();
        assert_eq!(got.iter().map(|f| f.value.as_str()).collect::<Vec<_>>(), ["fortress", "palace"]);
        assert!(ws.vary_fragment(&f("tone", "cozy"), "", 0).unwrap().is_empty());
    }

    #[test]
    fn suggestions() {
        let (ws, _) = workspace();
        let existing = [f("content", "castle"), f("style", "illustration"), f("tone", "enchanting")];
        let got = ws.suggest_fragment_types("castle", &existing).unwrap();
        let types: Vec<&str> = got.iter().map(|f| f.ftype.as_str()).collect();
        assert_eq!(types, ["color", "composition"]);
        let all: Vec<Fragment> =
            ["content", "style", "tone", "color", "composition"].iter().map(|t| f(t, "x")).collect();
        assert_eq!(ws.suggest_fragment_types("castle", &all).unwrap_err().code(), "no-more-types");
        assert_eq!(ws.suggest_fragment_types("castle", &[]).unwrap().len(), 5);
    }

    #[test]
    fn composition_examples() {
        let (ws, _) = workspace();
        let base = "castle, illustration, enchanting";
        let replaced = ws
            .compose_prompt(base, &[FragmentEdit::replace(f("style", "illustration"), f("style", "watercolor"))])
            .unwrap();
        assert_eq!(replaced, "castle, watercolor, enchanting");
        assert_eq!(ws.compose_prompt(base, &[FragmentEdit::remove(f("tone", "enchanting"))]).unwrap(), "castle, illustration");
        let pastel = f("color", "pastel");
        let round = ws.compose_prompt(base, &[FragmentEdit::add(pastel.clone()), FragmentEdit::remove(pastel)]).unwrap();
        assert_eq!(round, base);
        assert_eq!(ws.compose_prompt(base, &[FragmentEdit::remove(f("tone", "gloomy"))]).unwrap_err().code(), "remove-of-absent-fragment");
        let mismatch = FragmentEdit::replace(f("style", "illustration"), f("tone", "gloomy"));
        assert_eq!(ws.compose_prompt(base, &[mismatch]).unwrap_err().code(), "replace-type-mismatch");
    }

    #[test]
    fn reveal_is_idempotent() {
        let (mut ws, _) = workspace();
        let id = image(&mut ws, "an enchanting illustration of a castle", rect(0.0, 0.0, 64.0, 64.0));
        let row = ws.reveal_fragments(&id).unwrap();
        assert_eq!(row.fragments.len(), 3);
        let revision = ws.doc().revision;
        assert_eq!(ws.reveal_fragments(&id).unwrap(), row);
        assert_eq!(ws.doc().revision, revision);
        assert!(ws.is_idle());
    }

    #[test]
    fn reveal_describes_unprompted_assets() {
        let (mut ws, _) = workspace();
        let scene = crate::adapters::mock::MockImage::new(std::sync::Arc::new(Lexicon::builtin()), 8, 8).scene_for_prompt("heron");
        let asset = ImageAsset::new(8, 8, vec![9; 256], Some(scene)).unwrap();
        let asset = ws.import_asset(asset).unwrap();
        let id = ws
            .create_element(rect(0.0, 0.0, 8.0, 8.0), ElementInit::Image { prompt: String::new(), seed: None, asset: Some(asset) })
            .unwrap();
        let row = ws.reveal_fragments(&id).unwrap();
        assert_eq!(pairs(&row.fragments), p(&[("content", "heron")]));
    }

    #[test]
    fn row_extends_and_accumulates() {
        let (mut ws, _) = workspace();
        let id = image(&mut ws, "an enchanting illustration of a castle", rect(0.0, 0.0, 64.0, 64.0));
        let added = ws.extend_fragment_types(&id).unwrap();
        assert_eq!(added.len(), 2);
        assert_eq!(ws.image(&id).unwrap().row.as_ref().unwrap().fragments.len(), 5);
        assert_eq!(ws.extend_fragment_types(&id).unwrap_err().code(), "no-more-types");
        ws.expand_fragment(&id, &f("style", "illustration"), 2).unwrap();
        ws.expand_fragment(&id, &f("style", "illustration"), 3).unwrap();
        assert_eq!(ws.image(&id).unwrap().row.as_ref().unwrap().expansions["style"].len(), 3);
    }

    #[test]
    fn edit_regenerates_with_new_style() {
        let (mut ws, clock) = workspace();
        let id = image(&mut ws, "an enchanting illustration of a castle", rect(0.0, 0.0, 64.0, 64.0));
        ws.apply_fragment_edit(&id, FragmentEdit::replace(f("style", "illustration"), f("style", "watercolor"))).unwrap();
        assert!(ws.run_due_inline().is_empty());
        clock.advance(300);
        let reports = ws.run_due_inline();
        assert_eq!(reports.len(), 1);
        let asset = ws.doc().asset(ws.image(&id).unwrap().asset.as_ref().unwrap()).unwrap();
        assert_eq!(asset.scene.as_ref().unwrap().objects[0].style_tags, ["watercolor"]);
        let prov = asset.provenance.as_ref().unwrap();
        assert!(prov.fragments.iter().any(|x| x.same_as(&f("style", "watercolor"))));
        assert_eq!(prov.seed, 7);
    }

    #[test]
    fn close_edits_coalesce_into_one_job() {
        let (mut ws, clock) = workspace();
        let id = image(&mut ws, "castle, illustration, enchanting", rect(0.0, 0.0, 64.0, 64.0));
        ws.apply_fragment_edit(&id, FragmentEdit::add(f("color", "pastel"))).unwrap();
        clock.advance(200);
        let b = ws.apply_fragment_edit(&id, FragmentEdit::remove(f("tone", "enchanting"))).unwrap();
        assert_eq!(ws.scheduler().pending_count(), 1);
        assert_eq!(ws.scheduler().pending_job(&id, DebounceClass::EditCoalesce).unwrap().id, b);
        clock.advance(300);
        let reports = ws.run_due_inline();
        assert_eq!(reports.len(), 1);
        let ReportStatus::Applied { edits, .. } = &reports[0].status else { panic!("{reports:?}") };
        assert_eq!(edits.len(), 2);
        assert_eq!(ws.image(&id).unwrap().prompt, "castle, illustration, pastel");
    }

    #[test]
    fn spaced_edits_fire_separately() {
        let (mut ws, clock) = workspace();
        let id = image(&mut ws, "castle, illustration", rect(0.0, 0.0, 64.0, 64.0));
        ws.apply_fragment_edit(&id, FragmentEdit::add(f("color", "pastel"))).unwrap();
        clock.advance(500);
        assert_eq!(ws.run_due_inline().len(), 1);
        ws.apply_fragment_edit(&id, FragmentEdit::add(f("tone", "gloomy"))).unwrap();
        clock.advance(500);
        assert_eq!(ws.run_due_inline().len(), 1);
    }

    #[test]
    fn failed_edit_queues_nothing() {
        let (mut ws, _) = workspace();
        let id = image(&mut ws, "castle, illustration", rect(0.0, 0.0, 64.0, 64.0));
        let before = ws.doc().element(&id).unwrap().clone();
        assert!(ws.apply_fragment_edit(&id, FragmentEdit::remove(f("tone", "gloomy"))).is_err());
        assert!(ws.is_idle());
        assert_eq!(ws.doc().element(&id).unwrap(), &before);
    }

    #[test]
    fn add_then_remove_restores_bytes() {
        let (mut ws, clock) = workspace();
        let id = image(&mut ws, "an enchanting illustration of a castle", rect(0.0, 0.0, 64.0, 64.0));
        let original = ws.image(&id).unwrap().asset.clone().unwrap();
        let pastel = f("color", "pastel");
        ws.apply_fragment_edit(&id, FragmentEdit::add(pastel.clone())).unwrap();
        clock.advance(300);
        ws.run_due_inline();
        assert_ne!(ws.image(&id).unwrap().asset.as_ref(), Some(&original));
        ws.apply_fragment_edit(&id, FragmentEdit::remove(pastel)).unwrap();
        clock.advance(300);
        ws.run_due_inline();
        let back = ws.image(&id).unwrap().asset.clone().unwrap();
        assert_eq!(ws.doc().asset(&back).unwrap().raster, ws.doc().asset(&original).unwrap().raster);
    }

    fn lexicon_fragment() -> impl Strategy<Value = Fragment> {
        let lex = Lexicon::builtin();
        let all: Vec<Fragment> = lex
            .types()
            .flat_map(|t| lex.values(t).iter().map(move |v| Fragment::new(t.as_str(), v).unwrap()))
            .collect();
        prop::sample::select(all)
    }

    proptest! {
        #[test]
        fn compose_of_decomposition_is_stable(frags in prop::collection::vec(lexicon_fragment(), 1..5)) {
            let (ws, _) = workspace();
            let prompt = ws.compose_prompt("", &frags.iter().cloned().map(FragmentEdit::add).collect::<Vec<_>>()).unwrap();
            let first = ws.adapters().language.decompose(&prompt).unwrap();
            let adds: Vec<FragmentEdit> = first.iter().cloned().map(FragmentEdit::add).collect();
            let again = ws.compose_prompt("", &adds).unwrap();
            let second = ws.adapters().language.decompose(&again).unwrap();
            let mut a = pairs(&first);
            let mut b = pairs(&second);
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn variations_are_fresh(fragment in lexicon_fragment(), k in 0usize..4) {
            let (ws, _) = workspace();
            let out = ws.vary_fragment(&fragment, "", k).unwrap();
            prop_assert_eq!(out.len(), k);
            for (i, v) in out.iter().enumerate() {
                prop_assert_eq!(&v.ftype, &fragment.ftype);
                prop_assert_ne!(&v.value, &fragment.value);
                prop_assert!(out[..i].iter().all(|o| o.value != v.value));
            }
        }
    }
}
