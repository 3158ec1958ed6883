//! The document together with its scheduler and adapters.
//!
//! A [`Workspace`] is the single writer of a document. Engine operations
//! (fragments, lenses, containers, brushes, palettes) are methods on it and
//! live in their own modules. Generation work leaves the workspace as
//! self-contained [`Fired`] jobs and comes back through [`Workspace::apply`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterError, Adapters, Fnv1a};
use crate::asset::{AssetId, ImageAsset, Provenance};
use crate::brush::BrushState;
use crate::clock::Clock;
use crate::config::Config;
use crate::container::{Cell, CellKind, ContainerState, Grounding};
use crate::document::{CanvasDocument, Element, ElementId, ElementKind, ImageBody, Payload};
use crate::error::{Error, Result};
use crate::fragment::{Fragment, FragmentEdit};
use crate::geometry::Rect;
use crate::lens::LensState;
use crate::palette::PaletteState;
use crate::request::{GenerationControls, GenerationRequest, OpKind, CONTENT_PRESERVING};
use crate::scheduler::{Coalesce, DebounceClass, DiscardReason, Disposition, JobId, Scheduler};

/// What a scheduled job will do once it fires.
#[derive(Debug, Clone, PartialEq)]
pub enum Work {
    /// Regenerate an image element from its current prompt.
    Refresh,
    /// Re-synthesize a lens from what it covers at fire time.
    Lens,
    /// Requests fixed at submit time (brush inpaint, container grid).
    Requests(Vec<GenerationRequest>),
    /// Value variations of one fragment.
    Variations { fragment: Fragment, context: String, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub work: Work,
    pub edits: Vec<FragmentEdit>,
    pub cause: String,
}

impl JobSpec {
    pub fn new(work: Work, cause: &str) -> Self {
        JobSpec { work, edits: Vec::new(), cause: cause.to_string() }
    }
}

impl Coalesce for JobSpec {
    fn coalesce(mut self, newer: Self) -> Self {
        let mut edits = std::mem::take(&mut self.edits);
        edits.extend(newer.edits);
        JobSpec { work: newer.work, edits, cause: newer.cause }
    }
}

/// One adapter call with its resolved reference assets.
#[derive(Debug, Clone)]
pub struct Call {
    pub request: GenerationRequest,
    pub references: Vec<ImageAsset>,
}

/// Self-contained work that can run on any thread.
#[derive(Debug, Clone)]
pub enum FiredWork {
    Generate(Vec<Call>),
    Vary { fragment: Fragment, context: String, count: usize },
    /// The job could not be built; it completes with this failure.
    Rejected { code: String, message: String },
}

#[derive(Debug, Clone)]
pub struct Fired {
    pub job: JobId,
    pub target: ElementId,
    pub work: FiredWork,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Assets(Vec<ImageAsset>),
    Fragments(Vec<Fragment>),
    Failed { code: String, message: String },
}

impl Outcome {
    fn failed(err: &AdapterError) -> Self {
        let err = Error::from_adapter(err.clone());
        Outcome::Failed { code: err.code().into(), message: err.to_string() }
    }
}

impl FiredWork {
    /// Runs the adapter calls. Image calls of a grid run one after another.
    pub fn run(&self, adapters: &Adapters) -> Outcome {
        match self {
            FiredWork::Generate(calls) => {
                let mut assets = Vec::with_capacity(calls.len());
                for call in calls {
                    let result = match call.request.controls.op_kind {
                        OpKind::Inpaint | OpKind::Outpaint => adapters.image.inpaint(&call.request, &call.references),
                        OpKind::Txt2img | OpKind::Img2img => adapters.image.generate(&call.request, &call.references),
                    };
                    match result {
                        Ok(asset) => assets.push(asset),
                        Err(e) => return Outcome::failed(&e),
                    }
                }
                Outcome::Assets(assets)
            }
            FiredWork::Vary { fragment, context, count } => match adapters.language.vary_values(fragment, context, *count) {
                Ok(f) => Outcome::Fragments(f),
                Err(e) => Outcome::failed(&e),
            },
            FiredWork::Rejected { code, message } => Outcome::Failed { code: code.clone(), message: message.clone() },
        }
    }
}

#[derive(Debug, Clone)]
struct Flight {
    target: ElementId,
    requests: Vec<GenerationRequest>,
    parents: Vec<AssetId>,
    fragments: Vec<Vec<Fragment>>,
    edits: Vec<FragmentEdit>,
    cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum ReportStatus {
    Applied {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        assets: Vec<AssetId>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        fragments: Vec<Fragment>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        edits: Vec<FragmentEdit>,
        counter: u64,
    },
    Discarded {
        reason: DiscardReason,
    },
    Failed {
        code: String,
        message: String,
    },
}

/// The fate of one fired job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub job: JobId,
    pub target: ElementId,
    #[serde(flatten)]
    pub status: ReportStatus,
}

/// What a drop did, by source and target kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "camelCase")]
pub enum DropEffect {
    #[serde(rename_all = "camelCase")]
    FragmentAdded { image: ElementId, job: JobId },
    #[serde(rename_all = "camelCase")]
    ContainerGrounded { container: ElementId, job: JobId },
    #[serde(rename_all = "camelCase")]
    LensScheduled { lens: ElementId, job: JobId },
    #[serde(rename_all = "camelCase")]
    BrushesCombined { brush: ElementId },
    #[serde(rename_all = "camelCase")]
    StoredInPalette { palette: ElementId, index: usize },
    #[serde(rename_all = "camelCase")]
    BrushFilled { brush: ElementId, prompt: String },
}

/// Kind-specific initial state for [`Workspace::create_element`].
#[derive(Debug, Clone, PartialEq)]
pub enum ElementInit {
    Image { prompt: String, seed: Option<u64>, asset: Option<AssetId> },
    FragmentCard(Fragment),
    Lens { prompt: String },
    Container { prompt: String },
    Brush { prompt: String, mode: crate::brush::BrushMode },
    Palette { title: String },
}

impl ElementInit {
    pub fn kind(&self) -> ElementKind {
        match self {
            ElementInit::Image { .. } => ElementKind::Image,
            ElementInit::FragmentCard(_) => ElementKind::FragmentCard,
            ElementInit::Lens { .. } => ElementKind::Lens,
            ElementInit::Container { .. } => ElementKind::Container,
            ElementInit::Brush { .. } => ElementKind::Brush,
            ElementInit::Palette { .. } => ElementKind::Palette,
        }
    }
}

#[derive(Debug)]
pub struct Workspace {
    doc: CanvasDocument,
    scheduler: Scheduler<JobSpec>,
    adapters: Adapters,
    config: Config,
    clock: Arc<dyn Clock>,
    flights: BTreeMap<JobId, Flight>,
}

impl Workspace {
    pub fn new(config: Config, adapters: Adapters, clock: Arc<dyn Clock>) -> Self {
        Workspace {
            doc: CanvasDocument::new(),
            scheduler: Scheduler::new(config.scheduler()),
            adapters,
            config,
            clock,
            flights: BTreeMap::new(),
        }
    }

    /// Mock adapters with the configured image size.
    pub fn with_mock(config: Config, clock: Arc<dyn Clock>) -> Self {
        let adapters = Adapters::mock(config.image_size);
        Self::new(config, adapters, clock)
    }

    /// Adapters chosen by `config.adapter`.
    pub fn from_config(config: Config, clock: Arc<dyn Clock>) -> Result<Self> {
        let adapters = match config.adapter {
            crate::config::AdapterKind::Mock => Adapters::mock(config.image_size),
            crate::config::AdapterKind::Remote => {
                Adapters::remote(&config.remote, config.image_size).map_err(|e| Error::Config(e.to_string()))?
            }
        };
        Ok(Self::new(config, adapters, clock))
    }

    pub fn doc(&self) -> &CanvasDocument {
        &self.doc
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn adapters(&self) -> &Adapters {
        &self.adapters
    }

    pub fn scheduler(&self) -> &Scheduler<JobSpec> {
        &self.scheduler
    }

    pub fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub(crate) fn doc_mut(&mut self) -> &mut CanvasDocument {
        &mut self.doc
    }

    /// Swaps in another document. Every pending and in-flight job is dropped.
    pub fn replace_document(&mut self, doc: CanvasDocument) -> Result<()> {
        doc.check_invariants()?;
        let ids: Vec<ElementId> = self.doc.elements().map(|e| e.id.clone()).collect();
        for id in ids {
            self.scheduler.cancel_target(&id);
        }
        self.doc.replace_with(doc);
        Ok(())
    }

    /// Puts back a document taken before a failed command. Jobs are kept.
    pub(crate) fn restore_document(&mut self, doc: CanvasDocument) {
        self.doc = doc;
    }

    /// Deterministic per-element seed.
    pub(crate) fn element_seed(&self, id: &ElementId, salt: u64) -> u64 {
        Fnv1a::default().u64(self.config.base_seed).str(id.as_str()).u64(salt).finish()
    }

    pub fn import_asset(&mut self, asset: ImageAsset) -> Result<AssetId> {
        asset.verify()?;
        Ok(self.doc.insert_asset(asset))
    }

    fn wrong_kind(el: &Element, expected: ElementKind) -> Error {
        Error::WrongKind { id: el.id.clone(), expected, found: el.kind() }
    }

    pub(crate) fn image(&self, id: &ElementId) -> Result<&ImageBody> {
        let el = self.doc.element(id)?;
        match &el.payload {
            Payload::Image(b) => Ok(b),
            _ => Err(Self::wrong_kind(el, ElementKind::Image)),
        }
    }

    pub(crate) fn lens(&self, id: &ElementId) -> Result<&LensState> {
        let el = self.doc.element(id)?;
        match &el.payload {
            Payload::Lens(l) => Ok(l),
            _ => Err(Self::wrong_kind(el, ElementKind::Lens)),
        }
    }

    pub(crate) fn container(&self, id: &ElementId) -> Result<&ContainerState> {
        let el = self.doc.element(id)?;
        match &el.payload {
            Payload::Container(c) => Ok(c),
            _ => Err(Self::wrong_kind(el, ElementKind::Container)),
        }
    }

    pub(crate) fn brush(&self, id: &ElementId) -> Result<&BrushState> {
        let el = self.doc.element(id)?;
        match &el.payload {
            Payload::Brush(b) => Ok(b),
            _ => Err(Self::wrong_kind(el, ElementKind::Brush)),
        }
    }

    pub(crate) fn palette(&self, id: &ElementId) -> Result<&PaletteState> {
        let el = self.doc.element(id)?;
        match &el.payload {
            Payload::Palette(p) => Ok(p),
            _ => Err(Self::wrong_kind(el, ElementKind::Palette)),
        }
    }

    /// The prompt an image was made from: its own, else its asset's.
    pub(crate) fn image_prompt(&self, body: &ImageBody) -> Option<String> {
        if !body.prompt.trim().is_empty() {
            return Some(body.prompt.clone());
        }
        let asset = self.doc.asset(body.asset.as_ref()?).ok()?;
        asset.provenance.as_ref().map(|p| p.prompt.clone()).filter(|p| !p.trim().is_empty())
    }

    pub(crate) fn cancel_jobs(&mut self, id: &ElementId) -> usize {
        self.scheduler.cancel_target(id)
    }

    pub(crate) fn submit(&mut self, target: &ElementId, class: DebounceClass, spec: JobSpec) -> Result<JobId> {
        let now = self.now();
        let job = self.scheduler.submit(target.clone(), class, spec, now)?;
        if let Payload::Lens(_) = self.doc.element(target)?.payload {
            self.doc.update_payload(target, |p| {
                if let Payload::Lens(l) = p {
                    l.pending_job = Some(job);
                }
                Ok(())
            })?;
        }
        Ok(job)
    }

    pub fn create_element(&mut self, rect: Rect, init: ElementInit) -> Result<ElementId> {
        let payload = match &init {
            ElementInit::Image { prompt, asset, .. } => {
                if let Some(a) = asset {
                    self.doc.asset(a).map_err(|_| Error::MalformedPayload(format!("unknown asset {a}")))?;
                }
                Payload::Image(ImageBody { asset: asset.clone(), prompt: prompt.trim().to_string(), seed: 0, row: None })
            }
            ElementInit::FragmentCard(f) => Payload::FragmentCard(f.clone()),
            ElementInit::Lens { prompt } => Payload::Lens(LensState::new(prompt)),
            ElementInit::Container { prompt } => Payload::Container(ContainerState::new(prompt)),
            ElementInit::Brush { prompt, mode } => Payload::Brush(BrushState::new(prompt, *mode)),
            ElementInit::Palette { title } => Payload::Palette(PaletteState::new(title)),
        };
        let id = self.doc.create_element(rect, payload)?;
        match init {
            ElementInit::Image { prompt, seed, asset } => {
                let seed = seed.unwrap_or_else(|| self.element_seed(&id, 0));
                self.doc.update_payload(&id, |p| {
                    if let Payload::Image(b) = p {
                        b.seed = seed;
                    }
                    Ok(())
                })?;
                if asset.is_none() && !prompt.trim().is_empty() {
                    self.submit(&id, DebounceClass::Immediate, JobSpec::new(Work::Refresh, "create"))?;
                }
            }
            ElementInit::Lens { .. } if self.build_composition(&id).is_ok() => {
                self.regenerate_lens(&id)?;
            }
            _ => {}
        }
        self.doc.check_invariants()?;
        Ok(id)
    }

    /// Replaces an element's rect; lenses affected by the move are queued
    /// for debounced regeneration.
    pub fn update_geometry(&mut self, id: &ElementId, rect: Rect) -> Result<bool> {
        let old = self.doc.element(id)?.clone();
        if !self.doc.set_rect(id, rect)? {
            return Ok(false);
        }
        let mut lenses = Vec::new();
        if old.kind() == ElementKind::Lens {
            lenses.push(id.clone());
        }
        if matches!(old.kind(), ElementKind::Image | ElementKind::Lens) {
            for region in [old.rect, rect] {
                for lens in self.lenses_above(old.z, &region) {
                    if !lenses.contains(&lens) {
                        lenses.push(lens);
                    }
                }
            }
        }
        for lens in lenses {
            if self.build_composition(&lens).is_ok() {
                self.regenerate_lens(&lens)?;
            }
        }
        Ok(true)
    }

    /// Sets the prompt of an image, lens, container or brush.
    pub fn set_prompt(&mut self, id: &ElementId, prompt: &str) -> Result<Option<JobId>> {
        let prompt = prompt.trim().to_string();
        match self.doc.element(id)?.kind() {
            ElementKind::Image => {
                if prompt.is_empty() {
                    return Err(Error::EmptyPrompt);
                }
                self.doc.update_payload(id, |p| {
                    if let Payload::Image(b) = p {
                        b.prompt = prompt.clone();
                        b.row = None;
                    }
                    Ok(())
                })?;
                Ok(Some(self.submit(id, DebounceClass::Immediate, JobSpec::new(Work::Refresh, "prompt"))?))
            }
            ElementKind::Lens => {
                let before = self.doc.element(id)?.payload.clone();
                self.doc.update_payload(id, |p| {
                    if let Payload::Lens(l) = p {
                        l.prompt = prompt.clone();
                    }
                    Ok(())
                })?;
                if let Err(e) = self.build_composition(id) {
                    self.doc.set_payload(id, before)?;
                    return Err(e);
                }
                Ok(Some(self.regenerate_lens(id)?))
            }
            ElementKind::Container => {
                self.doc.update_payload(id, |p| {
                    if let Payload::Container(c) = p {
                        c.prompt = prompt.clone();
                    }
                    Ok(())
                })?;
                Ok(None)
            }
            ElementKind::Brush => {
                let mode = self.brush(id)?.mode;
                self.fill_brush_from_text(id, &prompt, mode)?;
                Ok(None)
            }
            kind => Err(Error::MalformedPayload(format!("{kind} elements have no prompt"))),
        }
    }

    /// Removes an element, cancelling its jobs. Lenses that covered it
    /// regenerate.
    pub fn delete_element(&mut self, id: &ElementId) -> Result<usize> {
        let el = self.doc.element(id)?.clone();
        let lenses = match el.kind() {
            ElementKind::Image | ElementKind::Lens => self.lenses_above(el.z, &el.rect),
            _ => Vec::new(),
        };
        let cancelled = self.scheduler.cancel_target(id);
        self.doc.remove_element(id)?;
        for lens in lenses {
            if self.build_composition(&lens).is_ok() {
                self.regenerate_lens(&lens)?;
            }
        }
        Ok(cancelled)
    }

    /// Records the element's current state in its history.
    pub fn snapshot(&mut self, id: &ElementId) -> Result<crate::document::HistoryEntry> {
        let now = self.now();
        self.doc.snapshot(id, "snapshot", now)
    }

    /// Puts a history entry's state back without regenerating anything.
    pub fn restore(&mut self, seq: u64) -> Result<()> {
        let entry = self
            .doc
            .history_entry(seq)
            .cloned()
            .ok_or_else(|| Error::MalformedPayload(format!("no history entry {seq}")))?;
        let now = self.now();
        self.doc.restore(&entry, now)?;
        self.scheduler.cancel_target(&entry.element_id);
        Ok(())
    }

    pub fn drop_on(&mut self, source: &ElementId, target: &ElementId) -> Result<DropEffect> {
        let src = self.doc.element(source)?.clone();
        let dst = self.doc.element(target)?.clone();
        let unsupported = || Error::UnsupportedPair { source_kind: src.kind(), target_kind: dst.kind() };
        if source == target {
            return Err(unsupported());
        }
        use ElementKind as K;
        match (src.kind(), dst.kind()) {
            (K::FragmentCard, K::Image) => {
                let Payload::FragmentCard(f) = &src.payload else { unreachable!() };
                let job = self.apply_fragment_edit(target, FragmentEdit::add(f.clone()))?;
                Ok(DropEffect::FragmentAdded { image: target.clone(), job })
            }
            (K::Image, K::Container) => {
                let asset = self.image(source)?.asset.clone().ok_or_else(|| {
                    Error::UnresolvableSource(format!("image {source} has no generated content yet"))
                })?;
                self.ground_container(target, Grounding::Asset(asset))?;
                let job = self.generate_variations(target)?;
                Ok(DropEffect::ContainerGrounded { container: target.clone(), job })
            }
            (K::FragmentCard, K::Container) => {
                let Payload::FragmentCard(f) = &src.payload else { unreachable!() };
                self.ground_container(target, Grounding::Fragment(f.clone()))?;
                let job = self.generate_variations(target)?;
                Ok(DropEffect::ContainerGrounded { container: target.clone(), job })
            }
            (K::Image, K::Lens) | (K::Lens, K::Image) => {
                let lens = if src.kind() == K::Lens { source } else { target };
                let before = self.doc.clone();
                self.doc.bring_to_front(lens)?;
                match self.build_composition(lens) {
                    Ok(_) => {
                        let job = self.submit(lens, DebounceClass::Immediate, JobSpec::new(Work::Lens, "drop"))?;
                        Ok(DropEffect::LensScheduled { lens: lens.clone(), job })
                    }
                    Err(e) => {
                        self.doc = before;
                        Err(e)
                    }
                }
            }
            (K::Brush, K::Brush) => {
                let brush = self.combine_brushes(source, target)?;
                Ok(DropEffect::BrushesCombined { brush })
            }
            (_, K::Palette) => {
                let index = self.add_to_palette(target, source)?;
                Ok(DropEffect::StoredInPalette { palette: target.clone(), index })
            }
            (K::Image, K::Brush) => {
                let asset = self.image(source)?.asset.clone().ok_or_else(|| Error::UnknownTarget(source.clone()))?;
                let mode = self.brush(target)?.mode;
                let prompt = self.fill_brush_from_example(target, &asset, None, mode)?;
                Ok(DropEffect::BrushFilled { brush: target.clone(), prompt })
            }
            _ => Err(unsupported()),
        }
    }

    pub fn next_due(&self) -> Option<u64> {
        self.scheduler.next_due()
    }

    pub fn is_idle(&self) -> bool {
        self.scheduler.is_idle()
    }

    /// Fires every due job the in-flight bound allows.
    pub fn fire_due(&mut self) -> Vec<Fired> {
        let now = self.now();
        let jobs = self.scheduler.poll(now);
        jobs.into_iter()
            .map(|job| {
                let (work, flight) = match self.build(&job.target, &job.payload) {
                    Ok((calls_or_vary, flight)) => (calls_or_vary, flight),
                    Err(e) => (
                        FiredWork::Rejected { code: e.code().into(), message: e.to_string() },
                        Flight {
                            target: job.target.clone(),
                            requests: Vec::new(),
                            parents: Vec::new(),
                            fragments: Vec::new(),
                            edits: Vec::new(),
                            cause: job.payload.cause.clone(),
                        },
                    ),
                };
                let flight = Flight { edits: job.payload.edits.clone(), ..flight };
                self.flights.insert(job.id, flight);
                Fired { job: job.id, target: job.target, work }
            })
            .collect()
    }

    fn build(&self, target: &ElementId, spec: &JobSpec) -> Result<(FiredWork, Flight)> {
        let mut parents = Vec::new();
        let calls = match &spec.work {
            Work::Refresh => {
                let body = self.image(target)?;
                let prompt = self.image_prompt(body).ok_or(Error::EmptyPrompt)?;
                let (request, references) = match &body.asset {
                    Some(asset) => {
                        let reference = self.doc.asset(asset)?.clone();
                        parents.push(asset.clone());
                        let request = GenerationRequest {
                            prompt,
                            reference_assets: vec![asset.clone()],
                            mask: None,
                            controls: GenerationControls::weighted(OpKind::Img2img, CONTENT_PRESERVING),
                            seed: body.seed,
                        };
                        (request, vec![reference])
                    }
                    None => (GenerationRequest::txt2img(prompt, body.seed), Vec::new()),
                };
                vec![Call { request, references }]
            }
            Work::Lens => {
                let (call, sources) = self.lens_call(target)?;
                parents = sources;
                vec![call]
            }
            Work::Requests(requests) => {
                let mut calls = Vec::new();
                for request in requests {
                    let references = request
                        .reference_assets
                        .iter()
                        .map(|id| self.doc.asset(id).cloned())
                        .collect::<Result<Vec<_>>>()?;
                    for id in &request.reference_assets {
                        if !parents.contains(id) {
                            parents.push(id.clone());
                        }
                    }
                    calls.push(Call { request: request.clone(), references });
                }
                calls
            }
            Work::Variations { fragment, context, count } => {
                let flight = Flight {
                    target: target.clone(),
                    requests: Vec::new(),
                    parents: Vec::new(),
                    fragments: Vec::new(),
                    edits: Vec::new(),
                    cause: spec.cause.clone(),
                };
                let work = FiredWork::Vary { fragment: fragment.clone(), context: context.clone(), count: *count };
                return Ok((work, flight));
            }
        };
        for call in &calls {
            call.request.validate(&call.references)?;
        }
        let fragments = calls
            .iter()
            .map(|c| self.adapters.language.decompose(&c.request.prompt).unwrap_or_default())
            .collect();
        let flight = Flight {
            target: target.clone(),
            requests: calls.iter().map(|c| c.request.clone()).collect(),
            parents,
            fragments,
            edits: Vec::new(),
            cause: spec.cause.clone(),
        };
        Ok((FiredWork::Generate(calls), flight))
    }

    /// Decides the fate of a finished job and applies its result.
    pub fn apply(&mut self, job: JobId, outcome: Outcome) -> Report {
        let flight = self.flights.remove(&job);
        let target = flight.as_ref().map(|f| f.target.clone()).unwrap_or_else(|| ElementId::from(""));
        let report = |status| Report { job, target: target.clone(), status };
        let counter = match self.scheduler.on_result(job) {
            Disposition::Discarded(reason) => return report(ReportStatus::Discarded { reason }),
            Disposition::Applied { target_counter } => target_counter,
        };
        let flight = flight.expect("applied jobs have a flight");
        if let Some(Payload::Lens(l)) = self.doc.get(&target).map(|e| &e.payload) {
            if l.pending_job == Some(job) {
                let _ = self.doc.update_payload(&target, |p| {
                    if let Payload::Lens(l) = p {
                        l.pending_job = None;
                    }
                    Ok(())
                });
            }
        }
        let result = match outcome {
            Outcome::Failed { code, message } => return report(ReportStatus::Failed { code, message }),
            other => self.commit(&flight, other, counter),
        };
        match result {
            Ok(status) => report(status),
            Err(e) => report(ReportStatus::Failed { code: e.code().into(), message: e.to_string() }),
        }
    }

    fn commit(&mut self, flight: &Flight, outcome: Outcome, counter: u64) -> Result<ReportStatus> {
        let target = &flight.target;
        let el = self.doc.element(target)?.clone();
        let now = self.now();
        let before = self.doc.clone();
        let result = (|| {
            let (assets, fragments) = match outcome {
                Outcome::Assets(assets) => {
                    if assets.len() != flight.requests.len() {
                        return Err(Error::Adapter(AdapterError::MalformedResponse(format!(
                            "{} assets for {} requests",
                            assets.len(),
                            flight.requests.len()
                        ))));
                    }
                    let mut ids = Vec::new();
                    for (i, asset) in assets.into_iter().enumerate() {
                        asset.verify()?;
                        let request = &flight.requests[i];
                        let provenance = Provenance {
                            prompt: request.prompt.clone(),
                            fragments: flight.fragments.get(i).cloned().unwrap_or_default(),
                            parents: flight.parents.clone(),
                            seed: request.seed,
                            controls: request.controls,
                            adapter_id: self.adapters.image.id().to_string(),
                            created_at: now,
                        };
                        ids.push(self.doc.insert_asset(asset.with_provenance(provenance)));
                    }
                    (ids, Vec::new())
                }
                Outcome::Fragments(f) => (Vec::new(), f),
                Outcome::Failed { .. } => unreachable!("handled by apply"),
            };
            self.doc.snapshot(target, &flight.cause, now)?;
            let mut payload = el.payload.clone();
            match (&mut payload, assets.as_slice()) {
                (Payload::Image(b), [asset]) => b.asset = Some(asset.clone()),
                (Payload::Lens(l), [asset]) => l.last_result = Some(asset.clone()),
                (Payload::Container(c), cells) if cells.len() == 4 => {
                    c.cells = cells.iter().cloned().map(Cell::Image).collect();
                    c.cell_kind = CellKind::Images;
                }
                (Payload::Container(c), []) if fragments.len() == 4 => {
                    c.cells = fragments.iter().cloned().map(Cell::Fragment).collect();
                    c.cell_kind = CellKind::Fragments;
                }
                _ => {
                    return Err(Error::Adapter(AdapterError::MalformedResponse(format!(
                        "result does not fit a {} element",
                        el.kind()
                    ))))
                }
            }
            self.doc.set_payload(target, payload)?;
            self.doc.set_counter(target, counter);
            Ok((assets, fragments))
        })();
        let (assets, fragments) = match result {
            Ok(v) => v,
            Err(e) => {
                self.doc = before;
                return Err(e);
            }
        };
        // results flow upward: lenses above the changed element re-synthesize
        if matches!(el.kind(), ElementKind::Image | ElementKind::Lens) {
            for lens in self.lenses_above(el.z, &el.rect) {
                if self.build_composition(&lens).is_ok() {
                    self.submit(&lens, DebounceClass::Immediate, JobSpec::new(Work::Lens, "upstream"))?;
                }
            }
        }
        self.doc.check_invariants()?;
        Ok(ReportStatus::Applied { assets, fragments, edits: flight.edits.clone(), counter })
    }

    /// Runs jobs inline until nothing is due, advancing no time.
    pub fn run_due_inline(&mut self) -> Vec<Report> {
        let mut reports = Vec::new();
        loop {
            let fired = self.fire_due();
            if fired.is_empty() {
                return reports;
            }
            for f in fired {
                let outcome = f.work.run(&self.adapters);
                reports.push(self.apply(f.job, outcome));
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::clock::VirtualClock;

    pub(crate) fn workspace() -> (Workspace, VirtualClock) {
        let clock = VirtualClock::new();
        let config = Config { image_size: 64, ..Config::default() };
        (Workspace::with_mock(config, Arc::new(clock.clone())), clock)
    }

    pub(crate) fn rect(x: f64, y: f64, w: f64, h: f64) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    pub(crate) fn image(ws: &mut Workspace, prompt: &str, r: Rect) -> ElementId {
        let id = ws
            .create_element(r, ElementInit::Image { prompt: prompt.into(), seed: Some(7), asset: None })
            .unwrap();
        ws.run_due_inline();
        id
    }

    #[test]
    fn image_with_prompt_generates_immediately() {
        let (mut ws, _) = workspace();
        let id = image(&mut ws, "an enchanting illustration of a castle", rect(0.0, 0.0, 64.0, 64.0));
        let body = ws.image(&id).unwrap();
        let asset = ws.doc().asset(body.asset.as_ref().unwrap()).unwrap();
        assert_eq!(asset.scene.as_ref().unwrap().objects[0].label, "castle");
        let prov = asset.provenance.as_ref().unwrap();
        assert_eq!(prov.seed, 7);
        assert_eq!(prov.adapter_id, "mock-image");
        assert_eq!(ws.doc().counter(&id), 1);
        assert_eq!(ws.doc().history().len(), 1);
    }

    #[test]
    fn reflexive_and_unknown_pairs_do_not_mutate() {
        let (mut ws, _) = workspace();
        let img = image(&mut ws, "castle", rect(0.0, 0.0, 10.0, 10.0));
        let lens = ws.create_element(rect(50.0, 50.0, 10.0, 10.0), ElementInit::Lens { prompt: "x".into() }).unwrap();
        ws.run_due_inline();
        let before = ws.doc().serialize();
        assert_eq!(ws.drop_on(&img, &img).unwrap_err().code(), "unsupported-pair");
        let card = ws.create_element(rect(0.0, 0.0, 1.0, 1.0), ElementInit::FragmentCard(Fragment::new("tone", "cozy").unwrap())).unwrap();
        let mid = ws.doc().serialize();
        assert_eq!(ws.drop_on(&card, &lens).unwrap_err().code(), "unsupported-pair");
        assert_eq!(ws.doc().serialize(), mid);
        assert_ne!(before, mid);
    }

    #[test]
    fn deleting_cancels_and_discards() {
        let (mut ws, _) = workspace();
        let id = ws
            .create_element(rect(0.0, 0.0, 8.0, 8.0), ElementInit::Image { prompt: "owl".into(), seed: None, asset: None })
            .unwrap();
        let fired = ws.fire_due();
        assert_eq!(fired.len(), 1);
        assert_eq!(ws.delete_element(&id).unwrap(), 1);
        let outcome = fired[0].work.run(ws.adapters());
        let report = ws.apply(fired[0].job, outcome);
        assert_eq!(report.status, ReportStatus::Discarded { reason: DiscardReason::Cancelled });
        assert_eq!(ws.doc().assets().count(), 0);
    }

    #[test]
    fn failed_outcome_keeps_previous_asset() {
        let (mut ws, _) = workspace();
        let id = image(&mut ws, "owl", rect(0.0, 0.0, 8.0, 8.0));
        let before = ws.image(&id).unwrap().asset.clone();
        ws.set_prompt(&id, "fox").unwrap();
        let fired = ws.fire_due();
        let report = ws.apply(fired[0].job, Outcome::Failed { code: "adapter-failure".into(), message: "down".into() });
        assert!(matches!(report.status, ReportStatus::Failed { .. }));
        assert_eq!(ws.image(&id).unwrap().asset, before);
    }

    #[test]
    fn restore_reverts_bytes_without_regenerating() {
        let (mut ws, _) = workspace();
        let id = image(&mut ws, "castle, illustration", rect(0.0, 0.0, 8.0, 8.0));
        let entry = ws.snapshot(&id).unwrap();
        let original = ws.image(&id).unwrap().asset.clone().unwrap();
        ws.set_prompt(&id, "castle, watercolor").unwrap();
        ws.run_due_inline();
        assert_ne!(ws.image(&id).unwrap().asset.as_ref(), Some(&original));
        ws.restore(entry.seq).unwrap();
        assert_eq!(ws.image(&id).unwrap().asset.as_ref(), Some(&original));
        assert!(ws.is_idle());
        let bytes = &ws.doc().asset(&original).unwrap().raster;
        assert_eq!(bytes.len(), 64 * 64 * 4);
    }
}
