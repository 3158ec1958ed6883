//! The command/event boundary around a [`Workspace`].
//!
//! A [`Session`] turns commands into events: each successful command emits
//! exactly one `docPatch` carrying the diff and the command's result, each
//! failed one exactly one `error` event, with the document left untouched.
//! Generation jobs add `generationStarted` and, on completion, a `docPatch`
//! followed by `generationCompleted`, `generationDiscarded` or `error`.
//!
//! [`Session`] is synchronous. [`live::LiveSession`] drives one on its own
//! thread for servers; [`script`] drives one with a virtual clock.

pub mod live;
pub mod protocol;
pub mod replay;
pub mod script;

use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};

use serde_json::{json, Value};

use crate::brush::BrushMode;
use crate::document::{load_document, save_document, CanvasDocument, ElementKind};
use crate::error::{Error, Result};
use crate::scheduler::JobId;
use crate::workspace::{ElementInit, Fired, Outcome, Report, ReportStatus, Workspace};

pub use protocol::{Command, Event, EventKind, Request};
pub use replay::replay;
pub use script::{Script, Transcript};

#[derive(Debug)]
pub struct Session {
    ws: Workspace,
    subscribers: Vec<SyncSender<Event>>,
    log: Option<Vec<Event>>,
    base_dir: Option<PathBuf>,
}

impl Session {
    pub fn new(ws: Workspace) -> Self {
        Session { ws, subscribers: Vec::new(), log: None, base_dir: None }
    }

    /// Keeps every emitted event for [`Session::take_log`].
    pub fn recording(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    /// Directory that relative save and load paths resolve against.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn document(&self) -> &CanvasDocument {
        self.ws.doc()
    }

    pub fn take_log(&mut self) -> Vec<Event> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// A new event channel holding at most `capacity` undelivered events.
    /// A subscriber that falls that far behind is disconnected.
    pub fn subscribe(&mut self, capacity: usize) -> Receiver<Event> {
        let (tx, rx) = sync_channel(capacity.max(1));
        self.subscribers.push(tx);
        rx
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }

    fn emit(&mut self, event: Event, out: &mut Vec<Event>) {
        self.subscribers.retain(|tx| match tx.try_send(event.clone()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                tracing::warn!("disconnecting a subscriber that fell behind");
                false
            }
            Err(TrySendError::Disconnected(_)) => false,
        });
        if let Some(log) = &mut self.log {
            log.push(event.clone());
        }
        out.push(event);
    }

    fn event(&self, kind: EventKind, request_id: Option<String>, payload: Value) -> Event {
        Event { kind, doc_revision: self.ws.doc().revision, request_id, payload }
    }

    fn error_event(&self, request_id: Option<String>, err: &Error) -> Event {
        self.event(EventKind::Error, request_id, json!({ "code": err.code(), "message": err.to_string() }))
    }

    /// Parses and executes one protocol line.
    pub fn handle_line(&mut self, line: &str) -> Vec<Event> {
        match Request::parse_line(line) {
            Ok(cmd) => self.handle(cmd),
            Err(e) => {
                let mut out = Vec::new();
                let ev = self.error_event(None, &e);
                self.emit(ev, &mut out);
                out
            }
        }
    }

    /// Executes one command and returns the events it emitted.
    pub fn handle(&mut self, cmd: Command) -> Vec<Event> {
        self.try_handle(cmd).unwrap_or_else(|(events, _)| events)
    }

    /// Like [`Session::handle`], also returning the error of a failed command.
    pub fn try_handle(&mut self, cmd: Command) -> std::result::Result<Vec<Event>, (Vec<Event>, Error)> {
        let mut out = Vec::new();
        let request_id = cmd.request_id.clone();
        let before = self.ws.doc().clone();
        let result = Request::parse(&cmd).and_then(|req| self.execute(req));
        match result {
            Ok(value) => {
                let ops = self.ws.doc().diff(&before);
                let mut payload = json!({ "ops": ops });
                if !value.is_null() {
                    payload["result"] = value;
                }
                let ev = self.event(EventKind::DocPatch, request_id, payload);
                self.emit(ev, &mut out);
                Ok(out)
            }
            Err(e) => {
                self.ws.restore_document(before);
                let ev = self.error_event(request_id, &e);
                self.emit(ev, &mut out);
                Err((out, e))
            }
        }
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn execute(&mut self, req: Request) -> Result<Value> {
        let ws = &mut self.ws;
        let job = |j: JobId| json!({ "job": j });
        Ok(match req {
            Request::CreateElement(a) => {
                let text = a.prompt.clone().unwrap_or_default();
                let init = match a.kind {
                    ElementKind::Image => ElementInit::Image { prompt: text, seed: a.seed, asset: a.asset },
                    ElementKind::FragmentCard => ElementInit::FragmentCard(
                        a.fragment.ok_or_else(|| Error::Schema("fragment-card needs `fragment`".into()))?,
                    ),
                    ElementKind::Lens => ElementInit::Lens { prompt: text },
                    ElementKind::Container => ElementInit::Container { prompt: text },
                    ElementKind::Brush => ElementInit::Brush { prompt: text, mode: a.mode.unwrap_or(BrushMode::Style) },
                    ElementKind::Palette => ElementInit::Palette { title: a.title.or(a.prompt).unwrap_or_default() },
                };
                json!({ "id": ws.create_element(a.rect.rect()?, init)? })
            }
            Request::UpdateGeometry(a) => json!({ "changed": ws.update_geometry(&a.id, a.rect.rect()?)? }),
            Request::SetPrompt(a) => match a.mode {
                Some(mode) if ws.doc().element(&a.id)?.kind() == ElementKind::Brush => {
                    ws.fill_brush_from_text(&a.id, &a.prompt, mode)?;
                    Value::Null
                }
                _ => match ws.set_prompt(&a.id, &a.prompt)? {
                    Some(j) => job(j),
                    None => Value::Null,
                },
            },
            Request::DeleteElement(a) => json!({ "cancelled": ws.delete_element(&a.id)? }),
            Request::DropOn(a) => serde_json::to_value(ws.drop_on(&a.source, &a.target)?).expect("serializable"),
            Request::RevealFragments(a) => json!({ "row": ws.reveal_fragments(&a.id)? }),
            Request::VaryFragment(a) => {
                let values = match &a.id {
                    Some(id) => ws.expand_fragment(id, &a.fragment, a.k)?,
                    None => ws.vary_fragment(&a.fragment, a.context.as_deref().unwrap_or(""), a.k)?,
                };
                json!({ "values": values })
            }
            Request::ExtendFragmentTypes(a) => json!({ "added": ws.extend_fragment_types(&a.id)? }),
            Request::ApplyFragmentEdit(a) => job(ws.apply_fragment_edit(&a.id, a.edit)?),
            Request::GroundContainer(a) => {
                ws.ground_container(&a.id, a.grounding)?;
                Value::Null
            }
            Request::GenerateContainer(a) => job(ws.generate_variations(&a.id)?),
            Request::AdoptCell(a) => json!({ "id": ws.adopt_cell(&a.id, a.index, a.rect.rect()?)? }),
            Request::FillBrushFromText(a) => {
                let mode = match a.mode {
                    Some(m) => m,
                    None => ws.brush(&a.id)?.mode,
                };
                ws.fill_brush_from_text(&a.id, &a.prompt, mode)?;
                Value::Null
            }
            Request::FillBrushFromExample(a) => {
                let asset = match (a.asset, &a.source) {
                    (Some(asset), None) => asset,
                    (None, Some(source)) => {
                        ws.image(source)?.asset.clone().ok_or_else(|| Error::UnknownTarget(source.clone()))?
                    }
                    _ => return Err(Error::Schema("fillBrushFromExample needs exactly one of `asset`, `source`".into())),
                };
                let region = a.region.map(|r| r.rect()).transpose()?;
                let mode = match a.mode {
                    Some(m) => m,
                    None => ws.brush(&a.id)?.mode,
                };
                json!({ "prompt": ws.fill_brush_from_example(&a.id, &asset, region.as_ref(), mode)? })
            }
            Request::ApplyBrushStroke(a) => job(ws.apply_brush(&a.brush, &a.target, &a.stroke)?),
            Request::CombineBrushes(a) => json!({ "id": ws.combine_brushes(&a.source, &a.target)? }),
            Request::AddToPalette(a) => json!({ "index": ws.add_to_palette(&a.palette, &a.element)? }),
            Request::TakeFromPalette(a) => json!({ "id": ws.take_from_palette(&a.palette, a.index, a.rect.rect()?)? }),
            Request::GeneratePalette(a) => json!({ "id": ws.generate_palette(&a.prompt, a.kind, a.k, a.rect.rect()?)? }),
            Request::SetLensFaded(a) => {
                ws.set_lens_faded(&a.id, a.faded)?;
                Value::Null
            }
            Request::SnapshotElement(a) => json!({ "seq": ws.snapshot(&a.id)?.seq }),
            Request::RestoreHistory(a) => {
                ws.restore(a.seq)?;
                Value::Null
            }
            Request::SaveDocument(a) => {
                let path = self.resolve(&a.path);
                save_document(self.ws.doc(), &path)?;
                Value::Null
            }
            Request::LoadDocument(a) => {
                let path = self.resolve(&a.path);
                let doc = load_document(&path)?;
                self.ws.replace_document(doc)?;
                Value::Null
            }
            Request::WaitIdle(_) | Request::Advance(_) => {
                return Err(Error::Schema("clock commands are only valid in scripts".into()))
            }
        })
    }

    /// Fires due jobs and announces them.
    pub fn fire_due(&mut self) -> (Vec<Fired>, Vec<Event>) {
        let fired = self.ws.fire_due();
        let mut out = Vec::new();
        for f in &fired {
            let ev = self.event(EventKind::GenerationStarted, None, json!({ "job": f.job, "target": f.target }));
            self.emit(ev, &mut out);
        }
        (fired, out)
    }

    /// Applies a finished job and announces its fate.
    pub fn complete(&mut self, job: JobId, outcome: Outcome) -> Vec<Event> {
        let before = self.ws.doc().clone();
        let report = self.ws.apply(job, outcome);
        let mut out = Vec::new();
        let ops = self.ws.doc().diff(&before);
        if !ops.is_empty() {
            let ev = self.event(EventKind::DocPatch, None, json!({ "ops": ops, "job": job }));
            self.emit(ev, &mut out);
        }
        let ev = self.report_event(report);
        self.emit(ev, &mut out);
        out
    }

    fn report_event(&self, report: Report) -> Event {
        let kind = match &report.status {
            ReportStatus::Applied { .. } => EventKind::GenerationCompleted,
            ReportStatus::Discarded { .. } => EventKind::GenerationDiscarded,
            ReportStatus::Failed { .. } => EventKind::Error,
        };
        let mut payload = serde_json::to_value(&report).expect("serializable");
        if let ReportStatus::Failed { code, message } = &report.status {
            payload["code"] = json!(code);
            payload["message"] = json!(message);
        }
        self.event(kind, None, payload)
    }

    /// Runs every due job on this thread until nothing more is due now.
    pub fn run_due_inline(&mut self) -> Vec<Event> {
        let mut out = Vec::new();
        loop {
            let (fired, events) = self.fire_due();
            out.extend(events);
            if fired.is_empty() {
                return out;
            }
            for f in fired {
                let outcome = f.work.run(self.ws.adapters());
                out.extend(self.complete(f.job, outcome));
            }
        }
    }

    pub fn next_due(&self) -> Option<u64> {
        self.ws.next_due()
    }

    pub fn is_idle(&self) -> bool {
        self.ws.is_idle()
    }
}
