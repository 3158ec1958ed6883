//! Palettes: stored and generated sets of instruments.

use serde::{Deserialize, Serialize};

use crate::brush::{BrushMode, BrushState};
use crate::document::{ElementId, ElementKind, ImageBody, Payload};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::workspace::{ElementInit, Workspace};

pub const MAX_GENERATED: usize = 8;

/// A frozen copy of an element together with its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteItem {
    pub payload: Payload,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PaletteState {
    pub title: String,
    #[serde(default)]
    pub items: Vec<PaletteItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_from: Option<String>,
}

impl PaletteState {
    pub fn new(title: &str) -> Self {
        PaletteState { title: title.trim().to_string(), items: Vec::new(), generated_from: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaletteKind {
    Fragments,
    Brushes,
}

impl Workspace {
    /// Appends a snapshot of `element`; returns its index.
    pub fn add_to_palette(&mut self, palette: &ElementId, element: &ElementId) -> Result<usize> {
        self.palette(palette)?;
        let el = self.doc().element(element)?.clone();
        let payload = match el.payload {
            Payload::Container(_) | Payload::Palette(_) => return Err(Error::UnsupportedKind(el.kind())),
            Payload::Lens(mut l) => {
                l.pending_job = None;
                l.faded = false;
                Payload::Lens(l)
            }
            Payload::Image(b) => Payload::Image(ImageBody { row: None, ..b }),
            other => other,
        };
        let item = PaletteItem { payload, w: el.rect.w, h: el.rect.h };
        self.doc_mut().update_payload(palette, |p| {
            let Payload::Palette(state) = p else { unreachable!("checked above") };
            state.items.push(item);
            Ok(state.items.len() - 1)
        })
    }

    /// Instantiates a stored item as a new live element at `rect`.
    pub fn take_from_palette(&mut self, palette: &ElementId, index: usize, rect: Rect) -> Result<ElementId> {
        let item = self.palette(palette)?.items.get(index).cloned().ok_or(Error::BadIndex(index))?;
        let init = match item.payload {
            Payload::FragmentCard(f) => ElementInit::FragmentCard(f),
            Payload::Brush(b) => ElementInit::Brush { prompt: b.prompt, mode: b.mode },
            Payload::Lens(l) => ElementInit::Lens { prompt: l.prompt },
            Payload::Image(b) => {
                let id = self.create_element(rect, ElementInit::Image { prompt: String::new(), seed: Some(b.seed), asset: b.asset.clone() })?;
                let prompt = b.prompt;
                self.doc_mut().update_payload(&id, |p| {
                    if let Payload::Image(body) = p {
                        body.prompt = prompt;
                    }
                    Ok(())
                })?;
                return Ok(id);
            }
            other => return Err(Error::UnsupportedKind(other.kind())),
        };
        self.create_element(rect, init)
    }

    /// A new palette of `k` instruments generated for the task in `prompt`.
    pub fn generate_palette(&mut self, prompt: &str, kind: PaletteKind, k: usize, rect: Rect) -> Result<ElementId> {
        let prompt = prompt.trim();
        if prompt.is_empty() {
            return Err(Error::EmptyPrompt);
        }
        if k > MAX_GENERATED {
            return Err(Error::MalformedPayload(format!("at most {MAX_GENERATED} generated items, {k} requested")));
        }
        let fragments = if k == 0 {
            Vec::new()
        } else {
            self.adapters().language.generate_set(prompt, k).map_err(Error::from_adapter)?
        };
        let items = fragments
            .into_iter()
            .map(|f| {
                let payload = match kind {
                    PaletteKind::Fragments => Payload::FragmentCard(f),
                    PaletteKind::Brushes => {
                        let mode = if f.ftype.as_str() == "content" { BrushMode::Content } else { BrushMode::Style };
                        Payload::Brush(BrushState::new(&f.value, mode))
                    }
                };
                let (w, h) = match payload.kind() {
                    ElementKind::Brush => (48.0, 48.0),
                    _ => (120.0, 32.0),
                };
                PaletteItem { payload, w, h }
            })
            .collect();
        let state = PaletteState { title: prompt.to_string(), items, generated_from: Some(prompt.to_string()) };
        let id = self.create_element(rect, ElementInit::Palette { title: prompt.to_string() })?;
        self.doc_mut().set_payload(&id, Payload::Palette(state))?;
        Ok(id)
    }
}
