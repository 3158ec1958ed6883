//! The canvas document: elements, z-order, the content-addressed asset store,
//! per-element history and generation counters.
//!
//! Mutations go through the methods here so that the revision, the z-order
//! index and the invariants stay consistent. Changes are published as
//! [`PatchOp`] lists computed by [`CanvasDocument::diff`].

mod file;
mod patch;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::asset::{AssetId, ImageAsset};
use crate::brush::BrushState;
use crate::container::ContainerState;
use crate::error::{Error, Result};
use crate::fragment::{Fragment, FragmentRow};
use crate::geometry::Rect;
use crate::lens::LensState;
use crate::palette::PaletteState;

pub use file::{asset_dir_for, load_document, manifest_json, save_document};
pub use patch::{AssetSource, PatchOp};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        ElementId(s.to_string())
    }
}

impl From<String> for ElementId {
    fn from(s: String) -> Self {
        ElementId(s)
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Image,
    FragmentCard,
    Lens,
    Container,
    Brush,
    Palette,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Image => "image",
            ElementKind::FragmentCard => "fragment-card",
            ElementKind::Lens => "lens",
            ElementKind::Container => "container",
            ElementKind::Brush => "brush",
            ElementKind::Palette => "palette",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageBody {
    #[serde(default)]
    pub asset: Option<AssetId>,
    #[serde(default)]
    pub prompt: String,
    pub seed: u64,
    #[serde(default)]
    pub row: Option<FragmentRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Payload {
    Image(ImageBody),
    FragmentCard(Fragment),
    Lens(LensState),
    Container(ContainerState),
    Brush(BrushState),
    Palette(PaletteState),
}

impl Payload {
    pub fn kind(&self) -> ElementKind {
        match self {
            Payload::Image(_) => ElementKind::Image,
            Payload::FragmentCard(_) => ElementKind::FragmentCard,
            Payload::Lens(_) => ElementKind::Lens,
            Payload::Container(_) => ElementKind::Container,
            Payload::Brush(_) => ElementKind::Brush,
            Payload::Palette(_) => ElementKind::Palette,
        }
    }

    /// Every asset id the payload refers to.
    pub fn asset_refs(&self) -> Vec<&AssetId> {
        match self {
            Payload::Image(b) => b.asset.iter().collect(),
            Payload::Lens(l) => l.last_result.iter().collect(),
            Payload::Container(c) => c.asset_refs(),
            Payload::Palette(p) => p.items.iter().flat_map(|i| i.payload.asset_refs()).collect(),
            Payload::FragmentCard(_) | Payload::Brush(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: ElementId,
    pub rect: Rect,
    pub z: i64,
    pub payload: Payload,
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        self.payload.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub element_id: ElementId,
    /// The element's payload before the recorded change.
    pub prior: Payload,
    pub cause: String,
    pub timestamp: u64,
}

impl HistoryEntry {
    /// The primary asset of the recorded payload, if it has one.
    pub fn prior_asset(&self) -> Option<&AssetId> {
        match &self.prior {
            Payload::Image(b) => b.asset.as_ref(),
            Payload::Lens(l) => l.last_result.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasDocument {
    pub version: u32,
    pub revision: u64,
    pub next_id: u64,
    elements: BTreeMap<ElementId, Element>,
    z_order: Vec<ElementId>,
    assets: BTreeMap<AssetId, ImageAsset>,
    history: Vec<HistoryEntry>,
    counters: BTreeMap<ElementId, u64>,
}

impl Default for CanvasDocument {
    fn default() -> Self {
        CanvasDocument {
            version: FORMAT_VERSION,
            revision: 0,
            next_id: 1,
            elements: BTreeMap::new(),
            z_order: Vec::new(),
            assets: BTreeMap::new(),
            history: Vec::new(),
            counters: BTreeMap::new(),
        }
    }
}

impl CanvasDocument {
    pub fn new() -> Self {
        Self::default()
    }

    fn touch(&mut self) {
        self.revision += 1;
    }

    fn reindex(&mut self) {
        let mut ids: Vec<(i64, ElementId)> = self.elements.values().map(|e| (e.z, e.id.clone())).collect();
        ids.sort();
        self.z_order = ids.into_iter().map(|(_, id)| id).collect();
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn z_order(&self) -> &[ElementId] {
        &self.z_order
    }

    /// Elements bottom to top.
    pub fn elements_by_z(&self) -> impl Iterator<Item = &Element> {
        self.z_order.iter().map(|id| &self.elements[id])
    }

    pub fn get(&self, id: &ElementId) -> Option<&Element> {
        self.elements.get(id)
    }

    pub fn element(&self, id: &ElementId) -> Result<&Element> {
        self.elements.get(id).ok_or_else(|| Error::UnknownId(id.clone()))
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        self.elements.contains_key(id)
    }

    pub fn top_z(&self) -> i64 {
        self.z_order.last().map(|id| self.elements[id].z).unwrap_or(0)
    }

    pub fn assets(&self) -> impl Iterator<Item = &ImageAsset> {
        self.assets.values()
    }

    pub fn asset(&self, id: &AssetId) -> Result<&ImageAsset> {
        self.assets.get(id).ok_or_else(|| Error::UnknownAsset(id.to_string()))
    }

    pub fn has_asset(&self, id: &AssetId) -> bool {
        self.assets.contains_key(id)
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn history_entry(&self, seq: u64) -> Option<&HistoryEntry> {
        self.history.iter().find(|h| h.seq == seq)
    }

    pub fn counters(&self) -> &BTreeMap<ElementId, u64> {
        &self.counters
    }

    pub fn counter(&self, id: &ElementId) -> u64 {
        self.counters.get(id).copied().unwrap_or(0)
    }

    /// Adds an element on top of the z-order and returns its id.
    pub fn create_element(&mut self, rect: Rect, payload: Payload) -> Result<ElementId> {
        Rect::new(rect.x, rect.y, rect.w, rect.h)?;
        for asset in payload.asset_refs() {
            if !self.assets.contains_key(asset) {
                return Err(Error::MalformedPayload(format!("unknown asset {asset}")));
            }
        }
        let id = ElementId(format!("e{}", self.next_id));
        self.next_id += 1;
        let z = self.top_z() + 1;
        self.elements.insert(id.clone(), Element { id: id.clone(), rect, z, payload });
        self.reindex();
        self.touch();
        Ok(id)
    }

    /// Replaces an element's rect, returning whether it changed.
    pub fn set_rect(&mut self, id: &ElementId, rect: Rect) -> Result<bool> {
        Rect::new(rect.x, rect.y, rect.w, rect.h)?;
        let el = self.elements.get_mut(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        if el.rect == rect {
            return Ok(false);
        }
        el.rect = rect;
        self.touch();
        Ok(true)
    }

    /// Moves an element above every other one. Returns false if it already was.
    pub fn bring_to_front(&mut self, id: &ElementId) -> Result<bool> {
        self.element(id)?;
        if self.z_order.last() == Some(id) {
            return Ok(false);
        }
        let z = self.top_z() + 1;
        self.elements.get_mut(id).expect("checked").z = z;
        self.reindex();
        self.touch();
        Ok(true)
    }

    pub fn set_payload(&mut self, id: &ElementId, payload: Payload) -> Result<()> {
        for asset in payload.asset_refs() {
            if !self.assets.contains_key(asset) {
                return Err(Error::DanglingAsset(asset.to_string()));
            }
        }
        let el = self.elements.get_mut(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        if el.payload.kind() != payload.kind() {
            return Err(Error::WrongKind { id: id.clone(), expected: el.payload.kind(), found: payload.kind() });
        }
        if el.payload != payload {
            el.payload = payload;
            self.touch();
        }
        Ok(())
    }

    /// Applies `f` to a clone of the payload and stores the result.
    pub fn update_payload<T>(&mut self, id: &ElementId, f: impl FnOnce(&mut Payload) -> Result<T>) -> Result<T> {
        let mut payload = self.element(id)?.payload.clone();
        let out = f(&mut payload)?;
        self.set_payload(id, payload)?;
        Ok(out)
    }

    pub fn remove_element(&mut self, id: &ElementId) -> Result<Element> {
        let el = self.elements.remove(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        self.reindex();
        self.touch();
        Ok(el)
    }

    /// Stores an asset. The store is content addressed, so re-inserting
    /// identical content keeps the first copy and its provenance.
    pub fn insert_asset(&mut self, asset: ImageAsset) -> AssetId {
        let id = asset.id.clone();
        if !self.assets.contains_key(&id) {
            self.assets.insert(id.clone(), asset);
            self.touch();
        }
        id
    }

    pub fn set_counter(&mut self, id: &ElementId, value: u64) {
        if self.counters.get(id) != Some(&value) {
            self.counters.insert(id.clone(), value);
            self.touch();
        }
    }

    /// Records the element's current payload in the history log.
    pub fn snapshot(&mut self, id: &ElementId, cause: &str, now: u64) -> Result<HistoryEntry> {
        let prior = self.element(id)?.payload.clone();
        let seq = self.history.last().map(|h| h.seq + 1).unwrap_or(1);
        let timestamp = self.history.last().map(|h| h.timestamp.max(now)).unwrap_or(now);
        let entry = HistoryEntry { seq, element_id: id.clone(), prior, cause: cause.to_string(), timestamp };
        self.history.push(entry.clone());
        self.touch();
        Ok(entry)
    }

    /// Puts a recorded payload back. The current payload is logged first, so
    /// a restore can itself be undone.
    pub fn restore(&mut self, entry: &HistoryEntry, now: u64) -> Result<()> {
        let Some(current) = self.elements.get(&entry.element_id) else {
            return Err(Error::DanglingAsset(format!(
                "history entry {} refers to deleted element {}",
                entry.seq, entry.element_id
            )));
        };
        if current.payload == entry.prior {
            return Ok(());
        }
        for asset in entry.prior.asset_refs() {
            if !self.assets.contains_key(asset) {
                return Err(Error::DanglingAsset(asset.to_string()));
            }
        }
        self.snapshot(&entry.element_id, &format!("restore {}", entry.seq), now)?;
        self.set_payload(&entry.element_id, entry.prior.clone())
    }

    /// Checks every structural invariant of the document.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::CorruptPayload(msg));
        if self.version != FORMAT_VERSION {
            return bad(format!("version {}", self.version));
        }
        let mut zs: Vec<(i64, &ElementId)> = self.elements.values().map(|e| (e.z, &e.id)).collect();
        zs.sort();
        if zs.windows(2).any(|w| w[0].0 == w[1].0) {
            return bad("duplicate z values".into());
        }
        if zs.len() != self.z_order.len() || zs.iter().zip(&self.z_order).any(|((_, a), b)| *a != b) {
            return bad("z_order is not the elements sorted by z".into());
        }
        for (id, el) in &self.elements {
            if &el.id != id {
                return bad(format!("element stored under {id} claims id {}", el.id));
            }
            if Rect::new(el.rect.x, el.rect.y, el.rect.w, el.rect.h).is_err() {
                return bad(format!("element {id} has an invalid rect"));
            }
            if let Some(n) = id.as_str().strip_prefix('e').and_then(|n| n.parse::<u64>().ok()) {
                if n >= self.next_id {
                    return bad(format!("element {id} is not below next_id {}", self.next_id));
                }
            }
            if let Payload::Container(c) = &el.payload {
                c.check()?;
            }
        }
        let refs = self
            .elements
            .values()
            .flat_map(|e| e.payload.asset_refs())
            .chain(self.history.iter().flat_map(|h| h.prior.asset_refs()));
        for asset in refs {
            if !self.assets.contains_key(asset) {
                return bad(format!("dangling asset {asset}"));
            }
        }
        for (id, asset) in &self.assets {
            if &asset.id != id {
                return bad(format!("asset stored under {id} claims id {}", asset.id));
            }
            asset.verify()?;
        }
        if self.history.windows(2).any(|w| w[1].seq <= w[0].seq || w[1].timestamp < w[0].timestamp) {
            return bad("history is not append-ordered".into());
        }
        Ok(())
    }

    /// Canonical JSON with embedded base64 rasters: equal documents yield
    /// equal bytes.
    pub fn serialize(&self) -> Vec<u8> {
        canonical_json(self)
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let value = parse_versioned(bytes)?;
        let mut doc: CanvasDocument =
            serde_json::from_value(value).map_err(|e| Error::CorruptPayload(e.to_string()))?;
        doc.reindex();
        doc.check_invariants()?;
        Ok(doc)
    }
}

/// Canonical JSON: keys sorted at every level, compact, shortest
/// round-tripping float formatting.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("document types serialize");
    serde_json::to_vec(&value).expect("json value serializes")
}

fn parse_versioned(bytes: &[u8]) -> Result<serde_json::Value> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    let found = value.get("version").and_then(|v| v.as_u64());
    match found {
        Some(v) if v == FORMAT_VERSION as u64 => Ok(value),
        other => Err(Error::VersionMismatch {
            found: other.unwrap_or(0) as u32,
            expected: FORMAT_VERSION,
            hint: match other {
                Some(v) if v < FORMAT_VERSION as u64 => {
                    "re-save the document with a current build after migrating its elements".into()
                }
                Some(_) => "the document was written by a newer build".into(),
                None => "the file has no version field; it predates the versioned format".into(),
            },
        }),
    }
}
