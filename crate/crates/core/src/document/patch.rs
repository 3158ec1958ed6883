use serde::{Deserialize, Serialize};

use super::{CanvasDocument, Element, ElementId, HistoryEntry};
use crate::asset::{AssetId, AssetMeta, ImageAsset, Raster};
use crate::error::{Error, Result};

/// One step of a document diff. Asset operations carry metadata only; the
/// raster is fetched by hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum PatchOp {
    PutAsset { asset: AssetMeta },
    RemoveAsset { id: AssetId },
    PutElement { element: Element },
    RemoveElement { id: ElementId },
    TruncateHistory { len: usize },
    AppendHistory { entry: HistoryEntry },
    SetCounter { id: ElementId, value: u64 },
    ClearCounter { id: ElementId },
    SetNextId { value: u64 },
}

/// Where replay finds raster bytes for assets named in a patch.
pub trait AssetSource {
    fn raster(&self, id: &AssetId) -> Option<Raster>;
}

impl AssetSource for CanvasDocument {
    fn raster(&self, id: &AssetId) -> Option<Raster> {
        self.assets.get(id).map(|a| a.raster.clone())
    }
}

impl<F: Fn(&AssetId) -> Option<Raster>> AssetSource for F {
    fn raster(&self, id: &AssetId) -> Option<Raster> {
        self(id)
    }
}

impl CanvasDocument {
    /// The operations that turn `before` into `self`, assets first so that
    /// every element op refers to stored assets.
    pub fn diff(&self, before: &CanvasDocument) -> Vec<PatchOp> {
        let mut ops = Vec::new();
        for (id, asset) in &self.assets {
            if !before.assets.contains_key(id) {
                ops.push(PatchOp::PutAsset { asset: asset.meta() });
            }
        }
        for (id, el) in &self.elements {
            if before.elements.get(id) != Some(el) {
                ops.push(PatchOp::PutElement { element: el.clone() });
            }
        }
        for id in before.elements.keys() {
            if !self.elements.contains_key(id) {
                ops.push(PatchOp::RemoveElement { id: id.clone() });
            }
        }
        let shared = before.history.iter().zip(&self.history).take_while(|(a, b)| a == b).count();
        if shared < before.history.len() {
            ops.push(PatchOp::TruncateHistory { len: shared });
        }
        for entry in &self.history[shared..] {
            ops.push(PatchOp::AppendHistory { entry: entry.clone() });
        }
        for (id, value) in &self.counters {
            if before.counters.get(id) != Some(value) {
                ops.push(PatchOp::SetCounter { id: id.clone(), value: *value });
            }
        }
        for id in before.counters.keys() {
            if !self.counters.contains_key(id) {
                ops.push(PatchOp::ClearCounter { id: id.clone() });
            }
        }
        for id in before.assets.keys() {
            if !self.assets.contains_key(id) {
                ops.push(PatchOp::RemoveAsset { id: id.clone() });
            }
        }
        if self.next_id != before.next_id {
            ops.push(PatchOp::SetNextId { value: self.next_id });
        }
        ops
    }

    /// Applies patch operations and sets the revision they were published at.
    pub fn apply_patch(&mut self, ops: &[PatchOp], revision: u64, source: &dyn AssetSource) -> Result<()> {
        for op in ops {
            match op {
                PatchOp::PutAsset { asset } => {
                    if !self.assets.contains_key(&asset.id) {
                        let raster = source.raster(&asset.id).ok_or_else(|| Error::UnknownAsset(asset.id.to_string()))?;
                        let asset = ImageAsset::from_meta(asset.clone(), raster)?;
                        self.assets.insert(asset.id.clone(), asset);
                    }
                }
                PatchOp::PutElement { element } => {
                    self.elements.insert(element.id.clone(), element.clone());
                }
                PatchOp::RemoveElement { id } => {
                    self.elements.remove(id);
                }
                PatchOp::RemoveAsset { id } => {
                    self.assets.remove(id);
                }
                PatchOp::TruncateHistory { len } => self.history.truncate(*len),
                PatchOp::AppendHistory { entry } => self.history.push(entry.clone()),
                PatchOp::ClearCounter { id } => {
                    self.counters.remove(id);
                }
                PatchOp::SetCounter { id, value } => {
                    self.counters.insert(id.clone(), *value);
                }
                PatchOp::SetNextId { value } => self.next_id = *value,
            }
        }
        self.reindex();
        self.revision = revision;
        Ok(())
    }

    /// Replaces the whole content with `other`, keeping revisions increasing.
    pub fn replace_with(&mut self, mut other: CanvasDocument) {
        other.revision = other.revision.max(self.revision) + 1;
        *self = other;
    }
}
