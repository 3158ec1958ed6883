//! On-disk form: a JSON file without pixels next to a directory of PNG
//! files named by content hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{canonical_json, parse_versioned, CanvasDocument, Element, ElementId, HistoryEntry};
use crate::asset::{decode_png, AssetId, AssetMeta, ImageAsset};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct StoredDocument {
    version: u32,
    revision: u64,
    next_id: u64,
    elements: BTreeMap<ElementId, Element>,
    z_order: Vec<ElementId>,
    assets: BTreeMap<AssetId, AssetMeta>,
    history: Vec<HistoryEntry>,
    counters: BTreeMap<ElementId, u64>,
}

/// `doc.json` keeps its rasters in `doc.assets/`.
pub fn asset_dir_for(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "document".into());
    path.with_file_name(format!("{stem}.assets"))
}

fn stored(doc: &CanvasDocument) -> StoredDocument {
    StoredDocument {
        version: doc.version,
        revision: doc.revision,
        next_id: doc.next_id,
        elements: doc.elements.clone(),
        z_order: doc.z_order.clone(),
        assets: doc.assets.iter().map(|(id, a)| (id.clone(), a.meta())).collect(),
        history: doc.history.clone(),
        counters: doc.counters.clone(),
    }
}

/// The JSON half of the on-disk form: asset metadata without pixels.
pub fn manifest_json(doc: &CanvasDocument) -> Vec<u8> {
    canonical_json(&stored(doc))
}

pub fn save_document(doc: &CanvasDocument, path: &Path) -> Result<()> {
    let dir = asset_dir_for(path);
    fs::create_dir_all(&dir)?;
    for asset in doc.assets.values() {
        let file = dir.join(format!("{}.png", asset.id));
        if !file.exists() {
            fs::write(&file, asset.to_png()?)?;
        }
    }
    let mut bytes = manifest_json(doc);
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_document(path: &Path) -> Result<CanvasDocument> {
    let bytes = fs::read(path)?;
    let value = parse_versioned(&bytes)?;
    let stored: StoredDocument = serde_json::from_value(value).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    let dir = asset_dir_for(path);
    let mut assets = BTreeMap::new();
    for (id, meta) in stored.assets {
        let png = fs::read(dir.join(format!("{id}.png")))?;
        let (w, h, raster) = decode_png(&png)?;
        if (w, h) != (meta.width, meta.height) {
            return Err(Error::CorruptPayload(format!("asset {id} file is {w}x{h}")));
        }
        assets.insert(id, ImageAsset::from_meta(meta, Arc::new(raster))?);
    }
    let mut doc = CanvasDocument {
        version: stored.version,
        revision: stored.revision,
        next_id: stored.next_id,
        elements: stored.elements,
        z_order: stored.z_order,
        assets,
        history: stored.history,
        counters: stored.counters,
    };
    doc.reindex();
    doc.check_invariants()?;
    Ok(doc)
}
