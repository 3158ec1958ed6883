//! Rebuilding a document from its docPatch events.

use serde::Deserialize;

use super::protocol::{Event, EventKind};
use crate::document::{AssetSource, CanvasDocument, PatchOp};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct PatchPayload {
    ops: Vec<PatchOp>,
}

/// Applies every docPatch in order to an empty document. Rasters come from
/// `assets`, typically the asset store the events were served from.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>, assets: &dyn AssetSource) -> Result<CanvasDocument> {
    let mut doc = CanvasDocument::new();
    for event in events {
        if event.kind != EventKind::DocPatch {
            continue;
        }
        let patch: PatchPayload =
            serde_json::from_value(event.payload.clone()).map_err(|e| Error::Schema(format!("docPatch: {e}")))?;
        doc.apply_patch(&patch.ops, event.doc_revision, assets)?;
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::script::Script;

    #[test]
    fn replay_reconstructs_a_scripted_document() {
        let script = Script::parse(
            r#"{"config": {"image_size": 32}, "steps": [
  {"cmd": "createElement", "args": {"kind": "image", "rect": {"x": 0, "y": 0, "w": 32, "h": 32}, "prompt": "an enchanting illustration of a castle"}},
  {"cmd": "revealFragments", "args": {"id": "e1"}},
  {"cmd": "applyFragmentEdit", "args": {"id": "e1", "edit": {"action": "replace", "fragment": {"ftype": "style", "value": "illustration"}, "replacement": {"ftype": "style", "value": "watercolor"}}}},
  {"cmd": "waitIdle"},
  {"cmd": "deleteElement", "args": {"id": "e1"}},
  {"cmd": "createElement", "args": {"kind": "container", "rect": {"x": 0, "y": 0, "w": 64, "h": 64}, "prompt": "a quiet harbor"}},
  {"cmd": "generateContainer", "args": {"id": "e2"}}
]}"#,
        )
        .unwrap();
        let t = script.run().unwrap();
        let fin = t.document().unwrap();
        let rebuilt = replay(&t.events, &fin).unwrap();
        assert_eq!(rebuilt.serialize(), fin.serialize());
    }
}
