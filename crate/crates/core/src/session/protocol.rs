//! Wire types: one JSON object per line in each direction.
//!
//! ```json
//! {"cmd": "createElement", "request_id": "r1", "args": {"kind": "lens", "rect": {"x": 0, "y": 0, "w": 100, "h": 100}, "prompt": "forest backdrop"}}
//! {"kind": "docPatch", "doc_revision": 3, "request_id": "r1", "payload": {"ops": [...], "result": {"id": "e2"}}}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asset::AssetId;
use crate::brush::{BrushMode, Stroke};
use crate::container::Grounding;
use crate::document::{ElementId, ElementKind};
use crate::error::{Error, Result};
use crate::fragment::{Fragment, FragmentEdit};
use crate::geometry::Rect;
use crate::palette::PaletteKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub cmd: String,
    #[serde(default, alias = "requestId", skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub args: Value,
}

impl Command {
    pub fn new(cmd: &str, args: Value) -> Self {
        Command { cmd: cmd.to_string(), request_id: None, args }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.request_id = Some(id.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    DocPatch,
    GenerationStarted,
    GenerationCompleted,
    GenerationDiscarded,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub doc_revision: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub payload: Value,
}

impl Event {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Names accepted in `cmd`.
pub const COMMANDS: &[&str] = &[
    "createElement",
    "updateGeometry",
    "setPrompt",
    "deleteElement",
    "dropOn",
    "revealFragments",
    "varyFragment",
    "extendFragmentTypes",
    "applyFragmentEdit",
    "groundContainer",
    "generateContainer",
    "adoptCell",
    "fillBrushFromText",
    "fillBrushFromExample",
    "applyBrushStroke",
    "combineBrushes",
    "addToPalette",
    "takeFromPalette",
    "generatePalette",
    "setLensFaded",
    "snapshotElement",
    "restoreHistory",
    "saveDocument",
    "loadDocument",
    "waitIdle",
    "advance",
];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectArg {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl RectArg {
    pub fn rect(self) -> Result<Rect> {
        Rect::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CreateElement {
    pub kind: ElementKind,
    pub rect: RectArg,
    #[serde(default)]
    pub prompt: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub asset: Option<AssetId>,
    #[serde(default)]
    pub fragment: Option<Fragment>,
    #[serde(default)]
    pub mode: Option<BrushMode>,
    #[serde(default)]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub id: ElementId,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub id: ElementId,
    pub rect: RectArg,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptArgs {
    pub id: ElementId,
    pub prompt: String,
    #[serde(default)]
    pub mode: Option<BrushMode>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair {
    pub source: ElementId,
    pub target: ElementId,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaryArgs {
    /// Image whose row receives the variations; without it the call only
    /// returns them.
    #[serde(default)]
    pub id: Option<ElementId>,
    pub fragment: Fragment,
    pub k: usize,
    #[serde(default)]
    pub context: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditArgs {
    pub id: ElementId,
    pub edit: FragmentEdit,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundArgs {
    pub id: ElementId,
    pub grounding: Grounding,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellArgs {
    pub id: ElementId,
    pub index: usize,
    pub rect: RectArg,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleArgs {
    pub id: ElementId,
    /// Asset to pick from; alternatively `source`, an image element.
    #[serde(default)]
    pub asset: Option<AssetId>,
    #[serde(default)]
    pub source: Option<ElementId>,
    #[serde(default)]
    pub region: Option<RectArg>,
    #[serde(default)]
    pub mode: Option<BrushMode>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeArgs {
    pub brush: ElementId,
    pub target: ElementId,
    pub stroke: Stroke,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaletteAdd {
    pub palette: ElementId,
    pub element: ElementId,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaletteTake {
    pub palette: ElementId,
    pub index: usize,
    pub rect: RectArg,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaletteGenerate {
    pub prompt: String,
    pub kind: PaletteKind,
    pub k: usize,
    pub rect: RectArg,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadeArgs {
    pub id: ElementId,
    pub faded: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestoreArgs {
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathArgs {
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvanceArgs {
    pub ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoArgs {}

/// A schema-checked command.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "cmd", content = "args", rename_all = "camelCase")]
pub enum Request {
    CreateElement(CreateElement),
    UpdateGeometry(Geometry),
    SetPrompt(PromptArgs),
    DeleteElement(Target),
    DropOn(Pair),
    RevealFragments(Target),
    VaryFragment(VaryArgs),
    ExtendFragmentTypes(Target),
    ApplyFragmentEdit(EditArgs),
    GroundContainer(GroundArgs),
    GenerateContainer(Target),
    AdoptCell(CellArgs),
    FillBrushFromText(PromptArgs),
    FillBrushFromExample(ExampleArgs),
    ApplyBrushStroke(StrokeArgs),
    CombineBrushes(Pair),
    AddToPalette(PaletteAdd),
    TakeFromPalette(PaletteTake),
    GeneratePalette(PaletteGenerate),
    SetLensFaded(FadeArgs),
    SnapshotElement(Target),
    RestoreHistory(RestoreArgs),
    SaveDocument(PathArgs),
    LoadDocument(PathArgs),
    WaitIdle(NoArgs),
    Advance(AdvanceArgs),
}

impl Request {
    pub fn parse(command: &Command) -> Result<Request> {
        if !COMMANDS.contains(&command.cmd.as_str()) {
            return Err(Error::UnknownCommand(command.cmd.clone()));
        }
        let args = match &command.args {
            Value::Null => Value::Object(Default::default()),
            other => other.clone(),
        };
        let tagged = serde_json::json!({ "cmd": command.cmd, "args": args });
        serde_json::from_value(tagged).map_err(|e| Error::Schema(format!("{}: {e}", command.cmd)))
    }

    /// Parses one protocol line.
    pub fn parse_line(line: &str) -> Result<Command> {
        serde_json::from_str(line).map_err(|e| Error::Schema(e.to_string()))
    }
}
