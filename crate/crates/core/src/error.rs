use thiserror::Error;

use crate::adapters::AdapterError;
use crate::document::{ElementId, ElementKind};
use crate::fragment::Fragment;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure a command or engine operation can report.
///
/// Each variant maps to a stable kebab-case [`code`](Error::code) that is
/// carried by protocol error events.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rect: {0}")]
    InvalidRect(String),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("unknown element id `{0}`")]
    UnknownId(ElementId),
    #[error("element {id} is a {found}, expected a {expected}")]
    WrongKind {
        id: ElementId,
        expected: ElementKind,
        found: ElementKind,
    },
    #[error("unsupported drop of {source_kind} onto {target_kind}")]
    UnsupportedPair {
        source_kind: ElementKind,
        target_kind: ElementKind,
    },
    #[error("dangling asset reference: {0}")]
    DanglingAsset(String),
    #[error("document version {found} is not supported (expected {expected}); {hint}")]
    VersionMismatch {
        found: u32,
        expected: u32,
        hint: String,
    },
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("all known fragment types are already present")]
    NoMoreTypes,
    #[error("fragment {0} is not part of the prompt")]
    RemoveOfAbsentFragment(Fragment),
    #[error("replace edit changes type from `{from}` to `{to}`")]
    ReplaceTypeMismatch { from: String, to: String },
    #[error("scheduler rejected job: {0}")]
    SchedulerRejected(String),
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("lens {0} covers no content and has no prompt")]
    BlankLensNoPrompt(ElementId),
    #[error("grounding source cannot be resolved: {0}")]
    UnresolvableSource(String),
    #[error("container {0} has neither a prompt nor a grounding")]
    EmptyContainer(ElementId),
    #[error("container cell {0} is empty")]
    EmptyCell(usize),
    #[error("index {0} is out of range")]
    BadIndex(usize),
    #[error("brush {0} has no prompt")]
    UnfilledBrush(ElementId),
    #[error("stroke selects no object")]
    SegmentationEmpty,
    #[error("target {0} is not an image with content")]
    UnknownTarget(ElementId),
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("asset carries no {0} attributes")]
    ExtractionEmpty(&'static str),
    #[error("stroke has zero length")]
    DegenerateStroke,
    #[error("{0} elements cannot be stored in a palette")]
    UnsupportedKind(ElementKind),
    #[error("mask does not match the reference asset")]
    MaskMismatch,
    #[error("adapter failure: {0}")]
    Adapter(#[from] AdapterError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("script step {step} failed: {source}")]
    Script {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("script parse error: {0}")]
    ScriptParse(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidRect(_) => "invalid-rect",
            Error::MalformedPayload(_) => "malformed-payload",
            Error::UnknownId(_) => "unknown-id",
            Error::WrongKind { .. } => "wrong-kind",
            Error::UnsupportedPair { .. } => "unsupported-pair",
            Error::DanglingAsset(_) => "dangling-asset",
            Error::VersionMismatch { .. } => "version-mismatch",
            Error::CorruptPayload(_) => "corrupt-payload",
            Error::EmptyPrompt => "empty-prompt",
            Error::NoMoreTypes => "no-more-types",
            Error::RemoveOfAbsentFragment(_) => "remove-of-absent-fragment",
            Error::ReplaceTypeMismatch { .. } => "replace-type-mismatch",
            Error::SchedulerRejected(_) => "scheduler-rejected",
            Error::InvalidRequest(_) => "invalid-request",
            Error::BlankLensNoPrompt(_) => "blank-lens-no-prompt",
            Error::UnresolvableSource(_) => "unresolvable-source",
            Error::EmptyContainer(_) => "empty-container",
            Error::EmptyCell(_) => "empty-cell",
            Error::BadIndex(_) => "bad-index",
            Error::UnfilledBrush(_) => "unfilled-brush",
            Error::SegmentationEmpty => "segmentation-empty",
            Error::UnknownTarget(_) => "unknown-target",
            Error::UnknownAsset(_) => "unknown-asset",
            Error::ExtractionEmpty(_) => "extraction-empty",
            Error::DegenerateStroke => "degenerate-stroke",
            Error::UnsupportedKind(_) => "unsupported-kind",
            Error::MaskMismatch => "mask-mismatch",
            Error::Adapter(_) => "adapter-failure",
            Error::Io(_) => "io-error",
            Error::Schema(_) => "schema-error",
            Error::UnknownCommand(_) => "unknown-command",
            Error::Script { source, .. } => source.code(),
            Error::ScriptParse(_) => "script-parse-error",
            Error::Config(_) => "config-error",
        }
    }

    /// Maps adapter errors that have a dedicated domain meaning onto it.
    pub(crate) fn from_adapter(err: AdapterError) -> Self {
        match err {
            AdapterError::SegmentationEmpty => Error::SegmentationEmpty,
            AdapterError::MaskMismatch => Error::MaskMismatch,
            other => Error::Adapter(other),
        }
    }
}
