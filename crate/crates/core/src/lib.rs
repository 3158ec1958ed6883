//! Headless runtime for prompt-bearing canvas instruments.
//!
//! A [`Workspace`] owns one [`CanvasDocument`] and mutates it through
//! instrument operations: fragment cards that take prompts apart, lenses
//! that re-synthesize what they cover, generative containers, fillable
//! brushes and palettes. Generation goes through the [`Scheduler`] and the
//! model [`adapters`]; the [`session`] module wraps it all in a
//! line-delimited JSON protocol.
//!
//! ```
//! use std::sync::Arc;
//! use canvas_instruments::{Config, ElementInit, Rect, VirtualClock, Workspace};
//!
//! let clock = VirtualClock::new();
//! let config = Config { image_size: 32, ..Config::default() };
//! let mut ws = Workspace::with_mock(config, Arc::new(clock.clone()));
//! let castle = ws
//!     .create_element(
//!         Rect::new(0.0, 0.0, 100.0, 100.0).unwrap(),
//!         ElementInit::Image { prompt: "an enchanting illustration of a castle".into(), seed: Some(1), asset: None },
//!     )
//!     .unwrap();
//! ws.run_due_inline();
//! let row = ws.reveal_fragments(&castle).unwrap();
//! assert_eq!(row.fragments.len(), 3);
//! ```

pub mod adapters;
pub mod asset;
pub mod brush;
pub mod clock;
pub mod config;
pub mod container;
pub mod document;
pub mod error;
pub mod fragment;
mod fragments;
pub mod geometry;
pub mod lens;
pub mod lexicon;
pub mod palette;
pub mod request;
pub mod scheduler;
pub mod session;
pub mod workspace;

pub use adapters::{AdapterError, Adapters, ImageAdapter, LanguageAdapter};
pub use asset::{AssetId, ImageAsset, Provenance, SceneObject, SceneSpec};
pub use brush::{BrushMode, BrushState, Stroke};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use config::{AdapterKind, Config};
pub use container::{Cell, CellKind, ContainerState, Grounding};
pub use document::{CanvasDocument, Element, ElementId, ElementKind, HistoryEntry, ImageBody, Payload, PatchOp};
pub use error::{Error, Result};
pub use fragment::{Fragment, FragmentEdit, FragmentRow, FragmentType};
pub use geometry::{Mask, Rect};
pub use lens::{LensComposition, LensState};
pub use palette::{PaletteItem, PaletteKind, PaletteState};
pub use request::{GenerationControls, GenerationRequest, OpKind};
pub use scheduler::{DebounceClass, JobId, Scheduler, SchedulerConfig};
pub use session::{Command, Event, EventKind, Script, Session, Transcript};
pub use workspace::{DropEffect, ElementInit, Outcome, Report, ReportStatus, Workspace};
