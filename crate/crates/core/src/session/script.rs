//! Headless scripts: commands run against mock adapters on a virtual clock.
//!
//! A script is a JSON array of commands, an object `{"config": .., "steps": [..]}`,
//! or one command per line. Two extra commands control time: `waitIdle`
//! advances the clock until no job is pending, `advance {"ms": n}` moves it
//! by `n` milliseconds. After every step the jobs due at the current time
//! run to completion.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::protocol::{Command, Event, Request};
use super::Session;
use crate::clock::VirtualClock;
use crate::config::Config;
use crate::document::{canonical_json, CanvasDocument};
use crate::error::{Error, Result};
use crate::workspace::Workspace;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub config: Option<Config>,
    #[serde(default)]
    pub steps: Vec<Command>,
}

/// Every emitted event followed by the final document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub document: Value,
}

impl Transcript {
    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_json(self)
    }

    pub fn document(&self) -> Result<CanvasDocument> {
        CanvasDocument::deserialize(&canonical_json(&self.document))
    }
}

impl Script {
    pub fn parse(text: &str) -> Result<Script> {
        let trimmed = text.trim_start();
        if trimmed.is_empty() {
            return Ok(Script::default());
        }
        let parse_err = |e: serde_json::Error| Error::ScriptParse(e.to_string());
        if trimmed.starts_with('[') {
            return Ok(Script { config: None, steps: serde_json::from_str(trimmed).map_err(parse_err)? });
        }
        if let Ok(script) = serde_json::from_str::<Script>(trimmed) {
            if trimmed.contains("\"steps\"") || trimmed.contains("\"config\"") {
                return Ok(script);
            }
        }
        let mut steps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let cmd = serde_json::from_str(line).map_err(|e| Error::ScriptParse(format!("line {}: {e}", i + 1)))?;
            steps.push(cmd);
        }
        Ok(Script { config: None, steps })
    }

    pub fn load(path: &Path) -> Result<Script> {
        Script::parse(&std::fs::read_to_string(path)?)
    }

    /// Runs the steps with mock adapters. Relative document paths resolve
    /// against `base_dir`.
    pub fn run_in(&self, base_dir: Option<PathBuf>) -> Result<Transcript> {
        let mut config = self.config.clone().unwrap_or_default();
        config.adapter = crate::config::AdapterKind::Mock;
        config.validate()?;
        let clock = VirtualClock::new();
        let ws = Workspace::with_mock(config, Arc::new(clock.clone()));
        let mut session = Session::new(ws).recording();
        if let Some(dir) = base_dir {
            session = session.with_base_dir(dir);
        }
        for (step, cmd) in self.steps.iter().enumerate() {
            let fail = |source: Error| Error::Script { step, source: Box::new(source) };
            match Request::parse(cmd) {
                Ok(Request::WaitIdle(_)) => settle(&mut session, &clock),
                Ok(Request::Advance(a)) => {
                    let target = clock.advance(a.ms);
                    while let Some(due) = session.next_due().filter(|&d| d <= target) {
                        clock.advance_to(due);
                        session.run_due_inline();
                    }
                }
                _ => {
                    session.try_handle(cmd.clone()).map_err(|(_, e)| fail(e))?;
                    session.run_due_inline();
                }
            }
        }
        let document = serde_json::from_slice(&session.document().serialize()).expect("document is json");
        Ok(Transcript { events: session.take_log(), document })
    }

    pub fn run(&self) -> Result<Transcript> {
        self.run_in(None)
    }
}

/// Advances virtual time until no job is pending.
pub fn settle(session: &mut Session, clock: &VirtualClock) {
    session.run_due_inline();
    while let Some(due) = session.next_due() {
        clock.advance_to(due);
        session.run_due_inline();
    }
}

/// Loads and runs a script file.
pub fn run_script(path: &Path) -> Result<Transcript> {
    let script = Script::load(path)?;
    script.run_in(path.parent().map(Path::to_path_buf))
}
