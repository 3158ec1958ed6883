//! A session on its own thread, with generation running on worker threads.
//!
//! All commands go through one queue, so the document has a single writer
//! and events leave in revision order. Adapter calls run off the queue and
//! come back as completion messages.

use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::protocol::{Command, Event};
use super::Session;
use crate::asset::{AssetId, ImageAsset};
use crate::document::CanvasDocument;
use crate::scheduler::JobId;
use crate::workspace::Outcome;

enum Msg {
    Command(Command),
    Line(String),
    Subscribe(usize, Sender<Receiver<Event>>),
    Asset(AssetId, Sender<Option<ImageAsset>>),
    Document(Sender<CanvasDocument>),
    Idle(Sender<bool>),
    Done(JobId, Outcome),
    Shutdown,
}

/// Cheap to clone; every clone talks to the same session thread.
#[derive(Clone)]
pub struct LiveHandle {
    tx: Sender<Msg>,
}

impl LiveHandle {
    /// Queues a command. Its events arrive on subscriber channels.
    pub fn send(&self, cmd: Command) -> bool {
        self.tx.send(Msg::Command(cmd)).is_ok()
    }

    /// Queues one raw protocol line.
    pub fn send_line(&self, line: impl Into<String>) -> bool {
        self.tx.send(Msg::Line(line.into())).is_ok()
    }

    pub fn subscribe(&self, capacity: usize) -> Option<Receiver<Event>> {
        let (tx, rx) = channel();
        self.tx.send(Msg::Subscribe(capacity, tx)).ok()?;
        rx.recv().ok()
    }

    pub fn asset(&self, id: AssetId) -> Option<ImageAsset> {
        let (tx, rx) = channel();
        self.tx.send(Msg::Asset(id, tx)).ok()?;
        rx.recv().ok().flatten()
    }

    /// True when no job is waiting or running.
    pub fn is_idle(&self) -> bool {
        let (tx, rx) = channel();
        self.tx.send(Msg::Idle(tx)).is_ok() && rx.recv().unwrap_or(true)
    }

    /// The committed document as of now.
    pub fn document(&self) -> Option<CanvasDocument> {
        let (tx, rx) = channel();
        self.tx.send(Msg::Document(tx)).ok()?;
        rx.recv().ok()
    }
}

pub struct LiveSession {
    handle: LiveHandle,
    thread: Option<JoinHandle<Session>>,
}

impl LiveSession {
    pub fn spawn(session: Session) -> Self {
        let (tx, rx) = channel();
        let worker_tx = tx.clone();
        let thread = thread::Builder::new()
            .name("session".into())
            .spawn(move || run(session, rx, worker_tx))
            .expect("spawn session thread");
        LiveSession { handle: LiveHandle { tx }, thread: Some(thread) }
    }

    pub fn handle(&self) -> LiveHandle {
        self.handle.clone()
    }

    /// Stops the session thread and returns the session. Work still in
    /// flight is abandoned.
    pub fn shutdown(mut self) -> Session {
        let _ = self.handle.tx.send(Msg::Shutdown);
        self.thread.take().expect("joined once").join().expect("session thread panicked")
    }
}

impl Drop for LiveSession {
    fn drop(&mut self) {
        if let Some(t) = self.thread.take() {
            let _ = self.handle.tx.send(Msg::Shutdown);
            let _ = t.join();
        }
    }
}

fn run(mut session: Session, rx: Receiver<Msg>, tx: Sender<Msg>) -> Session {
    loop {
        let wait = session.next_due().map(|due| due.saturating_sub(session.workspace().now()));
        let msg = match wait {
            Some(ms) => rx.recv_timeout(Duration::from_millis(ms)),
            None => rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
        };
        match msg {
            Ok(Msg::Command(cmd)) => {
                session.handle(cmd);
            }
            Ok(Msg::Line(line)) => {
                session.handle_line(&line);
            }
            Ok(Msg::Subscribe(capacity, reply)) => {
                let _ = reply.send(session.subscribe(capacity));
            }
            Ok(Msg::Asset(id, reply)) => {
                let _ = reply.send(session.document().asset(&id).ok().cloned());
            }
            Ok(Msg::Document(reply)) => {
                let _ = reply.send(session.document().clone());
            }
            Ok(Msg::Idle(reply)) => {
                let _ = reply.send(session.is_idle());
            }
            Ok(Msg::Done(job, outcome)) => {
                session.complete(job, outcome);
            }
            Ok(Msg::Shutdown) | Err(RecvTimeoutError::Disconnected) => return session,
            Err(RecvTimeoutError::Timeout) => {}
        }
        let (fired, _) = session.fire_due();
        for f in fired {
            let adapters = session.workspace().adapters().clone();
            let tx = tx.clone();
            thread::spawn(move || {
                let outcome = f.work.run(&adapters);
                let _ = tx.send(Msg::Done(f.job, outcome));
            });
        }
    }
}
