use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use canvas_instruments::session::live::{LiveHandle, LiveSession};
use canvas_instruments::{AssetId, Command, Config, Session, SystemClock, Workspace};
use serde_json::json;

pub struct Options {
    pub addr: String,
    pub token: Option<String>,
}

const SUBSCRIBER_BUFFER: usize = 4096;

/// Builds the session outside any async runtime: remote adapters hold a
/// blocking HTTP client.
pub fn open(config: Config, doc: Option<&std::path::Path>) -> anyhow::Result<LiveSession> {
    let ws = Workspace::from_config(config, Arc::new(SystemClock::default()))?;
    let mut session = Session::new(ws);
    if let Some(path) = doc {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
        session = session.with_base_dir(dir);
        if path.exists() {
            let cmd = Command::new("loadDocument", json!({ "path": path }));
            session.try_handle(cmd).map_err(|(_, e)| e).with_context(|| format!("opening {}", path.display()))?;
        }
    }
    Ok(LiveSession::spawn(session))
}

/// Commands from stdin, events to stdout. At end of input, waits for
/// running jobs before exiting.
pub fn stdio(live: LiveSession) -> anyhow::Result<()> {
    let handle = live.handle();
    let events = handle.subscribe(SUBSCRIBER_BUFFER).context("session stopped")?;
    let printer = std::thread::spawn(move || {
        let mut out = std::io::stdout().lock();
        for event in events {
            if writeln!(out, "{}", event.to_line()).and_then(|_| out.flush()).is_err() {
                break;
            }
        }
    });
    for line in std::io::stdin().lock().lines() {
        let line = line?;
        if !line.trim().is_empty() {
            handle.send_line(line);
        }
    }
    while !handle.is_idle() {
        std::thread::sleep(Duration::from_millis(20));
    }
    // dropping the session closes the event channel and ends the printer
    drop(live.shutdown());
    let _ = printer.join();
    Ok(())
}

#[derive(Clone)]
struct App {
    handle: LiveHandle,
    token: Option<String>,
}

impl App {
    fn authorized(&self, headers: &HeaderMap, query: &HashMap<String, String>) -> bool {
        let Some(token) = &self.token else { return true };
        let bearer = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        bearer == Some(token.as_str()) || query.get("token") == Some(token)
    }
}

pub fn router(handle: LiveHandle, token: Option<String>) -> Router {
    Router::new()
        .route("/session", get(session_socket))
        .route("/assets/{hash}", get(asset))
        .with_state(App { handle, token })
}

pub async fn network(live: &LiveSession, opts: Options) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(&opts.addr).await.with_context(|| format!("binding {}", opts.addr))?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    axum::serve(listener, router(live.handle(), opts.token))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn session_socket(
    State(app): State<App>,
    headers: HeaderMap,
    Query(query): Query<HashMap<String, String>>,
    upgrade: WebSocketUpgrade,
) -> Response {
    if !app.authorized(&headers, &query) {
        return StatusCode::UNAUTHORIZED.into_response();
    }
    upgrade.on_upgrade(move |socket| client(socket, app.handle))
}

async fn client(mut socket: WebSocket, handle: LiveHandle) {
    let subscribe = handle.clone();
    let Ok(Some(events)) = tokio::task::spawn_blocking(move || subscribe.subscribe(SUBSCRIBER_BUFFER)).await else {
        return;
    };
    let (tx, mut rx) = tokio::sync::mpsc::channel(64);
    std::thread::spawn(move || {
        for event in events {
            if tx.blocking_send(event).is_err() {
                break;
            }
        }
    });
    loop {
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => {
                    for line in text.as_str().lines().filter(|l| !l.trim().is_empty()) {
                        handle.send_line(line);
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            event = rx.recv() => match event {
                Some(event) => {
                    if socket.send(Message::Text(event.to_line().into())).await.is_err() {
                        break;
                    }
                }
                None => {
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
            },
        }
    }
}

async fn asset(
    State(app): State<App>,
    Path(hash): Path<String>,
    headers: HeaderMap,
    Query(query): Query<HashMap<String, String>>,
) -> Response {
    if !app.authorized(&headers, &query) {
        return StatusCode::UNAUTHORIZED.into_response();
    }
    let hash = hash.strip_suffix(".png").unwrap_or(&hash).to_string();
    let Ok(id) = AssetId::parse(&hash) else {
        return (StatusCode::BAD_REQUEST, "not an asset hash").into_response();
    };
    let handle = app.handle.clone();
    let found = tokio::task::spawn_blocking(move || handle.asset(id).map(|a| a.to_png())).await;
    match found {
        Ok(Some(Ok(png))) => (
            [
                (header::CONTENT_TYPE, "image/png".to_string()),
                (header::CACHE_CONTROL, "public, max-age=31536000, immutable".to_string()),
                (header::ETAG, format!("\"{hash}\"")),
            ],
            png,
        )
            .into_response(),
        Ok(None) => StatusCode::NOT_FOUND.into_response(),
        _ => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}
