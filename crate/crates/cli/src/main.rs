use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use canvas_instruments::document::{load_document, manifest_json};
use canvas_instruments::session::script::run_script;
use canvas_instruments::{CanvasDocument, Config, Payload};
use clap::{Parser, Subcommand};

mod serve;

#[derive(Parser)]
#[command(name = "instruments", version, about = "Prompt-bearing canvas instruments")]
struct Cli {
    /// TOML config; INSTRUMENTS_* environment variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Host a session over websocket and HTTP, or over stdin/stdout.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        /// Document to open; relative save/load paths resolve next to it.
        #[arg(long)]
        doc: Option<PathBuf>,
        /// Speak the protocol on stdin/stdout instead of the network.
        #[arg(long)]
        stdio: bool,
        /// Clients must present this as a bearer token or `token` query.
        #[arg(long, env = "INSTRUMENTS_SESSION_TOKEN")]
        token: Option<String>,
    },
    /// Run a script headless and print its transcript.
    Run {
        script: PathBuf,
        /// Print one event per line, then the document, instead of one JSON object.
        #[arg(long)]
        jsonl: bool,
    },
    /// Summarize a saved document.
    Dump {
        doc: PathBuf,
        /// Print the document JSON, without pixels, instead.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Verb::Serve { addr, doc, stdio, token } => {
            let config = Config::load(cli.config.as_deref())?;
            let live = serve::open(config, doc.as_deref())?;
            if stdio {
                return serve::stdio(live);
            }
            let runtime = tokio::runtime::Runtime::new()?;
            let served = runtime.block_on(serve::network(&live, serve::Options { addr, token }));
            drop(runtime);
            drop(live);
            served
        }
        Verb::Run { script, jsonl } => {
            let transcript = run_script(&script).with_context(|| format!("running {}", script.display()))?;
            let mut out = std::io::stdout().lock();
            if jsonl {
                for event in &transcript.events {
                    writeln!(out, "{}", event.to_line())?;
                }
                writeln!(out, "{}", serde_json::to_string(&transcript.document)?)?;
            } else {
                out.write_all(&transcript.to_bytes())?;
                writeln!(out)?;
            }
            Ok(())
        }
        Verb::Dump { doc, json } => {
            let document = load_document(&doc).with_context(|| format!("loading {}", doc.display()))?;
            let mut out = std::io::stdout().lock();
            if json {
                out.write_all(&manifest_json(&document))?;
                writeln!(out)?;
            } else {
                write!(out, "{}", summary(&document))?;
            }
            Ok(())
        }
    }
}

fn summary(doc: &CanvasDocument) -> String {
    let mut s = format!(
        "revision {}  elements {}  assets {}  history {}\n",
        doc.revision,
        doc.len(),
        doc.assets().count(),
        doc.history().len()
    );
    for el in doc.elements_by_z() {
        let r = el.rect;
        let detail = match &el.payload {
            Payload::Image(b) => format!(
                "\"{}\" seed {} asset {}",
                b.prompt,
                b.seed,
                b.asset.as_ref().map(|a| &a.as_str()[..12]).unwrap_or("-")
            ),
            Payload::FragmentCard(f) => format!("[{}, {}]", f.ftype.as_str(), f.value),
            Payload::Lens(l) => format!("\"{}\"{}", l.prompt, if l.last_result.is_some() { " rendered" } else { "" }),
            Payload::Container(c) => {
                let filled = c.cells.iter().filter(|c| !matches!(c, canvas_instruments::Cell::Empty)).count();
                format!("\"{}\" {filled}/4 cells", c.prompt)
            }
            Payload::Brush(b) => format!("\"{}\" {:?}", b.prompt, b.mode),
            Payload::Palette(p) => format!("\"{}\" {} items", p.title, p.items.len()),
        };
        s += &format!(
            "{:>5} z{:<3} {:<13} {:>8.1} {:>8.1} {:>7.1}x{:<7.1} {}\n",
            el.id.as_str(),
            el.z,
            el.kind().to_string(),
            r.x,
            r.y,
            r.w,
            r.h,
            detail
        );
    }
    s
}
