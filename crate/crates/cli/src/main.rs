//! `imgjournal`: replay, verify and inspect image edit journals.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success, PASS, identical |
//! | 1 | `diff` found differences, or `verify` FAIL with a reproducible journal |
//! | 2 | journal parse error |
//! | 3 | source image does not match the journal's source hash |
//! | 4 | replay hash mismatch or an entry failed to execute |
//! | 5 | I/O or image codec error |
//! | 64 | bad command-line usage |

mod inserts;

use std::collections::HashMap;
use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use imgjournal_core::codecs::DEFAULT_JPEG_QUALITY;
use imgjournal_core::journal::{entry_line, parse, serialize, FieldValue};
use imgjournal_core::{
    content_hash, diff, export_image, import_image, normalize, replay_with, step, verify,
    CodecError, ContentHash, ImageFormat, Journal, JournalError, Raster, ReplayError, Verdict,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "imgjournal", version, about = "Replay and verify journaled image edits")]
struct Cli {
    /// Print reports as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a journal over its source and write the final image.
    Apply {
        journal: PathBuf,
        source: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        inserts: InsertArgs,
        #[command(flatten)]
        encode: EncodeArgs,
    },
    /// Check that a journal reproduces a claimed image from its source.
    Verify {
        journal: PathBuf,
        source: PathBuf,
        claimed: PathBuf,
        #[command(flatten)]
        inserts: InsertArgs,
    },
    /// Write the image after the first N journal entries (0 = the source).
    Step {
        journal: PathBuf,
        source: PathBuf,
        #[arg(short = 'n', long = "entries")]
        n: usize,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        inserts: InsertArgs,
        #[command(flatten)]
        encode: EncodeArgs,
    },
    /// Compare two images pixel by pixel.
    Diff { a: PathBuf, b: PathBuf },
    /// Rewrite a journal without undone edits or UNDO/REDO entries.
    Normalize {
        journal: PathBuf,
        source: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        inserts: InsertArgs,
    },
    /// List the entries of a journal.
    Log { journal: PathBuf },
    /// Run the HTTP session API.
    Serve {
        #[arg(long, env = "IMGJOURNAL_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "IMGJOURNAL_MAX_UPLOAD_BYTES", default_value_t = 32 * 1024 * 1024)]
        max_upload_bytes: usize,
        /// Drop sessions idle for this many seconds.
        #[arg(long, env = "IMGJOURNAL_SESSION_TTL_SECS", default_value_t = 3600)]
        ttl_secs: u64,
    },
}

#[derive(clap::Args)]
struct InsertArgs {
    /// Image melded by the journal. Repeatable. MELD files not given here
    /// are looked up next to the journal.
    #[arg(long = "insert", value_name = "PATH")]
    paths: Vec<PathBuf>,
}

#[derive(clap::Args)]
struct EncodeArgs {
    /// Output format; defaults to the output file's extension.
    #[arg(long)]
    format: Option<ImageFormat>,
    /// JPEG quality, 1-100.
    #[arg(long, default_value_t = DEFAULT_JPEG_QUALITY)]
    quality: u8,
}

/// A failed command: what to print and which exit code to use.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Failure::new(5, format!("{}: {err}", path.display()))
    }

    fn codec(path: &Path, err: CodecError) -> Self {
        Failure::new(5, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<JournalError> for Failure {
    fn from(e: JournalError) -> Self {
        Failure::new(2, format!("journal: {e}"))
    }
}

impl From<ReplayError> for Failure {
    fn from(e: ReplayError) -> Self {
        match e {
            ReplayError::SourceMismatch { .. } => Failure::new(3, e.to_string()),
            ReplayError::Execution { .. } => Failure::new(4, format!("replay failed at {e}")),
            ReplayError::IndexOutOfRange { .. } => Failure::new(64, e.to_string()),
            ReplayError::Journal(j) => j.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let json = cli.json;
    match cli.command {
        Command::Apply { journal, source, out, inserts, encode } => {
            let (j, src, store) = load_replay_inputs(&journal, &source, &inserts)?;
            let (raster, report) = replay_with(&j, &src, &store)?;
            if let Some(seq) = report.first_mismatch() {
                if json {
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                } else {
                    eprint!("{}", report.render());
                }
                return Err(Failure::new(4, format!("entry {seq} does not reproduce its recorded hash")));
            }
            write_image(&out, &raster, &encode)?;
            if json {
                let body = json!({"output": out, "final_hash": content_hash(&raster), "replay": report});
                println!("{}", serde_json::to_string_pretty(&body).unwrap());
            }
            Ok(0)
        }
        Command::Verify { journal, source, claimed, inserts } => {
            let (j, src, store) = load_replay_inputs(&journal, &source, &inserts)?;
            let claimed = read_image(&claimed)?;
            let v = verify(&j, &src, &claimed, &store)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&v).unwrap());
            } else {
                print!("{}", v.render());
            }
            Ok(match (v.verdict, v.replay.verdict) {
                (Verdict::Pass, _) => 0,
                (Verdict::Fail, Verdict::Fail) => 4,
                (Verdict::Fail, Verdict::Pass) => 1,
            })
        }
        Command::Step { journal, source, n, out, inserts, encode } => {
            let (j, src, store) = load_replay_inputs(&journal, &source, &inserts)?;
            let raster = step(&j, &src, n, &store)?;
            write_image(&out, &raster, &encode)?;
            if json {
                println!("{}", json!({"output": out, "entries": n, "hash": content_hash(&raster)}));
            }
            Ok(0)
        }
        Command::Diff { a, b } => {
            let report = diff(&read_image(&a)?, &read_image(&b)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                print!("{}", report.render());
            }
            Ok(if report.identical { 0 } else { 1 })
        }
        Command::Normalize { journal, source, out, inserts } => {
            let (j, src, store) = load_replay_inputs(&journal, &source, &inserts)?;
            let normalized = normalize(&j, &src, &store)?;
            let text = serialize(&normalized)?;
            std::fs::write(&out, &text).map_err(|e| Failure::io(&out, e))?;
            if json {
                println!("{}", json!({"output": out, "entries": normalized.len(), "removed": j.len() - normalized.len()}));
            }
            Ok(0)
        }
        Command::Log { journal } => {
            let j = read_journal(&journal)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&log_json(&j)).unwrap());
            } else {
                print!("{}", log_text(&j));
            }
            Ok(0)
        }
        Command::Serve { bind, max_upload_bytes, ttl_secs } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            let config = imgjournal_service::Config {
                max_upload_bytes,
                session_ttl: Duration::from_secs(ttl_secs),
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(5, e.to_string()))?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(bind)
                    .await
                    .map_err(|e| Failure::new(5, format!("bind {bind}: {e}")))?;
                imgjournal_service::serve(listener, config)
                    .await
                    .map_err(|e| Failure::new(5, e.to_string()))
            })?;
            Ok(0)
        }
    }
}

fn read_journal(path: &Path) -> Result<Journal, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse(&text).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

fn read_image(path: &Path) -> Result<Raster, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
    let declared = path.to_str().and_then(ImageFormat::from_path);
    let imported = import_image(&bytes, declared).map_err(|e| Failure::codec(path, e))?;
    for warning in &imported.warnings {
        eprintln!("warning: {}: {warning}", path.display());
    }
    Ok(imported.raster)
}

fn write_image(path: &Path, raster: &Raster, encode: &EncodeArgs) -> Result<(), Failure> {
    let format = encode
        .format
        .or_else(|| path.to_str().and_then(ImageFormat::from_path))
        .ok_or_else(|| {
            Failure::new(64, format!("{}: cannot tell output format from extension; pass --format", path.display()))
        })?;
    let bytes = export_image(raster, format, encode.quality).map_err(|e| Failure::codec(path, e))?;
    std::fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn load_replay_inputs(
    journal: &Path,
    source: &Path,
    inserts: &InsertArgs,
) -> Result<(Journal, Raster, HashMap<ContentHash, Raster>), Failure> {
    let j = read_journal(journal)?;
    let src = read_image(source)?;
    let store = inserts::collect(&j, journal, &inserts.paths, read_image)?;
    Ok((j, src, store))
}

fn log_text(j: &Journal) -> String {
    let mut out = format!("source {:?} {}\n", j.source_name, j.source_hash.short(12));
    for entry in j.sorted_entries() {
        let params: Vec<String> = entry
            .action
            .fields()
            .into_iter()
            .map(|(k, v)| format!("{k}={}", display_value(&v)))
            .collect();
        out.push_str(&format!(
            "{:>4}  {:<20} {:<44} {}\n",
            entry.seq,
            entry.action.kind().name(),
            params.join(" "),
            entry.post_hash.short(12)
        ));
    }
    out
}

fn display_value(v: &FieldValue) -> String {
    match v {
        FieldValue::Int(i) => i.to_string(),
        FieldValue::Decimal(d) => d.to_string(),
        FieldValue::Text(s) => format!("{s:?}"),
        FieldValue::Hash(h) => h.short(12).to_string(),
    }
}

fn log_json(j: &Journal) -> serde_json::Value {
    let entries: Vec<_> = j
        .sorted_entries()
        .into_iter()
        .map(|e| {
            let params: serde_json::Map<String, serde_json::Value> = e
                .action
                .fields()
                .into_iter()
                .map(|(k, v)| {
                    let value = match v {
                        FieldValue::Int(i) => json!(i),
                        // kept as text so the 6-digit value is exact
                        FieldValue::Decimal(d) => json!(d.to_string()),
                        FieldValue::Text(s) => json!(s),
                        FieldValue::Hash(h) => json!(h),
                    };
                    (k.to_string(), value)
                })
                .collect();
            json!({"seq": e.seq, "op": e.action.kind(), "params": params, "hash": e.post_hash, "line": entry_line(e)})
        })
        .collect();
    json!({"source": j.source_name, "source_hash": j.source_hash, "entries": entries})
}
