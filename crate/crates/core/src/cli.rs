//! Command line front end.
//!
//! Exit codes: 0 success, 1 validation findings, 2 I/O or parse failure
//! (including usage errors), 3 construct outside the target's subset,
//! 4 bad stream content. Errors go to stderr as one line each, prefixed with
//! their class.

use std::ffi::OsString;
use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::codegen::{generate_drl, generate_epl, CodegenError, Target};
use crate::document::{parse_model, parse_stream, write_rows};
use crate::engine::{run_stream, EngineError};
use crate::model::RuleModel;
use crate::validator::{validate, Diagnostic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_STREAM: i32 = 4;

#[derive(Parser)]
#[command(name = "cepml", version, about = "Validate, generate and run CEP rule models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print validation findings for a model file.
    Validate { model: PathBuf },
    /// Generate EPL or DRL source.
    Gen {
        #[arg(long, default_value = "epl")]
        target: Target,
        model: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a model over a newline-delimited event stream.
    Run {
        model: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

struct Failure {
    code: i32,
    lines: Vec<String>,
}

impl Failure {
    fn new(code: i32, class: &str, message: impl std::fmt::Display) -> Self {
        Self {
            code,
            lines: vec![format!("{class}: {message}")],
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_IO, "io-error", format_args!("{}: {e}", path.display()))
    }

    fn diagnostics(diags: &[Diagnostic]) -> Self {
        Self {
            code: EXIT_DIAGNOSTICS,
            lines: diags.iter().map(|d| d.to_string()).collect(),
        }
    }
}

fn load_model(path: &Path) -> Result<RuleModel, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse_model(&text).map(|(m, _)| m).map_err(|errs| Failure {
        code: EXIT_IO,
        lines: errs
            .iter()
            .map(|e| format!("parse-error: {}: {e}", path.display()))
            .collect(),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(EXIT_IO, "io-error", e)),
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { model } => {
            let diags = validate(&load_model(&model)?);
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_DIAGNOSTICS,
                    lines: Vec::new(),
                })
            }
        }
        Command::Gen { target, model, out } => {
            let m = load_model(&model)?;
            let src = match target {
                Target::Epl => generate_epl(&m),
                Target::Drl => generate_drl(&m),
            };
            match src {
                Ok(src) => emit(out.as_deref(), &format!("{}\n", src.text.trim_end())),
                Err(CodegenError::Invalid(diags)) => Err(Failure::diagnostics(&diags)),
                Err(CodegenError::Unsupported { path, message }) => Err(Failure::new(
                    EXIT_UNSUPPORTED,
                    "unsupported",
                    format_args!("{path}: {message}"),
                )),
            }
        }
        Command::Run { model, events, out } => {
            let m = load_model(&model)?;
            let text = std::fs::read_to_string(&events).map_err(|e| Failure::io(&events, e))?;
            let stream = parse_stream(&text)
                .map_err(|e| Failure::new(EXIT_STREAM, "stream-error", format_args!("{}: {e}", events.display())))?;
            match run_stream(&m, &stream) {
                Ok(rows) => emit(out.as_deref(), &write_rows(&rows)),
                Err(EngineError::Invalid(diags)) => Err(Failure::diagnostics(&diags)),
                Err(EngineError::Unsupported { path, message }) => Err(Failure::new(
                    EXIT_UNSUPPORTED,
                    "unsupported",
                    format_args!("{path}: {message}"),
                )),
                Err(e) => Err(Failure::new(
                    EXIT_STREAM,
                    "stream-error",
                    format_args!("{}: {e}", events.display()),
                )),
            }
        }
        Command::Serve { port } => {
            let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::new(EXIT_IO, "io-error", e))?;
            eprintln!("listening on http://{addr}");
            rt.block_on(crate::api::serve(addr))
                .map_err(|e| Failure::new(EXIT_IO, "io-error", format_args!("{addr}: {e}")))
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or_default();
            eprintln!("usage-error: {}", first.trim_start_matches("error: "));
            return EXIT_IO;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            for line in &f.lines {
                eprintln!("{line}");
            }
            f.code
        }
    }
}
