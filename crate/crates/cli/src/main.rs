//! `fieldprep` command-line front end.
//!
//! Every run is deterministic. With `--out DIR` the result goes to a file in
//! `DIR` next to `manifest.json`; otherwise it is printed to stdout.

mod args;
mod commands;
mod pipeline;
mod reproduce;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use fieldprep::LatticeSpec;
use serde_json::{json, Value};

use args::{Cli, Format};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(fieldprep::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e.kind() {
                "validation" => 2,
                "budget" => 3,
                "numerical" => 4,
                _ => 1,
            },
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Usage(m) => json!({"error": {"kind": "validation", "message": m}}),
            CliError::Lib(e) => {
                let mut v = json!({"kind": e.kind(), "message": e.to_string()});
                if let fieldprep::Error::Budget {
                    required,
                    budget,
                    bytes,
                } = e
                {
                    v["required_amplitudes"] = json!(required.to_string());
                    v["budget_amplitudes"] = json!(budget);
                    v["required_bytes"] = json!(bytes.to_string());
                }
                json!({ "error": v })
            }
        }
    }
}

impl From<fieldprep::Error> for CliError {
    fn from(e: fieldprep::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(fieldprep::Error::Io(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// What a subcommand produced.
pub struct Output {
    pub stem: &'static str,
    pub spec: Option<LatticeSpec>,
    pub json: Value,
    pub csv: Option<String>,
    /// Rendered circuit and its file extension; takes precedence over json/csv.
    pub text: Option<(&'static str, String)>,
    /// Additional files, only written with `--out`.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn json(stem: &'static str, spec: Option<LatticeSpec>, json: Value) -> Self {
        Self {
            stem,
            spec,
            json,
            csv: None,
            text: None,
            files: Vec::new(),
        }
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn stamped_json(out: &Output) -> Value {
    let mut v = out.json.clone();
    if let (Some(spec), Value::Object(map)) = (&out.spec, &mut v) {
        map.entry("spec_hash").or_insert_with(|| json!(spec.hash()));
    }
    v
}

fn stamped_csv(out: &Output, csv: &str) -> String {
    match &out.spec {
        Some(s) => format!("# spec_hash={}\n{csv}", s.hash()),
        None => csv.to_string(),
    }
}

fn manifest(cli: &Cli, out: &Output, files: &[String]) -> Value {
    json!({
        "tool": "fieldprep",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config": cli,
        "spec": out.spec,
        "spec_hash": out.spec.as_ref().map(LatticeSpec::hash),
        "outputs": files,
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn write_outputs(cli: &Cli, out: &Output) -> CliResult<()> {
    let (name, body) = if let Some((ext, text)) = &out.text {
        (format!("{}.{ext}", out.stem), text.clone())
    } else if let (Format::Csv, Some(csv)) = (cli.format, &out.csv) {
        (format!("{}.csv", out.stem), stamped_csv(out, csv))
    } else {
        (format!("{}.json", out.stem), pretty(&stamped_json(out)))
    };
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut names = vec![name.clone()];
            fs::write(dir.join(&name), body)?;
            for (f, bytes) in &out.files {
                fs::write(dir.join(f), bytes)?;
                names.push(f.clone());
            }
            fs::write(dir.join("manifest.json"), pretty(&manifest(cli, out, &names)))?;
        }
        None => {
            if !out.files.is_empty() {
                return Err(CliError::usage("this run writes several files; pass --out DIR"));
            }
            if out.text.is_some() || (cli.format == Format::Csv && out.csv.is_some()) {
                print!("{body}");
            } else {
                let v = json!({
                    "manifest": manifest(cli, out, &[]),
                    "result": stamped_json(out),
                });
                print!("{}", pretty(&v));
            }
        }
    }
    Ok(())
}

pub fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match commands::run(&cli.command).and_then(|out| write_outputs(&cli, &out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
