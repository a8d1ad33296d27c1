use std::collections::BTreeMap;
use std::io::{ErrorKind, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Self-contained record of one command run.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub parameters: Value,
    pub seed: u64,
    pub results: Value,
    /// Milliseconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub version: String,
}

impl RunReport {
    pub fn new(command: &str, parameters: Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            parameters,
            seed,
            results: Value::Null,
            timings: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.insert(phase.into(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn emit(&self, path: Option<&Path>, quiet: bool) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        if let Some(p) = path {
            std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?;
        }
        if !quiet {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Whether the command's own checks passed.
pub enum Outcome {
    Success,
    CheckFailed,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Success
        } else {
            Outcome::CheckFailed
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Outcome::Success => ExitCode::SUCCESS,
            Outcome::CheckFailed => ExitCode::from(1),
        }
    }
}
