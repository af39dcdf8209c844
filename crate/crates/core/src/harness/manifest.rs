//! Run manifest: a valid config file whose comment lines carry metadata.
//!
//! ```text
//! # shpattern manifest
//! # version = 0.1.0
//! # status = complete
//! # wall_clock_seconds = 3.2
//! # note = <free text>
//! # file = <name> <sha256>
//! experiment = compare
//! ...
//! ```
//!
//! Because metadata lives in comments, the manifest itself can be passed back
//! as `--config` to rerun the experiment.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::io::write_text;

pub const MANIFEST_NAME: &str = "manifest.txt";
const TITLE: &str = "# shpattern manifest";

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Running,
    Complete,
    Failed { exit_code: i32, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub status: Status,
    pub wall_clock_seconds: Option<f64>,
    pub notes: Vec<String>,
    /// `(file name, sha256)` of every output except the manifest.
    pub files: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: Status::Running,
            wall_clock_seconds: None,
            notes: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{TITLE}");
        let _ = writeln!(s, "# version = {}", self.version);
        match &self.status {
            Status::Running => {
                let _ = writeln!(s, "# status = running");
            }
            Status::Complete => {
                let _ = writeln!(s, "# status = complete");
            }
            Status::Failed { exit_code, message } => {
                let _ = writeln!(s, "# status = failed {exit_code} {}", message.replace('\n', " "));
            }
        }
        if let Some(w) = self.wall_clock_seconds {
            let _ = writeln!(s, "# wall_clock_seconds = {w}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "# note = {}", n.replace('\n', " "));
        }
        for (name, sha) in &self.files {
            let _ = writeln!(s, "# file = {name} {sha}");
        }
        s.push_str(&self.config.to_text());
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.lines().next() != Some(TITLE) {
            return Err(Error::Format("not a shpattern manifest".into()));
        }
        let mut m = Self::new(RunConfig::parse(text)?);
        m.version.clear();
        for line in text.lines() {
            let Some(meta) = line.strip_prefix("# ") else { continue };
            let Some((key, value)) = meta.split_once(" = ") else { continue };
            match key {
                "version" => m.version = value.to_string(),
                "status" => {
                    m.status = match value {
                        "running" => Status::Running,
                        "complete" => Status::Complete,
                        v => {
                            let rest = v
                                .strip_prefix("failed ")
                                .ok_or_else(|| Error::Format(format!("unknown status '{v}'")))?;
                            let (code, msg) = rest.split_once(' ').unwrap_or((rest, ""));
                            Status::Failed {
                                exit_code: code.parse().map_err(|_| Error::Format(format!("bad exit code '{code}'")))?,
                                message: msg.to_string(),
                            }
                        }
                    }
                }
                "wall_clock_seconds" => {
                    m.wall_clock_seconds =
                        Some(value.parse().map_err(|_| Error::Format(format!("bad wall clock '{value}'")))?)
                }
                "note" => m.notes.push(value.to_string()),
                "file" => {
                    let (name, sha) = value
                        .rsplit_once(' ')
                        .ok_or_else(|| Error::Format(format!("bad file record '{value}'")))?;
                    m.files.push((name.to_string(), sha.to_string()));
                }
                _ => {}
            }
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(MANIFEST_NAME), &self.to_text())
    }
}
