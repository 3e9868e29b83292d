//! Experiment pipelines behind the command-line tool. Each command returns
//! its CSV files and verdicts in memory; writing them out is up to the caller.

mod analytic;
mod config;
mod simulation;
mod verify;

use std::path::Path;

pub use analytic::{closed_form_discrepancy, cmd_exponents, cmd_iv, cmd_mse, finite_exponent, iv_curve_value, velocity_grid};
pub use config::{
    ExperimentConfig, ExperimentSection, ExponentsSection, IvSection, LatticeSection, MonteCarloSection, PacketSection, Scheme,
    SourceSection, StreamSection,
};
pub use simulation::{cmd_packet, cmd_simulate, cmd_stream, stream_velocity};
pub use verify::{cmd_verify, exponent_fit_gaps, table_translation_mismatches};

use crate::error::{Error, Result};
use crate::verdict::{write_verdicts_csv, Verdict};

/// One CSV produced by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Everything a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub command: &'static str,
    pub files: Vec<OutputFile>,
    pub verdicts: Vec<Verdict>,
    /// Observations that are reported but not asserted.
    pub notes: Vec<String>,
}

impl CommandOutput {
    fn new(command: &'static str) -> Self {
        CommandOutput {
            command,
            files: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn add_csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| Error::Io(e.to_string()))?;
        self.files.push(OutputFile {
            name: name.to_string(),
            contents: String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?,
        });
        Ok(())
    }

    /// Appends `<command>_verdicts.csv` when there are verdicts.
    fn seal(mut self) -> Result<Self> {
        if !self.verdicts.is_empty() {
            let verdicts = self.verdicts.clone();
            self.add_csv(&format!("{}_verdicts.csv", self.command), |w| write_verdicts_csv(&verdicts, w))?;
        }
        Ok(self)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_str())
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Worker threads for a configured count, 0 meaning every available core.
pub fn resolve_threads(configured: usize) -> usize {
    if configured > 0 {
        configured
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}
