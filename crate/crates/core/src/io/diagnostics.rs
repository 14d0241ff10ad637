//! Diagnostics CSV: a version line, a fixed header, one row per cadence tick
//! and a summary footer. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::grid::Field2;
use crate::io::snapshot::write_snapshot;
use crate::monitors::{LedgerEntry, MonitorSummary};
use crate::timestep::{RunObserver, State};

pub const CSV_VERSION_LINE: &str = "# ebpe diagnostics v1";
pub const CSV_COLUMNS: &str =
    "step,t,energy,dissipation,rho_l5_5,t_sup,rho_sup,trace_residual,div_residual,flags";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub step: u64,
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub rho_l5: f64,
    pub t_sup: f64,
    pub rho_sup: f64,
    pub trace_residual: f64,
    pub div_residual: f64,
    /// Bitfield of the monitor flags raised at this step.
    pub flags: u32,
}

impl DiagnosticsRow {
    pub fn from_entry(e: &LedgerEntry, flags: u32) -> Self {
        Self {
            step: e.step,
            time: e.time,
            energy: e.energy,
            dissipation: e.dissipation,
            rho_l5: e.rho_l5,
            t_sup: e.t_sup,
            rho_sup: e.rho_sup,
            trace_residual: e.residuals.trace,
            div_residual: e.residuals.solenoidal,
            flags,
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.step,
            self.time,
            self.energy,
            self.dissipation,
            self.rho_l5,
            self.t_sup,
            self.rho_sup,
            self.trace_residual,
            self.div_residual,
            self.flags
        )
    }
}

pub fn csv_header() -> String {
    format!("{CSV_VERSION_LINE}\n{CSV_COLUMNS}\n")
}

pub fn csv_footer(summary: &MonitorSummary) -> String {
    format!(
        "# summary steps={} max_principle={} energy={} h1={} constraints={}\n",
        summary.steps,
        summary.max_principle.label(),
        summary.energy.label(),
        summary.h1.label(),
        summary.constraints.label()
    )
}

/// Keeps the CSV text (and optionally the snapshots) in memory.
#[derive(Debug, Default)]
pub struct MemoryRecorder {
    pub csv: String,
    pub rows: Vec<DiagnosticsRow>,
    pub keep_snapshots: bool,
    pub snapshots: Vec<(State, Option<Field2>)>,
}

impl MemoryRecorder {
    pub fn new() -> Self {
        Self {
            csv: csv_header(),
            ..Self::default()
        }
    }

    /// Data lines only, without comments and header.
    pub fn data_lines(&self) -> Vec<&str> {
        self.csv
            .lines()
            .filter(|l| !l.starts_with('#') && *l != CSV_COLUMNS)
            .collect()
    }
}

impl RunObserver for MemoryRecorder {
    fn row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        let _ = writeln!(self.csv, "{}", row.to_csv_line());
        self.rows.push(*row);
        Ok(())
    }

    fn snapshot(&mut self, state: &State, z_rho: Option<&Field2>, _is_final: bool) -> Result<()> {
        if self.keep_snapshots {
            self.snapshots.push((state.clone(), z_rho.cloned()));
        }
        Ok(())
    }

    fn finish(&mut self, summary: &MonitorSummary) -> Result<()> {
        self.csv.push_str(&csv_footer(summary));
        Ok(())
    }
}

/// Writes `diagnostics.csv`, `snapshot_<step>.bin` and `final.bin` into a
/// directory.
pub struct DirRecorder {
    dir: PathBuf,
    csv: BufWriter<File>,
}

impl DirRecorder {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut csv = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
        csv.write_all(csv_header().as_bytes())?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl RunObserver for DirRecorder {
    fn row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        writeln!(self.csv, "{}", row.to_csv_line())?;
        Ok(())
    }

    fn snapshot(&mut self, state: &State, z_rho: Option<&Field2>, is_final: bool) -> Result<()> {
        let name = if is_final {
            "final.bin".to_string()
        } else {
            format!("snapshot_{:08}.bin", state.step)
        };
        write_snapshot(&self.dir.join(name), state, z_rho)
    }

    fn finish(&mut self, summary: &MonitorSummary) -> Result<()> {
        self.csv.write_all(csv_footer(summary).as_bytes())?;
        self.csv.flush()?;
        Ok(())
    }
}

impl Drop for DirRecorder {
    fn drop(&mut self) {
        let _ = self.csv.flush();
    }
}
