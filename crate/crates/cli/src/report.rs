use std::io::Write;
use std::path::Path;
use std::time::Duration;

use crate::config::Suite;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub runtime: Duration,
    /// Reproduction notes: the first failing counterexample, fitted constants.
    pub detail: Option<String>,
}

/// Checks in execution order plus named CSV tables produced along the way.
#[derive(Debug, Clone)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub tables: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn new(suite: Suite, seed: u64) -> Self {
        Report { suite, seed, checks: Vec::new(), tables: Vec::new() }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn print(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "suite {} (seed {})", self.suite.name(), self.seed)?;
        for c in &self.checks {
            writeln!(
                out,
                "{} {}: measured {:.3e}, tol {:.1e}, {:.3}s",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                c.runtime.as_secs_f64()
            )?;
            if let Some(d) = &c.detail {
                writeln!(out, "    {d}")?;
            }
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(out, "{} checks, {failed} failed", self.checks.len())
    }

    /// CSV `check,measured,tolerance,pass,runtime_s,detail`.
    pub fn write_csv(&self, out: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "measured", "tolerance", "pass", "runtime_s", "detail"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                format!("{:.16e}", c.measured),
                format!("{:.16e}", c.tolerance),
                c.passed.to_string(),
                format!("{:.16e}", c.runtime.as_secs_f64()),
                c.detail.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes report.csv and every table into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        for (name, bytes) in &self.tables {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}
