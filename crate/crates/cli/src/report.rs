//! Output files: series, config echo, manifest and snapshots.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use sphere_trace_core::field_synth::{evaluate_on_grid, snapshot_fields, write_snapshot, GridSpec};
use sphere_trace_core::montecarlo::simulate_path;
use sphere_trace_core::{ExperimentConfig, QuantitySeries};

use crate::CliError;

/// Hash of `content` as git stores a blob, with SHA-256.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_file(path: &Path, content: &[u8]) -> Result<(), CliError> {
    fs::write(path, content).map_err(io_err(path))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub struct Manifest {
    pub config_text: String,
    pub outputs: Vec<PathBuf>,
    pub oracle_trace_note: String,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub threads: usize,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("config_hash=sha256:{}\n", blob_hash(self.config_text.as_bytes())));
        s.push_str(&format!("started_unix={}\n", self.started_unix));
        s.push_str(&format!("wall_seconds={:.3}\n", self.wall_seconds));
        s.push_str(&format!("threads={}\n", self.threads));
        s.push_str(&format!("oracle_trace={}\n", self.oracle_trace_note));
        for p in &self.outputs {
            s.push_str(&format!("output={}\n", p.display()));
        }
        s.push_str("\n# config\n");
        s.push_str(&self.config_text);
        s
    }
}

pub struct CheckReport {
    pub within: usize,
    pub total: usize,
    pub slope_oracle: f64,
    pub slope_estimate: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.within == self.total
    }

    pub fn line(&self) -> String {
        format!(
            "check {}: {}/{} points within 3 sigma of oracle_moment (coverage {:.4}); terminal slope oracle {:.6e}, estimate {:.6e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.within,
            self.total,
            self.within as f64 / self.total as f64,
            self.slope_oracle,
            self.slope_estimate
        )
    }
}

/// Every point must satisfy `|estimate - oracle| <= 3 stderr`, with a
/// relative slack of 1e-9 for deterministic runs.
pub fn check(series: &QuantitySeries) -> CheckReport {
    let within = (0..series.len())
        .filter(|&k| {
            let r = series.oracle_moment[k];
            (series.estimate[k] - r).abs() <= 3.0 * series.stderr[k] + 1e-9 * r.abs().max(1e-300)
        })
        .count();
    let n = series.len();
    let slope = |v: &[f64]| {
        if n < 2 {
            return f64::NAN;
        }
        (v[n - 1] - v[n - 2]) / (series.times[n - 1] - series.times[n - 2])
    };
    CheckReport {
        within,
        total: n,
        slope_oracle: slope(&series.oracle_moment),
        slope_estimate: slope(&series.estimate),
    }
}

/// Write grids of the first sample path every `every` steps into `dir`.
pub fn write_snapshots(
    config: &ExperimentConfig,
    every: usize,
    grid: GridSpec,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    create_dir(dir)?;
    let mut written = Vec::new();
    let mut failure = None;
    simulate_path(config, 0, |step, time, state| {
        if step % every != 0 && step != config.steps {
            return Ok(());
        }
        for (name, coeffs) in snapshot_fields(state) {
            let values = evaluate_on_grid(&coeffs, grid)?;
            let path = dir.join(format!("{name}_{step:06}.txt"));
            let result = fs::File::create(&path).and_then(|f| {
                let mut w = BufWriter::new(f);
                write_snapshot(&mut w, grid, config.kappa, time, &values)?;
                w.flush()
            });
            if let Err(source) = result {
                failure.get_or_insert(CliError::Io { path, source });
                return Ok(());
            }
            written.push(path);
        }
        Ok(())
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(written),
    }
}
