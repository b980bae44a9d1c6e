//! Run persistence: CSV emitters, raw state snapshots with TOML sidecars,
//! the run manifest, and self-contained plot scripts.
//!
//! Every CSV is written with Rust's shortest-roundtrip float formatting, so
//! identical numbers produce identical bytes and golden-file comparison is
//! meaningful. The manifest is written once at startup (status "running")
//! and rewritten at exit, so a crashed run still leaves a record.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::RunConfig;
use crate::error::{Error, Issue, Result, Warning};
use crate::field::{Domain, Field, Representation};

/// Simple CSV sink: one header, rows of shortest-roundtrip floats.
pub struct CsvFile {
    w: BufWriter<File>,
    name: String,
}

impl CsvFile {
    pub fn create(dir: &Path, name: &str, header: &str) -> Result<CsvFile> {
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        writeln!(w, "{header}")?;
        Ok(CsvFile {
            w,
            name: name.to_string(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let mut first = true;
        for v in values {
            if !first {
                write!(self.w, ",")?;
            }
            write!(self.w, "{v}")?;
            first = false;
        }
        writeln!(self.w)?;
        Ok(())
    }

    /// Row with a leading integer column (iteration / member indices).
    pub fn indexed_row(&mut self, index: usize, values: &[f64]) -> Result<()> {
        write!(self.w, "{index}")?;
        for v in values {
            write!(self.w, ",{v}")?;
        }
        writeln!(self.w)?;
        Ok(())
    }

    /// Flush and return the file name for the manifest inventory.
    pub fn finish(mut self) -> Result<String> {
        self.w.flush()?;
        Ok(self.name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnapshotMeta {
    t: f64,
    n_x: usize,
    n_cols: usize,
    d: usize,
    l_x: f64,
    l_y: f64,
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("toml")
}

/// Write a physical-representation state as raw little-endian complex
/// doubles (row-major) plus a TOML sidecar describing grid and time.
pub fn save_snapshot(f: &Field, bin_path: &Path) -> Result<()> {
    let phys = f.in_rep(Representation::Physical);
    let dom = f.domain();
    let meta = SnapshotMeta {
        t: f.t(),
        n_x: dom.xgrid().n_x(),
        n_cols: dom.ygrid().n_cols(),
        d: dom.d(),
        l_x: dom.xgrid().l_x(),
        l_y: dom.ygrid().l_y(),
    };
    let mut w = BufWriter::new(File::create(bin_path)?);
    for c in phys.data().iter() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    w.flush()?;
    let text = toml::to_string(&meta)
        .map_err(|e| Error::numerical(format!("sidecar serialization failed: {e}")))?;
    std::fs::write(sidecar_path(bin_path), text)?;
    Ok(())
}

/// Load a snapshot onto `domain`, checking the sidecar against its geometry.
pub fn load_snapshot(bin_path: &Path, domain: &Arc<Domain>) -> Result<Field> {
    let meta_text = std::fs::read_to_string(sidecar_path(bin_path)).map_err(|e| {
        Error::invalid(
            "snapshot",
            format!("missing sidecar for {}: {e}", bin_path.display()),
        )
    })?;
    let meta: SnapshotMeta = toml::from_str(&meta_text)
        .map_err(|e| Error::invalid("snapshot", format!("bad sidecar: {e}")))?;
    let dom_shape = (domain.xgrid().n_x(), domain.ygrid().n_cols());
    if (meta.n_x, meta.n_cols) != dom_shape || meta.d != domain.d() {
        return Err(Error::invalid(
            "snapshot",
            format!(
                "snapshot geometry ({}, {}, d={}) does not match the domain ({}, {}, d={})",
                meta.n_x,
                meta.n_cols,
                meta.d,
                dom_shape.0,
                dom_shape.1,
                domain.d()
            ),
        ));
    }
    let mut bytes = Vec::new();
    File::open(bin_path)?.read_to_end(&mut bytes)?;
    let want = meta.n_x * meta.n_cols * 16;
    if bytes.len() != want {
        return Err(Error::invalid(
            "snapshot",
            format!("expected {want} bytes, found {}", bytes.len()),
        ));
    }
    let mut data = Array2::zeros((meta.n_x, meta.n_cols));
    for (k, chunk) in bytes.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        data[[k / meta.n_cols, k % meta.n_cols]] = Complex64::new(re, im);
    }
    Field::from_data(domain, Representation::Physical, data, meta.t)
}

/// Load every *.bin snapshot in a directory, ordered by time.
pub fn load_trajectory(dir: &Path, domain: &Arc<Domain>) -> Result<Vec<Field>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| {
            Error::invalid(
                "trajectory",
                format!("cannot read {}: {e}", dir.display()),
            )
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "bin"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(
            "trajectory",
            format!("no .bin snapshots in {}", dir.display()),
        ));
    }
    let mut fields: Vec<Field> = paths
        .iter()
        .map(|p| load_snapshot(p, domain))
        .collect::<Result<_>>()?;
    fields.sort_by(|a, b| a.t().total_cmp(&b.t()));
    Ok(fields)
}

/// Horizon advisory recorded alongside the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonReport {
    pub t_end: f64,
    pub horizon: f64,
    pub exceeded: bool,
}

/// Self-describing record of one invocation. Scalar fields first: the TOML
/// serializer requires tables after values.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub subcommand: String,
    /// running | ok | validation_error | numerical_error | io_error
    pub status: String,
    pub started_unix: f64,
    #[serde(default)]
    pub ended_unix: Option<f64>,
    /// Worker count honored from the environment override; all reductions
    /// are fixed-order regardless, so this never changes results.
    pub threads: usize,
    pub files: Vec<String>,
    pub errors: Vec<String>,
    #[serde(default)]
    pub horizon: Option<HorizonReport>,
    pub warnings: Vec<Warning>,
    /// Per-subcommand scalar results (iteration counts, maxima, slopes).
    #[serde(default)]
    pub summary: Option<toml::value::Table>,
    #[serde(default)]
    pub config: Option<RunConfig>,
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Thread-count override honored from the environment; defaults to 1.
pub fn thread_override() -> usize {
    std::env::var("CONFINED_NLS_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

impl RunManifest {
    pub fn start(subcommand: &str) -> RunManifest {
        RunManifest {
            code_version: format!(
                "{} {}",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION")
            ),
            subcommand: subcommand.to_string(),
            status: "running".to_string(),
            started_unix: now_unix(),
            ended_unix: None,
            threads: thread_override(),
            files: Vec::new(),
            errors: Vec::new(),
            horizon: None,
            warnings: Vec::new(),
            summary: None,
            config: None,
        }
    }

    pub fn add_file(&mut self, name: impl Into<String>) {
        self.files.push(name.into());
    }

    pub fn add_warnings(&mut self, warnings: &[Warning]) {
        self.warnings.extend_from_slice(warnings);
    }

    /// Record the error in manifest form and pick the matching status.
    pub fn record_error(&mut self, err: &Error) {
        match err {
            Error::Validation(issues) => {
                self.status = "validation_error".to_string();
                for Issue { field, message } in issues {
                    self.errors.push(format!("{field}: {message}"));
                }
            }
            Error::Numerical(msg) => {
                self.status = "numerical_error".to_string();
                self.errors.push(msg.clone());
            }
            Error::Io(e) => {
                self.status = "io_error".to_string();
                self.errors.push(e.to_string());
            }
        }
    }

    pub fn finish_ok(&mut self) {
        self.status = "ok".to_string();
        self.ended_unix = Some(now_unix());
    }

    pub fn finish_err(&mut self, err: &Error) {
        self.record_error(err);
        self.ended_unix = Some(now_unix());
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::numerical(format!("manifest serialization failed: {e}")))?;
        std::fs::write(out_dir.join("manifest.toml"), text)?;
        Ok(())
    }
}

struct PlotSpec {
    csv: &'static str,
    script: &'static str,
    body: &'static str,
}

const PLOT_SPECS: &[PlotSpec] = &[
    PlotSpec {
        csv: "timeseries.csv",
        script: "plot_timeseries.py",
        body: r#"
t = col("t")
mass = col("mass")
energy = col("energy")
z = col("Z_norm")
fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
m0, e0 = mass[0], energy[0]
ax0.semilogy(t[1:], [abs(m - m0) / abs(m0) + 1e-20 for m in mass[1:]], label="mass drift")
ax0.semilogy(t[1:], [abs(e - e0) / abs(e0) + 1e-20 for e in energy[1:]], label="energy drift")
ax0.set_ylabel("relative drift")
ax0.legend()
ax1.plot(t, z, label="Z norm")
ax1.set_xlabel("t")
ax1.set_ylabel("Z norm")
ax1.legend()
save(fig, "timeseries.png")
"#,
    },
    PlotSpec {
        csv: "spectrum.csv",
        script: "plot_spectrum.py",
        body: r#"
n = col("n")
lam = col("lambda")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(n, lam, "o-")
ax.set_xlabel("mode index n")
ax.set_ylabel("eigenvalue")
save(fig, "spectrum.png")
"#,
    },
    PlotSpec {
        csv: "defects.csv",
        script: "plot_defects.py",
        body: r#"
j = col("j")
tau = col("tau")
defect = col("defect")
fig, ax = plt.subplots(figsize=(6, 4))
for jj in sorted(set(j)):
    pts = sorted((tt, dd) for ji, tt, dd in zip(j, tau, defect) if ji == jj)
    ax.semilogy([p[0] for p in pts], [p[1] + 1e-20 for p in pts], "o-", label=f"family {int(jj)}")
ax.set_xlabel("tau")
ax.set_ylabel("commutation defect")
ax.legend()
save(fig, "defects.png")
"#,
    },
    PlotSpec {
        csv: "scatter_report.csv",
        script: "plot_scatter.py",
        body: r#"
t = col("t")
inc = col("increment")
fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(t, [v + 1e-20 for v in inc], "o-")
ax.set_xlabel("checkpoint time")
ax.set_ylabel("interaction-picture increment")
save(fig, "scatter.png")
"#,
    },
    PlotSpec {
        csv: "picard.csv",
        script: "plot_picard.py",
        body: r#"
it = col("iteration")
res = col("residual")
fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(it, [v + 1e-20 for v in res], "o-")
ax.set_xlabel("sweep")
ax.set_ylabel("Picard residual")
save(fig, "picard.png")
"#,
    },
    PlotSpec {
        csv: "morawetz.csv",
        script: "plot_morawetz.py",
        body: r#"
t = col("t")
fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
ax0.plot(t, col("M_abs"), label="|y| weight")
ax0.plot(t, col("M_japanese"), label="smoothed weight")
ax0.set_ylabel("interaction action M(t)")
ax0.legend()
ax1.plot(t, col("frac_accum"), label="fractional marginal accumulator")
ax1.plot(t, col("cube_accum"), label="cube-mass accumulator")
ax1.set_xlabel("t")
ax1.legend()
save(fig, "morawetz.png")
"#,
    },
    PlotSpec {
        csv: "decay.csv",
        script: "plot_decay.py",
        body: r#"
import math
t = col("t")
norm = col("norm")
fig, ax = plt.subplots(figsize=(6, 4))
ax.loglog(t, norm, "o", label="transverse Lebesgue norm")
lt = [math.log(x) for x in t]
ln = [math.log(v) for v in norm]
n = len(lt)
mt, mn = sum(lt) / n, sum(ln) / n
slope = sum((a - mt) * (b - mn) for a, b in zip(lt, ln)) / sum((a - mt) ** 2 for a in lt)
c = math.exp(mn - slope * mt)
ax.loglog(t, [c * x ** slope for x in t], "-", label=f"fit slope {slope:.3f}")
ax.set_xlabel("t")
ax.legend()
save(fig, "decay.png")
"#,
    },
    PlotSpec {
        csv: "ratios.csv",
        script: "plot_ratios.py",
        body: r#"
member = col("member")
ratio = [v for v in col("ratio") if v == v]
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(member, col("ratio"), "o")
if ratio:
    ax.axhline(max(ratio), linestyle="--", label=f"max {max(ratio):.6f}")
    ax.legend()
ax.set_xlabel("ensemble member")
ax.set_ylabel("embedding ratio")
save(fig, "ratios.png")
"#,
    },
];

const PLOT_PREAMBLE: &str = r#"#!/usr/bin/env python3
# Self-contained render of CSV_NAME from this directory. Data-only consumer:
# reads the CSV, writes a PNG next to it.
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(HERE, "CSV_NAME"), newline="") as fh:
    ROWS = list(csv.DictReader(fh))


def col(name):
    return [float(r[name]) for r in ROWS]


def save(fig, name):
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, name), dpi=150)
    print(os.path.join(HERE, name))
"#;

/// Write one plot script per recognized CSV present in `out_dir`. Errors if
/// none are found (nothing to plot means the run outputs are missing).
pub fn emit_plots(out_dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for spec in PLOT_SPECS {
        if !out_dir.join(spec.csv).exists() {
            continue;
        }
        let text = format!(
            "{}{}",
            PLOT_PREAMBLE.replace("CSV_NAME", spec.csv),
            spec.body
        );
        std::fs::write(out_dir.join(spec.script), text)?;
        written.push(spec.script.to_string());
    }
    if written.is_empty() {
        return Err(Error::invalid(
            "out_dir",
            format!(
                "no recognized CSV outputs in {}; run a subcommand first",
                out_dir.display()
            ),
        ));
    }
    Ok(written)
}
