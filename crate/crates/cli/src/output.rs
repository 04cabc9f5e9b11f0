//! CSV emission and ingestion.
//!
//! All files open with `#`-prefixed header comments carrying the model hash
//! and grid parameters, then one header row and full-precision data rows
//! (shortest round-trip float formatting, so re-ingestion is lossless).
//! Writes are atomic: a temp file in the target directory is renamed over
//! the destination.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sizestruct::delay_engine::{HistoryState, PsiTail};
use sizestruct::numerics::{Grid1D, LocatedRoot, SampledFn};
use sizestruct::pde_engine::DensityState;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{path}:{line}: {why}")]
    Malformed { path: PathBuf, line: usize, why: String },
}

pub struct Stamp {
    pub model_hash: u64,
    pub grid_note: String,
}

impl Stamp {
    fn header(&self, kind: &str) -> String {
        format!(
            "# sizestruct {kind}\n# model_hash = {:016x}\n# {}\n",
            self.model_hash, self.grid_note
        )
    }
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, OutputError> {
    std::fs::create_dir_all(dir).map_err(|e| OutputError::Io(dir.to_path_buf(), e))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| OutputError::Io(tmp.clone(), e))?;
    std::fs::rename(&tmp, &target).map_err(|e| OutputError::Io(target.clone(), e))?;
    Ok(target)
}

pub fn write_density(
    dir: &Path,
    name: &str,
    state: &DensityState,
    stamp: &Stamp,
) -> Result<PathBuf, OutputError> {
    let mut out = stamp.header("density");
    let _ = writeln!(out, "# s0 = {}", state.s0);
    let _ = writeln!(out, "# kappa0 = {}", state.kappa0);
    let _ = writeln!(out, "# tail_mass = {}", state.tail_mass);
    out.push_str("x,n\n");
    for (x, n) in state.x_grid.nodes().iter().zip(&state.n_values) {
        let _ = writeln!(out, "{x},{n}");
    }
    write_atomic(dir, name, &out)
}

pub fn write_history(
    dir: &Path,
    name: &str,
    h: &HistoryState,
    stamp: &Stamp,
) -> Result<PathBuf, OutputError> {
    let mut out = stamp.header("history");
    let _ = writeln!(out, "# mu0 = {}", h.mu0);
    let _ = writeln!(out, "# phi_tail_norm = {}", h.phi_tail_norm);
    let _ = writeln!(
        out,
        "# psi_tail = {}",
        if h.psi_tail_mode == PsiTail::Decaying { "decaying" } else { "constant" }
    );
    out.push_str("theta,phi,psi\n");
    for ((a, phi), psi) in h.a_grid.nodes().iter().zip(&h.phi_values).zip(&h.psi_values) {
        let _ = writeln!(out, "{},{phi},{psi}", -a);
    }
    write_atomic(dir, name, &out)
}

pub fn write_trajectory(
    dir: &Path,
    name: &str,
    s: &SampledFn,
    b: &SampledFn,
    stamp: &Stamp,
) -> Result<PathBuf, OutputError> {
    let mut out = stamp.header("trajectory");
    out.push_str("t,S,b\n");
    for (i, t) in s.ts.iter().enumerate() {
        let _ = writeln!(out, "{t},{},{}", s.vs[i], b.vs[i]);
    }
    write_atomic(dir, name, &out)
}

pub fn write_spectrum(
    dir: &Path,
    name: &str,
    roots: &[LocatedRoot],
    notes: &[String],
    stamp: &Stamp,
) -> Result<PathBuf, OutputError> {
    let mut out = stamp.header("spectrum");
    for note in notes {
        let _ = writeln!(out, "# {note}");
    }
    out.push_str("re_lambda,im_lambda,residual\n");
    let mut sorted: Vec<&LocatedRoot> = roots.iter().collect();
    sorted.sort_by(|a, b| {
        (b.z.re, b.z.im)
            .partial_cmp(&(a.z.re, a.z.im))
            .expect("root coordinates are finite")
    });
    for r in sorted {
        for _ in 0..r.multiplicity {
            let _ = writeln!(out, "{},{},{}", r.z.re, r.z.im, r.residual);
        }
    }
    write_atomic(dir, name, &out)
}

pub fn write_report(dir: &Path, name: &str, body: &str) -> Result<PathBuf, OutputError> {
    write_atomic(dir, name, body)
}

fn parse_rows(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, OutputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| OutputError::Io(path.to_path_buf(), e))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true; // column-name row
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(OutputError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                why: format!("expected {columns} columns, got {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(columns);
        for f in fields {
            row.push(f.trim().parse().map_err(|_| OutputError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                why: format!("`{f}` is not a number"),
            })?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Re-ingest a density CSV (x, n). The weight and tail metadata are
/// re-derived by the caller.
pub fn read_density(
    path: &Path,
    s0: f64,
    kappa0: f64,
) -> Result<DensityState, OutputError> {
    let rows = parse_rows(path, 2)?;
    let nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let grid = Grid1D::new(nodes, kappa0).map_err(|e| OutputError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        why: e.to_string(),
    })?;
    DensityState::new(grid, values, s0, kappa0, 0.0).map_err(|e| OutputError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        why: e.to_string(),
    })
}

/// Re-ingest a history CSV (theta, phi, psi); rows may be in either time or
/// age order.
pub fn read_history(
    path: &Path,
    mu0: f64,
    decaying_tail: bool,
) -> Result<HistoryState, OutputError> {
    let mut rows = parse_rows(path, 3)?;
    rows.sort_by(|a, b| b[0].partial_cmp(&a[0]).expect("finite theta"));
    let ages: Vec<f64> = rows.iter().map(|r| -r[0]).collect();
    let phi: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let psi: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let grid = Grid1D::new(ages, mu0).map_err(|e| OutputError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        why: e.to_string(),
    })?;
    HistoryState::new(
        grid,
        phi,
        psi,
        mu0,
        0.0,
        if decaying_tail { PsiTail::Decaying } else { PsiTail::ConstantExtension },
    )
    .map_err(|e| OutputError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        why: e.to_string(),
    })
}
