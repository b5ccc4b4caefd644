//! GPF1 snapshots and observable CSV files.
//!
//! GPF1 layout, little-endian throughout:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `GPF1` |
//! | 4 | version (u32, currently 1) |
//! | 8 | n_points (u64) |
//! | 8 | length (f64) |
//! | 8 | time (f64) |
//! | 8 | lambda at that time (f64) |
//! | 16·n | `(re, im)` f64 pairs |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use metagpe::{Complex64, ComplexField, Grid1D, ObservableRecord};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"GPF1";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 40;

pub const OBSERVABLES_HEADER: &str = "t,norm,free_energy,mu_mean,mu_var,dissipation_rate,ground_mode_occ";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub n_points: u64,
    pub length: f64,
    pub time: f64,
    pub lambda_at_time: f64,
}

impl SnapshotHeader {
    pub fn new(grid: &Grid1D, time: f64, lambda_at_time: f64) -> Self {
        Self {
            version: VERSION,
            n_points: grid.n_points() as u64,
            length: grid.length(),
            time,
            lambda_at_time,
        }
    }
}

pub fn encode_snapshot(field: &ComplexField, header: &SnapshotHeader) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + 16 * field.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header.version.to_le_bytes());
    out.extend_from_slice(&header.n_points.to_le_bytes());
    out.extend_from_slice(&header.length.to_le_bytes());
    out.extend_from_slice(&header.time.to_le_bytes());
    out.extend_from_slice(&header.lambda_at_time.to_le_bytes());
    for z in field.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(SnapshotHeader, ComplexField)> {
    let bad = |m: &str| CliError::Format(format!("GPF1: {m}"));
    if bytes.len() < HEADER_BYTES {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let header = SnapshotHeader {
        version: u32_at(4),
        n_points: u64_at(8),
        length: f64_at(16),
        time: f64_at(24),
        lambda_at_time: f64_at(32),
    };
    if header.version != VERSION {
        return Err(bad(&format!("unsupported version {}", header.version)));
    }
    let n = usize::try_from(header.n_points).map_err(|_| bad("n_points too large"))?;
    let expected = n
        .checked_mul(16)
        .and_then(|p| p.checked_add(HEADER_BYTES))
        .ok_or_else(|| bad("n_points too large"))?;
    if bytes.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let grid = Grid1D::new(n, header.length)?;
    let values = (0..n)
        .map(|j| {
            let o = HEADER_BYTES + 16 * j;
            Complex64::new(f64_at(o), f64_at(o + 8))
        })
        .collect();
    Ok((header, ComplexField::new(grid, values)?))
}

pub fn write_snapshot(field: &ComplexField, header: &SnapshotHeader, path: &Path) -> Result<()> {
    std::fs::write(path, encode_snapshot(field, header)).map_err(|e| CliError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, ComplexField)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    decode_snapshot(&bytes)
}

/// One CSV row; `{:e}` prints the shortest exact representation.
pub fn observable_row(r: &ObservableRecord) -> String {
    format!(
        "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
        r.t, r.norm, r.free_energy, r.mu_mean, r.mu_var, r.dissipation_rate, r.ground_mode_occ
    )
}

pub fn write_observables(records: &[ObservableRecord], path: &Path) -> Result<()> {
    let mut w = CsvWriter::create(path, OBSERVABLES_HEADER)?;
    for r in records {
        w.row(&observable_row(r))?;
    }
    w.finish()
}

pub fn read_observables(path: &Path) -> Result<Vec<ObservableRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(OBSERVABLES_HEADER) {
        return Err(CliError::Format(format!("{}: unexpected header", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CliError::Format(format!("{}:{}: {e}", path.display(), i + 2)))?;
            if v.len() != 7 {
                return Err(CliError::Format(format!("{}:{}: expected 7 columns", path.display(), i + 2)));
            }
            Ok(ObservableRecord {
                t: v[0],
                norm: v[1],
                free_energy: v[2],
                mu_mean: v[3],
                mu_var: v[4],
                dissipation_rate: v[5],
                ground_mode_occ: v[6],
            })
        })
        .collect()
}

/// Line-oriented text writer that keeps the path for error messages.
pub struct CsvWriter {
    path: std::path::PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let mut w = Self::open(path)?;
        w.row(header)?;
        Ok(w)
    }

    /// Writer without a header row.
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn row(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}
