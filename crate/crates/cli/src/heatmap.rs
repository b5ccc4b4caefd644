//! Density heatmaps: a lossless CSV matrix (rows = times, columns = grid
//! points), an 8-bit P5 graymap and a JSON sidecar with the gray mapping.

use std::path::{Path, PathBuf};

use metagpe::{density, ComplexField};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::CsvWriter;

/// Gray level used for every pixel when all densities are equal.
pub const DEGENERATE_GRAY: u8 = 128;

#[derive(Clone, Debug, Serialize)]
pub struct HeatmapInfo {
    pub rows: usize,
    pub columns: usize,
    pub times: Vec<f64>,
    pub spacing: f64,
    /// Density mapped to gray 0.
    pub density_min: f64,
    /// Density mapped to gray 255.
    pub density_max: f64,
    pub mapping: String,
    /// File names, relative to the sidecar.
    pub csv: PathBuf,
    pub image: PathBuf,
}

/// Rounded linear map of `rho` onto 0..=255.
pub fn gray_level(rho: f64, min: f64, max: f64) -> u8 {
    if !(max > min) {
        return DEGENERATE_GRAY;
    }
    (255.0 * (rho - min) / (max - min)).round().clamp(0.0, 255.0) as u8
}

pub fn pgm_bytes(rows: &[Vec<f64>], min: f64, max: f64) -> Vec<u8> {
    let width = rows.first().map_or(0, Vec::len);
    let mut out = format!("P5\n{} {}\n255\n", width, rows.len()).into_bytes();
    for row in rows {
        out.extend(row.iter().map(|&r| gray_level(r, min, max)));
    }
    out
}

/// Writes `<stem>.csv`, `<stem>.pgm` and `<stem>.json` under `dir`.
pub fn emit_heatmap(snapshots: &[(f64, ComplexField)], dir: &Path, stem: &str) -> Result<HeatmapInfo> {
    if snapshots.len() < 2 {
        return Err(CliError::Format(format!(
            "heatmap needs at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    let grid = snapshots[0].1.grid().clone();
    if snapshots.iter().any(|(_, f)| f.grid() != &grid) {
        return Err(CliError::Format("heatmap snapshots live on different grids".into()));
    }
    let rows: Vec<Vec<f64>> = snapshots.iter().map(|(_, f)| density(f)).collect();
    let (min, max) = rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));

    let csv = PathBuf::from(format!("{stem}.csv"));
    let image = PathBuf::from(format!("{stem}.pgm"));
    let mut w = CsvWriter::open(&dir.join(&csv))?;
    for row in &rows {
        let line: Vec<String> = row.iter().map(|r| format!("{r:e}")).collect();
        w.row(&line.join(","))?;
    }
    w.finish()?;

    let image_path = dir.join(&image);
    std::fs::write(&image_path, pgm_bytes(&rows, min, max)).map_err(|e| CliError::io(&image_path, e))?;

    let info = HeatmapInfo {
        rows: rows.len(),
        columns: grid.n_points(),
        times: snapshots.iter().map(|(t, _)| *t).collect(),
        spacing: grid.spacing(),
        density_min: min,
        density_max: max,
        mapping: format!(
            "gray = round(255 (rho - min) / (max - min)); all pixels {DEGENERATE_GRAY} when max = min"
        ),
        csv,
        image,
    };
    let sidecar = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&info).expect("serializable");
    std::fs::write(&sidecar, json).map_err(|e| CliError::io(&sidecar, e))?;
    Ok(info)
}

/// Reads the density matrix back from a heatmap CSV.
pub fn read_heatmap_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .map(|l| {
            l.split(',')
                .map(|v| v.parse().map_err(|e| CliError::Format(format!("{}: {e}", path.display()))))
                .collect()
        })
        .collect()
}
