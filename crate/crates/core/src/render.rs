//! Grayscale heatmaps as binary 16-bit PGM (P5, big-endian samples).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SiteIndex2D;
use crate::observables::{Geometry, Populations};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatmapAxis {
    /// `N×N` frame of the Fock lattice at the sample nearest to `z_cm`
    /// (rows n, columns m).
    FullSlice { z_cm: f64 },
    /// Main-diagonal populations, rows n, columns z.
    DiagonalVsZ,
    /// Chain populations, rows site, columns z.
    LinearVsZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Global,
    #[default]
    PerColumn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage16 {
    pub width: usize,
    pub height: usize,
    /// Row-major samples.
    pub pixels: Vec<u16>,
}

impl GrayImage16 {
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 2);
        for p in &self.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Renders populations as an image whose intensity is the probability divided
/// by the maximum of the whole image (`Global`) or of its column (`PerColumn`).
pub fn render_heatmap<P: Populations + ?Sized>(
    pops: &P,
    geometry: Geometry,
    axis: HeatmapAxis,
    normalization: Normalization,
) -> Result<GrayImage16> {
    if pops.sample_count() == 0 {
        return Err(Error::invalid("nothing to render"));
    }
    // values[row][col]
    let values: Vec<Vec<f64>> = match (axis, geometry) {
        (HeatmapAxis::LinearVsZ, Geometry::Linear) => (0..pops.dim())
            .map(|site| (0..pops.sample_count()).map(|k| pops.population(k, site)).collect())
            .collect(),
        (HeatmapAxis::DiagonalVsZ, Geometry::SquareDiagonal { n_sites }) => (0..n_sites)
            .map(|n| {
                let site = SiteIndex2D::new(n, n).flatten(n_sites);
                (0..pops.sample_count()).map(|k| pops.population(k, site)).collect()
            })
            .collect(),
        (HeatmapAxis::FullSlice { z_cm }, Geometry::SquareDiagonal { n_sites }) => {
            let k = nearest_sample(pops.z_samples(), z_cm);
            (0..n_sites)
                .map(|n| {
                    (0..n_sites)
                        .map(|m| pops.population(k, SiteIndex2D::new(n, m).flatten(n_sites)))
                        .collect()
                })
                .collect()
        }
        (axis, geometry) => {
            return Err(Error::invalid(format!(
                "axis {axis:?} is incompatible with geometry {geometry:?}"
            )))
        }
    };
    if let Geometry::SquareDiagonal { n_sites } = geometry {
        if n_sites * n_sites != pops.dim() {
            return Err(Error::invalid(format!("dimension {} is not {n_sites}²", pops.dim())));
        }
    }

    let height = values.len();
    let width = values[0].len();
    let scale: Vec<f64> = match normalization {
        Normalization::Global => {
            let max = values.iter().flatten().copied().fold(0.0, f64::max);
            vec![max; width]
        }
        Normalization::PerColumn => (0..width)
            .map(|c| values.iter().map(|row| row[c]).fold(0.0, f64::max))
            .collect(),
    };
    let mut pixels = Vec::with_capacity(width * height);
    for row in &values {
        for (c, &v) in row.iter().enumerate() {
            let level = if scale[c] > 0.0 {
                (v / scale[c]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            pixels.push((level * 65535.0).round() as u16);
        }
    }
    Ok(GrayImage16 { width, height, pixels })
}

fn nearest_sample(z: &[f64], target: f64) -> usize {
    z.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map_or(0, |(k, _)| k)
}
