//! Diagnostics reduced from sampled populations: return probability, diagonal
//! confinement on the Fock lattice, breathing width, refocusing and the
//! Wannier-Stark level spacing.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{HermitianOperator, SiteIndex2D};
use crate::propagator::Trajectory;

/// Boundary population above which a sample counts as truncated.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-3;

/// Minimum return probability for a local maximum to count as a refocus.
pub const DEFAULT_REFOCUS_THRESHOLD: f64 = 0.8;

/// Anything that exposes site populations per z-sample.
pub trait Populations {
    fn z_samples(&self) -> &[f64];
    fn dim(&self) -> usize;
    fn population(&self, sample: usize, site: usize) -> f64;

    fn sample_count(&self) -> usize {
        self.z_samples().len()
    }
}

impl Populations for Trajectory {
    fn z_samples(&self) -> &[f64] {
        &self.z_samples
    }

    fn dim(&self) -> usize {
        Trajectory::dim(self)
    }

    fn population(&self, sample: usize, site: usize) -> f64 {
        self.states[sample].amplitudes()[site].norm_sqr()
    }
}

/// Populations without phases, e.g. read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrace {
    z_samples: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl PopulationTrace {
    pub fn new(z_samples: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if z_samples.is_empty() || z_samples.len() != rows.len() {
            return Err(Error::invalid(format!(
                "need one population row per z-sample, got {} samples and {} rows",
                z_samples.len(),
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("population rows must share a non-zero length"));
        }
        check_increasing(&z_samples)?;
        Ok(PopulationTrace { z_samples, rows })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        PopulationTrace {
            z_samples: traj.z_samples.clone(),
            rows: traj.states.iter().map(|s| s.populations()).collect(),
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl Populations for PopulationTrace {
    fn z_samples(&self) -> &[f64] {
        &self.z_samples
    }

    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn population(&self, sample: usize, site: usize) -> f64 {
        self.rows[sample][site]
    }
}

fn check_increasing(z: &[f64]) -> Result<()> {
    if z.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("z samples must be strictly increasing"));
    }
    Ok(())
}

/// A scalar diagnostic sampled along z.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub z_samples: Vec<f64>,
    pub values: Vec<f64>,
    pub label: String,
    /// Set when some sample had boundary population above tolerance.
    pub truncated: bool,
    /// Samples whose value is undefined (stored as NaN).
    pub flagged: Vec<usize>,
}

impl ObservableSeries {
    pub fn new(z_samples: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if z_samples.len() != values.len() {
            return Err(Error::invalid(format!(
                "series length mismatch: {} z-samples, {} values",
                z_samples.len(),
                values.len()
            )));
        }
        check_increasing(&z_samples)?;
        Ok(ObservableSeries {
            z_samples,
            values,
            label: label.into(),
            truncated: false,
            flagged: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.finite().reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.finite().reduce(f64::max)
    }

    fn finite(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| v.is_finite())
    }

    /// Position and value of the global maximum, refined by a parabola through
    /// the neighbouring samples when the maximum is interior.
    pub fn refined_argmax(&self) -> Option<(f64, f64)> {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        if i == 0 || i + 1 == self.len() || !self.values[i - 1].is_finite() || !self.values[i + 1].is_finite() {
            return Some((self.z_samples[i], self.values[i]));
        }
        Some(parabolic_peak(
            [self.z_samples[i - 1], self.z_samples[i], self.z_samples[i + 1]],
            [self.values[i - 1], self.values[i], self.values[i + 1]],
        ))
    }

    /// Marks the series truncated if any edge-population sample exceeds `tolerance`.
    pub fn with_truncation_guard(mut self, edge: &ObservableSeries, tolerance: f64) -> Self {
        self.truncated |= edge.values.iter().any(|&p| p > tolerance);
        self
    }
}

/// Vertex of the parabola through three points; falls back to the middle point
/// when the points are not strictly concave.
fn parabolic_peak(z: [f64; 3], v: [f64; 3]) -> (f64, f64) {
    let (d0, d2) = (z[0] - z[1], z[2] - z[1]);
    // v(t) = v1 + b·t + a·t², t = z - z1
    let s0 = (v[0] - v[1]) / d0;
    let s2 = (v[2] - v[1]) / d2;
    let a = (s2 - s0) / (d2 - d0);
    let b = s0 - a * d0;
    if !(a < 0.0) {
        return (z[1], v[1]);
    }
    let t = (-b / (2.0 * a)).clamp(d0, d2);
    (z[1] + t, v[1] + b * t + a * t * t)
}

/// Lattice layout a trajectory lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// One-dimensional chain, dimension = number of sites.
    Linear,
    /// Two-boson Fock lattice, observed along its main diagonal.
    SquareDiagonal { n_sites: usize },
}

impl Geometry {
    fn check<P: Populations + ?Sized>(&self, pops: &P) -> Result<()> {
        match *self {
            Geometry::Linear => Ok(()),
            Geometry::SquareDiagonal { n_sites } if n_sites * n_sites == pops.dim() => Ok(()),
            Geometry::SquareDiagonal { n_sites } => Err(Error::invalid(format!(
                "dimension {} is not {n_sites}² for a square lattice",
                pops.dim()
            ))),
        }
    }

    fn is_boundary(&self, site: usize, dim: usize) -> bool {
        match *self {
            Geometry::Linear => site == 0 || site + 1 == dim,
            Geometry::SquareDiagonal { n_sites } => {
                let s = SiteIndex2D::unflatten(site, n_sites);
                s.n == 0 || s.m == 0 || s.n + 1 == n_sites || s.m + 1 == n_sites
            }
        }
    }
}

/// Site with the largest initial population.
pub fn excitation_site<P: Populations + ?Sized>(pops: &P) -> usize {
    (0..pops.dim())
        .max_by(|&a, &b| pops.population(0, a).total_cmp(&pops.population(0, b)).then(b.cmp(&a)))
        .unwrap_or(0)
}

/// `|ψ_site|²` per sample, for any population source.
pub fn site_population<P: Populations + ?Sized>(pops: &P, site: usize) -> Result<ObservableSeries> {
    if site >= pops.dim() {
        return Err(Error::invalid(format!("site {site} outside dimension {}", pops.dim())));
    }
    let values = (0..pops.sample_count())
        .map(|k| pops.population(k, site).clamp(0.0, 1.0))
        .collect();
    ObservableSeries::new(pops.z_samples().to_vec(), values, format!("return_probability[{site}]"))
}

/// Total population on the main diagonal `n = m`.
pub fn diagonal_confinement<P: Populations + ?Sized>(pops: &P, n_sites: usize) -> Result<ObservableSeries> {
    if n_sites * n_sites != pops.dim() {
        return Err(Error::invalid(format!(
            "dimension {} is not {n_sites}² for a square lattice",
            pops.dim()
        )));
    }
    let values = (0..pops.sample_count())
        .map(|k| {
            (0..n_sites)
                .map(|n| pops.population(k, n * n_sites + n))
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect();
    ObservableSeries::new(pops.z_samples().to_vec(), values, "diagonal_confinement")
}

/// Population of the main-diagonal sites `|c(n,n)|²`, one row per sample.
pub fn diagonal_populations<P: Populations + ?Sized>(pops: &P, n_sites: usize) -> Result<Vec<Vec<f64>>> {
    Geometry::SquareDiagonal { n_sites }.check(pops)?;
    Ok((0..pops.sample_count())
        .map(|k| (0..n_sites).map(|n| pops.population(k, n * n_sites + n)).collect())
        .collect())
}

/// RMS displacement from the excited site, in lattice units.
///
/// On the Fock lattice the displacement is taken along the main diagonal and
/// the diagonal populations are renormalized by their sum; samples with no
/// diagonal population are flagged and stored as NaN.
pub fn breathing_width<P: Populations + ?Sized>(pops: &P, geometry: Geometry) -> Result<ObservableSeries> {
    geometry.check(pops)?;
    let origin = excitation_site(pops);
    let mut flagged = Vec::new();
    let values = match geometry {
        Geometry::Linear => (0..pops.sample_count())
            .map(|k| {
                let (mut norm, mut second) = (0.0, 0.0);
                for site in 0..pops.dim() {
                    let p = pops.population(k, site);
                    let d = site as f64 - origin as f64;
                    norm += p;
                    second += p * d * d;
                }
                (second / norm).sqrt()
            })
            .collect::<Vec<_>>(),
        Geometry::SquareDiagonal { n_sites } => {
            let origin = SiteIndex2D::unflatten(origin, n_sites).n as f64;
            (0..pops.sample_count())
                .map(|k| {
                    let (mut norm, mut second) = (0.0, 0.0);
                    for n in 0..n_sites {
                        let p = pops.population(k, n * n_sites + n);
                        let d = n as f64 - origin;
                        norm += p;
                        second += p * d * d;
                    }
                    if norm > f64::MIN_POSITIVE {
                        (second / norm).sqrt()
                    } else {
                        flagged.push(k);
                        f64::NAN
                    }
                })
                .collect()
        }
    };
    let mut series = ObservableSeries::new(pops.z_samples().to_vec(), values, "breathing_width")?;
    series.flagged = flagged;
    Ok(series)
}

/// Inverse participation `1/Σp²`, the number of effectively occupied sites.
pub fn participation_ratio<P: Populations + ?Sized>(pops: &P) -> Result<ObservableSeries> {
    let values = (0..pops.sample_count())
        .map(|k| {
            let (s1, s2) = (0..pops.dim()).fold((0.0, 0.0), |(s1, s2), i| {
                let p = pops.population(k, i);
                (s1 + p, s2 + p * p)
            });
            s1 * s1 / s2
        })
        .collect();
    ObservableSeries::new(pops.z_samples().to_vec(), values, "participation_ratio")
}

/// Population on the outermost sites of the lattice.
pub fn edge_population<P: Populations + ?Sized>(pops: &P, geometry: Geometry) -> Result<ObservableSeries> {
    geometry.check(pops)?;
    let dim = pops.dim();
    let boundary: Vec<usize> = (0..dim).filter(|&s| geometry.is_boundary(s, dim)).collect();
    let values = (0..pops.sample_count())
        .map(|k| boundary.iter().map(|&s| pops.population(k, s)).sum())
        .collect();
    ObservableSeries::new(pops.z_samples().to_vec(), values, "edge_population")
}

/// Refocusing events of a return-probability series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefocusReport {
    pub refocus_positions: Vec<f64>,
    pub peak_values: Vec<f64>,
    pub period_estimate: Option<f64>,
    pub frequency_estimate: Option<f64>,
}

impl RefocusReport {
    fn from_period(period: Option<f64>) -> Self {
        RefocusReport {
            refocus_positions: Vec::new(),
            peak_values: Vec::new(),
            period_estimate: period,
            frequency_estimate: period.map(|p| 2.0 * PI / p),
        }
    }

    /// Multiplies every length by `factor` (change of z-units).
    pub fn rescaled(&self, factor: f64) -> Self {
        let period = self.period_estimate.map(|p| p * factor);
        RefocusReport {
            refocus_positions: self.refocus_positions.iter().map(|z| z * factor).collect(),
            peak_values: self.peak_values.clone(),
            period_estimate: period,
            frequency_estimate: period.map(|p| 2.0 * PI / p),
        }
    }
}

/// Interior local maxima of a return-probability series at or above `threshold`,
/// each refined by parabolic interpolation.
///
/// The period is the mean gap between consecutive refocus positions; the first
/// sample counts as a refocus when it is above threshold (the launch itself).
/// Truncated series report positions but no period.
pub fn find_refocus(series: &ObservableSeries, threshold: f64) -> Result<RefocusReport> {
    if series.is_empty() {
        return Err(Error::Analysis("cannot find refocus in an empty series".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let (z, v) = (&series.z_samples, &series.values);
    let mut positions: Vec<f64> = Vec::new();
    let mut peaks = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] >= threshold && v[i] > v[i - 1] && v[i] >= v[i + 1] {
            let (zp, vp) = parabolic_peak([z[i - 1], z[i], z[i + 1]], [v[i - 1], v[i], v[i + 1]]);
            if positions.last().is_some_and(|&last| zp <= last) {
                continue;
            }
            positions.push(zp);
            peaks.push(vp.clamp(0.0, 1.0));
        }
    }

    let mut marks: Vec<f64> = Vec::with_capacity(positions.len() + 1);
    if v[0] >= threshold {
        marks.push(z[0]);
    }
    marks.extend(&positions);
    let period = if marks.len() >= 2 && !series.truncated {
        Some((marks[marks.len() - 1] - marks[0]) / (marks.len() - 1) as f64)
    } else {
        None
    };

    Ok(RefocusReport {
        refocus_positions: positions,
        peak_values: peaks,
        ..RefocusReport::from_period(period)
    })
}

/// Period estimate for a breathing mode that does not refocus within the sample:
/// twice the position of maximum width.
pub fn period_from_width_maximum(width: &ObservableSeries) -> Result<RefocusReport> {
    let (z_max, _) = width
        .refined_argmax()
        .ok_or_else(|| Error::Analysis("width series has no finite samples".into()))?;
    let period = (!width.truncated && z_max > 0.0).then_some(2.0 * z_max);
    Ok(RefocusReport::from_period(period))
}

/// Ratio of the pair and single-particle oscillation frequencies.
pub fn frequency_ratio(pair: &RefocusReport, single: &RefocusReport) -> Result<f64> {
    match (pair.frequency_estimate, single.frequency_estimate) {
        (Some(p), Some(s)) if s > 0.0 => Ok(p / s),
        (None, _) => Err(Error::Analysis("pair report has no frequency estimate".into())),
        _ => Err(Error::Analysis(
            "single-particle report has no frequency estimate".into(),
        )),
    }
}

/// Mean and standard deviation of consecutive eigenvalue gaps in the central
/// `interior_fraction` of the spectrum.
pub fn wannier_stark_spacing(h: &HermitianOperator, interior_fraction: f64) -> Result<(f64, f64)> {
    if !(interior_fraction > 0.0 && interior_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "interior_fraction must lie in (0, 1], got {interior_fraction}"
        )));
    }
    let values = h.eigenvalues();
    let count = ((values.len() as f64 * interior_fraction).round() as usize).min(values.len());
    if count < 3 {
        return Err(Error::Analysis(format!(
            "only {count} interior eigenvalues; need at least 3"
        )));
    }
    let start = (values.len() - count) / 2;
    let gaps: Vec<f64> = values[start..start + count].windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    Ok((mean, var.sqrt()))
}
