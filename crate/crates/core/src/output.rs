//! CSV trajectory and observable files.
//!
//! Trajectories on a chain are written wide, one row per z-sample:
//! `z_cm,p0,…,p{N-1}`. Fock-lattice trajectories are written long, one row per
//! site and sample: `z_cm,n,m,probability`. Probabilities are `|amplitude|²`
//! clamped to `[0, 1]`; z is in cm. Files are UTF-8 with LF line endings.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SiteIndex2D;
use crate::observables::{Geometry, ObservableSeries, PopulationTrace, Populations};

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn probability(p: f64) -> String {
    p.clamp(0.0, 1.0).to_string()
}

/// Writes populations in the layout selected by `geometry`.
pub fn write_trajectory_csv<P: Populations + ?Sized>(pops: &P, geometry: Geometry, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let z = pops.z_samples();
    match geometry {
        Geometry::Linear => {
            let mut header = vec!["z_cm".to_string()];
            header.extend((0..pops.dim()).map(|i| format!("p{i}")));
            w.write_record(&header).map_err(|e| csv_err(path, e))?;
            for (k, zk) in z.iter().enumerate() {
                let mut row = Vec::with_capacity(pops.dim() + 1);
                row.push(zk.to_string());
                row.extend((0..pops.dim()).map(|i| probability(pops.population(k, i))));
                w.write_record(&row).map_err(|e| csv_err(path, e))?;
            }
        }
        Geometry::SquareDiagonal { n_sites } => {
            if n_sites * n_sites != pops.dim() {
                return Err(Error::invalid(format!("dimension {} is not {n_sites}²", pops.dim())));
            }
            w.write_record(["z_cm", "n", "m", "probability"])
                .map_err(|e| csv_err(path, e))?;
            for (k, zk) in z.iter().enumerate() {
                let zs = zk.to_string();
                for site in 0..pops.dim() {
                    let s = SiteIndex2D::unflatten(site, n_sites);
                    w.write_record([
                        zs.as_str(),
                        &s.n.to_string(),
                        &s.m.to_string(),
                        &probability(pops.population(k, site)),
                    ])
                    .map_err(|e| csv_err(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes several series sharing one z-grid as columns `z_cm,<label>…`.
pub fn write_observables_csv(series: &[&ObservableSeries], path: &Path) -> Result<()> {
    let Some(first) = series.first() else {
        return Err(Error::invalid("no observables to write"));
    };
    if series.iter().any(|s| s.z_samples != first.z_samples) {
        return Err(Error::invalid("observable series must share a z-grid"));
    }
    let mut w = create(path)?;
    let mut header = vec!["z_cm".to_string()];
    header.extend(series.iter().map(|s| s.label.clone()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, z) in first.z_samples.iter().enumerate() {
        let mut row = vec![z.to_string()];
        row.extend(series.iter().map(|s| s.values[k].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: u64, field: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: cannot parse {field:?}"),
    })
}

/// Reads a trajectory CSV written by [`write_trajectory_csv`], detecting the layout
/// from its header.
pub fn read_trajectory_csv(path: &Path) -> Result<(PopulationTrace, Geometry)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };

    if header == ["z_cm", "n", "m", "probability"] {
        let mut z: Vec<f64> = Vec::new();
        let mut cells: Vec<Vec<(usize, usize, f64)>> = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let zk: f64 = parse_num(path, line, &rec[0])?;
            let cell = (
                parse_num(path, line, &rec[1])?,
                parse_num(path, line, &rec[2])?,
                parse_num(path, line, &rec[3])?,
            );
            if z.last() != Some(&zk) {
                z.push(zk);
                cells.push(Vec::new());
            }
            cells.last_mut().unwrap().push(cell);
        }
        let n_sites = cells
            .first()
            .map(|c| (c.len() as f64).sqrt().round() as usize)
            .ok_or_else(|| bad("no data rows".into()))?;
        let mut rows = Vec::with_capacity(cells.len());
        for (k, sample) in cells.into_iter().enumerate() {
            if sample.len() != n_sites * n_sites {
                return Err(bad(format!(
                    "sample {k} has {} sites, expected {}",
                    sample.len(),
                    n_sites * n_sites
                )));
            }
            let mut row = vec![0.0; n_sites * n_sites];
            for (n, m, p) in sample {
                if n >= n_sites || m >= n_sites {
                    return Err(bad(format!("site ({n}, {m}) outside a {n_sites}×{n_sites} lattice")));
                }
                row[SiteIndex2D::new(n, m).flatten(n_sites)] = p;
            }
            rows.push(row);
        }
        let trace = PopulationTrace::new(z, rows).map_err(|e| bad(e.to_string()))?;
        Ok((trace, Geometry::SquareDiagonal { n_sites }))
    } else if header.first().map(String::as_str) == Some("z_cm")
        && header.len() >= 3
        && header[1..].iter().enumerate().all(|(i, h)| *h == format!("p{i}"))
    {
        let mut z = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            z.push(parse_num(path, line, &rec[0])?);
            rows.push(
                rec.iter()
                    .skip(1)
                    .map(|f| parse_num(path, line, f))
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        let trace = PopulationTrace::new(z, rows).map_err(|e| bad(e.to_string()))?;
        Ok((trace, Geometry::Linear))
    } else {
        Err(bad(format!("unrecognized trajectory header {header:?}")))
    }
}
