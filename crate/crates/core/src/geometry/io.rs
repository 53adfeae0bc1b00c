//! Dataset file formats: CSV with a `# dim=<d> radius=<L>` comment header
//! (one point per row), and an equivalent JSON form.

use super::Dataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    dim: usize,
    radius: f64,
    points: Vec<Vec<f64>>,
}

pub fn write_dataset_csv<W: Write>(w: &mut W, data: &Dataset) -> Result<()> {
    writeln!(w, "# dim={} radius={}", data.dim(), data.radius())?;
    for p in data.iter_points() {
        let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_dataset_csv<R: Read>(r: R) -> Result<Dataset> {
    let reader = BufReader::new(r);
    let mut dim: Option<usize> = None;
    let mut radius: Option<f64> = None;
    let mut flat: Vec<f64> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some(v) = tok.strip_prefix("dim=") {
                    dim = Some(v.parse().map_err(|_| Error::Config {
                        line: lineno + 1,
                        msg: format!("bad dim value {v:?}"),
                    })?);
                } else if let Some(v) = tok.strip_prefix("radius=") {
                    radius = Some(v.parse().map_err(|_| Error::Config {
                        line: lineno + 1,
                        msg: format!("bad radius value {v:?}"),
                    })?);
                }
            }
            continue;
        }
        let d = dim.ok_or(Error::Config {
            line: lineno + 1,
            msg: "data row before `# dim=.. radius=..` header".into(),
        })?;
        let mut count = 0usize;
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| Error::Config {
                line: lineno + 1,
                msg: format!("bad number {tok:?}"),
            })?;
            flat.push(v);
            count += 1;
        }
        if count != d {
            return Err(Error::Config {
                line: lineno + 1,
                msg: format!("expected {d} columns, found {count}"),
            });
        }
    }
    let dim = dim.ok_or(Error::Config {
        line: 0,
        msg: "missing `# dim=.. radius=..` header".into(),
    })?;
    let radius = radius.ok_or(Error::Config {
        line: 0,
        msg: "missing radius in header".into(),
    })?;
    Dataset::from_flat(flat, dim, radius)
}

pub fn write_dataset_json<W: Write>(w: &mut W, data: &Dataset) -> Result<()> {
    let j = DatasetJson {
        dim: data.dim(),
        radius: data.radius(),
        points: data.iter_points().map(|p| p.to_vec()).collect(),
    };
    serde_json::to_writer(w, &j)?;
    Ok(())
}

pub fn read_dataset_json<R: Read>(r: R) -> Result<Dataset> {
    let j: DatasetJson = serde_json::from_reader(r)?;
    Dataset::new(j.points, j.dim, j.radius)
}
