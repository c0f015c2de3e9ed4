//! CSV tables (`t, color, c0, c1, ...`) for paths and potentials, JSON for reports.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::PotentialGrid;
use crate::profile::{ColoredProfile, PathGrid};
use crate::torus::Torus;

type Rows = Vec<(f64, usize, Vec<f64>)>;

fn write_rows<W: Write>(writer: W, n_nodes: usize, rows: impl Iterator<Item = (f64, usize, Vec<f64>)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string(), "color".to_string()];
    header.extend((0..n_nodes).map(|c| format!("c{c}")));
    w.write_record(&header)?;
    for (t, i, vals) in rows {
        let mut rec = vec![format!("{t}"), i.to_string()];
        rec.extend(vals.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read>(reader: R) -> Result<Rows> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("bad number {s:?}: {e}")));
        let t = parse(&rec[0])?;
        let i = rec[1].trim().parse::<usize>().map_err(|e| Error::Invalid(format!("bad color: {e}")))?;
        let vals = rec.iter().skip(2).map(parse).collect::<Result<Vec<_>>>()?;
        rows.push((t, i, vals));
    }
    Ok(rows)
}

fn grid_for(dim: usize, n_nodes: usize) -> Result<Torus> {
    let side = (n_nodes as f64).powf(1.0 / dim as f64).round() as usize;
    let grid = Torus::new(dim, side);
    if grid.len() != n_nodes {
        return Err(Error::Mismatch(format!("{n_nodes} values per row is not a {dim}-dimensional grid")));
    }
    Ok(grid)
}

/// Groups rows by time, each group holding every color in order.
fn group(rows: Rows) -> Result<(Vec<f64>, Vec<Vec<Vec<f64>>>)> {
    let mut times: Vec<f64> = Vec::new();
    let mut slices: Vec<Vec<Vec<f64>>> = Vec::new();
    for (t, i, vals) in rows {
        if times.last() != Some(&t) {
            times.push(t);
            slices.push(Vec::new());
        }
        let slice = slices.last_mut().unwrap();
        if i != slice.len() {
            return Err(Error::Invalid(format!("colors out of order at t = {t}")));
        }
        slice.push(vals);
    }
    Ok((times, slices))
}

pub fn write_path_csv<W: Write>(path: &PathGrid, writer: W) -> Result<()> {
    let rows = path
        .times
        .iter()
        .zip(&path.profiles)
        .flat_map(|(&t, p)| p.values.iter().enumerate().map(move |(i, v)| (t, i, v.clone())));
    write_rows(writer, path.grid().len(), rows)
}

pub fn read_path_csv<R: Read>(reader: R, dim: usize) -> Result<PathGrid> {
    let (times, slices) = group(read_rows(reader)?)?;
    let n = slices.first().and_then(|s| s.first()).map(|v| v.len()).ok_or_else(|| Error::Invalid("empty path table".into()))?;
    let grid = grid_for(dim, n)?;
    let profiles = slices.into_iter().map(|s| ColoredProfile::new(grid, s)).collect::<Result<Vec<_>>>()?;
    PathGrid::new(times, profiles)
}

pub fn write_potential_csv<W: Write>(v: &PotentialGrid, writer: W) -> Result<()> {
    let rows = v
        .times
        .iter()
        .zip(&v.values)
        .flat_map(|(&t, s)| s.iter().enumerate().map(move |(i, vals)| (t, i, vals.clone())));
    write_rows(writer, v.grid.len(), rows)
}

pub fn read_potential_csv<R: Read>(reader: R, dim: usize) -> Result<PotentialGrid> {
    let (times, slices) = group(read_rows(reader)?)?;
    let n = slices.first().and_then(|s| s.first()).map(|v| v.len()).ok_or_else(|| Error::Invalid("empty potential table".into()))?;
    PotentialGrid::new(times, grid_for(dim, n)?, slices)
}

pub fn save_path(path: &PathGrid, file: impl AsRef<Path>) -> Result<()> {
    write_path_csv(path, BufWriter::new(File::create(file)?))
}

pub fn load_path(file: impl AsRef<Path>, dim: usize) -> Result<PathGrid> {
    read_path_csv(File::open(file)?, dim)
}

pub fn save_potential(v: &PotentialGrid, file: impl AsRef<Path>) -> Result<()> {
    write_potential_csv(v, BufWriter::new(File::create(file)?))
}

pub fn load_potential(file: impl AsRef<Path>, dim: usize) -> Result<PotentialGrid> {
    read_potential_csv(File::open(file)?, dim)
}

pub fn save_json<T: Serialize>(value: &T, file: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(file)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}
