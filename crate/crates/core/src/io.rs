//! NSF1 field files: the magic line `NSF1`, one line of JSON header, then
//! little-endian `f64` samples in (component, time, z, y, x) order.
//!
//! The header also carries the explicit `times` so that custom and dilated
//! ladders round-trip bit for bit. Spatial fields are stored with `n_time = 1`
//! and `t_min = t_max = 0`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, SpatialField};
use crate::grid::{Grid, SpaceGrid, TimeSpacing};

const MAGIC: &str = "NSF1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub dim: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n_space: usize,
    pub n_time: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub spacing: TimeSpacing,
    pub components: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

impl Header {
    fn for_grid(grid: &Grid, components: usize) -> Self {
        let space = grid.space();
        Self {
            dim: space.dim,
            length: space.length,
            n_space: space.n,
            n_time: grid.n_time(),
            t_min: grid.t_min(),
            t_max: grid.t_max(),
            spacing: grid.spacing(),
            components,
            times: Some(grid.times().to_vec()),
        }
    }

    fn for_space(space: SpaceGrid, components: usize) -> Self {
        Self {
            dim: space.dim,
            length: space.length,
            n_space: space.n,
            n_time: 1,
            t_min: 0.0,
            t_max: 0.0,
            spacing: TimeSpacing::Uniform,
            components,
            times: None,
        }
    }

    fn space(&self) -> Result<SpaceGrid> {
        SpaceGrid::new(self.dim, self.length, self.n_space)
    }

    fn grid(&self) -> Result<Grid> {
        let space = self.space()?;
        match &self.times {
            Some(times) => {
                if times.len() != self.n_time {
                    return Err(Error::Format(format!(
                        "header lists {} times but n_time = {}",
                        times.len(),
                        self.n_time
                    )));
                }
                Grid::labeled(space, self.spacing, times.clone())
            }
            None => Grid::new(space, self.t_min, self.t_max, self.n_time, self.spacing),
        }
    }

    fn sample_count(&self) -> Result<usize> {
        self.n_space
            .checked_pow(self.dim as u32)
            .and_then(|n| n.checked_mul(self.n_time))
            .and_then(|n| n.checked_mul(self.components))
            .ok_or_else(|| Error::Format("header sizes overflow".into()))
    }
}

fn write_raw(mut out: impl Write, header: &Header, values: &[f64]) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    let json = serde_json::to_string(header).map_err(std::io::Error::other)?;
    writeln!(out, "{json}")?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()
}

fn read_raw(input: impl Read) -> Result<(Header, Vec<f64>)> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::Format(e.to_string()))?;
    if line.trim_end_matches('\n') != MAGIC {
        return Err(Error::Format("missing NSF1 magic".into()));
    }
    line.clear();
    reader.read_line(&mut line).map_err(|e| Error::Format(e.to_string()))?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    let count = header.sample_count()?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(|e| Error::Format(e.to_string()))?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} data bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

pub fn write_field(out: impl Write, field: &SpaceTimeField) -> Result<()> {
    let header = Header::for_grid(field.grid(), field.components());
    write_raw(out, &header, field.values()).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_field(input: impl Read) -> Result<SpaceTimeField> {
    let (header, values) = read_raw(input)?;
    let grid = header.grid()?;
    SpaceTimeField::from_values(&grid, header.components, values)
}

pub fn write_spatial(out: impl Write, field: &SpatialField) -> Result<()> {
    let header = Header::for_space(field.space(), field.components());
    write_raw(out, &header, field.values()).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_spatial(input: impl Read) -> Result<SpatialField> {
    let (header, values) = read_raw(input)?;
    if header.n_time != 1 {
        return Err(Error::Format(format!(
            "expected a spatial field (n_time = 1), found n_time = {}",
            header.n_time
        )));
    }
    SpatialField::from_values(header.space()?, header.components, values)
}

/// Reads just the header of an NSF1 file.
pub fn read_header(path: &Path) -> Result<Header> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim_end_matches('\n') != MAGIC {
        return Err(Error::Format("missing NSF1 magic".into()));
    }
    line.clear();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(line.trim_end())?)
}

pub fn save_field(path: &Path, field: &SpaceTimeField) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_field(BufWriter::new(file), field)
}

pub fn load_field(path: &Path) -> Result<SpaceTimeField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_field(file)
}

pub fn save_spatial(path: &Path, field: &SpatialField) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_spatial(BufWriter::new(file), field)
}

pub fn load_spatial(path: &Path) -> Result<SpatialField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_spatial(file)
}
