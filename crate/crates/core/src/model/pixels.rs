use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel area used when a configuration does not specify one: a 15 m grid.
pub const DEFAULT_CELL_AREA: f64 = 225.0;

const FIXED_COLUMNS: [&str; 5] = ["pixel_id", "x", "y", "count", "unit_id"];

/// Per-pixel event counts, areal-unit membership and covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelTable {
    pixel_id: Vec<i64>,
    x: Vec<f64>,
    y: Vec<f64>,
    count: Vec<u64>,
    unit_id: Vec<usize>,
    covariate_names: Vec<String>,
    /// Column-major: `covariates[c][i]` is covariate `c` at pixel `i`.
    covariates: Vec<Vec<f64>>,
    cell_area: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PixelRow {
    pub pixel_id: i64,
    pub x: f64,
    pub y: f64,
    pub count: u64,
    pub unit_id: usize,
    pub covariates: Vec<f64>,
}

impl PixelTable {
    pub fn new(covariate_names: Vec<String>, cell_area: f64) -> Result<Self> {
        if !(cell_area > 0.0) || !cell_area.is_finite() {
            return Err(Error::Config(format!(
                "cell area must be positive, got {cell_area}"
            )));
        }
        let mut seen = HashSet::new();
        for name in &covariate_names {
            if FIXED_COLUMNS.contains(&name.as_str()) || !seen.insert(name.clone()) {
                return Err(Error::Config(format!(
                    "invalid or duplicate covariate name `{name}`"
                )));
            }
        }
        let n_cov = covariate_names.len();
        Ok(PixelTable {
            pixel_id: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
            count: Vec::new(),
            unit_id: Vec::new(),
            covariate_names,
            covariates: vec![Vec::new(); n_cov],
            cell_area,
        })
    }

    pub fn push(&mut self, row: PixelRow) -> Result<()> {
        if row.covariates.len() != self.covariate_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.covariate_names.len(),
                got: row.covariates.len(),
            });
        }
        if let Some(k) = row.covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "pixel {}: non-finite value for covariate `{}`",
                row.pixel_id, self.covariate_names[k]
            )));
        }
        self.pixel_id.push(row.pixel_id);
        self.x.push(row.x);
        self.y.push(row.y);
        self.count.push(row.count);
        self.unit_id.push(row.unit_id);
        for (col, v) in self.covariates.iter_mut().zip(row.covariates) {
            col.push(v);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pixel_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixel_id.is_empty()
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn pixel_ids(&self) -> &[i64] {
        &self.pixel_id
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn counts(&self) -> &[u64] {
        &self.count
    }

    pub fn set_counts(&mut self, counts: Vec<u64>) -> Result<()> {
        if counts.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: counts.len(),
            });
        }
        self.count = counts;
        Ok(())
    }

    pub fn unit_ids(&self) -> &[usize] {
        &self.unit_id
    }

    /// One more than the largest unit index present.
    pub fn n_units_present(&self) -> usize {
        self.unit_id.iter().max().map_or(0, |m| m + 1)
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariate_names
            .iter()
            .position(|n| n == name)
            .map(|k| self.covariates[k].as_slice())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> PixelTable {
        let pick_f = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        PixelTable {
            pixel_id: indices.iter().map(|&i| self.pixel_id[i]).collect(),
            x: pick_f(&self.x),
            y: pick_f(&self.y),
            count: indices.iter().map(|&i| self.count[i]).collect(),
            unit_id: indices.iter().map(|&i| self.unit_id[i]).collect(),
            covariate_names: self.covariate_names.clone(),
            covariates: self.covariates.iter().map(|c| pick_f(c)).collect(),
            cell_area: self.cell_area,
        }
    }

    /// Parses the pixel CSV: `pixel_id,x,y,count,unit_id,<covariates...>`.
    pub fn read_csv<R: Read>(reader: R, cell_area: f64, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| parse_error(source, 1, e.to_string()))?
            .clone();
        let mut fixed_pos = [0usize; 5];
        for (slot, name) in fixed_pos.iter_mut().zip(FIXED_COLUMNS) {
            *slot = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_error(source, 1, format!("missing column `{name}`")))?;
        }
        let cov_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| !FIXED_COLUMNS.contains(h))
            .map(|(k, h)| (k, h.to_string()))
            .collect();
        let mut table = PixelTable::new(cov_cols.iter().map(|c| c.1.clone()).collect(), cell_area)?;
        let mut seen = HashSet::new();
        let mut record = csv::StringRecord::new();
        let mut row = 1usize;
        loop {
            row += 1;
            match rdr.read_record(&mut record) {
                Ok(true) => {}
                Ok(false) => break,
                Err(e) => return Err(parse_error(source, row, e.to_string())),
            }
            let cell = |k: usize| record.get(k).unwrap_or("");
            let num = |k: usize, name: &str| -> Result<f64> {
                let c = cell(k);
                match c.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(parse_error(
                        source,
                        row,
                        format!("non-numeric value `{c}` in column `{name}`"),
                    )),
                }
            };
            let pixel_id = cell(fixed_pos[0]).parse::<i64>().map_err(|_| {
                parse_error(
                    source,
                    row,
                    format!("invalid pixel_id `{}`", cell(fixed_pos[0])),
                )
            })?;
            if !seen.insert(pixel_id) {
                return Err(Error::DuplicatePixel(pixel_id));
            }
            let count_raw = num(fixed_pos[3], "count")?;
            if count_raw < 0.0 || count_raw.fract() != 0.0 {
                return Err(parse_error(
                    source,
                    row,
                    format!(
                        "count must be a non-negative integer, got `{}`",
                        cell(fixed_pos[3])
                    ),
                ));
            }
            let unit_id = cell(fixed_pos[4]).parse::<usize>().map_err(|_| {
                parse_error(
                    source,
                    row,
                    format!("invalid unit_id `{}`", cell(fixed_pos[4])),
                )
            })?;
            let covariates = cov_cols
                .iter()
                .map(|(k, name)| num(*k, name))
                .collect::<Result<Vec<_>>>()?;
            table.push(PixelRow {
                pixel_id,
                x: num(fixed_pos[1], "x")?,
                y: num(fixed_pos[2], "y")?,
                count: count_raw as u64,
                unit_id,
                covariates,
            })?;
        }
        log::info!(
            "{source}: loaded {} pixels with covariates {:?}",
            table.len(),
            table.covariate_names
        );
        Ok(table)
    }

    pub fn load(path: &Path, cell_area: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(
            std::io::BufReader::new(file),
            cell_area,
            &path.display().to_string(),
        )
    }

    /// Writes the table with shortest round-trip float formatting, so
    /// `read_csv(write_csv(t)) == t` bit for bit.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        write!(out, "pixel_id,x,y,count,unit_id")?;
        for name in &self.covariate_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(
                out,
                "{},{},{},{},{}",
                self.pixel_id[i], self.x[i], self.y[i], self.count[i], self.unit_id[i]
            )?;
            for col in &self.covariates {
                write!(out, ",{}", col[i])?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn parse_error(path: &str, row: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_string(),
        row,
        message,
    }
}
