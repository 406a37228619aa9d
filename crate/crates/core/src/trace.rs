//! Sampled run history and its CSV form.
//!
//! Column layout: `step,X_mm,F_N,x1_mm..xN_mm[,C1_pF..CN_pF][,code1..codeN]`.
//! The mechanical columns are always present; sensor and code columns are
//! appended by the sensing and acquisition stages.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mechanics::TransitionEvent;

/// Columnar time series of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// Imposed displacement per row (mm).
    pub displacement: Vec<f64>,
    /// Chain force per row (N).
    pub force: Vec<f64>,
    /// Per-cell elongation, indexed `[cell][row]` (mm).
    pub cell_displacement: Vec<Vec<f64>>,
    /// Per-cell plate gap, `[cell][row]` (mm); filled by the sensing stage.
    pub gap: Vec<Vec<f64>>,
    /// Per-channel capacitance, `[channel][row]` (pF); sensing stage.
    pub capacitance: Vec<Vec<f64>>,
    /// Per-channel converter output, `[channel][row]`; acquisition stage.
    pub code: Vec<Vec<u32>>,
}

impl Trace {
    pub fn with_cells(cells: usize) -> Self {
        Self {
            cell_displacement: vec![Vec::new(); cells],
            ..Default::default()
        }
    }

    pub fn rows(&self) -> usize {
        self.displacement.len()
    }

    pub fn cells(&self) -> usize {
        self.cell_displacement.len()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.cells();
        let mut header = String::from("step,X_mm,F_N");
        for i in 1..=n {
            header.push_str(&format!(",x{i}_mm"));
        }
        if !self.capacitance.is_empty() {
            for i in 1..=self.capacitance.len() {
                header.push_str(&format!(",C{i}_pF"));
            }
        }
        if !self.code.is_empty() {
            for i in 1..=self.code.len() {
                header.push_str(&format!(",code{i}"));
            }
        }
        writeln!(out, "{header}")?;
        for row in 0..self.rows() {
            let mut line = format!("{},{},{}", row, self.displacement[row], self.force[row]);
            for cell in &self.cell_displacement {
                line.push_str(&format!(",{}", cell[row]));
            }
            for channel in &self.capacitance {
                line.push_str(&format!(",{}", channel[row]));
            }
            for channel in &self.code {
                line.push_str(&format!(",{}", channel[row]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Argument("empty trace file".into()))??;
        let columns: Vec<&str> = header.trim().split(',').collect();
        if columns.len() < 3 || columns[0] != "step" {
            return Err(Error::Argument(format!("unrecognized trace header: {header}")));
        }
        let x_cols: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with('x') && c.ends_with("_mm"))
            .map(|(i, _)| i)
            .collect();
        let c_cols: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with('C') && c.ends_with("_pF"))
            .map(|(i, _)| i)
            .collect();
        let code_cols: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with("code"))
            .map(|(i, _)| i)
            .collect();

        let mut trace = Trace {
            cell_displacement: vec![Vec::new(); x_cols.len()],
            capacitance: vec![Vec::new(); c_cols.len()],
            code: vec![Vec::new(); code_cols.len()],
            ..Default::default()
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != columns.len() {
                return Err(Error::Argument(format!(
                    "trace row has {} fields, header has {}",
                    fields.len(),
                    columns.len()
                )));
            }
            let parse = |i: usize| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Argument(format!("bad number {:?}: {e}", fields[i])))
            };
            trace.displacement.push(parse(1)?);
            trace.force.push(parse(2)?);
            for (slot, &i) in trace.cell_displacement.iter_mut().zip(&x_cols) {
                slot.push(parse(i)?);
            }
            for (slot, &i) in trace.capacitance.iter_mut().zip(&c_cols) {
                slot.push(parse(i)?);
            }
            for (slot, &i) in trace.code.iter_mut().zip(&code_cols) {
                slot.push(fields[i].parse::<u32>().map_err(|e| {
                    Error::Argument(format!("bad code {:?}: {e}", fields[i]))
                })?);
            }
        }
        Ok(trace)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Write ground-truth events as `step,cell_id,direction,X_mm,F_before_N`.
pub fn write_events_csv<W: Write>(events: &[TransitionEvent], mut out: W) -> Result<()> {
    writeln!(out, "step,cell_id,direction,X_mm,F_before_N")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.step, e.cell_id, e.direction, e.displacement, e.force_before
        )?;
    }
    Ok(())
}

/// Read an events CSV written by [`write_events_csv`].
pub fn read_events_csv<R: Read>(input: R) -> Result<Vec<(usize, usize, String)>> {
    let mut rows = Vec::new();
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Argument("empty events file".into()))??;
    if !header.starts_with("step,cell_id,direction") {
        return Err(Error::Argument(format!("unrecognized events header: {header}")));
    }
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Argument(format!("short events row: {line}")));
        }
        let step = fields[0]
            .parse()
            .map_err(|e| Error::Argument(format!("bad step {:?}: {e}", fields[0])))?;
        let cell = fields[1]
            .parse()
            .map_err(|e| Error::Argument(format!("bad cell id {:?}: {e}", fields[1])))?;
        rows.push((step, cell, fields[2].to_string()));
    }
    Ok(rows)
}
