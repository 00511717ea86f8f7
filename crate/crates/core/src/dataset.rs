//! Input/output samples and their CSV form.
//!
//! CSV files carry a header `x1,...,xn,y` and one observation per row.
//! Values are written with 17 significant digits so they read back to the
//! same `f64`.

use std::io::{Read, Write};

use crate::error::{PceError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Matrix, outputs: Vec<f64>) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.ncols() == 0 {
            return Err(PceError::Data("dataset needs at least one row and one input column".into()));
        }
        if inputs.nrows() != outputs.len() {
            return Err(PceError::Shape(format!(
                "{} input rows but {} outputs",
                inputs.nrows(),
                outputs.len()
            )));
        }
        if let Some(i) = inputs.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(PceError::Data(format!(
                "non-finite input at row {}, column {}",
                i / inputs.ncols(),
                i % inputs.ncols()
            )));
        }
        if let Some(i) = outputs.iter().position(|v| !v.is_finite()) {
            return Err(PceError::Data(format!("non-finite output at row {i}")));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn input_dimension(&self) -> usize {
        self.inputs.ncols()
    }

    /// Observations at the given row positions.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(rows),
            outputs: rows.iter().map(|&i| self.outputs[i]).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.input_dimension();
        let mut header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (row, y) in self.inputs.rows_iter().zip(&self.outputs) {
            let mut rec: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            rec.push(format_f64(*y));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV whose last column is the output. The header must be
    /// `x1..xn,y`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 2 {
            return Err(PceError::Data("CSV needs at least one input column and y".into()));
        }
        for (k, name) in header.iter().enumerate() {
            let want = if k + 1 == cols { "y".to_string() } else { format!("x{}", k + 1) };
            if name.trim() != want {
                return Err(PceError::Data(format!("header column {} is '{name}', expected '{want}'", k + 1)));
            }
        }
        let mut data = Vec::new();
        let mut outputs = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(PceError::Data(format!(
                    "row {} has {} fields, expected {cols}",
                    line + 1,
                    rec.len()
                )));
            }
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    PceError::Data(format!("row {}, column {}: cannot parse '{field}'", line + 1, k + 1))
                })?;
                if k + 1 == cols {
                    outputs.push(v);
                } else {
                    data.push(v);
                }
            }
        }
        let inputs = Matrix::from_row_major(outputs.len(), cols - 1, data)?;
        Self::new(inputs, outputs)
    }
}

/// Shortest-safe decimal: 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
