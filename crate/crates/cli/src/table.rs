//! CSV experiment tables with a comment header.
//!
//! Every table opens with `#`-prefixed comment lines (version stamp,
//! resolved config echo, derived scalars) followed by one column-name
//! line and the data rows. Floats print as `{:.12e}` so identical runs
//! produce identical bytes.

use std::fmt::Write as _;

/// One CSV cell.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(usize),
    Float(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Float(v)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    comments: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(comments: Vec<String>, columns: Vec<&'static str>) -> Table {
        Table { comments, columns, rows: Vec::new() }
    }

    pub fn comment(&mut self, line: String) {
        self.comments.push(line);
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.comments {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let mut first = true;
            for cell in row {
                if !first {
                    out.push(',');
                }
                first = false;
                match cell {
                    Cell::Int(v) => {
                        let _ = write!(out, "{v}");
                    }
                    Cell::Float(v) => {
                        let _ = write!(out, "{v:.12e}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
