//! Column-ordered result tables written as CSV.
//!
//! Every experiment emits one or more tables. Rows are built through a
//! [`RowBuilder`] that insists each row fills exactly the declared columns,
//! so a refactor that drops a field fails loudly instead of silently
//! shifting columns. Floats are rendered with the shortest representation
//! that round-trips, which keeps identical runs byte-identical.

use std::path::Path;

use crate::{CliError, Result};

#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self) -> RowBuilder<'_> {
        RowBuilder {
            table: self,
            values: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Returns the parsed float in column `name` of row `index`.
    pub fn value(&self, index: usize, name: &str) -> f64 {
        let col = self
            .columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column named {name}"));
        self.rows[index][col]
            .parse()
            .unwrap_or_else(|_| panic!("column {name} row {index} is not numeric"))
    }

    /// Returns the raw cell in column `name` of row `index`.
    pub fn cell(&self, index: usize, name: &str) -> &str {
        let col = self
            .columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column named {name}"));
        &self.rows[index][col]
    }

    /// Indices of rows where `name` equals the rendered `value`.
    pub fn rows_where(&self, name: &str, value: &str) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.cell(i, name) == value)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.write_record(&self.columns)
            .map_err(|e| CliError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct RowBuilder<'a> {
    table: &'a mut Table,
    values: Vec<String>,
}

impl RowBuilder<'_> {
    pub fn push(mut self, value: impl CellValue) -> Self {
        self.values.push(value.render());
        self
    }

    /// Commits the row, panicking if the arity disagrees with the header.
    pub fn finish(self) {
        assert_eq!(
            self.values.len(),
            self.table.columns.len(),
            "row has {} cells but the table declares {} columns",
            self.values.len(),
            self.table.columns.len()
        );
        self.table.rows.push(self.values);
    }
}

pub trait CellValue {
    fn render(&self) -> String;
}

impl CellValue for f64 {
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl CellValue for usize {
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl CellValue for u64 {
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl CellValue for &str {
    fn render(&self) -> String {
        (*self).to_string()
    }
}

impl CellValue for String {
    fn render(&self) -> String {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_render_and_query_back() {
        let mut t = Table::new(&["name", "x"]);
        t.row().push("a").push(0.1).finish();
        t.row().push("b").push(1e-17).finish();
        assert_eq!(t.len(), 2);
        assert_eq!(t.cell(0, "name"), "a");
        assert_eq!(t.value(1, "x"), 1e-17);
        assert_eq!(t.rows_where("name", "b"), vec![1]);
    }

    #[test]
    #[should_panic(expected = "row has 1 cells")]
    fn short_rows_are_rejected() {
        let mut t = Table::new(&["a", "b"]);
        t.row().push(1.0).finish();
    }

    #[test]
    fn csv_output_is_deterministic() {
        let dir = std::env::temp_dir().join(format!("lad-cli-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut t = Table::new(&["x", "y"]);
        t.row().push(0.30000000000000004).push("s").finish();
        let p1 = dir.join("a.csv");
        let p2 = dir.join("b.csv");
        t.write_csv(&p1).unwrap();
        t.write_csv(&p2).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().contains("0.30000000000000004"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
