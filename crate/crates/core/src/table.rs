use crate::error::{Error, Result};

/// A numeric table with a header row, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Shortest round-trip decimal form (`1e-7`, `0.25`, `NaN`).
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn with_columns(cols: &[&str]) -> Self {
        Table::new(cols.iter().map(|s| s.to_string()).collect())
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format_f64(*v))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let io = |e: csv::Error| Error::Io(e.to_string());
        let header = r.headers().map_err(io)?.iter().map(str::to_string).collect();
        let mut t = Table::new(header);
        for rec in r.records() {
            let rec = rec.map_err(io)?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Io(format!("bad number '{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            t.rows.push(row);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::with_columns(&["k", "t", "x1"]);
        t.push(vec![0.0, 0.1, 1.0 / 3.0]);
        t.push(vec![1.0, 1e-7, -2.5e300]);
        let s = t.to_csv().unwrap();
        assert!(s.starts_with("k,t,x1\n"));
        assert!(!s.contains('\r'));
        assert_eq!(Table::from_csv(&s).unwrap(), t);
    }
}
