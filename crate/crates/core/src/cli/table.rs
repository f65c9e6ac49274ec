//! Result tables: CSV with a commented metadata header, or an equivalent JSON
//! document.
//!
//! CSV layout:
//!
//! ```text
//! # spinsqueeze 0.1.0
//! # command: steady
//! # seed: 0
//! # config: {...}
//! n,r,inverse_xi_sq
//! 1,1,1
//! 10,0.5,1.2
//! ```
//!
//! The first row after the comments names the columns, the second gives their
//! units (`1` for dimensionless). Numbers use the shortest representation that
//! parses back to the same double.

use serde::{Deserialize, Serialize};

use super::config::Format;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Ordered `key: value` metadata.
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|(c, _)| c.to_string()).collect(),
            units: columns.iter().map(|(_, u)| u.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => serde_json::to_string_pretty(&JsonTable::from(self)).expect("table serializes") + "\n",
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            for line in v.lines() {
                out.push_str(&format!("# {k}: {line}\n"));
            }
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        out.push_str(&self.units.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self, String> {
        let mut metadata = Vec::new();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.next_if(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim_start();
            let (k, v) = body.split_once(": ").ok_or_else(|| format!("bad metadata line '{line}'"))?;
            metadata.push((k.to_string(), v.to_string()));
        }
        let split = |l: Option<&str>, what: &str| -> Result<Vec<String>, String> {
            Ok(l.ok_or_else(|| format!("missing {what} row"))?
                .split(',')
                .map(str::to_string)
                .collect())
        };
        let columns = split(lines.next(), "column")?;
        let units = split(lines.next(), "units")?;
        if units.len() != columns.len() {
            return Err("units row width differs from the column row".into());
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| format!("row {k}: '{c}': {e}")))
                .collect::<Result<_, _>>()?;
            if row.len() != columns.len() {
                return Err(format!("row {k} has {} cells, expected {}", row.len(), columns.len()));
            }
            rows.push(row);
        }
        Ok(Self {
            name: name.into(),
            columns,
            units,
            rows,
            metadata,
        })
    }
}

#[derive(Serialize)]
struct JsonTable<'a> {
    name: &'a str,
    metadata: serde_json::Map<String, serde_json::Value>,
    columns: &'a [String],
    units: &'a [String],
    rows: &'a [Vec<f64>],
}

impl<'a> From<&'a ResultTable> for JsonTable<'a> {
    fn from(t: &'a ResultTable) -> Self {
        let metadata = t
            .metadata
            .iter()
            .map(|(k, v)| {
                let value = serde_json::from_str(v)
                    .ok()
                    .filter(serde_json::Value::is_object)
                    .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                (k.clone(), value)
            })
            .collect();
        Self {
            name: &t.name,
            metadata,
            columns: &t.columns,
            units: &t.units,
            rows: &t.rows,
        }
    }
}
