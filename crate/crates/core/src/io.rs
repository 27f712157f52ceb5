//! Snapshot streams and flat CSV files.
//!
//! Snapshots are written as JSON lines with the schema
//! `{sweep | t, wcm, surface, centers: [[x1, x2, ...], ...]}`; the dynamics
//! engine adds `engine` and `dt`. Float formatting is the shortest
//! round-trip representation, so equal runs produce equal bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::configuration::{surface_height, weighted_cm, Configuration, ModelSpec};
use crate::error::Result;

/// CSV layouts are versioned through the file name (`*.v1.csv`); bump this
/// whenever a header changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    pub wcm: f64,
    pub surface: f64,
    pub centers: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub engine: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dt: Option<f64>,
}

impl Snapshot {
    pub fn from_sweep(spec: &ModelSpec, cfg: &Configuration, sweep: u64) -> Self {
        Snapshot {
            sweep: Some(sweep),
            t: None,
            wcm: weighted_cm(spec, cfg),
            surface: surface_height(spec, cfg, None),
            centers: cfg.points(),
            engine: None,
            dt: None,
        }
    }

    pub fn from_time(spec: &ModelSpec, cfg: &Configuration, t: f64, dt: f64) -> Self {
        Snapshot {
            sweep: None,
            t: Some(t),
            wcm: weighted_cm(spec, cfg),
            surface: surface_height(spec, cfg, None),
            centers: cfg.points(),
            engine: Some("dynamics".into()),
            dt: Some(dt),
        }
    }

    pub fn configuration(&self) -> Result<Configuration> {
        Configuration::from_points(&self.centers)
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Minimal CSV writer: fixed header, numeric or plain-text cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Per-snapshot observables as CSV: `index,sweep_or_t,wcm,surface`.
pub fn snapshots_csv(snaps: &[Snapshot]) -> CsvTable {
    let mut t = CsvTable::new(["index", "sweep_or_t", "wcm", "surface"]);
    for (i, s) in snaps.iter().enumerate() {
        let clock = match (s.sweep, s.t) {
            (Some(sw), _) => sw.to_string(),
            (None, Some(t)) => t.to_string(),
            _ => String::new(),
        };
        t.push([i.to_string(), clock, s.wcm.to_string(), s.surface.to_string()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vessel;

    #[test]
    fn jsonl_schema_and_round_trip() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0).unwrap(), 1, 0.1, 1.0).unwrap();
        let cfg = Configuration::new(2, vec![0.5, 0.25]).unwrap();
        let s = Snapshot::from_sweep(&spec, &cfg, 7);
        let line = serde_json::to_string(&s).unwrap();
        assert_eq!(line, r#"{"sweep":7,"wcm":0.5,"surface":0.6,"centers":[[0.5,0.25]]}"#);
        let d = Snapshot::from_time(&spec, &cfg, 0.5, 1e-4);
        let line = serde_json::to_string(&d).unwrap();
        assert!(line.contains(r#""engine":"dynamics""#) && line.contains(r#""t":0.5"#));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        write_jsonl(&p, &[s.clone(), s.clone()]).unwrap();
        let back: Vec<Snapshot> = read_jsonl(&p).unwrap();
        assert_eq!(back, vec![s.clone(), s]);
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push([1.5, 2.0]);
        assert_eq!(t.to_csv_string(), "a,b\n1.5,2\n");
    }
}
