//! Curve series and their CSV/JSON files.
//!
//! CSV schema: `#` comment lines first (one `# metadata {json}` line, then one
//! `# series <name>: x=<col> y=<col>` line per series), then the header
//! `series,x,y,sigma_y` and one row per point.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{paper_defaults, ExperimentParams, Field, Source, ValidationPolicy};

pub const CSV_HEADER: [&str; 4] = ["series", "x", "y", "sigma_y"];
const METADATA_PREFIX: &str = "# metadata ";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("series `{name}`: {reason}")]
    BadSeries { name: String, reason: String },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> OutputError {
    OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// How a regenerated file is compared against a stored one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Exact,
    /// |Δy| ≤ 4·√(σ₁² + σ₂²) per row.
    FourSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub value: Option<f64>,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Subcommand and its arguments, without global flags.
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub version: String,
    pub tolerance: Tolerance,
    pub params: BTreeMap<String, ParamRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Metadata {
    pub fn new(command: Vec<String>, params: &ExperimentParams, tolerance: Tolerance) -> Self {
        let params = Field::ALL
            .iter()
            .map(|&f| {
                (
                    f.key().to_string(),
                    ParamRecord {
                        value: params.get(f),
                        source: params.source(f),
                    },
                )
            })
            .collect();
        Metadata {
            command,
            seed: None,
            trials: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            tolerance,
            params,
            notes: Vec::new(),
        }
    }

    pub fn with_run(mut self, seed: u64, trials: u64) -> Self {
        self.seed = Some(seed);
        self.trials = Some(trials);
        self
    }

    /// Rebuilds the recorded parameter set, provenance included.
    pub fn to_params(&self) -> Result<ExperimentParams, OutputError> {
        let mut p = paper_defaults();
        for (key, rec) in &self.params {
            let text = match rec.value {
                Some(v) => v.to_string(),
                None => "none".to_string(),
            };
            p.set(key, &text, rec.source)
                .map_err(|e| OutputError::Malformed(e.to_string()))?;
        }
        p.validate(&ValidationPolicy {
            allow_many_modes: true,
        })
        .map_err(|e| OutputError::Malformed(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub name: String,
    /// Names of the x, y and σ_y columns.
    pub columns: [String; 3],
    pub rows: Vec<[f64; 3]>,
}

impl CurveSeries {
    pub fn new(name: &str, x: &str, y: &str, rows: Vec<[f64; 3]>) -> Result<Self, OutputError> {
        let bad = |reason: &str| OutputError::BadSeries {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if rows.windows(2).any(|w| !(w[0][0] <= w[1][0])) {
            return Err(bad("rows are not sorted by x"));
        }
        if rows.iter().any(|r| !(r[2] >= 0.0)) {
            return Err(bad("negative or undefined sigma_y"));
        }
        Ok(CurveSeries {
            name: name.to_string(),
            columns: [x.to_string(), y.to_string(), format!("sigma_{y}")],
            rows,
        })
    }

    /// Points without error bars.
    pub fn exact(name: &str, x: &str, y: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, OutputError> {
        Self::new(name, x, y, points.into_iter().map(|(x, y)| [x, y, 0.0]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

/// Everything one command writes under one file stem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    #[serde(skip)]
    pub stem: String,
    pub metadata: Metadata,
    pub series: Vec<CurveSeries>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
}

/// One data row of a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub sigma_y: f64,
}

impl Artifact {
    pub fn to_csv(&self) -> Result<String, OutputError> {
        let mut buf = Vec::new();
        writeln!(buf, "{METADATA_PREFIX}{}", serde_json::to_string(&self.metadata)?)
            .expect("write to Vec");
        for s in &self.series {
            writeln!(buf, "# series {}: x={} y={}", s.name, s.columns[0], s.columns[1])
                .expect("write to Vec");
        }
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
            w.write_record(CSV_HEADER)?;
            for s in &self.series {
                for r in &s.rows {
                    w.serialize(CsvRow {
                        series: s.name.clone(),
                        x: r[0],
                        y: r[1],
                        sigma_y: r[2],
                    })?;
                }
            }
            w.flush().map_err(|e| OutputError::Csv(e.into()))?;
        }
        String::from_utf8(buf).map_err(|e| OutputError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, OutputError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<stem>.csv` and/or `<stem>.json` into `dir`, each atomically.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>, OutputError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut out = Vec::new();
        if matches!(format, Format::Csv | Format::Both) {
            let path = dir.join(format!("{}.csv", self.stem));
            write_atomic(&path, self.to_csv()?.as_bytes())?;
            out.push(path);
        }
        if matches!(format, Format::Json | Format::Both) {
            let path = dir.join(format!("{}.json", self.stem));
            write_atomic(&path, self.to_json()?.as_bytes())?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Temp file in the target directory, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| io_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Metadata and rows of a CSV file produced by [`Artifact::to_csv`].
pub fn parse_csv(text: &str) -> Result<(Metadata, Vec<CsvRow>), OutputError> {
    let mut meta = None;
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(METADATA_PREFIX) {
            meta = Some(serde_json::from_str::<Metadata>(rest)?);
        } else if !line.starts_with('#') {
            body.push_str(line);
            body.push('\n');
        }
    }
    let meta = meta.ok_or_else(|| OutputError::Malformed("no metadata line".into()))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(OutputError::Malformed(format!("unexpected header {header:?}")));
    }
    let rows = r.deserialize().collect::<Result<Vec<CsvRow>, _>>()?;
    Ok((meta, rows))
}

/// First disagreement between stored and regenerated rows, if any.
pub fn compare_rows(stored: &[CsvRow], fresh: &[CsvRow], tol: Tolerance) -> Option<String> {
    if stored.len() != fresh.len() {
        return Some(format!("{} rows stored, {} regenerated", stored.len(), fresh.len()));
    }
    for (i, (a, b)) in stored.iter().zip(fresh).enumerate() {
        if a.series != b.series || a.x != b.x {
            return Some(format!("row {}: key ({}, {}) vs ({}, {})", i + 1, a.series, a.x, b.series, b.x));
        }
        let ok = match tol {
            Tolerance::Exact => a.y == b.y && a.sigma_y == b.sigma_y,
            Tolerance::FourSigma => {
                let s = (a.sigma_y.powi(2) + b.sigma_y.powi(2)).sqrt();
                (a.y.is_nan() && b.y.is_nan()) || (a.y - b.y).abs() <= 4.0 * s
            }
        };
        if !ok {
            return Some(format!("row {} ({} at x = {}): y {} vs {}", i + 1, a.series, a.x, a.y, b.y));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn artifact() -> Artifact {
        let mut p = paper_defaults();
        p.set("chi", "0.02", Source::Override).unwrap();
        Artifact {
            stem: "demo".into(),
            metadata: Metadata::new(vec!["figures".into(), "fig1s".into()], &p, Tolerance::Exact).with_run(7, 100),
            series: vec![
                CurveSeries::exact("gamma", "t_us", "gamma", [(0.0, 0.68), (1.0, 0.1 + 0.2)]).unwrap(),
                CurveSeries::new("v", "t2_us", "v", vec![[2.0, 0.5, 0.01]]).unwrap(),
            ],
            result: None,
        }
    }

    #[test]
    fn series_rules() {
        assert!(CurveSeries::new("s", "x", "y", vec![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).is_err());
        assert!(CurveSeries::new("s", "x", "y", vec![[1.0, 0.0, -1.0]]).is_err());
        assert!(CurveSeries::new("s", "x", "y", vec![[1.0, 0.0, f64::NAN]]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let a = artifact();
        let text = a.to_csv().unwrap();
        assert!(text.contains("\nseries,x,y,sigma_y\n"));
        let (meta, rows) = parse_csv(&text).unwrap();
        assert_eq!(meta, a.metadata);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].y, 0.1 + 0.2);
        let p = meta.to_params().unwrap();
        assert_eq!(p.chi, 0.02);
        assert_eq!(p.source(Field::Chi), Source::Override);
        assert_eq!(p.source(Field::Eta), Source::Assumed);
    }

    #[test]
    fn comparison_modes() {
        let (_, rows) = parse_csv(&artifact().to_csv().unwrap()).unwrap();
        let mut moved = rows.clone();
        moved[2].y += 0.03;
        assert!(compare_rows(&rows, &rows, Tolerance::Exact).is_none());
        assert!(compare_rows(&rows, &moved, Tolerance::FourSigma).is_none());
        moved[2].y += 0.03;
        assert!(compare_rows(&rows, &moved, Tolerance::FourSigma).is_some());
        assert!(compare_rows(&rows, &rows[1..], Tolerance::Exact).is_some());
    }

    #[test]
    fn writes_both_files_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let paths = artifact().write(dir.path(), Format::Both).unwrap();
        assert_eq!(paths.len(), 2);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(json["metadata"]["seed"], 7);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(parse_csv("series,x,y,sigma_y\n").is_err());
        assert!(parse_csv("# metadata {\"oops\n").is_err());
    }
}
