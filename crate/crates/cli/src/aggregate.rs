//! CSV aggregation of JSON reports.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use shiftlab::Report;

#[derive(Debug, Serialize)]
pub struct Row {
    pub name: String,
    pub criterion: String,
    /// `true`, `false`, or `refused`.
    pub shadowing: String,
    pub max_residual: f64,
    #[serde(rename = "K")]
    pub k: String,
    pub runtime_ms: f64,
}

impl Row {
    pub fn from_report(r: &Report) -> Row {
        Row {
            name: r.scenario.name.clone(),
            criterion: r.classification.criterion.as_str().into(),
            shadowing: r
                .shadowing
                .as_ref()
                .map_or("refused".into(), |c| c.verdict.to_string()),
            max_residual: r.outcome.max_residual,
            k: r.shadowing.as_ref().map_or("".into(), |c| fmt_k(Some(c.k))),
            runtime_ms: r.wall_clock_ms,
        }
    }

    /// Reads the columns from report JSON, where infinite bounds appear as
    /// `null`.
    fn from_value(v: &Value) -> Option<Row> {
        let shadowing = &v["shadowing"];
        let (sh, k) = if shadowing.is_null() {
            ("refused".to_string(), String::new())
        } else {
            (
                shadowing["verdict"].as_bool()?.to_string(),
                fmt_k(shadowing["K"].as_f64()),
            )
        };
        Some(Row {
            name: v["scenario"]["name"].as_str()?.into(),
            criterion: v["classification"]["criterion"].as_str()?.into(),
            shadowing: sh,
            max_residual: v["outcome"]["max_residual"].as_f64()?,
            k,
            runtime_ms: v["wall_clock_ms"].as_f64()?,
        })
    }
}

fn fmt_k(k: Option<f64>) -> String {
    match k {
        Some(k) if k.is_finite() => k.to_string(),
        _ => "inf".into(),
    }
}

pub struct Aggregate {
    pub csv: String,
    pub rows: usize,
    pub warnings: Vec<String>,
}

/// One row per readable `*.json` report in `dir`, in file-name order.
pub fn aggregate_dir(dir: &Path) -> io::Result<Aggregate> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut warnings = Vec::new();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record([
        "name",
        "criterion",
        "shadowing",
        "max_residual",
        "K",
        "runtime_ms",
    ])?;
    let mut rows = 0;
    for p in &paths {
        let parsed = fs::read_to_string(p)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<Value>(&t).map_err(|e| e.to_string()))
            .and_then(|v| Row::from_value(&v).ok_or_else(|| "missing report fields".to_string()));
        match parsed {
            Ok(row) => {
                w.serialize(row)?;
                rows += 1;
            }
            Err(e) => warnings.push(format!("skipping {}: {e}", p.display())),
        }
    }
    if paths.is_empty() {
        warnings.push(format!("no JSON reports in {}", dir.display()));
    }
    let csv = String::from_utf8(
        w.into_inner()
            .map_err(|e| io::Error::other(e.to_string()))?,
    )
    .map_err(|e| io::Error::other(e.to_string()))?;
    Ok(Aggregate {
        csv,
        rows,
        warnings,
    })
}
