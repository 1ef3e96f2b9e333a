//! Tidies per-cell aggregates into a long-format CSV `(x, y, metric, value)`
//! that any plotting tool can consume.

use std::fs;
use std::path::{Path, PathBuf};

use crate::Result;

fn collect_json_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_json_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Fields that are bookkeeping rather than plottable metrics.
const SKIP: &[&str] = &[
    "schema",
    "master_seed",
    "unix_time_secs",
    "runtime_ms",
];

/// Reads every schema-1 aggregate below `results_dir` and writes the long
/// CSV to `out_file`. Unreadable or incomplete cells are reported on stderr
/// and skipped; an empty directory yields a header-only file.
pub fn emit_plots_data(results_dir: &Path, out_file: &Path) -> Result<usize> {
    let mut files = Vec::new();
    if results_dir.is_dir() {
        collect_json_files(results_dir, &mut files)?;
    }
    files.sort();
    let mut rows: Vec<(String, String, String, f64)> = Vec::new();
    for path in files {
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("plots: skipping {}: {e}", path.display());
                continue;
            }
        };
        let value: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("plots: skipping {}: {e}", path.display());
                continue;
            }
        };
        let obj = match value.as_object() {
            Some(o) if o.get("schema").and_then(|s| s.as_u64()) == Some(1) => o,
            _ => continue,
        };
        let (x, y) = match obj.get("cell") {
            Some(cell) => (
                cell.get("x").and_then(|v| v.as_str()).unwrap_or("").to_string(),
                cell.get("y").and_then(|v| v.as_str()).unwrap_or("").to_string(),
            ),
            None => (
                obj.get("name")
                    .or_else(|| obj.get("suite"))
                    .and_then(|v| v.as_str())
                    .unwrap_or("")
                    .to_string(),
                String::new(),
            ),
        };
        for (k, v) in obj {
            if SKIP.contains(&k.as_str()) {
                continue;
            }
            if let Some(num) = v.as_f64() {
                rows.push((x.clone(), y.clone(), k.clone(), num));
            }
        }
    }
    rows.sort_by(|a, b| (&a.0, &a.1, &a.2).cmp(&(&b.0, &b.1, &b.2)));
    let mut text = String::from("x,y,metric,value\n");
    for (x, y, metric, value) in &rows {
        text.push_str(&format!("{x},{y},{metric},{value}\n"));
    }
    if let Some(parent) = out_file.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(out_file, text)?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("plot_data.csv");
        let n = emit_plots_data(dir.path(), &out).unwrap();
        assert_eq!(n, 0);
        assert_eq!(fs::read_to_string(&out).unwrap(), "x,y,metric,value\n");
    }

    #[test]
    fn one_cell_emits_its_metrics() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("cell.json"),
            r#"{"schema":1,"cell":{"x":"0.5","y":"2"},"coverage":0.94,"sd_ratio":1.01,
                "runtime_ms": 12, "name":"c"}"#,
        )
        .unwrap();
        fs::write(dir.path().join("junk.json"), "not json").unwrap();
        let out = dir.path().join("plot_data.csv");
        let n = emit_plots_data(dir.path(), &out).unwrap();
        assert_eq!(n, 2, "coverage and sd_ratio only");
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.contains("0.5,2,coverage,0.94"));
        assert!(text.contains("0.5,2,sd_ratio,1.01"));
        assert!(!text.contains("runtime_ms"));
    }

    #[test]
    fn grid_of_cells_emits_one_row_per_metric() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let sub = dir.path().join(format!("c{i}{j}"));
                fs::create_dir_all(&sub).unwrap();
                fs::write(
                    sub.join("agg.json"),
                    format!(
                        r#"{{"schema":1,"cell":{{"x":"{i}","y":"{j}"}},"coverage":0.9}}"#
                    ),
                )
                .unwrap();
            }
        }
        let out = dir.path().join("plot_data.csv");
        let n = emit_plots_data(dir.path(), &out).unwrap();
        assert_eq!(n, 9, "nine coverage rows");
    }
}
